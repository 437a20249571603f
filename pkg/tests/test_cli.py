"""
End-to-end runs of the ground command line
"""

import json

import pytest
from PIL import Image

from src.cli import main as ground
from src.core.boxes import BoundingBox
from src.core.linker import top_relevant_concepts
from src.core.model import GroundingModel, vocab_path_for
from src.core.synth import SynthConfig, write_corpus
from src.utils.files import iter_json_lines, write_json, write_json_lines

from conftest import DATA_DIR

GOLDEN_REPORT = DATA_DIR / "golden_report.txt"


def read_records(path):
    return [record for _, record in iter_json_lines(path)]


def eval_json(tmp_path, pred, gt):
    out = tmp_path / f"{pred.stem}.report.json"
    assert ground(["-q", "eval", "--pred", str(pred), "--gt", str(gt), "--json-out", str(out)]) == 0
    return json.loads(out.read_text(encoding="utf-8"))


@pytest.fixture
def dog_model(tmp_path, dog_corpus):
    model = tmp_path / "model.json"
    assert ground(["-q", "train", "--corpus", str(dog_corpus), "--out", str(model)]) == 0
    return model


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory, small_world):
    corpus, planted = small_world
    out = tmp_path_factory.mktemp("world")
    write_corpus(corpus, planted, out)
    return out


@pytest.fixture(scope="module")
def world_predictions(tmp_path_factory, world_dir):
    work = tmp_path_factory.mktemp("run")
    model = work / "model.json"
    pred = work / "pred.jsonl"
    corpus = world_dir / "corpus.jsonl"
    assert ground(["-q", "train", "--corpus", str(corpus), "--out", str(model)]) == 0
    assert ground(["-q", "infer", "--corpus", str(corpus), "--model", str(model), "--out", str(pred)]) == 0
    return model, pred


def test_train_links_dog_to_animal(dog_model):
    model = GroundingModel.load(dog_model)
    assert model.vocabulary.tokens[-1] == "<UKN>"
    assert model.relevance.concepts == ("animal", "sky")
    assert top_relevant_concepts(model.relevance, "dog", 1) == ["animal"]
    assert model.relevance.value("dog", "animal") < model.relevance.value("dog", "sky")
    assert vocab_path_for(dog_model).is_file()


def test_missing_score_map_is_reported(tmp_path, corpus_builder, capsys):
    corpus_builder.add("a", "dog", 4, 4, {"animal": BoundingBox(0, 0, 1, 1)})
    manifest = corpus_builder.write()
    missing = corpus_builder.root / "maps" / "a_animal.smap"
    missing.unlink()
    assert ground(["train", "--corpus", str(manifest), "--out", str(tmp_path / "m.json")]) == 2
    assert str(missing) in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


def test_empty_corpus_is_an_input_error(tmp_path, capsys):
    manifest = tmp_path / "corpus.jsonl"
    manifest.write_text("", encoding="utf-8")
    assert ground(["train", "--corpus", str(manifest), "--out", str(tmp_path / "m.json")]) == 2
    assert "corpus is empty" in capsys.readouterr().err


def test_infer_writes_one_record_per_example(tmp_path, dog_corpus, dog_model):
    pred = tmp_path / "pred.jsonl"
    assert ground(["-q", "infer", "--corpus", str(dog_corpus), "--model", str(dog_model),
                   "--tau", "0.5", "--out", str(pred)]) == 0
    records = read_records(pred)
    assert [r["id"] for r in records] == ["a", "b", "c"]
    assert set(records[0]) == {"id", "box", "concept", "token", "E"}
    assert [r["concept"] for r in records] == ["animal", "sky", "animal"]
    assert [r["box"] for r in records] == [[2, 2, 6, 6], [0, 0, 9, 2], [4, 3, 8, 8]]
    assert records[2]["token"] == "dog"


def test_tau_zero_always_falls_back(tmp_path, dog_corpus, dog_model):
    pred = tmp_path / "pred.jsonl"
    assert ground(["-q", "infer", "--corpus", str(dog_corpus), "--model", str(dog_model),
                   "--tau", "0", "--out", str(pred)]) == 0
    for record in read_records(pred):
        assert record["concept"] == "FALLBACK"
        assert record["box"] == [0, 0, 9, 9]


def test_unknown_queries_fall_back(tmp_path, corpus_builder, dog_model):
    corpus_builder.add("x", "zebra crossing", 10, 10, {"animal": BoundingBox(1, 1, 5, 5), "sky": None})
    corpus_builder.add("y", "", 10, 10, {"animal": BoundingBox(1, 1, 5, 5), "sky": None})
    manifest = corpus_builder.write("unknown.jsonl")
    pred = tmp_path / "pred.jsonl"
    assert ground(["-q", "infer", "--corpus", str(manifest), "--model", str(dog_model),
                   "--tau", "0.5", "--out", str(pred)]) == 0
    records = read_records(pred)
    assert [r["id"] for r in records] == ["x", "y"]
    assert [r["concept"] for r in records] == ["FALLBACK", "FALLBACK"]
    assert all(r["box"] == [0, 0, 9, 9] for r in records)


def test_concepts_missing_from_the_model(tmp_path, corpus_builder, dog_model, capsys):
    corpus_builder.add("v", "a car", 10, 10, {"vehicle": BoundingBox(0, 0, 4, 4)})
    manifest = corpus_builder.write("vehicles.jsonl")
    code = ground(["infer", "--corpus", str(manifest), "--model", str(dog_model),
                   "--out", str(tmp_path / "pred.jsonl")])
    assert code == 2
    assert "vehicle" in capsys.readouterr().err


def test_mutual_information_model(tmp_path, dog_corpus):
    model = tmp_path / "mi.json"
    assert ground(["-q", "train", "--corpus", str(dog_corpus), "--statistic", "mutual-information",
                   "--out", str(model)]) == 0
    loaded = GroundingModel.load(model)
    assert loaded.default_tau == 0.0
    assert loaded.relevance.statistic == "mutual-information"
    pred = tmp_path / "pred.jsonl"
    assert ground(["-q", "infer", "--corpus", str(dog_corpus), "--model", str(model), "--out", str(pred)]) == 0
    assert len(read_records(pred)) == 3


def test_eval_prints_the_accuracy(tmp_path, capsys):
    pred = tmp_path / "pred.jsonl"
    gt = tmp_path / "gt.jsonl"
    write_json_lines(pred, [{"id": "a", "box": [0, 0, 3, 3]}, {"id": "b", "box": [0, 0, 1, 1]}])
    write_json_lines(gt, [{"id": "a", "box": [0, 0, 3, 3]}, {"id": "b", "box": [5, 5, 7, 7]}])
    assert ground(["eval", "--pred", str(pred), "--gt", str(gt)]) == 0
    assert "Accuracy (%)  : 50.00" in capsys.readouterr().out
    saved = json.loads((tmp_path / "pred.jsonl.eval.json").read_text(encoding="utf-8"))
    assert (saved["count"], saved["correct"]) == (2, 1)

    write_json_lines(pred, [{"id": "a", "box": [0, 0, 3, 3]}, {"id": "b", "box": [5, 5, 7, 7]}])
    assert ground(["eval", "--pred", str(pred), "--gt", str(gt)]) == 0
    assert "Accuracy (%)  : 100.00" in capsys.readouterr().out


def test_eval_id_mismatch(tmp_path, capsys):
    pred = tmp_path / "pred.jsonl"
    gt = tmp_path / "gt.jsonl"
    write_json_lines(pred, [{"id": "a", "box": [0, 0, 3, 3]}])
    write_json_lines(gt, [{"id": "a", "box": [0, 0, 3, 3]}, {"id": "b", "box": [0, 0, 1, 1]}])
    assert ground(["eval", "--pred", str(pred), "--gt", str(gt)]) == 2
    assert "no prediction for id(s): b" in capsys.readouterr().err


def test_inspect(dog_model, capsys):
    assert ground(["-q", "inspect", "--model", str(dog_model), "--word", "dog"]) == 0
    first = capsys.readouterr().out.splitlines()[0].split("\t")
    assert first[:2] == ["1", "animal"]
    assert float(first[2]) < 0.05

    assert ground(["-q", "inspect", "--model", str(dog_model), "--embed-dist", "dog", "dog"]) == 0
    assert capsys.readouterr().out == "0.0\n"

    assert ground(["-q", "inspect", "--model", str(dog_model), "--nearest", "dog", "--top-k", "2"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2

    assert ground(["inspect", "--model", str(dog_model), "--word", "unicorn"]) == 2


def test_synth_is_deterministic(tmp_path, small_world_config, capsys):
    settings = tmp_path / "settings.json"
    write_json(settings, dict(small_world_config.to_dict(), num_examples=30))
    digests = []
    for name in ("one", "two"):
        assert ground(["synth", "--config", str(settings), "--out", str(tmp_path / name)]) == 0
        lines = [l for l in capsys.readouterr().err.splitlines() if "Corpus digest:" in l]
        digests.append(lines[-1].split("Corpus digest:")[1].strip())
    assert digests[0] == digests[1]
    assert len(read_records(tmp_path / "one" / "corpus.jsonl")) == 30


def test_synth_template(tmp_path):
    template = tmp_path / "synth.json"
    assert ground(["-q", "synth", "--template", str(template)]) == 0
    assert SynthConfig.load(template) == SynthConfig()
    assert ground(["-q", "synth"]) == 2


def test_pipeline_on_a_small_world(tmp_path, world_dir, world_predictions):
    _, pred = world_predictions
    report = eval_json(tmp_path, pred, world_dir / "corpus.jsonl")
    assert report["count"] == 300
    assert report["accuracy"] >= 90.0


def test_baselines_trail_the_pipeline(tmp_path, world_dir, world_predictions):
    _, pred = world_predictions
    corpus = world_dir / "corpus.jsonl"
    pipeline = eval_json(tmp_path, pred, corpus)["accuracy"]

    entire = tmp_path / "entire.jsonl"
    assert ground(["-q", "baseline", "--corpus", str(corpus), "--method", "entire", "--out", str(entire)]) == 0
    assert all(r["box"] == [0, 0, 11, 11] and r["concept"] is None for r in read_records(entire))
    assert eval_json(tmp_path, entire, corpus)["accuracy"] < pipeline

    largest = tmp_path / "largest.jsonl"
    assert ground(["-q", "baseline", "--corpus", str(corpus), "--method", "largest",
                   "--proposals", str(world_dir / "proposals.jsonl"), "--out", str(largest)]) == 0
    assert eval_json(tmp_path, largest, corpus)["accuracy"] < pipeline


def test_largest_baseline_needs_proposals(tmp_path, dog_corpus):
    assert ground(["-q", "baseline", "--corpus", str(dog_corpus), "--method", "largest",
                   "--out", str(tmp_path / "b.jsonl")]) == 2


def test_render_writes_a_png(tmp_path, dog_corpus, dog_model):
    pred = tmp_path / "pred.jsonl"
    assert ground(["-q", "infer", "--corpus", str(dog_corpus), "--model", str(dog_model),
                   "--tau", "0.5", "--out", str(pred)]) == 0
    out = tmp_path / "a.png"
    assert ground(["-q", "render", "--corpus", str(dog_corpus), "--pred", str(pred),
                   "--id", "a", "--out", str(out), "--scale", "4"]) == 0
    with Image.open(out) as image:
        assert image.format == "PNG"
        assert image.size == (40, 40)
        assert image.getpixel((2 * 4, 2 * 4))[:3] == (255, 0, 0)
    assert ground(["-q", "render", "--corpus", str(dog_corpus), "--pred", str(pred),
                   "--id", "nope", "--out", str(out)]) == 2


def test_missing_command_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        ground([])
    assert excinfo.value.code == 2


def run_golden_pipeline(work_dir):
    corpus = work_dir / "world" / "corpus.jsonl"
    model = work_dir / "model.json"
    pred = work_dir / "pred.jsonl"
    steps = [
        ["-q", "synth", "--config", str(DATA_DIR / "golden_synth.json"), "--out", str(corpus.parent)],
        ["-q", "train", "--corpus", str(corpus), "--vocab-size", "50", "--out", str(model)],
        ["-q", "infer", "--corpus", str(corpus), "--model", str(model), "--out", str(pred)],
        ["-q", "eval", "--pred", str(pred), "--gt", str(corpus)],
    ]
    for argv in steps:
        assert ground(argv) == 0


def test_golden_report_file_is_committed():
    assert GOLDEN_REPORT.is_file(), "regenerate with scripts/make_golden_report.py"
    assert GOLDEN_REPORT.read_bytes().startswith(b"IoU threshold : > 0.50\n")


def test_golden_report_is_reproducible(tmp_path, capsys):
    golden = GOLDEN_REPORT.read_bytes()
    reports = []
    for name in ("first", "second"):
        capsys.readouterr()
        run_golden_pipeline(tmp_path / name)
        reports.append(capsys.readouterr().out)
    assert reports[0] == reports[1]
    assert reports[0].encode("utf-8") == golden
