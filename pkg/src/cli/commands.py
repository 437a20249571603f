"""
Command-line interface: ground train | infer | eval | synth | inspect | baseline | render
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from tqdm import tqdm

from .. import __version__
from ..core.boxes import BoundingBox
from ..core.corpus import CorpusManifest
from ..core.errors import GroundingError, InvalidInputError, ModelMismatchError
from ..core.ess import ActivationThresholds
from ..core.evaluation import (
    accuracy,
    baseline_entire_image,
    baseline_largest_proposal,
    format_report,
    join_records,
    load_ground_truth,
    load_predictions,
    load_proposals,
)
from ..core.inference import ground_batch
from ..core.linker import nearest_tokens, top_relevant_concepts, word_embedding_distance
from ..core.model import GroundingModel
from ..core.render import render_grounding, save_grounding
from ..core.synth import SynthConfig, generate, write_corpus, write_template
from ..core.training import train_model
from ..utils.config import (
    ACTIVATION_AREA,
    ACTIVATION_CONFIDENCE,
    DEFAULT_VOCAB_SIZE,
    IOU_THRESHOLD,
    STATISTIC_NORMAL,
    STATISTICS,
    worker_count,
)
from ..utils.files import directory_digest, iter_json_lines, write_json, write_json_lines
from ..utils.summary import log_inference_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 2


def _show_progress(args) -> bool:
    return not args.quiet and sys.stderr.isatty()


def cmd_train(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    thresholds = ActivationThresholds(confidence=args.activation_conf, area=args.activation_area)
    model = train_model(
        manifest,
        vocab_size=args.vocab_size,
        thresholds=thresholds,
        statistic=args.statistic,
        workers=worker_count(),
        show_progress=_show_progress(args),
    )
    model.save(args.out)
    return EXIT_OK


def cmd_infer(args) -> int:
    model = GroundingModel.load(args.model)
    manifest = CorpusManifest.load(args.corpus)
    unknown = [c for c in manifest.concepts if not model.relevance.has_concept(c)]
    if unknown:
        raise ModelMismatchError(f"Concepts not in the model: {', '.join(unknown)}")
    tau = model.default_tau if args.tau is None else args.tau
    logger.info("Grounding %d examples with tau=%r", len(manifest), tau)

    results = list(tqdm(
        ground_batch(manifest.grounding_inputs(), model.relevance, model.vocabulary, tau,
                     thresholds=model.thresholds, include_unknown=args.include_unknown,
                     workers=worker_count()),
        total=len(manifest), desc="Grounding", unit="example", file=sys.stderr,
        disable=not _show_progress(args),
    ))
    write_json_lines(args.out, (r.to_record() for r in results))
    log_inference_summary(results)
    logger.info("✅ Predictions written to %s", args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = join_records(load_predictions(args.pred), load_ground_truth(args.gt))
    report = accuracy(records, threshold=args.iou)
    sys.stdout.write(format_report(report, by_category=args.by_category))
    json_out = args.json_out or str(Path(args.pred)) + ".eval.json"
    write_json(json_out, report.to_dict())
    logger.info("Report written to %s", json_out)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.template:
        write_template(args.template)
        logger.info("✅ Default synth settings written to %s", args.template)
        if not args.out:
            return EXIT_OK
    if not args.out:
        raise InvalidInputError("synth needs --out (or only --template)")
    config = SynthConfig.load(args.config) if args.config else SynthConfig()
    corpus, planted = generate(config)
    write_corpus(corpus, planted, args.out)
    logger.info("Corpus digest: %s", directory_digest(args.out))
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = GroundingModel.load(args.model)
    matrix = model.relevance
    out = sys.stdout
    if args.embed_dist:
        first, second = args.embed_dist
        out.write(f"{word_embedding_distance(matrix, first, second)!r}\n")
    elif args.nearest:
        for token, distance in nearest_tokens(matrix, args.nearest, args.top_k):
            out.write(f"{token}\t{distance!r}\n")
    elif args.all_words:
        for token in matrix.tokens:
            out.write(f"{token}\t{' '.join(top_relevant_concepts(matrix, token, args.top_k))}\n")
    elif args.word:
        for rank, concept in enumerate(top_relevant_concepts(matrix, args.word, args.top_k), start=1):
            out.write(f"{rank}\t{concept}\t{matrix.value(args.word, concept)!r}\n")
    else:
        raise InvalidInputError("inspect needs --word, --embed-dist, --nearest or --all-words")
    return EXIT_OK


def cmd_baseline(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    proposals = load_proposals(args.proposals) if args.proposals else {}
    records = []
    for example in manifest:
        if args.method == "entire":
            box = baseline_entire_image(example.width, example.height)
        else:
            if example.example_id not in proposals:
                raise InvalidInputError(f"No proposals for id {example.example_id}")
            box = baseline_largest_proposal(proposals[example.example_id])
        records.append({"id": example.example_id, "box": box.as_list(), "concept": None,
                        "token": None, "E": None})
    write_json_lines(args.out, records)
    logger.info("✅ %s baseline for %d examples written to %s", args.method, len(records), args.out)
    return EXIT_OK


def cmd_render(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    example = next((e for e in manifest if e.example_id == args.id), None)
    if example is None:
        raise InvalidInputError(f"No example with id {args.id} in {args.corpus}")
    prediction = None
    for _, record in iter_json_lines(args.pred):
        if str(record.get("id")) == args.id:
            prediction = record
            break
    if prediction is None:
        raise InvalidInputError(f"No prediction with id {args.id} in {args.pred}")

    maps = manifest.load_maps(example)
    concept = args.concept or prediction.get("concept")
    if concept not in maps:
        concept = next(iter(maps), None)
    image = render_grounding(
        maps.get(concept),
        example.width,
        example.height,
        predicted=BoundingBox.from_sequence(prediction["box"]),
        ground_truth=example.gt_box,
        scale=args.scale,
    )
    save_grounding(args.out, image)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ground",
        description="Unsupervised textual grounding: link query words to image concepts and return a box",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Learn a model from image-query pairs")
    p.add_argument("--corpus", required=True, help="Corpus manifest (JSON Lines)")
    p.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE, help="Words kept (K)")
    p.add_argument("--out", required=True, help="Model file to write")
    p.add_argument("--activation-conf", type=float, default=ACTIVATION_CONFIDENCE)
    p.add_argument("--activation-area", type=float, default=ACTIVATION_AREA)
    p.add_argument("--statistic", choices=STATISTICS, default=STATISTIC_NORMAL)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="Ground every query of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, default=None, help="Significance threshold (model default)")
    p.add_argument("--include-unknown", action="store_true", help="Let the unknown token be selected")
    p.add_argument("--out", required=True, help="Predictions file to write")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="Accuracy of predictions at an IoU threshold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True, help="Ground truth (a manifest with gt_box works too)")
    p.add_argument("--iou", type=float, default=IOU_THRESHOLD)
    p.add_argument("--by-category", action="store_true")
    p.add_argument("--json-out", default=None, help="JSON report path (default <pred>.eval.json)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="Generate a synthetic corpus")
    p.add_argument("--config", default=None, help="Synth settings JSON")
    p.add_argument("--out", default=None, help="Output directory")
    p.add_argument("--template", default=None, help="Write the default settings file here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="Look into a trained model")
    p.add_argument("--model", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--word", help="Most relevant concepts of a word")
    group.add_argument("--embed-dist", nargs=2, metavar=("W", "W2"), help="Distance of two word rows")
    group.add_argument("--nearest", metavar="W", help="Words with the closest rows")
    group.add_argument("--all-words", action="store_true", help="Top concepts of every word")
    p.add_argument("--top-k", type=int, default=5)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("baseline", help="Write baseline predictions")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", choices=("entire", "largest"), required=True)
    p.add_argument("--proposals", default=None, help="Proposals JSON Lines (for largest)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("render", help="Draw one grounding to a PNG")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--concept", default=None, help="Map shown as background")
    p.add_argument("--scale", type=int, default=16)
    p.set_defaults(func=cmd_render)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(format="%(levelname)s: %(message)s", stream=sys.stderr, level=level, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command

    Args:
        argv: Arguments without the program name (sys.argv[1:] when None)

    Returns:
        Exit code: 0 on success, 2 for bad input or I/O failures, 1 otherwise
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except (GroundingError, OSError) as e:
        logger.error("%s", e)
        return EXIT_INPUT
    except Exception as e:
        logger.error("Unexpected error: %s", e)
        logger.debug("Traceback", exc_info=True)
        return EXIT_UNEXPECTED
