"""
Regenerate the golden evaluation report of the small synthetic world

Runs synth -> train -> infer -> eval through the command line and stores
the eval text under tests/data/. Re-run only when a report change is
intended.
"""

import contextlib
import io
import sys
import tempfile
from pathlib import Path

# Adjust paths
PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.cli import main as ground  # noqa

# Configuration
SETTINGS = PROJECT_ROOT / "tests" / "data" / "golden_synth.json"
GOLDEN_REPORT = PROJECT_ROOT / "tests" / "data" / "golden_report.txt"
VOCAB_SIZE = 50


def run_pipeline(work_dir: Path) -> str:
    corpus = work_dir / "world" / "corpus.jsonl"
    model = work_dir / "model.json"
    predictions = work_dir / "pred.jsonl"
    steps = [
        ["-q", "synth", "--config", str(SETTINGS), "--out", str(corpus.parent)],
        ["-q", "train", "--corpus", str(corpus), "--vocab-size", str(VOCAB_SIZE), "--out", str(model)],
        ["-q", "infer", "--corpus", str(corpus), "--model", str(model), "--out", str(predictions)],
    ]
    for argv in steps:
        if ground(argv) != 0:
            raise SystemExit(f"Step failed: ground {' '.join(argv)}")
    report = io.StringIO()
    with contextlib.redirect_stdout(report):
        code = ground(["-q", "eval", "--pred", str(predictions), "--gt", str(corpus)])
    if code != 0:
        raise SystemExit("Evaluation failed")
    return report.getvalue()


def main():
    with tempfile.TemporaryDirectory() as tmp:
        report = run_pipeline(Path(tmp))
    GOLDEN_REPORT.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN_REPORT.write_bytes(report.encode("utf-8"))
    print(report, end="")
    print(f"Golden report written to {GOLDEN_REPORT}")


if __name__ == "__main__":
    main()
