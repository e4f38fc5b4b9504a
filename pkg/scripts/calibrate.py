"""Reproduce the committed calibration run.

Runs the acceptance configuration end to end and refreshes the calibration
artifacts plus the committed toy corpus. The run is deterministic: same
machine, same outputs, byte for byte.

    python3 scripts/calibrate.py [OUT_DIR]
"""

import json
import shutil
import sys
import time
from pathlib import Path

from sg2scene.config import ExperimentConfig
from sg2scene.experiment import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "calibration" / "run"
    cfg = ExperimentConfig.load(ROOT / "configs" / "acceptance.json")
    start = time.time()
    metrics = run_experiment(cfg, out, log_every=250)
    print(json.dumps(metrics, sort_keys=True, indent=1))
    print(f"wall seconds: {time.time() - start:.1f}")

    shutil.copy(out / "metrics.json", ROOT / "calibration" / "metrics.json")
    shutil.copy(out / "report.md", ROOT / "calibration" / "report.md")
    shutil.copy(out / "grid.png", ROOT / "calibration" / "grid.png")
    shutil.copy(out / "corpus.jsonl", ROOT / "tests" / "data" / "toy_corpus.jsonl")
    print("calibration artifacts refreshed")


if __name__ == "__main__":
    main()
