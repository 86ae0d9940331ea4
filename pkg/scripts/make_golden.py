"""Regenerate tests/golden/ from the bundled synthetic corpus.

Run after an intended behavior change, then review the diff before committing.
"""
from __future__ import annotations

import argparse
import contextlib
import io
from importlib import resources
from pathlib import Path

from epiextract.cli import main

ROOT = Path(__file__).resolve().parents[1]


def regenerate(out_dir: Path) -> None:
    corpus = str(resources.files("epiextract") / "data" / "synthetic_corpus.jsonl")
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = out_dir / "rule_extractions.jsonl"
    with contextlib.redirect_stdout(io.StringIO()):
        assert main(["extract", "--method", "rule", "--input", corpus, "--output", str(ext)]) == 0
        assert main(["evaluate", "--input", corpus, "--extractions", str(ext), "--output", str(out_dir / "rule_eval.json")]) == 0
        assert main(["stats", "--input", corpus, "--output", str(out_dir / "stats_doctor.csv")]) == 0
        assert main(["stats", "--input", corpus, "--group-by", "icd10", "--output", str(out_dir / "stats_icd10.csv")]) == 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "golden")
    regenerate(ap.parse_args().out)
