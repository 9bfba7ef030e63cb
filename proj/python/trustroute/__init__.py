"""Trust-aware routing between a model's own knowledge and retrieved passages.

The heavy lifting lives in the native ``_core`` extension; this package adds
a few conveniences on top of the command-line entry point.
"""

from __future__ import annotations

import json
from typing import Any

from ._core import (
    ContractError,
    Error,
    TrustScores,
    allocation_count,
    decide,
    detect_conflict,
    efficiency,
    exact_match,
    normalize_answer,
    normalize_bias,
    pair_score,
    run_cli,
    trust_scores,
)

__all__ = [
    "CliError",
    "ContractError",
    "Error",
    "TrustScores",
    "allocation_count",
    "ask_record",
    "decide",
    "detect_conflict",
    "efficiency",
    "evaluate",
    "exact_match",
    "normalize_answer",
    "normalize_bias",
    "pair_score",
    "run_cli",
    "trust_scores",
]


class CliError(RuntimeError):
    def __init__(self, code: int, stderr: str):
        super().__init__(f"trustroute exited with {code}: {stderr.strip()}")
        self.code = code
        self.stderr = stderr


def _run_json(args: list[str]) -> Any:
    code, out, err = run_cli(args)
    if code != 0:
        raise CliError(code, err)
    return json.loads(out)


def ask_record(config: str, dataset: str, record_id: str | None = None) -> dict:
    """Run one dataset record through the pipeline and return its run record."""
    args = ["ask", "--config", config, "--record", dataset, "--json", "--no-timing"]
    if record_id is not None:
        args += ["--id", record_id]
    return _run_json(args)


def evaluate(config: str, dataset: str, workers: int | None = None) -> dict:
    """Evaluate a dataset and return the metrics report."""
    args = ["eval", "--config", config, "--dataset", dataset, "--json", "--no-timing"]
    if workers is not None:
        args += ["--workers", str(workers)]
    return _run_json(args)
