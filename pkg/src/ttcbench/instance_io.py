"""File formats: instance JSON (schema v1) and results CSV.

Instances are human-editable JSON; distributions are accepted when
normalized within 1e-9 and renormalized exactly on load.  Results are CSV
with a fixed column order and 17-significant-digit floats, so a parsed file
round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import EmptyInput, ParseError, SchemaVersionUnsupported
from .harness import SweepRow
from .model import CategoricalDist, Instance, PromptSpec

SCHEMA_VERSION = 1
LOAD_TOL = 1e-9
RESULT_COLUMNS = ("algorithm", "n", "trials", "mean_regret", "std_regret",
                  "ci95_lo", "ci95_hi", "success_rate", "seed")


def _load_dist(raw, what: str, size: int | None = None) -> CategoricalDist:
    try:
        arr = np.asarray([float(v) for v in raw], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: not a numeric list") from exc
    if arr.ndim != 1 or arr.size == 0:
        raise ParseError(f"{what}: empty or non-vector")
    if size is not None and arr.size != size:
        raise ParseError(f"{what}: expected length {size}, got {arr.size}")
    if np.any(arr < 0):
        raise ParseError(f"{what}: negative probability")
    s = float(arr.sum())
    if abs(s - 1.0) > LOAD_TOL:
        raise ParseError(f"{what} not normalized (sum={s!r})")
    return CategoricalDist(arr / s)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "actions": list(inst.actions),
        "ref_prior": [float(p) for p in inst.ref_prior.probs],
        "prompts": [
            {
                "id": p.id,
                "weight": float(inst.prompt_prior[i]),
                "rewards": [float(r) for r in p.rewards],
                "ref_policies": [[float(v) for v in rp.probs]
                                 for rp in p.ref_policies],
                "comparator": [float(v) for v in p.comparator.probs],
            }
            for i, p in enumerate(inst.prompts)
        ],
        "metadata": inst.metadata,
    }


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2,
                                     sort_keys=True) + "\n")


def instance_from_dict(doc: dict) -> Instance:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionUnsupported(f"schema_version {version!r} unsupported")
    try:
        actions = [str(a) for a in doc["actions"]]
        raw_prompts = doc["prompts"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc}") from exc
    if not actions or not raw_prompts:
        raise ParseError("instance needs at least one action and one prompt")
    ref_prior = _load_dist(doc.get("ref_prior", []), "ref_prior")
    n_refs = len(ref_prior)
    prompts = []
    weights = []
    for k, rp in enumerate(raw_prompts):
        where = f"prompt[{k}]"
        try:
            pid = str(rp["id"])
            rewards = np.asarray([float(v) for v in rp["rewards"]])
            policies_raw = rp["ref_policies"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from exc
        if rewards.size != len(actions):
            raise ParseError(f"{where}: rewards length mismatch")
        if len(policies_raw) != n_refs:
            raise ParseError(f"{where}: expected {n_refs} ref policies")
        policies = [_load_dist(p, f"{where}.ref_policies[{j}]", len(actions))
                    for j, p in enumerate(policies_raw)]
        comparator = None
        if rp.get("comparator") is not None:
            comparator = _load_dist(rp["comparator"], f"{where}.comparator",
                                    len(actions))
        weights.append(float(rp.get("weight", 1.0 / len(raw_prompts))))
        prompts.append(PromptSpec(pid, rewards, policies, comparator))
    prompt_prior = _load_dist(weights, "prompt weights")
    return Instance(actions, prompts, ref_prior, prompt_prior,
                    doc.get("metadata", {}))


def load_instance(path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    return instance_from_dict(doc)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([r.algorithm, r.n, r.trials, _fmt(r.mean_regret),
                    _fmt(r.std_regret), _fmt(r.ci95_lo), _fmt(r.ci95_hi),
                    _fmt(r.success_rate), r.seed])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty results file") from None
    if tuple(header) != RESULT_COLUMNS:
        raise ParseError(f"unexpected header {header!r}")
    rows = []
    for k, rec in enumerate(reader):
        if len(rec) != len(RESULT_COLUMNS):
            raise ParseError(f"row {k + 1}: expected {len(RESULT_COLUMNS)} fields")
        try:
            rows.append(SweepRow(
                algorithm=rec[0], n=int(rec[1]), trials=int(rec[2]),
                mean_regret=float(rec[3]), std_regret=float(rec[4]),
                ci95_lo=float(rec[5]), ci95_hi=float(rec[6]),
                success_rate=float(rec[7]), seed=int(rec[8])))
        except ValueError as exc:
            raise ParseError(f"row {k + 1}: {exc}") from exc
    return rows


def emit_results(rows: list[SweepRow], path, format: str = "csv") -> None:
    """Write sweep rows as CSV, or render the curves as an SVG figure."""
    if format == "csv":
        Path(path).write_text(rows_to_csv(rows))
    elif format == "svg":
        if not rows:
            raise EmptyInput("svg output needs at least one row")
        from .plotting import render_sweep_svg
        render_sweep_svg(rows, path)
    else:
        raise ValueError(f"unknown results format {format!r}")
