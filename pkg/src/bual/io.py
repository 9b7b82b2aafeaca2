"""CSV and manifest output with byte-stable formatting."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__
from .loop import RoundRecord, aggregate, recognition_rate

DETAIL_HEADER = ["strategy", "seed", "round", "labeled_known", "queried", "r", "accuracy", "wall_s"]
AGGREGATE_HEADER = ["strategy", "round", "acc_mean", "acc_std", "r_mean", "r_std"]
AUDIT_HEADER = ["index", "p_aux", "r", "unc_p", "unc_n", "score", "selected", "true_is_known"]
SEPARATION_HEADER = ["index", "is_known", "max_prob_positive", "max_prob_negative"]


def fmt(x: float) -> str:
    return f"{x:.6f}"


def _writer(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = path.open("w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def flatten(results) -> list[RoundRecord]:
    """Accept ``{strategy: {seed: [records]}}``, ``{seed: [records]}`` or a flat list."""
    if isinstance(results, dict):
        out = []
        for v in results.values():
            out.extend(flatten(v))
        return out
    return list(results)


def write_metrics(records, path, aggregate_path=None, record_wall_time: bool = False):
    """Write per-round rows and (optionally) per-strategy seed aggregates.

    ``wall_s`` is left empty unless ``record_wall_time`` is set, so reruns of
    the same configuration produce identical bytes.
    """
    records = sorted(flatten(records), key=lambda r: (r.strategy, r.seed, r.round))
    if not records:
        raise ValueError("no records to write")
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(DETAIL_HEADER)
        for r in records:
            w.writerow([r.strategy, r.seed, r.round, r.labeled_known, len(r.queried), fmt(r.r), fmt(r.accuracy),
                        fmt(r.wall_s) if record_wall_time else ""])
    if aggregate_path is None:
        return
    by_strategy = {}
    for r in records:
        by_strategy.setdefault(r.strategy, {}).setdefault(r.seed, []).append(r)
    fh, w = _writer(Path(aggregate_path))
    with fh:
        w.writerow(AGGREGATE_HEADER)
        for name in sorted(by_strategy):
            for row in aggregate(by_strategy[name]):
                w.writerow([name, row["round"], fmt(row["acc_mean"]), fmt(row["acc_std"]),
                            fmt(row["r_mean"]), fmt(row["r_std"])])


def write_audit(record: RoundRecord, dataset, path):
    a = record.audit
    selected = set(np.asarray(record.queried).tolist())
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(AUDIT_HEADER)
        for i in range(len(a)):
            idx = int(a.indices[i])
            w.writerow([idx, fmt(a.p_aux[i]), fmt(a.r), fmt(a.unc_p[i]), fmt(a.unc_n[i]), fmt(a.score[i]),
                        int(idx in selected), int(dataset.y[idx] >= 0)])


def write_separation(indices, is_known, max_pos, max_neg, path):
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(SEPARATION_HEADER)
        for i, k, p, n in zip(indices, is_known, max_pos, max_neg):
            w.writerow([int(i), int(k), fmt(p), fmt(n)])


def build_manifest(cfg, results, started: str, finished: str, pool_digests: dict) -> dict:
    """Config echo plus per-seed summaries; feeding ``config`` back reproduces the run."""
    summary = {}
    for name, per_seed in results.items():
        summary[name] = {str(seed): {"final_accuracy": recs[-1].accuracy,
                                     "mean_recognition_rate": recognition_rate(recs),
                                     "wall_s": [r.wall_s for r in recs]}
                         for seed, recs in sorted(per_seed.items())}
    return {
        "software": {"package": "bual", "version": __version__},
        "config": cfg.sections(),
        "seeds": list(cfg.seeds),
        "initial_pool_digest": {str(k): v for k, v in sorted(pool_digests.items())},
        "results": summary,
        "started": started,
        "finished": finished,
    }


def write_manifest(manifest: dict, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
