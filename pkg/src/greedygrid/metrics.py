"""Rotation/translation errors and registration recall."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform, is_rotation


@dataclass(frozen=True)
class EvalThresholds:
    tau_r_deg: float
    tau_t_m: float

    def __post_init__(self):
        if not (self.tau_r_deg > 0 and self.tau_t_m > 0):
            raise ValueError("thresholds must be positive")


PRESETS = {
    "kitti": EvalThresholds(5.0, 2.0),
    "eth": EvalThresholds(5.0, 0.3),
    "faustpartial": EvalThresholds(10.0, 0.03),
}


def rre(R_true, R_est) -> float:
    """Relative rotation error in degrees: the geodesic angle between two rotations."""
    R_true = np.asarray(R_true, dtype=np.float64)
    R_est = np.asarray(R_est, dtype=np.float64)
    if not (is_rotation(R_true, 1e-6) and is_rotation(R_est, 1e-6)):
        raise ValueError("rre expects two rotation matrices")
    cos = (np.trace(R_est.T @ R_true) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, cos))))


def rte(t_true, t_est) -> float:
    """Relative translation error: Euclidean distance between translations."""
    diff = np.asarray(t_true, dtype=np.float64) - np.asarray(t_est, dtype=np.float64)
    return float(np.linalg.norm(diff))


@dataclass
class PairScore:
    pair_id: str
    rre_deg: float
    rte_m: float
    success: bool


@dataclass
class EvalReport:
    recall: float
    mean_rre_deg: float | None
    mean_rte_m: float | None
    per_pair: list[PairScore] = field(default_factory=list)
    thresholds: EvalThresholds | None = None

    def to_dict(self) -> dict:
        return {
            "recall": self.recall,
            "mean_rre_deg": self.mean_rre_deg,
            "mean_rte_m": self.mean_rte_m,
            "n_pairs": len(self.per_pair),
            "n_success": sum(p.success for p in self.per_pair),
            "thresholds": None
            if self.thresholds is None
            else {"tau_r_deg": self.thresholds.tau_r_deg, "tau_t_m": self.thresholds.tau_t_m},
            "per_pair": [
                {"id": p.pair_id, "rre_deg": p.rre_deg, "rte_m": p.rte_m, "success": p.success}
                for p in self.per_pair
            ],
        }


def summarize(scores, thresholds: EvalThresholds) -> EvalReport:
    """Recall plus mean errors over the successful pairs.

    ``scores`` holds ``(pair_id, rre_deg, rte_m)`` triples. Success requires
    both errors strictly below their thresholds. Means are ``None`` when no
    pair succeeds.
    """
    per_pair = [
        PairScore(str(pid), float(r), float(t), r < thresholds.tau_r_deg and t < thresholds.tau_t_m)
        for pid, r, t in scores
    ]
    if not per_pair:
        raise ValueError("no pairs to evaluate")
    ok = [p for p in per_pair if p.success]
    recall = len(ok) / len(per_pair)
    mean_r = float(np.mean([p.rre_deg for p in ok])) if ok else None
    mean_t = float(np.mean([p.rte_m for p in ok])) if ok else None
    return EvalReport(recall, mean_r, mean_t, per_pair, thresholds)


def pair_errors(truth: RigidTransform, estimate: RigidTransform) -> tuple[float, float]:
    return rre(truth.rotation, estimate.rotation), rte(truth.translation, estimate.translation)


def evaluate(manifest, results, thresholds: EvalThresholds) -> EvalReport:
    """Score registration results against a benchmark manifest.

    Parameters
    ----------
    manifest : dict
        Benchmark manifest; ``manifest["pairs"]`` entries carry ``id`` and
        ``gt``, the 16 row-major entries of the perturbation applied to the
        source fragment. The registration that undoes it is ``inverse(gt)``.
    results : mapping or list
        ``{pair_id: 4x4}`` or a list of ``{"id": ..., "transform": 16 floats}``;
        each estimate maps the source fragment onto the target.
    """
    pairs = manifest["pairs"] if isinstance(manifest, dict) else manifest
    estimates = _collect_results(results)
    ids = [str(p["id"]) for p in pairs]

    dup_manifest = sorted({i for i in ids if ids.count(i) > 1})
    missing = sorted(set(ids) - set(estimates))
    extra = sorted(set(estimates) - set(ids))
    problems = []
    if dup_manifest:
        problems.append(f"duplicate manifest pairs: {dup_manifest}")
    if missing:
        problems.append(f"missing results for pairs: {missing}")
    if extra:
        problems.append(f"results for unknown pairs: {extra}")
    if problems:
        raise ValueError("; ".join(problems))

    scores = []
    for p in pairs:
        truth = RigidTransform.from_matrix(p["gt"]).inverse()
        est = RigidTransform.from_matrix(estimates[str(p["id"])])
        scores.append((str(p["id"]), *pair_errors(truth, est)))
    return summarize(scores, thresholds)


def _collect_results(results) -> dict:
    if isinstance(results, dict) and "results" in results:
        results = results["results"]
    if isinstance(results, dict):
        return {str(k): v for k, v in results.items()}
    out = {}
    dups = []
    for entry in results:
        key = str(entry["id"])
        if key in out:
            dups.append(key)
        out[key] = entry["transform"]
    if dups:
        raise ValueError(f"duplicate results for pairs: {sorted(set(dups))}")
    return out
