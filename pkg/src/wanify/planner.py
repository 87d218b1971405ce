"""Connection planning: closeness ranks -> per-pair connection envelopes.

Weak pairs get more parallel connections. For each ordered pair the plan
carries a [minCons, maxCons] connection range and the matching
[minBW, maxBW] bandwidth targets; the runtime agent moves inside that
envelope. Optional per-DC skew weights bias the counts toward chosen DCs
and a refactor matrix rescales bandwidth targets without touching counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from wanify.errors import ValidationError


@dataclass
class ConnectionPlan:
    min_cons: np.ndarray
    max_cons: np.ndarray
    min_bw: np.ndarray
    max_bw: np.ndarray

    def __post_init__(self):
        self.min_cons = np.asarray(self.min_cons, dtype=int)
        self.max_cons = np.asarray(self.max_cons, dtype=int)
        self.min_bw = np.asarray(self.min_bw, dtype=float)
        self.max_bw = np.asarray(self.max_bw, dtype=float)
        shapes = {m.shape for m in (self.min_cons, self.max_cons, self.min_bw, self.max_bw)}
        if len(shapes) != 1:
            raise ValidationError("plan matrices must share one shape")
        shape = shapes.pop()
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValidationError("plan matrices must be square")
        if np.any(self.min_cons < 1) or np.any(self.max_cons < self.min_cons):
            raise ValidationError("need 1 <= minCons <= maxCons everywhere")
        if np.any(self.min_bw < 0) or np.any(self.max_bw < self.min_bw - 1e-9):
            raise ValidationError("need 0 <= minBW <= maxBW everywhere")

    @property
    def n(self):
        return self.min_cons.shape[0]

    def unit_bw(self, i, j):
        """Per-connection bandwidth for a pair (maxBW / maxCons)."""
        return self.max_bw[i, j] / self.max_cons[i, j]

    def to_json_dict(self, seed=None, names=None):
        doc = {
            "minCons": self.min_cons.tolist(),
            "maxCons": self.max_cons.tolist(),
            "minBW": self.min_bw.tolist(),
            "maxBW": self.max_bw.tolist(),
        }
        if seed is not None:
            doc["seed"] = seed
        if names is not None:
            doc["names"] = list(names)
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        try:
            return cls(
                np.array(doc["minCons"]),
                np.array(doc["maxCons"]),
                np.array(doc["minBW"]),
                np.array(doc["maxBW"]),
            )
        except KeyError as e:
            raise ValidationError(f"plan file missing key: {e}") from e


def save_plan(plan, path, seed=None, names=None):
    with open(path, "w") as f:
        json.dump(plan.to_json_dict(seed=seed, names=names), f, indent=2, sort_keys=True)
        f.write("\n")


def load_plan(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read plan: {e}") from e
    return ConnectionPlan.from_json_dict(doc)


def plan_sums(rel):
    """Total closeness mass and per-row maxima.

    sum_all is the full matrix sum minus N, which removes the diagonal's
    rank-1 self entries; max_r[i] is the largest rank in row i.
    """
    r = np.asarray(rel, dtype=int)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError("closeness matrix must be square")
    if np.any(r < 1):
        raise ValidationError("closeness ranks start at 1")
    n = r.shape[0]
    sum_all = int(r.sum()) - n
    max_r = r.max(axis=1)
    if sum_all <= 0:
        raise ValidationError("degenerate closeness matrix (sum_all <= 0)")
    return sum_all, max_r


def expand_skew(per_dc_weights):
    """Per-DC weights -> symmetric pair matrix with off-diagonal mean 1.

    Pair weight is the mean of the two endpoint weights, then the whole
    off-diagonal block is normalized; the diagonal stays at 1.
    """
    w = np.asarray(per_dc_weights, dtype=float)
    if w.ndim != 1 or len(w) < 1:
        raise ValidationError("skew weights must be a non-empty vector")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValidationError("skew weights must be positive and finite")
    n = len(w)
    m = (w[:, None] + w[None, :]) / 2.0
    np.fill_diagonal(m, 1.0)
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        m[off] = m[off] / m[off].mean()
    return m


def _round_half_up(x):
    return np.floor(x + 0.5).astype(int)


def build_plan(bw, rel, max_parallel, skew=None, refactor=None):
    """Assemble the connection plan for a cluster.

    maxCons_ij = ceil(M * rel_ij / max_r_i), pinned to 1 on the diagonal;
    minCons_ij = max(floor(rel_ij * (M-1) / sum_all), 1). Skew weights
    rescale both counts (rounded half-up, clamped to [1, M] and to the
    min<=max ordering). Bandwidth targets are bw * cons * refactor, so
    minBW/minCons == maxBW/maxCons == bw * refactor for every pair.
    """
    b = np.asarray(bw, dtype=float)
    r = np.asarray(rel, dtype=int)
    if b.shape != r.shape:
        raise ValidationError("bandwidth and closeness shapes differ")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValidationError("matrices must be square")
    if np.any(b < 0) or not np.all(np.isfinite(b)):
        raise ValidationError("bandwidths must be finite and non-negative")
    m = int(max_parallel)
    if m < 1:
        raise ValidationError("max_parallel must be >= 1")
    n = b.shape[0]
    sum_all, max_r = plan_sums(r)

    if skew is None:
        w = np.ones((n, n))
    else:
        w = np.asarray(skew, dtype=float)
        if w.shape == (n,):
            w = expand_skew(w)
        if w.shape != (n, n):
            raise ValidationError("skew must be per-DC vector or full matrix")
    if refactor is None:
        rv = np.ones((n, n))
    else:
        rv = np.asarray(refactor, dtype=float)
        if rv.shape != (n, n) or np.any(rv <= 0):
            raise ValidationError("refactor must be a positive NxN matrix")

    # exact integer floor/ceil, no float division
    min_cand = (r * (m - 1)) // sum_all
    raw_min = np.maximum(min_cand, 1)
    raw_max = (m * r + (max_r[:, None] - 1)) // max_r[:, None]

    max_cons = np.clip(_round_half_up(raw_max * w), 1, m)
    np.fill_diagonal(max_cons, 1)
    min_cons = np.clip(_round_half_up(raw_min * w), 1, max_cons)

    min_bw = b * min_cons * rv
    max_bw = b * max_cons * rv
    return ConnectionPlan(min_cons, max_cons, min_bw, max_bw)
