"""Runtime bandwidth prediction with a hand-rolled random forest.

Static probes do not survive contact with a busy cluster, so runtime
bandwidth is learned from cheap snapshots instead: each training sample
pairs a feature vector (cluster size, probe bandwidth, host load at both
ends, retransmissions, distance) with the bandwidth actually sustained
while every pair was active. The regressor is bagged regression trees
grown on variance-reduction splits; nothing here depends on an external
ML library, which keeps the model file a plain JSON tree dump.

Determinism: a master seed fixes every bootstrap draw and feature subset,
so identical inputs rebuild an identical forest bit for bit. The in-memory
model keeps its training samples so later warm retrains can mix old and
new data; the JSON file format does not persist them.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from wanify.errors import ValidationError

FEATURE_NAMES = (
    "n_dcs",
    "snapshot_bw",
    "mem_util_dst",
    "cpu_load_src",
    "cpu_load_dst",
    "retransmissions",
    "distance_miles",
)

MIN_TRAIN_SAMPLES = 20
DEFAULT_TREES = 100
MIN_LEAF = 3
MAX_DEPTH = 12


@dataclass(frozen=True)
class FeatureVector:
    n_dcs: int
    snapshot_bw: float
    mem_util_dst: float
    cpu_load_src: float
    cpu_load_dst: float
    retransmissions: float
    distance_miles: float

    def as_array(self):
        return np.array(
            [
                self.n_dcs,
                self.snapshot_bw,
                self.mem_util_dst,
                self.cpu_load_src,
                self.cpu_load_dst,
                self.retransmissions,
                self.distance_miles,
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class TrainingSample:
    features: FeatureVector
    target: float
    sample_id: int = 0
    src: int = 0
    dst: int = 0
    # auxiliary: the pair's independently measured bandwidth, kept for
    # baseline comparisons; never serialized to the dataset CSV
    static_bw: float | None = None


class RegressionTree:
    """Single CART-style regression tree.

    Splits maximize the drop in sum of squared errors; candidate
    thresholds are midpoints between consecutive distinct feature values,
    and both children must keep at least min_leaf samples. Ties resolve
    to the lowest feature index, then the lowest threshold.
    """

    def __init__(self, max_features=None, min_leaf=MIN_LEAF, max_depth=MAX_DEPTH):
        self.max_features = max_features
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.root = None

    def fit(self, X, y, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
            raise ValidationError("X/y shape mismatch")
        self.n_features = X.shape[1]
        self.root = self._grow(X, y, 0, rng)
        return self

    def _grow(self, X, y, depth, rng):
        n = len(y)
        if depth >= self.max_depth or n < 2 * self.min_leaf or np.ptp(y) == 0.0:
            return {"value": float(y.mean())}

        mf = self.max_features or self.n_features
        if rng is not None and mf < self.n_features:
            feats = np.sort(rng.choice(self.n_features, size=mf, replace=False))
        else:
            feats = np.arange(self.n_features)

        mean_y = y.mean()
        parent_sse = float(((y - mean_y) ** 2).sum())
        best_red = 0.0
        best = None
        for f in feats:
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            ys = y[order]
            s1 = np.cumsum(ys)
            s2 = np.cumsum(ys * ys)
            k = np.arange(1, n)  # size of the left child
            valid = (k >= self.min_leaf) & (k <= n - self.min_leaf) & (xs[1:] > xs[:-1])
            if not valid.any():
                continue
            s1k, s2k = s1[:-1], s2[:-1]
            left_sse = s2k - s1k * s1k / k
            right_sse = (s2[-1] - s2k) - (s1[-1] - s1k) ** 2 / (n - k)
            red = parent_sse - left_sse - right_sse
            red[~valid] = -np.inf
            kb = int(np.argmax(red))  # first max -> lowest threshold
            if red[kb] > best_red:
                best_red = float(red[kb])
                thr = (xs[kb] + xs[kb + 1]) / 2.0
                # adjacent floats can round the midpoint up onto the right
                # value, which would empty the right child under <=
                if thr >= xs[kb + 1]:
                    thr = float(xs[kb])
                best = (int(f), float(thr))
        if best is None:
            return {"value": float(mean_y)}

        f, thr = best
        mask = X[:, f] <= thr
        return {
            "feature": f,
            "threshold": thr,
            "left": self._grow(X[mask], y[mask], depth + 1, rng),
            "right": self._grow(X[~mask], y[~mask], depth + 1, rng),
        }

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X))

        def walk(node, idx):
            if "value" in node:
                out[idx] = node["value"]
                return
            mask = X[idx, node["feature"]] <= node["threshold"]
            if mask.any():
                walk(node["left"], idx[mask])
            if (~mask).any():
                walk(node["right"], idx[~mask])

        walk(self.root, np.arange(len(X)))
        return out

    def to_dict(self):
        return self.root

    @classmethod
    def from_dict(cls, node, min_leaf=MIN_LEAF, max_depth=MAX_DEPTH):
        t = cls(min_leaf=min_leaf, max_depth=max_depth)
        t.root = node
        return t


@dataclass
class ForestModel:
    trees: list
    n_trees: int
    seed: int
    training_mae: float
    next_tree_id: int = 0
    samples: list = field(default_factory=list, repr=False)

    def predict_rows(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        acc = np.zeros(len(X))
        for t in self.trees:
            acc += t.predict(X)
        return acc / len(self.trees)


def _feature_matrix(samples):
    X = np.array([s.features.as_array() for s in samples])
    y = np.array([s.target for s in samples], dtype=float)
    return X, y


def _fit_tree(X, y, master_seed, tree_id):
    rng = np.random.default_rng([master_seed, tree_id])
    idx = rng.integers(0, len(y), size=len(y))
    mf = math.ceil(X.shape[1] / 3)
    tree = RegressionTree(max_features=mf)
    tree.fit(X[idx], y[idx], rng=rng)
    return tree


def train(samples, n_trees=DEFAULT_TREES, seed=0):
    if len(samples) < MIN_TRAIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_TRAIN_SAMPLES} samples, got {len(samples)}")
    if n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    X, y = _feature_matrix(samples)
    trees = [_fit_tree(X, y, seed, i) for i in range(n_trees)]
    model = ForestModel(trees, n_trees, seed, 0.0, next_tree_id=n_trees, samples=list(samples))
    model.training_mae = float(np.mean(np.abs(model.predict_rows(X) - y)))
    return model


def predict(model, feature_grid):
    """Bandwidth matrix from an NxN grid of feature vectors.

    Off-diagonal entries come from the forest; the diagonal is the
    snapshot value itself (intra-DC bandwidth is not predicted).
    """
    n = len(feature_grid)
    for row in feature_grid:
        if len(row) != n:
            raise ValidationError("feature grid must be square")
    out = np.zeros((n, n))
    rows, where = [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                out[i, j] = feature_grid[i][j].snapshot_bw
            else:
                rows.append(feature_grid[i][j].as_array())
                where.append((i, j))
    if rows:
        preds = model.predict_rows(np.array(rows))
        for (i, j), p in zip(where, preds):
            out[i, j] = float(p)
    return out


def warm_retrain(model, new_samples):
    """Refresh a quarter of the forest on old plus new data.

    Grows ceil(n_trees * 0.25) trees on the union of the retained
    training set and new_samples, then retires the same number of oldest
    trees, keeping the forest size constant.
    """
    if not new_samples:
        raise ValidationError("warm retrain needs at least one new sample")
    combined = list(model.samples) + list(new_samples)
    if len(combined) < MIN_TRAIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_TRAIN_SAMPLES} samples overall")
    k = math.ceil(model.n_trees * 0.25)
    X, y = _feature_matrix(combined)
    fresh = [_fit_tree(X, y, model.seed, model.next_tree_id + i) for i in range(k)]
    model.trees = model.trees[k:] + fresh
    model.next_tree_id += k
    model.samples = combined
    model.training_mae = float(np.mean(np.abs(model.predict_rows(X) - y)))
    return model


@dataclass
class StalenessTracker:
    error_threshold: float = 100.0
    window_size: int = 20
    window: deque = None
    retrain_flag: bool = False

    def __post_init__(self):
        if self.error_threshold <= 0:
            raise ValidationError("error threshold must be positive")
        if self.window_size < 1:
            raise ValidationError("window size must be >= 1")
        if self.window is None:
            self.window = deque(maxlen=self.window_size)


def track_staleness(tracker, predicted, observed):
    """Record one prediction error; the retrain flag holds exactly when
    the windowed mean error exceeds the threshold."""
    tracker.window.append(abs(float(predicted) - float(observed)))
    tracker.retrain_flag = (sum(tracker.window) / len(tracker.window)) > tracker.error_threshold
    return tracker


def save_model(model, path):
    doc = {
        "n_trees": model.n_trees,
        "seed": model.seed,
        "training_mae": model.training_mae,
        "next_tree_id": model.next_tree_id,
        "trees": [t.to_dict() for t in model.trees],
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)
        f.write("\n")


def load_model(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read model: {e}") from e
    try:
        trees = [RegressionTree.from_dict(t) for t in doc["trees"]]
        return ForestModel(
            trees,
            int(doc["n_trees"]),
            int(doc["seed"]),
            float(doc["training_mae"]),
            next_tree_id=int(doc.get("next_tree_id", len(trees))),
        )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed model file: {e}") from e


DATASET_COLUMNS = (
    "n_dcs",
    "src",
    "dst",
    "snapshot_bw",
    "mem_util_dst",
    "cpu_src",
    "cpu_dst",
    "retrans",
    "distance_miles",
    "target_bw",
)


def write_dataset_csv(samples, path, seed=None):
    with open(path, "w") as f:
        if seed is not None:
            f.write(f"# seed={seed}\n")
        f.write(",".join(DATASET_COLUMNS) + "\n")
        for s in samples:
            fv = s.features
            f.write(
                f"{fv.n_dcs},{s.src},{s.dst},{fv.snapshot_bw:.6f},"
                f"{fv.mem_util_dst:.6f},{fv.cpu_load_src:.6f},{fv.cpu_load_dst:.6f},"
                f"{fv.retransmissions:.6f},{fv.distance_miles:.6f},{s.target:.6f}\n"
            )


def read_dataset_csv(path):
    try:
        with open(path) as f:
            lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    except OSError as e:
        raise ValidationError(f"cannot read dataset: {e}") from e
    if not lines or tuple(lines[0].split(",")) != DATASET_COLUMNS:
        raise ValidationError("dataset header does not match expected schema")
    samples = []
    for row_id, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        if len(cells) != len(DATASET_COLUMNS):
            raise ValidationError("dataset row width mismatch")
        try:
            fv = FeatureVector(
                n_dcs=int(float(cells[0])),
                snapshot_bw=float(cells[3]),
                mem_util_dst=float(cells[4]),
                cpu_load_src=float(cells[5]),
                cpu_load_dst=float(cells[6]),
                retransmissions=float(cells[7]),
                distance_miles=float(cells[8]),
            )
            samples.append(
                TrainingSample(
                    fv,
                    target=float(cells[9]),
                    sample_id=row_id,
                    src=int(float(cells[1])),
                    dst=int(float(cells[2])),
                )
            )
        except ValueError as e:
            raise ValidationError(f"bad dataset row: {e}") from e
    return samples
