"""Cluster topology: data centers, VM association and distance math.

A cluster is a set of named data centers with coordinates and a VM count
each. Bandwidth is measured per VM pair but planned per DC pair, so this
module also carries the aggregation (VM matrix -> DC matrix) and the
reverse chunking of a DC-level connection plan onto VM pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from wanify.errors import ValidationError

EARTH_RADIUS_MILES = 3958.8


def haversine_miles(a, b):
    """Great-circle distance in miles between (lat, lon) points in degrees."""
    lat1, lon1 = a
    lat2, lon2 = b
    for lat in (lat1, lat2):
        if not -90.0 <= lat <= 90.0:
            raise ValidationError(f"latitude out of range: {lat}")
    for lon in (lon1, lon2):
        if not -180.0 <= lon <= 180.0:
            raise ValidationError(f"longitude out of range: {lon}")
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * math.asin(math.sqrt(h))


@dataclass(frozen=True)
class Dc:
    name: str
    lat: float
    lon: float
    vm_count: int = 1

    def __post_init__(self):
        if not self.name:
            raise ValidationError("DC name must be non-empty")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"{self.name}: latitude out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"{self.name}: longitude out of range")
        if self.vm_count < 1:
            raise ValidationError(f"{self.name}: vm_count must be >= 1")


@dataclass(frozen=True)
class Topology:
    """Immutable DC set. max_parallel is the per-pair connection budget M."""

    dcs: tuple
    max_parallel: int = 8

    def __post_init__(self):
        object.__setattr__(self, "dcs", tuple(self.dcs))
        if len(self.dcs) < 1:
            raise ValidationError("topology needs at least one DC")
        names = [d.name for d in self.dcs]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate DC names")
        if self.max_parallel < 1:
            raise ValidationError("max_parallel must be >= 1")

    @property
    def n(self):
        return len(self.dcs)

    @property
    def names(self):
        return [d.name for d in self.dcs]

    def distance(self, i, j):
        a, b = self.dcs[i], self.dcs[j]
        return haversine_miles((a.lat, a.lon), (b.lat, b.lon))

    def distance_matrix(self):
        n = self.n
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = self.distance(i, j)
        return d

    def vm_association(self):
        owners = []
        for i, dc in enumerate(self.dcs):
            owners.extend([i] * dc.vm_count)
        return VmAssociation(tuple(owners))


@dataclass(frozen=True)
class VmAssociation:
    """Maps VM index -> owning DC index. DCs must appear contiguously and
    every DC must own at least one VM."""

    vm_to_dc: tuple

    def __post_init__(self):
        object.__setattr__(self, "vm_to_dc", tuple(int(x) for x in self.vm_to_dc))
        if not self.vm_to_dc:
            raise ValidationError("association needs at least one VM")
        seen = sorted(set(self.vm_to_dc))
        if seen != list(range(len(seen))):
            raise ValidationError("DC indices must be 0..K-1 with no gaps")
        last = -1
        for dc in self.vm_to_dc:
            if dc < last:
                raise ValidationError("VMs of one DC must be contiguous and ordered")
            last = dc

    @property
    def n_vms(self):
        return len(self.vm_to_dc)

    @property
    def n_dcs(self):
        return max(self.vm_to_dc) + 1

    def vms_of(self, dc):
        return [v for v, owner in enumerate(self.vm_to_dc) if owner == dc]


def associate_bandwidth(per_vm_bw, assoc):
    """Aggregate a per-VM-pair bandwidth matrix into a per-DC-pair matrix.

    Entry (i, j) is the sum of bandwidths over all VM pairs (u in DC i,
    v in DC j); with one VM per DC this is the identity. Diagonal entries
    aggregate the intra-DC block the same way.
    """
    m = np.asarray(per_vm_bw, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("per-VM bandwidth matrix must be square")
    if m.shape[0] != assoc.n_vms:
        raise ValidationError("matrix size does not match VM count")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValidationError("bandwidths must be finite and non-negative")
    n = assoc.n_dcs
    out = np.zeros((n, n))
    groups = [assoc.vms_of(dc) for dc in range(n)]
    for i in range(n):
        for j in range(n):
            out[i, j] = m[np.ix_(groups[i], groups[j])].sum()
    return out


@dataclass
class VmPlan:
    """Connection chunks over VM pairs.

    Unlike a DC-level plan, a VM pair here may carry zero connections:
    when a DC-level count splits across more VM pairs than it has
    connections, the surplus pairs simply open nothing."""

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
            raise ValidationError("chunk matrices must share one shape")
        if np.any(self.min_cons < 0) or np.any(self.max_cons < self.min_cons):
            raise ValidationError("need 0 <= minCons <= maxCons everywhere")

    @property
    def n(self):
        return self.min_cons.shape[0]


def chunk_plan(plan, assoc):
    """Split a DC-level connection plan across VM pairs.

    Connections divide as evenly as possible, remainder going to the
    lowest VM-pair indices first, so per-pair chunk sums equal the
    DC-level counts exactly; min/max bandwidth splits proportionally to
    the connection chunks so the per-connection rate is preserved.
    """
    if plan.n != assoc.n_dcs:
        raise ValidationError("plan size does not match DC count")
    v = assoc.n_vms
    min_c = np.zeros((v, v), dtype=int)
    max_c = np.zeros((v, v), dtype=int)
    min_b = np.zeros((v, v))
    max_b = np.zeros((v, v))
    groups = [assoc.vms_of(dc) for dc in range(assoc.n_dcs)]

    def split_int(total, k):
        base, rem = divmod(int(total), k)
        return [base + 1 if t < rem else base for t in range(k)]

    for i in range(assoc.n_dcs):
        for j in range(assoc.n_dcs):
            pairs = [(u, w) for u in groups[i] for w in groups[j]]
            k = len(pairs)
            for field, chunks in (
                (min_c, split_int(plan.min_cons[i, j], k)),
                (max_c, split_int(plan.max_cons[i, j], k)),
            ):
                for (u, w), c in zip(pairs, chunks):
                    field[u, w] = c
            # bandwidth follows the connection split to keep bw/cons intact
            for field, total, cons_field, dc_cons in (
                (min_b, plan.min_bw[i, j], min_c, plan.min_cons[i, j]),
                (max_b, plan.max_bw[i, j], max_c, plan.max_cons[i, j]),
            ):
                for u, w in pairs:
                    if dc_cons > 0:
                        field[u, w] = total * cons_field[u, w] / dc_cons
                    else:
                        field[u, w] = total / k
    return VmPlan(min_c, max_c, min_b, max_b)


def save_topology(topo, path):
    doc = {
        "dcs": [
            {"name": d.name, "lat": d.lat, "lon": d.lon, "vm_count": d.vm_count}
            for d in topo.dcs
        ],
        "max_parallel": topo.max_parallel,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_topology(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read topology: {e}") from e
    if not isinstance(doc, dict) or "dcs" not in doc:
        raise ValidationError("topology file needs a 'dcs' list")
    try:
        dcs = [
            Dc(d["name"], float(d["lat"]), float(d["lon"]), int(d.get("vm_count", 1)))
            for d in doc["dcs"]
        ]
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed DC entry: {e}") from e
    return Topology(tuple(dcs), int(doc.get("max_parallel", 8)))


def write_matrix_csv(path, matrix, names, seed=None):
    """Row-major matrix CSV with a DC-name header. A '# seed=' comment
    line records provenance when given; readers skip comments."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(names):
        raise ValidationError("matrix/names size mismatch")
    with open(path, "w") as f:
        if seed is not None:
            f.write(f"# seed={seed}\n")
        f.write(",".join(names) + "\n")
        for row in m:
            f.write(",".join(f"{x:.6f}" for x in row) + "\n")


def read_matrix_csv(path):
    """Inverse of write_matrix_csv. Returns (seed, names, matrix) where
    seed is None when the file carries no provenance comment."""
    seed = None
    try:
        with open(path) as f:
            lines = []
            for ln in f:
                ln = ln.strip()
                if not ln:
                    continue
                if ln.startswith("#"):
                    if ln[1:].strip().startswith("seed="):
                        try:
                            seed = int(ln.split("=", 1)[1])
                        except ValueError:
                            pass
                    continue
                lines.append(ln)
    except OSError as e:
        raise ValidationError(f"cannot read matrix: {e}") from e
    if not lines:
        raise ValidationError("empty matrix file")
    names = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(names):
            raise ValidationError("matrix row width does not match header")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as e:
            raise ValidationError(f"non-numeric matrix cell: {e}") from e
    if len(rows) != len(names):
        raise ValidationError("matrix is not square")
    return seed, names, np.array(rows)


def preset_topology(name):
    """Built-in topologies: 'fig3dc' is the calibrated near/near/far triple,
    'global8' an eight-region spread used for dataset generation."""
    if name == "fig3dc":
        return Topology(
            (
                Dc("east-1", 39.0, -77.5),
                Dc("east-2", 40.7, -74.0),
                Dc("ap-se", 1.35, 103.82),
            ),
            max_parallel=8,
        )
    if name == "global8":
        return Topology(
            (
                Dc("n-virginia", 38.9, -77.4),
                Dc("ohio", 40.1, -82.9),
                Dc("n-california", 37.4, -122.0),
                Dc("ireland", 53.3, -6.3),
                Dc("mumbai", 19.1, 72.9),
                Dc("singapore", 1.35, 103.82),
                Dc("tokyo", 35.7, 139.7),
                Dc("sydney", -33.9, 151.2),
            ),
            max_parallel=8,
        )
    raise ValidationError(f"unknown preset: {name}")
