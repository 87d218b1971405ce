"""Deterministic WAN simulator: training-data source and planning oracle.

The model is intentionally small but keeps the observed shape of
wide-area traffic between data centers:

* one connection carries at most min(per_conn_cap, base_link_bw(d)) Mbps,
  where base_link_bw falls off with distance; parallel connections scale
  that up to the congestion knee, then a penalty claws throughput back;
* every DC has a NIC budget, split evenly between egress and ingress and
  reduced by ambient background load, shared by all its flows;
* sharing is weighted water-filling. A flow's weight is its connection
  count times a distance factor (near connections ramp faster than far
  ones), which is what lets chatty nearby pairs starve faraway pairs when
  everything runs the same connection count. Each connection also holds a
  small floor rate so extra parallelism always buys a weak pair something;
* optional multiplicative lognormal noise, clamped to [0.5x, 1.5x] and
  re-capped at the flow's own limit.

Everything is a pure function of (seed, epoch, flow set), so repeated runs
are bit-identical; measurement helpers never advance the world clock.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from wanify.errors import ValidationError
from wanify.predictor import FeatureVector, TrainingSample
from wanify.topology import Dc, Topology, preset_topology

_EPS = 1e-9
_STREAM_HOST = 1
_STREAM_NOISE = 2
_STREAM_DATA = 5


@dataclass
class SimConfig:
    topology: Topology
    seed: int = 0
    nic_capacity: float = 460.0  # Mbps per DC, halved into egress/ingress
    per_conn_cap: float = 220.0
    base_max: float = 1700.0
    base_min: float = 120.0
    d_near: float = 500.0
    d_far: float = 9000.0
    congestion_knee: int = 8
    knee_penalty: float = 0.05
    conn_floor: float = 4.0
    intra_dc_bw: float = 2000.0
    noise_sigma: float = 0.1
    background_max: float = 0.4

    def __post_init__(self):
        if self.per_conn_cap <= 0 or self.base_max <= 0 or self.base_min <= 0:
            raise ValidationError("rate parameters must be positive")
        if self.base_min > self.base_max:
            raise ValidationError("base_min cannot exceed base_max")
        if self.d_near <= 0 or self.d_far <= self.d_near:
            raise ValidationError("need 0 < d_near < d_far")
        if self.congestion_knee < 1 or self.knee_penalty < 0:
            raise ValidationError("bad congestion parameters")
        if self.noise_sigma < 0 or not 0 <= self.background_max < 1:
            raise ValidationError("bad noise/background parameters")
        nic = np.atleast_1d(np.asarray(self.nic_capacity, dtype=float))
        if len(nic) == 1:
            nic = np.full(self.topology.n, nic[0])
        if len(nic) != self.topology.n or np.any(nic <= 0):
            raise ValidationError("nic_capacity must be positive, scalar or per-DC")
        object.__setattr__(self, "nic_capacity", nic)


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int
    connections: int
    demand: float | None = None


@dataclass(frozen=True)
class HostStats:
    background: tuple
    cpu_load: tuple
    mem_util: tuple
    retransmissions: tuple


def effective_connections(connections, knee, penalty):
    """Usable parallelism: linear to the knee, penalized past it."""
    if connections < 1:
        raise ValidationError("connection count must be >= 1")
    eff = min(connections, knee) - penalty * max(0, connections - knee)
    return max(1.0, eff)


class SimWorld:
    """A cluster under simulation. Holds a config and an epoch counter;
    all randomness is derived from (seed, stream, epoch)."""

    def __init__(self, config):
        self.config = config
        self.epoch = 0
        topo = config.topology
        self.n = topo.n
        self.distances = topo.distance_matrix()
        self.base_bw = np.vectorize(self.base_link_bw)(self.distances)
        np.fill_diagonal(self.base_bw, config.base_max)
        self.conn_rate = np.minimum(config.per_conn_cap, self.base_bw)
        self.pair_weight = self.base_bw / config.base_max
        self._stats_cache = {}

    def base_link_bw(self, d):
        c = self.config
        if d <= c.d_near:
            return c.base_max
        if d >= c.d_far:
            return c.base_min
        frac = (d - c.d_near) / (c.d_far - c.d_near)
        return c.base_max - frac * (c.base_max - c.base_min)

    def step(self, epochs=1):
        self.epoch += epochs
        return self.epoch

    def host_stats(self, epoch=None):
        if epoch is None:
            epoch = self.epoch
        cached = self._stats_cache.get(epoch)
        if cached is not None:
            return cached
        c = self.config
        rng = np.random.default_rng([c.seed, _STREAM_HOST, epoch])
        bg = rng.uniform(0.0, c.background_max, self.n) if c.background_max > 0 else np.zeros(self.n)
        cpu = np.clip(0.10 + 1.5 * bg + rng.normal(0.0, 0.04, self.n), 0.02, 0.98)
        mem = np.clip(0.20 + 1.2 * bg + rng.normal(0.0, 0.05, self.n), 0.02, 0.98)
        retrans = rng.poisson(1.0 + 30.0 * bg, self.n).astype(float)
        stats = HostStats(tuple(bg), tuple(cpu), tuple(mem), tuple(retrans))
        self._stats_cache[epoch] = stats
        return stats


def _check_flows(world, flows):
    seen = set()
    for f in flows:
        if not (0 <= f.src < world.n and 0 <= f.dst < world.n):
            raise ValidationError(f"flow endpoint out of range: {f.src}->{f.dst}")
        if f.src == f.dst:
            raise ValidationError("intra-DC flows are not simulated")
        if f.connections < 1:
            raise ValidationError("flows need at least one connection")
        if f.demand is not None and f.demand < 0:
            raise ValidationError("demand cannot be negative")
        if (f.src, f.dst) in seen:
            raise ValidationError(f"duplicate flow for pair {f.src}->{f.dst}")
        seen.add((f.src, f.dst))


def allocate(world, flows, epoch=None):
    """Throughput for each flow under weighted max-min sharing.

    Returns a list of Mbps aligned with `flows`. Noise-free results never
    exceed any per-flow cap or DC budget; with noise on, each flow is
    still re-clamped to its own cap.
    """
    if epoch is None:
        epoch = world.epoch
    if not flows:
        return []
    _check_flows(world, flows)
    c = world.config
    stats = world.host_stats(epoch)
    n = len(flows)

    caps, weights, floors = [], [], []
    for f in flows:
        rate = float(world.conn_rate[f.src, f.dst])
        eff = effective_connections(f.connections, c.congestion_knee, c.knee_penalty)
        cap = rate * eff
        if f.demand is not None:
            cap = min(cap, f.demand)
        caps.append(cap)
        weights.append(f.connections * float(world.pair_weight[f.src, f.dst]))
        floors.append(min(c.conn_floor * f.connections, cap))

    # constraints: (budget, member flow indices) per DC side
    constraints = []
    for dc in range(world.n):
        budget = 0.5 * float(c.nic_capacity[dc]) * (1.0 - stats.background[dc])
        egress = [i for i, f in enumerate(flows) if f.src == dc]
        ingress = [i for i, f in enumerate(flows) if f.dst == dc]
        if egress:
            constraints.append([budget, egress])
        if ingress:
            constraints.append([budget, ingress])

    # keep reserved floors feasible everywhere
    scale = 1.0
    for budget, members in constraints:
        fsum = sum(floors[i] for i in members)
        if fsum > budget:
            scale = min(scale, budget / fsum)
    alloc = [fl * scale for fl in floors]

    remaining = []
    for budget, members in constraints:
        remaining.append(budget - sum(alloc[i] for i in members))

    frozen = [caps[i] - alloc[i] <= _EPS for i in range(n)]
    for it in range(n + len(constraints) + 2):
        for ci, (budget, members) in enumerate(constraints):
            if remaining[ci] <= _EPS:
                for i in members:
                    frozen[i] = True
        active = [i for i in range(n) if not frozen[i]]
        if not active:
            break
        t = math.inf
        for ci, (budget, members) in enumerate(constraints):
            rate = sum(weights[i] for i in members if not frozen[i])
            if rate > 0:
                t = min(t, remaining[ci] / rate)
        for i in active:
            t = min(t, (caps[i] - alloc[i]) / weights[i])
        if not math.isfinite(t) or t < 0:
            break
        for i in active:
            alloc[i] += weights[i] * t
        for ci, (budget, members) in enumerate(constraints):
            used = sum(weights[i] for i in members if not frozen[i]) * t
            remaining[ci] = max(0.0, remaining[ci] - used)
        for i in active:
            if caps[i] - alloc[i] <= _EPS:
                frozen[i] = True

    if c.noise_sigma > 0:
        rng = np.random.default_rng([c.seed, _STREAM_NOISE, epoch])
        factors = np.clip(np.exp(rng.normal(0.0, c.noise_sigma, n)), 0.5, 1.5)
        alloc = [min(a * float(fac), cap) for a, fac, cap in zip(alloc, factors, caps)]
    return alloc


def all_pair_flows(world, connections=1):
    return [
        Flow(i, j, connections)
        for i in range(world.n)
        for j in range(world.n)
        if i != j
    ]


def measure_snapshot(world, pair, epoch=None):
    """One-epoch single-connection probe of a pair, other pairs idle.

    Ambient background load still applies. Returns the feature vector
    used for prediction; the probe bandwidth is its snapshot_bw field.
    """
    if epoch is None:
        epoch = world.epoch
    i, j = pair
    bw = allocate(world, [Flow(i, j, 1)], epoch)[0]
    stats = world.host_stats(epoch)
    return FeatureVector(
        n_dcs=world.n,
        snapshot_bw=bw,
        mem_util_dst=stats.mem_util[j],
        cpu_load_src=stats.cpu_load[i],
        cpu_load_dst=stats.cpu_load[j],
        retransmissions=stats.retransmissions[i] + stats.retransmissions[j],
        distance_miles=float(world.distances[i, j]),
    )


def measure_stable(world, epoch=None, epochs=4):
    """Mean per-pair bandwidth with every ordered pair active at one
    connection, averaged over a few epochs. This is the runtime ground
    truth the predictor learns. Diagonal carries intra-DC bandwidth."""
    if epoch is None:
        epoch = world.epoch
    flows = all_pair_flows(world)
    acc = np.zeros(len(flows))
    for e in range(epochs):
        acc += np.array(allocate(world, flows, epoch + e))
    acc /= epochs
    out = np.full((world.n, world.n), float(world.config.intra_dc_bw))
    for f, bw in zip(flows, acc):
        out[f.src, f.dst] = bw
    return out


def measure_independent(world, pair, epoch=None, epochs=4):
    """Stable measurement with only this pair active: the static baseline."""
    if epoch is None:
        epoch = world.epoch
    i, j = pair
    total = 0.0
    for e in range(epochs):
        total += allocate(world, [Flow(i, j, 1)], epoch + e)[0]
    return total / epochs


def evaluate_conns(world, conns, epoch=None, demands=None):
    """Per-pair throughput for a full connection matrix (noise state as
    configured). Returns (flow dict keyed by pair, min off-diagonal)."""
    m = np.asarray(conns, dtype=int)
    flows = []
    for i in range(world.n):
        for j in range(world.n):
            if i != j:
                d = None if demands is None else demands.get((i, j))
                flows.append(Flow(i, j, int(m[i, j]), demand=d))
    got = allocate(world, flows, epoch)
    table = {(f.src, f.dst): bw for f, bw in zip(flows, got)}
    return table, min(table.values())


def brute_force_best_plan(world, max_parallel, epoch=None):
    """Exhaustive search for the connection matrix maximizing the minimum
    off-diagonal flow. Only tractable for tiny worlds; enumeration order
    makes the lexicographically smallest optimum the winner."""
    if world.n > 3:
        raise ValidationError("brute force is limited to 3 DCs")
    if max_parallel > 4:
        raise ValidationError("brute force is limited to max_parallel 4")
    if epoch is None:
        epoch = world.epoch
    pairs = [(i, j) for i in range(world.n) for j in range(world.n) if i != j]
    best_assign, best_min = None, -1.0
    for combo in itertools.product(range(1, max_parallel + 1), repeat=len(pairs)):
        conns = np.ones((world.n, world.n), dtype=int)
        for (i, j), k in zip(pairs, combo):
            conns[i, j] = k
        _, mn = evaluate_conns(world, conns, epoch)
        if mn > best_min + _EPS:
            best_min = mn
            best_assign = conns
    return best_assign


def generate_dataset(config, n_samples, cluster_sizes, seed=None):
    """Simulated training corpus: n_samples cluster draws, one
    TrainingSample per ordered pair of each draw.

    Every draw picks a cluster size, samples that many DCs from the
    config topology, and shifts the epoch window so background load and
    noise differ. Features come from single-connection probes; targets
    are the all-pairs stable measurement over the same window; each
    sample also carries the pair's independent measurement for baseline
    comparisons.
    """
    if n_samples < 0:
        raise ValidationError("n_samples cannot be negative")
    sizes = sorted(set(int(s) for s in cluster_sizes))
    if not sizes or sizes[0] < 2:
        raise ValidationError("cluster sizes must be >= 2")
    if sizes[-1] > config.topology.n:
        raise ValidationError("cluster size exceeds topology")
    if seed is None:
        seed = config.seed
    samples = []
    for k in range(n_samples):
        rng = np.random.default_rng([seed, _STREAM_DATA, k])
        size = sizes[int(rng.integers(len(sizes)))]
        chosen = sorted(rng.choice(config.topology.n, size=size, replace=False).tolist())
        sub_topo = Topology(
            tuple(config.topology.dcs[i] for i in chosen),
            config.topology.max_parallel,
        )
        sub_cfg = replace(
            config,
            topology=sub_topo,
            nic_capacity=np.asarray(config.nic_capacity)[chosen],
            seed=int(np.random.default_rng([seed, _STREAM_DATA, k, 1]).integers(2**31)),
        )
        world = SimWorld(sub_cfg)
        base = k * 8
        stable = measure_stable(world, epoch=base)
        for i in range(size):
            for j in range(size):
                if i == j:
                    continue
                fv = measure_snapshot(world, (i, j), epoch=base)
                samples.append(
                    TrainingSample(
                        features=fv,
                        target=float(stable[i, j]),
                        sample_id=k,
                        src=i,
                        dst=j,
                        static_bw=measure_independent(world, (i, j), epoch=base),
                    )
                )
    return samples


def fig3dc_config(**overrides):
    """Calibrated near/near/far triple used by the planning comparisons.
    Deterministic by default: noise and background variation off."""
    defaults = dict(
        topology=preset_topology("fig3dc"),
        seed=0,
        noise_sigma=0.0,
        background_max=0.0,
    )
    defaults.update(overrides)
    return SimConfig(**defaults)


def dataset_config(**overrides):
    """Eight-region pool with background variation and noise on, used to
    generate training corpora. NIC capacities differ per region and the
    per-connection tier is higher than the planning demos, so measured
    bandwidth spreads widely across cluster draws."""
    defaults = dict(
        topology=preset_topology("global8"),
        seed=0,
        nic_capacity=(2600.0, 520.0, 1500.0, 2100.0, 700.0, 1100.0, 3200.0, 420.0),
        per_conn_cap=620.0,
    )
    defaults.update(overrides)
    return SimConfig(**defaults)


_CONFIG_FIELDS = (
    "seed",
    "per_conn_cap",
    "base_max",
    "base_min",
    "d_near",
    "d_far",
    "congestion_knee",
    "knee_penalty",
    "conn_floor",
    "intra_dc_bw",
    "noise_sigma",
    "background_max",
)


def save_config(config, path):
    doc = {f: getattr(config, f) for f in _CONFIG_FIELDS}
    doc["nic_capacity"] = np.asarray(config.nic_capacity).tolist()
    doc["topology"] = {
        "dcs": [
            {"name": d.name, "lat": d.lat, "lon": d.lon, "vm_count": d.vm_count}
            for d in config.topology.dcs
        ],
        "max_parallel": config.topology.max_parallel,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_config(path):
    """Read a SimConfig JSON; a bare topology file gets default settings."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read config: {e}") from e
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    if "topology" not in doc:
        return SimConfig(topology=load_topology_dict(doc))
    topo = load_topology_dict(doc["topology"])
    kwargs = {k: doc[k] for k in _CONFIG_FIELDS if k in doc}
    if "nic_capacity" in doc:
        kwargs["nic_capacity"] = doc["nic_capacity"]
    return SimConfig(topology=topo, **kwargs)


def load_topology_dict(doc):
    if "dcs" not in doc:
        raise ValidationError("topology needs a 'dcs' list")
    try:
        dcs = [
            Dc(d["name"], float(d["lat"]), float(d["lon"]), int(d.get("vm_count", 1)))
            for d in doc["dcs"]
        ]
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed DC entry: {e}") from e
    return Topology(tuple(dcs), int(doc.get("max_parallel", 8)))
