"""Per-DC runtime agent: AIMD tuning inside the planned envelope.

Each source DC runs one agent that owns a connection pool per destination.
Every epoch it compares the monitored bandwidth against its target: a
shortfall beyond the significance delta halves both the connection count
and the bandwidth target (floored at the plan minimums), anything else
nudges the pool up by one connection (capped at the plan maximums).
Destinations with under a megabyte of pending transfer are left alone so
idle links do not thrash the pool. Throttle caps, when set, clamp the
bandwidth target last so bandwidth-rich destinations cannot crowd out the
rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from wanify.errors import ValidationError

SIGNIFICANT_DELTA = 100.0
PENDING_GATE_BYTES = 1_000_000.0  # 1 MB


class Mode(Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    IDLE = "idle"


@dataclass
class DestState:
    dst: int
    min_cons: int
    max_cons: int
    min_bw: float
    max_bw: float
    unit_bw: float
    target_cons: int
    target_bw: float
    mode: Mode = Mode.INCREASE
    throttle_cap: float | None = None


@dataclass
class AgentState:
    src: int
    dests: dict = field(default_factory=dict)


def init_agent(src, plan):
    """Agent for one source DC, targets starting at the plan maximums."""
    if not 0 <= src < plan.n:
        raise ValidationError(f"source index {src} out of range")
    state = AgentState(src=src)
    for dst in range(plan.n):
        if dst == src:
            continue
        max_c = int(plan.max_cons[src, dst])
        state.dests[dst] = DestState(
            dst=dst,
            min_cons=int(plan.min_cons[src, dst]),
            max_cons=max_c,
            min_bw=float(plan.min_bw[src, dst]),
            max_bw=float(plan.max_bw[src, dst]),
            unit_bw=float(plan.max_bw[src, dst]) / max_c,
            target_cons=max_c,
            target_bw=float(plan.max_bw[src, dst]),
            mode=Mode.INCREASE,
        )
    return state


def throttle_caps(achievable):
    """Caps for destinations that can out-consume the rest.

    The cap is the mean achievable bandwidth across destinations; only
    destinations strictly above the mean get capped (to the mean), so a
    uniform cluster is never throttled.
    """
    if not achievable:
        raise ValidationError("need at least one destination")
    for v in achievable.values():
        if v < 0 or not math.isfinite(v):
            raise ValidationError("achievable bandwidths must be finite and non-negative")
    mean = sum(achievable.values()) / len(achievable)
    return {dst: mean for dst, bw in achievable.items() if bw > mean}


def apply_throttle(state, caps):
    """Install throughput caps; takes effect immediately, not next epoch."""
    for dst, cap in caps.items():
        if dst in state.dests:
            d = state.dests[dst]
            d.throttle_cap = float(cap)
            d.target_bw = min(d.target_bw, d.throttle_cap)
    return state


@dataclass
class EpochObservation:
    monitored_bw: dict
    pending_bytes: dict


def aimd_step(state, obs, delta=SIGNIFICANT_DELTA):
    """One AIMD epoch over every destination of this agent.

    Decrease fires only on a significant shortfall (monitored strictly
    below target - delta); on-target and over-delivering destinations both
    take the additive path. Destinations with under 1 MB pending are
    skipped entirely.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    for dst, d in state.dests.items():
        pending = obs.pending_bytes.get(dst, 0.0)
        if pending < PENDING_GATE_BYTES:
            continue
        monitored = obs.monitored_bw.get(dst, 0.0)
        if monitored < d.target_bw - delta:
            d.mode = Mode.DECREASE
            d.target_cons = max(d.min_cons, d.target_cons // 2)
            d.target_bw = max(d.min_bw, d.target_bw / 2.0)
        else:
            d.mode = Mode.INCREASE
            d.target_cons = min(d.max_cons, d.target_cons + 1)
            d.target_bw = min(d.max_bw, d.unit_bw * d.target_cons)
        if d.throttle_cap is not None:
            d.target_bw = min(d.target_bw, d.throttle_cap)
    return state


def reconcile_pool(current, target):
    """Actions to move a connection pool from current to target size."""
    if current < 0 or target < 0:
        raise ValidationError("pool sizes cannot be negative")
    if target > current:
        return ["open"] * (target - current)
    return ["close"] * (current - target)
