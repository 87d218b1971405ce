"""Dollar cost of knowing your WAN bandwidth.

Active monitoring runs a short saturating transfer between DC pairs on a
schedule; each run burns VM time on both measurement endpoints plus the
cross-region transfer itself. Annual cost scales as

    runs_per_year * n_dcs * (vm_price * duration + transfer_gb * gb_price)

Prediction replaces the saturating transfer with a lightweight snapshot
(system metrics and a tiny probe) plus a yearly model-training budget, so
the per-event term shrinks by orders of magnitude while the schedule term
stays the same.

All GB figures are decimal (1 GB = 1000 MB, 1 MB = 8 Mb): 200 Mbps for
20 s is 0.5 GB on the wire.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from wanify.errors import ValidationError

MINUTES_PER_YEAR = 365 * 24 * 60


@dataclass(frozen=True)
class CostParams:
    vm_hourly_usd: float = 0.0052
    transfer_usd_per_gb: float = 0.02
    measurement_seconds: float = 20.0
    measurement_rate_mbps: float = 200.0
    snapshot_seconds: float = 1.0
    snapshot_gb: float = 0.025
    training_usd_per_year: float = 69.0

    def __post_init__(self):
        for name in (
            "vm_hourly_usd",
            "transfer_usd_per_gb",
            "measurement_seconds",
            "measurement_rate_mbps",
            "snapshot_seconds",
            "snapshot_gb",
            "training_usd_per_year",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} cannot be negative")


def transfer_gb(rate_mbps, seconds):
    """Decimal gigabytes moved by a transfer of rate_mbps for seconds."""
    if rate_mbps < 0 or seconds < 0:
        raise ValidationError("rate and duration cannot be negative")
    return rate_mbps * seconds / 8000.0


def runs_per_year(interval_minutes):
    if interval_minutes <= 0:
        raise ValidationError("interval must be positive")
    return MINUTES_PER_YEAR / interval_minutes


def measurement_event_cost(params=CostParams()):
    """Per-DC cost of one active measurement run: VM time plus transfer."""
    vm = params.vm_hourly_usd * params.measurement_seconds / 3600.0
    data = transfer_gb(params.measurement_rate_mbps, params.measurement_seconds)
    return vm + data * params.transfer_usd_per_gb


def snapshot_event_cost(params=CostParams()):
    """Per-DC cost of one snapshot collection."""
    vm = params.vm_hourly_usd * params.snapshot_seconds / 3600.0
    return vm + params.snapshot_gb * params.transfer_usd_per_gb


def runtime_monitoring_cost(runs, n_dcs, params=CostParams()):
    """Annual cost of scheduled active measurement across a cluster."""
    if runs < 0 or n_dcs < 1:
        raise ValidationError("need runs >= 0 and at least one DC")
    return runs * n_dcs * measurement_event_cost(params)


def prediction_approach_cost(predictions, n_dcs, params=CostParams()):
    """Annual cost of serving the same schedule from snapshots plus a
    yearly retraining budget."""
    if predictions < 0 or n_dcs < 1:
        raise ValidationError("need predictions >= 0 and at least one DC")
    return params.training_usd_per_year + predictions * n_dcs * snapshot_event_cost(params)


def savings_fraction(monitor_cost, predict_cost):
    if monitor_cost <= 0:
        raise ValidationError("monitoring cost must be positive")
    return 1.0 - predict_cost / monitor_cost


def cost_report_rows(n_dcs, intervals_minutes=(30, 20, 15), params=CostParams()):
    """Rows comparing monitoring at each cadence against one prediction
    deployment serving all of them. Keys match the report CSV columns."""
    rows = []
    total_monitor = 0.0
    total_runs = 0.0
    z = transfer_gb(params.measurement_rate_mbps, params.measurement_seconds) * params.transfer_usd_per_gb
    for iv in intervals_minutes:
        o = runs_per_year(iv)
        cost = runtime_monitoring_cost(o, n_dcs, params)
        total_monitor += cost
        total_runs += o
        rows.append(
            {
                "scenario": f"monitor-{iv}min",
                "O": o,
                "N": n_dcs,
                "x": params.vm_hourly_usd,
                "y": params.measurement_seconds / 3600.0,
                "z": z,
                "annual_cost": cost,
            }
        )
    pred = prediction_approach_cost(total_runs, n_dcs, params)
    rows.append(
        {
            "scenario": "prediction",
            "O": total_runs,
            "N": n_dcs,
            "x": params.vm_hourly_usd,
            "y": params.snapshot_seconds / 3600.0,
            "z": params.snapshot_gb * params.transfer_usd_per_gb,
            "annual_cost": pred,
        }
    )
    rows.append(
        {
            "scenario": "savings",
            "O": total_runs,
            "N": n_dcs,
            "x": 0.0,
            "y": 0.0,
            "z": 0.0,
            "annual_cost": savings_fraction(total_monitor, pred),
        }
    )
    return rows


def write_cost_report(rows, path):
    fields = ["scenario", "O", "N", "x", "y", "z", "annual_cost"]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow(row)
