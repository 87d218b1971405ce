"""Command-line front end.

Subcommands cover the whole pipeline: generate a topology or a simulated
training corpus, train and apply the bandwidth predictor, turn a bandwidth
matrix into a connection plan, run the adaptive simulation under a chosen
strategy, brute-force small instances for comparison, and price the
monitoring schedule.

Exit codes: 0 on success, 2 for invalid input (ValidationError), 1 for
anything unexpected. Set WANIFY_LOG=INFO (or DEBUG) for progress output.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from wanify import agent as agent_mod
from wanify import costmodel, netsim, predictor, relations, topology
from wanify.errors import ValidationError
from wanify.planner import ConnectionPlan, build_plan, save_plan

log = logging.getLogger("wanify")

_INJECT_STREAM = 77


def pinned_plan(world, connections, stable=None):
    """Plan that fixes every off-diagonal pair at one connection count.

    Bandwidth targets scale the measured one-connection matrix linearly,
    which is the same assumption the adaptive planner makes.
    """
    if stable is None:
        stable = netsim.measure_stable(world, epoch=0)
    n = world.n
    cons = np.full((n, n), int(connections), dtype=int)
    np.fill_diagonal(cons, 1)
    bw = np.asarray(stable, dtype=float) * cons
    np.fill_diagonal(bw, 0.0)
    return ConnectionPlan(cons, cons, bw, bw)


def build_strategy_plan(world, strategy, gap=relations.DEFAULT_GAP, stable=None):
    if stable is None:
        stable = netsim.measure_stable(world, epoch=0)
    m = world.config.topology.max_parallel
    if strategy == "heterogeneous":
        rel = relations.infer_dc_relations(stable, gap=gap)
        return build_plan(stable, rel, m), rel
    if strategy == "uniform":
        return pinned_plan(world, m, stable), None
    if strategy == "single":
        return pinned_plan(world, 1, stable), None
    raise ValidationError(f"unknown strategy: {strategy}")


def run_simulation(
    config,
    strategy="heterogeneous",
    epochs=50,
    pending_mb=100.0,
    inject_pct=0.0,
    gap=relations.DEFAULT_GAP,
):
    """Drive per-source agents against the simulator for a number of epochs.

    Only the heterogeneous strategy throttles rich destinations; pinned
    strategies have no slack to redistribute. Error injection perturbs the
    submitted flows (and what the trace records), never the agent state, so
    the agents see honest feedback about a corrupted execution.

    Returns (summary dict, trace rows). A target-vs-monitored gap over
    100 Mbps counts as significant.
    """
    if epochs < 1:
        raise ValidationError("need at least one epoch")
    if not 0 <= inject_pct < 1:
        raise ValidationError("inject_pct must be in [0, 1)")
    world = netsim.SimWorld(config)
    stable = netsim.measure_stable(world, epoch=0)
    plan, rel = build_strategy_plan(world, strategy, gap=gap, stable=stable)
    agents = {src: agent_mod.init_agent(src, plan) for src in range(world.n)}
    throttles = {}
    if strategy == "heterogeneous":
        # Throttling exists to stop nearby pairs from eating bandwidth a
        # distant pair could have used, so it only applies to destinations
        # that are strictly closer (lower closeness index) than the
        # source's weakest destination class; between same-class
        # destinations there is nothing to redistribute, and capping one
        # of two near-identical links at their mean just pins it. The
        # achievable estimate fed to the mean is the measured share
        # itself: maxBW extrapolates linear connection scaling into a
        # contended network and lands above any egress share, so a mean of
        # maxBWs would never bind, while the mean of measured shares is
        # the fair egress split rich pairs must come down to for starved
        # pairs to recover.
        for src, st in agents.items():
            dests = list(st.dests)
            worst = max(rel[src, d] for d in dests)
            measured = {d: float(stable[src, d]) for d in dests}
            caps = {
                d: cap
                for d, cap in agent_mod.throttle_caps(measured).items()
                if rel[src, d] < worst
            }
            if caps:
                agent_mod.apply_throttle(st, caps)
                throttles[src] = caps

    pending = pending_mb * 1e6
    pair_history = {}
    per_epoch_min = []
    trace = []
    significant_total = 0
    significant_late = 0

    for epoch in range(epochs):
        flows = []
        targets = []  # clean agent targets, aligned with flows
        for src in range(world.n):
            for d in agents[src].dests.values():
                flows.append(netsim.Flow(src, d.dst, d.target_cons, demand=d.target_bw))
                targets.append((src, d))
        if inject_pct > 0:
            rng = np.random.default_rng([config.seed, _INJECT_STREAM, epoch])
            corrupted = []
            for f in flows:
                c_fac = 1.0 + rng.uniform(-inject_pct, inject_pct)
                b_fac = 1.0 + rng.uniform(-inject_pct, inject_pct)
                cons = max(1, int(np.floor(f.connections * c_fac + 0.5)))
                corrupted.append(
                    netsim.Flow(f.src, f.dst, cons, demand=f.demand * b_fac)
                )
            flows = corrupted

        got = netsim.allocate(world, flows, epoch)

        epoch_min = min(got)
        per_epoch_min.append(epoch_min)
        monitored_by_src = {src: {} for src in range(world.n)}
        for f, bw, (src, d) in zip(flows, got, targets):
            monitored_by_src[src][f.dst] = bw
            pair_history.setdefault((src, f.dst), []).append(bw)
            if abs(bw - d.target_bw) > agent_mod.SIGNIFICANT_DELTA:
                significant_total += 1
                if epoch >= 10:
                    significant_late += 1

        for f, bw, (src, d) in zip(flows, got, targets):
            capped = int(
                d.throttle_cap is not None and d.target_bw >= d.throttle_cap - 1e-9
            )
            trace.append(
                {
                    "epoch": epoch,
                    "src": src,
                    "dst": f.dst,
                    "mode": d.mode.value,
                    "target_cons": f.connections,
                    "target_bw": f.demand,
                    "monitored_bw": bw,
                    "capped": capped,
                }
            )

        for src in range(world.n):
            obs = agent_mod.EpochObservation(
                monitored_bw=monitored_by_src[src],
                pending_bytes={d: pending for d in monitored_by_src[src]},
            )
            agent_mod.aimd_step(agents[src], obs)

    tail = epochs // 2
    tail_means = {p: float(np.mean(h[tail:])) for p, h in pair_history.items()}
    summary = {
        "strategy": strategy,
        "epochs": epochs,
        "seed": config.seed,
        "n_dcs": world.n,
        "avg_min_bw": round(min(tail_means.values()), 6),
        "best_min_bw": round(max(per_epoch_min[tail:]), 6),
        "mean_bw": round(float(np.mean([m for m in tail_means.values()])), 6),
        "significant_total": significant_total,
        "significant_after_epoch_10": significant_late,
        "final_cons": {
            f"{src}->{d.dst}": d.target_cons
            for src in range(world.n)
            for d in agents[src].dests.values()
        },
        "throttle_caps": {
            str(src): {str(dst): round(cap, 6) for dst, cap in caps.items()}
            for src, caps in throttles.items()
            if caps
        },
    }
    return summary, trace


def write_trace_csv(rows, path):
    fields = [
        "epoch",
        "src",
        "dst",
        "mode",
        "target_cons",
        "target_bw",
        "monitored_bw",
        "capped",
    ]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(fields)
        for r in rows:
            w.writerow(
                [
                    r["epoch"],
                    r["src"],
                    r["dst"],
                    r["mode"],
                    r["target_cons"],
                    f"{r['target_bw']:.6f}",
                    f"{r['monitored_bw']:.6f}",
                    r["capped"],
                ]
            )


def _load_config(args):
    if getattr(args, "config", None):
        cfg = netsim.load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
            cfg.__post_init__()
        return cfg
    preset = getattr(args, "preset", None) or "fig3dc"
    kwargs = {}
    if getattr(args, "seed", None) is not None:
        kwargs["seed"] = args.seed
    if getattr(args, "nic", None) is not None:
        kwargs["nic_capacity"] = args.nic
    if preset == "fig3dc":
        return netsim.fig3dc_config(**kwargs)
    if preset == "global8":
        return netsim.dataset_config(**kwargs)
    raise ValidationError(f"unknown preset: {preset}")


def _snapshot_grid(world, epoch):
    grid = []
    for i in range(world.n):
        row = []
        for j in range(world.n):
            if i == j:
                stats = world.host_stats(epoch)
                row.append(
                    predictor.FeatureVector(
                        n_dcs=world.n,
                        snapshot_bw=world.config.intra_dc_bw,
                        mem_util_dst=stats.mem_util[j],
                        cpu_load_src=stats.cpu_load[i],
                        cpu_load_dst=stats.cpu_load[j],
                        retransmissions=2.0 * stats.retransmissions[i],
                        distance_miles=0.0,
                    )
                )
            else:
                row.append(netsim.measure_snapshot(world, (i, j), epoch))
        grid.append(row)
    return grid


def cmd_gen_topology(args):
    topo = topology.preset_topology(args.preset)
    topology.save_topology(topo, args.out)
    log.info("wrote %s (%d DCs)", args.out, topo.n)
    return 0


def cmd_gen_dataset(args):
    if not args.config and not args.preset:
        args.preset = "global8"  # the training pool, not the 3-DC demo
    cfg = _load_config(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    samples = netsim.generate_dataset(cfg, args.samples, sizes, seed=args.seed)
    predictor.write_dataset_csv(samples, args.out, seed=cfg.seed if args.seed is None else args.seed)
    log.info("wrote %d rows to %s", len(samples), args.out)
    return 0


def cmd_train(args):
    samples = predictor.read_dataset_csv(args.data)
    model = predictor.train(samples, n_trees=args.trees, seed=args.seed)
    predictor.save_model(model, args.out)
    log.info(
        "trained %d trees on %d rows, in-sample MAE %.2f Mbps",
        model.n_trees,
        len(samples),
        model.training_mae,
    )
    print(f"trained {model.n_trees} trees, training MAE {model.training_mae:.3f} Mbps")
    return 0


def cmd_predict(args):
    model = predictor.load_model(args.model)
    cfg = _load_config(args)
    world = netsim.SimWorld(cfg)
    grid = _snapshot_grid(world, args.epoch)
    mat = predictor.predict(model, grid)
    topology.write_matrix_csv(args.out, mat, cfg.topology.names, seed=cfg.seed)
    log.info("wrote predicted matrix to %s", args.out)
    return 0


def cmd_plan(args):
    seed, names, bw = topology.read_matrix_csv(args.bw)
    rel = relations.infer_dc_relations(bw, gap=args.gap)
    plan = build_plan(bw, rel, args.max_parallel)
    save_plan(plan, args.out, seed=seed, names=names)
    log.info("wrote plan for %d DCs to %s", plan.n, args.out)
    return 0


def cmd_simulate(args):
    cfg = _load_config(args)
    summary, trace = run_simulation(
        cfg,
        strategy=args.strategy,
        epochs=args.epochs,
        pending_mb=args.pending_mb,
        inject_pct=args.inject_pct,
    )
    if args.trace:
        write_trace_csv(trace, args.trace)
    doc = json.dumps(summary, indent=2, sort_keys=True)
    if args.summary:
        with open(args.summary, "w") as f:
            f.write(doc + "\n")
    print(doc)
    return 0


def cmd_oracle(args):
    cfg = _load_config(args)
    world = netsim.SimWorld(cfg)
    conns = netsim.brute_force_best_plan(world, args.max_parallel, epoch=args.epoch)
    table, mn = netsim.evaluate_conns(world, conns, epoch=args.epoch)
    doc = {
        "connections": conns.tolist(),
        "min_flow": round(mn, 6),
        "flows": {f"{i}->{j}": round(bw, 6) for (i, j), bw in sorted(table.items())},
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return 0


def cmd_cost(args):
    intervals = [float(x) for x in args.intervals.split(",")]
    rows = costmodel.cost_report_rows(args.dcs, intervals)
    if args.out:
        costmodel.write_cost_report(rows, args.out)
    for r in rows:
        if r["scenario"] == "savings":
            print(f"prediction saves {100.0 * r['annual_cost']:.1f}% annually")
        else:
            print(f"{r['scenario']}: ${r['annual_cost']:.2f}/yr")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="wanify",
        description="Plan and adapt parallel WAN connections between data centers.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_opts(sp, nic=False):
        sp.add_argument("--config", help="simulator config JSON")
        sp.add_argument("--preset", choices=["fig3dc", "global8"], help="built-in config")
        sp.add_argument("--seed", type=int, default=None)
        if nic:
            sp.add_argument("--nic", type=float, default=None, help="override NIC capacity (Mbps)")

    sp = sub.add_parser("gen-topology", help="write a built-in topology to JSON")
    sp.add_argument("--preset", choices=["fig3dc", "global8"], default="global8")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_topology)

    sp = sub.add_parser("gen-dataset", help="simulate a training corpus")
    add_config_opts(sp)
    sp.add_argument("--samples", type=int, default=600)
    sp.add_argument("--sizes", default="4,5,6,7,8", help="comma-separated cluster sizes")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_dataset)

    sp = sub.add_parser("train", help="fit the bandwidth forest")
    sp.add_argument("--data", required=True)
    sp.add_argument("--trees", type=int, default=predictor.DEFAULT_TREES)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict a bandwidth matrix from snapshots")
    add_config_opts(sp, nic=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--epoch", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("plan", help="derive a connection plan from a bandwidth matrix")
    sp.add_argument("--bw", required=True, help="bandwidth matrix CSV")
    sp.add_argument("--max-parallel", type=int, default=8)
    sp.add_argument("--gap", type=float, default=relations.DEFAULT_GAP)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", help="run agents against the simulator")
    add_config_opts(sp, nic=True)
    sp.add_argument(
        "--strategy",
        choices=["heterogeneous", "uniform", "single"],
        default="heterogeneous",
    )
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--pending-mb", type=float, default=100.0)
    sp.add_argument("--inject-pct", type=float, default=0.0)
    sp.add_argument("--trace", help="write per-epoch trace CSV here")
    sp.add_argument("--summary", help="write summary JSON here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle", help="brute-force the best connection matrix (tiny worlds)")
    add_config_opts(sp, nic=True)
    sp.add_argument("--max-parallel", type=int, default=4)
    sp.add_argument("--epoch", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("cost", help="price monitoring vs prediction")
    sp.add_argument("--dcs", type=int, default=4)
    sp.add_argument("--intervals", default="30,20,15", help="minutes between runs")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_cost)

    return p


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("WANIFY_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as e:  # pragma: no cover - defensive
        log.exception("unexpected failure")
        print(f"unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
