"""Command-line front end: runs, sweeps, policy comparisons, thread assignment, recipes.

Exit codes: 0 success, 2 configuration error (the message names the key),
3 runtime error such as running out of memory.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as C
from . import metrics as M
from .engine import run as engine_run
from .errors import ConfigError, TierlabError
from .optimizer import assign_threads, curves_for

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


# ---------------------------------------------------------------- helpers


def _run_doc(doc: dict):
    return engine_run(C.build(doc))


def _run_many(docs, jobs: int = 1) -> list:
    """Independent runs, optionally in worker processes; results keep input order."""
    for d in docs:  # surface config errors before spawning anything
        C.build(d)
    if jobs <= 1 or len(docs) <= 1:
        return [_run_doc(d) for d in docs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_doc, docs))


def _bind(doc: dict, node: str) -> dict:
    """Membind-style placement on one node."""
    doc = C.apply_policy(doc, f"preferred:{node}")
    doc.setdefault("run", {})["allowed_nodes"] = [node]
    return doc


def _write(out: Path | None, name: str, data: bytes) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(data)


def _write_both(out, stem, rows):
    _write(out, f"{stem}.csv", M.export_csv(rows))
    _write(out, f"{stem}.json", M.export_json(rows))


def prepare(doc: dict, workload=None, policy=None, seed=None, overrides=()) -> dict:
    doc = copy.deepcopy(doc)
    if workload:
        doc["workload"] = {"proxy": workload}
    if policy:
        doc = C.apply_policy(doc, policy)
    if seed is not None:
        doc.setdefault("run", {})["seed"] = int(seed)
    return C.apply_overrides(doc, overrides)


# ---------------------------------------------------------------- commands


def cmd_run(doc: dict, out=None, fmt="csv"):
    m = _run_doc(doc)
    _write_both(out, "metrics", [m])
    return m


def cmd_sweep_threads(doc: dict, nodes, t_min: int, t_max: int, out=None, plot=False, jobs=1) -> dict:
    if t_min < 1 or t_max < t_min:
        raise ConfigError("need 1 <= t_min <= t_max", key="t_min")
    result = {}
    for node in nodes:
        docs = []
        for t in range(t_min, t_max + 1):
            d = _bind(doc, node)
            d["workload"]["threads"] = t
            docs.append(d)
        rows = _run_many(docs, jobs)
        result[node] = rows
        _write(out, f"sweep_{node}.csv", M.export_csv(rows))
        if plot and out is not None:
            M.write_plot_data(out / "plot" / f"bandwidth_vs_threads_{node}.csv",
                              [m.threads for m in rows], [m.total_gbps for m in rows], ("threads", "gbps"))
    return result


def cmd_loaded_latency(doc: dict, nodes, delays, out=None, plot=False, jobs=1) -> dict:
    delays = [float(x) for x in delays]
    if not delays:
        raise ConfigError("delays must be non-empty", key="delays_ns")
    result = {}
    for node in nodes:
        docs = []
        for dl in delays:
            d = _bind(doc, node)
            d["workload"]["injection_delay_ns"] = dl
            docs.append(d)
        rows = _run_many(docs, jobs)
        result[node] = list(zip(delays, rows))
        _write(out, f"loaded_latency_{node}.csv", M.export_csv(rows))
        if plot and out is not None:
            M.write_plot_data(out / "plot" / f"latency_vs_bandwidth_{node}.csv",
                              [m.total_gbps for m in rows], [m.mean_latency_ns for m in rows], ("gbps", "latency_ns"))
    return result


def _throughput(m) -> float:
    return m.total_bytes / m.simulated_runtime_ns if m.simulated_runtime_ns > 0 else 0.0


def cmd_compare_policies(doc: dict, policies, out=None, jobs=1) -> list:
    """Runs each policy on the same workload and seed; returns rows ranked by throughput, fastest first."""
    if len(policies) < 1:
        raise ConfigError("need at least one policy", key="policies")
    docs = [C.apply_policy(doc, p) for p in policies]
    rows = _run_many(docs, jobs)
    # speedup is a throughput ratio: for fixed work it equals the runtime ratio, and it
    # stays meaningful for duration-bounded workloads whose runtime is fixed instead
    base = _throughput(rows[0])
    table = []
    for i, (p, m) in enumerate(zip(policies, rows)):
        speed = _throughput(m) / base if base > 0 else 0.0
        table.append({"policy": p, "simulated_runtime_ns": m.simulated_runtime_ns, "speedup": speed,
                      **m.counters, "metrics": m, "_order": i})
    ranked = sorted(table, key=lambda r: (-r["speedup"], r["_order"]))
    _write(out, "compare.csv", M.export_csv(rows))
    _write(out, "compare.json", M.export_json(rows))
    if out is not None:
        lines = ["rank,policy,simulated_runtime_ns,speedup," + ",".join(M.COUNTER_NAMES)]
        for i, r in enumerate(ranked, 1):
            lines.append(f"{i},{r['policy']},{r['simulated_runtime_ns']:.3f},{r['speedup']:.6f},"
                         + ",".join(str(r[c]) for c in M.COUNTER_NAMES))
        _write(out, "ranking.csv", ("\n".join(lines) + "\n").encode())
    return ranked


def cmd_assign_threads(doc: dict, total_threads: int, pattern="random", out=None) -> dict:
    cfg = C.build(doc)
    topo = cfg.topology
    agent = cfg.workload.agent or topo.home_socket
    nodes = list(cfg.run.allowed_nodes) or None
    res = assign_threads(curves_for(topo, agent, pattern, nodes), total_threads)
    report = {"total_threads": total_threads, "pattern": pattern, "counts": res.counts,
              "total_bandwidth_gbps": round(res.total_bandwidth_gbps, 6)}
    _write(out, "assignment.json", (json.dumps(report, indent=2) + "\n").encode())
    return report


def cmd_recipe(name: str, out=None, plot=False, jobs=1, seed=None, overrides=()):
    doc = C.resolve(C._read_json(C.locate(name, kind="recipe")))
    doc = prepare(doc, seed=seed, overrides=overrides)
    C.validate(doc)
    spec = doc.get("recipe", {"kind": "run"})
    kind = spec["kind"]
    if kind == "run":
        return cmd_run(doc, out)
    if kind == "thread_sweep":
        return cmd_sweep_threads(doc, spec.get("nodes", ["ldram"]), spec.get("t_min", 1), spec.get("t_max", 32),
                                 out, plot, jobs)
    if kind == "loaded_latency":
        return cmd_loaded_latency(doc, spec.get("nodes", ["ldram"]), spec["delays_ns"], out, plot, jobs)
    if kind == "compare_policies":
        return cmd_compare_policies(doc, spec["policies"], out, jobs)
    return cmd_assign_threads(doc, spec.get("total_threads", 52), spec.get("pattern", "random"), out)


# ---------------------------------------------------------------- argparse


def _common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="config file or preset name (system_a/b/c)")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, repeatable")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format")
    p.add_argument("--plot-data", action="store_true", help="also write two-column series files")
    p.add_argument("--jobs", type=int, default=1, help="parallel simulations for sweeps")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tierlab", description="Tiered-memory discrete-event simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one simulation")
    _common(p)
    p.add_argument("--workload", help="proxy workload name")
    p.add_argument("--policy", help="placement[@tiering], e.g. oli or first_touch@tiering08")

    p = sub.add_parser("sweep-threads", help="bandwidth vs thread count per node")
    _common(p)
    p.add_argument("--node", action="append", default=[], help="node alias, repeatable (default: all)")
    p.add_argument("--t-min", type=int, default=1)
    p.add_argument("--t-max", type=int, default=32)
    p.add_argument("--workload", default=None)

    p = sub.add_parser("loaded-latency", help="latency vs offered load per node")
    _common(p)
    p.add_argument("--node", action="append", default=[])
    p.add_argument("--delays", default="80000,40000,20000,10000,5000,2000,1000,500,300,200,100,50,20,10,0",
                   help="comma-separated injection delays in ns")

    p = sub.add_parser("compare-policies", help="rank policies on one workload")
    _common(p)
    p.add_argument("--policy", action="append", required=True, help="repeatable")
    p.add_argument("--workload")

    p = sub.add_parser("assign-threads", help="best thread split across nodes")
    _common(p)
    p.add_argument("--threads", type=int, required=True)
    p.add_argument("--pattern", choices=("sequential", "random"), default="random")

    p = sub.add_parser("recipe", help="run a named experiment recipe")
    _common(p, config_required=False)
    p.add_argument("name", nargs="?", help="recipe name; omit to list")

    sub.add_parser("presets", help="list presets and recipes")
    return ap


def _emit(rows, fmt):
    data = M.export_json(rows) if fmt == "json" else M.export_csv(rows)
    sys.stdout.write(data.decode())


def _dispatch(args) -> int:
    if args.command == "presets":
        print("presets:", " ".join(C.list_presets()))
        print("recipes:", " ".join(C.list_recipes()))
        return EXIT_OK
    if args.command == "recipe":
        if not args.name:
            print("\n".join(C.list_recipes()))
            return EXIT_OK
        res = cmd_recipe(args.name, args.out, args.plot_data, args.jobs, args.seed, args.overrides)
        _summarize(res, args.format)
        return EXIT_OK

    doc = prepare(C.load(args.config), getattr(args, "workload", None),
                  getattr(args, "policy", None) if args.command == "run" else None, args.seed, args.overrides)
    if args.command == "run":
        _emit([cmd_run(doc, args.out)], args.format)
    elif args.command == "sweep-threads":
        res = cmd_sweep_threads(doc, args.node or ["ldram", "rdram", "cxl"], args.t_min, args.t_max,
                                args.out, args.plot_data, args.jobs)
        _summarize(res, args.format)
    elif args.command == "loaded-latency":
        delays = [float(x) for x in args.delays.split(",") if x.strip()]
        res = cmd_loaded_latency(doc, args.node or ["ldram", "rdram", "cxl"], delays, args.out, args.plot_data,
                                 args.jobs)
        _summarize(res, args.format)
    elif args.command == "compare-policies":
        _summarize(cmd_compare_policies(doc, args.policy, args.out, args.jobs), args.format)
    elif args.command == "assign-threads":
        _summarize(cmd_assign_threads(doc, args.threads, args.pattern, args.out), args.format)
    return EXIT_OK


def _summarize(res, fmt):
    if isinstance(res, M.RunMetrics):
        _emit([res], fmt)
    elif isinstance(res, dict) and "counts" in res:
        print(json.dumps(res, indent=2))
    elif isinstance(res, dict):
        for node, rows in res.items():
            rows = [r[1] if isinstance(r, tuple) else r for r in rows]
            _emit(rows, fmt)
    else:
        print(f"{'rank':>4}  {'policy':<34} {'runtime_ns':>18} {'speedup':>9}  faults  promoted  migrated")
        for i, r in enumerate(res, 1):
            print(f"{i:>4}  {r['policy']:<34} {r['simulated_runtime_ns']:>18.3f} {r['speedup']:>9.4f}  "
                  f"{r['numa_hint_faults']:>6}  {r['pgpromote_success']:>8}  {r['pgmigrate_success']:>8}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"tierlab: config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TierlabError as exc:
        print(f"tierlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
