"""Command line front end: benchmarks, verification, graph export, reports.

Subcommands: ``bench`` (strong-scaling sweeps to CSV), ``verify``
(classical vs sum factorization equality), ``graph`` (DOT/JSON task graph
dumps), ``amdahl`` (speedup-limit report from CSV or explicit pairs) and
``heat`` (per-step demo CSV).  Exit codes: 0 success, 1 verification
mismatch, 2 invalid flags, 3 runtime failure.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__, heat, scaling, taskgraph
from .assembly import write_matrix_market
from .integrators import (
    SumFactBuffers,
    default_rule,
    integrate_element_classical,
    integrate_element_sumfact,
)
from .mesh import element_list
from .runtime import METHODS, STRATEGIES, RunConfig, run_integration
from .splines import make_knot_vector

BENCH_COLUMNS = ["method", "strategy", "p", "K", "threads", "rep", "seconds", "flops"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="igabench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"igabench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run integration benchmarks, emit CSV rows")
    bench.add_argument("--method", choices=list(METHODS) + ["both"], default="both")
    bench.add_argument("--strategy", choices=STRATEGIES, default="over_elements")
    bench.add_argument("--p", type=int, default=3, help="polynomial degree")
    bench.add_argument("--mesh", type=int, default=8, help="elements per direction (K)")
    bench.add_argument("--quad", type=int, default=None, help="quadrature points per direction")
    bench.add_argument("--threads", default="1", help="comma-separated worker counts")
    bench.add_argument("--repeat", type=int, default=1)
    bench.add_argument("--seed", type=int, default=42)
    bench.add_argument("--output", default=None, help="CSV path (default: stdout)")

    verify = sub.add_parser("verify", help="check classical vs sum factorization equality")
    verify.add_argument("--p", type=int, default=4, help="largest degree of the grid")
    verify.add_argument("--mesh", type=int, default=4, help="largest mesh size of the grid")
    verify.add_argument("--quad", type=int, default=None)
    verify.add_argument("--tolerance", type=float, default=1e-10,
                        help="relative Frobenius tolerance per element")

    graph = sub.add_parser("graph", help="export the per-element task graph")
    graph.add_argument("--p", type=int, default=1)
    graph.add_argument("--quad", type=int, default=None,
                       help="quadrature points per direction (default p+1)")
    graph.add_argument("--format", choices=["dot", "json"], default="dot")
    graph.add_argument("--output", default=None)
    graph.add_argument("--seed", type=int, default=42)
    graph.add_argument("--check-orders", type=int, default=0, metavar="N",
                       help="validate N random schedules and N perturbed ones")

    amdahl = sub.add_parser("amdahl", help="Amdahl speedup-limit report")
    amdahl.add_argument("--input", default=None, help="bench CSV to analyse")
    amdahl.add_argument("--pair", action="append", default=[], metavar="NU:SPEEDUP",
                        help="explicit measurement; give twice for a combined limit")
    amdahl.add_argument("--output", default=None)

    heat_cmd = sub.add_parser("heat", help="forward-Euler heat demo, per-step CSV")
    heat_cmd.add_argument("--p", type=int, default=2)
    heat_cmd.add_argument("--mesh", type=int, default=4)
    heat_cmd.add_argument("--dt", type=float, default=None)
    heat_cmd.add_argument("--tfinal", type=float, default=None)
    heat_cmd.add_argument("--steps", type=int, default=None)
    heat_cmd.add_argument("--output", default=None)

    export = sub.add_parser("export", help="assemble a Gram matrix and write Matrix Market")
    export.add_argument("--method", choices=METHODS, default="sumfact")
    export.add_argument("--p", type=int, default=2)
    export.add_argument("--mesh", type=int, default=2)
    export.add_argument("--output", required=True)

    return parser


def _open_output(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _threads_list(args) -> list[int]:
    raw = os.environ.get("IGA_BENCH_THREADS", args.threads)
    try:
        values = [int(v) for v in str(raw).split(",") if v.strip()]
    except ValueError:
        raise SystemExit(2)
    if not values or any(v < 1 for v in values):
        print(f"invalid thread list: {raw!r}", file=sys.stderr)
        raise SystemExit(2)
    return values


def cmd_bench(args) -> int:
    threads = _threads_list(args)
    methods = list(METHODS) if args.method == "both" else [args.method]
    quad = args.quad if args.quad is not None else args.p + 1
    out, close = _open_output(args.output)
    try:
        out.write(
            f"# igabench {__version__} bench method={args.method} strategy={args.strategy} "
            f"p={args.p} K={args.mesh} quad={quad} threads={','.join(map(str, threads))} "
            f"repeat={args.repeat} seed={args.seed}\n"
        )
        writer = csv.writer(out)
        writer.writerow(BENCH_COLUMNS)
        for method in methods:
            for nu in threads:
                cfg = RunConfig(method=method, strategy=args.strategy, mesh=args.mesh,
                                degree=args.p, workers=nu, repetitions=args.repeat,
                                quad_points=args.quad)
                result = run_integration(cfg)
                for rep, seconds in enumerate(result.times):
                    writer.writerow([method, args.strategy, args.p, args.mesh, nu,
                                     rep, f"{seconds:.6f}", result.flops])
    finally:
        if close:
            out.close()
    return 0


def cmd_verify(args) -> int:
    worst = (0.0, None, None)  # (relative error, (p, K), element)
    for p in range(0, args.p + 1):
        for K in range(1, args.mesh + 1):
            kv = make_knot_vector(K, p)
            buffers = SumFactBuffers.allocate(p, args.quad)
            for alpha in element_list(K):
                rule = default_rule(kv, alpha, args.quad)
                a = integrate_element_classical(alpha, kv, rule).entries
                b = integrate_element_sumfact(alpha, kv, rule, buffers).entries
                rel = np.linalg.norm(a - b) / np.linalg.norm(a)
                if rel > worst[0]:
                    worst = (rel, (p, K), alpha)
    rel, cfg, alpha = worst
    status = "ok" if rel <= args.tolerance else "MISMATCH"
    print(f"verify: worst relative Frobenius error {rel:.3e} "
          f"at (p, K)={cfg} element {alpha}: {status}")
    return 0 if rel <= args.tolerance else 1


def cmd_graph(args) -> int:
    if args.p < 0 or (args.quad is not None and args.quad < 1):
        print("invalid graph size", file=sys.stderr)
        return 2
    q = args.quad if args.quad is not None else args.p + 1
    g = taskgraph.build_graph((0, 0, 0), args.p, q**3)
    counts = [len(m) for m in g.class_members()]
    print(f"task graph: degree {args.p}, {q}^3 quadrature points, "
          f"{g.n_tasks} tasks, {len(g.edges)} edges, {g.n_classes} Foata classes")
    for c, size in enumerate(counts):
        print(f"  class {c}: {size} tasks")
    if args.check_orders:
        rng = np.random.default_rng(args.seed)
        for _ in range(args.check_orders):
            assert taskgraph.validate_schedule(g, taskgraph.random_topological_order(g, rng)).accepted
            assert not taskgraph.validate_schedule(g, taskgraph.perturbed_order(g, rng)).accepted
        print(f"  schedules: {args.check_orders} random orders accepted, "
              f"{args.check_orders} perturbed orders rejected")
    text = export_graph_text(g, args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def export_graph_text(g, fmt: str) -> str:
    if fmt == "dot":
        return taskgraph.export_dot(g)
    return json.dumps(taskgraph.export_json(g), indent=1) + "\n"


def _amdahl_report_rows(args) -> list[dict]:
    rows = []
    if args.pair:
        estimates = []
        for spec in args.pair:
            nu_s, _, s_s = spec.partition(":")
            try:
                nu, S = int(nu_s), float(s_s)
            except ValueError:
                print(f"malformed --pair {spec!r}, expected NU:SPEEDUP", file=sys.stderr)
                raise SystemExit(2)
            estimates.append(scaling.estimate_amdahl(nu, S))
        if all(e.nu < 2 for e in estimates):
            print("need at least one measurement with nu >= 2", file=sys.stderr)
            raise SystemExit(2)
        for label, e in zip(("inside", "over"), estimates):
            rows.append({"label": label, "nu": e.nu, "S": e.S_nu, "P": e.P,
                         "S_inf": e.S_inf, "out_of_model": e.out_of_model})
        if len(estimates) == 2:
            rows.append({"label": "combined", "nu": "", "S": "", "P": "",
                         "S_inf": scaling.combined_limit(estimates[0].S_inf, estimates[1].S_inf),
                         "out_of_model": any(e.out_of_model for e in estimates)})
        return rows

    if not args.input:
        print("amdahl needs --input CSV or --pair values", file=sys.stderr)
        raise SystemExit(2)
    groups: dict[tuple, dict[int, float]] = {}
    with open(args.input, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            key = (row["method"], row["strategy"], int(row["p"]), int(row["K"]))
            groups.setdefault(key, {})
            nu = int(row["threads"])
            t = float(row["seconds"])
            groups[key][nu] = min(groups[key].get(nu, math.inf), t)
    any_parallel = False
    for (method, strategy, p, K), by_nu in sorted(groups.items()):
        if 1 not in by_nu:
            continue
        t1 = by_nu[1]
        candidates = {nu: scaling.speedup(t1, t) for nu, t in by_nu.items() if nu >= 2}
        if not candidates:
            continue
        any_parallel = True
        nu, S = max(candidates.items(), key=lambda kv: kv[1])
        e = scaling.estimate_amdahl(nu, S)
        rows.append({"label": f"{method}/{strategy}/p={p}/K={K}", "nu": nu,
                     "S": round(S, 4), "P": e.P, "S_inf": e.S_inf,
                     "out_of_model": e.out_of_model})
    if not any_parallel:
        print("no record with nu >= 2 in input", file=sys.stderr)
        raise SystemExit(2)
    return rows


def cmd_amdahl(args) -> int:
    rows = _amdahl_report_rows(args)
    out, close = _open_output(args.output)
    try:
        out.write(f"{'case':<40} {'nu':>4} {'S(nu)':>8} {'P':>8} {'S(inf)':>10}\n")
        for r in rows:
            p_txt = f"{r['P']:.2f}" if r["P"] != "" else ""
            s_txt = f"{r['S_inf']:.2f}" if math.isfinite(r["S_inf"]) else "inf"
            flag = " (out of model)" if r["out_of_model"] else ""
            out.write(f"{r['label']:<40} {r['nu']:>4} {r['S']:>8} {p_txt:>8} {s_txt:>10}{flag}\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_heat(args) -> int:
    if args.p < 1 or args.mesh < 1:
        print("heat demo needs p >= 1 and mesh >= 1", file=sys.stderr)
        return 2
    dt = args.dt if args.dt is not None else heat.stable_timestep(args.mesh)
    bound = heat.stable_timestep(args.mesh)
    if dt > bound:
        print(f"warning: dt={dt:g} exceeds the stability guideline {bound:g} "
              f"for K={args.mesh}; forward Euler may diverge", file=sys.stderr)
    if args.steps is not None:
        steps = args.steps
    elif args.tfinal is not None:
        steps = max(1, int(round(args.tfinal / dt)))
    else:
        steps = 100
    records = heat.run_demo(args.mesh, args.p, dt=dt, steps=steps)
    out, close = _open_output(args.output)
    try:
        out.write(f"# igabench {__version__} heat p={args.p} K={args.mesh} "
                  f"dt={dt:g} steps={steps}\n")
        writer = csv.writer(out)
        writer.writerow(["step", "time", "mass", "l2_error_vs_analytic"])
        for r in records:
            writer.writerow([r.step, f"{r.time:.8f}", f"{r.mass:.12e}",
                             "" if r.l2_error is None else f"{r.l2_error:.6e}"])
    finally:
        if close:
            out.close()
    return 0


def cmd_export(args) -> int:
    cfg = RunConfig(method=args.method, strategy="sequential", mesh=args.mesh, degree=args.p)
    result = run_integration(cfg)
    write_matrix_market(result.gram, args.output)
    print(f"wrote {result.gram.n_dofs}x{result.gram.n_dofs} Gram matrix to {args.output}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "bench": cmd_bench,
        "verify": cmd_verify,
        "graph": cmd_graph,
        "amdahl": cmd_amdahl,
        "heat": cmd_heat,
        "export": cmd_export,
    }
    try:
        return handlers[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
