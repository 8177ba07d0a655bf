"""Experiment harness CLI.

Subcommands: ``parse-stats``, ``profile``, ``plan``, ``run``, ``compare``,
``synth``.  Every run writes a CSV trace plus a JSON sidecar holding the
fully resolved configuration, so re-running from the sidecar reproduces the
CSV bit-for-bit except for wall-clock columns.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, rates
from .glm import CompositeObjective, ConstantsUnavailable, LossKind, Regularizer
from .profiler import measure_cache_ratio
from .solver import DivergenceError, make_config, run
from .synth import SyntheticSpec, generate_synthetic

THRESHOLDS = (1e-4, 1e-8)


def _fmt(x):
    return "" if x is None else repr(float(x))


def write_trace_csv(trace, path):
    with open(path, "w") as fh:
        fh.write("epoch_equiv,wall_seconds,objective,suboptimality,nnz_w\n")
        for r in trace:
            fh.write(
                f"{_fmt(r.epoch_equiv)},{_fmt(r.wall_seconds)},{_fmt(r.objective)},"
                f"{_fmt(r.suboptimality)},{r.nnz_w}\n"
            )


def _add_problem_args(p):
    p.add_argument("--data", help="LIBSVM file (optionally gzipped)")
    p.add_argument("--synth-n", type=int)
    p.add_argument("--synth-d", type=int)
    p.add_argument("--synth-density", type=float, default=0.05)
    p.add_argument("--synth-kappa", type=float, default=50.0)
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--loss", choices=["logistic", "squared"], default="logistic")
    p.add_argument("--reg", choices=["l1", "l2", "none"], default="l1")
    p.add_argument("--lam", type=float, default=1e-4)
    p.add_argument("--mu", type=float, help="strong convexity lower bound (l1/none problems)")
    p.add_argument("--n-features", type=int, help="force the feature count when parsing")


def _problem_from_args(a):
    """Returns (objective, f_star_or_none, resolved problem dict)."""
    loss = LossKind(a.loss)
    resolved = {
        "loss": a.loss, "reg": a.reg, "lam": a.lam, "mu": a.mu,
    }
    if a.data:
        with open(a.data, "rb") as fh:
            ds = dataio.parse_libsvm(fh, n_features=a.n_features)
        resolved["data"] = str(a.data)
        resolved["n_features"] = a.n_features
        reg = {"l1": Regularizer.l1(a.lam), "l2": Regularizer.l2(a.lam),
               "none": Regularizer.none()}[a.reg]
        return CompositeObjective(ds, loss, reg, mu=a.mu), None, resolved
    if not (a.synth_n and a.synth_d):
        raise SystemExit("either --data or --synth-n/--synth-d is required")
    spec = SyntheticSpec(n=a.synth_n, d=a.synth_d, density=a.synth_density,
                         target_kappa=a.synth_kappa, loss=loss, seed=a.synth_seed)
    resolved.update({
        "synth_n": a.synth_n, "synth_d": a.synth_d, "synth_density": a.synth_density,
        "synth_kappa": a.synth_kappa, "synth_seed": a.synth_seed,
    })
    if a.reg == "l2":
        prob = generate_synthetic(spec, reg_kind="l2")
        resolved["lam"] = prob.reg.lam  # chosen to meet the target kappa
        obj = CompositeObjective(prob.dataset, loss, prob.reg)
        return obj, prob.f_star, resolved
    prob = generate_synthetic(spec, reg_kind=a.reg, l1_lam=a.lam)
    obj = CompositeObjective(prob.dataset, loss, prob.reg, mu=a.mu)
    return obj, None, resolved


def _resolve_gamma(spec_str, obj, expected_batch):
    """gamma may be a float literal, "prop1" (mu-free 1/(3L)) or
    "prop2:<tau>" (batch-size-dependent step size).
    """
    try:
        return float(spec_str), {"gamma": float(spec_str)}
    except ValueError:
        pass
    if spec_str == "prop1":
        L = obj.smoothness_L
        gamma, _, _ = rates.gamma_adaptive(L)
        return gamma, {"gamma_policy": "prop1", "gamma": gamma, "L": L}
    if spec_str.startswith("prop2"):
        tail = spec_str[len("prop2"):]
        if tail.startswith(":"):
            tau = float(tail[1:])
        elif tail.startswith("(") and tail.endswith(")"):
            tau = float(tail[1:-1])
        elif not tail:
            tau = 0.25
        else:
            raise SystemExit(f"unrecognized gamma spec {spec_str!r}")
        try:
            L, mu, _ = obj.estimate_constants()
        except ConstantsUnavailable as exc:
            raise SystemExit(
                f"prop2 step size needs a strong convexity bound: {exc}; "
                "pass --mu for l1/unregularized problems") from exc
        gamma, rho, _, _ = rates.gamma_dependent(
            obj.dataset.n_samples, L, mu, tau, expected_batch)
        return gamma, {"gamma_policy": f"prop2:{tau}", "gamma": gamma,
                       "rho": rho, "L": L, "mu": mu}
    raise SystemExit(f"unrecognized gamma spec {spec_str!r}")


def _add_run_args(p):
    p.add_argument("--algorithm", default="saga",
                   choices=["gd", "saga", "svrg", "saga++"])
    p.add_argument("--inner-m", default="1.5n",
                   help='inner iterations for svrg/saga++ (int or "1.5n")')
    p.add_argument("--p-full", type=float,
                   help="two-point law full-batch probability (saga++)")
    p.add_argument("--gamma", default="prop1",
                   help='step size: float, "prop1" or "prop2:<tau>"')
    p.add_argument("--epochs", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace-every", type=float, default=1.0)
    p.add_argument("--eager", action="store_true", help="disable lazy l1 updates")
    p.add_argument("--f-star", type=float, help="known optimal value for suboptimality")


def _build_config(a, obj, f_star):
    n = obj.dataset.n_samples
    if a.p_full is not None and a.algorithm != "saga++":
        raise SystemExit("--p-full only applies to saga++")
    probe = make_config(a.algorithm, n, gamma=1.0, epochs=a.epochs, seed=a.seed,
                        inner_m=a.inner_m, p_full=a.p_full)
    expected = probe.dist.expected_batch(n)
    gamma, gamma_info = _resolve_gamma(a.gamma, obj, expected)
    cfg = make_config(
        a.algorithm, n, gamma=gamma, epochs=a.epochs, seed=a.seed,
        inner_m=a.inner_m, p_full=a.p_full, lazy=not a.eager,
        trace_every=a.trace_every,
        f_star=a.f_star if a.f_star is not None else f_star,
    )
    return cfg, expected, gamma_info


def cmd_parse_stats(a):
    with open(a.data, "rb") as fh:
        ds = dataio.parse_libsvm(fh, n_features=a.n_features)
    st = dataio.stats(ds)
    print(json.dumps({
        "n_samples": st.n_samples, "n_features": st.n_features, "nnz": st.nnz,
        "nnz_ratio": st.nnz_ratio, "max_row_norm_sq": st.max_row_norm_sq,
    }, indent=2))
    return 0


def cmd_profile(a):
    obj, _, _ = _problem_from_args(a)
    prof = measure_cache_ratio(obj, reps=a.reps, seed=a.seed)
    print(json.dumps(prof.as_dict(), indent=2))
    return 0


def cmd_plan(a):
    try:
        plan, p_full, opt = rates.make_plan(a.n, a.kappa, a.tau, a.eta, L=a.L)
    except rates.InfeasibleTau as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return 2
    out = {
        "n": a.n, "kappa": a.kappa, "tau": a.tau, "eta": a.eta,
        "B_star": opt.b_star, "p_full": p_full,
        "gamma": plan.gamma, "rho": plan.rho,
        "clamped": opt.clamped, "residual": opt.residual,
    }
    print(json.dumps(out, indent=2))
    if a.plot:
        from . import plots
        n_hi = min(float(a.n), max(10.0 * opt.b_star, 100.0))
        grid = np.geomspace(1.0, n_hi, 400)
        costs = rates.wall_cost_curve(a.n, a.kappa, a.tau, a.eta, grid)
        plots.save_batch_planner_figure(grid, costs, opt.b_star, a.plot)
    return 0


def _run_once(a, obj, f_star, trace_out, resolved):
    cfg, expected, gamma_info = _build_config(a, obj, f_star)
    result = run(obj, cfg)
    write_trace_csv(result.trace, trace_out)
    sidecar = dict(resolved)
    sidecar.update(gamma_info)
    sidecar.update({
        "algorithm": a.algorithm, "inner_m": a.inner_m, "p_full": a.p_full,
        "epochs": a.epochs, "seed": a.seed, "trace_every": a.trace_every,
        "eager": a.eager, "expected_batch": expected,
        "f_star": cfg.f_star, "trace_out": str(trace_out),
    })
    with open(str(trace_out) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
    return result


def cmd_run(a):
    if a.config:
        a = _args_from_sidecar(a)
    obj, f_star, resolved = _problem_from_args(a)
    trace_out = Path(a.trace_out or "trace.csv")
    try:
        result = _run_once(a, obj, f_star, trace_out, resolved)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {trace_out} ({len(result.trace)} records, "
          f"{result.data_accesses / obj.dataset.n_samples:.2f} epoch-equivalents)",
          file=sys.stderr)
    if a.plot:
        from . import plots
        fig = plots.save_convergence_figure({a.algorithm: result.trace},
                                            str(trace_out) + ".png")
        print(f"wrote {fig}", file=sys.stderr)
    return 0


def _args_from_sidecar(a):
    with open(a.config) as fh:
        side = json.load(fh)
    merged = argparse.Namespace(**vars(a))
    for key in ("loss", "reg", "lam", "mu", "data", "n_features",
                "synth_n", "synth_d", "synth_density", "synth_kappa", "synth_seed",
                "algorithm", "inner_m", "p_full", "epochs", "seed",
                "trace_every", "eager", "f_star"):
        if key in side:
            setattr(merged, key, side[key])
    if "gamma_policy" in side:
        merged.gamma = side["gamma_policy"]
    elif "gamma" in side:
        merged.gamma = repr(side["gamma"])
    if merged.trace_out is None and "trace_out" in side:
        merged.trace_out = side["trace_out"]
    for key in ("synth_n", "synth_d"):
        if not hasattr(merged, key):
            setattr(merged, key, None)
    return merged


def _time_to_threshold(trace, threshold):
    for r in trace:
        if r.suboptimality is not None and r.suboptimality <= threshold:
            return r.epoch_equiv, r.wall_seconds
    return None, None


def cmd_compare(a):
    obj, f_star, resolved = _problem_from_args(a)
    if a.f_star is not None:
        f_star = a.f_star
    if f_star is None and a.ref_epochs > 0:
        ref_args = argparse.Namespace(**vars(a))
        ref_args.algorithm = "saga"
        ref_cfg, _, _ = _build_config(ref_args, obj, None)
        ref_cfg.epochs = a.ref_epochs
        ref = run(obj, ref_cfg)
        f_star = min(r.objective for r in ref.trace)
    algos = a.algorithms.split(",")
    rows = []
    traces = {}
    for name in algos:
        sub = argparse.Namespace(**vars(a))
        sub.algorithm = name
        sub.f_star = f_star
        try:
            cfg, _, _ = _build_config(sub, obj, f_star)
            result = run(obj, cfg)
            traces[name] = result.trace
            row = {"algorithm": name}
            for thr in THRESHOLDS:
                ep, wall = _time_to_threshold(result.trace, thr)
                row[f"epochs@{thr:g}"] = ep
                row[f"wall@{thr:g}"] = wall
            rows.append(row)
        except DivergenceError as exc:
            rows.append({"algorithm": name, "error": str(exc)})
    cols = ["algorithm"] + [f"{kind}@{thr:g}" for thr in THRESHOLDS
                            for kind in ("epochs", "wall")]
    print("\t".join(cols))
    for row in rows:
        if "error" in row:
            print(f"{row['algorithm']}\tFAILED: {row['error']}")
            continue
        cells = [row["algorithm"]]
        for thr in THRESHOLDS:
            for kind in ("epochs", "wall"):
                v = row[f"{kind}@{thr:g}"]
                cells.append("-" if v is None else f"{v:.4g}")
        print("\t".join(cells))
    if a.plot and traces:
        from . import plots
        fig = plots.save_convergence_figure(traces, a.plot)
        print(f"wrote {fig}", file=sys.stderr)
    return 0


def cmd_synth(a):
    loss = LossKind(a.loss)
    spec = SyntheticSpec(n=a.synth_n, d=a.synth_d, density=a.synth_density,
                         target_kappa=a.synth_kappa, loss=loss, seed=a.synth_seed)
    reg_kind = a.reg if a.reg != "none" else "none"
    prob = generate_synthetic(spec, reg_kind=reg_kind,
                              l1_lam=a.lam if reg_kind == "l1" else None)
    out = Path(a.out)
    with open(out, "w") as fh:
        fh.write(dataio.write_libsvm(prob.dataset))
    meta = {
        "n": spec.n, "d": spec.d, "density": spec.density,
        "target_kappa": spec.target_kappa, "seed": spec.seed, "loss": a.loss,
        "reg": reg_kind, "lam": prob.reg.lam, "L": prob.L,
        "mu": prob.mu, "kappa": prob.kappa, "f_star": prob.f_star,
    }
    with open(str(out) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    print(f"wrote {out} and {out}.meta.json", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="batchvr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-stats", help="dataset statistics from a LIBSVM file")
    p.add_argument("data")
    p.add_argument("--n-features", type=int)
    p.set_defaults(func=cmd_parse_stats)

    p = sub.add_parser("profile", help="measure the cache effect ratio")
    _add_problem_args(p)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("plan", help="optimal average batch size under a cache ratio")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--plot", help="write the wall-cost curve figure to this path")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run one solver and write a trace")
    _add_problem_args(p)
    _add_run_args(p)
    p.add_argument("--trace-out")
    p.add_argument("--config", help="re-run from a JSON sidecar")
    p.add_argument("--plot", action="store_true",
                   help="render a convergence figure next to the CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several presets and tabulate times to tolerance")
    _add_problem_args(p)
    _add_run_args(p)
    p.add_argument("--algorithms", default="saga,svrg,saga++")
    p.add_argument("--ref-epochs", type=float, default=0.0,
                   help="epochs for a SAGA reference run to estimate F*")
    p.add_argument("--serial", action="store_true", default=True,
                   help="run members sequentially (always on; timing fidelity)")
    p.add_argument("--plot", help="write a comparison figure to this path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--synth-n", type=int, required=True)
    p.add_argument("--synth-d", type=int, required=True)
    p.add_argument("--synth-density", type=float, default=0.05)
    p.add_argument("--synth-kappa", type=float, default=50.0)
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--loss", choices=["logistic", "squared"], default="logistic")
    p.add_argument("--reg", choices=["l1", "l2", "none"], default="l2")
    p.add_argument("--lam", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
