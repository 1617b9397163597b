"""Config-driven command-line runner.

Subcommands: `validate` (check every structural condition, exit 0 iff all
pass), `run` (one solve, artifacts on disk), `sweep` (independent multi-seed
replicas, concurrent), `constants` (print the feasibility constants).

Exit codes are a stable contract: 0 success, 1 validation failure, 2 run
failure (any replica not converged, or an I/O problem).
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from .config import build_experiment, load_config
from .errors import ConfigurationError, InfeasibleProblemError
from .operators import check_cocoercivity
from .primal_dual import compute_constants
from .solver import CONVERGED, run
from .stochastic import validate_schedules

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUN = 2


def _validation_rows(exp):
    """(name, passed, value) rows for every condition gating this experiment."""
    rows = []
    sched = validate_schedules(exp.noise, exp.inertia)
    noise_ok = all(v.condition != "summable_noise_variance" for v in sched.violations)
    inertia_ok = all(v.condition != "summable_inertia" for v in sched.violations)
    rows.append(("summable noise variance (sum sigma_n^2 < inf)", noise_ok,
                 json.dumps(exp.noise.to_config())))
    rows.append(("summable inertia (sum alpha_n < inf)", inertia_ok,
                 json.dumps(exp.inertia.to_config())))

    inst = None
    try:
        inst = exp.make_instance(exp.seeds[0])
    except (ConfigurationError, InfeasibleProblemError) as e:
        rows.append(("problem assembly", False, str(e)))

    if exp.pd is not None:
        try:
            rep = compute_constants(exp.pd)
            rows.append(("coupling norm c < 1", True, f"c={rep.c:.6g}"))
            rows.append(("balance parameter xi_hat", True, f"xi_hat={rep.xi_hat:.6g}"))
            if exp.algorithm == "pd_class2":
                rows.append(("class-II constant 2*beta > 1", rep.feasible_class2,
                             f"beta={rep.beta:.6g}"))
                rows.append(("all primal operators zero",
                             exp.pd.primal_ops.is_zero(), ""))
            else:
                rows.append(("class-I constant beta_hat > 1/2", rep.feasible_class1,
                             f"beta_hat={rep.beta_hat:.6g}"))
        except InfeasibleProblemError as e:
            rows.append(("coupling norm c < 1", False, str(e)))

    if inst is not None:
        try:
            cfg = exp.solver_config(inst.beta)
            gamma = cfg.gamma_at(0, inst.default_gamma)
            lo, hi = cfg.gamma_range
            rows.append((f"step size in [eps, (2-eps)*beta] = [{lo:.3g}, {hi:.3g}]",
                         True, f"gamma={gamma:.6g}"))
        except ConfigurationError as e:
            rows.append(("step size in [eps, (2-eps)*beta]", False, str(e)))
        if exp.constants_given:
            if exp.pd is not None:
                prob = exp.pd
                a1 = check_cocoercivity(prob.smooth, metric=prob.V, trials=50,
                                        seed=0, beta=prob.nu0)
                a2 = check_cocoercivity(prob.dual_smooth, metric=prob.W, trials=50,
                                        seed=1, beta=prob.mu0)
                rows.append(("cocoercivity audit of given nu0", a1.passed,
                             f"min_slack={a1.min_slack:.3g} nu0={prob.nu0:.6g}"))
                rows.append(("cocoercivity audit of given mu0", a2.passed,
                             f"min_slack={a2.min_slack:.3g} mu0={prob.mu0:.6g}"))
            else:
                audit = check_cocoercivity(inst.oracle.base, trials=50, seed=0,
                                           beta=inst.beta)
                rows.append(("cocoercivity audit of given constants", audit.passed,
                             f"min_slack={audit.min_slack:.3g} beta={audit.beta:.6g}"))
    return rows


def cmd_validate(args):
    exp = build_experiment(load_config(args.config),
                           base_dir=os.path.dirname(os.path.abspath(args.config)))
    rows = _validation_rows(exp)
    ok = True
    for name, passed, value in rows:
        ok &= passed
        tag = "PASS" if passed else "FAIL"
        print(f"[{tag}] {name}" + (f"  ({value})" if value else ""))
    print(f"validation: {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_VALIDATION


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=float)
        f.write("\n")


def _execute_single(exp, seed, out_dir=None, trace_name="trace.csv"):
    inst = exp.make_instance(seed)
    cfg = exp.solver_config(inst.beta)
    reference = None
    ref_primal = exp.reference()
    if ref_primal is not None:
        if exp.algorithm == "sifb":
            reference = ref_primal
        else:
            # distance tracked on the primal half only when stacked dims allow
            reference = None
    t0 = time.perf_counter()
    x, trace = run(inst, cfg, reference=reference)
    trace.wall_time = time.perf_counter() - t0
    summary = trace.summary()
    summary.update({"seed": seed, "algorithm": exp.algorithm})
    # annotation only: strongly monotone forward maps converge in norm
    summary["demiregular_forward_map"] = bool(
        getattr(inst.oracle.base, "demiregular", False))
    if ref_primal is not None:
        if exp.algorithm == "sifb":
            summary["dist_to_ref"] = (x - ref_primal).norm()
        else:
            from .primal_dual import extract_primal_dual

            primal, _ = extract_primal_dual(x, exp.pd)
            summary["dist_to_ref"] = (primal - ref_primal).norm()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, trace_name), "w", encoding="utf-8") as f:
            trace.to_csv(f)
    return x, trace, summary


def cmd_run(args):
    code = cmd_validate(args)
    if code != EXIT_OK:
        return code
    exp = build_experiment(load_config(args.config),
                           base_dir=os.path.dirname(os.path.abspath(args.config)))
    seed = args.seed if args.seed is not None else exp.seeds[0]
    out_dir = args.out or exp.output_dir
    try:
        _, trace, summary = _execute_single(exp, seed, out_dir=out_dir)
        _write_json(os.path.join(out_dir, "summary.json"), summary)
        snapshot = dict(exp.raw)
        snapshot["resolved_seed"] = seed
        _write_json(os.path.join(out_dir, "resolved_config.json"), snapshot)
    except OSError as e:
        print(f"i/o failure at {getattr(e, 'filename', out_dir)}: {e}", file=sys.stderr)
        return EXIT_RUN
    print(f"status={summary['status']} iterations={summary['iterations']} "
          f"final_fp_residual={summary['final_fp_residual']:.6g} "
          f"wall_time={summary['wall_time']:.3f}s -> {out_dir}")
    return EXIT_OK if summary["status"] == CONVERGED else EXIT_RUN


def _sweep_worker(payload):
    cfg, base_dir, seed, out_dir, index = payload
    exp = build_experiment(cfg, base_dir=base_dir)
    exp.want_reference = False  # parent reports distances; workers stay lean
    _, trace, summary = _execute_single(exp, seed, out_dir=out_dir,
                                        trace_name=f"trace_{index:03d}.csv")
    summary["index"] = index
    return summary


def cmd_sweep(args):
    code = cmd_validate(args)
    if code != EXIT_OK:
        return code
    cfg = load_config(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    exp = build_experiment(cfg, base_dir=base_dir)
    seeds = exp.seeds
    if args.seeds is not None:
        from .stochastic import derive_seeds

        master = seeds[0] if seeds else 0
        seeds = derive_seeds(master, args.seeds)
    out_dir = args.out or exp.output_dir
    os.makedirs(out_dir, exist_ok=True)
    payloads = [(cfg, base_dir, seed, out_dir, i) for i, seed in enumerate(seeds)]
    jobs = args.jobs or min(len(payloads), os.cpu_count() or 1)
    if jobs <= 1 or len(payloads) == 1:
        results = [_sweep_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    results.sort(key=lambda s: s["index"])

    rows = ["index,seed,status,iterations,final_fp_residual"]
    for s, seed in zip(results, seeds):
        rows.append(f"{s['index']},{seed},{s['status']},{s['iterations']},"
                    f"{s['final_fp_residual']:.17g}")
    with open(os.path.join(out_dir, "sweep_summary.csv"), "w", encoding="utf-8") as f:
        f.write("\n".join(rows) + "\n")
    frac = sum(1 for s in results if s["status"] == CONVERGED) / len(results)
    aggregate = {
        "fraction_converged": frac,
        "median_iterations": statistics.median(s["iterations"] for s in results),
        "max_final_residual": max(s["final_fp_residual"] for s in results),
        "seeds": list(seeds),
    }
    _write_json(os.path.join(out_dir, "sweep_summary.json"), aggregate)
    for s, seed in zip(results, seeds):
        print(f"seed={seed} status={s['status']} iterations={s['iterations']} "
              f"final_fp_residual={s['final_fp_residual']:.6g}")
    print(f"fraction_converged={frac:.3f} -> {out_dir}")
    return EXIT_OK if frac == 1.0 else EXIT_RUN


def cmd_constants(args):
    exp = build_experiment(load_config(args.config),
                           base_dir=os.path.dirname(os.path.abspath(args.config)))
    prob = exp.pd
    if prob is None and exp.demo is not None:
        try:
            from .problems import pd_problem

            prob = pd_problem(exp.demo, exp.pd_form)
        except ConfigurationError:
            prob = None
    if prob is None:
        inst = exp.make_instance(exp.seeds[0])
        print(f"beta={inst.beta:.12g} (single-inclusion instance; no "
              "structured constants)")
        return EXIT_OK
    try:
        rep = compute_constants(prob)
    except InfeasibleProblemError as e:
        print(f"INFEASIBLE: {e}")
        return EXIT_VALIDATION
    for key, value in rep.as_dict().items():
        print(f"{key}={value}")
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sifb",
        description="Config-driven runs of inertial forward-backward splitting "
                    "and its primal-dual assemblies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check every structural condition")
    p_val.add_argument("config")

    p_run = sub.add_parser("run", help="one solve with artifacts on disk")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="independent multi-seed replicas")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--seeds", type=int, default=None,
                         help="number of derived replica seeds")
    p_sweep.add_argument("--jobs", type=int, default=None)
    p_sweep.add_argument("--out", default=None)

    p_const = sub.add_parser("constants", help="print feasibility constants")
    p_const.add_argument("config")

    args = parser.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "run": cmd_run,
        "sweep": cmd_sweep,
        "constants": cmd_constants,
    }
    try:
        return handlers[args.command](args)
    except (ConfigurationError, InfeasibleProblemError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o failure: {e}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
