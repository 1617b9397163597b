import json
import os

import numpy as np

from sifb.cli import main


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


def lasso_config(**overrides):
    cfg = {
        "problem": {"demo": {"name": "lasso",
                             "params": {"n": 12, "p": 10, "lam": 0.2,
                                        "cond": 20.0, "seed": 3}}},
        "algorithm": "sifb",
        "solver": {"max_iter": 20000, "stop_tol": 1e-8, "record_every": 10},
        "noise": {"mode": "zero"},
        "inertia": {"mode": "zero"},
        "seeds": [7],
    }
    cfg.update(overrides)
    return cfg


def test_validate_ok(tmp_path, capsys):
    path = write_config(tmp_path, lasso_config())
    assert main(["validate", path]) == 0
    out = capsys.readouterr().out
    assert "[PASS] summable noise variance" in out
    assert "validation: ok" in out


def test_validate_rejects_nonsummable_noise(tmp_path, capsys):
    cfg = lasso_config(noise={"mode": "poly", "sigma0": 1.0, "theta": 0.4})
    path = write_config(tmp_path, cfg)
    assert main(["validate", path]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] summable noise variance" in out


def test_validate_rejects_coupling_norm_at_least_one(tmp_path, capsys):
    cfg = {
        "problem": {"custom_pd": {
            "primal": [{"dim": 2}],
            "dual": [{"dim": 2, "g": {"family": "l1", "lam": 1.0}}],
            "coupling": [[[[2.0, 0.0], [0.0, 1.0]]]],
            "V": {"kind": "scalar", "values": [1.0]},
            "W": {"kind": "scalar", "values": [1.0]},
        }},
        "algorithm": "pd_class1",
        "noise": {"mode": "zero"},
        "inertia": {"mode": "zero"},
    }
    path = write_config(tmp_path, cfg)
    assert main(["validate", path]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] coupling norm c < 1" in out or "[FAIL] problem assembly" in out


def test_run_writes_artifacts_and_is_deterministic(tmp_path, capsys):
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    path = write_config(tmp_path, lasso_config())
    assert main(["run", path, "--out", out1]) == 0
    assert main(["run", path, "--out", out2]) == 0
    for out in (out1, out2):
        assert os.path.exists(os.path.join(out, "trace.csv"))
        assert os.path.exists(os.path.join(out, "summary.json"))
        assert os.path.exists(os.path.join(out, "resolved_config.json"))
    t1 = open(os.path.join(out1, "trace.csv")).read()
    t2 = open(os.path.join(out2, "trace.csv")).read()
    assert t1 == t2
    summary = json.load(open(os.path.join(out1, "summary.json")))
    assert summary["status"] == "converged"
    assert summary["final_fp_residual"] <= 1e-8
    assert summary["dist_to_ref"] <= 1e-5
    snap = json.load(open(os.path.join(out1, "resolved_config.json")))
    assert snap["resolved_seed"] == 7


def test_run_stochastic_seeds_differ_but_converge(tmp_path):
    cfg = lasso_config(noise={"mode": "poly", "sigma0": 0.3, "theta": 0.75},
                       solver={"max_iter": 50000, "stop_tol": 1e-4,
                               "record_every": 50})
    path = write_config(tmp_path, cfg)
    out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
    assert main(["run", path, "--seed", "1", "--out", out1]) == 0
    assert main(["run", path, "--seed", "2", "--out", out2]) == 0
    t1 = open(os.path.join(out1, "trace.csv")).read()
    t2 = open(os.path.join(out2, "trace.csv")).read()
    assert t1 != t2
    for out in (out1, out2):
        s = json.load(open(os.path.join(out, "summary.json")))
        assert s["status"] == "converged"
        assert s["dist_to_ref"] <= 1e-2


def test_run_exit_code_2_when_not_converged(tmp_path):
    cfg = lasso_config(solver={"max_iter": 3, "stop_tol": 1e-12})
    path = write_config(tmp_path, cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 2


def test_sweep_zero_noise_identical_traces(tmp_path, capsys):
    cfg = lasso_config(seeds=[1, 2, 3])
    path = write_config(tmp_path, cfg)
    out = str(tmp_path / "sweep")
    assert main(["sweep", path, "--jobs", "1", "--out", out]) == 0
    traces = [open(os.path.join(out, f"trace_{i:03d}.csv")).read() for i in range(3)]
    assert traces[0] == traces[1] == traces[2]  # no randomness consumed
    rows = open(os.path.join(out, "sweep_summary.csv")).read().strip().split("\n")
    assert rows[0] == "index,seed,status,iterations,final_fp_residual"
    assert len(rows) == 4
    agg = json.load(open(os.path.join(out, "sweep_summary.json")))
    statuses = [r.split(",")[2] for r in rows[1:]]
    iters = [int(r.split(",")[3]) for r in rows[1:]]
    residuals = [float(r.split(",")[4]) for r in rows[1:]]
    assert agg["fraction_converged"] == sum(s == "converged" for s in statuses) / 3
    assert agg["median_iterations"] == sorted(iters)[1]
    assert agg["max_final_residual"] == max(residuals)


def test_sweep_derived_seeds_and_parallel(tmp_path):
    cfg = lasso_config(noise={"mode": "poly", "sigma0": 0.2, "theta": 0.75},
                       solver={"max_iter": 50000, "stop_tol": 1e-4,
                               "record_every": 100},
                       seeds={"count": 4, "master_seed": 11})
    path = write_config(tmp_path, cfg)
    out = str(tmp_path / "sweep")
    assert main(["sweep", path, "--jobs", "2", "--out", out]) == 0
    rows = open(os.path.join(out, "sweep_summary.csv")).read().strip().split("\n")
    assert len(rows) == 5
    seeds = [int(r.split(",")[1]) for r in rows[1:]]
    assert len(set(seeds)) == 4


def test_sweep_exit_2_on_partial_failure(tmp_path):
    cfg = lasso_config(solver={"max_iter": 3, "stop_tol": 1e-12}, seeds=[1, 2])
    path = write_config(tmp_path, cfg)
    assert main(["sweep", path, "--jobs", "1", "--out", str(tmp_path / "s")]) == 2


def test_single_seed_sweep_reduces_to_run(tmp_path):
    cfg = lasso_config(seeds=[5], reference=False)
    path = write_config(tmp_path, cfg)
    out_run, out_sweep = str(tmp_path / "run"), str(tmp_path / "sweep")
    assert main(["run", path, "--out", out_run]) == 0
    assert main(["sweep", path, "--jobs", "1", "--out", out_sweep]) == 0
    t_run = open(os.path.join(out_run, "trace.csv")).read()
    t_sweep = open(os.path.join(out_sweep, "trace_000.csv")).read()
    assert t_run == t_sweep


def test_constants_command(tmp_path, capsys):
    cfg = {
        "problem": {"demo": {"name": "parallel_sum",
                             "params": {"dims": 8, "mu": 0.5, "lam": 0.3,
                                        "seed": 5}}},
        "algorithm": "pd_class1",
        "noise": {"mode": "zero"},
        "inertia": {"mode": "zero"},
    }
    path = write_config(tmp_path, cfg)
    assert main(["constants", path]) == 0
    out = capsys.readouterr().out
    assert "beta_hat=" in out and "xi_hat=" in out and "c=" in out
    assert "feasible_class1=True" in out


def test_custom_problem_with_matrix_files(tmp_path):
    rng = np.random.default_rng(2)
    a = rng.standard_normal((8, 5))
    b = rng.standard_normal(8)
    np.savetxt(tmp_path / "a.txt", a)
    np.savetxt(tmp_path / "b.txt", b)
    custom = {
        "blocks": [{"dim": 5, "operator": {"family": "l1", "lam": 0.1}}],
        "map": {"kind": "lstsq", "a": {"file": "a.txt"}, "b": {"file": "b.txt"}},
    }
    cfg = {
        "problem": {"custom": custom},
        "algorithm": "sifb",
        "solver": {"max_iter": 50000, "stop_tol": 1e-9},
        "noise": {"mode": "zero"},
        "inertia": {"mode": "zero"},
    }
    path = write_config(tmp_path, cfg)
    out = str(tmp_path / "out")
    assert main(["run", path, "--out", out]) == 0
    # inline matrices give the identical run
    custom_inline = {
        "blocks": custom["blocks"],
        "map": {"kind": "lstsq", "a": a.tolist(), "b": b.tolist()},
    }
    cfg2 = dict(cfg, problem={"custom": custom_inline})
    path2 = write_config(tmp_path, cfg2, name="config2.json")
    out2 = str(tmp_path / "out2")
    assert main(["run", path2, "--out", out2]) == 0
    t1 = open(os.path.join(out, "trace.csv")).read()
    t2 = open(os.path.join(out2, "trace.csv")).read()
    assert t1 == t2


def test_custom_given_constant_audited(tmp_path, capsys):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 4))
    custom = {
        "blocks": [{"dim": 4, "operator": {"family": "l1", "lam": 0.1}}],
        "map": {"kind": "lstsq", "a": a.tolist(),
                "b": rng.standard_normal(6).tolist()},
        "beta": 50.0,  # overstated on purpose
    }
    cfg = {
        "problem": {"custom": custom},
        "algorithm": "sifb",
        "noise": {"mode": "zero"},
        "inertia": {"mode": "zero"},
    }
    path = write_config(tmp_path, cfg)
    assert main(["validate", path]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] cocoercivity audit" in out


def test_malformed_config_reports_location(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"problem": }')
    assert main(["validate", str(path)]) == 1
    err = capsys.readouterr().err
    assert "line" in err


def test_missing_matrix_file_reported(tmp_path, capsys):
    cfg = {
        "problem": {"custom": {
            "blocks": [{"dim": 2}],
            "map": {"kind": "lstsq", "a": {"file": "nope.txt"}, "b": [0.0, 0.0]},
        }},
        "algorithm": "sifb",
    }
    path = write_config(tmp_path, cfg)
    assert main(["validate", path]) == 1
    err = capsys.readouterr().err
    assert "nope.txt" in err
