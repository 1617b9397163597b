"""Experiment configuration: a single JSON document per experiment.

The document names a problem (a built-in demo with parameters, or a custom
problem spelled out blockwise with matrices inline or in plain-text files),
an algorithm route, solver settings, and the noise / inertia schedules.
Everything needed to replay a run is in the resolved snapshot the runner
writes next to its outputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .operators import CocoerciveMap, MonotoneBlock, ProxFunction
from .primal_dual import PrimalDualProblem, assemble_class1, assemble_class2
from .problems import build_demo, pd_problem, reference_oracle, sifb_instance
from .solver import ProblemInstance, SolverConfig
from .spaces import BlockLinearOperator, BlockVector, Preconditioner
from .stochastic import InertiaSchedule, NoiseSchedule, StochasticOracle

ALGORITHMS = ("sifb", "pd_class1", "pd_class2")


def load_config(path):
    """Read a JSON config; parse errors keep their line/column context."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(
            f"malformed config {path}: {e.msg} at line {e.lineno} column {e.colno}"
        ) from e


def load_matrix(spec, base_dir):
    """A matrix given inline (nested lists) or as {"file": path} plain text."""
    if isinstance(spec, dict):
        if "file" not in spec:
            raise ConfigurationError(f"matrix reference needs a 'file' key, got {spec}")
        path = os.path.join(base_dir, spec["file"])
        if not os.path.exists(path):
            raise ConfigurationError(f"matrix file does not exist: {path}")
        return np.atleast_1d(np.loadtxt(path, dtype=np.float64))
    return np.asarray(spec, dtype=np.float64)


def _load_precond(spec, dims):
    if spec is None or spec.get("kind", "identity") == "identity":
        return Preconditioner.identity(dims)
    kind = spec["kind"]
    if kind == "scalar":
        return Preconditioner.scalar(spec["values"], dims)
    if kind == "diagonal":
        return Preconditioner.diagonal([np.asarray(w, dtype=np.float64)
                                        for w in spec["weights"]])
    raise ConfigurationError(f"unknown preconditioner kind {kind!r}")


def _load_map(spec, dims, metric, base_dir):
    kind = spec["kind"]
    if kind == "zero":
        return CocoerciveMap.zero_map(dims)
    if kind == "lstsq":
        a = load_matrix(spec["a"], base_dir)
        b = load_matrix(spec["b"], base_dir).reshape(-1)
        return CocoerciveMap.least_squares_gradient(a, b, metric=metric)
    if kind == "linear":
        q = load_matrix(spec["q"], base_dir)
        offset = (load_matrix(spec["offset"], base_dir).reshape(-1)
                  if "offset" in spec else None)
        return CocoerciveMap.linear(q, offset, dims=dims, metric=metric)
    if kind == "scaled_identity":
        return CocoerciveMap.scaled_identity(dims, spec["mu"], metric=metric)
    raise ConfigurationError(f"unknown map kind {kind!r}")


def _block_operator(spec):
    if spec is None or spec.get("family") == "zero":
        return MonotoneBlock.rule_zero()
    return MonotoneBlock.rule_subdiff(ProxFunction.from_config(spec))


def _build_custom_flat(spec, base_dir):
    """Custom single-inclusion problem for the sifb route."""
    blocks = spec["blocks"]
    dims = tuple(int(b["dim"]) for b in blocks)
    metric = _load_precond(spec.get("preconditioner"), dims)
    operator = MonotoneBlock.mixed([_block_operator(b.get("operator")) for b in blocks])
    b_map = _load_map(spec["map"], dims, metric, base_dir)
    given_beta = spec.get("beta")
    beta = float(given_beta) if given_beta is not None else b_map.beta
    x0 = (BlockVector.from_flat(load_matrix(spec["x0"], base_dir).reshape(-1), dims)
          if "x0" in spec else BlockVector.zeros(dims))
    return {
        "dims": dims,
        "metric": metric,
        "operator": operator,
        "map": b_map,
        "beta": beta,
        "beta_given": given_beta is not None,
        "x0": x0,
    }


def _build_custom_pd(spec, base_dir):
    """Custom structured problem for the primal-dual routes."""
    primal = spec["primal"]
    dual = spec.get("dual", [])
    pdims = tuple(int(b["dim"]) for b in primal)
    ddims = tuple(int(b["dim"]) for b in dual)
    v = _load_precond(spec.get("V"), pdims)
    w = _load_precond(spec.get("W"), ddims)
    z = BlockVector([np.asarray(b.get("z", np.zeros(b["dim"])), dtype=np.float64)
                     for b in primal])
    r = BlockVector([np.asarray(b.get("r", np.zeros(b["dim"])), dtype=np.float64)
                     for b in dual])
    primal_ops = MonotoneBlock.mixed([_block_operator(b.get("operator")) for b in primal])
    dual_rules = []
    for b in dual:
        g = b.get("g")
        if g is None:
            dual_rules.append(MonotoneBlock.rule_zero())
        else:
            dual_rules.append(
                MonotoneBlock.rule_conjugate_subdiff(ProxFunction.from_config(g)))
    rows = spec.get("coupling")
    if rows is None:
        coupling = BlockLinearOperator.zero(pdims, ddims)
    else:
        coupling = BlockLinearOperator(
            [[None if cell is None else load_matrix(cell, base_dir) for cell in row]
             for row in rows],
            pdims, ddims,
        )
    smooth = (_load_map(spec["smooth"], pdims, v, base_dir)
              if "smooth" in spec else None)
    mus = [b.get("dinv_mu") for b in dual]
    dual_smooth = None
    if any(mu is not None for mu in mus):
        if len(set(mus)) != 1:
            raise ConfigurationError(
                "per-block dinv_mu values must currently agree across dual blocks"
            )
        dual_smooth = CocoerciveMap.scaled_identity(ddims, float(mus[0]), metric=w)
    prob = PrimalDualProblem(
        primal_ops=primal_ops, z=z, V=v,
        dual_inverse=MonotoneBlock.mixed(dual_rules), r=r, W=w,
        coupling=coupling, smooth=smooth, dual_smooth=dual_smooth,
        nu0=spec.get("nu0"), mu0=spec.get("mu0"),
    )
    given = spec.get("nu0") is not None or spec.get("mu0") is not None
    return prob, given


@dataclass
class Experiment:
    """A fully resolved experiment: problem, route, schedules, solver knobs."""

    raw: dict
    base_dir: str
    algorithm: str
    noise: NoiseSchedule
    inertia: InertiaSchedule
    solver_spec: dict
    seeds: list
    output_dir: str
    demo: object = None
    pd_form: str = None
    custom_flat: dict = None
    custom_pd: PrimalDualProblem = None
    constants_given: bool = False
    want_reference: bool = True
    _reference: object = field(default=None, repr=False)

    @property
    def pd(self):
        if self.demo is not None and self.algorithm in ("pd_class1", "pd_class2"):
            return pd_problem(self.demo, self.pd_form)
        return self.custom_pd

    def make_instance(self, seed):
        if self.demo is not None:
            if self.algorithm == "sifb":
                return sifb_instance(self.demo, noise=self.noise, seed=seed)
            prob = self.pd
            assemble = assemble_class1 if self.algorithm == "pd_class1" else assemble_class2
            return assemble(prob, noise=self.noise, seed=seed)
        if self.custom_flat is not None:
            c = self.custom_flat
            oracle = StochasticOracle(c["map"], noise=self.noise, rng_seed=seed)
            return ProblemInstance.forward_backward(
                c["operator"], oracle, c["metric"], c["x0"], beta=c["beta"])
        assemble = assemble_class1 if self.algorithm == "pd_class1" else assemble_class2
        return assemble(self.custom_pd, noise=self.noise, seed=seed)

    def solver_config(self, beta):
        spec = dict(self.solver_spec)
        stop_default = 1e-8 if self.noise.mode == "zero" else 1e-4
        return SolverConfig(
            beta=beta,
            epsilon=spec.get("epsilon", 1e-3),
            gamma=spec.get("gamma"),
            relaxation=spec.get("relaxation", 1.0),
            inertia=self.inertia,
            max_iter=int(spec.get("max_iter", 100000)),
            stop_tol=float(spec.get("stop_tol", stop_default)),
            record_every=int(spec.get("record_every", 1)),
        )

    def reference(self):
        """Oracle solution for demo problems (primal blocks), cached."""
        if not self.want_reference or self.demo is None:
            return None
        if self._reference is None:
            self._reference = reference_oracle(self.demo, tol=1e-10)
        return self._reference


def build_experiment(cfg, base_dir="."):
    if "problem" not in cfg:
        raise ConfigurationError("config needs a 'problem' section")
    algorithm = cfg.get("algorithm", "sifb")
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(
            f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}"
        )
    noise = NoiseSchedule.from_config(cfg.get("noise"))
    inertia = InertiaSchedule.from_config(cfg.get("inertia"))
    seeds_spec = cfg.get("seeds", [0])
    if isinstance(seeds_spec, dict):
        from .stochastic import derive_seeds

        seeds = derive_seeds(seeds_spec.get("master_seed", 0),
                             seeds_spec.get("count", 1))
    else:
        seeds = [int(s) for s in seeds_spec]
    exp = Experiment(
        raw=cfg,
        base_dir=base_dir,
        algorithm=algorithm,
        noise=noise,
        inertia=inertia,
        solver_spec=cfg.get("solver", {}),
        seeds=seeds,
        output_dir=cfg.get("output_dir", "runs"),
        want_reference=bool(cfg.get("reference", True)),
    )
    problem = cfg["problem"]
    if "demo" in problem:
        exp.demo = build_demo(problem["demo"]["name"],
                              problem["demo"].get("params", {}))
        exp.pd_form = problem["demo"].get("form")
    elif "custom" in problem:
        if algorithm != "sifb":
            raise ConfigurationError(
                "flat custom problems run on the sifb route; use custom_pd "
                "for the primal-dual routes"
            )
        exp.custom_flat = _build_custom_flat(problem["custom"], base_dir)
        exp.constants_given = exp.custom_flat["beta_given"]
    elif "custom_pd" in problem:
        if algorithm == "sifb":
            raise ConfigurationError(
                "custom_pd problems run on the primal-dual routes"
            )
        exp.custom_pd, exp.constants_given = _build_custom_pd(
            problem["custom_pd"], base_dir)
    else:
        raise ConfigurationError(
            "problem section needs one of 'demo', 'custom', 'custom_pd'"
        )
    return exp
