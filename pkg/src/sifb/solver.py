"""The core solver loop: inertial extrapolation, stochastic forward step,
preconditioned resolvent step, relaxation.

One iteration, from the current pair (x_n, x_{n-1}):

    w_n = x_n + alpha_n (x_n - x_{n-1})
    z_n = w_n - gamma_n U r_n          with r_n one oracle draw at w_n
    p_n = J_{gamma_n U A}(z_n)
    x_{n+1} = x_n + lambda_n (p_n - x_n)

Assembled primal-dual instances replace the middle two lines with an explicit
per-block sequence that realizes the same backward map at gamma = 1; the
extrapolation and relaxation lines are shared.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .stochastic import InertiaSchedule, validate_schedules

CONVERGED = "converged"
MAX_ITER = "max_iter"
DIVERGED = "diverged"

_DIVERGE_NORM = 1e12
_STEP_GROWTH_LIMIT = 1e6


@dataclass
class SolverConfig:
    """Step-size, relaxation, inertia and stopping configuration.

    `beta` is the cocoercivity constant of the instance being solved; the
    admissible ranges are gamma_n in [eps, (2 - eps) beta], lambda_n in
    [eps, 1], alpha_n in [0, 1 - eps], all checked at construction.
    gamma / relaxation may be floats (constant schedules) or callables of n;
    callables are range-checked per iteration.
    """

    beta: float
    epsilon: float = 1e-3
    gamma: object = None          # None -> constant beta (or the fixed assembled step)
    relaxation: object = 1.0
    inertia: InertiaSchedule = field(default_factory=InertiaSchedule.zero)
    max_iter: int = 1000
    stop_tol: float = 1e-8
    record_every: int = 1

    def __post_init__(self):
        if not (self.beta > 0):
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if not (0 < self.epsilon < min(1.0, self.beta)):
            raise ConfigurationError(
                f"epsilon={self.epsilon} outside ]0, min(1, beta)[ with beta={self.beta}"
            )
        if self.max_iter < 0:
            raise ConfigurationError(f"max_iter must be nonnegative, got {self.max_iter}")
        if self.record_every < 1:
            raise ConfigurationError(f"record_every must be positive, got {self.record_every}")
        if self.stop_tol < 0:
            raise ConfigurationError(f"stop_tol must be nonnegative, got {self.stop_tol}")
        lo, hi = self.gamma_range
        if isinstance(self.gamma, (int, float)):
            g = float(self.gamma)
            if not lo <= g <= hi:
                raise ConfigurationError(
                    f"step size gamma={g} outside [eps, (2-eps)*beta] = [{lo:g}, {hi:g}]"
                )
        if isinstance(self.relaxation, (int, float)):
            lam = float(self.relaxation)
            if not self.epsilon <= lam <= 1.0:
                raise ConfigurationError(
                    f"relaxation lambda={lam} outside [eps, 1] = [{self.epsilon:g}, 1]"
                )
        if self.inertia.max_alpha() > 1.0 - self.epsilon:
            raise ConfigurationError(
                f"inertia alpha0={self.inertia.max_alpha()} exceeds 1 - eps = "
                f"{1.0 - self.epsilon:g}"
            )

    @property
    def gamma_range(self):
        return self.epsilon, (2.0 - self.epsilon) * self.beta

    def gamma_at(self, n, default):
        if self.gamma is None:
            g = default
        elif callable(self.gamma):
            g = float(self.gamma(n))
        else:
            g = float(self.gamma)
        lo, hi = self.gamma_range
        if not lo <= g <= hi:
            raise ConfigurationError(
                f"step size gamma_{n}={g} outside [eps, (2-eps)*beta] = [{lo:g}, {hi:g}]"
            )
        return g

    def relaxation_at(self, n):
        lam = float(self.relaxation(n)) if callable(self.relaxation) else float(self.relaxation)
        if not self.epsilon <= lam <= 1.0:
            raise ConfigurationError(
                f"relaxation lambda_{n}={lam} outside [eps, 1] = [{self.epsilon:g}, 1]"
            )
        return lam


class ProblemInstance:
    """A monotone inclusion packaged for the solver.

    Two flavors share the interface: `forward_backward` instances carry the
    blockwise operator A and the preconditioner U, and compute the backward
    step as a resolvent; `from_backward` instances (the assembled primal-dual
    classes) carry an explicit backward map valid at one fixed step size.
    """

    def __init__(self, oracle, x0, beta, operator=None, metric=None,
                 backward=None, gamma_fixed=None, label="sifb", extras=None):
        if (operator is None) == (backward is None):
            raise ConfigurationError(
                "exactly one of operator (with metric) or backward must be given"
            )
        if operator is not None and metric is None:
            raise ConfigurationError("forward-backward instances need a metric U")
        self.oracle = oracle
        self.x0 = x0
        self.beta = float(beta)
        self.operator = operator
        self.metric = metric
        self.backward_fn = backward
        self.gamma_fixed = gamma_fixed
        self.label = label
        self.extras = extras or {}

    @classmethod
    def forward_backward(cls, operator, oracle, metric, x0, beta=None, label="sifb",
                         extras=None):
        if beta is None:
            beta = oracle.base.beta
        return cls(oracle, x0, beta, operator=operator, metric=metric,
                   label=label, extras=extras)

    @classmethod
    def from_backward(cls, backward, oracle, x0, beta, gamma_fixed=1.0,
                      label="custom", extras=None):
        return cls(oracle, x0, beta, backward=backward,
                   gamma_fixed=gamma_fixed, label=label, extras=extras)

    def backward(self, w, gamma, r):
        """The resolvent half-step: from the extrapolated point w and draw r."""
        if self.backward_fn is not None:
            if self.gamma_fixed is not None and gamma != self.gamma_fixed:
                raise ConfigurationError(
                    f"this instance defines its backward map only at "
                    f"gamma={self.gamma_fixed}, got {gamma}"
                )
            return self.backward_fn(w, gamma, r)
        z = w.axpy(-gamma, self.metric.apply(r))
        return self.operator.resolvent(gamma, self.metric, z)

    @property
    def default_gamma(self):
        if self.gamma_fixed is not None:
            return self.gamma_fixed
        return self.beta if np.isfinite(self.beta) else 1.0

    @property
    def residual_gamma(self):
        # Mid-range step for the noise-free fixed-point residual; assembled
        # instances only define their backward map at the fixed step.
        return self.default_gamma

    def with_x0(self, x0):
        return ProblemInstance(self.oracle, x0, self.beta, operator=self.operator,
                               metric=self.metric, backward=self.backward_fn,
                               gamma_fixed=self.gamma_fixed, label=self.label,
                               extras=self.extras)


def fp_residual(prob, x):
    """Noise-free fixed-point residual ||x - J_{gbar U A}(x - gbar U B x)||.

    Vanishes exactly on the solution set for catalogue operators.
    """
    b = prob.oracle.base.apply(x)
    p = prob.backward(x, prob.residual_gamma, b)
    return (x - p).norm()


@dataclass
class TraceRow:
    n: int
    fp_residual: float
    step_norm: float
    dist_to_ref: float
    sigma: float
    alpha: float


class RunTrace:
    """Per-iteration diagnostics and the terminal status of one run."""

    CSV_COLUMNS = "n,fp_residual,step_norm,dist_to_ref,sigma_n,alpha_n"

    def __init__(self):
        self.rows = []
        self.status = None
        self.iterations = 0
        self.diverged_at = None
        self.max_step_norm = 0.0
        self.first_step_norm = None
        self.wall_time = None

    def append(self, row):
        if self.rows and row.n <= self.rows[-1].n:
            raise ValueError("trace rows must be strictly increasing in n")
        self.rows.append(row)

    @property
    def final_residual(self):
        return self.rows[-1].fp_residual if self.rows else float("nan")

    @property
    def steps_bounded(self):
        """Monitors sup_n ||x_n - x_{n-1}||: flags runaway step growth."""
        if self.first_step_norm is None or self.first_step_norm == 0.0:
            return True
        return self.max_step_norm <= _STEP_GROWTH_LIMIT * self.first_step_norm

    def to_csv(self, fileobj=None):
        own = fileobj is None
        f = io.StringIO() if own else fileobj
        f.write("#schema=1\n")
        f.write(self.CSV_COLUMNS + "\n")
        for r in self.rows:
            dist = "" if np.isnan(r.dist_to_ref) else f"{r.dist_to_ref:.17g}"
            f.write(
                f"{r.n},{r.fp_residual:.17g},{r.step_norm:.17g},{dist},"
                f"{r.sigma:.17g},{r.alpha:.17g}\n"
            )
        if own:
            return f.getvalue()
        return None

    def summary(self):
        return {
            "status": self.status,
            "iterations": self.iterations,
            "final_fp_residual": self.final_residual,
            "max_step_norm": self.max_step_norm,
            "steps_bounded": self.steps_bounded,
            "diverged_at": self.diverged_at,
            "wall_time": self.wall_time,
        }


def step(prob, cfg, state, n):
    """One solver iteration; returns the new (x_{n+1}, x_n) pair.

    Draws from the oracle exactly once.
    """
    x, x_prev = state
    alpha = cfg.inertia.alpha(n)
    w = x if alpha == 0.0 else x.axpy(alpha, x - x_prev)
    gamma = cfg.gamma_at(n, prob.default_gamma)
    r = prob.oracle.sample(n, w)
    p = prob.backward(w, gamma, r)
    lam = cfg.relaxation_at(n)
    # at lam = 1 the relaxed update collapses to p exactly; keep it exact
    x_next = p if lam == 1.0 else x.axpy(lam, p - x)
    return x_next, x


def run(prob, cfg, reference=None):
    """Iterate until the noise-free fixed-point residual drops below stop_tol.

    Returns (final iterate, RunTrace). The trace records every `record_every`
    iterations; non-finite iterates or norm blow-up terminate with the
    `diverged` status and the offending iteration index.
    """
    report = validate_schedules(prob.oracle.noise, cfg.inertia)
    if not report.ok:
        msgs = "; ".join(f"{v.condition}: {v.detail}" for v in report.violations)
        raise ConfigurationError(f"schedule validation failed: {msgs}")
    if np.isfinite(prob.beta) and cfg.beta > prob.beta * (1.0 + 1e-12):
        raise ConfigurationError(
            f"config beta={cfg.beta:g} exceeds the instance constant {prob.beta:g}"
        )
    cfg.gamma_at(0, prob.default_gamma)

    trace = RunTrace()
    x = prob.x0
    x_prev = prob.x0  # x_{-1} = x_0
    for n in range(cfg.max_iter + 1):
        recorded = (n % cfg.record_every == 0) or n == cfg.max_iter
        if recorded:
            res = fp_residual(prob, x)
            step_norm = (x - x_prev).norm()
            dist = (x - reference).norm() if reference is not None else float("nan")
            trace.append(TraceRow(n, res, step_norm, dist,
                                  prob.oracle.noise.sigma(n), cfg.inertia.alpha(n)))
            if res <= cfg.stop_tol:
                trace.status = CONVERGED
                trace.iterations = n
                return x, trace
        if n == cfg.max_iter:
            break
        x_next, x_curr = step(prob, cfg, (x, x_prev), n)
        sn = (x_next - x).norm()
        if trace.first_step_norm is None and sn > 0.0:
            trace.first_step_norm = sn
        trace.max_step_norm = max(trace.max_step_norm, sn)
        x, x_prev = x_next, x_curr
        if not x.all_finite() or x.norm() > _DIVERGE_NORM:
            trace.status = DIVERGED
            trace.iterations = n + 1
            trace.diverged_at = n
            return x, trace
    trace.status = MAX_ITER
    trace.iterations = cfg.max_iter
    return x, trace
