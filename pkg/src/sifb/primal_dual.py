"""Structured primal-dual problems and their two product-space assemblies.

A problem couples m primal blocks (operator A_i, shift z_i, metric V_i) and s
dual blocks (operator B_k, single-valued D_k^{-1}, shift r_k, metric W_k)
through a block linear map L, plus a cocoercive smooth coupling C over the
primal blocks. Stacking primal and dual variables turns it into a plain
monotone inclusion that the core solver handles; the two assemblies differ in
the product-space preconditioner.

Neither stacked preconditioner is ever formed. Class I realizes its backward
map by the explicit resolvent/reflection sweep over blocks; class II (all
primal operators zero) by a forward-substitution sweep whose dual solve is
the only implicit piece. Dense Schur-complement actions for both metrics are
available separately for audits at small sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionMismatch, InfeasibleProblemError
from .operators import CocoerciveMap
from .solver import ProblemInstance
from .spaces import (
    BlockVector,
    block_concat,
    block_split,
    estimate_weighted_norm,
)
from .stochastic import StochasticOracle

# Feasibility thresholds use a strict margin to avoid boundary flakiness.
_FEAS_MARGIN = 1e-9


class PrimalDualProblem:
    """The full coupled-inclusion data set.

    primal_ops / dual_inverse are blockwise monotone operators; dual_inverse
    holds the INVERSES B_k^{-1} as resolvent rules (conjugate subdifferentials
    for catalogue functions). smooth is the coupling C with constant nu0
    relative to V; dual_smooth is D^{-1} with constant mu0 relative to W.
    """

    def __init__(self, primal_ops, z, V, dual_inverse, r, W, coupling,
                 smooth=None, dual_smooth=None, nu0=None, mu0=None):
        self.primal_ops = primal_ops
        self.z = z
        self.V = V
        self.dual_inverse = dual_inverse
        self.r = r
        self.W = W
        self.coupling = coupling
        self.primal_dims = V.dims
        self.dual_dims = W.dims
        if z.dims != self.primal_dims:
            raise DimensionMismatch(f"z dims {z.dims} != primal dims {self.primal_dims}")
        if r.dims != self.dual_dims:
            raise DimensionMismatch(f"r dims {r.dims} != dual dims {self.dual_dims}")
        if coupling.dims_in != self.primal_dims or coupling.dims_out != self.dual_dims:
            raise DimensionMismatch(
                f"coupling maps {coupling.dims_in}->{coupling.dims_out}, expected "
                f"{self.primal_dims}->{self.dual_dims}"
            )
        if primal_ops.nblocks != len(self.primal_dims):
            raise DimensionMismatch(
                f"{primal_ops.nblocks} primal operator blocks for "
                f"{len(self.primal_dims)} primal blocks"
            )
        if dual_inverse.nblocks != len(self.dual_dims):
            raise DimensionMismatch(
                f"{dual_inverse.nblocks} dual operator blocks for "
                f"{len(self.dual_dims)} dual blocks"
            )
        self.smooth = smooth if smooth is not None else CocoerciveMap.zero_map(self.primal_dims)
        self.dual_smooth = (dual_smooth if dual_smooth is not None
                            else CocoerciveMap.zero_map(self.dual_dims))
        self.nu0 = float(nu0) if nu0 is not None else self.smooth.beta
        self.mu0 = float(mu0) if mu0 is not None else self.dual_smooth.beta
        if not self.nu0 > 0 or not self.mu0 > 0:
            raise ConfigurationError(
                f"cocoercivity constants must be positive (nu0={self.nu0}, mu0={self.mu0})"
            )

    @property
    def m(self):
        return len(self.primal_dims)

    @property
    def s(self):
        return len(self.dual_dims)

    @property
    def stacked_dims(self):
        return self.primal_dims + self.dual_dims

    def smooth_pair_map(self, beta, metric=None):
        """The stacked map (x, v) -> (C x, D^{-1} v) with an attached constant."""
        return CocoerciveMap.paired(self.smooth, self.dual_smooth, beta=beta,
                                    metric=metric)


@dataclass
class ConstantsReport:
    """Feasibility constants of the two assemblies."""

    c: float                 # ||sqrt(W) L sqrt(V)||
    xi_hat: float            # optimal balance parameter (nan where singular)
    beta_hat: float          # best class-I constant
    beta: float              # class-II constant
    feasible_class1: bool    # beta_hat > 1/2
    feasible_class2: bool    # 2 beta > 1

    def as_dict(self):
        return {
            "c": self.c,
            "xi_hat": self.xi_hat,
            "beta_hat": self.beta_hat,
            "beta": self.beta,
            "feasible_class1": self.feasible_class1,
            "feasible_class2": self.feasible_class2,
        }


def beta_for_balance(nu0, mu0, c, xi):
    """The class-I constant produced by one balance parameter xi > 0."""
    if xi <= 0:
        raise ConfigurationError(f"balance parameter must be positive, got {xi}")
    return (1.0 - c * c) * min(nu0 / (1.0 + xi * c), mu0 / (1.0 + c / xi))


def optimal_balance(nu0, mu0, c):
    """The xi maximizing beta_for_balance; nan where the formula is singular."""
    if c == 0.0 or not (np.isfinite(nu0) and np.isfinite(mu0)):
        return float("nan")
    if nu0 == mu0:
        # the discriminant collapses to (2 c nu0)^2; keep the value exact
        return 1.0
    disc = math.sqrt((mu0 - nu0) ** 2 + 4.0 * c * c * nu0 * mu0)
    return (nu0 - mu0 + disc) / (2.0 * mu0 * c)


def compute_constants(prob, tol=1e-12, max_iter=200000):
    """Norm, optimal balance, and both feasibility constants for a problem."""
    c = estimate_weighted_norm(prob.coupling, prob.V, prob.W, tol=tol,
                               max_iter=max_iter)
    if c >= 1.0:
        raise InfeasibleProblemError(
            f"||sqrt(W) L sqrt(V)|| = {c:.6g} >= 1; the stacked preconditioners "
            "degenerate and no constant is positive"
        )
    nu0, mu0 = prob.nu0, prob.mu0
    one_m_c2 = 1.0 - c * c
    if c == 0.0:
        xi_hat = float("nan")
        beta_hat = min(nu0, mu0)
    elif not np.isfinite(nu0) and not np.isfinite(mu0):
        xi_hat = float("nan")
        beta_hat = float("inf")
    elif not np.isfinite(nu0):
        xi_hat = float("inf")
        beta_hat = one_m_c2 * mu0
    elif not np.isfinite(mu0):
        xi_hat = 0.0
        beta_hat = one_m_c2 * nu0
    else:
        xi_hat = optimal_balance(nu0, mu0, c)
        beta_hat = beta_for_balance(nu0, mu0, c, xi_hat)
    beta = min(nu0, mu0 * one_m_c2)
    return ConstantsReport(
        c=c,
        xi_hat=xi_hat,
        beta_hat=beta_hat,
        beta=beta,
        feasible_class1=beta_hat > 0.5 + _FEAS_MARGIN,
        feasible_class2=2.0 * beta > 1.0 + _FEAS_MARGIN,
    )


def scalar_feasibility_constant(nu, mu, tau, sigma, coupling_norm):
    """Class-II constant for the all-scalar metric choice.

    With V = tau Id, W = sigma Id, C nu-cocoercive and D^{-1} mu-cocoercive in
    the plain metric, the constant is min(nu/tau, (mu/sigma)(1 - tau sigma
    ||L||^2)); positive for tau and sigma small enough.
    """
    for name, v in (("nu", nu), ("mu", mu), ("tau", tau), ("sigma", sigma)):
        if v <= 0:
            raise ConfigurationError(f"{name} must be positive, got {v}")
    return min(nu / tau, (mu / sigma) * (1.0 - tau * sigma * coupling_norm**2))


def extract_primal_dual(x_stacked, prob):
    """Undo the stacking: (primal blocks, dual blocks)."""
    if x_stacked.dims != prob.stacked_dims:
        raise DimensionMismatch(
            f"stacked dims {x_stacked.dims} != problem dims {prob.stacked_dims}"
        )
    return block_split(x_stacked, prob.m)


def _zeros(dims):
    return BlockVector.zeros(dims)


def assemble_class1(prob, noise=None, seed=0, x0=None, v0=None, oracle=None,
                    constants=None):
    """Stacked instance whose unit-step backward map is the class-I sweep.

    One solver step reproduces, blockwise: primal resolvents at the
    extrapolated point, reflection, then dual resolvents against the
    reflected primal. Requires the class-I constant > 1/2.
    """
    rep = constants if constants is not None else compute_constants(prob)
    if not rep.feasible_class1:
        raise InfeasibleProblemError(
            f"class-I assembly requires beta_hat > 1/2; got beta_hat={rep.beta_hat:.6g}"
        )
    x0 = x0 if x0 is not None else _zeros(prob.primal_dims)
    v0 = v0 if v0 is not None else _zeros(prob.dual_dims)
    start = block_concat(x0, v0)
    q_map = prob.smooth_pair_map(beta=rep.beta_hat)
    if oracle is None:
        oracle = StochasticOracle(q_map, noise=noise, rng_seed=seed)
    m = prob.m

    def backward(u, gamma, a):
        c, d = block_split(u, m)
        a_p, b_d = block_split(a, m)
        t = prob.coupling.adjoint_apply(d) + a_p - prob.z
        p = prob.primal_ops.resolvent(1.0, prob.V, c - prob.V.apply(t))
        y = (2.0 * p) - c
        u_k = prob.coupling.apply(y) - b_d - prob.r
        q = prob.dual_inverse.resolvent(1.0, prob.W, d + prob.W.apply(u_k))
        return block_concat(p, q)

    return ProblemInstance.from_backward(
        backward, oracle, start, beta=rep.beta_hat, gamma_fixed=1.0,
        label="pd_class1", extras={"problem": prob, "constants": rep},
    )


def assemble_class2(prob, noise=None, seed=0, x0=None, v0=None, oracle=None,
                    constants=None):
    """Stacked instance for the all-explicit-primal variant.

    Only valid when every primal block operator is zero; the primal half
    becomes forward substitutions around the single dual resolvent. Requires
    twice the class-II constant > 1.
    """
    if not prob.primal_ops.is_zero():
        raise ConfigurationError(
            "class-II assembly requires every primal block operator to be zero"
        )
    rep = constants if constants is not None else compute_constants(prob)
    if not rep.feasible_class2:
        raise InfeasibleProblemError(
            f"class-II assembly requires 2*beta > 1; got beta={rep.beta:.6g}"
        )
    x0 = x0 if x0 is not None else _zeros(prob.primal_dims)
    v0 = v0 if v0 is not None else _zeros(prob.dual_dims)
    start = block_concat(x0, v0)
    q_map = prob.smooth_pair_map(beta=rep.beta)
    if oracle is None:
        oracle = StochasticOracle(q_map, noise=noise, rng_seed=seed)
    m = prob.m

    def backward(u, gamma, a):
        c, d = block_split(u, m)
        a_p, b_d = block_split(a, m)
        s_i = c - prob.V.apply(a_p - prob.z)
        y = s_i - prob.V.apply(prob.coupling.adjoint_apply(d))
        arg = d + prob.W.apply(prob.coupling.apply(y) - b_d - prob.r)
        q = prob.dual_inverse.resolvent(1.0, prob.W, arg)
        p = s_i - prob.V.apply(prob.coupling.adjoint_apply(q))
        return block_concat(p, q)

    return ProblemInstance.from_backward(
        backward, oracle, start, beta=rep.beta, gamma_fixed=1.0,
        label="pd_class2", extras={"problem": prob, "constants": rep},
    )


# ---------------------------------------------------------------------------
# dense metric actions (audits only; never used by the solve loop)
# ---------------------------------------------------------------------------


def _dense_coupling(prob):
    rows = []
    for k in range(prob.s):
        cells = []
        for i in range(prob.m):
            cell = prob.coupling.entries[k][i]
            if cell is None:
                cell = np.zeros((prob.dual_dims[k], prob.primal_dims[i]))
            cells.append(cell)
        rows.append(np.hstack(cells) if cells else np.zeros((prob.dual_dims[k], 0)))
    if rows:
        return np.vstack(rows)
    return np.zeros((0, sum(prob.primal_dims)))


class _SchurActions:
    """Shared dense machinery behind the two stacked-metric actions."""

    def __init__(self, prob):
        self.prob = prob
        self.ld = _dense_coupling(prob)
        self.v_diag = (np.concatenate(prob.V.diag_blocks())
                       if sum(prob.primal_dims) else np.zeros(0))
        self.w_diag = (np.concatenate(prob.W.diag_blocks())
                       if sum(prob.dual_dims) else np.zeros(0))
        schur = np.diag(1.0 / self.w_diag) - (self.ld * self.v_diag[None, :]) @ self.ld.T
        # positive definite exactly when ||sqrt(W) L sqrt(V)|| < 1
        try:
            np.linalg.cholesky(schur) if schur.size else None
        except np.linalg.LinAlgError as e:
            raise InfeasibleProblemError(
                "dual Schur complement is not positive definite; "
                "||sqrt(W) L sqrt(V)|| >= 1"
            ) from e
        self.schur = schur

    def _solve(self, rhs):
        if self.schur.size == 0:
            return rhs
        return np.linalg.solve(self.schur, rhs)

    def split(self, xy):
        x, v = block_split(xy, self.prob.m)
        return x.concatenated(), v.concatenated()

    def join(self, xf, vf):
        return block_concat(
            BlockVector.from_flat(xf, self.prob.primal_dims),
            BlockVector.from_flat(vf, self.prob.dual_dims),
        )

    def class1_apply(self, xy):
        # inverse of the block operator [[V^-1, -L*], [-L, W^-1]]
        a, b = self.split(xy)
        v = self._solve(b + self.ld @ (self.v_diag * a))
        x = self.v_diag * (a + self.ld.T @ v)
        return self.join(x, v)

    def class2_apply(self, xy):
        a, b = self.split(xy)
        return self.join(self.v_diag * a, self._solve(b))

    def class1_dense(self):
        n_p, n_d = self.ld.shape[1], self.ld.shape[0]
        up = np.zeros((n_p + n_d, n_p + n_d))
        up[:n_p, :n_p] = np.diag(1.0 / self.v_diag)
        up[:n_p, n_p:] = -self.ld.T
        up[n_p:, :n_p] = -self.ld
        up[n_p:, n_p:] = np.diag(1.0 / self.w_diag)
        return np.linalg.inv(up)

    def class2_dense(self):
        n_p, n_d = self.ld.shape[1], self.ld.shape[0]
        t = np.zeros((n_p + n_d, n_p + n_d))
        t[:n_p, :n_p] = np.diag(self.v_diag)
        t[n_p:, n_p:] = np.linalg.inv(self.schur)
        return t


def class1_metric_apply(prob):
    """Action of the class-I stacked metric, via the dual Schur solve."""
    actions = _SchurActions(prob)
    return actions.class1_apply


def class2_metric_apply(prob):
    """Action of the class-II stacked metric (block diagonal)."""
    actions = _SchurActions(prob)
    return actions.class2_apply


def dense_metrics(prob):
    """Both stacked metrics as dense matrices, for small cross-checks."""
    actions = _SchurActions(prob)
    return actions.class1_dense(), actions.class2_dense()


# ---------------------------------------------------------------------------
# optimality-system residuals
# ---------------------------------------------------------------------------


@dataclass
class DualityReport:
    primal_block_res: list
    dual_block_res: list
    unchecked: list

    @property
    def primal_inclusion_res(self):
        vals = [v for v in self.primal_block_res if v is not None]
        return max(vals) if vals else float("nan")

    @property
    def dual_inclusion_res(self):
        vals = [v for v in self.dual_block_res if v is not None]
        return max(vals, default=0.0)

    @property
    def max_residual(self):
        vals = [v for v in self.primal_block_res + self.dual_block_res if v is not None]
        return max(vals) if vals else float("nan")


def duality_residuals(primal, dual, prob):
    """Violation of the coupled optimality system at a primal-dual pair.

    Per primal block: distance of z_i - (L* v)_i - C_i(x) from the graph of
    A_i at x_i. Per dual block: distance of (L x)_k - r_k - D_k^{-1} v_k from
    the graph of B_k^{-1} at v_k. Blocks without a checkable rule are listed
    as unchecked, never reported as zero.
    """
    from .operators import conjugate_subdiff_distance, subdiff_distance

    if primal.dims != prob.primal_dims:
        raise DimensionMismatch(f"primal dims {primal.dims} != {prob.primal_dims}")
    if dual.dims != prob.dual_dims:
        raise DimensionMismatch(f"dual dims {dual.dims} != {prob.dual_dims}")
    lt_v = prob.coupling.adjoint_apply(dual)
    cx = prob.smooth.apply(primal)
    unchecked = []
    primal_res = []
    for i, rule in enumerate(prob.primal_ops.rules):
        u = prob.z.blocks[i] - lt_v.blocks[i] - cx.blocks[i]
        if rule.kind == "zero":
            primal_res.append(float(np.linalg.norm(u)))
        elif rule.kind == "subdiff":
            d = subdiff_distance(rule.fn, primal.blocks[i], u)
            if d is None:
                unchecked.append(f"primal[{i}]")
            primal_res.append(d)
        elif rule.kind == "linear":
            primal_res.append(float(np.linalg.norm(u - rule.matrix @ primal.blocks[i])))
        else:
            primal_res.append(None)
            unchecked.append(f"primal[{i}]")
    lx = prob.coupling.apply(primal)
    dv = prob.dual_smooth.apply(dual)
    dual_res = []
    for k, rule in enumerate(prob.dual_inverse.rules):
        u = lx.blocks[k] - prob.r.blocks[k] - dv.blocks[k]
        if rule.kind == "conjugate_subdiff":
            d = conjugate_subdiff_distance(rule.fn, dual.blocks[k], u)
            if d is None:
                unchecked.append(f"dual[{k}]")
            dual_res.append(d)
        elif rule.kind == "zero":
            dual_res.append(float(np.linalg.norm(u)))
        else:
            dual_res.append(None)
            unchecked.append(f"dual[{k}]")
    return DualityReport(primal_res, dual_res, unchecked)
