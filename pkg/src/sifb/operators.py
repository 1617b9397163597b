"""Monotone-operator toolbox: proximity catalogue, resolvents in weighted
metrics, conjugate proxes, and cocoercive maps with audited constants.

The catalogue families are all coordinate-separable, so every resolvent with a
diagonal preconditioner reduces to an elementwise scalar prox with a
per-coordinate step. Conjugate proxes prefer closed forms; the generalized
Moreau decomposition is the fallback, and both paths must agree where both
exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionMismatch
from .spaces import (
    BlockLinearOperator,
    BlockVector,
    Preconditioner,
    block_concat,
    block_split,
    estimate_weighted_norm,
)

_FAMILIES = ("zero", "l1", "sq_l2", "box", "linf_ball", "affine")

# Safety deflation applied to computed cocoercivity constants before they are
# fed to step-size rules, so the defining inequality holds strictly in floats.
BETA_DEFLATION = 1.01


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


class ProxFunction:
    """A convex function from the built-in catalogue, identified by family name.

    Exposes the scalar building blocks used everywhere else: `prox` with a
    per-coordinate step, `prox_conj` (prox of the convex conjugate) when a
    closed-form rule exists, and plain function values.
    """

    __slots__ = ("family", "params")

    def __init__(self, family, **params):
        if family not in _FAMILIES:
            raise ConfigurationError(
                f"unknown prox family {family!r}; expected one of {_FAMILIES}"
            )
        self.family = family
        self.params = params

    # --- constructors ---------------------------------------------------
    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def l1(cls, lam):
        if lam < 0:
            raise ConfigurationError(f"l1 weight must be nonnegative, got {lam}")
        return cls("l1", lam=float(lam))

    @classmethod
    def squared_l2(cls, lam=1.0, center=0.0):
        """(lam/2) ||x - center||^2."""
        if lam <= 0:
            raise ConfigurationError(f"sq_l2 weight must be positive, got {lam}")
        return cls("sq_l2", lam=float(lam), center=np.asarray(center, dtype=np.float64))

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if np.any(lo > hi):
            raise ConfigurationError("box indicator needs lo <= hi")
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def linf_ball(cls, radius):
        if radius < 0:
            raise ConfigurationError(f"ball radius must be nonnegative, got {radius}")
        return cls("linf_ball", radius=float(radius))

    @classmethod
    def affine(cls, c):
        return cls("affine", c=np.asarray(c, dtype=np.float64))

    @classmethod
    def from_config(cls, spec):
        """Build from a config mapping like {"family": "l1", "lam": 0.5}."""
        spec = dict(spec)
        family = spec.pop("family")
        builders = {
            "zero": lambda: cls.zero(),
            "l1": lambda: cls.l1(spec["lam"]),
            "sq_l2": lambda: cls.squared_l2(spec.get("lam", 1.0), spec.get("center", 0.0)),
            "box": lambda: cls.box(spec["lo"], spec["hi"]),
            "linf_ball": lambda: cls.linf_ball(spec["radius"]),
            "affine": lambda: cls.affine(spec["c"]),
        }
        if family not in builders:
            raise ConfigurationError(f"unknown prox family {family!r} in config")
        return builders[family]()

    # --- evaluation -----------------------------------------------------
    def value(self, x, feas_tol=1e-9):
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.family == "zero":
            return 0.0
        if self.family == "l1":
            return float(p["lam"] * np.abs(x).sum())
        if self.family == "sq_l2":
            d = x - p["center"]
            return float(0.5 * p["lam"] * np.dot(d, d))
        if self.family == "box":
            ok = np.all(x >= p["lo"] - feas_tol) and np.all(x <= p["hi"] + feas_tol)
            return 0.0 if ok else float("inf")
        if self.family == "linf_ball":
            return 0.0 if (x.size == 0 or np.abs(x).max() <= p["radius"] + feas_tol) else float("inf")
        if self.family == "affine":
            return float(np.dot(np.broadcast_to(p["c"], x.shape), x))
        raise AssertionError(self.family)

    def prox(self, x, step=1.0):
        """argmin_y  f(y) + (1/(2*step)) (x - y)^2, elementwise; step may be a vector."""
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.family == "zero":
            return x.copy()
        if self.family == "l1":
            return _soft(x, step * p["lam"])
        if self.family == "sq_l2":
            t = step * p["lam"]
            return (x + t * p["center"]) / (1.0 + t)
        if self.family == "box":
            return np.clip(x, p["lo"], p["hi"])
        if self.family == "linf_ball":
            return np.clip(x, -p["radius"], p["radius"])
        if self.family == "affine":
            return x - step * p["c"]
        raise AssertionError(self.family)

    @property
    def has_conjugate_rule(self):
        return self.family != "box"

    def prox_conj(self, x, step=1.0):
        """Closed-form prox of the conjugate f*, with step (no Moreau fallback here)."""
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.family == "zero":
            # conjugate is the indicator of {0}
            return np.zeros_like(x)
        if self.family == "l1":
            # conjugate is the indicator of the lam-radius sup-norm ball
            return np.clip(x, -p["lam"], p["lam"])
        if self.family == "linf_ball":
            # conjugate is radius * the l1 norm
            return _soft(x, step * p["radius"])
        if self.family == "sq_l2":
            # conjugate is <center, y> + |y|^2 / (2 lam)
            return (x - step * p["center"]) / (1.0 + step / p["lam"])
        if self.family == "affine":
            # conjugate is the indicator of {c}
            return np.broadcast_to(p["c"], x.shape).astype(np.float64).copy()
        raise ConfigurationError(
            f"family {self.family!r} has no closed-form conjugate rule"
        )

    @property
    def strongly_convex(self):
        return self.family == "sq_l2"

    def to_config(self):
        p = self.params

        def _num(v):
            a = np.asarray(v)
            return float(a) if a.ndim == 0 else a.tolist()

        out = {"family": self.family}
        out.update({k: _num(v) for k, v in p.items()})
        return out

    def __repr__(self):
        items = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"ProxFunction({self.family}{', ' + items if items else ''})"


# ---------------------------------------------------------------------------
# blockwise maximally monotone operators
# ---------------------------------------------------------------------------


class _Rule:
    """One block of a blockwise monotone operator."""

    __slots__ = ("kind", "fn", "matrix", "demiregular")

    def __init__(self, kind, fn=None, matrix=None, demiregular=False):
        self.kind = kind
        self.fn = fn
        self.matrix = matrix
        self.demiregular = demiregular


class MonotoneBlock:
    """Maximally monotone operator on a block space, given blockwise by
    resolvent rules.

    Supported block kinds: the zero operator, subdifferentials of catalogue
    functions, subdifferentials of conjugates (for dual blocks), monotone
    linear maps, and raw user rules computing the resolvent in a weighted
    metric directly.
    """

    def __init__(self, rules):
        self.rules = tuple(rules)

    @classmethod
    def zero(cls, nblocks):
        return cls([_Rule("zero") for _ in range(nblocks)])

    @classmethod
    def subdiff(cls, fs):
        return cls([_Rule("subdiff", fn=f, demiregular=f.strongly_convex) for f in fs])

    @classmethod
    def conjugate_subdiff(cls, gs):
        return cls([_Rule("conjugate_subdiff", fn=g) for g in gs])

    @classmethod
    def linear(cls, matrices, demiregular=False):
        rules = []
        for m in matrices:
            m = np.asarray(m, dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigurationError(f"linear block must be square, got {m.shape}")
            rules.append(_Rule("linear", matrix=m, demiregular=demiregular))
        return cls(rules)

    @classmethod
    def mixed(cls, rules):
        return cls(rules)

    @staticmethod
    def rule_zero():
        return _Rule("zero")

    @staticmethod
    def rule_subdiff(f):
        return _Rule("subdiff", fn=f, demiregular=f.strongly_convex)

    @staticmethod
    def rule_conjugate_subdiff(g):
        return _Rule("conjugate_subdiff", fn=g)

    @staticmethod
    def rule_custom(fn):
        """fn(arg_block, metric_entries) must return the resolvent block."""
        return _Rule("custom", fn=fn)

    @property
    def nblocks(self):
        return len(self.rules)

    @property
    def demiregular(self):
        """Metadata only: true when every block is from a strongly monotone family."""
        return all(r.demiregular for r in self.rules)

    def is_zero(self):
        return all(r.kind == "zero" for r in self.rules)

    def resolvent(self, gamma, U, z):
        """J_{gamma U A}(z) for a diagonal preconditioner U."""
        if gamma <= 0:
            raise ConfigurationError(f"resolvent step must be positive, got {gamma}")
        if len(self.rules) != z.nblocks:
            raise DimensionMismatch(
                f"operator has {len(self.rules)} blocks, vector has {z.nblocks}"
            )
        diag = U.diag_blocks()
        out = []
        for rule, u, zb in zip(self.rules, diag, z.blocks):
            step = gamma * u
            if rule.kind == "zero":
                out.append(zb.copy())
            elif rule.kind == "subdiff":
                out.append(rule.fn.prox(zb, step))
            elif rule.kind == "conjugate_subdiff":
                g = rule.fn
                if g.has_conjugate_rule:
                    out.append(g.prox_conj(zb, step))
                else:
                    # generalized Moreau decomposition in the diagonal metric
                    out.append(zb - step * g.prox(zb / step, 1.0 / step))
            elif rule.kind == "linear":
                n = zb.shape[0]
                out.append(np.linalg.solve(np.eye(n) + step[:, None] * rule.matrix, zb))
            elif rule.kind == "custom":
                out.append(np.asarray(rule.fn(zb, step), dtype=np.float64).reshape(-1))
            else:
                raise AssertionError(rule.kind)
        return BlockVector._wrap(out)


def resolvent(A, gamma, U, z):
    """Resolvent of A in the metric scaled by gamma and the preconditioner U."""
    return A.resolvent(gamma, U, z)


def prox_weighted(f, metric, x):
    """Prox of a separable catalogue function in a diagonal metric.

    Solves argmin_y f(y) + 0.5 ||x - y||^2_metric blockwise; the effective
    per-coordinate step is the inverse diagonal entry.
    """
    out = []
    for w, b in zip(metric.diag_blocks(), x.blocks):
        out.append(f.prox(b, 1.0 / w))
    return BlockVector._wrap(out)


def prox_conjugate(g, metric, x):
    """prox of g* in the metric induced by the INVERSE of `metric`.

    Uses the closed-form conjugate rule when the family has one, otherwise the
    generalized Moreau decomposition
        prox_{g*}^{W^{-1}}(x) = x - W prox_g^W(W^{-1} x).
    """
    out = []
    for w, b in zip(metric.diag_blocks(), x.blocks):
        if g.has_conjugate_rule:
            out.append(g.prox_conj(b, w))
        else:
            out.append(b - w * g.prox(b / w, 1.0 / w))
    return BlockVector._wrap(out)


def moreau_check(f, x):
    """Residual of prox_f(x) + prox_{f*}(x) - x at unit step (flat array input)."""
    if not f.has_conjugate_rule:
        raise ConfigurationError(f"family {f.family!r} has no conjugate rule to check")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    r = f.prox(x, 1.0) + f.prox_conj(x, 1.0) - x
    return float(np.linalg.norm(r))


# ---------------------------------------------------------------------------
# cocoercive single-valued maps
# ---------------------------------------------------------------------------


class CocoerciveMap:
    """Single-valued monotone map with an audited cocoercivity constant.

    The constant `beta` certifies
        <x - y, Bx - By>  >=  beta * <Bx - By, M (Bx - By)>
    with respect to the metric operator M attached at construction. Computed
    constants are deflated by `BETA_DEFLATION` before being advertised, so the
    inequality holds strictly in floating point; the undeflated value is kept
    as `beta_exact`.
    """

    def __init__(self, kind, dims, apply_fn, beta, beta_exact=None, metric=None,
                 components=None, extremal=None, demiregular=False):
        self.kind = kind
        self.dims = tuple(int(d) for d in dims)
        self._apply = apply_fn
        self.beta = float(beta)
        self.beta_exact = float(beta_exact) if beta_exact is not None else float(beta)
        self.metric = metric
        self.components = components  # (count, batch_fn) for finite sums
        self.extremal = extremal      # BlockVector probe direction, if known
        self.demiregular = demiregular

    def apply(self, x):
        if x.dims != self.dims:
            raise DimensionMismatch(f"map dims {self.dims}, vector dims {x.dims}")
        return self._apply(x)

    @property
    def is_finite_sum(self):
        return self.components is not None

    # --- constructors ---------------------------------------------------
    @classmethod
    def zero_map(cls, dims):
        return cls("zero", dims, lambda x: BlockVector.zeros(dims), beta=float("inf"),
                   beta_exact=float("inf"))

    @classmethod
    def scaled_identity(cls, dims, mu, metric=None):
        """x -> mu * x; exact constant 1/(mu * ||metric||), tight, so no deflation."""
        mu = float(mu)
        if mu <= 0:
            raise ConfigurationError(f"scale must be positive, got {mu}")
        if metric is None:
            metric = Preconditioner.identity(dims)
        top = 1.0
        extremal = None
        if sum(dims):
            diag = metric.diag_blocks()
            flat = np.concatenate(diag)
            top = float(flat.max())
            probe = np.zeros(flat.size)
            probe[int(flat.argmax())] = 1.0  # the constant is tight here
            extremal = BlockVector.from_flat(probe, dims)
        beta = 1.0 / (mu * top)
        return cls("scaled_identity", dims, lambda x: mu * x, beta=beta,
                   beta_exact=beta, metric=metric, extremal=extremal,
                   demiregular=True)

    @classmethod
    def least_squares_gradient(cls, a, b, metric=None, deflate=True):
        """Gradient of 0.5 ||A x - b||^2 on a single block.

        beta = 1 / ||sqrt(M) A^T A sqrt(M)|| with respect to the metric M,
        estimated by power iteration.
        """
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if a.ndim != 2 or a.shape[0] != b.shape[0]:
            raise ConfigurationError(
                f"data shapes incompatible: A {a.shape}, b {b.shape}"
            )
        dims = (a.shape[1],)
        if metric is None:
            metric = Preconditioner.identity(dims)
        op = BlockLinearOperator.from_matrix(a)
        ident = Preconditioner.identity((a.shape[0],))
        nrm = estimate_weighted_norm(op, metric, ident, tol=1e-14, max_iter=200000)
        if nrm == 0.0:
            beta_exact = float("inf")
        else:
            beta_exact = 1.0 / nrm**2
        beta = beta_exact / BETA_DEFLATION if (deflate and np.isfinite(beta_exact)) else beta_exact

        def apply_fn(x):
            g = a.T @ (a @ x.blocks[0] - b)
            return BlockVector._wrap([g])

        nrows = a.shape[0]

        def batch_fn(idx, x):
            rows = a[idx]
            g = (nrows / len(idx)) * (rows.T @ (rows @ x.blocks[0] - b[idx]))
            return BlockVector._wrap([g])

        # dominant right singular direction of A sqrt(M): deterministic probe
        gram = a.T @ a
        w = metric.diag_blocks()[0]
        sym = np.sqrt(w)[:, None] * gram * np.sqrt(w)[None, :]
        vals, vecs = np.linalg.eigh(sym)
        extremal = BlockVector._wrap([np.sqrt(w) * vecs[:, -1]])
        return cls("lstsq", dims, apply_fn, beta=beta, beta_exact=beta_exact,
                   metric=metric, components=(nrows, batch_fn), extremal=extremal)

    @classmethod
    def linear(cls, q, offset=None, dims=None, metric=None, deflate=True):
        """x -> Q x + offset on the flat concatenation, Q symmetric PSD."""
        q = np.asarray(q, dtype=np.float64)
        n = q.shape[0]
        if q.shape != (n, n):
            raise ConfigurationError(f"quadratic matrix must be square, got {q.shape}")
        if not np.allclose(q, q.T, atol=1e-10):
            raise ConfigurationError("quadratic matrix must be symmetric")
        if dims is None:
            dims = (n,)
        if sum(dims) != n:
            raise DimensionMismatch(f"dims {dims} do not sum to {n}")
        if offset is None:
            offset = np.zeros(n)
        offset = np.asarray(offset, dtype=np.float64).reshape(-1)
        if metric is None:
            metric = Preconditioner.identity(dims)
        extremal = None
        lam_max = 0.0
        if n:
            w = np.concatenate(metric.diag_blocks())
            sym = np.sqrt(w)[:, None] * q * np.sqrt(w)[None, :]
            vals, vecs = np.linalg.eigh(sym)
            lam_max = float(vals[-1])
            extremal = BlockVector.from_flat(np.sqrt(w) * vecs[:, -1], dims)
        if lam_max < -1e-10:
            raise ConfigurationError("quadratic matrix must be positive semidefinite")
        beta_exact = float("inf") if lam_max <= 0 else 1.0 / lam_max
        beta = beta_exact / BETA_DEFLATION if (deflate and np.isfinite(beta_exact)) else beta_exact

        def apply_fn(x):
            return BlockVector.from_flat(q @ x.concatenated() + offset, dims)
        return cls("linear", dims, apply_fn, beta=beta, beta_exact=beta_exact,
                   metric=metric, extremal=extremal)

    @classmethod
    def from_callable(cls, dims, fn, beta, metric=None, extremal=None,
                      demiregular=False):
        """Wrap a user map with a caller-certified constant."""
        return cls("callable", dims, fn, beta=beta, metric=metric,
                   extremal=extremal, demiregular=demiregular)

    @classmethod
    def paired(cls, first, second, beta, metric=None):
        """Blockwise pairing acting as (first, second) on a stacked vector."""
        dims = first.dims + second.dims
        n1 = len(first.dims)

        def apply_fn(x):
            a, b = block_split(x, n1)
            return block_concat(first.apply(a), second.apply(b))

        return cls("paired", dims, apply_fn, beta=beta, metric=metric)


def _metric_apply(metric, v):
    if metric is None:
        return v
    if isinstance(metric, Preconditioner):
        return metric.apply(v)
    return metric(v)


@dataclass
class CocoercivityReport:
    min_slack: float
    passed: bool
    trials: int
    beta: float


def check_cocoercivity(b_map, metric=None, trials=100, seed=0, beta=None):
    """Audit the cocoercivity inequality on seeded random pairs.

    Evaluates <x - y, Bx - By> - beta <Bx - By, M (Bx - By)> on `trials`
    random pairs plus, when the map exposes one, a deterministic probe along
    its estimated extremal direction (random pairs alone cannot reliably
    refute a slightly inflated constant in more than one dimension). Passes
    iff the minimum slack is >= -1e-10.
    """
    if trials < 1:
        raise ConfigurationError(f"need at least one trial, got {trials}")
    if beta is None:
        beta = b_map.beta
    if metric is None:
        metric = b_map.metric
    rng = np.random.default_rng(seed)
    dims = b_map.dims

    def slack(x, y):
        dx = x - y
        db = b_map.apply(x) - b_map.apply(y)
        rhs = db.dot(_metric_apply(metric, db))
        lhs = dx.dot(db)
        if rhs == 0.0:
            return lhs
        return lhs - beta * rhs

    worst = float("inf")
    for _ in range(trials):
        x = BlockVector._wrap([rng.standard_normal(d) for d in dims])
        y = BlockVector._wrap([rng.standard_normal(d) for d in dims])
        worst = min(worst, slack(x, y))
    if b_map.extremal is not None:
        x = BlockVector._wrap([rng.standard_normal(d) for d in dims])
        worst = min(worst, slack(x + b_map.extremal, x))
    return CocoercivityReport(min_slack=worst, passed=worst >= -1e-10,
                              trials=trials, beta=beta)


# ---------------------------------------------------------------------------
# graph distances, for optimality-system residuals
# ---------------------------------------------------------------------------

_ACTIVE_TOL = 1e-9


def subdiff_distance(f, x, u):
    """Distance of u from the subdifferential of the catalogue function f at x.

    Infeasible x (outside the domain) contributes its constraint violation.
    Returns None for families without a checkable rule.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    p = f.params
    if f.family == "zero":
        return float(np.linalg.norm(u))
    if f.family == "l1":
        lam = p["lam"]
        on = np.abs(x) > _ACTIVE_TOL
        d = np.where(on, np.abs(u - lam * np.sign(x)), np.maximum(np.abs(u) - lam, 0.0))
        return float(np.linalg.norm(d))
    if f.family == "sq_l2":
        return float(np.linalg.norm(u - p["lam"] * (x - p["center"])))
    if f.family == "affine":
        return float(np.linalg.norm(u - np.broadcast_to(p["c"], u.shape)))
    if f.family == "box":
        lo = np.broadcast_to(p["lo"], x.shape)
        hi = np.broadcast_to(p["hi"], x.shape)
        viol = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
        at_lo = np.abs(x - lo) <= _ACTIVE_TOL
        at_hi = np.abs(x - hi) <= _ACTIVE_TOL
        d = np.abs(u)
        d = np.where(at_lo & ~at_hi, np.maximum(u, 0.0), d)
        d = np.where(at_hi & ~at_lo, np.maximum(-u, 0.0), d)
        d = np.where(at_lo & at_hi, 0.0, d)  # degenerate single-point interval
        return float(np.linalg.norm(d) + np.linalg.norm(viol))
    if f.family == "linf_ball":
        r = p["radius"]
        viol = np.maximum(np.abs(x) - r, 0.0)
        at_hi = np.abs(x - r) <= _ACTIVE_TOL
        at_lo = np.abs(x + r) <= _ACTIVE_TOL
        d = np.abs(u)
        d = np.where(at_hi, np.maximum(-u, 0.0), d)
        d = np.where(at_lo, np.maximum(u, 0.0), d)
        return float(np.linalg.norm(d) + np.linalg.norm(viol))
    return None


def conjugate_subdiff_distance(g, v, u):
    """Distance of u from the subdifferential of g* at v, for catalogue g."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    p = g.params
    if g.family == "l1":
        box = ProxFunction.box(-p["lam"], p["lam"])
        return subdiff_distance(box, v, u)
    if g.family == "linf_ball":
        return subdiff_distance(ProxFunction.l1(p["radius"]), v, u)
    if g.family == "sq_l2":
        # grad g*(v) = v / lam + center
        return float(np.linalg.norm(u - (v / p["lam"] + np.broadcast_to(p["center"], v.shape))))
    if g.family == "zero":
        # g* is the indicator of {0}: v must vanish, any u is then admissible
        return float(np.linalg.norm(v))
    if g.family == "affine":
        return float(np.linalg.norm(v - np.broadcast_to(p["c"], v.shape)))
    return None
