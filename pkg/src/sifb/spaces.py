"""Block product-space vectors and the diagonal linear-algebra substrate.

Everything at this layer is an immutable value: vectors own read-only numpy
arrays, operators own read-only matrices, and every operation returns a fresh
object. That makes all of it safe to share across concurrent replica runs.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NormEstimationError

# Fixed seed for the power-iteration start vector, so norm estimates are
# reproducible run to run.
_POWER_SEED = 20240517


def _freeze(a):
    a.flags.writeable = False
    return a


class BlockVector:
    """Element of a product of Euclidean spaces, one dense 1-D array per block."""

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        self.blocks = tuple(
            _freeze(np.asarray(b, dtype=np.float64).reshape(-1).copy()) for b in blocks
        )

    @classmethod
    def _wrap(cls, arrays):
        # Internal fast path: takes ownership of freshly computed (or already
        # immutable) float64 arrays without copying.
        v = object.__new__(cls)
        v.blocks = tuple(_freeze(a) for a in arrays)
        return v

    @classmethod
    def zeros(cls, dims):
        return cls._wrap([np.zeros(int(d)) for d in dims])

    @property
    def dims(self):
        return tuple(b.shape[0] for b in self.blocks)

    @property
    def nblocks(self):
        return len(self.blocks)

    def _check_same(self, other):
        if len(self.blocks) != len(other.blocks):
            raise DimensionMismatch(
                f"block count mismatch: {len(self.blocks)} vs {len(other.blocks)}"
            )
        for i, (a, b) in enumerate(zip(self.blocks, other.blocks)):
            if a.shape[0] != b.shape[0]:
                raise DimensionMismatch(
                    f"block {i}: length {a.shape[0]} vs {b.shape[0]}"
                )

    def __add__(self, other):
        self._check_same(other)
        return BlockVector._wrap([a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check_same(other)
        return BlockVector._wrap([a - b for a, b in zip(self.blocks, other.blocks)])

    def __rmul__(self, c):
        c = float(c)
        return BlockVector._wrap([c * a for a in self.blocks])

    def __neg__(self):
        return BlockVector._wrap([-a for a in self.blocks])

    def axpy(self, c, other):
        """self + c * other, in one pass."""
        self._check_same(other)
        c = float(c)
        return BlockVector._wrap(
            [a + c * b for a, b in zip(self.blocks, other.blocks)]
        )

    def dot(self, other):
        self._check_same(other)
        return float(
            sum(np.dot(a, b) for a, b in zip(self.blocks, other.blocks))
        )

    def norm(self):
        return float(np.sqrt(sum(np.dot(a, a) for a in self.blocks)))

    def concatenated(self):
        """All blocks stacked into one flat array (a copy)."""
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate(self.blocks)

    @classmethod
    def from_flat(cls, flat, dims):
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != sum(dims):
            raise DimensionMismatch(
                f"flat length {flat.shape[0]} != sum of dims {sum(dims)}"
            )
        out, pos = [], 0
        for d in dims:
            out.append(flat[pos : pos + d].copy())
            pos += d
        return cls._wrap(out)

    def all_finite(self):
        return all(np.isfinite(b).all() for b in self.blocks)

    def __repr__(self):
        return f"BlockVector(dims={self.dims})"


def block_concat(primal, dual):
    """Stack two block vectors; `block_split` is its exact inverse."""
    return BlockVector._wrap(list(primal.blocks) + list(dual.blocks))


def block_split(x, n_first):
    """Split a stacked vector back into its first `n_first` blocks and the rest."""
    if not 0 <= n_first <= x.nblocks:
        raise DimensionMismatch(
            f"cannot split {x.nblocks} blocks at position {n_first}"
        )
    return (
        BlockVector._wrap(list(x.blocks[:n_first])),
        BlockVector._wrap(list(x.blocks[n_first:])),
    )


class Preconditioner:
    """Self-adjoint strongly positive operator on a block space.

    Restricted to scalar-per-block and diagonal forms, which keep apply,
    apply_inverse and apply_sqrt exact and O(n). `lower_bound` is the
    strong-positivity constant (the smallest diagonal entry).
    """

    __slots__ = ("kind", "dims", "_diag", "lower_bound")

    def __init__(self, kind, dims, diag_blocks):
        self.kind = kind
        self.dims = tuple(int(d) for d in dims)
        diag = []
        for d, w in zip(self.dims, diag_blocks):
            a = np.asarray(w, dtype=np.float64).reshape(-1)
            if a.shape[0] != d:
                raise DimensionMismatch(
                    f"diagonal block length {a.shape[0]} != dim {d}"
                )
            diag.append(_freeze(a.copy()))
        self._diag = tuple(diag)
        entries = np.concatenate(self._diag) if self.dims and sum(self.dims) else np.zeros(0)
        if entries.size and entries.min() <= 0:
            raise ValueError(
                f"preconditioner entries must be positive; min = {entries.min()}"
            )
        self.lower_bound = float(entries.min()) if entries.size else 1.0

    @classmethod
    def identity(cls, dims):
        return cls("identity", dims, [np.ones(int(d)) for d in dims])

    @classmethod
    def scalar(cls, factors, dims):
        """One positive factor per block."""
        factors = [float(c) for c in factors]
        if len(factors) != len(dims):
            raise DimensionMismatch(
                f"{len(factors)} scalar factors for {len(dims)} blocks"
            )
        return cls("scalar", dims, [c * np.ones(int(d)) for c, d in zip(factors, dims)])

    @classmethod
    def diagonal(cls, weights):
        weights = [np.asarray(w, dtype=np.float64).reshape(-1) for w in weights]
        return cls("diagonal", [w.shape[0] for w in weights], weights)

    def diag_blocks(self):
        return self._diag

    def _check(self, x):
        if x.dims != self.dims:
            raise DimensionMismatch(
                f"vector dims {x.dims} incompatible with preconditioner dims {self.dims}"
            )

    def apply(self, x):
        self._check(x)
        if self.kind == "identity":
            return x
        return BlockVector._wrap([w * b for w, b in zip(self._diag, x.blocks)])

    def apply_inverse(self, x):
        self._check(x)
        if self.kind == "identity":
            return x
        return BlockVector._wrap([b / w for w, b in zip(self._diag, x.blocks)])

    def apply_sqrt(self, x):
        self._check(x)
        if self.kind == "identity":
            return x
        return BlockVector._wrap(
            [np.sqrt(w) * b for w, b in zip(self._diag, x.blocks)]
        )

    def inverse(self):
        return Preconditioner(self.kind, self.dims, [1.0 / w for w in self._diag])

    def scaled(self, c):
        """The operator c * self, for c > 0."""
        c = float(c)
        if c <= 0:
            raise ValueError(f"scale must be positive, got {c}")
        if self.kind == "identity" and c == 1.0:
            return self
        kind = "scalar" if self.kind == "identity" else self.kind
        return Preconditioner(kind, self.dims, [c * w for w in self._diag])

    def __repr__(self):
        return f"Preconditioner(kind={self.kind!r}, dims={self.dims}, chi={self.lower_bound:g})"


class WeightedMetric:
    """The inner product (x, y) -> <x, W y> induced by a preconditioner W."""

    __slots__ = ("weight",)

    def __init__(self, weight):
        self.weight = weight

    def inner(self, x, y):
        return x.dot(self.weight.apply(y))

    def norm_sq(self, x):
        return x.dot(self.weight.apply(x))

    def norm(self, x):
        return float(np.sqrt(max(self.norm_sq(x), 0.0)))


def inner(x, y, metric=None):
    """Sum of per-block inner products, optionally in a weighted metric."""
    if metric is None:
        return x.dot(y)
    if isinstance(metric, Preconditioner):
        metric = WeightedMetric(metric)
    return metric.inner(x, y)


class BlockLinearOperator:
    """Dense block matrix L mapping a primal block space into a dual one.

    entries[k][i] maps primal block i into dual block k; None entries are
    structural zeros and are skipped.
    """

    __slots__ = ("entries", "dims_in", "dims_out")

    def __init__(self, entries, dims_in, dims_out):
        self.dims_in = tuple(int(d) for d in dims_in)
        self.dims_out = tuple(int(d) for d in dims_out)
        if len(entries) != len(self.dims_out):
            raise DimensionMismatch(
                f"{len(entries)} block rows for {len(self.dims_out)} dual blocks"
            )
        rows = []
        for k, row in enumerate(entries):
            if len(row) != len(self.dims_in):
                raise DimensionMismatch(
                    f"row {k}: {len(row)} block columns for {len(self.dims_in)} primal blocks"
                )
            cells = []
            for i, cell in enumerate(row):
                if cell is None:
                    cells.append(None)
                    continue
                m = np.asarray(cell, dtype=np.float64)
                if m.ndim != 2 or m.shape != (self.dims_out[k], self.dims_in[i]):
                    raise DimensionMismatch(
                        f"entry ({k},{i}): shape {m.shape}, expected "
                        f"({self.dims_out[k]}, {self.dims_in[i]})"
                    )
                cells.append(_freeze(m.copy()))
            rows.append(tuple(cells))
        self.entries = tuple(rows)

    @classmethod
    def zero(cls, dims_in, dims_out):
        return cls([[None] * len(dims_in) for _ in dims_out], dims_in, dims_out)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        return cls([[m]], [m.shape[1]], [m.shape[0]])

    def apply(self, x):
        if x.dims != self.dims_in:
            raise DimensionMismatch(
                f"vector dims {x.dims} incompatible with operator input dims {self.dims_in}"
            )
        out = []
        for k, row in enumerate(self.entries):
            acc = np.zeros(self.dims_out[k])
            for i, cell in enumerate(row):
                if cell is not None:
                    acc += cell @ x.blocks[i]
            out.append(acc)
        return BlockVector._wrap(out)

    def adjoint_apply(self, v):
        if v.dims != self.dims_out:
            raise DimensionMismatch(
                f"vector dims {v.dims} incompatible with operator output dims {self.dims_out}"
            )
        out = [np.zeros(d) for d in self.dims_in]
        for k, row in enumerate(self.entries):
            for i, cell in enumerate(row):
                if cell is not None:
                    out[i] += cell.T @ v.blocks[k]
        return BlockVector._wrap(out)

    def is_zero(self):
        return all(cell is None for row in self.entries for cell in row)

    def __repr__(self):
        return f"BlockLinearOperator({self.dims_in} -> {self.dims_out})"


def estimate_weighted_norm(L, V, W, tol=1e-10, max_iter=10000):
    """Operator norm of sqrt(W) L sqrt(V), by power iteration.

    Runs on the symmetric positive semidefinite composition
    sqrt(V) L* W L sqrt(V) and returns the square root of its dominant
    Rayleigh quotient. Deterministic: the start vector comes from a fixed
    internal seed.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    if L.dims_in != V.dims:
        raise DimensionMismatch(f"V dims {V.dims} != operator input dims {L.dims_in}")
    if L.dims_out != W.dims:
        raise DimensionMismatch(f"W dims {W.dims} != operator output dims {L.dims_out}")
    n_in = sum(L.dims_in)
    if n_in == 0 or sum(L.dims_out) == 0 or L.is_zero():
        return 0.0

    def gram(x):
        y = W.apply(L.apply(V.apply_sqrt(x)))
        return V.apply_sqrt(L.adjoint_apply(y))

    rng = np.random.default_rng(_POWER_SEED)
    x = BlockVector._wrap([rng.standard_normal(d) for d in L.dims_in])
    nx = x.norm()
    x = (1.0 / nx) * x
    prev = None
    lam = None
    for _ in range(max_iter):
        y = gram(x)
        lam_new = x.dot(y)
        ny = y.norm()
        if ny <= 1e-300:
            return 0.0
        x = (1.0 / ny) * y
        prev, lam = lam, lam_new
        if prev is not None and abs(lam - prev) <= tol * max(abs(lam), 1e-300):
            return float(np.sqrt(max(lam, 0.0)))
    prev_txt = "none" if prev is None else f"{prev:.17g}"
    raise NormEstimationError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last Rayleigh quotients {prev_txt}, {lam:.17g})",
        last=lam,
        prev=prev,
    )
