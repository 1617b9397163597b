import numpy as np
import pytest

from sifb import (
    BlockVector,
    CocoerciveMap,
    ConfigurationError,
    MonotoneBlock,
    Preconditioner,
    ProxFunction,
    WeightedMetric,
    check_cocoercivity,
    moreau_check,
    prox_conjugate,
    prox_weighted,
    resolvent,
)
from sifb.operators import conjugate_subdiff_distance, subdiff_distance

CATALOGUE = [
    ProxFunction.zero(),
    ProxFunction.l1(0.7),
    ProxFunction.squared_l2(1.3, center=0.4),
    ProxFunction.box(-1.0, 1.0),
    ProxFunction.linf_ball(0.9),
    ProxFunction.affine(np.array([0.3])),
]


def scalar_value(f, p):
    """Vectorized restatement of the catalogue definitions, for the oracle."""
    q = f.params
    if f.family == "zero":
        return np.zeros_like(p)
    if f.family == "l1":
        return q["lam"] * np.abs(p)
    if f.family == "sq_l2":
        return 0.5 * q["lam"] * (p - float(q["center"])) ** 2
    if f.family == "box":
        return np.where((p >= float(q["lo"])) & (p <= float(q["hi"])), 0.0, np.inf)
    if f.family == "linf_ball":
        return np.where(np.abs(p) <= q["radius"], 0.0, np.inf)
    if f.family == "affine":
        return float(q["c"]) * p
    raise AssertionError(f.family)


def grid_prox_1d(f, z, step, lo=-8.0, hi=8.0):
    """Independent 1-D oracle: two-stage grid search for
    argmin f(p) + (1/(2*step)) (z - p)^2."""

    def obj(p):
        return scalar_value(f, p) + (z - p) ** 2 / (2.0 * step)

    coarse = np.linspace(lo, hi, 160001)  # 1e-4 resolution
    center = coarse[int(np.argmin(obj(coarse)))]
    fine = np.linspace(center - 2e-4, center + 2e-4, 40001)  # 1e-8 resolution
    return float(fine[np.argmin(obj(fine))])


# --- prox catalogue -----------------------------------------------------------


def test_soft_threshold_values():
    f = ProxFunction.l1(1.0)
    assert f.prox(np.array([3.0]), 1.0)[0] == pytest.approx(2.0)
    assert f.prox(np.array([0.5]), 1.0)[0] == 0.0
    assert f.prox(np.array([-3.0]), 2.0)[0] == pytest.approx(-1.0)


def test_box_projection_values():
    f = ProxFunction.box(-1.0, 1.0)
    got = f.prox(np.array([2.0, -0.5]))
    assert got.tolist() == [1.0, -0.5]


def test_sq_l2_prox_is_scaled_shrinkage():
    f = ProxFunction.squared_l2(1.0, 0.0)
    assert f.prox(np.array([4.0]), 1.0)[0] == pytest.approx(2.0)


def test_prox_weighted_identity_for_zero():
    x = BlockVector([[1.0, -2.0], [0.5]])
    got = prox_weighted(ProxFunction.zero(), Preconditioner.identity(x.dims), x)
    assert (got - x).norm() == 0.0


def test_prox_weighted_box_projection():
    x = BlockVector([[2.0, -0.5]])
    got = prox_weighted(ProxFunction.box(-1.0, 1.0), Preconditioner.identity((2,)), x)
    assert got.blocks[0].tolist() == [1.0, -0.5]


def test_prox_weighted_l1_effective_threshold():
    # metric weight 2 means threshold lam / w = 0.5
    x = BlockVector([[3.0]])
    metric = Preconditioner.diagonal([[2.0]])
    got = prox_weighted(ProxFunction.l1(1.0), metric, x)
    assert got.blocks[0][0] == pytest.approx(2.5, abs=1e-12)
    want = grid_prox_1d(ProxFunction.l1(1.0), 3.0, step=0.5)
    assert got.blocks[0][0] == pytest.approx(want, abs=1e-6)


@pytest.mark.parametrize("f", [f for f in CATALOGUE if f.family != "affine"])
def test_prox_weighted_matches_grid_oracle(f):
    rng = np.random.default_rng(5)
    for _ in range(3):
        z = float(rng.uniform(-3, 3))
        w = float(rng.uniform(0.4, 2.5))
        got = prox_weighted(f, Preconditioner.diagonal([[w]]), BlockVector([[z]]))
        want = grid_prox_1d(f, z, step=1.0 / w)
        assert got.blocks[0][0] == pytest.approx(want, abs=1e-6)


# --- Moreau identities ----------------------------------------------------------


def test_moreau_l1_hand_cases():
    f = ProxFunction.l1(1.0)
    assert moreau_check(f, np.array([0.3])) == pytest.approx(0.0, abs=1e-15)
    assert moreau_check(f, np.array([3.0])) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("f", [f for f in CATALOGUE if f.has_conjugate_rule])
def test_moreau_identity_random(f):
    rng = np.random.default_rng(6)
    for _ in range(25):
        x = rng.uniform(-4, 4, size=1)
        assert moreau_check(f, x) <= 1e-12


def test_moreau_rejects_family_without_rule():
    with pytest.raises(ConfigurationError):
        moreau_check(ProxFunction.box(-1, 1), np.array([0.0]))


# --- conjugate proxes -------------------------------------------------------------


def test_prox_conjugate_l1_inside_ball():
    got = prox_conjugate(ProxFunction.l1(1.0), Preconditioner.identity((1,)),
                         BlockVector([[0.3]]))
    assert got.blocks[0][0] == pytest.approx(0.3)


def test_prox_conjugate_l1_clamps():
    got = prox_conjugate(ProxFunction.l1(1.0), Preconditioner.identity((1,)),
                         BlockVector([[5.0]]))
    assert got.blocks[0][0] == pytest.approx(1.0)


@pytest.mark.parametrize("g", [ProxFunction.squared_l2(1.0, 0.0),
                               ProxFunction.squared_l2(2.3, 0.7),
                               ProxFunction.l1(0.8)])
def test_prox_conjugate_two_paths_agree(g):
    # closed-form conjugate rule vs generalized Moreau decomposition
    rng = np.random.default_rng(7)
    dims = (6,)
    for _ in range(10):
        sigma = float(rng.uniform(0.3, 3.0))
        metric = Preconditioner.scalar([sigma], dims)
        x = BlockVector([rng.uniform(-4, 4, 6)])
        closed = prox_conjugate(g, metric, x)
        w = metric.diag_blocks()[0]
        decomp = BlockVector([x.blocks[0] - w * g.prox(x.blocks[0] / w, 1.0 / w)])
        assert (closed - decomp).norm() <= 1e-10


def test_prox_conjugate_decomposition_fallback_for_box():
    # the box indicator has no closed conjugate rule; its conjugate is the
    # support function, whose prox in the inverse metric is a soft threshold
    g = ProxFunction.box(-1.0, 1.0)
    rng = np.random.default_rng(71)
    for _ in range(10):
        w = float(rng.uniform(0.3, 3.0))
        x = rng.uniform(-4, 4, 5)
        got = prox_conjugate(g, Preconditioner.scalar([w], (5,)),
                             BlockVector([x]))
        want = np.sign(x) * np.maximum(np.abs(x) - w, 0.0)
        assert np.max(np.abs(got.blocks[0] - want)) <= 1e-12
    # same fallback drives the resolvent of the conjugate subdifferential
    a = MonotoneBlock.conjugate_subdiff([g])
    z = BlockVector([np.array([2.5, -0.2])])
    p = resolvent(a, 1.0, Preconditioner.scalar([0.5], (2,)), z)
    assert np.allclose(p.blocks[0], [2.0, 0.0], atol=1e-12)


# --- resolvents ---------------------------------------------------------------------


def test_resolvent_zero_operator_is_identity():
    z = BlockVector([[3.0, -1.0]])
    got = resolvent(MonotoneBlock.zero(1), 1.7,
                    Preconditioner.diagonal([[0.5, 2.0]]), z)
    assert (got - z).norm() == 0.0


def test_resolvent_quadratic_subdiff():
    a = MonotoneBlock.subdiff([ProxFunction.squared_l2(1.0, 0.0)])
    got = resolvent(a, 1.0, Preconditioner.identity((1,)), BlockVector([[4.0]]))
    assert got.blocks[0][0] == pytest.approx(2.0)


def test_resolvent_l1_soft_threshold():
    a = MonotoneBlock.subdiff([ProxFunction.l1(1.0)])
    got = resolvent(a, 1.0, Preconditioner.identity((1,)), BlockVector([[3.0]]))
    assert got.blocks[0][0] == pytest.approx(2.0)


def test_resolvent_weighted_l1_vs_grid_oracle():
    # J_{gamma U A} solves min |p| + (1/(2 gamma)) ||z - p||^2 in the
    # inverse-U metric; 1-D grid search is the oracle
    f = ProxFunction.l1(1.0)
    a = MonotoneBlock.subdiff([f])
    gamma, u, z = 2.0, 0.5, 3.0
    got = resolvent(a, gamma, Preconditioner.diagonal([[u]]), BlockVector([[z]]))

    def obj(p):
        return np.abs(p) + (1.0 / u) * (z - p) ** 2 / (2.0 * gamma)

    coarse = np.linspace(-8, 8, 160001)
    c = coarse[np.argmin(obj(coarse))]
    fine = np.linspace(c - 2e-4, c + 2e-4, 40001)
    want = float(fine[np.argmin(obj(fine))])
    assert got.blocks[0][0] == pytest.approx(want, abs=1e-6)
    # optimality condition U^{-1}(z - p)/gamma in subdiff(|.|) at p
    p = got.blocks[0][0]
    residual = (z - p) / (u * gamma)
    assert subdiff_distance(f, np.array([p]), np.array([residual])) <= 1e-12


def test_resolvent_linear_block():
    m = np.array([[2.0]])
    a = MonotoneBlock.linear([m])
    got = resolvent(a, 1.0, Preconditioner.identity((1,)), BlockVector([[3.0]]))
    assert got.blocks[0][0] == pytest.approx(1.0)  # (I + M)^{-1} z


def test_resolvent_characterization_subdiff_families():
    rng = np.random.default_rng(8)
    for f in [ProxFunction.l1(0.6), ProxFunction.squared_l2(2.0, 0.1),
              ProxFunction.box(-0.5, 1.5)]:
        a = MonotoneBlock.subdiff([f])
        for _ in range(20):
            gamma = float(rng.uniform(0.2, 3.0))
            u = rng.uniform(0.3, 2.0, 4)
            z = rng.uniform(-4, 4, 4)
            p = resolvent(a, gamma, Preconditioner.diagonal([u]),
                          BlockVector([z])).blocks[0]
            residual = (z - p) / (gamma * u)
            assert subdiff_distance(f, p, residual) <= 1e-10


def test_resolvent_firm_nonexpansiveness_in_inverse_metric():
    # slack quantified over 100 random pairs per catalogue family
    rng = np.random.default_rng(9)
    dims = (5,)
    for f in CATALOGUE:
        a = MonotoneBlock.subdiff([f])
        u = Preconditioner.diagonal([rng.uniform(0.4, 2.2, 5)])
        metric = WeightedMetric(u.inverse())
        gamma = float(rng.uniform(0.3, 2.0))
        for _ in range(100):
            x = BlockVector([rng.uniform(-3, 3, 5)])
            y = BlockVector([rng.uniform(-3, 3, 5)])
            jx = resolvent(a, gamma, u, x)
            jy = resolvent(a, gamma, u, y)
            d = jx - jy
            slack = metric.inner(x - y, d) - metric.norm_sq(d)
            assert slack >= -1e-10


def test_resolvent_rejects_nonpositive_step():
    a = MonotoneBlock.zero(1)
    with pytest.raises(ConfigurationError):
        resolvent(a, 0.0, Preconditioner.identity((1,)), BlockVector([[1.0]]))


# --- cocoercive maps -----------------------------------------------------------------


def test_identity_map_equality_case():
    ident = CocoerciveMap.scaled_identity((2,), 1.0)
    rep = check_cocoercivity(ident, trials=50, seed=0)
    assert rep.passed
    assert rep.min_slack == pytest.approx(0.0, abs=1e-10)


def test_least_squares_beta_pass_and_fail_1d():
    # gradient of 0.5 (2x - b)^2: curvature 4, so 0.25 passes and 0.26 fails
    b_map = CocoerciveMap.least_squares_gradient(np.array([[2.0]]), np.array([0.0]),
                                                 deflate=False)
    assert b_map.beta == pytest.approx(0.25, rel=1e-10)
    assert check_cocoercivity(b_map, trials=20, seed=1, beta=0.25).passed
    assert not check_cocoercivity(b_map, trials=20, seed=1, beta=0.26).passed


def test_zero_map_any_beta_passes():
    z = CocoerciveMap.zero_map((3,))
    assert check_cocoercivity(z, trials=10, seed=2, beta=1e9).passed


def test_least_squares_beta_both_directions_multidim():
    rng = np.random.default_rng(10)
    a = rng.standard_normal((12, 8))
    b_map = CocoerciveMap.least_squares_gradient(a, rng.standard_normal(12))
    assert check_cocoercivity(b_map, trials=100, seed=3).passed
    inflated = 1.05 * b_map.beta
    assert not check_cocoercivity(b_map, trials=100, seed=3, beta=inflated).passed


def test_cocoercive_implies_lipschitz_bound():
    # ||Bx - By|| <= (beta chi)^{-1} ||x - y|| with chi the metric lower bound
    rng = np.random.default_rng(11)
    a = rng.standard_normal((6, 4))
    metric = Preconditioner.diagonal([rng.uniform(0.5, 2.0, 4)])
    b_map = CocoerciveMap.least_squares_gradient(a, rng.standard_normal(6),
                                                 metric=metric, deflate=False)
    bound = 1.0 / (b_map.beta * metric.lower_bound)
    for _ in range(50):
        x = BlockVector([rng.standard_normal(4)])
        y = BlockVector([rng.standard_normal(4)])
        lhs = (b_map.apply(x) - b_map.apply(y)).norm()
        assert lhs <= bound * (x - y).norm() * (1 + 1e-9)


def test_linear_map_against_quadratic():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    b_map = CocoerciveMap.linear(q, deflate=False)
    lam_max = np.linalg.eigvalsh(q)[-1]
    assert b_map.beta == pytest.approx(1.0 / lam_max, rel=1e-12)
    assert check_cocoercivity(b_map, trials=50, seed=4).passed


def test_minibatch_requires_finite_sum():
    from sifb import StochasticOracle

    z = CocoerciveMap.zero_map((2,))
    with pytest.raises(ConfigurationError):
        StochasticOracle(z, mode="minibatch")


# --- graph distances ------------------------------------------------------------------


def test_subdiff_distance_l1():
    f = ProxFunction.l1(1.0)
    assert subdiff_distance(f, np.array([2.0]), np.array([1.0])) == 0.0
    assert subdiff_distance(f, np.array([0.0]), np.array([0.5])) == 0.0
    assert subdiff_distance(f, np.array([0.0]), np.array([1.5])) == pytest.approx(0.5)
    assert subdiff_distance(f, np.array([-1.0]), np.array([1.0])) == pytest.approx(2.0)


def test_conjugate_subdiff_distance_l1():
    g = ProxFunction.l1(1.0)
    # v strictly inside the ball: only u = 0 admissible
    assert conjugate_subdiff_distance(g, np.array([0.2]), np.array([0.7])) == pytest.approx(0.7)
    # v on the boundary: nonnegative u admissible
    assert conjugate_subdiff_distance(g, np.array([1.0]), np.array([0.7])) == 0.0
    # infeasible v is penalized
    assert conjugate_subdiff_distance(g, np.array([1.5]), np.array([0.0])) >= 0.5


def test_conjugate_subdiff_distance_quadratic():
    g = ProxFunction.squared_l2(2.0, 0.0)
    v = np.array([1.0])
    assert conjugate_subdiff_distance(g, v, v / 2.0) == pytest.approx(0.0, abs=1e-15)
