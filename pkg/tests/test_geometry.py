import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipstokes.experiments.manufactured import fd_gradient
from slipstokes.geometry import (
    BoundaryGraph,
    ChartError,
    CornerDomain,
    GraphDomain,
    SlipTraceError,
    TiltedHalfPlane,
    corrector,
    cube_mean,
    flatten,
    h_matrices,
    half_cube_mean,
    normal_tangent,
    pullback_velocity,
    reflect_tensor,
    reflect_tensor_cells,
    reflect_velocity,
    transformed_sym_gradient,
    unflatten,
)

FLAT = GraphDomain(BoundaryGraph.flat())
PARABOLA = GraphDomain(BoundaryGraph.polynomial([0.5]))
CUBIC = GraphDomain(BoundaryGraph.polynomial([0.0, 1.0]))


def _half_cube_points(rng, n, R=1.0):
    return np.stack([rng.uniform(-R / 2, R / 2, n), rng.uniform(0, R / 2, n)], -1)


def stream_velocity(h_dh):
    """u = (-1, -h') from the stream function x2 - h(x1): slip on the graph."""

    def u(y):
        y = np.asarray(y, float)
        return np.stack([-np.ones(y.shape[:-1]), -h_dh(y[..., 0])], -1)

    return u


def test_flatten_identity_on_flat_chart():
    x = _half_cube_points(np.random.default_rng(0), 50)
    assert np.array_equal(flatten(FLAT, x), x)


def test_flatten_parabola_value():
    assert flatten(PARABOLA, [0.2, 0.1]) == pytest.approx([0.2, 0.12], abs=1e-15)


def test_flatten_round_trip_and_rejection():
    x = _half_cube_points(np.random.default_rng(1), 1000)
    back = unflatten(CUBIC, flatten(CUBIC, x))
    assert np.max(np.abs(back - x)) <= 1e-14
    with pytest.raises(ChartError):
        flatten(CUBIC, [0.9, 0.1])
    with pytest.raises(ChartError):
        unflatten(PARABOLA, [0.1, -0.5])


def test_chart_is_area_preserving():
    # det of grad T by central differences of the chart itself
    x = _half_cube_points(np.random.default_rng(2), 200) * 0.9 + np.array([0, 0.02])
    J = fd_gradient(lambda p: flatten(CUBIC, np.clip(p, [-0.5, 0], [0.5, 0.5])), x, step=1e-6)
    assert np.max(np.abs(np.linalg.det(J) - 1)) <= 1e-8


def test_h_matrices():
    H, Hi, Hg = h_matrices(FLAT, [0.1, 0.2], g=[3.0, 1.0])
    assert np.array_equal(H, np.eye(2)) and np.array_equal(Hi, np.eye(2)) and not Hg.any()
    dom = GraphDomain(BoundaryGraph.polynomial([0.5], R=2.0))
    H, Hi, Hg = h_matrices(dom, [1.0, 0.3], g=[2.0, 5.0])
    assert np.array_equal(H, [[1, 0], [-1, 1]])
    assert np.array_equal(Hi, [[1, 0], [1, 1]])
    # h'' = 1 so only entry (2, 1) carries g1
    assert np.array_equal(Hg, [[0, 0], [2.0, 0]])


@given(st.floats(-0.5, 0.5), st.floats(-3, 3), st.floats(-3, 3))
def test_h_inverse_exact(x1, c2, c3):
    dom = GraphDomain(BoundaryGraph.polynomial([c2, c3]))
    H, Hi, _ = h_matrices(dom, [x1, 0.1])
    assert np.array_equal(H @ Hi, np.eye(2))


def test_normal_tangent_cases():
    nu, tau = normal_tangent(FLAT, 0.3)
    assert np.array_equal(nu, [0, -1]) and np.array_equal(tau, [1, 0])
    dom = GraphDomain(BoundaryGraph.polynomial([0.5], R=2.0))
    nu, _ = normal_tangent(dom, 1.0)
    assert nu == pytest.approx(np.array([1, -1]) / math.sqrt(2), abs=1e-15)


def test_normal_tangent_orthonormal():
    x1 = np.random.default_rng(3).uniform(-0.5, 0.5, 500)
    dom = GraphDomain(BoundaryGraph.polynomial([3.0, -4.0, 2.0]))
    nu, tau = normal_tangent(dom, x1)
    assert np.allclose(np.linalg.norm(nu, axis=-1), 1, atol=1e-15)
    assert np.allclose(np.linalg.norm(tau, axis=-1), 1, atol=1e-15)
    assert np.max(np.abs(np.sum(nu * tau, -1))) <= 1e-15
    # tangent follows the curve direction (1, h')
    assert np.allclose(tau[:, 1] / tau[:, 0], dom.graph.dh(x1), atol=1e-13)


def test_pullback_flat_subtracts_mean():
    u = lambda y: np.stack([np.sin(3 * y[..., 1]) + y[..., 0], -y[..., 1]], -1)  # noqa: E731
    ub = pullback_velocity(FLAT, u)
    # mean of u1 over the half cube: analytic value (1 - cos 1.5) / (3 * 0.5)
    assert ub.mean_u1 == pytest.approx((1 - math.cos(1.5)) / 1.5, abs=1e-12)
    x = _half_cube_points(np.random.default_rng(4), 40)
    assert np.allclose(ub(x), u(x) - [ub.mean_u1, 0], atol=1e-15)


def test_pullback_parabola_divergence_and_trace():
    u = lambda y: np.stack([-y[..., 0], y[..., 1]], -1)  # noqa: E731
    grad = lambda y: np.broadcast_to(np.diag([-1.0, 1.0]), y.shape[:-1] + (2, 2))  # noqa: E731
    ub = pullback_velocity(PARABOLA, u, grad_u=grad)
    x = _half_cube_points(np.random.default_rng(5), 300) * [0.9, 0.9] + [0, 0.02]
    G = fd_gradient(ub, x, step=1e-4)
    assert np.max(np.abs(G[..., 0, 0] + G[..., 1, 1])) <= 1e-9
    assert np.allclose(ub.gradient(x), G, atol=1e-7)
    # symmetric transformed gradient reproduces D u = diag(-1, 1)
    D = transformed_sym_gradient(PARABOLA, ub.gradient(x), ub(x), x)
    assert np.max(np.abs(D - np.diag([-1.0, 1.0]))) <= 1e-12


def test_pullback_slip_trace_and_corrector_cancel():
    u = stream_velocity(CUBIC.graph.dh)
    ub = pullback_velocity(CUBIC, u, half_side=0.25)
    x1 = np.linspace(-0.25, 0.25, 11)
    bottom = np.stack([x1, np.zeros_like(x1)], -1)
    # normal n = (0, -1) of the flat chart
    assert np.allclose(-ub(bottom)[:, 1], -CUBIC.graph.dh(x1) * ub.mean_u1, atol=1e-14)
    g, _ = corrector(CUBIC, ub.mean_u1, bottom)
    assert np.max(np.abs(ub(bottom)[:, 1] - g[:, 1])) <= 1e-14


def test_pullback_rejects_divergent_field():
    with pytest.raises(ValueError):
        pullback_velocity(PARABOLA, lambda y: np.stack([y[..., 0], y[..., 1]], -1))


def test_transformed_sym_gradient_trivial_cases():
    x = _half_cube_points(np.random.default_rng(6), 20)
    G = np.random.default_rng(7).normal(size=(20, 2, 2))
    D = transformed_sym_gradient(FLAT, G, np.ones((20, 2)), x)
    assert np.allclose(D, 0.5 * (G + np.swapaxes(G, -1, -2)), atol=0)
    assert not transformed_sym_gradient(CUBIC, np.zeros((20, 2, 2)), np.zeros((20, 2)), x).any()


def test_transformed_gradient_round_trip_random_field():
    # divergence-free u from a stream function vanishing on the graph
    h, dh, ddh = CUBIC.graph.h, CUBIC.graph.dh, CUBIC.graph.ddh

    def u(y):
        a, b = y[..., 0], y[..., 1]
        s = b - h(a)
        return np.stack([-(1 + 2 * s * np.cos(a)), -dh(a) * (1 + 2 * s * np.cos(a)) - s * s * np.sin(a)], -1)

    ub = pullback_velocity(CUBIC, u)
    x = _half_cube_points(np.random.default_rng(8), 200) * 0.9 + [0, 0.02]
    Gbar = fd_gradient(ub, x, step=1e-5)
    D = transformed_sym_gradient(CUBIC, Gbar, ub(x), x)
    Gy = fd_gradient(u, flatten(CUBIC, x), step=1e-5)
    assert np.max(np.abs(D - 0.5 * (Gy + np.swapaxes(Gy, -1, -2)))) <= 1e-8
    del ddh


def test_corrector_properties():
    x = _half_cube_points(np.random.default_rng(9), 100)
    g, G = corrector(FLAT, 2.0, x)
    assert not g.any() and not G.any()
    _, G = corrector(PARABOLA, 1.7, x)
    # h'' constant: the symmetric gradient vanishes
    assert np.max(np.abs(G + np.swapaxes(G, -1, -2))) <= 1e-15
    pt = np.array([[0.5 * 0.99, 0.2]])
    g, G = corrector(CUBIC, 1.0, pt)
    assert G[0, 0, 0] + G[0, 1, 1] == 0.0
    Gfd = fd_gradient(lambda p: corrector(CUBIC, 1.0, p)[0], pt, step=1e-5)
    D = 0.5 * (Gfd + np.swapaxes(Gfd, -1, -2))
    # |Dg| = sqrt(2) * |h''(x1) - h''(0)| / 2 * m with h'' = 6 x1
    assert np.linalg.norm(D) == pytest.approx(math.sqrt(2) * 3 * pt[0, 0], rel=1e-8)


def test_reflect_velocity_examples():
    u = lambda x: np.stack([-x[..., 0], x[..., 1]], -1)  # noqa: E731
    ut = reflect_velocity(u)
    x = np.random.default_rng(10).uniform(-0.5, 0.5, (100, 2))
    assert np.array_equal(ut(x), u(x))
    v = reflect_velocity(lambda x: np.stack([x[..., 1] ** 2, 0 * x[..., 0]], -1))
    assert np.allclose(v(x)[:, 0], x[:, 1] ** 2, atol=0)
    with pytest.raises(SlipTraceError):
        reflect_velocity(lambda x: np.stack([x[..., 0], 1 + x[..., 1]], -1))


def test_reflect_velocity_random_slip_field_divergence_free():
    c = np.random.default_rng(11).normal(size=(3, 3))

    def u(x):
        # stream function x2 * q(x1, x2) with q a random polynomial
        a, b = x[..., 0], x[..., 1]
        q = sum(c[i, j] * a**i * b**j for i in range(3) for j in range(3))
        qa = sum(i * c[i, j] * a ** max(i - 1, 0) * b**j for i in range(1, 3) for j in range(3))
        qb = sum(j * c[i, j] * a**i * b ** max(j - 1, 0) for i in range(3) for j in range(1, 3))
        return np.stack([-(q + b * qb), b * qa], -1)

    ut = reflect_velocity(u)
    x = np.stack([np.random.default_rng(12).uniform(-0.4, 0.4, 500), np.random.default_rng(13).uniform(-0.4, -0.01, 500)], -1)
    G = fd_gradient(ut, x, step=1e-4)
    # central-difference truncation on a cubic field is ~1e-8
    assert np.max(np.abs(G[..., 0, 0] + G[..., 1, 1])) <= 1e-7
    mirror = x * [1, -1]
    Gm = fd_gradient(ut, mirror, step=1e-4)
    D, Dm = (0.5 * (A + np.swapaxes(A, -1, -2)) for A in (G, Gm))
    assert np.allclose(np.linalg.norm(D, axis=(-2, -1)), np.linalg.norm(Dm, axis=(-2, -1)), atol=1e-8)


def test_reflect_tensor_examples():
    x = np.random.default_rng(14).uniform(-0.5, 0.5, (50, 2))
    cI = lambda x: np.broadcast_to(2.5 * np.eye(2), x.shape[:-1] + (2, 2))  # noqa: E731
    assert np.array_equal(reflect_tensor(cI)(x), cI(x))
    F = np.zeros((8, 4, 2, 2))
    F[..., 0, 1] = F[..., 1, 0] = 1.0
    Ft = reflect_tensor_cells(F)
    for lam in (1.0, 0.5, 0.25):
        assert np.array_equal(cube_mean(Ft, lam), np.zeros((2, 2)))


def test_reflect_tensor_callable_matches_cells():
    rng = np.random.default_rng(15)
    A = rng.normal(size=(3, 2, 2))

    def F(x):
        a, b = x[..., 0], x[..., 1]
        M = A[0] + A[1] * a[..., None, None] + A[2] * (b**2)[..., None, None]
        return 0.5 * (M + np.swapaxes(M, -1, -2))

    n = 8
    xs = -0.5 + (np.arange(n) + 0.5) / n
    ys = -0.5 + (np.arange(n) + 0.5) / n
    X = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1)
    upper = X[:, n // 2 :]
    assert np.allclose(reflect_tensor(F)(X), reflect_tensor_cells(F(upper)), atol=1e-15)


def test_diag_mean_identity_random_cells():
    rng = np.random.default_rng(16)
    F = rng.normal(size=(16, 8, 2, 2))
    F = 0.5 * (F + np.swapaxes(F, -1, -2))
    Ft = reflect_tensor_cells(F)
    for lam in (1.0, 0.5, 0.25):
        m = half_cube_mean(F, lam)
        # direct sum over both halves as the oracle
        k = int(16 * lam)
        i0 = (16 - k) // 2
        lower = F[i0 : i0 + k, : k // 2].copy()
        lower[..., 0, 1] *= -1
        lower[..., 1, 0] *= -1
        oracle = (F[i0 : i0 + k, : k // 2].sum((0, 1)) + lower.sum((0, 1))) / (k * k)
        assert np.max(np.abs(cube_mean(Ft, lam) - np.diag(np.diag(m)))) <= 1e-12
        assert np.max(np.abs(cube_mean(Ft, lam) - oracle)) <= 1e-12


def test_corner_membership():
    c = CornerDomain(math.pi / 2)
    assert c.contains([1.0, 1.0]) and not c.contains([1.0, -1.0])
    b = 3 * math.pi / 4
    cd = CornerDomain(b)
    x = np.random.default_rng(17).uniform(-1, 1, (10_000, 2))
    # cross-product oracle: left of the first ray and right of the second
    e2 = np.array([math.cos(b), math.sin(b)])
    oracle = (x[:, 1] > 0) & (x[:, 0] * e2[1] - x[:, 1] * e2[0] > 0)
    assert np.array_equal(cd.contains(x), oracle)
    r, th = cd.to_polar(x)
    assert np.allclose(cd.from_polar(r, th), x, atol=1e-15)


def test_corner_lipschitz_vanishes_near_pi():
    vals = [CornerDomain(math.pi - d).lipschitz for d in (0.5, 0.1, 0.01, 1e-4)]
    assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] < 2e-4
    with pytest.raises(ValueError):
        CornerDomain(math.pi)


def test_tilted_membership():
    t = TiltedHalfPlane(0.5, order=2)
    assert t.h(0.1) == pytest.approx(-(0.1**2.5), rel=1e-15)
    assert t.contains([0.1, -(0.1**2.5)], tol=1e-15) and not t.contains([0.1, -(0.1**2.5) - 1e-6])
    x = np.random.default_rng(18).uniform(-1, 1, (10_000, 2))
    for order, alpha in ((1, 0.3), (2, 0.5)):
        dom = TiltedHalfPlane(alpha, order)
        oracle = x[:, 1] + np.power(np.abs(x[:, 0]), order + alpha) > 0
        assert np.array_equal(dom.contains(x), oracle)


def test_tilted_curve_exponent_fit():
    # the curve's order-th derivative is Hoelder with exponent alpha exactly
    t = TiltedHalfPlane(0.3, order=2)
    x = np.logspace(-6, -1, 30)
    slope = np.polyfit(np.log(x), np.log(np.abs(t.ddh(x))), 1)[0]
    assert slope == pytest.approx(0.3, abs=1e-10)


def test_graph_normalization_from_samples():
    x = np.linspace(-0.6, 0.6, 241)
    h = 0.05 + 0.3 * x + 0.4 * x**2
    dh = 0.3 + 0.8 * x
    g = BoundaryGraph.from_samples(x, h, dh, np.full_like(x, 0.8), R=0.8)
    assert abs(float(g.h(0.0))) <= 1e-12 and abs(float(g.dh(0.0))) <= 1e-12
    kappa = 0.8 / (1 + 0.09) ** 1.5
    assert float(g.ddh(0.0)) == pytest.approx(kappa, rel=1e-3)
    with pytest.raises(ValueError):
        BoundaryGraph(lambda s: s, lambda s: 1 + 0 * s, lambda s: 0 * s)


def test_graph_load_table(tmp_path):
    x = np.linspace(-0.5, 0.5, 101)
    p = tmp_path / "g.txt"
    np.savetxt(p, np.stack([x, x**2, 2 * x], 1))
    g = BoundaryGraph.load(p)
    assert g.R == pytest.approx(1.0)
    assert float(g.h(0.3)) == pytest.approx(0.09, abs=1e-12)
    assert float(g.ddh(0.2)) == pytest.approx(2.0, rel=1e-6)


def test_sandwich_contains_unit_ratio():
    lam, Lam = GraphDomain(BoundaryGraph.polynomial([0.5])).sandwich()
    assert 0 < lam <= 1 <= Lam
    assert GraphDomain(BoundaryGraph.flat()).sandwich() == pytest.approx((1.0, 1.0))
