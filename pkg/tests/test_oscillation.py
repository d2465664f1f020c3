import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slipstokes.fields import CellGrid
from slipstokes.geometry import BoundaryGraph, GraphDomain, reflect_tensor_cells
from slipstokes.oscillation import (
    CubeFamily,
    Weight,
    bmo_seminorm,
    boundary_term,
    cube_oscillations,
    diag_sharp,
    dini_psi,
    dyadic_family,
    flat_bottom_samples,
    graph_bottom_samples,
    holder_via_campanato,
    local_star_seminorm,
    overlapping_family,
    overline_bmo,
    telescope_check,
)


def _brute_dyadic_bmo(f):
    """Loop over every dyadic square of an n x n scalar field."""
    n = f.shape[0]
    best = 0.0
    k = n
    while k >= 1:
        for i in range(0, n, k):
            for j in range(0, n, k):
                b = f[i : i + k, j : j + k]
                best = max(best, float(np.mean(np.abs(b - b.mean()))))
        k //= 2
    return best


def _const_tensor(shape, M):
    return np.broadcast_to(np.asarray(M, float), shape + (2, 2)).copy()


def test_constant_field_gives_zero():
    g = CellGrid.unit_square(16)
    for fam in (dyadic_family(g), overlapping_family(g)):
        assert bmo_seminorm(np.full((16, 16), 3.7), fam).value <= 1e-15
        assert bmo_seminorm(_const_tensor((16, 16), [[1, 2], [2, -1]]), fam).value <= 1e-14


def test_x1_on_unit_square_is_quarter():
    g = CellGrid.unit_square(32)
    f = g.centers()[..., 0]
    rep = bmo_seminorm(f, dyadic_family(g))
    assert rep.value == pytest.approx(0.25, abs=1e-15)
    assert rep.argmax["side"] == 1.0
    assert rep.value == pytest.approx(_brute_dyadic_bmo(f), abs=1e-15)
    assert rep.value == np.max(rep.table[:, 6])


def test_sign_field_has_unit_oscillation():
    g = CellGrid.unit_square(16)
    f = np.sign(g.centers()[..., 0] - 0.5)
    assert bmo_seminorm(f, dyadic_family(g)).value == pytest.approx(1.0, abs=1e-15)
    assert _brute_dyadic_bmo(f) == pytest.approx(1.0, abs=1e-15)


def test_empty_family_rejected():
    g = CellGrid.unit_square(4)
    with pytest.raises(ValueError):
        bmo_seminorm(np.zeros((4, 4)), CubeFamily(g, np.zeros((0, 4), int), np.zeros(0)))


def test_nonconstant_field_is_detected():
    g = CellGrid.unit_square(8)
    f = np.zeros((8, 8))
    f[3, 5] = 1e-6
    assert bmo_seminorm(f, dyadic_family(g)).value > 0


def test_family_monotonicity():
    g = CellGrid.unit_square(16)
    f = np.random.default_rng(0).normal(size=(16, 16))
    a, b = dyadic_family(g, min_cells=4), overlapping_family(g)
    u = a.union(b)
    assert bmo_seminorm(f, u).value >= max(bmo_seminorm(f, a).value, bmo_seminorm(f, b).value)


@settings(max_examples=40)
@given(arrays(float, (8, 8), elements=st.floats(-10, 10)), st.floats(-20, 20))
def test_best_constant_property(f, c):
    g = CellGrid.unit_square(8)
    fam = dyadic_family(g)
    osc = cube_oscillations(f, fam)
    for (i0, j0, kx, ky), o in zip(fam.blocks, osc):
        assert o <= 2 * np.mean(np.abs(f[i0 : i0 + kx, j0 : j0 + ky] - c)) + 1e-12


def test_boundary_term_flat_cases():
    g = CellGrid.half_cube(16)
    s = flat_bottom_samples(g)
    val, _ = boundary_term(_const_tensor((16, 8), 2.0 * np.eye(2)), g, Weight(), s)
    assert val == 0.0
    val, _ = boundary_term(_const_tensor((16, 8), [[0, 1], [1, 0]]), g, Weight(), s)
    assert val == pytest.approx(1.0, abs=1e-15)


def test_boundary_term_linear_shear_closed_form():
    g = CellGrid.half_cube(32)
    F = np.zeros((32, 16, 2, 2))
    F[..., 0, 1] = F[..., 1, 0] = g.centers()[..., 1]
    s = flat_bottom_samples(g)
    for r in (0.125, 0.25, 0.5):
        # avg of x2 over (0, r/2): r/4, exact for the midpoint rule
        val, _ = boundary_term(F, g, Weight(), s, radii=[r])
        assert val == pytest.approx(r / 4, abs=1e-15)
    assert boundary_term(F, g, Weight(), s)[0] == pytest.approx(0.25, abs=1e-15)


def test_overline_bmo_diagonal_cases():
    g = CellGrid.half_cube(16)
    fam = overlapping_family(g)
    s = flat_bottom_samples(g)
    assert overline_bmo(_const_tensor((16, 8), np.eye(2) * 4), fam, Weight(), s).value == 0.0
    assert overline_bmo(_const_tensor((16, 8), np.diag([3.0, -1.0])), fam, Weight(), s).value <= 1e-15


def test_overline_bmo_tilted_tangent_oracle():
    dom = GraphDomain(BoundaryGraph.polynomial([0.5]))
    g = CellGrid.half_cube(16)
    a, b = 3.0, -1.0
    F = _const_tensor((16, 8), np.diag([a, b]))
    samples = graph_bottom_samples(dom, np.array([0.5, -0.25, 0.1]))
    rep = overline_bmo(F, overlapping_family(g), Weight(), samples)
    x1 = np.array([0.5, -0.25, 0.1])
    # [F nu] . tau = h' (F11 - F22) / (1 + h'^2) with h' = x1
    oracle = np.max(np.abs(x1 * (a - b) / (1 + x1**2)))
    assert rep.parts["bmo"] <= 1e-15
    assert rep.boundary_value == pytest.approx(oracle, rel=1e-14)
    assert rep.boundary_argmax[0] == 0.5


def test_local_star_cases():
    g = CellGrid.half_cube(16)
    assert local_star_seminorm(_const_tensor((16, 8), np.diag([2.0, 2.0])), g).value == 0.0
    rep = local_star_seminorm(_const_tensor((16, 8), [[0, 1], [1, 0]]), g)
    assert rep.parts["star"] == pytest.approx(1.0, abs=1e-15)
    assert rep.parts["bmo"] <= 1e-15


def test_local_star_and_reflected_bmo_comparable():
    # random fields: the two quantities bound each other within a few units
    rng = np.random.default_rng(3)
    g = CellGrid.half_cube(16)
    full = CellGrid(16, 16, 1 / 16, 1 / 16, -0.5, -0.5)
    fam = overlapping_family(full)
    for _ in range(20):
        F = rng.normal(size=(16, 8, 2, 2)) * rng.uniform(0.1, 3) + rng.normal(size=(2, 2))
        F = 0.5 * (F + np.swapaxes(F, -1, -2))
        a = local_star_seminorm(F, g).value
        b = bmo_seminorm(reflect_tensor_cells(F), fam).value
        assert 0.25 < a / b < 4


def test_diag_sharp_examples():
    g = CellGrid.half_cube(16)
    assert diag_sharp(_const_tensor((16, 8), np.diag([1.0, -3.0])), g) == pytest.approx(0.0, abs=1e-15)
    c = -0.7
    G = _const_tensor((16, 8), [[0, c], [c, 0]])
    # Frobenius norm counts both off-diagonal entries
    assert diag_sharp(G, g) == pytest.approx(math.sqrt(2) * abs(c), rel=1e-14)
    w = Weight.power(0.5)
    val = diag_sharp(G, g, w, block=(4, 8))
    assert val == pytest.approx(math.sqrt(2) * abs(c) / (0.5 * math.sqrt(2)) ** 0.5, rel=1e-14)


def test_diag_sharp_matches_plain_oscillation_for_diag_x1():
    g = CellGrid.half_cube(16)
    G = np.zeros((16, 8, 2, 2))
    G[..., 0, 0] = g.centers()[..., 0]
    fam = CubeFamily(g, np.array([[4, 0, 8, 4]]), np.array([0.5]))
    assert diag_sharp(G, g, block=(4, 8)) == pytest.approx(cube_oscillations(G, fam)[0], abs=1e-15)


def test_telescope_constant_and_x1():
    g = CellGrid.unit_square(16)
    assert telescope_check(np.full((16, 16), 2.0), g, (0, 0, 16), 3) == (0.0, 0.0)
    lhs, rhs = telescope_check(g.centers()[..., 0], g, (0, 0, 16), 3)
    # concentric means of |x1| stay 1/2; oscillations are side/4
    assert lhs == pytest.approx(0.0, abs=1e-15)
    assert rhs == pytest.approx(8 * (1 + 0.5 + 0.25) / 4, abs=1e-14)
    assert lhs < rhs
    with pytest.raises(ValueError):
        telescope_check(np.zeros((16, 16)), g, (0, 0, 16), 4)


def test_telescope_random_piecewise_constant():
    rng = np.random.default_rng(4)
    g = CellGrid.unit_square(32)
    for _ in range(300):
        blocks = rng.normal(size=(8, 8)) * rng.uniform(0.1, 5)
        f = np.kron(blocks, np.ones((4, 4)))
        k = int(rng.choice([8, 16, 32]))
        m = int(rng.integers(1, int(math.log2(k))))
        i0, j0 = (int(rng.integers(0, 33 - k)) for _ in range(2))
        lhs, rhs = telescope_check(f, g, (i0, j0, k), m)
        assert lhs <= rhs * (1 + 1e-12)


def test_holder_campanato_refinement():
    vals_ok, vals_bad = [], []
    ns = (16, 32, 64, 128)
    for n in ns:
        g = CellGrid.unit_square(n)
        r = np.linalg.norm(g.centers(), axis=-1)
        fam = dyadic_family(g)
        vals_ok.append(holder_via_campanato(r**0.5, 0.5, fam))
        vals_bad.append(holder_via_campanato(r**0.25, 0.5, fam))
    assert holder_via_campanato(np.ones((16, 16)), 0.5, dyadic_family(CellGrid.unit_square(16))) == 0.0
    assert 0.5 <= vals_ok[-1] / vals_ok[-2] <= 2
    slope = np.polyfit(np.log(ns), np.log(vals_bad), 1)[0]
    assert slope == pytest.approx(0.25, abs=0.05)


def test_dini_psi_closed_forms():
    assert dini_psi(Weight.constant(), 0.3) == pytest.approx(math.log(1 / 0.3), rel=1e-15)
    assert dini_psi(Weight.power(0.5), 0.25) == pytest.approx(1.0, rel=1e-15)
    w = Weight.log_dini(2.0)
    assert float(w.psi(0.1)) == pytest.approx(w.psi_quadrature(0.1), abs=1e-8)
    for wt in (Weight.power(0.3), Weight.constant()):
        assert float(wt.psi(0.05)) == pytest.approx(wt.psi_quadrature(0.05), abs=1e-10)
    with pytest.raises(ValueError):
        dini_psi(Weight.power(0.5), 0.0)


def test_weight_properties():
    r = np.logspace(-6, 0, 200)
    for w in (Weight.constant(), Weight.power(0.4), Weight.log_dini(2.0)):
        assert np.all(np.diff(w(r)) >= 0)
    assert Weight.power(0.4).is_dini and Weight.log_dini(1.5).is_dini
    assert not Weight.constant().is_dini and not Weight.log_dini(0.5).is_dini
    # r^alpha * r^-beta is decreasing for beta >= alpha: constant 1
    assert Weight.power(0.4).almost_decrease_constant(0.5) == 1.0
    with pytest.raises(ValueError):
        Weight.power(1.5)


def test_report_json_round_trip():
    import json

    g = CellGrid.unit_square(8)
    rep = bmo_seminorm(g.centers()[..., 0], dyadic_family(g))
    d = json.loads(rep.to_json())
    assert d["value"] == rep.value and d["cubes"] == len(rep.table)
