import numpy as np
import pytest

from hsgfd.quadrature import (
    BoundaryComponent,
    BoxDomain,
    Quadrature,
    boundary_quadrature,
    box_quadrature,
    generalized_golden_ratio,
    integrate,
    roberts_sequence,
)


def test_golden_ratio_roots():
    np.testing.assert_allclose(generalized_golden_ratio(1), (1 + np.sqrt(5)) / 2, rtol=1e-12)
    # plastic number: real root of x^3 = x + 1
    roots = np.roots([1, 0, -1, -1])
    plastic = roots[np.abs(roots.imag) < 1e-12].real.max()
    np.testing.assert_allclose(generalized_golden_ratio(2), plastic, rtol=1e-12)
    np.testing.assert_allclose(generalized_golden_ratio(2), 1.3247179572, atol=1e-10)


def test_roberts_first_points():
    np.testing.assert_allclose(roberts_sequence(1, 1)[0, 0], 0.1180339887, atol=1e-10)
    np.testing.assert_allclose(roberts_sequence(2, 1)[0], [0.2549, 0.0699], atol=1e-4)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_roberts_prefix_and_range(d):
    a = roberts_sequence(d, 3)
    b = roberts_sequence(d, 5)
    assert np.array_equal(a, b[:3])
    assert np.all((b >= 0) & (b < 1))


def test_box_rejects_empty_side():
    with pytest.raises(ValueError):
        BoxDomain((0.0, 1.0), (1.0, 1.0))


def test_weights_sum_to_measure():
    dom = BoxDomain((0.0, -3.0), (5.0, 3.0))
    q = box_quadrature(dom, 1000)
    assert abs(q.weights.sum() - 30.0) < 1e-12
    assert np.all((q.nodes >= dom.lower) & (q.nodes <= dom.upper))


def test_integrate_examples():
    q = box_quadrature(BoxDomain((0.0,), (1.0,)), 2**14)
    assert abs(integrate(lambda x: x[:, 0], q) - 0.5) < 1e-3
    q = box_quadrature(BoxDomain((0.0,), (2 * np.pi,)), 2**14)
    assert abs(integrate(lambda x: np.sin(x[:, 0]) ** 2, q) - np.pi) < 1e-2
    assert integrate(lambda x: np.ones(len(x)), q) == pytest.approx(2 * np.pi, abs=1e-12)


def test_integrate_linear():
    q = box_quadrature(BoxDomain((0.0, 0.0), (1.0, 2.0)), 500)
    f = lambda x: np.cos(x[:, 0] * x[:, 1])
    g = lambda x: x[:, 0] ** 3
    lhs = integrate(lambda x: 2.5 * f(x) - 0.7 * g(x), q)
    rhs = 2.5 * integrate(f, q) - 0.7 * integrate(g, q)
    assert abs(lhs - rhs) < 1e-12


def test_heat_boundary_measure():
    dom = BoxDomain((0.0, 0.0), (1.0, 2 * np.pi))
    faces = [
        BoundaryComponent.face(dom, 0, "lower"),
        BoundaryComponent.face(dom, 1, "lower"),
        BoundaryComponent.face(dom, 1, "upper"),
    ]
    q = boundary_quadrature(faces, 64)
    assert q.weights.sum() == pytest.approx(2 * np.pi + 2, abs=1e-12)
    assert np.all(q.nodes[q.labels == 0, 0] == 0.0)
    assert np.all(q.nodes[q.labels == 2, 1] == 2 * np.pi)


def test_hjb_terminal_face():
    dom = BoxDomain((0.0, -3.0), (5.0, 3.0))
    q = boundary_quadrature([BoundaryComponent.face(dom, 0, "upper")], 128)
    assert q.weights.sum() == pytest.approx(6.0, abs=1e-12)
    assert np.all(q.nodes[:, 0] == 5.0)


def test_face_rejects_bad_side():
    dom = BoxDomain((0.0,), (1.0,))
    with pytest.raises(ValueError):
        BoundaryComponent.face(dom, 0, "middle")


def test_quadrature_readonly():
    q = box_quadrature(BoxDomain((0.0,), (1.0,)), 8)
    with pytest.raises(ValueError):
        q.nodes[0, 0] = 1.0


def test_deterministic_nodes():
    dom = BoxDomain((0.0, 0.0), (1.0, 1.0))
    assert np.array_equal(box_quadrature(dom, 100).nodes, box_quadrature(dom, 100).nodes)


def test_roberts_vs_midpoint_recorded():
    # recorded, not asserted: QMC error on prod sin(x_i) against a midpoint grid
    n = 2**12
    dom = BoxDomain((0.0, 0.0), (np.pi, np.pi))
    exact = 4.0
    q = box_quadrature(dom, n)
    err_qmc = abs(integrate(lambda x: np.sin(x[:, 0]) * np.sin(x[:, 1]), q) - exact)
    m = int(np.sqrt(n))
    mid = (np.arange(m) + 0.5) * np.pi / m
    err_mid = abs(np.sum(np.sin(mid)) ** 2 * (np.pi / m) ** 2 - exact)
    print(f"roberts error {err_qmc:.2e}, midpoint error {err_mid:.2e}")
    assert np.isfinite(err_qmc)
