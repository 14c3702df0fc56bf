import numpy as np
import pytest

from geoconn import (
    AdmissibleCurve,
    AnchorBundle,
    CoordDomain,
    FiberPoint,
    GeoconnError,
    LinearConnection,
    VectorField,
    add_difference,
    difference_tensor,
    lift_curve,
    nabla,
    nabla_along_curve,
    nabla_dual,
    nabla_field,
    nabla_point,
    reconstruct_connection,
    scale_section,
    to_field,
    to_vector_field,
)
from geoconn.checks import random_linear_section


@pytest.fixture
def scalar_case():
    dom = CoordDomain.cube(1, -4, 4)
    bundle = AnchorBundle.identity(dom)
    conn = LinearConnection.from_array(bundle, np.array([[[1.0]]]))
    return dom, bundle, conn


class TestNabla:
    def test_constant_section_flat(self):
        dom = CoordDomain.cube(2)
        bundle = AnchorBundle.identity(dom)
        conn = LinearConnection.zero(bundle, 2)
        s = VectorField.constant(dom, [1.0, -1.0])
        psi = VectorField.constant(dom, [2.0, 3.0])
        assert np.allclose(nabla(conn, s, psi, np.array([0.1, 0.2])), 0.0)

    def test_reduces_to_directional_derivative(self):
        dom = CoordDomain.cube(1, -4, 4)
        bundle = AnchorBundle.identity(dom)
        conn = LinearConnection.zero(bundle, 1)
        s = VectorField.constant(dom, [1.0])
        psi = to_vector_field(["x0^2"], dom)
        assert nabla(conn, s, psi, np.array([3.0]))[0] == pytest.approx(6.0)

    def test_worked_cancellation(self, scalar_case):
        dom, _, conn = scalar_case
        s = VectorField.constant(dom, [2.0])
        psi = to_vector_field(["x0"], dom)
        # derivative term 1*1*2 minus coefficient term 1*2*1 cancels
        assert nabla(conn, s, psi, np.array([1.0]))[0] == pytest.approx(0.0)


class TestNablaPoint:
    def test_zero_direction(self, scalar_case):
        dom, _, conn = scalar_case
        psi = to_vector_field(["x0^2 + 1"], dom)
        out = nabla_point(conn, FiberPoint(np.array([0.5]), np.array([0.0])), psi)
        assert np.allclose(out, 0.0)

    def test_matches_section_version(self, heisenberg_lie_case, rng):
        conn = heisenberg_lie_case.connection
        dom = conn.bundle.base
        psi = to_vector_field(["x0*x1", "x2^2 - x0"], dom)
        for _ in range(100):
            x = dom.sample(rng, 1)[0]
            u = rng.uniform(-2, 2, conn.bundle.k)
            via_point = nabla_point(conn, FiberPoint(x, u), psi)
            via_section = nabla(conn, VectorField.constant(dom, u), psi, x)
            assert np.max(np.abs(via_point - via_section)) < 1e-9

    def test_leibniz_spot(self, scalar_case):
        dom, bundle, conn = scalar_case
        psi = to_vector_field(["x0 + 2"], dom)
        f = to_field("x0", dom)
        x = np.array([2.0])
        nvec = FiberPoint(x, np.array([1.5]))
        lhs = nabla_point(conn, nvec, scale_section(f, psi))
        rho_f = (bundle.apply(nvec) @ f.gradient(x))
        rhs = f.value(x) * nabla_point(conn, nvec, psi) + rho_f * psi.value(x)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


class TestNablaAlongCurve:
    def test_lift_is_parallel(self, heisenberg_lie_case):
        conn = heisenberg_lie_case.connection
        curve = AdmissibleCurve.from_exprs(["t", "t^2/2", "t^3/12"], ["1", "t", "0"], (0.0, 1.0))
        res = lift_curve(conn, curve, np.array([1.0, -0.5]), steps=1000)

        def psi_tilde(t):
            idx = int(round((t - curve.t0) / (curve.t1 - curve.t0) * res.step_count))
            return res.fiber_points[idx]

        deriv = nabla_along_curve(conn, curve, psi_tilde, dt=1e-3)
        for t in np.linspace(0.05, 0.95, 7):
            t = round(t * res.step_count) / res.step_count
            assert np.max(np.abs(deriv(t))) < 1e-5

    def test_flat_constant(self):
        dom = CoordDomain.cube(1, -4, 4)
        bundle = AnchorBundle.identity(dom)
        conn = LinearConnection.zero(bundle, 2)
        curve = AdmissibleCurve.from_exprs(["t"], ["1"], (0.0, 1.0))
        deriv = nabla_along_curve(conn, curve, lambda t: np.array([1.0, 2.0]))
        assert np.max(np.abs(deriv(0.5))) < 1e-9

    def test_scalar_worked_value(self, scalar_case):
        _, _, conn = scalar_case
        curve = AdmissibleCurve.from_exprs(["t"], ["1"], (0.0, 1.0))
        deriv = nabla_along_curve(conn, curve, lambda t: np.array([1.0]), psi_tilde_dot=lambda t: np.array([0.0]))
        for t in (0.0, 0.3, 1.0):
            assert deriv(t)[0] == pytest.approx(-1.0)

    def test_agrees_with_point_derivative_on_section_values(self, heisenberg_lie_case):
        # For an injectively immersed base curve carrying section values, the
        # curve derivative equals the pointwise derivative of the section.
        conn = heisenberg_lie_case.connection
        dom = conn.bundle.base
        psi = to_vector_field(["x0*x1 + x2", "x0^2 - x1"], dom)
        curve = AdmissibleCurve.from_exprs(["t", "t^2/2", "t^3/12"], ["1", "t", "0"], (0.0, 1.0))

        def psi_tilde(t):
            return psi.value(curve.x(t))

        deriv = nabla_along_curve(conn, curve, psi_tilde)
        for t in (0.1, 0.4, 0.8):
            x = curve.x(t)
            u = curve.u(t)
            direct = nabla_point(conn, FiberPoint(x, u), psi)
            assert np.max(np.abs(deriv(t) - direct)) < 1e-5


class TestNablaDual:
    def test_flat_constant(self):
        dom = CoordDomain.cube(2)
        bundle = AnchorBundle.identity(dom)
        conn = LinearConnection.zero(bundle, 2)
        s = VectorField.constant(dom, [1.0, 0.0])
        f = VectorField.constant(dom, [3.0, -1.0])
        assert np.allclose(nabla_dual(conn, s, f, np.array([0.2, 0.1])), 0.0)

    def test_pairing_identity(self, heisenberg_lie_case, rng):
        conn = heisenberg_lie_case.connection
        dom = conn.bundle.base
        for _ in range(100):
            x = dom.sample(rng, 1)[0]
            s = random_linear_section(dom, conn.bundle.k, rng)
            psi = random_linear_section(dom, conn.l, rng)
            f = random_linear_section(dom, conn.l, rng)
            pair_deriv = (conn.bundle.anchor_matrix(x) @ s.value(x)) @ (
                psi.jacobian(x).T @ f.value(x) + f.jacobian(x).T @ psi.value(x)
            )
            lhs = psi.value(x) @ nabla_dual(conn, s, f, x)
            rhs = pair_deriv - nabla(conn, s, psi, x) @ f.value(x)
            assert abs(lhs - rhs) < 1e-6

    def test_scalar_opposite_sign(self, scalar_case):
        dom, _, conn = scalar_case
        s = VectorField.constant(dom, [1.0])
        f = VectorField.constant(dom, [1.0])
        assert nabla_dual(conn, s, f, np.array([0.5]))[0] == pytest.approx(1.0)
        psi = VectorField.constant(dom, [1.0])
        assert nabla(conn, s, psi, np.array([0.5]))[0] == pytest.approx(-1.0)


class TestReconstruct:
    def test_zero_rule(self):
        dom = CoordDomain.cube(2)
        bundle = AnchorBundle.identity(dom)
        rebuilt = reconstruct_connection(lambda s, psi, x: np.zeros(2), bundle, 2)
        assert np.max(np.abs(rebuilt.coeff_tensor(np.array([0.3, 0.2])))) == 0.0

    def test_scalar_constant(self, scalar_case):
        dom, bundle, conn = scalar_case

        def oracle(s, psi, x):
            return nabla(conn, s, psi, x)

        rebuilt = reconstruct_connection(oracle, bundle, 1)
        for x0 in (-1.0, 0.0, 2.0):
            assert rebuilt.coeff_tensor(np.array([x0]))[0, 0, 0] == pytest.approx(1.0, abs=1e-8)

    def test_round_trip_on_grid(self, heisenberg_lie_case):
        conn = heisenberg_lie_case.connection
        bundle = heisenberg_lie_case.bundle

        rebuilt = reconstruct_connection(lambda s, psi, x: nabla(conn, s, psi, x), bundle, conn.l)
        for x in bundle.base.grid(5):
            assert np.max(np.abs(rebuilt.coeff_tensor(x) - conn.coeff_tensor(x))) < 1e-6

    def test_nonlinear_rule_rejected(self):
        dom = CoordDomain.cube(2)
        bundle = AnchorBundle.identity(dom)

        def crooked(s, psi, x):
            v = s.value(x)
            return np.array([v @ v, 0.0])  # quadratic in the direction

        with pytest.raises(GeoconnError):
            reconstruct_connection(crooked, bundle, 2)


class TestDifferenceTensor:
    def test_equal_connections_zero(self, heisenberg_lie_case, rng):
        conn = heisenberg_lie_case.connection
        diff = difference_tensor(conn, conn)
        for x in conn.bundle.base.sample(rng, 5):
            assert np.max(np.abs(diff.coeff(x))) == 0.0

    def test_scalar_magnitude(self, scalar_case):
        dom, bundle, _ = scalar_case
        conn3 = LinearConnection.from_array(bundle, np.array([[[3.0]]]))
        conn1 = LinearConnection.from_array(bundle, np.array([[[1.0]]]))
        diff = difference_tensor(conn3, conn1)
        assert abs(diff.coeff(np.array([0.0]))[0, 0, 0]) == pytest.approx(2.0)

    def test_action_is_operator_difference(self, heisenberg_lie_case, rng):
        conn_a = heisenberg_lie_case.connection
        bundle = heisenberg_lie_case.bundle
        conn_b = LinearConnection.from_array(bundle, np.full((3, 2, 2), 0.25))
        diff = difference_tensor(conn_a, conn_b)
        dom = bundle.base
        for _ in range(100):
            x = dom.sample(rng, 1)[0]
            s = random_linear_section(dom, bundle.k, rng)
            psi = random_linear_section(dom, conn_a.l, rng)
            lhs = diff.apply(s, psi, x)
            rhs = nabla(conn_a, s, psi, x) - nabla(conn_b, s, psi, x)
            assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_addition_closure(self, heisenberg_lie_case, rng):
        conn_a = heisenberg_lie_case.connection
        bundle = heisenberg_lie_case.bundle
        conn_b = LinearConnection.from_array(bundle, np.full((3, 2, 2), 0.25))
        diff = difference_tensor(conn_a, conn_b)
        rebuilt = add_difference(conn_b, diff)
        dom = bundle.base
        for x in dom.sample(rng, 5):
            assert np.max(np.abs(rebuilt.coeff_tensor(x) - conn_a.coeff_tensor(x))) < 1e-12
        for _ in range(100):
            x = dom.sample(rng, 1)[0]
            s = random_linear_section(dom, bundle.k, rng)
            psi = random_linear_section(dom, conn_a.l, rng)
            lhs = nabla(rebuilt, s, psi, x)
            rhs = nabla(conn_b, s, psi, x) + diff.apply(s, psi, x)
            assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_nabla_field_matches_pointwise(heisenberg_lie_case, rng):
    conn = heisenberg_lie_case.connection
    dom = conn.bundle.base
    s = random_linear_section(dom, conn.bundle.k, rng)
    psi = random_linear_section(dom, conn.l, rng)
    derived = nabla_field(conn, s, psi)
    for x in dom.sample(rng, 10):
        assert np.max(np.abs(derived.value(x) - nabla(conn, s, psi, x))) < 1e-12


def test_derivative_axioms_batch(heisenberg_lie_case, rng):
    from geoconn.checks import check_derivative_axioms

    record = check_derivative_axioms(heisenberg_lie_case.connection, rng, samples=50)
    assert record["passed"], record
    assert record["residual"] < 1e-6
