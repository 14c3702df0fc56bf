import numpy as np
import pytest

from geoconn import (
    FiberPoint,
    GalleryError,
    annihilator_covector,
    by_name,
    contact_frame_vectors,
    gallery_names,
    make_ehresmann,
    make_nijenhuis,
    make_poisson,
    make_subbundle_injection,
    make_subriemannian_heisenberg,
    partial_connection_test,
    to_matrix_field,
)
from geoconn.fields import CoordDomain


def test_registry_names():
    assert set(gallery_names()) >= {"ehresmann", "subbundle", "poisson", "nijenhuis", "heisenberg-sr", "heisenberg-lie"}
    with pytest.raises(GalleryError):
        by_name("nope")


class TestEhresmann:
    def test_identity_anchor_full_rank(self, ehresmann_case, rng):
        for x in ehresmann_case.bundle.base.sample(rng, 10):
            rank, kernel = ehresmann_case.bundle.rank_kernel_at(x)
            assert rank == ehresmann_case.bundle.n and kernel.shape[1] == 0

    def test_flat_coefficients_have_zero_curvature(self):
        from geoconn import curvature_components

        case = make_ehresmann(coeffs=[[["0", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]])
        comps = curvature_components(case.connection, case.structure, np.array([0.3, -0.3]))
        assert np.max(np.abs(comps)) == 0.0

    def test_flags(self, ehresmann_case):
        assert ehresmann_case.expected_flags == {"partial": True, "anchor_hom": True}


class TestSubbundle:
    def test_frame_rank(self, subbundle_case, rng):
        for x in subbundle_case.bundle.base.sample(rng, 10):
            rank, _ = subbundle_case.bundle.rank_kernel_at(x)
            assert rank == 2

    def test_partial_for_any_coefficients(self, rng):
        case = make_subbundle_injection(coeffs=[[["x0", "1"], ["x1", "x2"]], [["1", "1"], ["1", "1"]]])
        for x in case.bundle.base.sample(rng, 5):
            ok, _ = partial_connection_test(case.connection, x, rng=rng)
            assert ok

    def test_sum_never_fills(self, subbundle_case):
        from geoconn import intersection_sum_dims

        report = intersection_sum_dims(subbundle_case.connection, (np.array([0.1, 0.2, 0.3]), np.array([1.0, 1.0])))
        assert report["dim_intersection"] == 0 and not report["sum_spans"]

    def test_rank_deficient_frame_rejected(self):
        dom = CoordDomain.cube(2)
        frame = to_matrix_field([["x0", "x0"], ["x1", "x1"]], dom)  # dependent columns
        with pytest.raises(GalleryError):
            make_subbundle_injection(n=2, k=2, frame=frame)


class TestPoisson:
    def test_symplectic_sharp_map(self, poisson_case):
        got = poisson_case.bundle.apply(FiberPoint(np.zeros(2), np.array([1.0, 0.0])))
        assert np.allclose(got, [0.0, 1.0])
        got2 = poisson_case.bundle.apply(FiberPoint(np.zeros(2), np.array([0.0, 1.0])))
        assert np.allclose(got2, [-1.0, 0.0])

    def test_zero_bivector_zero_anchor(self):
        case = make_poisson(lam=np.zeros((2, 2)))
        assert np.max(np.abs(case.bundle.anchor_matrix(np.array([0.1, 0.2])))) == 0.0

    def test_constant_bivector_anchor_hom(self, poisson_case, rng):
        from geoconn import anchor_hom_residual

        for x in poisson_case.bundle.base.sample(rng, 10):
            assert anchor_hom_residual(poisson_case.structure, x) == 0.0

    def test_non_skew_rejected(self):
        with pytest.raises(GalleryError):
            make_poisson(lam=np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_nonconstant_bivector_anchor_only(self):
        dom = CoordDomain.cube(2)
        lam = to_matrix_field([["0", "x0"], ["-x0", "0"]], dom)
        case = make_poisson(lam=lam)
        assert case.structure is None
        got = case.bundle.apply(FiberPoint(np.array([0.5, 0.0]), np.array([1.0, 0.0])))
        assert np.allclose(got, [0.0, 0.5])


class TestNijenhuis:
    def test_identity_tensor_matches_ehresmann(self, ehresmann_case, rng):
        case = make_nijenhuis(a_field=np.eye(2))
        for x in case.bundle.base.sample(rng, 100):
            u = rng.uniform(-2, 2, 2)
            a = case.bundle.apply(FiberPoint(x, u))
            b = ehresmann_case.bundle.apply(FiberPoint(x, u))
            assert np.array_equal(a, b)

    def test_constant_tensor_zero_structure(self, nijenhuis_constant_case, rng):
        struct = nijenhuis_constant_case.structure
        for x in struct.bundle.base.sample(rng, 5):
            assert np.max(np.abs(struct.tensor(x))) < 1e-12

    def test_diagonal_tensor_structure_functions(self, nijenhuis_case):
        # Worked expansion on the coordinate frame: the pair entry is (-1, 1).
        struct = nijenhuis_case.structure
        x = np.array([1.0, 2.0])
        tensor = struct.tensor(x)
        assert tensor[0, 0, 1] == pytest.approx(-1.0, abs=1e-9)
        assert tensor[1, 0, 1] == pytest.approx(1.0, abs=1e-9)

    def test_default_tensor_fails_anchor_hom(self, nijenhuis_case):
        from geoconn import anchor_hom_residual

        x = np.array([1.0, 1.5])
        assert anchor_hom_residual(nijenhuis_case.structure, x) > 1e-4


class TestSubriemannianHeisenberg:
    def test_rank_two_everywhere(self, heisenberg_sr_case, rng):
        for x in heisenberg_sr_case.bundle.base.sample(rng, 20):
            rank, kernel = heisenberg_sr_case.bundle.rank_kernel_at(x)
            assert rank == 2 and kernel.shape[1] == 1

    def test_annihilator_in_kernel(self, heisenberg_sr_case, rng):
        for x in heisenberg_sr_case.bundle.base.sample(rng, 20):
            eta = annihilator_covector(x)
            assert np.max(np.abs(heisenberg_sr_case.bundle.anchor_matrix(x) @ eta)) < 1e-12

    def test_kernel_matches_annihilator_direction(self, heisenberg_sr_case):
        x = np.array([0.7, -0.4, 0.2])
        _, kernel = heisenberg_sr_case.bundle.rank_kernel_at(x)
        eta = annihilator_covector(x)
        eta = eta / np.linalg.norm(eta)
        overlap = abs(float(kernel[:, 0] @ eta))
        assert overlap == pytest.approx(1.0, abs=1e-9)

    def test_lowering_then_raising_recovers_frame(self, heisenberg_sr_case):
        # The covector pairing to 1 with the first frame field and to 0 with
        # the second maps back to the first frame field under the anchor.
        for x in [np.array([0.0, 0.0, 0.0]), np.array([0.8, -0.5, 0.3])]:
            frame = contact_frame_vectors(x)
            completion = np.column_stack([frame, [0.0, 0.0, 1.0]])
            dual_rows = np.linalg.inv(completion)
            flat_x1 = dual_rows[0]
            raised = heisenberg_sr_case.bundle.anchor_matrix(x) @ flat_x1
            assert np.max(np.abs(raised - frame[:, 0])) < 1e-12

    def test_zero_connection_is_partial(self, heisenberg_sr_case, rng):
        for x in heisenberg_sr_case.bundle.base.sample(rng, 5):
            ok, report = partial_connection_test(heisenberg_sr_case.connection, x, rng=rng)
            assert ok
            assert report["dim_ker_rho"] == 1


class TestHeisenbergAlgebroid:
    def test_full_rank_anchor(self, heisenberg_lie_case, rng):
        for x in heisenberg_lie_case.bundle.base.sample(rng, 10):
            rank, _ = heisenberg_lie_case.bundle.rank_kernel_at(x)
            assert rank == 3

    def test_anchor_hom_exact(self, heisenberg_lie_case, rng):
        from geoconn import anchor_hom_residual

        for x in heisenberg_lie_case.bundle.base.sample(rng, 10):
            assert anchor_hom_residual(heisenberg_lie_case.structure, x) < 1e-9

    def test_construction_flags_enforced(self):
        case = make_subriemannian_heisenberg()
        case.expected_flags["partial"] = True
        case.verify()  # still fine with the zero connection
        bad = make_ehresmann()
        bad.expected_flags["anchor_hom"] = False
        with pytest.raises(GalleryError):
            bad.verify()
