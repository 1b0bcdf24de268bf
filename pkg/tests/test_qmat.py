import numpy as np
import pytest

from backflow.qmat import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    I2,
    SIGMA_Z,
    PostSelectionImpossibleError,
    check_density_operator,
    eig_hermitian,
    kron,
    project_control,
    pure_state,
    trace_distance,
)
from backflow.channel import apply, compose, phi_t_kraus
from backflow.control import default_amplitudes, path_kraus, switch_kraus
from conftest import random_density, random_pure


def two_by_two_eigvals(m):
    """Closed-form eigenvalues of a real-symmetric 2x2 matrix (oracle)."""
    mean = 0.5 * (m[0, 0] + m[1, 1]).real
    radius = np.sqrt((0.5 * (m[0, 0] - m[1, 1]).real) ** 2 + abs(m[0, 1]) ** 2)
    return mean + radius, mean - radius


class TestTraceDistance:
    def test_orthogonal_pure_states(self):
        assert trace_distance(pure_state(KET_0), pure_state(KET_1)) == pytest.approx(1.0)

    def test_identical_inputs(self, rng):
        rho = random_density(rng)
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-15)

    def test_probe_pair_value(self):
        # eigenvalues of the difference, frozen from the 2x2 closed form
        a = 0.65
        b = np.sqrt(1 - a * a)
        psi = pure_state(np.array([a, b]))
        diff = pure_state(KET_0) - psi
        lam_hi, lam_lo = two_by_two_eigvals(diff)
        expected = 0.5 * (abs(lam_hi) + abs(lam_lo))
        assert expected == pytest.approx(b, abs=1e-14)
        assert trace_distance(pure_state(KET_0), psi) == pytest.approx(expected, abs=1e-14)
        assert trace_distance(pure_state(KET_0), psi) == pytest.approx(0.7599342076785331)

    def test_pure_state_overlap_formula(self, rng):
        # D(|u><u|, |v><v|) = sqrt(1 - |<u|v>|^2)
        for _ in range(25):
            u = rng.normal(size=2) + 1j * rng.normal(size=2)
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            expected = np.sqrt(1.0 - abs(np.vdot(u, v)) ** 2)
            got = trace_distance(np.outer(u, u.conj()), np.outer(v, v.conj()))
            assert got == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            trace_distance(np.eye(2), np.eye(4))

    def test_non_hermitian_difference(self):
        bad = np.array([[0.5, 0.3], [0.0, 0.5]], dtype=complex)
        with pytest.raises(ValueError, match="not Hermitian"):
            trace_distance(bad, np.eye(2) / 2)

    def test_symmetry_and_triangle(self, rng):
        for _ in range(20):
            r1, r2, r3 = (random_density(rng) for _ in range(3))
            d12 = trace_distance(r1, r2)
            assert d12 == pytest.approx(trace_distance(r2, r1), abs=1e-14)
            assert d12 <= trace_distance(r1, r3) + trace_distance(r3, r2) + 1e-12

    def test_range(self, rng):
        for _ in range(20):
            d = trace_distance(random_density(rng), random_density(rng))
            assert 0.0 <= d <= 1.0

    def test_contractive_under_channels(self, rng):
        for t in (0.2, 0.9, 2.5):
            channel = phi_t_kraus(t)
            for _ in range(10):
                r1, r2 = random_density(rng), random_density(rng)
                before = trace_distance(r1, r2)
                after = trace_distance(apply(channel, r1), apply(channel, r2))
                assert after <= before + 1e-10

    def test_contractive_under_joint_channels(self, rng):
        phi = phi_t_kraus(0.8)
        joints = (
            path_kraus(phi, phi, default_amplitudes()),
            switch_kraus(phi, phi),
        )
        for joint in joints:
            for _ in range(10):
                r1, r2 = random_density(rng, 4), random_density(rng, 4)
                before = trace_distance(r1, r2)
                after = trace_distance(apply(joint, r1), apply(joint, r2))
                assert after <= before + 1e-10

    def test_contractive_under_composed_channel(self, rng):
        channel = compose(phi_t_kraus(0.5), phi_t_kraus(1.1))
        for _ in range(10):
            r1, r2 = random_density(rng), random_density(rng)
            before = trace_distance(r1, r2)
            after = trace_distance(apply(channel, r1), apply(channel, r2))
            assert after <= before + 1e-10


class TestEigHermitian:
    def test_identity(self):
        assert np.allclose(eig_hermitian(I2), [1.0, 1.0])

    def test_sigma_z(self):
        assert np.allclose(eig_hermitian(SIGMA_Z), [1.0, -1.0])

    def test_symmetric_2x2_closed_form(self):
        m = np.array([[0.75, 0.25], [0.25, 0.25]], dtype=complex)
        lam_hi, lam_lo = two_by_two_eigvals(m)
        assert lam_hi == pytest.approx(0.5 + np.sqrt(0.125))
        got = eig_hermitian(m)
        assert got[0] == pytest.approx(lam_hi, abs=1e-14)
        assert got[1] == pytest.approx(lam_lo, abs=1e-14)

    def test_descending_order(self, rng):
        for _ in range(10):
            g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            m = g + g.conj().T
            vals = eig_hermitian(m)
            assert np.all(np.diff(vals) <= 0)

    def test_sum_equals_trace(self, rng):
        for _ in range(10):
            g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            m = g + g.conj().T
            assert eig_hermitian(m).sum() == pytest.approx(np.trace(m).real, abs=1e-10)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestKron:
    def test_identity_pair(self):
        assert np.array_equal(kron(I2, I2), np.eye(4))

    def test_system_major_ordering(self):
        # system index is the major one: sigma_x (x) |0><0| sits at (0,2),(2,0)
        m = kron(np.array([[0, 1], [1, 0]]), pure_state(KET_0))
        expected = np.zeros((4, 4), dtype=complex)
        expected[0, 2] = expected[2, 0] = 1.0
        assert np.array_equal(m, expected)

    def test_single_entry(self):
        m = kron(np.outer(KET_0, KET_1.conj()), pure_state(KET_1))
        expected = np.zeros((4, 4), dtype=complex)
        expected[1, 3] = 1.0
        assert np.array_equal(m, expected)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            kron(np.ones((2, 3)), I2)


class TestProjectControl:
    def test_plus_control_passthrough(self, rng):
        rho = random_density(rng)
        joint = kron(rho, pure_state(KET_PLUS))
        block, prob = project_control(joint, KET_PLUS)
        assert prob == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(block, rho, atol=1e-12)

    def test_zero_control_gives_half(self, rng):
        rho = random_density(rng)
        joint = kron(rho, pure_state(KET_0))
        block, prob = project_control(joint, KET_PLUS)
        assert prob == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(block, rho / 2, atol=1e-12)

    def test_path_supermap_probability_at_t_zero(self, rng):
        # at t = 0 only the identity operator survives, the amplitude cross
        # terms fully decohere the control, and the plus outcome shows up
        # with probability one half
        rho = random_density(rng)
        joint_channel = path_kraus(phi_t_kraus(0.0), phi_t_kraus(0.0), default_amplitudes())
        evolved = apply(joint_channel, kron(rho, pure_state(KET_PLUS)))
        block, prob = project_control(evolved, KET_PLUS)
        assert prob == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(block / prob, rho, atol=1e-12)

    def test_outcome_probabilities_sum_to_one(self, rng):
        for _ in range(10):
            joint = random_density(rng, 4)
            _, p_plus = project_control(joint, KET_PLUS)
            _, p_minus = project_control(joint, KET_MINUS)
            assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)

    def test_impossible_outcome_raises(self, rng):
        joint = kron(random_density(rng), pure_state(KET_0))
        with pytest.raises(PostSelectionImpossibleError):
            project_control(joint, KET_1)

    def test_rejects_unnormalized_vector(self):
        with pytest.raises(ValueError, match="normalized"):
            project_control(np.eye(4) / 4, np.array([1.0, 1.0]))


class TestDensityCheck:
    def test_accepts_valid(self, rng):
        check_density_operator(random_density(rng))
        check_density_operator(random_pure(rng))

    def test_rejects_trace(self):
        with pytest.raises(ValueError, match="trace"):
            check_density_operator(np.eye(2))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="negative eigenvalue"):
            check_density_operator(np.diag([1.5, -0.5]).astype(complex))

    def test_rejects_non_hermitian(self):
        m = np.array([[0.5, 0.4], [0.0, 0.5]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            check_density_operator(m)
