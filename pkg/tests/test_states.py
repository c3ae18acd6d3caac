import math

import numpy as np
import pytest

from modal_qcrb import (
    CutoffError,
    FockSpace,
    GaussianState,
    Mode,
    ModeBasis,
    StructuralError,
    detection_modes_for,
    make_state,
    state_from_spec,
)
from modal_qcrb.states import (
    first_moments,
    hop_operator,
    number_moments,
    operator_matrix_elements,
    quadrature_covariance,
)
from conftest import W0, hermite_gaussian_samples


def thermal_series_moment(nbar: float, power: int, terms: int) -> float:
    """Independent geometric-series oracle for thermal <N^power>.

    Summed over ``terms`` levels and renormalized, matching a truncated
    construction when ``terms`` equals its level count.
    """
    n = np.arange(terms)
    p = nbar**n / (1.0 + nbar) ** (n + 1)
    return float(np.sum(p * n.astype(float) ** power) / np.sum(p))


class TestConstructors:
    def test_fock_moments(self):
        state = make_state("fock", n=3)
        mean, second = number_moments(state)
        assert mean == pytest.approx(3.0, abs=1e-12)
        assert second == pytest.approx(9.0, abs=1e-12)  # zero number variance

    def test_coherent_poisson_variance(self):
        state = make_state("coherent", nbar=4.0)
        mean, second = number_moments(state)
        assert mean == pytest.approx(4.0, rel=1e-9)
        assert second - mean**2 == pytest.approx(4.0, rel=1e-8)

    def test_thermal_second_moment_vs_series_oracle(self):
        state = make_state("thermal", nbar=1.0)
        _, second = number_moments(state)
        # exact match to the series oracle at the same truncation,
        # and the closed form 2 nbar^2 + nbar up to the truncated tail
        oracle = thermal_series_moment(1.0, 2, terms=state.space.levels)
        assert second == pytest.approx(oracle, rel=1e-12)
        assert second == pytest.approx(3.0, rel=1e-7)

    def test_thermal_number_moments_small_nbar(self):
        state = make_state("thermal", nbar=0.5)
        mean, second = number_moments(state)
        assert mean == pytest.approx(0.5, rel=1e-7)
        assert second == pytest.approx(1.0, rel=1e-7)

    def test_squeezed_vacuum_photon_number(self):
        r = 0.4
        state = make_state("squeezed-vacuum", r=r)
        mean, _ = number_moments(state)
        assert mean == pytest.approx(math.sinh(r) ** 2, rel=1e-8)

    def test_squeezed_vacuum_quadrature_variance(self):
        # Fock-space check of Var(q) = exp(-2r) for the squeezed quadrature
        r = 0.4
        state = make_state("squeezed-vacuum", r=r)
        a = hop_operator(state.space, 0, 0)  # placeholder to warm cache
        from modal_qcrb.states import _destroy

        lower = _destroy(state.space.levels).toarray()
        q = lower + lower.conj().T
        vec = state.vectors[:, 0]
        mean_q = float(np.real(vec.conj() @ (q @ vec)))
        var_q = float(np.real(vec.conj() @ (q @ (q @ vec)))) - mean_q**2
        assert var_q == pytest.approx(math.exp(-2 * r), rel=1e-8)

    def test_trace_normalized_and_orthonormal(self):
        for spec in (
            {"kind": "coherent", "nbar": 2.5},
            {"kind": "thermal", "nbar": 1.5},
            {"kind": "fock", "n": 4},
            {"kind": "squeezed-vacuum", "r": 0.3, "phi": 0.7},
        ):
            state = state_from_spec(spec)
            assert state.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
            gram = state.vectors.conj().T @ state.vectors
            assert np.max(np.abs(gram - np.eye(state.rank))) < 1e-10

    def test_small_cutoff_raises_with_suggestion(self):
        space = FockSpace(n_modes=1, cutoff=4)
        with pytest.raises(CutoffError) as err:
            make_state("coherent", space, nbar=6.0)
        assert err.value.suggested_cutoff is not None
        assert err.value.suggested_cutoff > 4

    def test_cap_exceeded_raises(self):
        with pytest.raises(CutoffError):
            make_state("thermal", nbar=8.0)

    def test_cutoff_robustness(self):
        # moments move by less than the truncated weighted tail when the
        # cutoff grows by 4 levels
        for spec in (
            {"kind": "coherent", "nbar": 2.0},
            {"kind": "thermal", "nbar": 1.0},
        ):
            base = state_from_spec(spec)
            bigger = state_from_spec(spec, cutoff=base.space.cutoff + 4)
            m1 = np.array(number_moments(base))
            m2 = np.array(number_moments(bigger))
            assert np.max(np.abs(m1 - m2) / np.abs(m2)) < 1e-7

    def test_custom_state_roundtrip(self):
        space = FockSpace(n_modes=1, cutoff=3)
        vectors = np.eye(4, 2, dtype=complex)
        state = make_state(
            "custom", space, probabilities=[0.75, 0.25], vectors=vectors
        )
        assert state.rank == 2
        mean, _ = number_moments(state)
        assert mean == pytest.approx(0.25, abs=1e-12)


def two_mode_superposition() -> tuple[FockSpace, np.ndarray]:
    space = FockSpace(n_modes=2, cutoff=2)
    vec = np.zeros(space.dimension, dtype=complex)
    levels = space.levels
    vec[1 * levels + 0] = 1.0 / math.sqrt(2)  # one photon in mode 0
    vec[0 * levels + 1] = 1.0 / math.sqrt(2)  # one photon in mode 1
    return space, vec


class TestMoments:
    def test_vacuum_first_moments_vanish(self):
        state = make_state("fock", n=0)
        assert np.allclose(first_moments(state), 0.0)

    def test_coherent_occupation(self):
        space = FockSpace(n_modes=2, cutoff=24)
        state = make_state("coherent", space, nbar=3.0, mode=0)
        m = first_moments(state)
        assert m[0, 0].real == pytest.approx(3.0, rel=1e-9)
        assert abs(m[0, 1]) < 1e-12
        assert abs(m[1, 1]) < 1e-12

    def test_single_photon_superposition_coherences(self):
        space, vec = two_mode_superposition()
        state = make_state("custom", space, probabilities=[1.0], vectors=vec[:, None])
        m = first_moments(state)
        assert m[0, 1] == pytest.approx(0.5 + 0.0j, abs=1e-12)
        assert m[0, 0].real == pytest.approx(0.5, abs=1e-12)
        assert np.max(np.abs(m - m.conj().T)) < 1e-12

    def test_trace_is_mean_photon_number(self):
        state = make_state("thermal", nbar=0.7)
        mean, _ = number_moments(state)
        assert np.trace(first_moments(state)).real == pytest.approx(mean, abs=1e-12)

    def test_second_moment_bound(self):
        for spec in ({"kind": "coherent", "nbar": 1.3}, {"kind": "thermal", "nbar": 0.9}):
            mean, second = number_moments(state_from_spec(spec))
            assert second >= mean**2 - 1e-12


class TestOperatorMatrixElements:
    def test_number_operator_on_fock(self):
        state = make_state("fock", n=3)
        block = operator_matrix_elements(state, np.eye(1))
        assert block.shape == (1, 1)
        assert block[0, 0].real == pytest.approx(3.0, abs=1e-12)

    def test_number_operator_on_coherent(self):
        state = make_state("coherent", nbar=2.0)
        block = operator_matrix_elements(state, np.eye(1))
        assert block[0, 0].real == pytest.approx(2.0, rel=1e-9)

    def test_generator_coefficients_accepted_directly(self, pulse_family):
        from modal_qcrb import build_generators

        gens = build_generators(pulse_family)
        state = make_state("coherent", nbar=1.0)
        stacked = operator_matrix_elements(state, gens)
        assert stacked.shape == (3, 1, 1)
        single = operator_matrix_elements(state, gens.matrices[0])
        assert single[0, 0] == pytest.approx(stacked[0, 0, 0])

    def test_hop_transfer_between_single_photon_states(self):
        # mixed state over |1,0> and |0,1>; a swap coupling moves one to
        # the other with unit matrix element
        space, vec = two_mode_superposition()
        levels = space.levels
        v10 = np.zeros(space.dimension, dtype=complex)
        v10[1 * levels + 0] = 1.0
        v01 = np.zeros(space.dimension, dtype=complex)
        v01[0 * levels + 1] = 1.0
        state = make_state(
            "custom",
            space,
            probabilities=[0.5, 0.5],
            vectors=np.stack([v10, v01], axis=1),
        )
        coupling = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        block = operator_matrix_elements(state, coupling)
        assert abs(block[0, 1]) == pytest.approx(1.0, abs=1e-12)
        assert abs(block[0, 0]) < 1e-12
        assert np.max(np.abs(block - block.conj().T)) < 1e-12


class TestGaussianStates:
    def test_uncertainty_violation_rejected(self):
        with pytest.raises(StructuralError):
            GaussianState(np.zeros(2), 0.5 * np.eye(2))

    def test_vacuum_covariance_of_orthonormal_targets(self, displaced_family):
        dets = detection_modes_for(displaced_family)
        basis = displaced_family.evaluate()
        cov = quadrature_covariance(GaussianState.vacuum(1), dets, basis)
        assert np.allclose(cov, np.eye(2), atol=1e-10)

    def test_vacuum_covariance_with_overlapping_targets(self, displaced_family):
        # commutator algebra: vacuum Cov(q_a, q_b) = Re(overlap)
        from modal_qcrb import DetectionMode

        grid = displaced_family.grid
        overlap = 0.6 + 0.3j
        g1 = Mode(grid, hermite_gaussian_samples(grid, 1, 0, W0))
        g2 = Mode(grid, hermite_gaussian_samples(grid, 2, 0, W0))
        mixed = Mode(
            grid, overlap * g1.samples + math.sqrt(1 - abs(overlap) ** 2) * g2.samples
        )
        targets = [
            DetectionMode(mode=g1, weight=1.0, label="a"),
            DetectionMode(mode=mixed, weight=1.0, label="b"),
        ]
        basis = displaced_family.evaluate()
        cov = quadrature_covariance(GaussianState.vacuum(1), targets, basis)
        assert cov[0, 1] == pytest.approx(overlap.real, abs=1e-10)

    def test_squeezed_variance_passes_through(self, displaced_family):
        basis = displaced_family.evaluate()
        f0 = basis.modes[0]
        from modal_qcrb import DetectionMode

        target = [DetectionMode(mode=f0, weight=1.0, label="aligned")]
        v = 0.37
        cov = quadrature_covariance(GaussianState.squeezed([v]), target, basis)
        assert cov[0, 0] == pytest.approx(v, abs=1e-10)

    def test_cross_representation_coherent(self, displaced_family):
        # Fock-space symmetrized covariance of the reference quadratures
        # must match the Gaussian-state path within 1e-8
        basis = displaced_family.evaluate()
        f0 = basis.modes[0]
        from modal_qcrb import DetectionMode

        state = make_state("coherent", nbar=1.5)
        lowering = hop_operator(state.space, 0, 0)  # warm cache
        from modal_qcrb.states import _destroy

        a = _destroy(state.space.levels).toarray()
        q = a + a.conj().T
        vec = state.vectors[:, 0]
        mean_q = float(np.real(vec.conj() @ (q @ vec)))
        var_fock = float(np.real(vec.conj() @ (q @ (q @ vec)))) - mean_q**2

        gauss = GaussianState.coherent([math.sqrt(1.5)])
        cov = quadrature_covariance(
            gauss, [DetectionMode(mode=f0, weight=1.0, label="ref")], basis
        )
        assert cov[0, 0] == pytest.approx(var_fock, abs=1e-8)

    def test_span_plus_remainder_against_fock_oracle(self, displaced_family):
        # target (f0 + HG10)/sqrt(2) with f0 squeezed: Cov = (v + 1)/2,
        # checked against a two-mode Fock computation
        r = 0.45
        v = math.exp(-2 * r)
        grid = displaced_family.grid
        basis = displaced_family.evaluate()
        f0 = basis.modes[0]
        g = Mode(grid, hermite_gaussian_samples(grid, 1, 0, W0))
        from modal_qcrb import DetectionMode

        mixed = Mode(grid, (f0.samples + g.samples) / math.sqrt(2))
        cov = quadrature_covariance(
            GaussianState.squeezed([v]),
            [DetectionMode(mode=mixed, weight=1.0, label="mix")],
            basis,
        )
        # independent Fock oracle: squeezed (x) vacuum, q = (q0 + q1)/sqrt(2)
        sq = make_state("squeezed-vacuum", r=r)
        space2 = FockSpace(n_modes=2, cutoff=sq.space.cutoff)
        column = sq.vectors[:, 0]
        vacuum = np.zeros(space2.levels, dtype=complex)
        vacuum[0] = 1.0
        vec = np.kron(column, vacuum)
        from modal_qcrb.states import _destroy
        import scipy.sparse as sp

        a0 = sp.kron(_destroy(space2.levels), sp.identity(space2.levels))
        a1 = sp.kron(sp.identity(space2.levels), _destroy(space2.levels))
        qop = (a0 + a0.conj().T + a1 + a1.conj().T) / math.sqrt(2)
        mean_q = float(np.real(vec.conj() @ (qop @ vec)))
        var_fock = float(np.real(vec.conj() @ (qop @ (qop @ vec)))) - mean_q**2
        assert cov[0, 0] == pytest.approx((v + 1) / 2, rel=1e-8)
        assert cov[0, 0] == pytest.approx(var_fock, rel=1e-7)

    def test_reference_must_be_orthonormal(self, displaced_family):
        f0 = displaced_family.evaluate_mode(0)
        from modal_qcrb import DetectionMode

        bad = ModeBasis((f0, Mode(f0.grid, 0.9 * f0.samples)))
        with pytest.raises(StructuralError):
            quadrature_covariance(
                GaussianState.vacuum(2),
                [DetectionMode(mode=f0, weight=1.0, label="x")],
                bad,
            )
