import math

import numpy as np
import pytest

from modal_qcrb import (
    BeamGeometry,
    FockSpace,
    Mode,
    PulseSpectrum,
    SampleGrid,
    displaced_beam_family,
    gaussian_beam_family,
    gaussian_pulse_family,
    gram_schmidt,
    inner_product,
    make_state,
)

W0 = 1.0
K = 10.0
OMEGA0 = 100.0
VARIANCE = 25.0


@pytest.fixture(scope="session")
def beam_family():
    return gaussian_beam_family(BeamGeometry(waist=W0, wavenumber=K))


@pytest.fixture(scope="session")
def beam_carrier_family():
    return gaussian_beam_family(BeamGeometry(waist=W0, wavenumber=K), carrier_phase=True)


@pytest.fixture(scope="session")
def pulse_family():
    return gaussian_pulse_family(PulseSpectrum(center_frequency=OMEGA0, variance=VARIANCE))


@pytest.fixture(scope="session")
def displaced_family():
    return displaced_beam_family(W0)


def hermite_gaussian_samples(grid, order_x: int, order_y: int, waist: float) -> np.ndarray:
    """Orthonormal Hermite-Gaussian profile on a 2-D grid (test helper)."""
    from numpy.polynomial.hermite import hermval

    xg, yg = grid.mesh()

    def axis_profile(coord, order):
        c = np.zeros(order + 1)
        c[order] = 1.0
        scaled = np.sqrt(2.0) * coord / waist
        norm = np.sqrt(
            np.sqrt(2.0 / np.pi)
            / (waist * 2.0**order * float(math.factorial(order)))
        )
        return norm * hermval(scaled, c) * np.exp(-(coord**2) / waist**2)

    return (axis_profile(xg, order_x) * axis_profile(yg, order_y)).astype(complex)


def random_mode_parameter_data(rng, n_params=2, n_modes=2, grid_points=161):
    """Random populated basis plus derivative modes consistent with a
    norm-preserving parametrization.

    The populated-span coefficients (f_j | d_a f_k) are drawn
    anti-Hermitian (which is exactly the norm-preservation constraint),
    and each derivative picks up an arbitrary component orthogonal to the
    populated span.
    """
    grid = SampleGrid.uniform(np.linspace(-5.0, 5.0, grid_points))
    x = grid.axes[0]

    def random_profile():
        coeff = rng.normal(size=5) + 1j * rng.normal(size=5)
        poly = sum(c * x**p for p, c in enumerate(coeff))
        return Mode(grid, poly * np.exp(-(x**2) / 2.0))

    basis = gram_schmidt([random_profile() for _ in range(n_modes)]).basis
    populated = list(basis.modes)

    derivatives = []
    for _ in range(n_params):
        raw = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
        span_coeff = (raw - raw.conj().T) / 2.0  # anti-Hermitian
        row = []
        for k in range(n_modes):
            extra = random_profile()
            samples = extra.samples.copy()
            for mode in populated:
                samples -= inner_product(mode, extra) * mode.samples
            for j in range(n_modes):
                samples += span_coeff[j, k] * populated[j].samples
            row.append(Mode(grid, samples))
        derivatives.append(row)
    return populated, derivatives


def with_idle_parameter(family):
    """Copy of a two-parameter family padded with a no-effect parameter."""
    from dataclasses import replace

    def mode_fn(k, theta):
        return family.mode_fn(k, theta[:2])

    def derivative_fn(k, a):
        if a < 2:
            return family.derivative_fn(k, a)
        return np.zeros(family.grid.shape, dtype=complex)

    return replace(
        family,
        parameters=(*family.parameters, "idle"),
        units=(*family.units, "1"),
        theta_scales=np.append(family.theta_scales, 1.0),
        mode_fn=mode_fn,
        derivative_fn=derivative_fn,
        oracle_fn=None,
    )


def random_density_state(rng, space: FockSpace, rank: int):
    """Random state with support away from the cutoff boundary."""
    dims = (space.levels,) * space.n_modes
    occupations = np.unravel_index(np.arange(space.dimension), dims)
    interior = np.ones(space.dimension, dtype=bool)
    for occ in occupations:
        interior &= occ < space.cutoff

    raw = rng.normal(size=(space.dimension, rank)) + 1j * rng.normal(
        size=(space.dimension, rank)
    )
    raw[~interior, :] = 0.0
    q, _ = np.linalg.qr(raw)
    if rank == 1:
        probs = np.array([1.0])
    else:
        probs = rng.uniform(0.1, 1.0, size=rank)
        probs /= probs.sum()
    return make_state("custom", space, probabilities=probs, vectors=q[:, :rank])
