"""Discretized mode functions and the overlap machinery built on them.

A mode is a complex amplitude profile sampled on a quadrature grid; every
quantity downstream (generators, information matrices, detection modes)
reduces to the weighted inner products computed here.  Grids carry their
quadrature weights so inner products stay bilinear sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import (
    EvaluationError,
    GridMismatchError,
    RankDeficiencyError,
    StructuralError,
)
from .tolerances import TAU_ORTH, TAU_RANK, TAU_ZERO

if TYPE_CHECKING:  # pragma: no cover
    from .families import ParameterFamily


def _trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights for a strictly increasing 1-D axis."""
    if axis.ndim != 1 or axis.size < 2:
        raise StructuralError("grid axis must be 1-D with at least two samples")
    if np.any(np.diff(axis) <= 0):
        raise StructuralError("grid axis must be strictly increasing")
    w = np.empty_like(axis, dtype=float)
    w[1:-1] = 0.5 * (axis[2:] - axis[:-2])
    w[0] = 0.5 * (axis[1] - axis[0])
    w[-1] = 0.5 * (axis[-1] - axis[-2])
    return w


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Sample coordinates and positive quadrature weights (1-D or 2-D).

    ``weights`` has one entry per sample point, shaped like the sample
    array; on uniform grids it is the outer product of per-axis trapezoid
    weights.  Instances are immutable and compared by identity or by
    :meth:`compatible`.
    """

    axes: tuple[np.ndarray, ...]
    weights: np.ndarray

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise StructuralError("only 1-D and 2-D sample grids are supported")
        for ax in self.axes:
            if ax.ndim != 1 or np.any(np.diff(ax) <= 0):
                raise StructuralError("grid axes must be 1-D and strictly increasing")
        expected = tuple(ax.size for ax in self.axes)
        if self.weights.shape != expected:
            raise StructuralError(
                f"weight shape {self.weights.shape} does not match axes {expected}"
            )
        if np.any(self.weights <= 0):
            raise StructuralError("quadrature weights must be strictly positive")

    @classmethod
    def uniform(cls, *axes: np.ndarray) -> "SampleGrid":
        """Build a grid with trapezoid weights from coordinate axes."""
        axes = tuple(np.asarray(ax, dtype=float) for ax in axes)
        per_axis = [_trapezoid_weights(ax) for ax in axes]
        weights = per_axis[0]
        for w in per_axis[1:]:
            weights = np.multiply.outer(weights, w)
        return cls(axes=axes, weights=weights)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.size for ax in self.axes)

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to the sample shape (ij indexing)."""
        if self.ndim == 1:
            return (self.axes[0],)
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def compatible(self, other: "SampleGrid") -> bool:
        if self is other:
            return True
        if self.shape != other.shape:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))


@dataclass(frozen=True, eq=False)
class Mode:
    """A complex mode profile sampled on a grid."""

    grid: SampleGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", samples)
        if samples.shape != self.grid.shape:
            raise StructuralError(
                f"sample shape {samples.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise EvaluationError("mode samples contain non-finite values")


def inner_product(a: Mode, b: Mode) -> complex:
    """Quadrature inner product sum(w * conj(a) * b); conjugate-linear in a.

    Conjugate symmetry holds exactly as computed:
    ``inner_product(a, b) == conj(inner_product(b, a))``.
    """
    if not a.grid.compatible(b.grid):
        raise GridMismatchError("modes are sampled on different grids")
    # conj(a) * b first: its swap is the exact IEEE conjugate, and the real
    # weights preserve that, so conjugate symmetry holds bitwise
    return complex(np.sum(a.grid.weights * (np.conj(a.samples) * b.samples)))


def mode_norm(mode: Mode) -> float:
    """Quadrature L2 norm of a mode."""
    value = inner_product(mode, mode).real
    return float(np.sqrt(max(value, 0.0)))


def normalized(mode: Mode) -> Mode:
    """Unit-norm copy of a mode."""
    n = mode_norm(mode)
    if n == 0.0:
        raise StructuralError("cannot normalize a zero mode")
    return Mode(mode.grid, mode.samples / n)


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """An ordered mode list with flags marking the populated (non-vacuum) set."""

    modes: tuple[Mode, ...]
    populated: tuple[bool, ...] = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if not modes:
            raise StructuralError("a mode basis needs at least one mode")
        populated = tuple(self.populated) or tuple(True for _ in modes)
        if len(populated) != len(modes):
            raise StructuralError("populated flags must match the mode count")
        object.__setattr__(self, "populated", populated)
        grid = modes[0].grid
        for m in modes[1:]:
            if not grid.compatible(m.grid):
                raise GridMismatchError("basis modes are sampled on different grids")

    def __len__(self) -> int:
        return len(self.modes)

    def populated_modes(self) -> tuple[Mode, ...]:
        return tuple(m for m, p in zip(self.modes, self.populated) if p)

    def gram(self) -> np.ndarray:
        n = len(self.modes)
        g = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                g[i, j] = inner_product(self.modes[i], self.modes[j])
                g[j, i] = np.conj(g[i, j])
        return g

    def orthonormality_residual(self) -> float:
        g = self.gram()
        return float(np.max(np.abs(g - np.eye(len(self.modes)))))

    def validate(self, tol: float = TAU_ORTH) -> None:
        residual = self.orthonormality_residual()
        if residual > tol:
            raise StructuralError(
                f"mode basis is not orthonormal (Gram residual {residual:.3e})"
            )


@dataclass(frozen=True, eq=False)
class DetectionMode:
    """A normalized detection mode with its sensitivity weight.

    The detection mode is the derivative mode rotated by i and scaled to
    unit norm; ``weight`` is the derivative-mode norm (inverse parameter
    units).  ``degenerate`` marks parameters with no effect on the mode.
    """

    mode: Mode
    weight: float
    degenerate: bool = False
    label: str = ""


@dataclass(frozen=True, eq=False)
class GramSchmidtResult:
    """Output of :func:`gram_schmidt`.

    ``coefficients`` is the triangle mapping inputs to outputs:
    ``basis.modes[i] == sum_j coefficients[i, j] * inputs[j]``.
    ``pivot_norms[i]`` is the residual norm of input ``i`` against the
    previously accepted modes (for unit inputs with overlap d this is
    ``sqrt(1 - |d|^2)``).  ``dependent_indices`` lists dropped inputs when
    ``on_dependent="drop"``.
    """

    basis: ModeBasis
    coefficients: np.ndarray
    pivot_norms: np.ndarray
    dependent_indices: tuple[int, ...] = ()


def gram_schmidt(
    modes: Sequence[Mode],
    *,
    on_dependent: str = "error",
    rank_tol: float = TAU_RANK,
) -> GramSchmidtResult:
    """Orthonormalize a mode list, tracking the input-to-output triangle.

    Uses modified Gram-Schmidt with a re-orthogonalization pass, so the
    output Gram matrix stays at machine-precision identity.  A pivot norm
    below ``rank_tol`` (relative to the input norm) raises
    :class:`RankDeficiencyError` naming the dependent index, or drops the
    mode when ``on_dependent="drop"``.
    """
    if on_dependent not in ("error", "drop"):
        raise ValueError("on_dependent must be 'error' or 'drop'")
    modes = list(modes)
    if not modes:
        raise StructuralError("gram_schmidt needs at least one mode")
    grid = modes[0].grid
    n = len(modes)

    accepted: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    pivots = np.zeros(n)
    dependent: list[int] = []

    for i, m in enumerate(modes):
        if not grid.compatible(m.grid):
            raise GridMismatchError("modes are sampled on different grids")
        v = m.samples.astype(complex).copy()
        row = np.zeros(n, dtype=complex)
        row[i] = 1.0
        for _ in range(2):  # second pass keeps the Gram residual at round-off
            for q, qrow in zip(accepted, rows):
                ov = np.sum(grid.weights * np.conj(q) * v)
                v -= ov * q
                row -= ov * qrow
        pivot = float(np.sqrt(max(np.sum(grid.weights * np.abs(v) ** 2).real, 0.0)))
        pivots[i] = pivot
        ref = float(np.sqrt(max(np.sum(grid.weights * np.abs(m.samples) ** 2).real, 0.0)))
        if pivot < rank_tol * max(ref, 1.0):
            if on_dependent == "error":
                raise RankDeficiencyError(i, pivot)
            dependent.append(i)
            continue
        accepted.append(v / pivot)
        rows.append(row / pivot)

    if not accepted:
        raise RankDeficiencyError(0, pivots[0])
    basis = ModeBasis(tuple(Mode(grid, q) for q in accepted))
    return GramSchmidtResult(
        basis=basis,
        coefficients=np.array(rows),
        pivot_norms=pivots,
        dependent_indices=tuple(dependent),
    )


def derivative_mode(
    family: "ParameterFamily",
    mode_index: int,
    parameter: int,
    method: str = "analytic",
    step: float | None = None,
) -> Mode:
    """Unnormalized derivative of a family mode with respect to one parameter.

    The analytic path returns the family's closed form.  The
    finite-difference path uses a central difference with one Richardson
    refinement, step ``max(|theta_scale|, 1) * 1e-4`` unless overridden.
    """
    if method == "analytic":
        d = family.analytic_derivative(mode_index, parameter)
        if d is None:
            raise StructuralError(
                f"family '{family.name}' has no closed-form derivative for "
                f"parameter {parameter}; use method='finite-difference'"
            )
        return d
    if method != "finite-difference":
        raise ValueError("method must be 'analytic' or 'finite-difference'")

    scale = float(family.theta_scales[parameter])
    h = float(step) if step is not None else max(abs(scale), 1.0) * 1e-4
    if h <= 0:
        raise ValueError("finite-difference step must be positive")

    def central(hh: float) -> np.ndarray:
        theta = np.zeros(family.n_parameters)
        theta[parameter] = hh
        plus = family.evaluate_mode(mode_index, theta).samples
        theta[parameter] = -hh
        minus = family.evaluate_mode(mode_index, theta).samples
        return (plus - minus) / (2.0 * hh)

    coarse = central(h)
    fine = central(h / 2.0)
    samples = (4.0 * fine - coarse) / 3.0
    if not np.all(np.isfinite(samples)):
        raise EvaluationError(
            f"finite-difference evaluation of parameter {parameter} produced "
            "non-finite samples"
        )
    return Mode(family.grid, samples)


def detection_mode(
    derivative: Mode,
    *,
    weight_floor: float = TAU_ZERO,
    label: str = "",
) -> DetectionMode:
    """Normalized, i-rotated detection mode and sensitivity weight.

    A derivative mode f_a maps to (i / w_a) f_a with w_a its norm.  A
    weight below ``weight_floor`` returns a flagged degenerate mode with
    weight zero instead of raising.
    """
    w = mode_norm(derivative)
    if w < weight_floor:
        zero = Mode(derivative.grid, np.zeros_like(derivative.samples))
        return DetectionMode(mode=zero, weight=0.0, degenerate=True, label=label)
    rotated = Mode(derivative.grid, 1j * derivative.samples / w)
    return DetectionMode(mode=rotated, weight=w, degenerate=False, label=label)


def vacuum_overlap(
    f_alpha: Mode,
    f_beta: Mode,
    populated: ModeBasis,
    *,
    validate_basis: bool = True,
) -> complex:
    """Overlap of two modes through the projector onto the vacuum-mode span.

    Returns ``(fa|fb) - sum_k (fa|f_k)(f_k|fb)`` over the populated modes
    f_k; Hermitian under exchanging (fa, fb) with conjugation.
    """
    if validate_basis:
        pop = ModeBasis(populated.populated_modes())
        pop.validate()
    value = inner_product(f_alpha, f_beta)
    for mode in populated.populated_modes():
        value -= inner_product(f_alpha, mode) * inner_product(mode, f_beta)
    return value
