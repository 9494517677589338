"""Exact diagonalization, parameter sweeps, and avoided-crossing location.

Eigenvalues are always reported sorted ascending and in the device's
angular-frequency units. Levels are addressed by 0-based sorted index, not
by adiabatic continuation; branch identity across a crossing is read off
the reported bare-state content instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import golden as _golden_section

from .device import DeviceSpec, build_bare_hamiltonian, build_interaction_rwa, build_space, with_parameter
from .hilbert import OperatorMatrix

# Gram matrix of the eigenvector set must match identity this tightly.
ORTHONORMALITY_TOL = 1e-9

# Relative location tolerance of the golden-section refinement.
CROSSING_XTOL = 1e-6


@dataclass(frozen=True)
class SpectrumResult:
    """Sorted eigenvalues along a one-parameter sweep.

    Attributes
    ----------
    parameter : str
        Dotted device path that was swept.
    values : numpy.ndarray
        Sweep values, in input order.
    energies : numpy.ndarray
        Shape (len(values), total_dim), ascending along axis 1.
    levels : tuple of int
        Selected 0-based level indices (for CSV output and track plots).
    vectors : numpy.ndarray or None
        Eigenvectors of the selected levels only, shape
        (len(values), total_dim, len(levels)); phase-fixed so the
        largest-magnitude component of each vector is real positive.
    """

    parameter: str
    values: np.ndarray
    energies: np.ndarray
    levels: tuple[int, ...]
    vectors: np.ndarray | None = None

    def selected_energies(self) -> np.ndarray:
        """Energies of the selected levels, shape (len(values), len(levels))."""
        return self.energies[:, list(self.levels)]


@dataclass(frozen=True)
class CrossingReport:
    """Location and character of a minimum gap between two sorted levels.

    The content fields hold one dict per branch (lower level first), mapping
    bare-state labels to weights |<bare|branch>|^2 of the dominant
    components; weights per branch sum to at most 1. ``content_at`` is taken
    at the gap minimum, the far fields at the bracket ends.
    """

    parameter: str
    levels: tuple[int, int]
    location: float
    gap: float
    content_at: tuple[dict[str, float], dict[str, float]]
    content_below: tuple[dict[str, float], dict[str, float]]
    content_above: tuple[dict[str, float], dict[str, float]]

    def __post_init__(self) -> None:
        if self.gap < 0:
            raise ValueError("gap must be nonnegative")
        for pair in (self.content_at, self.content_below, self.content_above):
            for content in pair:
                if sum(content.values()) > 1 + 1e-9:
                    raise ValueError("branch weights exceed 1")


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real positive."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        lead = col[np.argmax(np.abs(col))]
        if lead != 0:
            out[:, k] = col * (abs(lead) / lead)
    return out


def diagonalize(H: OperatorMatrix, want_vectors: bool = True):
    """Eigen-decompose a Hermitian operator.

    Parameters
    ----------
    H : OperatorMatrix
        Must be Hermitian within the operator tolerance.
    want_vectors : bool
        Skip eigenvector computation (and phase fixing) when False.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Ascending real eigenvalues; eigenvectors as columns, orthonormal
        with Gram residual at most 1e-9, or None if not requested.
    """
    H.require_hermitian()
    herm = 0.5 * (H.entries + H.entries.conj().T)
    if not want_vectors:
        return np.linalg.eigvalsh(herm), None
    energies, vectors = np.linalg.eigh(herm)
    vectors = _fix_phases(vectors)
    gram = vectors.conj().T @ vectors
    residual = np.max(np.abs(gram - np.eye(gram.shape[0])))
    if residual > ORTHONORMALITY_TOL:
        raise RuntimeError(f"eigenvector set lost orthonormality ({residual:.3e})")
    return energies, vectors


def _hamiltonian(dev: DeviceSpec):
    space = build_space(dev)
    h = build_bare_hamiltonian(dev, space).entries + build_interaction_rwa(dev, space).entries
    return space, OperatorMatrix(space, h)


def sweep_spectrum(
    dev: DeviceSpec,
    parameter: str,
    values,
    levels: tuple[int, ...] = (),
    want_vectors: bool = False,
) -> SpectrumResult:
    """Diagonalize the device Hamiltonian at every value of one parameter.

    Parameters
    ----------
    dev : DeviceSpec
    parameter : str
        Dotted path to a scalar field, e.g. ``atoms.1.omega_e``.
    values : sequence of float
        Sweep points, kept in input order.
    levels : tuple of int
        0-based sorted level indices to tag (and to keep vectors for).
    want_vectors : bool
        Store phase-fixed eigenvectors of the selected levels.

    Returns
    -------
    SpectrumResult
    """
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("sweep needs at least one value")
    space0 = build_space(dev)
    dim = space0.total_dim
    for level in levels:
        if not 0 <= level < dim:
            raise ValueError(f"level index {level} out of range for dimension {dim}")
    energies = np.empty((values.size, dim))
    vectors = np.empty((values.size, dim, len(levels)), dtype=complex) if want_vectors else None
    for k, value in enumerate(values):
        point = with_parameter(dev, parameter, float(value))
        space, h = _hamiltonian(point)
        if space.total_dim != dim:
            raise ValueError("sweep parameter changes the space dimension")
        evals, evecs = diagonalize(h, want_vectors=want_vectors)
        # eigh eigenvalue sum must reproduce the trace
        trace = float(np.trace(h.entries).real)
        scale = max(abs(trace), float(np.sum(np.abs(evals))), 1e-300)
        if abs(evals.sum() - trace) > 1e-10 * scale:
            raise RuntimeError("eigenvalue sum drifted from the trace")
        energies[k] = evals
        if want_vectors:
            vectors[k] = evecs[:, list(levels)]
    return SpectrumResult(parameter, values, energies, tuple(levels), vectors)


def _dominant_content(space, vector: np.ndarray, top_k: int = 3) -> dict[str, float]:
    weights = np.abs(vector) ** 2
    order = np.argsort(weights)[::-1][:top_k]
    return {space.basis_label(int(idx)): float(weights[idx]) for idx in order if weights[idx] > 1e-6}


def find_resonance(
    dev: DeviceSpec,
    parameter: str,
    bracket: tuple[float, float],
    levels: tuple[int, int],
    coarse_points: int = 17,
) -> CrossingReport:
    """Locate the minimum gap between two sorted levels inside a bracket.

    A coarse scan establishes an interior minimum, which a golden-section
    search refines to relative location tolerance 1e-6.

    Parameters
    ----------
    dev : DeviceSpec
    parameter : str
        Dotted path of the swept field.
    bracket : (float, float)
        Search interval; must contain a gap minimum in its interior.
    levels : (int, int)
        The two 0-based sorted level indices.

    Returns
    -------
    CrossingReport
        Gap, location, and dominant bare-state content of both branches at
        the crossing and at the bracket ends.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    l1, l2 = sorted(int(l) for l in levels)

    def gap_at(x: float) -> float:
        point = with_parameter(dev, parameter, x)
        _, h = _hamiltonian(point)
        evals, _ = diagonalize(h, want_vectors=False)
        return float(evals[l2] - evals[l1])

    grid = np.linspace(lo, hi, coarse_points)
    gaps = np.array([gap_at(x) for x in grid])
    k = int(np.argmin(gaps))
    if k == 0 or k == coarse_points - 1:
        raise ValueError("no interior gap minimum in the bracket")
    location = float(
        _golden_section(gap_at, brack=(grid[k - 1], grid[k], grid[k + 1]), tol=CROSSING_XTOL)
    )
    gap = gap_at(location)

    def branch_content(x: float):
        point = with_parameter(dev, parameter, x)
        space, h = _hamiltonian(point)
        _, vecs = diagonalize(h)
        return (
            _dominant_content(space, vecs[:, l1]),
            _dominant_content(space, vecs[:, l2]),
        )

    return CrossingReport(
        parameter=parameter,
        levels=(l1, l2),
        location=location,
        gap=gap,
        content_at=branch_content(location),
        content_below=branch_content(lo),
        content_above=branch_content(hi),
    )
