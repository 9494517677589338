"""Composite Hilbert spaces for cavity-atom devices.

Truncated bosonic modes and few-level atoms are combined by tensor products
in a fixed order (cavities first, then atoms, each in declaration order).
Basis indices use mixed-radix encoding with the first subsystem most
significant, so the label ``|n, l1, l2, ...>`` maps to one contiguous row
index and CSV state labels are reproducible.

All operators are dense complex matrices; the dimensions in play stay a few
hundred at most, so dense storage is the contract and sparse tricks are at
best an internal optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Atom level names in energy order; index in this tuple == level index.
LEVEL_NAMES = ("g", "e", "i")

# Excitation charge carried by each atom level (photons count 1 each).
LEVEL_EXCITATION = {"g": 0, "e": 1, "i": 2}

# A Hamiltonian-valued matrix must satisfy |H - H+|_max <= rtol * |H|_max.
HERMITICITY_RTOL = 1e-12


def level_index(level: int | str, dim: int) -> int:
    """Resolve a level given as name ('g', 'e', 'i') or index to an index.

    Parameters
    ----------
    level : int or str
        Level name or 0-based index.
    dim : int
        Number of levels of the atom (2 or 3).

    Returns
    -------
    int
        Validated 0-based level index.
    """
    if isinstance(level, str):
        if level not in LEVEL_NAMES[:dim]:
            raise ValueError(f"unknown level {level!r} for a {dim}-level atom")
        return LEVEL_NAMES.index(level)
    idx = int(level)
    if not 0 <= idx < dim:
        raise ValueError(f"level index {idx} out of range for dimension {dim}")
    return idx


@dataclass(frozen=True)
class SubsystemDef:
    """One tensor factor: a truncated cavity mode or a few-level atom.

    Parameters
    ----------
    kind : {'cavity', 'atom'}
    dimension : int
        Cavity: Fock truncation n_max + 1. Atom: 2 or 3 levels.
    label : str
        Identifier, unique within a space.
    """

    kind: str
    dimension: int
    label: str

    def __post_init__(self) -> None:
        if self.kind not in ("cavity", "atom"):
            raise ValueError(f"unknown subsystem kind {self.kind!r}")
        if self.dimension < 2:
            raise ValueError("subsystem dimension must be at least 2")
        if self.kind == "atom" and self.dimension not in (2, 3):
            raise ValueError("atoms must have 2 or 3 levels")
        if not self.label:
            raise ValueError("subsystem label must be nonempty")


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor product of subsystems with mixed-radix indexing.

    The basis index of a product state is
    ``sum_k occ[k] * prod(dims[k+1:])``: the first subsystem is the most
    significant digit. Construct through :func:`build_space`.
    """

    subsystems: tuple[SubsystemDef, ...]
    total_dim: int
    _positions: dict[str, int] = field(repr=False)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dimension for s in self.subsystems)

    @property
    def cavity_labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems if s.kind == "cavity")

    @property
    def atom_labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems if s.kind == "atom")

    def position(self, label: str) -> int:
        """Index of the labeled subsystem in the tensor order."""
        try:
            return self._positions[label]
        except KeyError:
            raise KeyError(f"no subsystem labeled {label!r}") from None

    def subsystem(self, label: str) -> SubsystemDef:
        return self.subsystems[self.position(label)]

    def index_of(self, occupations: tuple[int, ...]) -> int:
        """Basis index of the product state with the given per-subsystem occupations."""
        if len(occupations) != len(self.subsystems):
            raise ValueError("occupation tuple length does not match subsystem count")
        idx = 0
        for occ, sub in zip(occupations, self.subsystems):
            if not 0 <= occ < sub.dimension:
                raise ValueError(
                    f"occupation {occ} out of range for subsystem {sub.label!r}"
                )
            idx = idx * sub.dimension + occ
        return idx

    def occupations_of(self, index: int) -> tuple[int, ...]:
        """Per-subsystem occupations of a basis index (inverse of index_of)."""
        if not 0 <= index < self.total_dim:
            raise ValueError(f"basis index {index} out of range")
        occs = [0] * len(self.subsystems)
        for k in range(len(self.subsystems) - 1, -1, -1):
            dim = self.subsystems[k].dimension
            occs[k] = index % dim
            index //= dim
        return tuple(occs)

    def basis_label(self, index: int) -> str:
        """Readable label like '0,e,g,g' (Fock numbers, then level names)."""
        parts = []
        for occ, sub in zip(self.occupations_of(index), self.subsystems):
            parts.append(str(occ) if sub.kind == "cavity" else LEVEL_NAMES[occ])
        return ",".join(parts)

    def occupation_arrays(self) -> tuple[np.ndarray, ...]:
        """Occupation of every subsystem on the whole basis, one int array each.

        Entry k of the j-th array is the occupation of subsystem j in basis
        state k. Handy for building diagonal operators without loops.
        """
        dims = self.dims
        arrays = []
        for k, dim in enumerate(dims):
            left = int(np.prod(dims[:k], dtype=np.int64)) if k else 1
            right = int(np.prod(dims[k + 1:], dtype=np.int64)) if k + 1 < len(dims) else 1
            col = np.repeat(np.tile(np.arange(dim), left), right)
            arrays.append(col)
        return tuple(arrays)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex operator tied to a composite space.

    Hamiltonian-valued matrices are in angular frequency units (rad/ns);
    ladder and projector operators are dimensionless.
    """

    space: CompositeSpace
    entries: np.ndarray

    def __post_init__(self) -> None:
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("operator matrix must be square")
        if mat.shape[0] != self.space.total_dim:
            raise ValueError("operator dimension does not match the space")
        object.__setattr__(self, "entries", mat)

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.entries.conj().T)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.space.total_dim != self.space.total_dim:
            raise ValueError("cannot add operators on different spaces")
        return OperatorMatrix(self.space, self.entries + other.entries)

    def hermiticity_residual(self) -> float:
        """max |H - H+| / max |H| (0 for the zero matrix)."""
        scale = float(np.max(np.abs(self.entries)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.entries - self.entries.conj().T)) / scale)

    def require_hermitian(self, rtol: float = HERMITICITY_RTOL) -> None:
        res = self.hermiticity_residual()
        if res > rtol:
            raise ValueError(f"matrix is not Hermitian (residual {res:.3e})")


@dataclass(frozen=True)
class BareState:
    """Product eigenstate of the uncoupled Hamiltonian.

    Parameters
    ----------
    fock : tuple of int
        Photon number per cavity, in cavity declaration order.
    levels : tuple of str
        Level name per atom, in atom declaration order.
    energy : float
        Bare energy in angular frequency units (rad/ns), with the atomic
        ground level at zero.
    index : int
        Basis index in the composite space.
    """

    fock: tuple[int, ...]
    levels: tuple[str, ...]
    energy: float
    index: int

    def label(self) -> str:
        return ",".join([str(n) for n in self.fock] + list(self.levels))


def build_space(defs: list[SubsystemDef]) -> CompositeSpace:
    """Assemble a composite space from subsystem definitions.

    Parameters
    ----------
    defs : list of SubsystemDef
        At least one subsystem; labels must be unique. The given order is
        the tensor order (first factor most significant in the basis index).

    Returns
    -------
    CompositeSpace
    """
    if not defs:
        raise ValueError("a space needs at least one subsystem")
    positions: dict[str, int] = {}
    total = 1
    for k, sub in enumerate(defs):
        if sub.label in positions:
            raise ValueError(f"duplicate subsystem label {sub.label!r}")
        positions[sub.label] = k
        total *= sub.dimension
    return CompositeSpace(tuple(defs), total, positions)


def ladder(kind: str, dim: int) -> np.ndarray:
    """Truncated bosonic ladder operator as a dim x dim matrix.

    Parameters
    ----------
    kind : {'annihilate', 'create'}
    dim : int
        Fock truncation (n_max + 1), at least 2.

    Returns
    -------
    numpy.ndarray
        a with a|n> = sqrt(n)|n-1>, or its adjoint for 'create'.
    """
    if dim < 2:
        raise ValueError("ladder dimension must be at least 2")
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    if kind == "annihilate":
        return a
    if kind == "create":
        return a.conj().T
    raise ValueError(f"unknown ladder kind {kind!r}")


def transition_projector(j: int | str, k: int | str, dim: int) -> np.ndarray:
    """Matrix |j><k| on a dim-level atom, with a single unit entry at (j, k)."""
    jj = level_index(j, dim)
    kk = level_index(k, dim)
    op = np.zeros((dim, dim), dtype=complex)
    op[jj, kk] = 1.0
    return op


def embed(local_op: np.ndarray, target: str, space: CompositeSpace) -> OperatorMatrix:
    """Promote a single-subsystem operator to the composite space.

    Computes I x ... x local_op x ... x I with the factor placed at the
    target subsystem's position in the fixed tensor order.

    Parameters
    ----------
    local_op : numpy.ndarray
        Square matrix matching the target subsystem dimension.
    target : str
        Subsystem label.
    space : CompositeSpace

    Returns
    -------
    OperatorMatrix
    """
    pos = space.position(target)
    dims = space.dims
    op = np.asarray(local_op, dtype=complex)
    if op.shape != (dims[pos], dims[pos]):
        raise ValueError(
            f"operator shape {op.shape} does not match subsystem "
            f"{target!r} of dimension {dims[pos]}"
        )
    left = int(np.prod(dims[:pos], dtype=np.int64)) if pos else 1
    right = int(np.prod(dims[pos + 1:], dtype=np.int64)) if pos + 1 < len(dims) else 1
    full = np.kron(np.kron(np.eye(left), op), np.eye(right))
    return OperatorMatrix(space, full)


def total_excitation_operator(space: CompositeSpace) -> OperatorMatrix:
    """Diagonal operator counting photons plus 1 per |e> and 2 per |i>."""
    diag = np.zeros(space.total_dim)
    for sub, occ in zip(space.subsystems, space.occupation_arrays()):
        if sub.kind == "cavity":
            diag = diag + occ
        else:
            charge = np.array([LEVEL_EXCITATION[LEVEL_NAMES[v]] for v in range(sub.dimension)])
            diag = diag + charge[occ]
    return OperatorMatrix(space, np.diag(diag.astype(complex)))
