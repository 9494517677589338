"""Device descriptions and Hamiltonian assembly.

A device is a declarative list of cavities, atoms, and coupling edges.
Frequencies are entered as ordinary frequencies (GHz for transition and
cavity frequencies, MHz for couplings and rates), matching how hardware
parameters are usually quoted; all internal math runs in angular frequency
(rad/ns) with time in ns. Devices with ``unit_omega0`` set are dimensionless:
every number is a multiple of a reference frequency omega0 and is used as-is.

The atomic ground level sits at zero energy by convention. Atoms are cyclic
three-level systems (every pairwise transition couples to a cavity), or
plain two-level systems when ``omega_i`` is omitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .hilbert import (
    BareState,
    CompositeSpace,
    OperatorMatrix,
    SubsystemDef,
    build_space as _build_space,
    embed,
    ladder,
    transition_projector,
)

TWO_PI = 2.0 * math.pi

# Transition names in the order used throughout reports and configs.
TRANSITIONS = ("ge", "gi", "ei")

# Dispersive-regime warning threshold on g / |detuning|.
DISPERSIVE_THRESHOLD = 0.2


@dataclass(frozen=True)
class AtomSpec:
    """A two- or three-level atom.

    Parameters
    ----------
    label : str
    omega_e : float
        g-e transition frequency (GHz, or omega0 units).
    omega_i : float or None
        g-i transition frequency; None declares a two-level atom.
    gamma_ge, gamma_gi, gamma_ei : float
        Relaxation rates (MHz, or omega0 units).
    """

    label: str
    omega_e: float
    omega_i: float | None = None
    gamma_ge: float = 0.0
    gamma_gi: float = 0.0
    gamma_ei: float = 0.0

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("atom label must be nonempty")
        if self.omega_e <= 0:
            raise ValueError(f"atom {self.label!r}: omega_e must be positive")
        if self.omega_i is not None and self.omega_i <= self.omega_e:
            raise ValueError(f"atom {self.label!r}: omega_i must exceed omega_e")
        for name in ("gamma_ge", "gamma_gi", "gamma_ei"):
            if getattr(self, name) < 0:
                raise ValueError(f"atom {self.label!r}: {name} must be nonnegative")
        if self.omega_i is None and (self.gamma_gi or self.gamma_ei):
            raise ValueError(
                f"atom {self.label!r}: two-level atoms cannot have gi/ei rates"
            )

    @property
    def levels(self) -> int:
        return 2 if self.omega_i is None else 3


@dataclass(frozen=True)
class CavitySpec:
    """A single cavity mode with Fock truncation n_max (dimension n_max + 1)."""

    label: str
    omega_c: float
    kappa: float = 0.0
    n_max: int = 5

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("cavity label must be nonempty")
        if self.omega_c <= 0:
            raise ValueError(f"cavity {self.label!r}: omega_c must be positive")
        if self.kappa < 0:
            raise ValueError(f"cavity {self.label!r}: kappa must be nonnegative")
        if self.n_max < 2:
            raise ValueError(f"cavity {self.label!r}: n_max must be at least 2")


@dataclass(frozen=True)
class CouplingEdge:
    """Couplings between one atom and one cavity, one value per transition.

    A single value is stored per unordered level pair (the coupling matrix
    is symmetric). Two-level atoms use only g_ge.
    """

    atom: str
    cavity: str
    g_ge: float = 0.0
    g_gi: float = 0.0
    g_ei: float = 0.0

    def __post_init__(self) -> None:
        for name in ("g_ge", "g_gi", "g_ei"):
            if getattr(self, name) < 0:
                raise ValueError(f"edge {self.atom}-{self.cavity}: {name} must be >= 0")

    def g(self, transition: str) -> float:
        if transition not in TRANSITIONS:
            raise ValueError(f"unknown transition {transition!r}")
        return getattr(self, f"g_{transition}")


@dataclass(frozen=True)
class DeviceSpec:
    """Full device: cavities, atoms, coupling topology, and unit convention.

    Invariants enforced at construction: labels unique across the whole
    device, every edge references existing subsystems, at most one edge per
    (atom, cavity) pair, two-level atoms carry no gi/ei couplings, and the
    coupling graph is connected.
    """

    cavities: tuple[CavitySpec, ...]
    atoms: tuple[AtomSpec, ...]
    edges: tuple[CouplingEdge, ...]
    unit_omega0: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "cavities", tuple(self.cavities))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.cavities and not self.atoms:
            raise ValueError("device needs at least one cavity or atom")
        labels = [c.label for c in self.cavities] + [a.label for a in self.atoms]
        if len(set(labels)) != len(labels):
            raise ValueError("cavity and atom labels must be unique device-wide")
        atom_by_label = {a.label: a for a in self.atoms}
        cavity_labels = {c.label for c in self.cavities}
        seen_pairs = set()
        for edge in self.edges:
            if edge.atom not in atom_by_label:
                raise ValueError(f"edge references unknown atom {edge.atom!r}")
            if edge.cavity not in cavity_labels:
                raise ValueError(f"edge references unknown cavity {edge.cavity!r}")
            pair = (edge.atom, edge.cavity)
            if pair in seen_pairs:
                raise ValueError(f"duplicate edge for pair {pair}")
            seen_pairs.add(pair)
            if atom_by_label[edge.atom].levels == 2 and (edge.g_gi or edge.g_ei):
                raise ValueError(
                    f"edge {pair}: two-level atom cannot couple gi/ei transitions"
                )
        self._check_connected()

    def _check_connected(self) -> None:
        nodes = {c.label for c in self.cavities} | {a.label for a in self.atoms}
        if len(nodes) <= 1:
            return
        neighbors: dict[str, set[str]] = {n: set() for n in nodes}
        for edge in self.edges:
            neighbors[edge.atom].add(edge.cavity)
            neighbors[edge.cavity].add(edge.atom)
        stack = [next(iter(nodes))]
        seen = set(stack)
        while stack:
            for other in neighbors[stack.pop()]:
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        if seen != nodes:
            missing = sorted(nodes - seen)
            raise ValueError(f"coupling graph is disconnected (unreachable: {missing})")

    # -- unit conversions ---------------------------------------------------

    def freq_to_angular(self, f: float) -> float:
        """GHz to rad/ns; identity for dimensionless (omega0-unit) devices."""
        return f if self.unit_omega0 else TWO_PI * f

    def rate_to_angular(self, r: float) -> float:
        """MHz to rad/ns; identity for dimensionless devices."""
        return r if self.unit_omega0 else TWO_PI * 1e-3 * r

    def angular_to_freq(self, w: float) -> float:
        """rad/ns back to GHz; identity for dimensionless devices."""
        return w if self.unit_omega0 else w / TWO_PI

    def angular_to_rate(self, w: float) -> float:
        """rad/ns back to MHz; identity for dimensionless devices."""
        return w if self.unit_omega0 else 1e3 * w / TWO_PI

    # -- lookups ------------------------------------------------------------

    def atom(self, label: str) -> AtomSpec:
        for a in self.atoms:
            if a.label == label:
                return a
        raise KeyError(f"no atom labeled {label!r}")

    def cavity(self, label: str) -> CavitySpec:
        for c in self.cavities:
            if c.label == label:
                return c
        raise KeyError(f"no cavity labeled {label!r}")

    def edges_of_atom(self, label: str) -> tuple[CouplingEdge, ...]:
        return tuple(e for e in self.edges if e.atom == label)

    def level_energy(self, atom_label: str, level: str) -> float:
        """Bare energy of an atomic level in rad/ns (ground level is 0)."""
        atom = self.atom(atom_label)
        if level == "g":
            return 0.0
        if level == "e":
            return self.freq_to_angular(atom.omega_e)
        if level == "i":
            if atom.omega_i is None:
                raise ValueError(f"atom {atom_label!r} has no i level")
            return self.freq_to_angular(atom.omega_i)
        raise ValueError(f"unknown level {level!r}")


def build_space(dev: DeviceSpec) -> CompositeSpace:
    """Composite space of a device: cavities first, then atoms, declaration order."""
    defs = [
        SubsystemDef("cavity", c.n_max + 1, c.label) for c in dev.cavities
    ] + [
        SubsystemDef("atom", a.levels, a.label) for a in dev.atoms
    ]
    return _build_space(defs)


def bare_energy_vector(dev: DeviceSpec, space: CompositeSpace) -> np.ndarray:
    """Bare energy of every basis state (rad/ns), ordered by basis index."""
    energy = np.zeros(space.total_dim)
    occs = space.occupation_arrays()
    for sub, occ in zip(space.subsystems, occs):
        if sub.kind == "cavity":
            energy += dev.freq_to_angular(dev.cavity(sub.label).omega_c) * occ
        else:
            per_level = np.array(
                [dev.level_energy(sub.label, name) for name in ("g", "e", "i")[: sub.dimension]]
            )
            energy += per_level[occ]
    return energy


def bare_state(
    dev: DeviceSpec,
    space: CompositeSpace,
    fock: tuple[int, ...],
    levels: tuple[str, ...],
) -> BareState:
    """Construct a labeled product state with its bare energy filled in."""
    if len(fock) != len(dev.cavities):
        raise ValueError("fock tuple length must match the cavity count")
    if len(levels) != len(dev.atoms):
        raise ValueError("levels tuple length must match the atom count")
    occs = []
    for n, cav in zip(fock, dev.cavities):
        if not 0 <= n <= cav.n_max:
            raise ValueError(f"photon number {n} outside cavity {cav.label!r} truncation")
        occs.append(int(n))
    energy = sum(dev.freq_to_angular(c.omega_c) * n for n, c in zip(fock, dev.cavities))
    for name, atom in zip(levels, dev.atoms):
        if name not in ("g", "e", "i")[: atom.levels]:
            raise ValueError(f"level {name!r} invalid for atom {atom.label!r}")
        occs.append(("g", "e", "i").index(name))
        energy += dev.level_energy(atom.label, name)
    index = space.index_of(tuple(occs))
    return BareState(tuple(int(n) for n in fock), tuple(levels), float(energy), index)


def parse_state_label(dev: DeviceSpec, space: CompositeSpace, text: str) -> BareState:
    """Parse a compact state label like '0,e,g,g' (cavities first)."""
    parts = [p.strip() for p in text.split(",")]
    n_cav = len(dev.cavities)
    if len(parts) != n_cav + len(dev.atoms):
        raise ValueError(
            f"state label {text!r} needs {n_cav} photon numbers and "
            f"{len(dev.atoms)} atom levels"
        )
    try:
        fock = tuple(int(p) for p in parts[:n_cav])
    except ValueError as exc:
        raise ValueError(f"bad photon number in state label {text!r}") from exc
    return bare_state(dev, space, fock, tuple(parts[n_cav:]))


def build_bare_hamiltonian(dev: DeviceSpec, space: CompositeSpace) -> OperatorMatrix:
    """Uncoupled Hamiltonian: photon energy plus atomic level energies.

    Diagonal in the bare basis; the eigenvalue on each product state equals
    that state's bare energy.
    """
    return OperatorMatrix(space, np.diag(bare_energy_vector(dev, space).astype(complex)))


def _lowering_combo(dev: DeviceSpec, edge: CouplingEdge, dim: int) -> np.ndarray:
    """g_ge|g><e| + g_ei|e><i| + g_gi|g><i| for one edge (rad/ns units)."""
    op = dev.rate_to_angular(edge.g_ge) * transition_projector("g", "e", dim)
    if dim == 3:
        op = op + dev.rate_to_angular(edge.g_ei) * transition_projector("e", "i", dim)
        op = op + dev.rate_to_angular(edge.g_gi) * transition_projector("g", "i", dim)
    return op


def build_interaction_rwa(dev: DeviceSpec, space: CompositeSpace) -> OperatorMatrix:
    """Interaction Hamiltonian keeping only photon-creation/atom-lowering pairs.

    Each edge contributes a+ (g_ge|g><e| + g_ei|e><i| + g_gi|g><i|) plus the
    adjoint. With cyclic three-level atoms this does not conserve the total
    excitation number: the g-i term pairs one created photon with an atomic
    drop worth two excitation quanta.
    """
    total = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for edge in dev.edges:
        dim = space.subsystem(edge.atom).dimension
        a_dag = embed(ladder("create", space.subsystem(edge.cavity).dimension), edge.cavity, space)
        lower = embed(_lowering_combo(dev, edge, dim), edge.atom, space)
        term = a_dag.entries @ lower.entries
        total += term + term.conj().T
    return OperatorMatrix(space, total)


def build_interaction_full(dev: DeviceSpec, space: CompositeSpace) -> OperatorMatrix:
    """Interaction Hamiltonian with counter-rotating terms retained.

    Each edge contributes (a + a+) g_jk (|j><k| + |k><j|) summed over the
    coupled transitions. Diagnostics only; dynamics defaults to the
    rotating-wave form.
    """
    total = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for edge in dev.edges:
        dim = space.subsystem(edge.atom).dimension
        cav_dim = space.subsystem(edge.cavity).dimension
        a_plus_adag = embed(
            ladder("annihilate", cav_dim) + ladder("create", cav_dim), edge.cavity, space
        )
        combo = _lowering_combo(dev, edge, dim)
        flip = embed(combo + combo.conj().T, edge.atom, space)
        total += a_plus_adag.entries @ flip.entries
    return OperatorMatrix(space, total)


@dataclass(frozen=True)
class DispersiveRatio:
    """g / |detuning| for one edge and transition; flagged when too large."""

    atom: str
    cavity: str
    transition: str
    ratio: float
    flagged: bool


def validate_dispersive(
    dev: DeviceSpec, threshold: float = DISPERSIVE_THRESHOLD
) -> list[DispersiveRatio]:
    """Report g/|detuning| for every edge and transition.

    The detuning of transition j-k against cavity s is
    ``| |omega_j - omega_k| - omega_s |``. Entries with ratio above the
    threshold are flagged; an exact resonance reports an infinite ratio.
    """
    report = []
    for edge in dev.edges:
        atom = dev.atom(edge.atom)
        omega_c = dev.freq_to_angular(dev.cavity(edge.cavity).omega_c)
        freqs = {"ge": dev.level_energy(atom.label, "e")}
        if atom.levels == 3:
            omega_i = dev.level_energy(atom.label, "i")
            freqs["gi"] = omega_i
            freqs["ei"] = omega_i - freqs["ge"]
        for transition, omega_t in freqs.items():
            g = dev.rate_to_angular(edge.g(transition))
            delta = abs(omega_t - omega_c)
            if g == 0.0:
                ratio = 0.0
            elif delta == 0.0:
                ratio = math.inf
            else:
                ratio = g / delta
            report.append(
                DispersiveRatio(edge.atom, edge.cavity, transition, ratio, ratio > threshold)
            )
    return report


# -- dotted parameter paths -------------------------------------------------

_ATOM_FIELDS = ("omega_e", "omega_i", "gamma_ge", "gamma_gi", "gamma_ei")
_CAVITY_FIELDS = ("omega_c", "kappa", "n_max")
_EDGE_FIELDS = ("g_ge", "g_gi", "g_ei")


def _resolve_path(dev: DeviceSpec, path: str):
    """Split a dotted path into (kind, object index, field name)."""
    parts = path.split(".")
    if len(parts) == 3 and parts[0] == "atoms":
        _, label, fieldname = parts
        if fieldname not in _ATOM_FIELDS:
            raise ValueError(f"unknown atom field {fieldname!r} in {path!r}")
        for k, a in enumerate(dev.atoms):
            if a.label == label:
                return ("atoms", k, fieldname)
        raise ValueError(f"no atom labeled {label!r} in {path!r}")
    if len(parts) == 3 and parts[0] == "cavities":
        _, label, fieldname = parts
        if fieldname not in _CAVITY_FIELDS:
            raise ValueError(f"unknown cavity field {fieldname!r} in {path!r}")
        for k, c in enumerate(dev.cavities):
            if c.label == label:
                return ("cavities", k, fieldname)
        raise ValueError(f"no cavity labeled {label!r} in {path!r}")
    if len(parts) == 4 and parts[0] == "edges":
        _, atom, cavity, fieldname = parts
        if fieldname not in _EDGE_FIELDS:
            raise ValueError(f"unknown edge field {fieldname!r} in {path!r}")
        for k, e in enumerate(dev.edges):
            if e.atom == atom and e.cavity == cavity:
                return ("edges", k, fieldname)
        raise ValueError(f"no edge {atom}-{cavity} in {path!r}")
    raise ValueError(
        f"parameter path {path!r} must look like atoms.<label>.<field>, "
        "cavities.<label>.<field>, or edges.<atom>.<cavity>.<field>"
    )


def get_parameter(dev: DeviceSpec, path: str) -> float:
    """Read a scalar device field by dotted path (e.g. 'atoms.1.omega_e')."""
    group, k, fieldname = _resolve_path(dev, path)
    value = getattr(getattr(dev, group)[k], fieldname)
    if value is None:
        raise ValueError(f"field {path!r} is not set on this device")
    return value


def with_parameter(dev: DeviceSpec, path: str, value: float) -> DeviceSpec:
    """Return a copy of the device with one scalar field replaced."""
    group, k, fieldname = _resolve_path(dev, path)
    items = list(getattr(dev, group))
    if fieldname == "n_max":
        value = int(value)
    items[k] = replace(items[k], **{fieldname: value})
    return replace(dev, **{group: tuple(items)})
