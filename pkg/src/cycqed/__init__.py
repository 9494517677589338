"""Simulator for circuit QED devices built from cyclic three-level atoms.

A device is a set of cavities and two- or three-level atoms whose every
pairwise transition may couple to a cavity. The package constructs the
bare and interaction Hamiltonians, sweeps spectra to locate avoided
crossings, evaluates effective multi-atom couplings by high-order
perturbative path sums, and integrates dissipative Lindblad dynamics.
"""

from .hilbert import (
    BareState,
    CompositeSpace,
    OperatorMatrix,
    SubsystemDef,
    build_space as build_space_from_defs,
    embed,
    ladder,
    total_excitation_operator,
    transition_projector,
)
from .device import (
    AtomSpec,
    CavitySpec,
    CouplingEdge,
    DeviceSpec,
    bare_state,
    build_bare_hamiltonian,
    build_interaction_full,
    build_interaction_rwa,
    build_space,
    get_parameter,
    parse_state_label,
    validate_dispersive,
    with_parameter,
)
from .config import ConfigError, load_device, save_device
from .spectral import (
    CrossingReport,
    SpectrumResult,
    diagonalize,
    find_resonance,
    sweep_spectrum,
)
from .perturbation import (
    CHI_KINDS,
    DispersiveShifts,
    EffectiveCoupling,
    PathSearchResult,
    PerturbationError,
    RejectedPath,
    TransitionPath,
    closed_form_chi,
    effective_coupling,
    enumerate_paths,
    matched_control_frequency,
    second_order_shifts,
)
from .dynamics import (
    CollapseChannel,
    DensityMatrix,
    IntegrationError,
    Observable,
    ObservableSet,
    TrajectoryResult,
    build_collapse_channels,
    entanglement_checkpoint,
    evolve,
    extract_period,
    lindblad_rhs,
    standard_observables,
)
from .scenarios import (
    EvolvePlan,
    MetricCheck,
    MetricSpec,
    Scenario,
    ScenarioReport,
    SweepPlan,
    load_scenario,
    load_scenario_file,
    locate_crossing,
    run_scenario,
    SCENARIO_NAMES,
    scenario_text,
)

__all__ = [
    "AtomSpec",
    "BareState",
    "CHI_KINDS",
    "CavitySpec",
    "CollapseChannel",
    "CompositeSpace",
    "ConfigError",
    "CouplingEdge",
    "CrossingReport",
    "DensityMatrix",
    "DeviceSpec",
    "DispersiveShifts",
    "EffectiveCoupling",
    "EvolvePlan",
    "IntegrationError",
    "MetricCheck",
    "MetricSpec",
    "Observable",
    "ObservableSet",
    "OperatorMatrix",
    "PathSearchResult",
    "PerturbationError",
    "RejectedPath",
    "SCENARIO_NAMES",
    "Scenario",
    "ScenarioReport",
    "SpectrumResult",
    "SubsystemDef",
    "SweepPlan",
    "TrajectoryResult",
    "TransitionPath",
    "bare_state",
    "build_bare_hamiltonian",
    "build_collapse_channels",
    "build_interaction_full",
    "build_interaction_rwa",
    "build_space",
    "build_space_from_defs",
    "closed_form_chi",
    "diagonalize",
    "effective_coupling",
    "embed",
    "entanglement_checkpoint",
    "enumerate_paths",
    "evolve",
    "extract_period",
    "find_resonance",
    "get_parameter",
    "ladder",
    "lindblad_rhs",
    "load_device",
    "load_scenario",
    "load_scenario_file",
    "locate_crossing",
    "matched_control_frequency",
    "parse_state_label",
    "run_scenario",
    "save_device",
    "scenario_text",
    "second_order_shifts",
    "standard_observables",
    "sweep_spectrum",
    "total_excitation_operator",
    "transition_projector",
    "validate_dispersive",
    "with_parameter",
]

__version__ = "0.1.0"
