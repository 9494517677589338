"""Shared device builders for the test suite.

Devices are constructed here directly from the dataclasses, independent of
the bundled scenario files, so file parsing and scenario presets can be
cross-checked against these definitions.

This file also collects the one-line verdicts produced by the acceptance
tests and prints them as a block at the end of the pytest run.
"""

from __future__ import annotations

from cycqed.device import AtomSpec, CavitySpec, CouplingEdge, DeviceSpec

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the test summary."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_three_atom_device(n_max: int = 5) -> DeviceSpec:
    """One cavity, one control qutrit, two identical target qutrits."""
    return DeviceSpec(
        cavities=(CavitySpec("c", 6.00, kappa=0.01, n_max=n_max),),
        atoms=(
            AtomSpec("1", 7.966, 12.0, gamma_ge=0.01, gamma_gi=0.01, gamma_ei=0.015),
            AtomSpec("2", 4.0, 7.5, gamma_ge=0.01, gamma_gi=0.01, gamma_ei=0.015),
            AtomSpec("3", 4.0, 7.5, gamma_ge=0.01, gamma_gi=0.01, gamma_ei=0.015),
        ),
        edges=(
            CouplingEdge("1", "c", g_ge=150.0, g_gi=150.0, g_ei=210.0),
            CouplingEdge("2", "c", g_ge=150.0, g_gi=150.0, g_ei=210.0),
            CouplingEdge("3", "c", g_ge=150.0, g_gi=150.0, g_ei=210.0),
        ),
    )


def make_four_atom_device(n_max: int = 5) -> DeviceSpec:
    """One cavity, one control qutrit, three identical target qutrits."""
    target = dict(gamma_ge=0.01, gamma_gi=0.01, gamma_ei=0.015)
    return DeviceSpec(
        cavities=(CavitySpec("c", 6.00, kappa=0.01, n_max=n_max),),
        atoms=(
            AtomSpec("1", 8.9665, 21.0, **target),
            AtomSpec("2", 3.0, 7.0, **target),
            AtomSpec("3", 3.0, 7.0, **target),
            AtomSpec("4", 3.0, 7.0, **target),
        ),
        edges=(
            CouplingEdge("1", "c", g_ge=180.0, g_gi=180.0, g_ei=210.0),
            CouplingEdge("2", "c", g_ge=150.0, g_gi=150.0, g_ei=200.0),
            CouplingEdge("3", "c", g_ge=150.0, g_gi=150.0, g_ei=200.0),
            CouplingEdge("4", "c", g_ge=150.0, g_gi=150.0, g_ei=200.0),
        ),
    )


def make_two_cavity_device(n_max: int = 5) -> DeviceSpec:
    """Two cavities bridged by a qutrit, a two-level atom on each far side."""
    return DeviceSpec(
        cavities=(
            CavitySpec("L", 6.00, kappa=0.01, n_max=n_max),
            CavitySpec("R", 6.00, kappa=0.01, n_max=n_max),
        ),
        atoms=(
            AtomSpec("1", 7.945, None, gamma_ge=0.01),
            AtomSpec("2", 4.0, 7.5, gamma_ge=0.01, gamma_gi=0.01, gamma_ei=0.015),
            AtomSpec("3", 4.0, None, gamma_ge=0.01),
        ),
        edges=(
            CouplingEdge("1", "L", g_ge=180.0),
            CouplingEdge("2", "L", g_ge=150.0, g_gi=150.0, g_ei=210.0),
            CouplingEdge("2", "R", g_ge=150.0, g_gi=150.0, g_ei=210.0),
            CouplingEdge("3", "R", g_ge=180.0),
        ),
    )


def make_crossing_sweep_device(omega_e1: float = 1.05, n_max: int = 5) -> DeviceSpec:
    """Dimensionless three-qutrit device used for the avoided-crossing sweep."""
    return DeviceSpec(
        cavities=(CavitySpec("c", 0.75, kappa=0.0, n_max=n_max),),
        atoms=(
            AtomSpec("1", omega_e1, 1.55),
            AtomSpec("2", 0.5, 0.9),
            AtomSpec("3", 0.55, 1.0),
        ),
        edges=(
            CouplingEdge("1", "c", g_ge=0.02, g_gi=0.02, g_ei=0.025),
            CouplingEdge("2", "c", g_ge=0.02, g_gi=0.02, g_ei=0.025),
            CouplingEdge("3", "c", g_ge=0.02, g_gi=0.02, g_ei=0.025),
        ),
        unit_omega0=True,
    )
