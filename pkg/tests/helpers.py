"""Shared builders for the test suite: the bundled three-bus case and random
connected instances with observable meter sets."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from gridse import (
    Branch,
    Bus,
    MeasurementConfig,
    MeasurementSpec,
    NetworkModel,
    build_admittance,
    dc_jacobian,
    parse_case,
)

CASES_DIR = Path(__file__).parents[1] / "cases"
THREE_BUS = CASES_DIR / "three_bus.json"

SCENARIO_FILES = (
    CASES_DIR / "base_case.json",
    CASES_DIR / "gross_errors.json",
    CASES_DIR / "stealth_small.json",
    CASES_DIR / "stealth_large.json",
)


def load_three_bus():
    parsed = parse_case(THREE_BUS.read_text())
    admittance = build_admittance(parsed.network)
    h = dc_jacobian(parsed.network, admittance, parsed.config)
    return parsed, admittance, h


def random_network(rng: np.random.Generator, n: int, lossy: bool = False,
                   shunts: bool = False) -> NetworkModel:
    """Connected network on n buses: a random spanning tree plus extras."""
    ref = int(rng.integers(1, n + 1))
    buses = tuple(Bus(id=i, is_reference=(i == ref)) for i in range(1, n + 1))
    edges = set()
    branches = []

    def add_branch(i, j):
        edges.add(frozenset((i, j)))
        branches.append(Branch(
            from_bus=i,
            to_bus=j,
            resistance_r=float(rng.uniform(0.01, 0.08)) if lossy else 0.0,
            reactance_x=float(rng.uniform(0.1, 0.5)),
            shunt_susceptance_bs=float(rng.uniform(0.0, 0.04)) if shunts else 0.0,
        ))

    for i in range(2, n + 1):
        add_branch(int(rng.integers(1, i)), i)
    for _ in range(n // 2):
        i, j = rng.choice(n, size=2, replace=False) + 1
        if frozenset((int(i), int(j))) not in edges:
            add_branch(int(i), int(j))
    return NetworkModel(buses=buses, branches=tuple(branches))


def dc_meter_candidates(network: NetworkModel, sigma: float = 0.01):
    """Every linear-model meter: both flow orientations plus all injections."""
    specs = []
    for br in network.branches:
        specs.append(MeasurementSpec(kind="flow_p", from_bus=br.from_bus,
                                     to_bus=br.to_bus, sigma=sigma))
        specs.append(MeasurementSpec(kind="flow_p", from_bus=br.to_bus,
                                     to_bus=br.from_bus, sigma=sigma))
    for bus in network.buses:
        specs.append(MeasurementSpec(kind="injection_p", bus=bus.id, sigma=sigma))
    return specs


def random_observable_config(rng: np.random.Generator, network: NetworkModel,
                             min_redundancy: int = 1,
                             exact_redundancy: int | None = None,
                             ) -> MeasurementConfig:
    """Random meter subset with full angle rank and at least the requested
    redundancy (or exactly ``exact_redundancy``); resamples until observable."""
    candidates = dc_meter_candidates(network)
    state_dim = network.n_buses - 1
    admittance = build_admittance(network)
    while True:
        if exact_redundancy is not None:
            m = state_dim + exact_redundancy
        else:
            m = state_dim + min_redundancy + int(rng.integers(0, 3))
        m = min(m, len(candidates))
        picks = rng.choice(len(candidates), size=m, replace=False)
        config = MeasurementConfig(specs=tuple(candidates[i] for i in picks))
        h = dc_jacobian(network, admittance, config)
        if np.linalg.matrix_rank(h) == state_dim:
            return config


def full_ac_config(network: NetworkModel, sigma: float = 0.01) -> MeasurementConfig:
    """Flows (p and q, both ends), injections (p and q), and voltages."""
    specs = []
    for br in network.branches:
        for i, j in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
            specs.append(MeasurementSpec(kind="flow_p", from_bus=i, to_bus=j, sigma=sigma))
            specs.append(MeasurementSpec(kind="flow_q", from_bus=i, to_bus=j, sigma=sigma))
    for bus in network.buses:
        specs.append(MeasurementSpec(kind="injection_p", bus=bus.id, sigma=sigma))
        specs.append(MeasurementSpec(kind="injection_q", bus=bus.id, sigma=sigma))
        specs.append(MeasurementSpec(kind="voltage_magnitude", bus=bus.id, sigma=sigma))
    return MeasurementConfig(specs=tuple(specs))


def random_ac_state(rng: np.random.Generator, network: NetworkModel,
                    angle_span: float = 0.1, mag_span: float = 0.05):
    from gridse import StateVector

    angles = {b.id: float(rng.uniform(-angle_span, angle_span))
              for b in network.buses}
    angles[network.reference_bus] = 0.0
    mags = {b.id: float(rng.uniform(1.0 - mag_span, 1.0 + mag_span))
            for b in network.buses}
    return StateVector(angles=angles, magnitudes=mags)
