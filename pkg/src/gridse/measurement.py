"""Meter models: h(x) evaluation, Jacobians, and synthetic readings.

Two modes share one meter vocabulary:

* ``dc``: angles are the only states, voltages are 1 pu, branches are purely
  reactive; active flows and injections are linear in the angles and the
  Jacobian is constant. Supported kinds: ``flow_p``, ``injection_p``.
* ``ac``: states are all non-reference angles followed by every bus voltage
  magnitude (dimension 2n - 1); flows, injections, current and voltage
  magnitudes are the usual pi-model trigonometric functions of the state.

State ordering everywhere: angles of non-reference buses ascending by id,
then (in ac mode) voltage magnitudes of all buses ascending by id. Meter
vectors are plain float arrays index-aligned with the MeasurementConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    DanglingReference,
    DimensionMismatch,
    MissingMagnitudes,
    UnsupportedKindForDC,
)
from .network import AdmittanceMatrix, Branch, MeasurementConfig, NetworkModel

DC_KINDS = ("flow_p", "injection_p")


@dataclass(frozen=True)
class StateVector:
    """Bus angles (radians) and, in ac mode, voltage magnitudes (pu).

    ``angles`` must cover every bus and hold exactly 0.0 at the reference.
    ``magnitudes`` is None for an angles-only (dc) state.
    """

    angles: Mapping[int, float]
    magnitudes: Mapping[int, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "angles", dict(self.angles))
        if self.magnitudes is not None:
            object.__setattr__(self, "magnitudes", dict(self.magnitudes))


def state_dimension(network: NetworkModel, mode: str) -> int:
    n = network.n_buses
    return n - 1 if mode == "dc" else 2 * n - 1


def state_order(network: NetworkModel, mode: str) -> tuple[tuple[str, int], ...]:
    """Free-variable labels, in column order: ('angle', bus) then ('mag', bus)."""
    _check_mode(mode)
    labels = [("angle", b) for b in network.non_reference_ids()]
    if mode == "ac":
        labels += [("mag", b.id) for b in sorted(network.buses, key=lambda b: b.id)]
    return tuple(labels)


def _check_mode(mode: str):
    if mode not in ("dc", "ac"):
        raise ValueError(f"mode must be 'dc' or 'ac', got {mode!r}")


def _check_state(network: NetworkModel, state: StateVector, mode: str):
    for b in network.buses:
        if b.id not in state.angles:
            raise ValueError(f"state has no angle for bus {b.id}")
    ref = network.reference_bus
    if state.angles[ref] != 0.0:
        raise ValueError(f"reference bus {ref} angle must be exactly 0")
    if mode == "ac":
        if state.magnitudes is None:
            raise MissingMagnitudes("ac state requires voltage magnitudes")
        for b in network.buses:
            if b.id not in state.magnitudes:
                raise MissingMagnitudes(f"state has no magnitude for bus {b.id}")


def free_vector(network: NetworkModel, state: StateVector, mode: str) -> np.ndarray:
    """Flatten a state into the free-variable column ordering."""
    _check_mode(mode)
    _check_state(network, state, mode)
    parts = [state.angles[b] for b in network.non_reference_ids()]
    if mode == "ac":
        parts += [state.magnitudes[b.id]
                  for b in sorted(network.buses, key=lambda b: b.id)]
    return np.array(parts, dtype=float)


def state_from_free(network: NetworkModel, x: np.ndarray, mode: str) -> StateVector:
    """Inverse of :func:`free_vector`; pins the reference angle at 0."""
    _check_mode(mode)
    x = np.asarray(x, dtype=float)
    k = state_dimension(network, mode)
    if x.shape != (k,):
        raise DimensionMismatch(f"state vector must have length {k}, got {x.shape}")
    non_ref = network.non_reference_ids()
    angles = {network.reference_bus: 0.0}
    angles.update({b: float(x[i]) for i, b in enumerate(non_ref)})
    if mode == "dc":
        return StateVector(angles=angles)
    mags = {b.id: float(x[len(non_ref) + i])
            for i, b in enumerate(sorted(network.buses, key=lambda b: b.id))}
    return StateVector(angles=angles, magnitudes=mags)


def flat_state(network: NetworkModel, mode: str = "ac") -> StateVector:
    """All angles 0; all magnitudes 1 in ac mode."""
    _check_mode(mode)
    angles = {b.id: 0.0 for b in network.buses}
    if mode == "dc":
        return StateVector(angles=angles)
    return StateVector(angles=angles,
                       magnitudes={b.id: 1.0 for b in network.buses})


def _column_index(network: NetworkModel, mode: str) -> dict[tuple[str, int], int]:
    return {label: i for i, label in enumerate(state_order(network, mode))}


def _meter_branch(network: NetworkModel, spec) -> Branch:
    branch = network.branch_between(spec.from_bus, spec.to_bus)
    if branch is None:
        raise DanglingReference(
            f"no branch joins {spec.from_bus} and {spec.to_bus}"
        )
    return branch


def dc_jacobian(network: NetworkModel, admittance: AdmittanceMatrix,
                config: MeasurementConfig) -> np.ndarray:
    """Constant linear meter matrix, m x (n-1).

    A flow meter on i->j contributes +1/X at the angle of i and -1/X at the
    angle of j (reference columns dropped), so a reversed meter is the exact
    negation. An injection row is the sum of the flow rows of every branch
    leaving that bus. Resistance and shunts play no role here.
    """
    cols = _column_index(network, "dc")
    m = len(config.specs)
    h = np.zeros((m, state_dimension(network, "dc")))
    for row, spec in enumerate(config.specs):
        if spec.kind == "flow_p":
            branch = _meter_branch(network, spec)
            _add_dc_flow(h, row, cols, spec.from_bus, spec.to_bus,
                         branch.reactance_x)
        elif spec.kind == "injection_p":
            for branch, other in network.branches_at(spec.bus):
                _add_dc_flow(h, row, cols, spec.bus, other, branch.reactance_x)
        else:
            raise UnsupportedKindForDC(
                f"{spec.kind} has no linear model (row {row})"
            )
    return h


def _add_dc_flow(h, row, cols, i, j, reactance):
    coeff = 1.0 / reactance
    if ("angle", i) in cols:
        h[row, cols[("angle", i)]] += coeff
    if ("angle", j) in cols:
        h[row, cols[("angle", j)]] -= coeff


def _flow_with_grad(branch: Branch, vi: float, vj: float, dij: float):
    """Active/reactive flow leaving the i side of a branch, plus partials.

    Returns (p, q, dp, dq) with the gradients ordered (d_i, d_j, v_i, v_j):

        p =  vi^2 (gs + g) - vi vj (g cos dij + b sin dij)
        q = -vi^2 (bs + b) - vi vj (g sin dij - b cos dij)

    where g + jb is the series admittance and gs + j*bs the i-end shunt.
    """
    g, b = branch.series_admittance
    gs = branch.shunt_conductance_gs
    bs = branch.shunt_susceptance_bs
    c, s = math.cos(dij), math.sin(dij)
    p = vi * vi * (gs + g) - vi * vj * (g * c + b * s)
    q = -vi * vi * (bs + b) - vi * vj * (g * s - b * c)
    dp = np.array([
        vi * vj * (g * s - b * c),
        -vi * vj * (g * s - b * c),
        2.0 * vi * (gs + g) - vj * (g * c + b * s),
        -vi * (g * c + b * s),
    ])
    dq = np.array([
        -vi * vj * (g * c + b * s),
        vi * vj * (g * c + b * s),
        -2.0 * vi * (bs + b) - vj * (g * s - b * c),
        -vi * (g * s - b * c),
    ])
    return p, q, dp, dq


def _eval_rows(network: NetworkModel, state: StateVector,
               config: MeasurementConfig, want_grad: bool):
    """Shared traversal for h(x) and its Jacobian in ac mode."""
    _check_state(network, state, "ac")
    angles = state.angles
    mags = state.magnitudes
    cols = _column_index(network, "ac")
    m = len(config.specs)
    k = state_dimension(network, "ac")
    values = np.zeros(m)
    jac = np.zeros((m, k)) if want_grad else None

    def scatter(row, i, j, grad):
        for label, dv in zip((("angle", i), ("angle", j), ("mag", i), ("mag", j)),
                             grad):
            if label in cols:
                jac[row, cols[label]] += dv

    for row, spec in enumerate(config.specs):
        if spec.kind == "voltage_magnitude":
            values[row] = mags[spec.bus]
            if want_grad:
                jac[row, cols[("mag", spec.bus)]] = 1.0
            continue
        if spec.kind in ("flow_p", "flow_q", "current_magnitude"):
            branch = _meter_branch(network, spec)
            i, j = spec.from_bus, spec.to_bus
            p, q, dp, dq = _flow_with_grad(branch, mags[i], mags[j],
                                           angles[i] - angles[j])
            if spec.kind == "flow_p":
                values[row] = p
                if want_grad:
                    scatter(row, i, j, dp)
            elif spec.kind == "flow_q":
                values[row] = q
                if want_grad:
                    scatter(row, i, j, dq)
            else:
                apparent = math.hypot(p, q)
                values[row] = apparent / mags[i]
                if want_grad:
                    if apparent == 0.0:
                        continue  # |S| is not differentiable at 0; leave zeros
                    di = (p * dp + q * dq) / (apparent * mags[i])
                    di[2] -= apparent / (mags[i] * mags[i])
                    scatter(row, i, j, di)
            continue
        # injection_p / injection_q: the sum of flows leaving the bus
        i = spec.bus
        for branch, j in network.branches_at(i):
            p, q, dp, dq = _flow_with_grad(branch, mags[i], mags[j],
                                           angles[i] - angles[j])
            if spec.kind == "injection_p":
                values[row] += p
                if want_grad:
                    scatter(row, i, j, dp)
            else:
                values[row] += q
                if want_grad:
                    scatter(row, i, j, dq)
    return values, jac


def h_eval_ac(network: NetworkModel, admittance: AdmittanceMatrix,
              state: StateVector, config: MeasurementConfig) -> np.ndarray:
    """Evaluate every meter function at an ac state.

    Flows follow the pi-model equations (see ``_flow_with_grad``), an
    injection is the sum of the flows leaving its bus, current magnitude is
    sqrt(P^2 + Q^2) / v_i, and a voltage meter reads v_i directly.
    """
    values, _ = _eval_rows(network, state, config, want_grad=False)
    return values


def ac_jacobian(network: NetworkModel, admittance: AdmittanceMatrix,
                state: StateVector, config: MeasurementConfig) -> np.ndarray:
    """Analytic dh/dx at the given state, m x (2n-1)."""
    _, jac = _eval_rows(network, state, config, want_grad=True)
    return jac


def simulate_measurements(network: NetworkModel, admittance: AdmittanceMatrix,
                          true_state: StateVector, config: MeasurementConfig,
                          mode: str, seed: int,
                          noise_scale: float = 1.0) -> np.ndarray:
    """h(true state) plus independent zero-mean Gaussian meter noise.

    Meter i draws from its own stream keyed on (seed, i), so adding or
    removing meters never perturbs the draws of the others. ``noise_scale``
    multiplies every sigma; 0 returns h(true state) exactly.
    """
    _check_mode(mode)
    if mode == "dc":
        h = dc_jacobian(network, admittance, config)
        z = h @ free_vector(network, true_state, "dc")
    else:
        z = h_eval_ac(network, admittance, true_state, config)
    noisy = z.copy()
    for i, spec in enumerate(config.specs):
        rng = np.random.default_rng([seed, i])
        noisy[i] += rng.normal(0.0, spec.sigma * noise_scale)
    return noisy
