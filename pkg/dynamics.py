# -*- coding: utf-8 -*-
"""
דינמיקה - Classical sphere dynamics at fixed photon number and RWA
coupled-mode amplitude evolution along a prescribed trajectory.

Mechanics: H = |p + n lambda(q)|^2 / 2m + |J + n gamma(q)|^2 / 2I + omega(q)(n + 1/2)
(hbar = c = 1). H does not depend on orientation, so the canonical angular
momentum J is conserved; orientation is tracked by quaternion kinematics
driven by the kinetic angular velocity (J + n gamma) / I.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import expm

from coupling import CouplingField, CouplingTable, coupling_table
from errors import DomainError
from geomphase import value_and_jacobian
from modes import ModeField
from quadrature import QuadratureSpec
from units_core import NATURAL, DielectricSphere, UnitSystem, as_vector

logger = logging.getLogger(__name__)

FIXED_POINT_MAX_ITER = 50
NORM_DRIFT_LIMIT = 1e-6


@dataclass
class MechState:
    """Sphere phase-space state in internal units; orientation is a unit quaternion (w, x, y, z)"""
    q: np.ndarray
    p: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    J: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.q = as_vector(self.q, "q")
        self.p = as_vector(self.p, "p")
        self.J = as_vector(self.J, "J")
        quat = np.asarray(self.orientation, dtype=float).reshape(4)
        norm = np.linalg.norm(quat)
        if norm == 0:
            raise DomainError("orientation quaternion must be nonzero")
        self.orientation = quat / norm

    def copy(self) -> 'MechState':
        return MechState(self.q.copy(), self.p.copy(), self.orientation.copy(), self.J.copy())


@dataclass
class MechanicalModel:
    """Coupling field plus the sphere's inertia in internal units"""
    field: CouplingField
    mass: float
    moment_of_inertia: float
    fd_step: Optional[float] = None

    def __post_init__(self):
        if not (self.mass > 0 and self.moment_of_inertia > 0):
            raise DomainError("mass and moment of inertia must be positive")
        if self.fd_step is None:
            self.fd_step = 1e-3 * self.field.length_scale

    @classmethod
    def from_sphere(cls, coupling: CouplingField, sphere: DielectricSphere,
                    units: UnitSystem = NATURAL) -> 'MechanicalModel':
        return cls(coupling, units.to_internal(sphere.mass, 'mass'),
                   units.to_internal(sphere.moment_of_inertia, 'moment_of_inertia'))

    def adiabatic(self) -> 'MechanicalModel':
        return replace(self, field=self.field.adiabatic())


def kinetic_from_canonical(p, lam, n_photons: float, mass: float) -> np.ndarray:
    """q_dot = (p + lambda n) / m"""
    return (as_vector(p, "p") + n_photons * np.asarray(lam, dtype=float)) / mass


def angular_from_canonical(J, gam, n_photons: float, moment_of_inertia: float) -> np.ndarray:
    """omega = (J + gamma n) / I"""
    return (as_vector(J, "J") + n_photons * np.asarray(gam, dtype=float)) / moment_of_inertia


def _energy(lam, gam, omega: float, state: MechState, model: MechanicalModel, n_photons: float) -> float:
    kinetic = state.p + n_photons * lam
    spin = state.J + n_photons * gam
    return float(kinetic @ kinetic / (2.0 * model.mass) + spin @ spin / (2.0 * model.moment_of_inertia)
                 + omega * (n_photons + 0.5))


def hamiltonian_single_mode(state: MechState, model: MechanicalModel, n_photons: float) -> float:
    sample = model.field.sample(state.q[None, :])
    return _energy(sample.lam[0], sample.gam[0], float(sample.omega[0]), state, model, n_photons)


@dataclass
class _LocalFields:
    lam: np.ndarray
    gam: np.ndarray
    omega: float
    d_lam: np.ndarray
    d_gam: np.ndarray
    grad_omega: np.ndarray


def _local_fields(model: MechanicalModel, q: np.ndarray) -> _LocalFields:
    """
    Values and fourth-order finite-difference derivatives of lambda and gamma
    at q, from one field evaluation on centre + stencil. grad omega is the
    gradient of the shift: analytic when the field provides it, otherwise
    differenced without omega0, which would cancel most of its digits.
    """
    seen = {}

    def stacked(qs):
        sample = model.field.sample(qs)
        seen.setdefault('centre', sample)
        return np.concatenate([sample.lam, sample.gam, sample.shift[:, None]], axis=1)

    value, jac = value_and_jacobian(stacked, q, model.fd_step, order=4)
    centre = seen['centre']
    grad_omega = centre.grad_shift[0] if centre.grad_shift is not None else jac[6]
    return _LocalFields(value[:3], value[3:6], centre.bare + float(value[6]), jac[:3], jac[3:6], grad_omega)


def _grad_q_hamiltonian(local: _LocalFields, p: np.ndarray, J: np.ndarray, n: float,
                        model: MechanicalModel) -> np.ndarray:
    kinetic = p + n * local.lam
    spin = J + n * local.gam
    return (n / model.mass * local.d_lam.T @ kinetic
            + n / model.moment_of_inertia * local.d_gam.T @ spin
            + (n + 0.5) * local.grad_omega)


def _rotate(orientation: np.ndarray, omega: np.ndarray, h: float) -> np.ndarray:
    """Left-multiply by exp(h omega / 2) (space-frame angular velocity)"""
    angle = np.linalg.norm(omega) * h
    if angle == 0:
        return orientation
    axis = omega / np.linalg.norm(omega)
    w1, (x1, y1, z1) = math.cos(0.5 * angle), math.sin(0.5 * angle) * axis
    w2, x2, y2, z2 = orientation
    quat = np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])
    return quat / np.linalg.norm(quat)


class _StormerVerlet:
    """
    Generalized Stormer-Verlet for the non-separable H. The momentum half
    step is linear in p and solved exactly; the position step is an
    implicit midpoint-type update solved by fixed-point iteration.
    """

    def __init__(self, model: MechanicalModel, n_photons: float):
        self.model = model
        self.n = n_photons
        self._cache: Tuple[Optional[bytes], Optional[_LocalFields]] = (None, None)
        self.converged = True

    def local(self, q: np.ndarray) -> _LocalFields:
        key = q.tobytes()
        if self._cache[0] != key:
            self._cache = (key, _local_fields(self.model, q))
        return self._cache[1]

    def step(self, state: MechState, h: float) -> MechState:
        model, n = self.model, self.n
        here = self.local(state.q)

        # p_half = p - h/2 grad_q H(q, p_half), linear in p_half
        rest = (n / model.moment_of_inertia * here.d_gam.T @ (state.J + n * here.gam)
                + (n + 0.5) * here.grad_omega + n * n / model.mass * here.d_lam.T @ here.lam)
        system = np.eye(3) + 0.5 * h * n / model.mass * here.d_lam.T
        p_half = np.linalg.solve(system, state.p - 0.5 * h * rest)

        # q_new = q + h/(2m) [2 p_half + n lambda(q) + n lambda(q_new)]
        weight = 0.5 * h / model.mass * n
        base = state.q + 0.5 * h / model.mass * (2.0 * p_half + n * here.lam)
        # linearized lambda(q_new) as predictor, then fixed point on lambda alone
        delta = np.linalg.solve(np.eye(3) - weight * here.d_lam, base - state.q + weight * here.lam)
        q_new = state.q + delta
        for _ in range(FIXED_POINT_MAX_ITER):
            candidate = base + weight * model.field.lam_many(q_new[None, :])[0]
            change = np.max(np.abs(candidate - q_new))
            q_new = candidate
            if change <= 1e-15 * max(np.max(np.abs(q_new)), model.field.length_scale):
                break
        else:
            self.converged = False
            logger.warning(f"Position update did not converge within {FIXED_POINT_MAX_ITER} iterations")

        there = self.local(q_new)
        p_new = p_half - 0.5 * h * _grad_q_hamiltonian(there, p_half, state.J, n, model)

        spin_mid = 0.5 * (angular_from_canonical(state.J, here.gam, n, model.moment_of_inertia)
                          + angular_from_canonical(state.J, there.gam, n, model.moment_of_inertia))
        return MechState(q_new, p_new, _rotate(state.orientation, spin_mid, h), state.J.copy())

    def energy(self, state: MechState) -> float:
        """H from the cached local fields; free right after a step"""
        local = self.local(state.q)
        return _energy(local.lam, local.gam, local.omega, state, self.model, self.n)


class _RungeKutta4:
    """Explicit fallback for strongly position-dependent couplings; not symplectic"""

    def __init__(self, model: MechanicalModel, n_photons: float):
        self.model = model
        self.n = n_photons
        self.converged = True

    def _rates(self, q, p, J):
        local = _local_fields(self.model, q)
        q_dot = kinetic_from_canonical(p, local.lam, self.n, self.model.mass)
        return q_dot, -_grad_q_hamiltonian(local, p, J, self.n, self.model), local.gam

    def step(self, state: MechState, h: float) -> MechState:
        q, p, J = state.q, state.p, state.J
        k1q, k1p, g1 = self._rates(q, p, J)
        k2q, k2p, _ = self._rates(q + 0.5 * h * k1q, p + 0.5 * h * k1p, J)
        k3q, k3p, _ = self._rates(q + 0.5 * h * k2q, p + 0.5 * h * k2p, J)
        k4q, k4p, g4 = self._rates(q + h * k3q, p + h * k3p, J)
        q_new = q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p_new = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        spin = 0.5 * (angular_from_canonical(J, g1, self.n, self.model.moment_of_inertia)
                      + angular_from_canonical(J, g4, self.n, self.model.moment_of_inertia))
        return MechState(q_new, p_new, _rotate(state.orientation, spin, h), J.copy())

    def energy(self, state: MechState) -> float:
        return hamiltonian_single_mode(state, self.model, self.n)


INTEGRATORS = {
    "stormer_verlet": _StormerVerlet,
    "rk4": _RungeKutta4,
}


@dataclass
class Trajectory:
    """Sampled mechanical trajectory in internal units"""
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    J: np.ndarray
    orientation: np.ndarray
    velocity: np.ndarray
    angular_velocity: np.ndarray
    energy: np.ndarray
    converged: bool = True
    rejected_steps: int = 0

    @property
    def final_state(self) -> MechState:
        return MechState(self.q[-1], self.p[-1], self.orientation[-1], self.J[-1])

    @property
    def energy_drift(self) -> float:
        """max |H(t) - H(0)| / |H(0)|"""
        return float(np.max(np.abs(self.energy - self.energy[0])) / abs(self.energy[0]))

    def to_frame(self, units: UnitSystem = NATURAL) -> pd.DataFrame:
        """SI time series with unit-suffixed columns"""
        columns = {'t_s': units.to_si(self.times, 'time')}
        for axis, name in enumerate("xyz"):
            columns[f'q_{name}_m'] = units.to_si(self.q[:, axis], 'length')
        for axis, name in enumerate("xyz"):
            columns[f'p_{name}_kg_m_per_s'] = units.to_si(self.p[:, axis], 'momentum')
        for axis, name in enumerate("xyz"):
            columns[f'v_{name}_m_per_s'] = units.to_si(self.velocity[:, axis], 'velocity')
        for axis, name in enumerate("xyz"):
            columns[f'J_{name}_J_s'] = units.to_si(self.J[:, axis], 'angular_momentum')
        for axis, name in enumerate("wxyz"):
            columns[f'quat_{name}'] = self.orientation[:, axis]
        columns['H_J'] = units.to_si(self.energy, 'energy')
        return pd.DataFrame(columns)


def evolve_classical(state: MechState, model: MechanicalModel, n_photons: float, dt: float, T: float,
                     method: str = "stormer_verlet", sample_every: int = 1, backward: bool = False,
                     energy_budget: float = 1e-6, max_refinements: int = 3) -> Trajectory:
    """
    Integrate Hamilton's equations from `state` for time T with step dt.
    backward=True runs the same scheme with step -dt (time reversal).
    A step whose relative energy change exceeds `energy_budget` is retried
    as two half steps, up to `max_refinements` times.
    """
    if not dt > 0 or T < 0:
        raise DomainError(f"need dt > 0 and T >= 0 (got dt={dt}, T={T})")
    try:
        integrator = INTEGRATORS[method](model, n_photons)
    except KeyError:
        raise DomainError(f"unknown integrator '{method}', expected one of {sorted(INTEGRATORS)}") from None

    steps = int(round(T / dt))
    h = -dt if backward else dt
    samples = []
    rejected = 0

    def record(t, current, energy):
        local_lam = model.field.sample(current.q[None, :])
        samples.append((t, current, energy,
                        kinetic_from_canonical(current.p, local_lam.lam[0], n_photons, model.mass),
                        angular_from_canonical(current.J, local_lam.gam[0], n_photons, model.moment_of_inertia)))

    def advance(current, before, step_h, depth):
        nonlocal rejected
        proposal = integrator.step(current, step_h)
        after = integrator.energy(proposal)
        if abs(after - before) <= energy_budget * abs(before) or depth >= max_refinements:
            return proposal, after
        rejected += 1
        half, middle = advance(current, before, 0.5 * step_h, depth + 1)
        return advance(half, middle, 0.5 * step_h, depth + 1)

    current = state.copy()
    energy = integrator.energy(current)
    record(0.0, current, energy)
    for index in range(1, steps + 1):
        current, energy = advance(current, energy, h, 0)
        if index % sample_every == 0 or index == steps:
            record(index * h, current, energy)

    if rejected:
        logger.warning(f"{rejected} steps exceeded the energy budget {energy_budget:.1e} and were refined")
    logger.info(f"Integrated {steps} steps with {method} (dt={dt:.4g}, backward={backward})")
    return Trajectory(
        times=np.array([s[0] for s in samples]),
        q=np.array([s[1].q for s in samples]),
        p=np.array([s[1].p for s in samples]),
        J=np.array([s[1].J for s in samples]),
        orientation=np.array([s[1].orientation for s in samples]),
        velocity=np.array([s[3] for s in samples]),
        angular_velocity=np.array([s[4] for s in samples]),
        energy=np.array([s[2] for s in samples]),
        converged=integrator.converged,
        rejected_steps=rejected,
    )


def harmonic_trap_frequencies(coupling: CouplingField, q0, n_photons: float, mass: float,
                              step: Optional[float] = None) -> np.ndarray:
    """
    Small-oscillation frequencies sqrt((n + 1/2) d^2 omega / dq_i^2 / m) along
    each axis from a three-point fit of the frequency shift; 0 where omega is not a minimum.
    """
    h = step or 1e-2 * coupling.length_scale
    center = as_vector(q0, "q0")
    eye = np.eye(3)
    points = np.concatenate([center[None, :], center + h * eye, center - h * eye])
    shift = coupling.sample(points).shift
    curvature = (shift[1:4] + shift[4:7] - 2.0 * shift[0]) / h ** 2
    stiffness = np.clip((n_photons + 0.5) * curvature, 0.0, None)
    if np.any(stiffness == 0):
        logger.debug(f"No restoring curvature along axes {np.nonzero(stiffness == 0)[0].tolist()}")
    return np.sqrt(stiffness / mass)


@dataclass
class ModeAmplitudeState:
    amplitudes: np.ndarray
    frequencies: np.ndarray
    time: float = 0.0

    @property
    def photon_number(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass
class AmplitudeHistory:
    times: np.ndarray
    amplitudes: np.ndarray
    frequencies: np.ndarray
    converged: bool
    norm_drift: float

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def final_state(self) -> ModeAmplitudeState:
        return ModeAmplitudeState(self.amplitudes[-1], self.frequencies, float(self.times[-1]))

    def to_frame(self, units: UnitSystem = NATURAL) -> pd.DataFrame:
        columns = {'t_s': units.to_si(self.times, 'time')}
        for k in range(self.amplitudes.shape[1]):
            columns[f'pop_{k}'] = self.populations[:, k]
            columns[f'arg_{k}_rad'] = np.angle(self.amplitudes[:, k])
        return pd.DataFrame(columns)


TrajectoryFn = Callable[[float], Tuple[np.ndarray, np.ndarray, np.ndarray]]
CouplingSource = Union[CouplingTable, Callable[[np.ndarray], CouplingTable], Sequence[ModeField]]


def oscillating_trajectory(amplitude, drive_frequency: float, center=(0.0, 0.0, 0.0),
                           spin=(0.0, 0.0, 0.0)) -> TrajectoryFn:
    """q(t) = center + A sin(Omega t), constant body angular velocity"""
    amp, c, w = as_vector(amplitude, "amplitude"), as_vector(center, "center"), as_vector(spin, "spin")

    def trajectory(t):
        return (c + amp * math.sin(drive_frequency * t),
                amp * drive_frequency * math.cos(drive_frequency * t), w)

    return trajectory


def _coupling_provider(couplings: CouplingSource, sphere: Optional[DielectricSphere],
                       quad: Optional[QuadratureSpec]) -> Callable[[np.ndarray], CouplingTable]:
    if isinstance(couplings, CouplingTable):
        return lambda q: couplings
    if callable(couplings):
        return couplings
    modes = list(couplings)

    @lru_cache(maxsize=4096)
    def cached(key):
        return coupling_table(modes, sphere, np.array(key), quad)

    return lambda q: cached(tuple(float(v) for v in q))


def evolve_mode_amplitudes(trajectory: TrajectoryFn, couplings: CouplingSource,
                           a0: Union[ModeAmplitudeState, Sequence[complex]], dt: float, T: float,
                           sphere: Optional[DielectricSphere] = None, quad: Optional[QuadratureSpec] = None,
                           sample_every: int = 1) -> AmplitudeHistory:
    """
    i da_k/dt = omega_k a_k + sum_j M_kj a_j along a prescribed trajectory.

    Integrated in the interaction picture b = e^{i phi} a with a midpoint
    exponential step exp(-i dt M~(t + dt/2)); each step is unitary, so the
    photon number is conserved to round-off.
    """
    if not dt > 0 or T < 0:
        raise DomainError(f"need dt > 0 and T >= 0 (got dt={dt}, T={T})")
    provider = _coupling_provider(couplings, sphere, quad)
    start = a0.time if isinstance(a0, ModeAmplitudeState) else 0.0
    b = np.asarray(getattr(a0, "amplitudes", a0), dtype=complex).copy()
    phases = np.zeros(len(b))
    omegas = np.zeros(len(b))
    initial_norm = float(np.sum(np.abs(b) ** 2))

    steps = int(round(T / dt))
    times, history = [start], [b.copy()]
    for index in range(steps):
        t_mid = start + (index + 0.5) * dt
        q, q_dot, spin = trajectory(t_mid)
        table = provider(q)
        if table.size != len(b):
            raise DomainError(f"{len(b)} amplitudes but {table.size} modes")
        phase_mid = phases + 0.5 * dt * table.omegas
        rotating = np.exp(1j * (phase_mid[:, None] - phase_mid[None, :]))
        b = expm(-1j * dt * table.generator(q_dot, spin) * rotating) @ b
        phases = phases + dt * table.omegas
        omegas = table.omegas
        if (index + 1) % sample_every == 0 or index + 1 == steps:
            times.append(start + (index + 1) * dt)
            history.append(b * np.exp(-1j * phases))

    amplitudes = np.array(history)
    drift = float(np.max(np.abs(np.sum(np.abs(amplitudes) ** 2, axis=1) - initial_norm)))
    converged = drift <= NORM_DRIFT_LIMIT
    if not converged:
        logger.warning(f"Mode-amplitude norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT:.0e}")
    return AmplitudeHistory(np.array(times), amplitudes, omegas, converged, drift)


def rabi_coupling_rate(table: CouplingTable, amplitude, drive_frequency: float, k: int = 0, j: int = 1) -> float:
    """Rotating-frame coupling g = |M_kj(q_dot = A Omega)| / 2 for q(t) = A sin(Omega t)"""
    generator = table.generator(as_vector(amplitude, "amplitude") * drive_frequency, np.zeros(3))
    return 0.5 * float(abs(generator[k, j]))


def two_level_peak_transfer(coupling_rate: float, detuning: float) -> float:
    """Maximum population transfer g^2 / (g^2 + delta^2 / 4) of a driven two-level system"""
    g2 = coupling_rate ** 2
    return g2 / (g2 + 0.25 * detuning ** 2) if g2 > 0 else 0.0
