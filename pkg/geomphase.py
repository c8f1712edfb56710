# -*- coding: utf-8 -*-
"""
Geometric phase, nonadiabatic force and velocity phase shift.

Theta = hbar^-1 int_C dq . lambda(q) <n> along a parametric path, the
on-axis closed forms used to cross-check it, the |Theta(q_z)| sweep across
the focus, and the finite-difference machinery (central differences with
Richardson verification) shared with the dynamics module.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from coupling import CouplingField, CouplingVector, Provenance, QuadratureCouplingField
from errors import DomainError
from modes import ModeField, gaussian_paraxial_mode, mode_frequency_shift
from quadrature import QuadratureSpec
from units_core import BeamParams, DielectricSphere, as_vector

logger = logging.getLogger(__name__)

PANEL_ORDER = 8
MAX_DOUBLINGS = 5


@dataclass(frozen=True)
class PathSpec:
    """
    Parametric path s in [0, 1] -> q(s) with tangent dq/ds.
    Breakpoints mark kinks; integration panels never straddle them.
    """
    position: Callable[[np.ndarray], np.ndarray]
    tangent: Callable[[np.ndarray], np.ndarray]
    sample_count: int = 16
    description: str = ""
    breakpoints: Tuple[float, ...] = (0.0, 1.0)

    def __post_init__(self):
        if self.sample_count < 1:
            raise DomainError("sample_count must be >= 1")

    @property
    def q_i(self) -> np.ndarray:
        return self.position(np.array([0.0]))[0]

    @property
    def q_f(self) -> np.ndarray:
        return self.position(np.array([1.0]))[0]

    def reversed(self) -> 'PathSpec':
        return PathSpec(lambda s: self.position(1.0 - s), lambda s: -self.tangent(1.0 - s),
                        self.sample_count, f"reversed({self.description})",
                        tuple(sorted(1.0 - b for b in self.breakpoints)))

    def then(self, other: 'PathSpec') -> 'PathSpec':
        """This path followed by `other`, each traversed in half the parameter range"""
        gap = np.linalg.norm(self.q_f - other.q_i)
        scale = max(np.linalg.norm(self.q_f), np.linalg.norm(other.q_i), 1e-300)
        if gap > 1e-12 * scale:
            raise DomainError(f"paths do not join: gap {gap:.3e}")

        def position(s):
            s = np.asarray(s, dtype=float)
            first = s < 0.5
            out = np.empty(s.shape + (3,))
            out[first] = self.position(2.0 * s[first])
            out[~first] = other.position(2.0 * s[~first] - 1.0)
            return out

        def tangent(s):
            s = np.asarray(s, dtype=float)
            first = s < 0.5
            out = np.empty(s.shape + (3,))
            out[first] = 2.0 * self.tangent(2.0 * s[first])
            out[~first] = 2.0 * other.tangent(2.0 * s[~first] - 1.0)
            return out

        breaks = sorted({0.5 * b for b in self.breakpoints} | {0.5 + 0.5 * b for b in other.breakpoints})
        return PathSpec(position, tangent, self.sample_count + other.sample_count,
                        f"{self.description} + {other.description}", tuple(breaks))


def straight_path(q_i, q_f, sample_count: int = 16, description: str = "") -> PathSpec:
    start, end = as_vector(q_i, "q_i"), as_vector(q_f, "q_f")
    delta = end - start
    return PathSpec(lambda s: start + np.asarray(s, dtype=float)[..., None] * delta,
                    lambda s: np.broadcast_to(delta, np.shape(s) + (3,)).copy(),
                    sample_count, description or f"straight {start} -> {end}")


def axis_path(qz_i: float, qz_f: float, sample_count: int = 16) -> PathSpec:
    """Straight path along the beam axis"""
    return straight_path((0.0, 0.0, qz_i), (0.0, 0.0, qz_f), sample_count,
                         f"axis q_z {qz_i:.6g} -> {qz_f:.6g} m")


def polyline_path(points: Sequence, sample_count: int = 16, description: str = "") -> PathSpec:
    """Piecewise-straight path through the given vertices, uniform in segment index"""
    vertices = np.array([as_vector(p, "vertex") for p in points])
    if len(vertices) < 2:
        raise DomainError("a polyline needs at least two vertices")
    segments = len(vertices) - 1

    def locate(s):
        scaled = np.clip(np.asarray(s, dtype=float) * segments, 0.0, segments)
        index = np.minimum(scaled.astype(int), segments - 1)
        return index, scaled - index

    def position(s):
        index, frac = locate(s)
        return vertices[index] + frac[..., None] * (vertices[index + 1] - vertices[index])

    def tangent(s):
        index, _ = locate(s)
        return segments * (vertices[index + 1] - vertices[index])

    breaks = tuple(i / segments for i in range(segments + 1))
    return PathSpec(position, tangent, max(sample_count, segments), description or f"polyline ({len(vertices)} vertices)",
                    breaks)


def circular_loop(center, radius: float, normal=(0.0, 0.0, 1.0), sample_count: int = 32) -> PathSpec:
    """Closed circle of given radius about `center` in the plane normal to `normal`"""
    c = as_vector(center, "center")
    n = as_vector(normal, "normal")
    n = n / np.linalg.norm(n)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)

    def position(s):
        phi = 2.0 * math.pi * np.asarray(s, dtype=float)[..., None]
        return c + radius * (np.cos(phi) * e1 + np.sin(phi) * e2)

    def tangent(s):
        phi = 2.0 * math.pi * np.asarray(s, dtype=float)[..., None]
        return 2.0 * math.pi * radius * (-np.sin(phi) * e1 + np.cos(phi) * e2)

    return PathSpec(position, tangent, sample_count, f"circle r={radius:.6g} m about {c}")


class PhaseMethod(str, Enum):
    LINE_INTEGRAL = "line_integral"
    CLOSED_FORM = "closed_form"


@dataclass
class PhaseResult:
    theta: float
    method: PhaseMethod
    path: PathSpec
    photon_number: float
    error_estimate: float = 0.0
    converged: bool = True
    note: str = ""

    @property
    def theta_over_pi(self) -> float:
        return self.theta / math.pi

    @property
    def endpoints(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.path.q_i, self.path.q_f


LambdaSource = Union[CouplingField, Callable[[np.ndarray], np.ndarray]]


def _lambda_values(lambda_field: LambdaSource, points: np.ndarray, threads: int = 1) -> np.ndarray:
    """lambda at each row of points; evaluation order never affects the result order"""
    if not isinstance(lambda_field, CouplingField):
        return np.asarray(lambda_field(points), dtype=float)
    if threads > 1 and isinstance(lambda_field, QuadratureCouplingField) and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(lambda_field.lam, points)))
    return lambda_field.sample(points).lam


def _path_nodes(path: PathSpec, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights in s, panels split across breakpoints"""
    x, w = np.polynomial.legendre.leggauss(PANEL_ORDER)
    nodes, weights = [], []
    for lo, hi in zip(path.breakpoints[:-1], path.breakpoints[1:]):
        count = max(1, int(round(panels * (hi - lo))))
        edges = np.linspace(lo, hi, count + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _line_integral(path: PathSpec, lambda_field: LambdaSource, panels: int,
                   threads: int) -> Tuple[float, float]:
    s, w = _path_nodes(path, panels)
    tangents = path.tangent(s)
    lam = _lambda_values(lambda_field, path.position(s), threads)
    integrand = np.sum(lam * tangents, axis=-1)
    magnitude = float(np.sum(w * np.linalg.norm(lam, axis=-1) * np.linalg.norm(tangents, axis=-1)))
    return float(np.sum(w * integrand)), magnitude


def geometric_phase(path: PathSpec, lambda_field: LambdaSource, n_photons: float,
                    tol: float = 1e-8, threads: int = 1) -> PhaseResult:
    """
    Theta = <n> int_C dq . lambda(q) (hbar = 1).
    Panels are doubled until two successive sums agree to `tol` relative to
    the integral of |lambda||dq|.
    """
    panels = path.sample_count
    previous, _ = _line_integral(path, lambda_field, panels, threads)
    error, converged = math.inf, False
    for _ in range(MAX_DOUBLINGS):
        panels *= 2
        current, magnitude = _line_integral(path, lambda_field, panels, threads)
        error = abs(current - previous) / magnitude if magnitude > 0 else 0.0
        previous = current
        if error <= tol:
            converged = True
            break

    if isinstance(lambda_field, QuadratureCouplingField) and not lambda_field.converged:
        converged = False
    if not converged:
        logger.warning(f"Geometric phase along {path.description} flagged: estimate {error:.3e}")
    theta = n_photons * previous
    logger.debug(f"Theta = {theta:.6g} rad ({theta / math.pi:.4f} pi) with {panels} panels")
    return PhaseResult(theta, PhaseMethod.LINE_INTEGRAL, path, n_photons, error, converged)


def _axis_prefactor(beam: BeamParams, sphere: DielectricSphere, n_photons: float) -> float:
    """(n^2 - 1) k^2 R^3 <n> / L_c"""
    return (sphere.epsilon - 1.0) * beam.k ** 2 * sphere.radius ** 3 * n_photons / beam.cavity_length


def geometric_phase_axis_closed_form(beam: BeamParams, sphere: DielectricSphere, qz_i: float, qz_f: float,
                                     n_photons: float) -> PhaseResult:
    """-(2/3) (n^2 - 1) k^2 R^3 <n> / L_c [s / (1 + s^2) + atan s] between s = q_z / z_R endpoints"""

    def bracket(qz):
        s = qz / beam.rayleigh_range
        return s / (1.0 + s * s) + math.atan(s)

    theta = -2.0 / 3.0 * _axis_prefactor(beam, sphere, n_photons) * (bracket(qz_f) - bracket(qz_i))
    return PhaseResult(theta, PhaseMethod.CLOSED_FORM, axis_path(qz_i, qz_f), n_photons)


def lambda_axis_dipole_closed_form(beam: BeamParams, sphere: DielectricSphere, qz: float) -> CouplingVector:
    """Leading order in R on the axis: lambda_z = -(4/3)(n^2 - 1) k^2 R^3 / [z_R L_c (1 + s^2)]"""
    s = qz / beam.rayleigh_range
    value = -4.0 / 3.0 * _axis_prefactor(beam, sphere, 1.0) / (beam.rayleigh_range * (1.0 + s * s))
    return CouplingVector("lambda", np.array([0.0, 0.0, value]), Provenance.CLOSED_FORM, (0.0, 0.0, qz))


def geometric_phase_axis_dipole(beam: BeamParams, sphere: DielectricSphere, qz_i: float, qz_f: float,
                                n_photons: float) -> PhaseResult:
    """Exact antiderivative of the leading-order on-axis lambda: -(4/3) prefactor [atan s]"""
    z_r = beam.rayleigh_range
    theta = -4.0 / 3.0 * _axis_prefactor(beam, sphere, n_photons) * (math.atan(qz_f / z_r) - math.atan(qz_i / z_r))
    return PhaseResult(theta, PhaseMethod.CLOSED_FORM, axis_path(qz_i, qz_f), n_photons,
                       note="leading order in R (on-axis intensity profile)")


def figure2_sweep(beam: BeamParams, sphere: DielectricSphere, n_photons: float,
                  qz_grid: Optional[Sequence[float]] = None, lambda_field: Optional[LambdaSource] = None,
                  panel_order: int = 4, threads: int = 1) -> pd.DataFrame:
    """
    |Theta(q_z0 -> q_z)| over a grid starting at q_z0 = grid[0] (default
    101 points across -lambda0/2 .. +lambda0/2). Line-integral column is
    accumulated interval by interval with Gauss-Legendre of `panel_order`.
    """
    grid = np.asarray(qz_grid if qz_grid is not None
                      else np.linspace(-beam.wavelength / 2.0, beam.wavelength / 2.0, 101), dtype=float)
    if lambda_field is None:
        lambda_field = QuadratureCouplingField(gaussian_paraxial_mode(beam), sphere, QuadratureSpec())

    x, w = np.polynomial.legendre.leggauss(panel_order)
    lo, hi = grid[:-1], grid[1:]
    nodes = (0.5 * (hi - lo)[:, None] * x + 0.5 * (hi + lo)[:, None]).ravel()
    points = np.stack([np.zeros_like(nodes), np.zeros_like(nodes), nodes], axis=-1)
    lam_z = _lambda_values(lambda_field, points, threads)[:, 2].reshape(len(lo), panel_order)
    increments = np.sum(0.5 * (hi - lo)[:, None] * w * lam_z, axis=1)
    line = n_photons * np.concatenate([[0.0], np.cumsum(increments)])

    start = grid[0]
    closed = [geometric_phase_axis_closed_form(beam, sphere, start, qz, n_photons).theta for qz in grid]
    dipole = [geometric_phase_axis_dipole(beam, sphere, start, qz, n_photons).theta for qz in grid]
    logger.info(f"Sweep of {len(grid)} points: |Theta| endpoint {abs(line[-1]) / math.pi:.4f} pi (line), "
                f"{abs(closed[-1]) / math.pi:.4f} pi (closed form)")
    return pd.DataFrame({
        'q_z_m': grid,
        'theta_rad_line': np.abs(line),
        'theta_rad_closed': np.abs(closed),
        'theta_rad_dipole': np.abs(dipole),
    })


def _stencil(order: int):
    if order == 2:
        return (1.0, -1.0), (0.5, -0.5)
    if order == 4:
        return (2.0, 1.0, -1.0, -2.0), (-1.0 / 12.0, 8.0 / 12.0, -8.0 / 12.0, 1.0 / 12.0)
    raise DomainError(f"unsupported stencil order {order}")


def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], q, step: float, order: int = 2) -> np.ndarray:
    """
    J[a, i] = d fn_a / d q_i by central differences; fn maps (M, 3) -> (M, d)
    and is called once on the whole stencil.
    """
    return value_and_jacobian(fn, q, step, order, with_value=False)[1]


def value_and_jacobian(fn: Callable[[np.ndarray], np.ndarray], q, step: float, order: int = 2,
                       with_value: bool = True) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """fn(q) and its central-difference Jacobian from a single call of fn on centre + stencil"""
    center = as_vector(q, "q")
    offsets, coeffs = _stencil(order)
    eye = np.eye(3)
    stencil = np.array([center + o * step * eye[i] for i in range(3) for o in offsets])
    if with_value:
        stencil = np.concatenate([center[None, :], stencil])
    values = np.asarray(fn(stencil), dtype=float)
    value = values[0] if with_value else None
    values = values[1:] if with_value else values
    jac = np.einsum('o,iod->di', np.array(coeffs), values.reshape(3, len(offsets), -1)) / step
    return value, jac


def richardson_jacobian(fn: Callable[[np.ndarray], np.ndarray], q, step: float) -> Tuple[np.ndarray, float]:
    """Second-order differences at h and h/2 combined; returns (estimate, relative change)"""
    coarse = central_jacobian(fn, q, step)
    fine = central_jacobian(fn, q, 0.5 * step)
    extrapolated = (4.0 * fine - coarse) / 3.0
    scale = np.max(np.abs(extrapolated))
    error = float(np.max(np.abs(extrapolated - fine)) / scale) if scale > 0 else 0.0
    return extrapolated, error


def curl_from_jacobian(jac: np.ndarray) -> np.ndarray:
    """curl of a vector field with J[a, i] = d_i F_a"""
    return np.array([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]])


@dataclass
class ForceResult:
    value: np.ndarray
    converged: bool = True
    error_estimate: float = 0.0
    components: dict = field(default_factory=dict)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.value))


def nonadiabatic_force(q, q_dot, omega_body, lambda_field: CouplingField,
                       gamma_field: Optional[CouplingField], n_photons: float,
                       step: Optional[float] = None, tol: float = 1e-3) -> ForceResult:
    """
    F = <n> [q_dot x (curl lambda) - grad(omega . gamma)], derivatives by
    central differences at h = 1e-3 z_R with a Richardson check.
    """
    gamma_field = gamma_field or lambda_field
    h = step or 1e-3 * lambda_field.length_scale
    velocity = as_vector(q_dot, "q_dot")
    spin = as_vector(omega_body, "omega_body")

    lam_jac, lam_err = richardson_jacobian(lambda qs: lambda_field.sample(qs).lam, q, h)
    spin_grad, spin_err = richardson_jacobian(lambda qs: (gamma_field.sample(qs).gam @ spin)[:, None], q, h)

    curl_lambda = curl_from_jacobian(lam_jac)
    magnetic_like = n_photons * np.cross(velocity, curl_lambda)
    spin_term = -n_photons * spin_grad[0]
    error = max(lam_err if np.any(velocity) else 0.0, spin_err if np.any(spin) else 0.0)
    converged = error <= tol
    if not converged:
        logger.warning(f"Finite-difference derivatives not converged at q={q}: {error:.3e}")
    return ForceResult(magnetic_like + spin_term, converged, error,
                       {'curl_lambda': curl_lambda, 'velocity_term': magnetic_like, 'spin_term': spin_term})


def velocity_phase_shift(q_dot, omega_body, lam, gam, dt: float, n_photons: float = 1.0) -> float:
    """hbar^-1 (q_dot . lambda + omega . gamma) <n> dt in internal units"""
    lam = getattr(lam, 'value', lam)
    gam = getattr(gam, 'value', gam)
    rate = as_vector(q_dot, "q_dot") @ np.real(lam) + as_vector(omega_body, "omega_body") @ np.real(gam)
    return float(rate * dt * n_photons)


def trap_force(q, mode: ModeField, sphere: DielectricSphere, n_photons: float,
               quad: Optional[QuadratureSpec] = None) -> ForceResult:
    """Gradient force -<n> hbar grad omega(q) of the sphere-shifted mode frequency"""
    shift = mode_frequency_shift(mode, sphere, q, quad, with_gradient=True)
    return ForceResult(-n_photons * shift.gradient, shift.converged, shift.error_estimate)


def force_ratio(nonadiabatic: ForceResult, trap: ForceResult) -> float:
    if trap.magnitude == 0:
        raise DomainError("trap force vanishes at this position; compare off the focus")
    return nonadiabatic.magnitude / trap.magnitude
