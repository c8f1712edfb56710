# -*- coding: utf-8 -*-
"""
פונקציות מוד - Analytic mode-function families and their verification.

Families: Gaussian paraxial traveling beam, traveling plane wave and
standing wave in a periodic box, and a mode rigidly attached to the sphere.
Every family returns the vector mode f(r; q) together with its Jacobian
J[..., i, l] = d_i f_l, from which curl and divergence follow.

Built-in families ignore q (weak scattering: the subwavelength sphere does
not perturb the mode shape), so grad_q is absent except for comoving modes.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from errors import DomainError
from quadrature import QuadratureSpec, integrate_over_box, integrate_over_sphere, sphere_rule
from units_core import BeamParams, DielectricSphere, as_vector

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-12
GAUGE_SHELL_FRACTION = 1e-3


@dataclass(frozen=True)
class NormalizationDomain:
    """Domain of the mode normalization: a periodic box or a beam of length L_c"""
    kind: str
    lengths: Tuple[float, ...]

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @classmethod
    def box(cls, lengths) -> 'NormalizationDomain':
        if np.isscalar(lengths):
            side = float(lengths) ** (1.0 / 3.0)
            lengths = (side, side, side)
        lengths = tuple(float(v) for v in as_vector(lengths, "box"))
        if min(lengths) <= 0:
            raise DomainError(f"box lengths must be positive, got {lengths}")
        return cls("box", lengths)

    @classmethod
    def beam(cls, cavity_length: float) -> 'NormalizationDomain':
        return cls("beam", (float(cavity_length),))


def _points(r) -> np.ndarray:
    pts = np.asarray(r, dtype=float)
    if pts.shape[-1] != 3:
        raise DomainError(f"points must have a trailing axis of length 3, got shape {pts.shape}")
    return pts


def _origin(q) -> np.ndarray:
    return np.zeros(3) if q is None else as_vector(q, "q")


class ModeField:
    """
    Vector mode function f(r; q) with frequency omega.

    Subclasses implement `evaluate` and `jacobian`; `grad_q` returns None
    when the family declares it absent.
    """

    name = "mode"

    def __init__(self, omega: float, is_real: bool, domain: NormalizationDomain):
        self.omega = float(omega)
        self.is_real = is_real
        self.normalization_volume = domain

    def evaluate(self, r, q=None) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, r, q=None) -> np.ndarray:
        raise NotImplementedError

    def grad_q(self, r, q=None) -> Optional[np.ndarray]:
        return None

    @property
    def has_grad_q(self) -> bool:
        return False

    def frequency(self, q=None) -> float:
        """Bare frequency; the sphere-induced shift is mode_frequency_shift"""
        return self.omega

    def curl(self, r, q=None) -> np.ndarray:
        jac = self.jacobian(r, q)
        return np.stack([
            jac[..., 1, 2] - jac[..., 2, 1],
            jac[..., 2, 0] - jac[..., 0, 2],
            jac[..., 0, 1] - jac[..., 1, 0],
        ], axis=-1)

    def divergence(self, r, q=None) -> np.ndarray:
        return np.trace(self.jacobian(r, q), axis1=-2, axis2=-1)

    def conjugate(self) -> 'ModeField':
        return LinearCombinationMode([self], [1.0], conjugate=True, name=f"conj({self.name})")

    def with_global_phase(self, phase: float) -> 'ModeField':
        return LinearCombinationMode([self], [np.exp(1j * phase)], name=f"{self.name}*e^(i{phase:g})")

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, omega={self.omega:.6g}, real={self.is_real})"


class GaussianParaxialMode(ModeField):
    """
    Fundamental Gaussian beam travelling along +z, polarized along x:
    f = [psi e_x + (i/k) d_x psi e_z] / sqrt(L_c), psi = u e^{ikz},
    u = sqrt(2/pi) / (w0 qt) exp(-rho^2 / (w0^2 qt)), qt = 1 + i z/z_R.
    1/qt carries both the 1/w(z) amplitude and the Gouy factor.
    """

    name = "gaussian"

    def __init__(self, beam: BeamParams):
        super().__init__(beam.omega, False, NormalizationDomain.beam(beam.cavity_length))
        self.beam = beam
        self.k = beam.k
        self.z_r = beam.rayleigh_range
        self.w0 = beam.waist
        self._norm = 1.0 / math.sqrt(beam.cavity_length)

    def _envelope(self, r):
        pts = _points(r)
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        qt = 1.0 + 1j * z / self.z_r
        a = 1.0 / (self.w0 ** 2 * qt)
        rho2 = x ** 2 + y ** 2
        u = math.sqrt(2.0 / math.pi) / (self.w0 * qt) * np.exp(-a * rho2)
        carrier = np.exp(1j * self.k * z)
        return x, y, qt, a, rho2, u, carrier

    def evaluate(self, r, q=None) -> np.ndarray:
        x, _, _, a, _, u, carrier = self._envelope(r)
        psi = u * carrier
        psi_x = -2.0 * a * x * psi
        return self._norm * np.stack([psi, np.zeros_like(psi), 1j / self.k * psi_x], axis=-1)

    def jacobian(self, r, q=None) -> np.ndarray:
        x, y, qt, a, rho2, u, carrier = self._envelope(r)
        k, dz_qt = self.k, 1j / self.z_r

        u_x = -2.0 * a * x * u
        u_y = -2.0 * a * y * u
        u_z = u * dz_qt * (rho2 * a - 1.0) / qt
        u_xx = (-2.0 * a + 4.0 * a ** 2 * x ** 2) * u
        u_xy = 4.0 * a ** 2 * x * y * u
        u_xz = -2.0 * x * a * (u_z - dz_qt * u / qt)

        jac = np.zeros(u.shape + (3, 3), dtype=complex)
        jac[..., 0, 0] = u_x * carrier
        jac[..., 1, 0] = u_y * carrier
        jac[..., 2, 0] = (u_z + 1j * k * u) * carrier
        jac[..., 0, 2] = 1j / k * u_xx * carrier
        jac[..., 1, 2] = 1j / k * u_xy * carrier
        jac[..., 2, 2] = 1j / k * (u_xz + 1j * k * u_x) * carrier
        return self._norm * jac

    def envelope(self, r) -> np.ndarray:
        """u(x, y, z) without carrier or cavity normalization"""
        return self._envelope(r)[5]


class PlaneWaveMode(ModeField):
    """Traveling plane wave amplitude * e^{i(k.r + phase)} e_pol / sqrt(V) in a periodic box"""

    name = "plane"

    def __init__(self, k_vec, polarization, domain: NormalizationDomain,
                 amplitude: complex = 1.0, phase: float = 0.0):
        self.k_vec = as_vector(k_vec, "k_vec")
        self.polarization = _transverse_polarization(self.k_vec, polarization)
        super().__init__(float(np.linalg.norm(self.k_vec)), False, domain)
        self.amplitude = complex(amplitude) / math.sqrt(domain.volume)
        self.phase = phase

    def evaluate(self, r, q=None) -> np.ndarray:
        pts = _points(r)
        scalar = self.amplitude * np.exp(1j * (pts @ self.k_vec + self.phase))
        return scalar[..., None] * self.polarization

    def jacobian(self, r, q=None) -> np.ndarray:
        f = self.evaluate(r, q)
        return 1j * self.k_vec[:, None] * f[..., None, :]


class StandingWaveMode(ModeField):
    """Real standing wave sqrt(2/V) sin(k.r + phase) e_pol"""

    name = "standing"

    def __init__(self, k_vec, polarization, domain: NormalizationDomain, phase: float = 0.0):
        self.k_vec = as_vector(k_vec, "k_vec")
        self.polarization = _transverse_polarization(self.k_vec, polarization)
        super().__init__(float(np.linalg.norm(self.k_vec)), True, domain)
        self.phase = phase
        self._norm = math.sqrt(2.0 / domain.volume)

    def evaluate(self, r, q=None) -> np.ndarray:
        arg = _points(r) @ self.k_vec + self.phase
        return (self._norm * np.sin(arg))[..., None] * self.polarization.astype(complex)

    def jacobian(self, r, q=None) -> np.ndarray:
        arg = _points(r) @ self.k_vec + self.phase
        amp = (self._norm * np.cos(arg))[..., None, None]
        return (amp * np.outer(self.k_vec, self.polarization)).astype(complex)

    def constituents(self) -> Tuple[PlaneWaveMode, PlaneWaveMode]:
        """Counter-propagating traveling waves with (f_plus + f_minus)/sqrt(2) = this mode"""
        domain = self.normalization_volume
        forward = PlaneWaveMode(self.k_vec, self.polarization, domain, -1j, self.phase)
        backward = PlaneWaveMode(-self.k_vec, self.polarization, domain, 1j, -self.phase)
        return forward, backward


class ComovingMode(ModeField):
    """Mode rigidly carried by the sphere, f(r; q) = f0(r - q); the family that provides grad_q"""

    def __init__(self, base: ModeField):
        super().__init__(base.omega, base.is_real, base.normalization_volume)
        self.base = base
        self.name = f"comoving({base.name})"

    def evaluate(self, r, q=None) -> np.ndarray:
        return self.base.evaluate(_points(r) - _origin(q))

    def jacobian(self, r, q=None) -> np.ndarray:
        return self.base.jacobian(_points(r) - _origin(q))

    def grad_q(self, r, q=None) -> np.ndarray:
        return -self.jacobian(r, q)

    @property
    def has_grad_q(self) -> bool:
        return True


class LinearCombinationMode(ModeField):
    """sum_j c_j f_j (optionally conjugated) over modes sharing one frequency"""

    def __init__(self, components: Sequence[ModeField], coefficients: Sequence[complex],
                 conjugate: bool = False, name: Optional[str] = None):
        coeffs = np.asarray(coefficients, dtype=complex)
        is_real = all(c.is_real for c in components) and bool(np.all(coeffs.imag == 0))
        super().__init__(components[0].omega, is_real, components[0].normalization_volume)
        self.components = list(components)
        self.coefficients = coeffs
        self.conjugated = conjugate
        self.name = name or "+".join(c.name for c in components)

    def _combine(self, values: List[np.ndarray]) -> np.ndarray:
        total = sum(c * v for c, v in zip(self.coefficients, values))
        return np.conj(total) if self.conjugated else total

    def evaluate(self, r, q=None) -> np.ndarray:
        return self._combine([m.evaluate(r, q) for m in self.components])

    def jacobian(self, r, q=None) -> np.ndarray:
        return self._combine([m.jacobian(r, q) for m in self.components])

    @property
    def has_grad_q(self) -> bool:
        return all(m.has_grad_q for m in self.components)

    def grad_q(self, r, q=None) -> Optional[np.ndarray]:
        if not self.has_grad_q:
            return None
        return self._combine([m.grad_q(r, q) for m in self.components])


def _transverse_polarization(k_vec: np.ndarray, polarization) -> np.ndarray:
    pol = as_vector(polarization, "polarization")
    norm = np.linalg.norm(pol)
    if norm == 0:
        raise DomainError("polarization must be nonzero")
    pol = pol / norm
    k_norm = np.linalg.norm(k_vec)
    if k_norm == 0:
        raise DomainError("wavevector must be nonzero")
    if abs(pol @ k_vec) > 1e-12 * k_norm:
        raise DomainError(f"polarization {pol} is not transverse to k = {k_vec}")
    return pol


def box_wavevector(lengths, indices) -> np.ndarray:
    """Wavevector 2 pi n_i / L_i commensurate with the periodic box"""
    return 2.0 * math.pi * np.asarray(indices, dtype=float) / as_vector(lengths, "box")


def gaussian_paraxial_mode(beam: BeamParams) -> GaussianParaxialMode:
    return GaussianParaxialMode(beam)


def standing_wave_mode(k_vec, polarization, volume, phase: float = 0.0) -> StandingWaveMode:
    """`volume` is a scalar (cubic box) or the three box lengths"""
    return StandingWaveMode(k_vec, polarization, NormalizationDomain.box(volume), phase)


def plane_wave_mode(k_vec, polarization, volume) -> PlaneWaveMode:
    return PlaneWaveMode(k_vec, polarization, NormalizationDomain.box(volume))


def comoving_mode(base: ModeField) -> ComovingMode:
    return ComovingMode(base)


@dataclass(frozen=True)
class UnitaryMix:
    """U_kj mixing degenerate real modes u_j into complex modes f_k = sum_j U*_kj u_j"""
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        if mat.shape[0] != mat.shape[1]:
            raise DomainError(f"mixing matrix must be square, got {mat.shape}")
        deviation = np.max(np.abs(mat @ mat.conj().T - np.eye(len(mat))))
        if deviation > UNITARITY_TOL:
            raise DomainError(f"mixing matrix is not unitary (max |U U^+ - 1| = {deviation:.3e})")
        object.__setattr__(self, 'matrix', mat)

    @classmethod
    def identity(cls, size: int) -> 'UnitaryMix':
        return cls(np.eye(size))

    @classmethod
    def standing_to_traveling(cls) -> 'UnitaryMix':
        """(1/sqrt2)[[1, i], [1, -i]]: (sin, cos) pair -> counter-propagating waves"""
        return cls(np.array([[1.0, 1j], [1.0, -1j]]) / math.sqrt(2.0))


def complex_from_real(reals: Sequence[ModeField], mix: UnitaryMix) -> List[ModeField]:
    """f_k = sum_j U*_kj u_j; each row may only mix modes of equal frequency"""
    if len(reals) != len(mix.matrix):
        raise DomainError(f"{len(reals)} modes but a {len(mix.matrix)}x{len(mix.matrix)} mixing matrix")
    if not all(m.is_real for m in reals):
        raise DomainError("complex_from_real expects real modes")

    result = []
    for k, row in enumerate(mix.matrix):
        mixed = [j for j in range(len(reals)) if abs(row[j]) > UNITARITY_TOL]
        omegas = np.array([reals[j].omega for j in mixed])
        if np.ptp(omegas) > UNITARITY_TOL * np.max(omegas):
            raise DomainError(f"row {k} mixes modes of different frequency: {omegas}")
        if len(mixed) == 1 and row[mixed[0]] == 1:
            result.append(reals[mixed[0]])
            continue
        result.append(LinearCombinationMode([reals[j] for j in mixed], np.conj(row[mixed]),
                                            name=f"mix{k}"))
    return result


def check_gauge(mode: ModeField, sphere: Optional[DielectricSphere], q=None,
                quad: Optional[QuadratureSpec] = None) -> float:
    """
    max |div(eps f)| / (k max|f|) over sample points around q.

    Samples fill a ball of twice the sphere radius (one wavelength without a
    sphere); points within the surface shell where eps jumps are skipped.
    Inside and outside the sphere eps is constant, so div(eps f) = eps div f.
    """
    quad = quad or QuadratureSpec(radial_order=8, polar_order=8, azimuthal_order=16)
    center = _origin(q)
    radius = 2.0 * sphere.radius if sphere is not None else 2.0 * math.pi / mode.omega
    points, _ = sphere_rule(center, radius, quad)

    eps = np.ones(len(points))
    if sphere is not None:
        dist = np.linalg.norm(points - center, axis=-1)
        keep = np.abs(dist - sphere.radius) > GAUGE_SHELL_FRACTION * sphere.radius
        points, dist = points[keep], dist[keep]
        eps = np.where(dist <= sphere.radius, sphere.epsilon, 1.0)

    div = np.abs(eps * mode.divergence(points, center))
    scale = mode.omega * np.max(np.linalg.norm(mode.evaluate(points, center), axis=-1))
    residual = float(np.max(div) / scale) if scale > 0 else 0.0
    logger.debug(f"Gauge residual for {mode.name}: {residual:.3e} over {len(points)} points")
    return residual


@dataclass
class GramResult:
    matrix: np.ndarray
    max_deviation: float


def check_orthonormality(modes: Sequence[ModeField], sphere: Optional[DielectricSphere], q=None,
                         quad: Optional[QuadratureSpec] = None, points_per_axis: int = 32) -> GramResult:
    """
    G_kj = integral of eps f_k* . f_j over the periodic box.

    The vacuum part is a midpoint sum over the box (exact for commensurate
    wavevectors); the sphere adds (n^2 - 1) times its interior integral.
    """
    domains = {m.normalization_volume for m in modes}
    if len(domains) != 1:
        raise DomainError(f"modes do not share a normalization volume: {sorted(map(str, domains))}")
    domain = domains.pop()
    if domain.kind != "box":
        raise DomainError("Gram matrices need periodic-box modes; use transverse_norm for beam modes")

    def overlap(points):
        fields = np.stack([m.evaluate(points, q) for m in modes], axis=1)
        return np.einsum('nki,nji->nkj', fields.conj(), fields)

    gram = integrate_over_box(overlap, domain.lengths, points_per_axis)
    if sphere is not None:
        inside = integrate_over_sphere(overlap, _origin(q), sphere.radius, quad)
        gram = gram + (sphere.epsilon - 1.0) * inside.value

    deviation = float(np.max(np.abs(gram - np.eye(len(modes)))))
    logger.debug(f"Gram matrix of {len(modes)} modes: max deviation {deviation:.3e}")
    return GramResult(gram, deviation)


@dataclass
class FrequencyShift:
    omega: float
    relative_shift: float
    gradient: Optional[np.ndarray]
    error_estimate: float
    converged: bool


def mode_frequency_shift(mode: ModeField, sphere: DielectricSphere, q,
                         quad: Optional[QuadratureSpec] = None,
                         with_gradient: bool = False) -> FrequencyShift:
    """
    First-order cavity perturbation: omega(q) = omega0 [1 - 1/2 (n^2 - 1) int_sphere |f|^2].
    The gradient differentiates under the integral; the ball moves with q.
    """
    center = as_vector(q, "q")

    def integrand(points):
        f = mode.evaluate(points, center)
        intensity = np.sum(np.abs(f) ** 2, axis=-1)
        if not with_gradient:
            return intensity
        jac = mode.jacobian(points, center)
        if mode.has_grad_q:
            jac = jac + mode.grad_q(points, center)
        grad = 2.0 * np.real(np.einsum('nil,nl->ni', jac, f.conj()))
        return np.concatenate([intensity[:, None], grad], axis=1)

    result = integrate_over_sphere(integrand, center, sphere.radius, quad)
    value = np.atleast_1d(result.value)
    factor = -0.5 * (sphere.epsilon - 1.0)
    relative = factor * float(value[0])
    gradient = mode.omega * factor * value[1:] if with_gradient else None
    return FrequencyShift(mode.omega * (1.0 + relative), relative, gradient,
                          result.error_estimate, result.converged)


def transverse_norm(mode: GaussianParaxialMode, z: float, order: int = 48) -> Tuple[float, float]:
    """
    Integrals of |f_perp|^2 and |f_z|^2 over the transverse plane at z.
    Gauss-Hermite in x and y scaled to the local beam radius.
    """
    if not isinstance(mode, GaussianParaxialMode):
        raise DomainError("transverse_norm is defined for Gaussian beam modes")
    t, wt = np.polynomial.hermite.hermgauss(order)
    scale = float(mode.beam.beam_radius(z)) / math.sqrt(2.0)
    xs = scale * t
    weights = scale * wt * np.exp(t ** 2)
    gx, gy = np.meshgrid(xs, xs, indexing='ij')
    points = np.stack([gx, gy, np.full_like(gx, z)], axis=-1)
    f = mode.evaluate(points)
    w2 = np.outer(weights, weights)
    transverse = float(np.sum(w2 * (np.abs(f[..., 0]) ** 2 + np.abs(f[..., 1]) ** 2)))
    longitudinal = float(np.sum(w2 * np.abs(f[..., 2]) ** 2))
    return transverse, longitudinal


FieldEvaluator = Callable[[np.ndarray], np.ndarray]


def mode_snapshot_fields(mode: ModeField, alpha: complex, t: float = 0.0,
                         q=None) -> Tuple[FieldEvaluator, FieldEvaluator]:
    """
    Real E and B of a single mode with classical amplitude alpha at time t:
    A = (alpha e^{-i w t} f + c.c.) / sqrt(2 w), E = -dA/dt, B = curl A.
    """
    omega = mode.omega
    phasor = complex(alpha) * np.exp(-1j * omega * t)

    def electric(points):
        return 2.0 * np.real(1j * math.sqrt(omega / 2.0) * phasor * mode.evaluate(points, q))

    def magnetic(points):
        return 2.0 * np.real(phasor * mode.curl(points, q)) / math.sqrt(2.0 * omega)

    return electric, magnetic
