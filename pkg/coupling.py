# -*- coding: utf-8 -*-
"""
צימודים - Velocity-dependent coupling coefficients.

All (eps - 1)-weighted integrals run over the sphere interior, where
eps - 1 = n^2 - 1 is constant. Values are per photon, in internal natural
units (hbar = c = 1, lengths in meters): lambda-type in 1/m (momentum),
gamma-type dimensionless (angular momentum in units of hbar).
"""

import logging
import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from errors import DomainError
from modes import ModeField, StandingWaveMode, mode_frequency_shift
from quadrature import QuadratureSpec, integrate_over_box, integrate_over_sphere
from units_core import NATURAL, BeamParams, DielectricSphere, UnitSystem, as_vector

logger = logging.getLogger(__name__)


class Provenance(str, Enum):
    QUADRATURE = "quadrature"
    CLOSED_FORM = "closed_form"


MOMENTUM_KINDS = ("lambda", "eta", "Lambda")
ANGULAR_KINDS = ("gamma", "g", "Gamma")


@dataclass
class CouplingVector:
    """A coupling 3-vector with the position it belongs to and where it came from"""
    kind: str
    value: np.ndarray
    provenance: Provenance
    at_q: np.ndarray
    error_estimate: float = 0.0
    converged: bool = True
    note: str = ""

    def __post_init__(self):
        self.value = np.asarray(self.value)
        self.at_q = as_vector(self.at_q, "q")

    @property
    def quantity(self) -> str:
        return "momentum" if self.kind in MOMENTUM_KINDS else "angular_momentum"

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.value))

    def in_hbar_k(self, k: float) -> np.ndarray:
        """lambda-type value in units of hbar k"""
        return np.real(self.value) / k

    def to_si(self, units: UnitSystem = NATURAL) -> np.ndarray:
        return units.to_si(np.real(self.value), self.quantity)


@dataclass
class ComplexCouplings:
    """eta(1), eta(2), g(1), g(2) of a complex mode pair (k, j)"""
    eta1: np.ndarray
    eta2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    error_estimate: float = 0.0
    converged: bool = True


def _center(q) -> np.ndarray:
    return as_vector(q, "q")


def _pair_integrals(mode_k: ModeField, mode_j: ModeField, sphere: DielectricSphere, q,
                    quad: Optional[QuadratureSpec]):
    """
    Interior integrals of f_k* x curl f_j, f_k x curl f_j and their moments
    (r - q) x [...], stacked as (4, 3): [conj, plain, conj moment, plain moment].
    """
    center = _center(q)

    def integrand(points):
        fk = mode_k.evaluate(points, center)
        curl_j = mode_j.curl(points, center)
        plain = np.cross(fk, curl_j)
        conj = np.cross(fk.conj(), curl_j)
        arm = points - center
        return np.stack([conj, plain, np.cross(arm, conj), np.cross(arm, plain)], axis=1)

    return integrate_over_sphere(integrand, center, sphere.radius, quad)


def _gradq_overlap(mode_k: ModeField, mode_j: ModeField, sphere: Optional[DielectricSphere], q,
                   quad: Optional[QuadratureSpec], conjugate_k: bool,
                   points_per_axis: int = 32) -> np.ndarray:
    """
    integral of eps sum_l (f_k . e_l) grad_q (f_j . e_l) over the normalization box.
    Zero when mode_j declares grad_q absent.
    """
    if not mode_j.has_grad_q:
        return np.zeros(3, dtype=complex)
    domain = mode_j.normalization_volume
    if domain.kind != "box":
        raise DomainError("the grad_q term needs a periodic-box mode")
    center = _center(q)

    def integrand(points):
        fk = mode_k.evaluate(points, center)
        if conjugate_k:
            fk = fk.conj()
        return np.einsum('nl,nil->ni', fk, mode_j.grad_q(points, center))

    total = integrate_over_box(integrand, domain.lengths, points_per_axis)
    if sphere is not None:
        inside = integrate_over_sphere(integrand, center, sphere.radius, quad)
        total = total + (sphere.epsilon - 1.0) * inside.value
    return np.asarray(total)


def eta_kj(mode_k: ModeField, mode_j: ModeField, sphere: Optional[DielectricSphere], q,
           quad: Optional[QuadratureSpec] = None) -> CouplingVector:
    """eta_kj(q) = -int [eps sum_l u_k,l grad_q u_j,l + (eps - 1) u_k x curl u_j] for real modes"""
    if not (mode_k.is_real and mode_j.is_real):
        raise DomainError("eta_kj takes real modes; use complex_coupling_coeffs for complex ones")
    value = -_gradq_overlap(mode_k, mode_j, sphere, q, quad, conjugate_k=False).real
    error, converged = 0.0, True
    if sphere is not None:
        result = _pair_integrals(mode_k, mode_j, sphere, q, quad)
        value = value - (sphere.epsilon - 1.0) * np.real(result.value[1])
        error, converged = result.error_estimate, result.converged
    return CouplingVector("eta", value, Provenance.QUADRATURE, q, error, converged)


def g_kj(mode_k: ModeField, mode_j: ModeField, sphere: Optional[DielectricSphere], q,
         quad: Optional[QuadratureSpec] = None) -> CouplingVector:
    """g_kj(q) = -int (eps - 1) (r - q) x [u_k x curl u_j] for real modes"""
    if not (mode_k.is_real and mode_j.is_real):
        raise DomainError("g_kj takes real modes; use complex_coupling_coeffs for complex ones")
    if sphere is None:
        return CouplingVector("g", np.zeros(3), Provenance.QUADRATURE, q, note="no sphere")
    result = _pair_integrals(mode_k, mode_j, sphere, q, quad)
    value = -(sphere.epsilon - 1.0) * np.real(result.value[3])
    return CouplingVector("g", value, Provenance.QUADRATURE, q, result.error_estimate, result.converged)


def complex_coupling_coeffs(mode_k: ModeField, mode_j: ModeField, sphere: Optional[DielectricSphere], q,
                            quad: Optional[QuadratureSpec] = None) -> ComplexCouplings:
    """The four complex-mode coefficients; (1) uses f_k, (2) uses f_k*"""
    eta1 = -_gradq_overlap(mode_k, mode_j, sphere, q, quad, conjugate_k=False)
    eta2 = -_gradq_overlap(mode_k, mode_j, sphere, q, quad, conjugate_k=True)
    if sphere is None:
        zero = np.zeros(3, dtype=complex)
        return ComplexCouplings(eta1, eta2, zero, zero.copy())
    result = _pair_integrals(mode_k, mode_j, sphere, q, quad)
    scale = -(sphere.epsilon - 1.0)
    conj, plain, conj_moment, plain_moment = (np.asarray(v) for v in result.value)
    return ComplexCouplings(eta1 + scale * plain, eta2 + scale * conj,
                            scale * plain_moment, scale * conj_moment,
                            result.error_estimate, result.converged)


def _single_mode_integrand(mode: ModeField, center: np.ndarray) -> Callable:
    """Columns: f* x curl f (3), its moment (3), |f|^2 (1)"""

    def integrand(points):
        f = mode.evaluate(points, center)
        density = np.cross(f.conj(), mode.curl(points, center))
        moment = np.cross(points - center, density)
        intensity = np.sum(np.abs(f) ** 2, axis=-1)
        return np.concatenate([density, moment, intensity[:, None]], axis=1)

    return integrand


def _real_mode_null(kind: str, q) -> CouplingVector:
    return CouplingVector(kind, np.zeros(3), Provenance.QUADRATURE, q,
                          note="real mode: f* x curl f is real, coupling vanishes identically")


def lambda_single(mode: ModeField, sphere: DielectricSphere, q, quad: Optional[QuadratureSpec] = None,
                  include_gradq: bool = False) -> CouplingVector:
    """lambda(q) = -hbar Im int (eps - 1) f* x curl f, plus the grad_q term on request"""
    if mode.is_real:
        return _real_mode_null("lambda", q)
    center = _center(q)
    result = integrate_over_sphere(_single_mode_integrand(mode, center), center, sphere.radius, quad)
    value = -(sphere.epsilon - 1.0) * np.imag(result.value[:3])
    if include_gradq and mode.has_grad_q:
        value = value - np.imag(_gradq_overlap(mode, mode, sphere, q, quad, conjugate_k=True))
    return CouplingVector("lambda", value, Provenance.QUADRATURE, center,
                          result.error_estimate, result.converged)


def gamma_single(mode: ModeField, sphere: DielectricSphere, q,
                 quad: Optional[QuadratureSpec] = None) -> CouplingVector:
    """gamma(q) = -hbar Im int (eps - 1) (r - q) x [f* x curl f]"""
    if mode.is_real:
        return _real_mode_null("gamma", q)
    center = _center(q)
    result = integrate_over_sphere(_single_mode_integrand(mode, center), center, sphere.radius, quad)
    value = -(sphere.epsilon - 1.0) * np.imag(result.value[3:6])
    return CouplingVector("gamma", value, Provenance.QUADRATURE, center,
                          result.error_estimate, result.converged)


@dataclass
class ConstituentLambda:
    """lambda of a standing wave summed from the pair table of its traveling halves"""
    forward: np.ndarray
    backward: np.ndarray
    cross: np.ndarray
    converged: bool = True

    @property
    def value(self) -> np.ndarray:
        return self.forward + self.backward + self.cross

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.value))

    @property
    def constituent_magnitude(self) -> float:
        return float(max(np.linalg.norm(self.forward), np.linalg.norm(self.backward)))


def standing_lambda_from_constituents(mode: StandingWaveMode, sphere: DielectricSphere, q,
                                      quad: Optional[QuadratureSpec] = None) -> ConstituentLambda:
    """
    f = (f_+ + f_-)/sqrt(2) gives lambda = 1/2 Im sum_kj eta_kj over the pair:
    the two traveling momenta cancel and the cross terms are real point by point.
    """
    table = coupling_table(list(mode.constituents()), sphere, q, quad)
    return ConstituentLambda(0.5 * np.imag(table.eta[0, 0]), 0.5 * np.imag(table.eta[1, 1]),
                             0.5 * np.imag(table.eta[0, 1] + table.eta[1, 0]), table.converged)


def lambda_focus_closed_form(beam: BeamParams, sphere: DielectricSphere) -> CouplingVector:
    """-(4/3) hbar (n^2 - 1) / L_c (R/z_R)^3 (k z_R)^2 e_z, valid for kR << 1 at the focus"""
    k, z_r = beam.k, beam.rayleigh_range
    magnitude = 4.0 / 3.0 * (sphere.epsilon - 1.0) / beam.cavity_length * (sphere.radius / z_r) ** 3 * (k * z_r) ** 2
    return CouplingVector("lambda", np.array([0.0, 0.0, -magnitude]), Provenance.CLOSED_FORM, np.zeros(3))


def gamma_focus_closed_form(beam: BeamParams, sphere: DielectricSphere, q) -> CouplingVector:
    """-(4/15) hbar (n^2 - 1) z_R / L_c (R/z_R)^5 (k z_R)^2 (1 + 2 k z_R) (-q_y e_x + q_x e_y) / z_R"""
    k, z_r = beam.k, beam.rayleigh_range
    center = _center(q)
    prefactor = (-4.0 / 15.0 * (sphere.epsilon - 1.0) * z_r / beam.cavity_length
                 * (sphere.radius / z_r) ** 5 * (k * z_r) ** 2 * (1.0 + 2.0 * k * z_r))
    direction = np.array([-center[1], center[0], 0.0]) / z_r
    return CouplingVector("gamma", prefactor * direction, Provenance.CLOSED_FORM, center)


FieldEvaluator = Callable[[np.ndarray], np.ndarray]


def field_momentum_in_sphere(electric: FieldEvaluator, magnetic: FieldEvaluator, sphere: DielectricSphere,
                             q, quad: Optional[QuadratureSpec] = None) -> CouplingVector:
    """Lambda = int (eps - 1) E x B over the sphere"""
    center = _center(q)
    result = integrate_over_sphere(lambda pts: np.cross(electric(pts), magnetic(pts)),
                                   center, sphere.radius, quad)
    return CouplingVector("Lambda", (sphere.epsilon - 1.0) * np.real(result.value),
                          Provenance.QUADRATURE, center, result.error_estimate, result.converged)


def field_angular_momentum_in_sphere(electric: FieldEvaluator, magnetic: FieldEvaluator,
                                     sphere: DielectricSphere, q,
                                     quad: Optional[QuadratureSpec] = None) -> CouplingVector:
    """Gamma = int (eps - 1) (r - q) x (E x B) over the sphere"""
    center = _center(q)

    def integrand(points):
        return np.cross(points - center, np.cross(electric(points), magnetic(points)))

    result = integrate_over_sphere(integrand, center, sphere.radius, quad)
    return CouplingVector("Gamma", (sphere.epsilon - 1.0) * np.real(result.value),
                          Provenance.QUADRATURE, center, result.error_estimate, result.converged)


@dataclass
class CouplingTable:
    """
    eta(2)_kj and g(2)_kj for a mode set at one position (eta_kj, g_kj for
    real modes), with the mode frequencies omega_k(q) shifted by the sphere
    sitting at that position.
    """
    eta: np.ndarray
    g: np.ndarray
    omegas: np.ndarray
    at_q: np.ndarray = field(default_factory=lambda: np.zeros(3))
    converged: bool = True

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=complex)
        self.g = np.asarray(self.g, dtype=complex)
        self.omegas = np.asarray(self.omegas, dtype=float)
        size = len(self.omegas)
        if self.eta.shape != (size, size, 3) or self.g.shape != (size, size, 3):
            raise DomainError(f"coupling tensors must have shape ({size}, {size}, 3)")

    @property
    def size(self) -> int:
        return len(self.omegas)

    def generator(self, q_dot, omega_body) -> np.ndarray:
        """
        Hermitian RWA interaction matrix M with i da/dt = (diag(omega) + M) a:
        C_kj = (q_dot . eta_kj + omega_body . g_kj) sqrt(omega_k / omega_j),
        M = -(i/2)(C - C^+).
        """
        ratio = np.sqrt(np.outer(self.omegas, 1.0 / self.omegas))
        c = (self.eta @ as_vector(q_dot, "q_dot") + self.g @ as_vector(omega_body, "omega_body")) * ratio
        return -0.5j * (c - c.conj().T)


def coupling_table(modes: Sequence[ModeField], sphere: Optional[DielectricSphere], q,
                   quad: Optional[QuadratureSpec] = None, include_gradq: bool = False) -> CouplingTable:
    """All K x K pairs in one quadrature pass, then one pass per mode for omega_k(q)"""
    center = _center(q)
    size = len(modes)
    omegas = [m.omega if sphere is None else mode_frequency_shift(m, sphere, center, quad).omega
              for m in modes]
    eta = np.zeros((size, size, 3), dtype=complex)
    g = np.zeros((size, size, 3), dtype=complex)
    converged = True

    if sphere is not None:
        def integrand(points):
            fields = np.stack([m.evaluate(points, center) for m in modes], axis=1)
            curls = np.stack([m.curl(points, center) for m in modes], axis=1)
            density = np.cross(fields.conj()[:, :, None, :], curls[:, None, :, :])
            moment = np.cross((points - center)[:, None, None, :], density)
            return np.stack([density, moment], axis=1)

        result = integrate_over_sphere(integrand, center, sphere.radius, quad)
        eta = -(sphere.epsilon - 1.0) * result.value[0]
        g = -(sphere.epsilon - 1.0) * result.value[1]
        converged = result.converged

    if include_gradq:
        for k, mode_k in enumerate(modes):
            for j, mode_j in enumerate(modes):
                eta[k, j] -= _gradq_overlap(mode_k, mode_j, sphere, center, quad, conjugate_k=True)

    logger.debug(f"Coupling table for {size} modes at q={center}")
    return CouplingTable(eta, g, omegas, center, converged)


@dataclass
class FieldSample:
    """
    Per-photon lambda, gamma and frequency at M positions. The frequency is
    kept as the bare omega0 plus the sphere-induced shift so that gradients
    are taken of the shift alone; grad_shift is filled when a model has it
    in closed form.
    """
    lam: np.ndarray
    gam: np.ndarray
    shift: np.ndarray
    bare: float
    grad_shift: Optional[np.ndarray] = None

    @property
    def omega(self) -> np.ndarray:
        return self.bare + self.shift


class CouplingField:
    """Position-dependent lambda(q), gamma(q), omega(q) of a single complex mode"""

    def __init__(self, mode: ModeField, sphere: DielectricSphere):
        self.mode = mode
        self.sphere = sphere

    @property
    def length_scale(self) -> float:
        """Scale on which the couplings vary (z_R for beams, 1/k otherwise)"""
        beam = getattr(self.mode, 'beam', None)
        return beam.rayleigh_range if beam is not None else 1.0 / self.mode.omega

    def sample(self, qs) -> FieldSample:
        raise NotImplementedError

    def lam_many(self, qs) -> np.ndarray:
        """lambda alone at M positions"""
        return self.sample(qs).lam

    def lam(self, q) -> np.ndarray:
        return self.sample(np.atleast_2d(q)).lam[0]

    def gam(self, q) -> np.ndarray:
        return self.sample(np.atleast_2d(q)).gam[0]

    def omega(self, q) -> float:
        return float(self.sample(np.atleast_2d(q)).omega[0])

    def adiabatic(self) -> 'CouplingField':
        """Same frequency landscape with lambda = gamma = 0"""
        return AdiabaticCouplingField(self)


class SmallSphereCouplingField(CouplingField):
    """
    Leading order in R:
    lambda = -(n^2 - 1) V S(q), gamma = -(n^2 - 1) (V R^2 / 5) curl S(q),
    omega = omega0 [1 - (n^2 - 1) V |f(q)|^2 / 2], with S = Im[f* x curl f].
    grad omega is analytic: -omega0 (n^2 - 1) V Re[J f*].
    """

    def __init__(self, mode: ModeField, sphere: DielectricSphere, curl_step: Optional[float] = None):
        super().__init__(mode, sphere)
        self.curl_step = curl_step or 1e-4 * self.length_scale

    def _poynting(self, jac: np.ndarray, f: np.ndarray) -> np.ndarray:
        curl_f = np.stack([jac[..., 1, 2] - jac[..., 2, 1], jac[..., 2, 0] - jac[..., 0, 2],
                           jac[..., 0, 1] - jac[..., 1, 0]], axis=-1)
        return np.imag(np.cross(f.conj(), curl_f))

    def lam_many(self, qs) -> np.ndarray:
        points = np.atleast_2d(np.asarray(qs, dtype=float))
        poynting = self._poynting(self.mode.jacobian(points), self.mode.evaluate(points))
        return -(self.sphere.epsilon - 1.0) * self.sphere.volume * poynting

    def sample(self, qs) -> FieldSample:
        qs = np.atleast_2d(np.asarray(qs, dtype=float))
        count, h = len(qs), self.curl_step
        shifts = np.concatenate([np.zeros((1, 3)), h * np.eye(3), -h * np.eye(3)])
        points = (qs[None, :, :] + shifts[:, None, :]).reshape(-1, 3)

        f = self.mode.evaluate(points)
        jac = self.mode.jacobian(points)
        poynting = self._poynting(jac, f).reshape(7, count, 3)
        d = (poynting[1:4] - poynting[4:7]) / (2.0 * h)
        curl = np.stack([d[1, :, 2] - d[2, :, 1], d[2, :, 0] - d[0, :, 2], d[0, :, 1] - d[1, :, 0]], axis=-1)

        contrast = self.sphere.epsilon - 1.0
        volume = self.sphere.volume
        f0, jac0 = f[:count], jac[:count]
        intensity = np.sum(np.abs(f0) ** 2, axis=-1)
        grad_intensity = 2.0 * np.real(np.einsum('nil,nl->ni', jac0, f0.conj()))
        factor = -0.5 * self.mode.omega * contrast * volume
        return FieldSample(
            lam=-contrast * volume * poynting[0],
            gam=-contrast * volume * self.sphere.radius ** 2 / 5.0 * curl,
            shift=factor * intensity,
            bare=self.mode.omega,
            grad_shift=factor * grad_intensity,
        )


class QuadratureCouplingField(CouplingField):
    """Full interior quadrature at every position, memoized per position"""

    def __init__(self, mode: ModeField, sphere: DielectricSphere, quad: Optional[QuadratureSpec] = None,
                 cache_size: int = 4096):
        super().__init__(mode, sphere)
        self.quad = quad or QuadratureSpec()
        self.converged = True
        self._lock = threading.Lock()
        self._cached = lru_cache(maxsize=cache_size)(self._compute)

    def _compute(self, key: tuple):
        center = np.array(key)
        result = integrate_over_sphere(_single_mode_integrand(self.mode, center), center,
                                       self.sphere.radius, self.quad)
        if not result.converged:
            with self._lock:
                self.converged = False
        contrast = self.sphere.epsilon - 1.0
        lam = -contrast * np.imag(result.value[:3])
        gam = -contrast * np.imag(result.value[3:6])
        shift = -0.5 * self.mode.omega * contrast * float(np.real(result.value[6]))
        if self.mode.is_real:
            lam, gam = np.zeros(3), np.zeros(3)
        return lam, gam, shift

    def sample(self, qs) -> FieldSample:
        values = [self._cached(tuple(float(v) for v in q)) for q in np.atleast_2d(qs)]
        return FieldSample(np.array([v[0] for v in values]), np.array([v[1] for v in values]),
                           np.array([v[2] for v in values]), self.mode.omega)


class AdiabaticCouplingField(CouplingField):
    def __init__(self, base: CouplingField):
        super().__init__(base.mode, base.sphere)
        self.base = base

    @property
    def length_scale(self) -> float:
        return self.base.length_scale

    def lam_many(self, qs) -> np.ndarray:
        return np.zeros((len(np.atleast_2d(qs)), 3))

    def sample(self, qs) -> FieldSample:
        sample = self.base.sample(qs)
        return replace(sample, lam=np.zeros_like(sample.lam), gam=np.zeros_like(sample.gam))


def build_coupling_field(model: str, mode: ModeField, sphere: DielectricSphere,
                         quad: Optional[QuadratureSpec] = None) -> CouplingField:
    models: Dict[str, Callable[[], CouplingField]] = {
        "small_sphere": lambda: SmallSphereCouplingField(mode, sphere),
        "quadrature": lambda: QuadratureCouplingField(mode, sphere, quad),
    }
    try:
        return models[model]()
    except KeyError:
        raise DomainError(f"unknown coupling model '{model}', expected one of {sorted(models)}") from None


def natural_coupling_scale(mode: ModeField, sphere: DielectricSphere) -> float:
    """hbar k (n^2 - 1) V_sphere / V_mode, the traveling-wave scale of lambda"""
    volume = mode.normalization_volume.volume
    return mode.omega * (sphere.epsilon - 1.0) * sphere.volume / volume


def ball_fourier_transform(kappa: float, radius: float) -> float:
    """int over |s| <= R of e^{i kappa . s} d^3s = 4 pi (sin kR - kR cos kR) / k^3"""
    kappa = abs(kappa)
    if kappa * radius < 1e-3:
        return 4.0 / 3.0 * math.pi * radius ** 3 * (1.0 - (kappa * radius) ** 2 / 10.0)
    x = kappa * radius
    return 4.0 * math.pi * (math.sin(x) - x * math.cos(x)) / kappa ** 3
