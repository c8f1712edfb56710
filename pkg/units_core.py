# -*- coding: utf-8 -*-
"""
יחידות וקבועים - Units, physical constants, parameter bundles and the
permittivity profile of the sphere.

Internal computation uses natural units with hbar = c = eps0 = 1 while
lengths keep their meaning in meters (scaled by UnitSystem.length_scale).
Parameter bundles (DielectricSphere, BeamParams) always hold SI values;
conversion to the internal system happens where a computation needs it.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np
from scipy import constants as sc

from errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

C = sc.c
HBAR = sc.hbar
KB = sc.k

ArrayLike = Union[float, np.ndarray]


def as_vector(value, name: str = "vector") -> np.ndarray:
    """Coerce to a float 3-vector"""
    vec = np.asarray(value, dtype=float).reshape(-1)
    if vec.shape != (3,):
        raise DomainError(f"{name} must have 3 components, got shape {vec.shape}")
    return vec


@dataclass(frozen=True)
class UnitSystem:
    """
    Unit convention of a value set.

    convention: "natural" (hbar = c = eps0 = mu0 = 1) or "SI"
    length_scale: meters per internal length unit
    """
    convention: str = "natural"
    length_scale: float = 1.0

    def __post_init__(self):
        if self.convention not in ("natural", "SI"):
            raise ConfigurationError(f"unknown unit convention '{self.convention}'")
        if not self.length_scale > 0:
            raise ConfigurationError("length_scale must be positive")

    @property
    def label(self) -> str:
        if self.convention == "SI":
            return "SI"
        return f"natural(hbar=c=eps0=1, length={self.length_scale:g} m)"

    def _factor(self, quantity: str) -> float:
        """Multiplier taking an SI value to this unit system"""
        if self.convention == "SI":
            return 1.0
        ell = self.length_scale
        factors = {
            'dimensionless': 1.0,
            'length': 1.0 / ell,
            'wavenumber': ell,
            'time': C / ell,
            'frequency': ell / C,
            'velocity': 1.0 / C,
            'mass': C * ell / HBAR,
            'momentum': ell / HBAR,
            'angular_momentum': 1.0 / HBAR,
            'energy': ell / (HBAR * C),
            'force': ell ** 2 / (HBAR * C),
            'power': ell ** 2 / (HBAR * C ** 2),
            'moment_of_inertia': C / (HBAR * ell),
        }
        try:
            return factors[quantity]
        except KeyError:
            raise DomainError(f"no conversion rule for quantity '{quantity}'") from None

    def to_internal(self, value: ArrayLike, quantity: str) -> ArrayLike:
        result = np.asarray(value, dtype=float) * self._factor(quantity)
        return float(result) if result.ndim == 0 else result

    def to_si(self, value: ArrayLike, quantity: str) -> ArrayLike:
        result = np.asarray(value, dtype=float) / self._factor(quantity)
        return float(result) if result.ndim == 0 else result


NATURAL = UnitSystem()
SI = UnitSystem("SI")


def derive_inertia(radius: float, density: Optional[float]) -> Tuple[float, float]:
    """Mass and moment of inertia of a uniform sphere: m = 4/3 pi R^3 rho, I = 2/5 m R^2"""
    if density is None:
        raise ConfigurationError("density is required to derive mass and moment of inertia")
    if density <= 0 or radius < 0:
        raise DomainError(f"need density > 0 and radius >= 0 (got rho={density}, R={radius})")
    mass = 4.0 / 3.0 * math.pi * radius ** 3 * density
    return mass, 0.4 * mass * radius ** 2


@dataclass(frozen=True)
class DielectricSphere:
    """Rigid, nondispersive, nonmagnetic dielectric sphere (SI values)"""
    radius: float
    refractive_index: float
    mass: float
    moment_of_inertia: float
    density: Optional[float] = None
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"sphere radius must be positive, got {self.radius}")
        if not self.refractive_index > 1:
            raise ConfigurationError(f"refractive index must exceed 1, got {self.refractive_index}")
        if not (self.mass > 0 and self.moment_of_inertia > 0):
            raise ConfigurationError("mass and moment of inertia must be positive")
        if self.density is not None:
            mass, inertia = derive_inertia(self.radius, self.density)
            if mass != self.mass or inertia != self.moment_of_inertia:
                raise ConfigurationError("mass / moment of inertia inconsistent with density")
        object.__setattr__(self, 'center', tuple(as_vector(self.center, "center")))

    @classmethod
    def from_density(cls, radius: float, refractive_index: float, density: float,
                     center=(0.0, 0.0, 0.0)) -> 'DielectricSphere':
        if not radius > 0:
            raise ConfigurationError(f"sphere radius must be positive, got {radius}")
        if density is None or not density > 0:
            raise ConfigurationError(f"sphere density must be positive, got {density}")
        mass, inertia = derive_inertia(radius, density)
        return cls(radius, refractive_index, mass, inertia, density, tuple(center))

    @property
    def epsilon(self) -> float:
        return self.refractive_index ** 2

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius ** 3

    def at(self, q) -> 'DielectricSphere':
        """Same sphere moved to center q"""
        return replace(self, center=tuple(as_vector(q, "q")))

    def scaled(self, radius: float) -> 'DielectricSphere':
        """Same material with a different radius (inertia rederived when density known)"""
        if self.density is not None:
            return DielectricSphere.from_density(radius, self.refractive_index, self.density, self.center)
        ratio = radius / self.radius
        return replace(self, radius=radius, mass=self.mass * ratio ** 3,
                       moment_of_inertia=self.moment_of_inertia * ratio ** 5)


def photon_number_from_power(power: float, cavity_length: float, omega: float) -> float:
    """
    Mean photon number <n> = P (L_c / c) / (hbar omega)
    power in W, cavity_length in m, omega in rad/s
    """
    if omega <= 0:
        raise DomainError(f"angular frequency must be positive, got {omega}")
    if power < 0 or cavity_length <= 0:
        raise DomainError("need power >= 0 and cavity length > 0")
    return power * (cavity_length / C) / (HBAR * omega)


@dataclass(frozen=True)
class BeamParams:
    """Gaussian beam / ring-cavity parameters (SI values)"""
    wavelength: float
    rayleigh_range: float
    cavity_length: float
    photon_number: float = 0.0
    power: Optional[float] = None

    def __post_init__(self):
        if not (self.wavelength > 0 and self.rayleigh_range > 0):
            raise ConfigurationError("wavelength and Rayleigh range must be positive (k z_R > 0)")
        if not self.cavity_length > 0:
            raise ConfigurationError("effective cavity length must be positive")
        if self.photon_number < 0:
            raise ConfigurationError("mean photon number must be non-negative")

    @classmethod
    def from_power(cls, wavelength: float, rayleigh_range: float, cavity_length: float,
                   power: float) -> 'BeamParams':
        omega = 2.0 * math.pi * C / wavelength
        n_photons = photon_number_from_power(power, cavity_length, omega)
        logger.debug(f"P={power} W, L_c={cavity_length} m -> <n>={n_photons:.6g}")
        return cls(wavelength, rayleigh_range, cavity_length, n_photons, power)

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def omega(self) -> float:
        """Internal angular frequency (c = 1, so omega = k in 1/m)"""
        return self.k

    @property
    def omega_si(self) -> float:
        return C * self.k

    @property
    def waist(self) -> float:
        return math.sqrt(2.0 * self.rayleigh_range / self.k)

    def beam_radius(self, z: ArrayLike) -> ArrayLike:
        """w(z) = sqrt(2 (z^2 + z_R^2) / (k z_R))"""
        return np.sqrt(2.0 * (np.asarray(z) ** 2 + self.rayleigh_range ** 2) / (self.k * self.rayleigh_range))

    def with_photon_number(self, n_photons: float) -> 'BeamParams':
        return replace(self, photon_number=n_photons)


def permittivity(r, q, sphere: DielectricSphere) -> ArrayLike:
    """
    eps(r, q): n^2 inside the closed ball |r - q| <= R, 1 elsewhere.
    Accepts a single point or an (..., 3) array of points.
    """
    r = np.asarray(r, dtype=float)
    dist = np.linalg.norm(r - as_vector(q, "q"), axis=-1)
    eps = np.where(dist <= sphere.radius, sphere.epsilon, 1.0)
    return float(eps) if eps.ndim == 0 else eps


def thermal_velocity(mass: float, temperature: float) -> float:
    """Equipartition rms speed per axis, sqrt(k_B T / m), in m/s"""
    if mass <= 0 or temperature < 0:
        raise DomainError("need mass > 0 and temperature >= 0")
    return math.sqrt(KB * temperature / mass)


def thermal_angular_velocity(moment_of_inertia: float, temperature: float) -> float:
    """Equipartition rms angular speed per axis, sqrt(k_B T / I), in rad/s"""
    if moment_of_inertia <= 0 or temperature < 0:
        raise DomainError("need I > 0 and temperature >= 0")
    return math.sqrt(KB * temperature / moment_of_inertia)
