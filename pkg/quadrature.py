# -*- coding: utf-8 -*-
"""
Quadrature over the sphere volume and over periodic boxes.

Every (eps - 1)-weighted integral of the model is supported on the closed
ball |r - q| <= R where eps - 1 = n^2 - 1 is constant, so the rules here
integrate smooth integrands over the ball only and never see the
permittivity jump.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from errors import ConfigurationError
from units_core import as_vector

logger = logging.getLogger(__name__)

SCHEMES = ("gauss_legendre_product", "layered")

# Fixed chunk size: partial sums are reduced in chunk order, so the result
# does not depend on how many worker threads evaluated the chunks.
CHUNK_SIZE = 16384


@dataclass(frozen=True)
class QuadratureSpec:
    """Orders of the radial x polar x azimuthal product rule"""
    radial_order: int = 24
    polar_order: int = 48
    azimuthal_order: int = 96
    scheme: str = "gauss_legendre_product"
    target_rel_tol: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown quadrature scheme '{self.scheme}', expected one of {SCHEMES}")
        if min(self.radial_order, self.polar_order, self.azimuthal_order) < 2:
            raise ConfigurationError("quadrature orders must be at least 2")
        if not self.target_rel_tol > 0:
            raise ConfigurationError("target_rel_tol must be positive")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    @property
    def angular_order(self) -> int:
        return self.polar_order

    def refined(self) -> 'QuadratureSpec':
        return replace(self, radial_order=2 * self.radial_order, polar_order=2 * self.polar_order,
                       azimuthal_order=2 * self.azimuthal_order)

    def coarsened(self) -> 'QuadratureSpec':
        return replace(self, radial_order=max(2, self.radial_order // 2),
                       polar_order=max(2, self.polar_order // 2),
                       azimuthal_order=max(2, self.azimuthal_order // 2))


@dataclass
class QuadratureResult:
    value: np.ndarray
    error_estimate: float
    converged: bool
    n_nodes: int

    def __array__(self, dtype=None):
        return np.asarray(self.value, dtype=dtype)


@lru_cache(maxsize=32)
def _unit_ball_rule(radial_order: int, polar_order: int, azimuthal_order: int,
                    scheme: str) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the unit ball (weights include the r^2 Jacobian)"""
    x, w = np.polynomial.legendre.leggauss(radial_order)
    radii = 0.5 * (x + 1.0)
    radial_w = 0.5 * w * radii ** 2

    points, weights = [], []
    for r, wr in zip(radii, radial_w):
        if scheme == "layered":
            # inner shells carry less angular structure
            scale = max(r, 1.0 / radial_order)
            n_pol = max(4, 2 * math.ceil(0.5 * polar_order * scale))
            n_az = max(8, 2 * math.ceil(0.5 * azimuthal_order * scale))
        else:
            n_pol, n_az = polar_order, azimuthal_order
        mu, wmu = np.polynomial.legendre.leggauss(n_pol)
        phi = 2.0 * math.pi * (np.arange(n_az) + 0.5) / n_az
        sin_t = np.sqrt(1.0 - mu ** 2)
        shell = np.stack([
            np.outer(sin_t, np.cos(phi)).ravel(),
            np.outer(sin_t, np.sin(phi)).ravel(),
            np.repeat(mu, n_az),
        ], axis=-1)
        points.append(r * shell)
        weights.append(wr * np.repeat(wmu, n_az) * (2.0 * math.pi / n_az))

    nodes = np.concatenate(points)
    wts = np.concatenate(weights)
    nodes.setflags(write=False)
    wts.setflags(write=False)
    return nodes, wts


def sphere_rule(center, radius: float, quad: QuadratureSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes (N, 3) and weights (N,) on the ball of given center and radius"""
    nodes, weights = _unit_ball_rule(quad.radial_order, quad.polar_order, quad.azimuthal_order, quad.scheme)
    return as_vector(center, "center") + radius * nodes, weights * radius ** 3


def _weighted_sum(integrand: Callable, points: np.ndarray, weights: np.ndarray,
                  threads: int) -> Tuple[np.ndarray, float]:
    """sum_i w_i g(r_i) and sum_i w_i |g(r_i)|, chunk-reduced in a fixed order"""
    bounds = [(s, min(s + CHUNK_SIZE, len(weights))) for s in range(0, len(weights), CHUNK_SIZE)]

    def partial(bound):
        lo, hi = bound
        vals = np.asarray(integrand(points[lo:hi]))
        w = weights[lo:hi].reshape((-1,) + (1,) * (vals.ndim - 1))
        mags = np.abs(vals).reshape(len(vals), -1)
        mags = np.sqrt(np.sum(mags ** 2, axis=1))
        return np.sum(w * vals, axis=0), float(np.sum(weights[lo:hi] * mags))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(partial, bounds))
    else:
        parts = [partial(b) for b in bounds]

    total = parts[0][0]
    magnitude = parts[0][1]
    for value, mag in parts[1:]:
        total = total + value
        magnitude += mag
    return total, magnitude


def integrate_over_sphere(integrand: Callable[[np.ndarray], np.ndarray], center, radius: float,
                          quad: Optional[QuadratureSpec] = None, estimate_error: bool = True) -> QuadratureResult:
    """
    Integral of integrand(r) over |r - center| <= radius.

    The integrand takes an (N, 3) array of points and returns (N,) or (N, ...)
    values, real or complex. The error estimate is the change against the rule
    with halved orders, relative to the integral of |integrand|.
    """
    quad = quad or QuadratureSpec()
    points, weights = sphere_rule(center, radius, quad)
    value, magnitude = _weighted_sum(integrand, points, weights, quad.threads)

    error = 0.0
    if estimate_error:
        coarse_pts, coarse_w = sphere_rule(center, radius, quad.coarsened())
        coarse, _ = _weighted_sum(integrand, coarse_pts, coarse_w, quad.threads)
        diff = float(np.linalg.norm(np.ravel(value - coarse)))
        error = diff / magnitude if magnitude > 0 else 0.0

    converged = error <= 10.0 * quad.target_rel_tol
    if not converged:
        logger.warning(f"Sphere quadrature not converged: estimate {error:.3e} "
                       f"> 10 x target {quad.target_rel_tol:.1e} ({len(weights)} nodes)")
    return QuadratureResult(np.asarray(value), error, converged, len(weights))


def order_doubling_change(integrand: Callable, center, radius: float, quad: QuadratureSpec) -> float:
    """Relative change of the integral when every order is doubled"""
    base = integrate_over_sphere(integrand, center, radius, quad, estimate_error=False)
    fine = integrate_over_sphere(integrand, center, radius, quad.refined(), estimate_error=False)
    scale = max(float(np.linalg.norm(np.ravel(fine.value))), np.finfo(float).tiny)
    return float(np.linalg.norm(np.ravel(fine.value - base.value))) / scale


def box_rule(lengths, points_per_axis: int, origin=(0.0, 0.0, 0.0)) -> Tuple[np.ndarray, np.ndarray]:
    """
    Midpoint grid on the periodic box [origin, origin + lengths).
    Exact for trigonometric polynomials with fewer than points_per_axis
    periods along each axis.
    """
    lengths = as_vector(lengths, "box")
    axes = [origin_i + (np.arange(points_per_axis) + 0.5) * L / points_per_axis
            for origin_i, L in zip(as_vector(origin, "origin"), lengths)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, 3)
    weights = np.full(len(grid), float(np.prod(lengths)) / len(grid))
    return grid, weights


def integrate_over_box(integrand: Callable, lengths, points_per_axis: int = 32,
                       threads: int = 1) -> np.ndarray:
    points, weights = box_rule(lengths, points_per_axis)
    value, _ = _weighted_sum(integrand, points, weights, threads)
    return np.asarray(value)
