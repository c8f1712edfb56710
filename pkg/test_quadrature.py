#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for the ball and box quadrature rules
"""

import math
import sys

import numpy as np

RADIUS = 1e-7


def test_ball_volume_and_moments():
    from quadrature import QuadratureSpec, integrate_over_sphere

    quad = QuadratureSpec(8, 16, 32)
    center = np.array([1e-7, -2e-7, 3e-7])
    volume = integrate_over_sphere(lambda p: np.ones(len(p)), center, RADIUS, quad)
    assert abs(float(volume.value) / (4.0 / 3.0 * math.pi * RADIUS ** 3) - 1.0) < 1e-13

    second = integrate_over_sphere(lambda p: (p[:, 0] - center[0]) ** 2, center, RADIUS, quad)
    assert abs(float(second.value) / (4.0 * math.pi * RADIUS ** 5 / 15.0) - 1.0) < 1e-12
    assert volume.converged and second.converged
    print("  ✓ volume and second moment exact")


def test_vector_and_complex_integrands():
    from coupling import ball_fourier_transform
    from quadrature import QuadratureSpec, integrate_over_sphere

    k = 2.0 * math.pi / 1064e-9
    quad = QuadratureSpec(12, 24, 48)
    result = integrate_over_sphere(
        lambda p: np.stack([np.exp(1j * k * p[:, 2]), p[:, 0] + 0j], axis=-1), np.zeros(3), RADIUS, quad)
    exact = ball_fourier_transform(k, RADIUS)
    assert result.value.shape == (2,)
    assert abs(result.value[0] - exact) / exact < 1e-12
    assert abs(result.value[1]) < 1e-12 * RADIUS ** 4
    print("  ✓ complex vector integrand matches the ball Fourier transform")


def test_thread_count_does_not_change_result():
    """Chunks are reduced in a fixed order, so thread counts give identical bits"""
    from quadrature import CHUNK_SIZE, QuadratureSpec, integrate_over_sphere

    k = 2.0 * math.pi / 1064e-9

    def integrand(p):
        return np.exp(1j * k * p[:, 2]) * np.exp(-(p[:, 0] ** 2 + p[:, 1] ** 2) / 4e-13)

    serial = QuadratureSpec(24, 48, 96, threads=1)
    assert 24 * 48 * 96 > CHUNK_SIZE
    reference = integrate_over_sphere(integrand, np.zeros(3), RADIUS, serial)
    for threads in (2, 4):
        other = integrate_over_sphere(integrand, np.zeros(3), RADIUS, QuadratureSpec(24, 48, 96, threads=threads))
        assert other.value.tobytes() == reference.value.tobytes()
        assert other.error_estimate == reference.error_estimate
    print("  ✓ bit-identical across 1, 2, 4 threads")


def test_error_estimate_flags_rough_integrand():
    from quadrature import QuadratureSpec, integrate_over_sphere

    quad = QuadratureSpec(4, 4, 8, target_rel_tol=1e-10)
    rough = integrate_over_sphere(lambda p: np.exp(1j * 2e8 * p[:, 2]), np.zeros(3), RADIUS, quad)
    assert not rough.converged
    assert rough.error_estimate > 1e-9
    print(f"  ✓ under-resolved integrand flagged ({rough.error_estimate:.2e})")


def test_layered_scheme():
    from quadrature import QuadratureSpec, integrate_over_sphere, sphere_rule

    layered = QuadratureSpec(12, 24, 48, scheme="layered")
    product = QuadratureSpec(12, 24, 48)
    assert len(sphere_rule(np.zeros(3), RADIUS, layered)[1]) < len(sphere_rule(np.zeros(3), RADIUS, product)[1])
    volume = integrate_over_sphere(lambda p: np.ones(len(p)), np.zeros(3), RADIUS, layered)
    assert abs(float(volume.value) / (4.0 / 3.0 * math.pi * RADIUS ** 3) - 1.0) < 1e-13
    print("  ✓ layered scheme uses fewer nodes, same volume")


def test_order_doubling_change():
    from quadrature import QuadratureSpec, order_doubling_change

    k = 2.0 * math.pi / 1064e-9
    change = order_doubling_change(lambda p: np.cos(k * p[:, 0]) * np.cos(k * p[:, 2]), np.zeros(3), RADIUS,
                                   QuadratureSpec(8, 16, 32))
    assert change < 1e-10
    print(f"  ✓ order-doubling change {change:.1e}")


def test_spec_validation():
    from errors import ConfigurationError
    from quadrature import QuadratureSpec

    for kwargs in ({'radial_order': 1}, {'scheme': 'monte_carlo'}, {'target_rel_tol': 0.0}, {'threads': 0}):
        try:
            QuadratureSpec(**kwargs)
        except ConfigurationError:
            continue
        raise AssertionError(f"accepted {kwargs}")
    spec = QuadratureSpec(8, 16, 32)
    assert spec.refined().radial_order == 16 and spec.coarsened().azimuthal_order == 16
    print("  ✓ invalid specs rejected")


def test_box_rule_exact_for_commensurate_waves():
    from quadrature import integrate_over_box

    lengths = np.array([1e-6, 2e-6, 1.5e-6])
    k = 2.0 * math.pi * np.array([3.0, 1.0, 2.0]) / lengths
    volume = float(np.prod(lengths))
    value = integrate_over_box(lambda p: np.exp(1j * p @ k), lengths, 16)
    assert abs(value) < 1e-12 * volume
    norm = integrate_over_box(lambda p: np.abs(np.exp(1j * p @ k)) ** 2, lengths, 16)
    assert abs(norm / volume - 1.0) < 1e-13
    print("  ✓ midpoint box rule exact for box harmonics")


def main():
    print("=" * 60)
    print("Quadrature")
    print("=" * 60)
    tests = [
        test_ball_volume_and_moments,
        test_vector_and_complex_integrands,
        test_thread_count_does_not_change_result,
        test_error_estimate_flags_rough_integrand,
        test_layered_scheme,
        test_order_doubling_change,
        test_spec_validation,
        test_box_rule_exact_for_commensurate_waves,
    ]
    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except Exception as e:
            print(f"❌ {test.__name__} failed: {e}")
    print(f"\nRESULT: {passed}/{len(tests)} passed")
    return passed == len(tests)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
