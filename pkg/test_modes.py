#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for mode families, mixing and mode checks
"""

import math
import sys

import numpy as np

BOX = 1e-6


def _beam():
    from units_core import BeamParams
    return BeamParams(1064e-9, 0.53e-6, 4e-3)


def test_gaussian_transverse_norm():
    """|f_perp|^2 integrates to 1/L_c in every plane; |f_z|^2 to 1/(2 k z_R L_c)"""
    from modes import gaussian_paraxial_mode, transverse_norm

    beam = _beam()
    mode = gaussian_paraxial_mode(beam)
    for z in (0.0, beam.rayleigh_range, -3.0 * beam.rayleigh_range):
        transverse, longitudinal = transverse_norm(mode, z)
        assert abs(transverse * beam.cavity_length - 1.0) < 1e-10
        assert abs(longitudinal * beam.cavity_length * 2.0 * beam.k * beam.rayleigh_range - 1.0) < 1e-10
    print("  ✓ transverse and longitudinal norms")


def test_gaussian_jacobian_matches_differences():
    from modes import gaussian_paraxial_mode

    mode = gaussian_paraxial_mode(_beam())
    point = np.array([1.3e-7, -0.8e-7, 2.1e-7])
    h = 1e-11
    jac = mode.jacobian(point)
    scale = np.max(np.abs(jac))
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        numeric = (mode.evaluate(point + step) - mode.evaluate(point - step)) / (2.0 * h)
        assert np.max(np.abs(numeric - jac[i])) < 1e-5 * scale, i
    print("  ✓ analytic Jacobian agrees with central differences")


def test_plane_and_standing_are_transverse():
    from modes import box_wavevector, check_gauge, plane_wave_mode, standing_wave_mode
    from units_core import DielectricSphere

    sphere = DielectricSphere.from_density(1e-7, 1.45, 2200.0)
    k_vec = box_wavevector([BOX] * 3, (1, 2, 0))
    pol = np.cross(k_vec, [0.0, 0.0, 1.0])
    for mode in (plane_wave_mode(k_vec, pol, BOX ** 3), standing_wave_mode(k_vec, [0, 0, 1], BOX ** 3, 0.3)):
        assert check_gauge(mode, None) < 1e-12
        assert check_gauge(mode, sphere, q=[1e-7, 0.0, 0.0]) < 1e-12
    print("  ✓ div(eps f) = 0 for plane and standing waves")


def test_polarization_must_be_transverse():
    from errors import DomainError
    from modes import plane_wave_mode

    try:
        plane_wave_mode([0.0, 0.0, 1e7], [0.0, 1.0, 1.0], BOX ** 3)
    except DomainError:
        print("  ✓ longitudinal polarization rejected")
        return
    raise AssertionError("non-transverse polarization accepted")


def test_plane_wave_gram_matrix():
    from modes import NormalizationDomain, PlaneWaveMode, box_wavevector, check_orthonormality

    domain = NormalizationDomain.box([BOX] * 3)
    modes = [
        PlaneWaveMode(box_wavevector(domain.lengths, (0, 0, 1)), [1, 0, 0], domain),
        PlaneWaveMode(box_wavevector(domain.lengths, (0, 0, 2)), [1, 0, 0], domain),
        PlaneWaveMode(box_wavevector(domain.lengths, (1, 0, 0)), [0, 1, 0], domain),
        PlaneWaveMode(box_wavevector(domain.lengths, (0, 0, 1)), [0, 1, 0], domain),
    ]
    gram = check_orthonormality(modes, None)
    assert gram.max_deviation < 1e-10
    assert gram.matrix.shape == (4, 4)
    print(f"  ✓ plane-wave Gram deviation {gram.max_deviation:.1e}")


def test_gram_rejects_mixed_domains():
    from errors import DomainError
    from modes import check_orthonormality, gaussian_paraxial_mode, plane_wave_mode

    beam_mode = gaussian_paraxial_mode(_beam())
    for modes in ([beam_mode], [beam_mode, plane_wave_mode([0, 0, 1e7], [1, 0, 0], BOX ** 3)]):
        try:
            check_orthonormality(modes, None)
        except DomainError:
            continue
        raise AssertionError("Gram matrix accepted a non-box domain")
    print("  ✓ beam and mixed domains rejected")


def test_standing_wave_constituents():
    from modes import box_wavevector, standing_wave_mode

    k_vec = box_wavevector([BOX] * 3, (0, 0, 3))
    mode = standing_wave_mode(k_vec, [1, 0, 0], BOX ** 3, 0.4)
    forward, backward = mode.constituents()
    points = np.random.default_rng(1).uniform(0.0, BOX, size=(50, 3))
    combined = (forward.evaluate(points) + backward.evaluate(points)) / math.sqrt(2.0)
    assert np.allclose(combined, mode.evaluate(points), rtol=0.0, atol=1e-12 * math.sqrt(2.0 / BOX ** 3))
    assert mode.is_real and not forward.is_real
    print("  ✓ standing wave = (f_plus + f_minus)/sqrt2")


def test_unitary_mix_builds_traveling_waves():
    from modes import UnitaryMix, box_wavevector, check_orthonormality, complex_from_real, standing_wave_mode

    k_vec = box_wavevector([BOX] * 3, (0, 0, 2))
    sine = standing_wave_mode(k_vec, [1, 0, 0], BOX ** 3)
    cosine = standing_wave_mode(k_vec, [1, 0, 0], BOX ** 3, math.pi / 2.0)
    forward, backward = complex_from_real([sine, cosine], UnitaryMix.standing_to_traveling())

    points = np.random.default_rng(2).uniform(0.0, BOX, size=(40, 3))
    expected = sine.constituents()[0].evaluate(points)
    assert np.allclose(forward.evaluate(points), expected, rtol=0.0, atol=1e-12 / math.sqrt(BOX ** 3))
    assert not forward.is_real and not backward.is_real
    intensity = np.sum(np.abs(forward.evaluate(points)) ** 2, axis=-1) * BOX ** 3
    assert np.allclose(intensity, 1.0, atol=1e-12)
    assert check_orthonormality([forward, backward], None).max_deviation < 1e-10
    print("  ✓ (sin, cos) pair mixes into orthonormal traveling waves")


def test_gram_matrix_transforms_with_the_mix():
    """With a sphere in the box the Gram matrix of f = U* u is U G U^+"""
    from modes import UnitaryMix, box_wavevector, check_orthonormality, complex_from_real, standing_wave_mode
    from quadrature import QuadratureSpec
    from units_core import DielectricSphere

    k_vec = box_wavevector([BOX] * 3, (0, 0, 2))
    reals = [standing_wave_mode(k_vec, [1, 0, 0], BOX ** 3, 0.3),
             standing_wave_mode(k_vec, [1, 0, 0], BOX ** 3, 0.3 + math.pi / 2.0)]
    sphere = DielectricSphere.from_density(1e-7, 1.45, 2200.0)
    q = np.array([1e-7, -2e-7, 1.3e-7])
    quad = QuadratureSpec(8, 16, 32)

    theta, phi = 0.4, 1.1
    unitary = np.array([[math.cos(theta), np.exp(1j * phi) * math.sin(theta)],
                        [-np.exp(-1j * phi) * math.sin(theta), math.cos(theta)]]) * np.exp(0.25j)
    mixed = complex_from_real(reals, UnitaryMix(unitary))

    bare = check_orthonormality(reals, sphere, q, quad).matrix
    assert np.max(np.abs(bare - np.eye(2))) > 1e-4
    dressed = check_orthonormality(mixed, sphere, q, quad).matrix
    expected = unitary @ bare @ unitary.conj().T
    assert np.allclose(dressed, expected, rtol=0.0, atol=1e-12)
    print(f"  ✓ G_f = U G U^+ with the sphere present (|G - 1| = {np.max(np.abs(bare - np.eye(2))):.1e})")


def test_unitary_mix_validation():
    from errors import DomainError
    from modes import UnitaryMix, box_wavevector, complex_from_real, standing_wave_mode

    try:
        UnitaryMix(np.array([[1.0, 1.0], [0.0, 1.0]]))
    except DomainError:
        pass
    else:
        raise AssertionError("non-unitary matrix accepted")

    low = standing_wave_mode(box_wavevector([BOX] * 3, (0, 0, 1)), [1, 0, 0], BOX ** 3)
    high = standing_wave_mode(box_wavevector([BOX] * 3, (0, 0, 2)), [1, 0, 0], BOX ** 3)
    try:
        complex_from_real([low, high], UnitaryMix.standing_to_traveling())
    except DomainError:
        pass
    else:
        raise AssertionError("mixing of different frequencies accepted")

    same = complex_from_real([low, high], UnitaryMix.identity(2))
    assert same[0] is low and same[1] is high
    print("  ✓ non-unitary and non-degenerate mixing rejected")


def test_frequency_shift_of_plane_wave():
    from modes import mode_frequency_shift, plane_wave_mode
    from units_core import DielectricSphere

    sphere = DielectricSphere.from_density(1e-7, 1.45, 2200.0)
    mode = plane_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    shift = mode_frequency_shift(mode, sphere, [2e-7, 0.0, 1e-7], with_gradient=True)
    expected = -0.5 * (sphere.epsilon - 1.0) * sphere.volume / BOX ** 3
    assert abs(shift.relative_shift / expected - 1.0) < 1e-12
    assert abs(shift.omega - mode.omega * (1.0 + expected)) < 1e-12 * mode.omega
    assert np.max(np.abs(shift.gradient)) < 1e-9 * mode.omega ** 2 * abs(expected)
    print(f"  ✓ uniform intensity gives delta omega/omega = {expected:.4e}, no gradient")


def test_comoving_mode_has_grad_q():
    from modes import comoving_mode, plane_wave_mode

    base = plane_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    moving = comoving_mode(base)
    assert moving.has_grad_q and not base.has_grad_q
    assert base.grad_q(np.zeros((1, 3))) is None
    q = np.array([0.0, 0.0, 0.1 * BOX])
    points = np.array([[0.0, 0.0, 0.3 * BOX]])
    assert np.allclose(moving.evaluate(points, q), base.evaluate(points - q))
    assert np.allclose(moving.grad_q(points, q), -base.jacobian(points - q))
    print("  ✓ comoving mode follows the sphere")


def test_snapshot_fields_of_plane_wave():
    """A single traveling wave has |E| = |B| and E perpendicular to B"""
    from modes import mode_snapshot_fields, plane_wave_mode

    mode = plane_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    electric, magnetic = mode_snapshot_fields(mode, 3.0 + 1.0j, t=1e-8)
    points = np.random.default_rng(3).uniform(0.0, BOX, size=(30, 3))
    e, b = electric(points), magnetic(points)
    e_norm, b_norm = np.linalg.norm(e, axis=-1), np.linalg.norm(b, axis=-1)
    scale = np.max(e_norm)
    assert np.allclose(e_norm, b_norm, rtol=0.0, atol=1e-10 * scale)
    assert np.max(np.abs(np.sum(e * b, axis=-1))) < 1e-10 * scale ** 2
    print("  ✓ snapshot E and B of a plane wave")


def test_transverse_norm_rejects_box_modes():
    from errors import DomainError
    from modes import plane_wave_mode, transverse_norm

    try:
        transverse_norm(plane_wave_mode([0, 0, 1e7], [1, 0, 0], BOX ** 3), 0.0)
    except DomainError:
        print("  ✓ transverse_norm only for beams")
        return
    raise AssertionError("plane wave accepted by transverse_norm")


def main():
    print("=" * 60)
    print("Mode functions")
    print("=" * 60)
    tests = [
        test_gaussian_transverse_norm,
        test_gaussian_jacobian_matches_differences,
        test_plane_and_standing_are_transverse,
        test_polarization_must_be_transverse,
        test_plane_wave_gram_matrix,
        test_gram_rejects_mixed_domains,
        test_standing_wave_constituents,
        test_unitary_mix_builds_traveling_waves,
        test_gram_matrix_transforms_with_the_mix,
        test_unitary_mix_validation,
        test_frequency_shift_of_plane_wave,
        test_comoving_mode_has_grad_q,
        test_snapshot_fields_of_plane_wave,
        test_transverse_norm_rejects_box_modes,
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
