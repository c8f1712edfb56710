#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for coupling coefficients lambda, gamma, eta, g
"""

import math
import sys

import numpy as np

BOX = 1e-6


def _beam():
    from units_core import BeamParams
    return BeamParams(1064e-9, 0.53e-6, 4e-3)


def _sphere(radius=1e-7):
    from units_core import DielectricSphere
    return DielectricSphere.from_density(radius, 1.45, 2200.0)


def test_plane_wave_lambda():
    """lambda of a traveling plane wave is -(n^2 - 1) V_s k / V, antiparallel to k"""
    from coupling import gamma_single, lambda_single, natural_coupling_scale
    from modes import plane_wave_mode
    from quadrature import QuadratureSpec

    sphere = _sphere()
    k = 2.0 * math.pi / BOX
    mode = plane_wave_mode([0.0, 0.0, k], [1, 0, 0], BOX ** 3)
    quad = QuadratureSpec(8, 16, 32)
    lam = lambda_single(mode, sphere, [1e-7, 2e-7, 3e-7], quad)
    scale = natural_coupling_scale(mode, sphere)
    assert np.allclose(lam.value, [0.0, 0.0, -scale], rtol=0.0, atol=1e-12 * scale)
    assert abs(lam.in_hbar_k(k)[2] + scale / k) < 1e-12 * scale / k
    gam = gamma_single(mode, sphere, [1e-7, 2e-7, 3e-7], quad)
    assert gam.magnitude < 1e-12 * scale * sphere.radius
    print(f"  ✓ plane wave lambda = {lam.value[2]:.4e} /m, gamma = 0")


def test_real_modes_have_no_single_mode_coupling():
    from coupling import gamma_single, lambda_single
    from modes import standing_wave_mode

    mode = standing_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    for result in (lambda_single(mode, _sphere(), [0.0, 0.0, 1e-7]), gamma_single(mode, _sphere(), [0.0, 0.0, 0.0])):
        assert result.magnitude == 0.0
        assert "real mode" in result.note
    print("  ✓ real modes give identically zero lambda and gamma")


def test_standing_wave_lambda_rebuilt_from_traveling_halves():
    """Summed over the pair table the two traveling momenta cancel; nothing is short-circuited"""
    from coupling import natural_coupling_scale, standing_lambda_from_constituents
    from modes import standing_wave_mode
    from quadrature import QuadratureSpec

    mode = standing_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3, phase=0.3)
    scale = natural_coupling_scale(mode, _sphere())
    rebuilt = standing_lambda_from_constituents(mode, _sphere(), [0.0, 0.0, BOX / 8.0], QuadratureSpec(8, 16, 32))
    assert np.allclose(rebuilt.forward, [0.0, 0.0, -0.5 * scale], rtol=0.0, atol=1e-10 * scale)
    assert np.allclose(rebuilt.backward, [0.0, 0.0, 0.5 * scale], rtol=0.0, atol=1e-10 * scale)
    assert abs(rebuilt.constituent_magnitude / scale - 0.5) < 1e-10
    assert np.linalg.norm(rebuilt.cross) < 1e-10 * scale
    assert rebuilt.magnitude < 1e-10 * scale
    print(f"  ✓ |lambda| from the halves = {rebuilt.magnitude / scale:.1e} x scale")


def test_comoving_plane_wave_carries_full_momentum():
    """With the grad_q term a rigidly carried plane wave gives lambda = k"""
    from coupling import lambda_single
    from modes import comoving_mode, plane_wave_mode
    from quadrature import QuadratureSpec

    k = 2.0 * math.pi / BOX
    mode = comoving_mode(plane_wave_mode([0.0, 0.0, k], [1, 0, 0], BOX ** 3))
    lam = lambda_single(mode, _sphere(), [0.0, 0.0, 2e-7], QuadratureSpec(8, 16, 32), include_gradq=True)
    assert np.allclose(lam.value, [0.0, 0.0, k], rtol=0.0, atol=1e-10 * k)
    print("  ✓ comoving plane wave: lambda = hbar k")


def test_focus_lambda_against_closed_form():
    from coupling import SmallSphereCouplingField, lambda_focus_closed_form, lambda_single
    from modes import gaussian_paraxial_mode
    from quadrature import QuadratureSpec

    beam = _beam()
    mode = gaussian_paraxial_mode(beam)
    sphere = _sphere()
    closed = lambda_focus_closed_form(beam, sphere).value[2]
    assert closed < 0.0

    small = SmallSphereCouplingField(mode, sphere).lam(np.zeros(3))
    assert abs(small[2] / closed - 1.0) < 1e-10

    full = lambda_single(mode, sphere, np.zeros(3), QuadratureSpec(12, 24, 48))
    assert abs(full.value[2] / closed - 1.0) < 0.10
    assert abs(full.value[0]) < 1e-8 * abs(closed) and abs(full.value[1]) < 1e-8 * abs(closed)

    tiny = sphere.scaled(12.5e-9)
    tiny_full = lambda_single(mode, tiny, np.zeros(3), QuadratureSpec(12, 24, 48))
    assert abs(tiny_full.value[2] / lambda_focus_closed_form(beam, tiny).value[2] - 1.0) < 0.02
    print(f"  ✓ lambda_z(0) = {full.value[2]:.4f} /m vs closed form {closed:.4f} /m")


def test_gamma_off_axis_sign_and_size():
    """A small sphere displaced along +x picks up gamma along -y"""
    from coupling import gamma_focus_closed_form, gamma_single
    from modes import gaussian_paraxial_mode
    from quadrature import QuadratureSpec

    beam = _beam()
    sphere = _sphere(25e-9)
    q = np.array([0.1 * beam.waist, 0.0, 0.0])
    closed = gamma_focus_closed_form(beam, sphere, q).value
    full = gamma_single(gaussian_paraxial_mode(beam), sphere, q, QuadratureSpec(12, 24, 48)).value
    assert closed[1] < 0.0 and full[1] < 0.0
    assert 0.75 < full[1] / closed[1] < 1.25
    assert abs(full[0]) < 1e-3 * abs(full[1])
    print(f"  ✓ gamma_y = {full[1]:.3e} (closed form {closed[1]:.3e})")


def test_global_phase_and_conjugation():
    """A global phase leaves lambda and gamma alone; conjugating the mode flips both"""
    from coupling import gamma_single, lambda_single
    from modes import gaussian_paraxial_mode
    from quadrature import QuadratureSpec

    beam = _beam()
    sphere = _sphere(25e-9)
    mode = gaussian_paraxial_mode(beam)
    quad = QuadratureSpec(8, 16, 32)
    q = np.array([0.1 * beam.waist, 0.05 * beam.waist, 0.2 * beam.rayleigh_range])
    lam = lambda_single(mode, sphere, q, quad).value
    gam = gamma_single(mode, sphere, q, quad).value
    assert np.linalg.norm(gam) > 0.0

    for phase in (0.7, math.pi / 3.0, -2.0):
        shifted = mode.with_global_phase(phase)
        assert np.allclose(lambda_single(shifted, sphere, q, quad).value, lam,
                           rtol=0.0, atol=1e-10 * np.linalg.norm(lam))
        assert np.allclose(gamma_single(shifted, sphere, q, quad).value, gam,
                           rtol=0.0, atol=1e-10 * np.linalg.norm(gam))

    conjugate = mode.conjugate()
    assert not conjugate.is_real
    assert np.allclose(lambda_single(conjugate, sphere, q, quad).value, -lam,
                       rtol=0.0, atol=1e-10 * np.linalg.norm(lam))
    assert np.allclose(gamma_single(conjugate, sphere, q, quad).value, -gam,
                       rtol=0.0, atol=1e-10 * np.linalg.norm(gam))
    print("  ✓ e^(i phi) f keeps lambda, gamma; f* reverses them")


def test_coupling_table_generator_is_hermitian():
    from coupling import coupling_table, lambda_single
    from modes import box_wavevector, plane_wave_mode
    from quadrature import QuadratureSpec

    modes = [plane_wave_mode(box_wavevector([BOX] * 3, idx), [1, 0, 0], BOX ** 3) for idx in ((0, 0, 1), (0, 0, 2))]
    quad = QuadratureSpec(8, 16, 32)
    q = np.array([1e-7, 2e-7, 3e-7])
    table = coupling_table(modes, _sphere(), q, quad)
    assert table.eta.shape == (2, 2, 3) and table.size == 2

    generator = table.generator([1e-9, 2e-9, 3e-9], [1e-3, 0.0, 2e-3])
    assert np.allclose(generator, generator.conj().T, rtol=0.0, atol=1e-15 * np.max(np.abs(generator)))

    lam = lambda_single(modes[0], _sphere(), q, quad).value
    assert np.allclose(np.imag(table.eta[0, 0]), lam, rtol=1e-10, atol=1e-12 * np.max(np.abs(lam)))
    print("  ✓ generator Hermitian; diagonal matches lambda")


def test_coupling_table_frequencies_follow_the_sphere():
    """omega_k(q) in the table is the shifted frequency at q, not the empty-cavity one"""
    from coupling import coupling_table
    from modes import box_wavevector, mode_frequency_shift, plane_wave_mode, standing_wave_mode
    from quadrature import QuadratureSpec

    quad = QuadratureSpec(8, 16, 32)
    k_vec = box_wavevector([BOX] * 3, (0, 0, 2))
    modes = [standing_wave_mode(k_vec, [1, 0, 0], BOX ** 3), plane_wave_mode(k_vec, [0, 1, 0], BOX ** 3)]
    q = np.array([0.0, 0.0, 0.1 * BOX])

    table = coupling_table(modes, _sphere(), q, quad)
    for mode, omega in zip(modes, table.omegas):
        assert omega < mode.omega
        assert abs(omega - mode_frequency_shift(mode, _sphere(), q, quad).omega) < 1e-14 * mode.omega

    moved = coupling_table(modes, _sphere(), q + np.array([0.0, 0.0, 0.1 * BOX]), quad)
    assert moved.omegas[0] != table.omegas[0]
    assert abs(moved.omegas[1] - table.omegas[1]) < 1e-12 * modes[1].omega

    empty = coupling_table(modes, None, q)
    assert np.all(empty.omegas == [m.omega for m in modes])
    print(f"  ✓ omega_k(q) shifted by {(table.omegas[0] / modes[0].omega - 1.0):.2e} for the standing wave")


def test_real_pair_coefficients_reject_complex_modes():
    from coupling import eta_kj, g_kj
    from errors import DomainError
    from modes import plane_wave_mode, standing_wave_mode

    real = standing_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    complex_mode = plane_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    for fn in (eta_kj, g_kj):
        try:
            fn(real, complex_mode, _sphere(), np.zeros(3))
        except DomainError:
            continue
        raise AssertionError(f"{fn.__name__} accepted a complex mode")
    assert g_kj(real, real, None, np.zeros(3)).magnitude == 0.0
    print("  ✓ eta_kj / g_kj need real modes")


def test_real_pair_coefficients_against_ball_transform():
    """
    For x-polarized standing waves along z, u_k x curl u_j = N^2 k_j sin(a_k) cos(a_j) e_z,
    whose ball integral follows from the ball Fourier transform.
    """
    from coupling import ball_fourier_transform, eta_kj, g_kj
    from modes import standing_wave_mode
    from quadrature import QuadratureSpec

    sphere = _sphere()
    k1, k2, phi1, phi2 = 2.0 * math.pi / BOX, 4.0 * math.pi / BOX, 0.3, 1.1
    mode_k = standing_wave_mode([0.0, 0.0, k1], [1, 0, 0], BOX ** 3, phi1)
    mode_j = standing_wave_mode([0.0, 0.0, k2], [1, 0, 0], BOX ** 3, phi2)
    q = np.array([1e-7, -2e-7, 1.5e-7])

    def ball_sine(kappa, phase):
        return math.sin(kappa * q[2] + phase) * ball_fourier_transform(kappa, sphere.radius)

    norm2 = 2.0 / BOX ** 3
    expected = -(sphere.epsilon - 1.0) * norm2 * k2 * 0.5 * (ball_sine(k1 + k2, phi1 + phi2)
                                                           + ball_sine(k1 - k2, phi1 - phi2))
    coarse = eta_kj(mode_k, mode_j, sphere, q, QuadratureSpec(12, 24, 48))
    dense = eta_kj(mode_k, mode_j, sphere, q, QuadratureSpec(24, 48, 96))
    for result in (coarse, dense):
        assert abs(result.value[2] / expected - 1.0) < 1e-9
        assert np.max(np.abs(result.value[:2])) < 1e-12 * abs(expected)

    moment = g_kj(mode_k, mode_j, sphere, q, QuadratureSpec(12, 24, 48))
    assert moment.magnitude < 1e-10 * abs(expected) * sphere.radius
    print(f"  ✓ eta_z = {coarse.value[2]:.6e} /m matches the ball transform; g = 0 for a z-only density")


def test_real_pair_coefficients_rotate_about_the_axis():
    """Rotating the mode pair and q about z rotates eta and g the same way"""
    from coupling import eta_kj, g_kj
    from modes import standing_wave_mode
    from quadrature import QuadratureSpec

    sphere = _sphere()
    quad = QuadratureSpec(12, 24, 48)
    k1, k2 = 2.0 * math.pi / BOX, 4.0 * math.pi / BOX
    q = np.array([1e-7, -2e-7, 1.5e-7])

    def coefficients(angle):
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        mode_k = standing_wave_mode([0.0, 0.0, k1], rot @ [1.0, 0.0, 0.0], BOX ** 3, 0.3)
        mode_j = standing_wave_mode(rot @ [0.5 * k1, 0.0, k2], rot @ [0.0, 1.0, 0.0], BOX ** 3, 1.1)
        return (rot, eta_kj(mode_k, mode_j, sphere, rot @ q, quad).value,
                g_kj(mode_k, mode_j, sphere, rot @ q, quad).value)

    _, eta0, g0 = coefficients(0.0)
    assert np.linalg.norm(g0) > 0.0 and np.linalg.norm(eta0) > 0.0
    for angle in (0.9, math.pi / 2.0, 2.5):
        rot, eta, g = coefficients(angle)
        assert np.allclose(eta, rot @ eta0, rtol=0.0, atol=1e-8 * np.linalg.norm(eta0))
        assert np.allclose(g, rot @ g0, rtol=0.0, atol=1e-8 * np.linalg.norm(g0))
    print("  ✓ eta_kj and g_kj are vectors under rotations about z")


def test_complex_pair_coefficients_of_a_plane_wave():
    """The f_k* coefficient of a mode with itself is i lambda; the f_k one oscillates at 2k"""
    from coupling import complex_coupling_coeffs, lambda_single
    from modes import plane_wave_mode
    from quadrature import QuadratureSpec

    k = 2.0 * math.pi / BOX
    mode = plane_wave_mode([0.0, 0.0, k], [1, 0, 0], BOX ** 3)
    quad = QuadratureSpec(8, 16, 32)
    q = np.array([0.0, 1e-7, 2e-7])
    coeffs = complex_coupling_coeffs(mode, mode, _sphere(), q, quad)
    lam = lambda_single(mode, _sphere(), q, quad).value
    assert abs(coeffs.eta2[2].imag - lam[2]) < 1e-10 * abs(lam[2])
    assert abs(coeffs.eta2[2].real) < 1e-10 * abs(lam[2])
    assert 0.0 < abs(coeffs.eta1[2]) < abs(coeffs.eta2[2])
    assert np.max(np.abs(coeffs.g2)) < 1e-10 * abs(lam[2]) * _sphere().radius

    empty = complex_coupling_coeffs(mode, mode, None, q)
    assert not np.any(empty.eta1) and not np.any(empty.g1) and not np.any(empty.g2)
    print("  ✓ complex coefficients: eta(2) = i lambda, g vanishes for a uniform density")


def test_field_momentum_of_plane_wave_points_along_k():
    from coupling import field_angular_momentum_in_sphere, field_momentum_in_sphere
    from modes import mode_snapshot_fields, plane_wave_mode
    from quadrature import QuadratureSpec

    mode = plane_wave_mode([0.0, 0.0, 2.0 * math.pi / BOX], [1, 0, 0], BOX ** 3)
    electric, magnetic = mode_snapshot_fields(mode, 2.0)
    momentum = field_momentum_in_sphere(electric, magnetic, _sphere(), np.zeros(3), QuadratureSpec(8, 16, 32))
    assert momentum.value[2] > 0.0
    assert abs(momentum.value[0]) < 1e-10 * momentum.value[2]
    assert abs(momentum.value[1]) < 1e-10 * momentum.value[2]
    spin = field_angular_momentum_in_sphere(electric, magnetic, _sphere(), np.zeros(3), QuadratureSpec(8, 16, 32))
    assert spin.magnitude < 1e-10 * momentum.value[2] * _sphere().radius
    print("  ✓ E x B inside the sphere along k, no angular momentum about the center")


def test_coupling_models():
    from coupling import (QuadratureCouplingField, SmallSphereCouplingField, build_coupling_field)
    from errors import DomainError
    from modes import gaussian_paraxial_mode
    from quadrature import QuadratureSpec

    mode = gaussian_paraxial_mode(_beam())
    sphere = _sphere(12.5e-9)
    assert isinstance(build_coupling_field("small_sphere", mode, sphere), SmallSphereCouplingField)
    quad_field = build_coupling_field("quadrature", mode, sphere, QuadratureSpec(8, 16, 32))
    assert isinstance(quad_field, QuadratureCouplingField)

    q = np.array([0.0, 0.0, 0.2 * _beam().rayleigh_range])
    small = SmallSphereCouplingField(mode, sphere).lam(q)
    full = quad_field.lam(q)
    assert np.linalg.norm(full - small) < 0.02 * np.linalg.norm(small)

    adiabatic = quad_field.adiabatic()
    assert np.all(adiabatic.lam(q) == 0.0) and adiabatic.omega(q) == quad_field.omega(q)
    try:
        build_coupling_field("exact", mode, sphere)
    except DomainError:
        pass
    else:
        raise AssertionError("unknown coupling model accepted")
    print("  ✓ small-sphere and quadrature models agree for R = 12.5 nm")


def main():
    print("=" * 60)
    print("Couplings")
    print("=" * 60)
    tests = [
        test_plane_wave_lambda,
        test_real_modes_have_no_single_mode_coupling,
        test_standing_wave_lambda_rebuilt_from_traveling_halves,
        test_comoving_plane_wave_carries_full_momentum,
        test_focus_lambda_against_closed_form,
        test_gamma_off_axis_sign_and_size,
        test_global_phase_and_conjugation,
        test_coupling_table_generator_is_hermitian,
        test_coupling_table_frequencies_follow_the_sphere,
        test_real_pair_coefficients_reject_complex_modes,
        test_real_pair_coefficients_against_ball_transform,
        test_real_pair_coefficients_rotate_about_the_axis,
        test_complex_pair_coefficients_of_a_plane_wave,
        test_field_momentum_of_plane_wave_points_along_k,
        test_coupling_models,
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
