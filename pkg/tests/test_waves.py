"""Plasmon constants, matching-matrix kernels, perfect waves and the
boundary-operator cross-validation."""

import math

import numpy as np
import pytest

from elastoplasmon.harmonics import build_quadrature, sph_harm_stack
from elastoplasmon.lame import LameParams, eval_terms, t1_vector, t3_vector
from elastoplasmon.waves import (
    assemble_H,
    kelvin_matrix,
    kernel_family,
    np_eigenvalue_map,
    np_galerkin_spectrum,
    perfect_wave,
    plasmon_constants,
    plasmon_kernel,
    single_layer_field,
    verify_perfect_wave,
)

MULTIPLICITY = {1: lambda n: 2 * n + 1, 2: lambda n: 2 * n - 1, 3: lambda n: 2 * n + 3}


def test_constants_at_reference_point():
    z = plasmon_constants(LameParams(1.0, 1.0), 2)
    assert z.zeta1 == pytest.approx(-4.0, abs=1e-14)
    assert z.zeta3 == pytest.approx(-0.75, abs=1e-14)
    # the middle constant: the displayed -1.2 is inconsistent with the
    # transmission eigenproblem; the verified value at (1, 1), n=2 is -2
    assert z.zeta2 == pytest.approx(-2.0, abs=1e-14)


def test_constants_negative_for_convex_pairs(materials):
    for params in materials:
        for n in (2, 3, 4, 7):
            assert all(z < 0 for z in plasmon_constants(params, n).as_tuple())


def test_constants_need_degree_two():
    with pytest.raises(ValueError):
        plasmon_constants(LameParams(1.0, 1.0), 1)


def test_H_nonsingular_at_positive_multiplier(tables):
    prob = assemble_H(2, LameParams(1.0, 1.0), 1.0, tables)
    s = prob.singular_values
    assert s[-1] / s[0] > 1e-3


def test_H_rejects_zero_multiplier(tables):
    with pytest.raises(ValueError):
        assemble_H(2, LameParams(1.0, 1.0), 0.0, tables)


def test_null_space_dimensions(tables, materials):
    for params in materials:
        for n in (2, 3, 4):
            z = plasmon_constants(params, n)
            for fam, c in enumerate(z.as_tuple(), start=1):
                prob = assemble_H(n, params, c, tables)
                s = prob.singular_values
                dim = MULTIPLICITY[fam](n)
                null = int(np.sum(s < 1e-9 * s[0]))
                assert null == dim, (params, n, fam)
                # singular value gap separates kernel from the rest
                assert s[-(null + 1)] > 1e-6 * s[0]


def test_min_singular_value_dips_match_closed_forms(tables):
    # scan the multiplier over [-6, -0.1]; dips only at the three constants
    params = LameParams(1.0, 1.0)
    n = 2
    zetas = sorted(plasmon_constants(params, n).as_tuple())
    cs = np.linspace(-6.0, -0.1, 119)
    dips = []
    for c in cs:
        s = assemble_H(n, params, float(c), tables).singular_values
        if s[-1] < 1e-6 * s[0]:
            dips.append(float(c))
    # refine each root bracketing the closed-form values
    for z in zetas:
        lo, hi = z - 0.02, z + 0.02

        def minsv(c):
            s = assemble_H(n, params, float(c), tables).singular_values
            return s[-1] / s[0]

        grid = np.linspace(lo, hi, 81)
        best = grid[int(np.argmin([minsv(c) for c in grid]))]
        assert abs(best - z) / abs(z) < 1e-3
        assert minsv(z) < 1e-12  # exact closed form is a true singularity
    # coarse scan finds no dip away from the closed forms
    for c in dips:
        assert min(abs(c - z) for z in zetas) < 0.06


def test_kernel_extraction_and_t_conditions(tables, materials):
    for params in materials[:2]:
        for n in (2, 3):
            z = plasmon_constants(params, n)
            for fam, c in enumerate(z.as_tuple(), start=1):
                kers = plasmon_kernel(assemble_H(n, params, c, tables))
                assert len(kers) == MULTIPLICITY[fam](n)
                for K in kers:
                    assert kernel_family(K, tables) == fam
                    assert abs(np.sum(K * np.conj(K)) - 1.0) < 1e-12


def test_kernel_error_off_resonance(tables):
    with pytest.raises(ValueError, match="singular value"):
        plasmon_kernel(assemble_H(2, LameParams(1.0, 1.0), -2.5, tables))


def test_cross_family_orthogonality(tables):
    params = LameParams(1.0, 1.0)
    n = 3
    allk = []
    for fam, c in enumerate(plasmon_constants(params, n).as_tuple(), start=1):
        allk += plasmon_kernel(assemble_H(n, params, c, tables))
    V = np.array([k.ravel() for k in allk])
    gram = V @ V.conj().T
    assert V.shape[0] == 3 * (2 * n + 1)
    assert np.max(np.abs(gram - np.eye(len(allk)))) < 1e-10


def test_kernels_generate_real_fields(tables):
    params = LameParams(1.0, 1.0)
    kers = plasmon_kernel(assemble_H(2, params, plasmon_constants(params, 2).zeta1, tables))
    rng = np.random.default_rng(0)
    d = rng.normal(size=(6, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    Y = sph_harm_stack(2, d)
    for K in kers:
        assert np.max(np.abs(np.imag(Y @ K.T))) < 1e-12


def test_kernel_independence_of_radius(tables):
    params = LameParams(2.0, 0.5)
    z = plasmon_constants(params, 2).zeta3
    k1 = plasmon_kernel(assemble_H(2, params, z, tables, R=1.0))
    k2 = plasmon_kernel(assemble_H(2, params, z, tables, R=2.0))
    V1 = np.array([k.ravel() for k in k1])
    V2 = np.array([k.ravel() for k in k2])
    # spans agree: projection of one basis onto the other is unitary
    M = V1 @ V2.conj().T
    assert np.max(np.abs(M @ M.conj().T - np.eye(len(k1)))) < 1e-9


def test_perfect_waves_full_invariants(tables, materials):
    tol = {"continuity": 1e-9, "transmission": 1e-8, "lame": 1e-6}
    for params in materials[:2]:
        for n in (2, 3):
            z = plasmon_constants(params, n)
            for fam, c in enumerate(z.as_tuple(), start=1):
                kers = plasmon_kernel(assemble_H(n, params, c, tables))
                for K in kers[:2]:
                    w = perfect_wave(K, fam, n, 1.3, params, tables)
                    rep = verify_perfect_wave(w, params, tables)
                    assert rep["continuity"] < tol["continuity"]
                    assert rep["transmission"] < tol["transmission"]
                    assert max(rep["lame_interior"], rep["lame_exterior"]) < tol["lame"]
                    assert rep["normalization"] < 1e-10
                    if fam == 1:
                        assert rep["t1"] < 1e-9 and rep["t3"] < 1e-9
                    elif fam == 2:
                        assert rep["t1"] < 1e-9 and rep["t3"] > 1e-6
                    else:
                        assert rep["t1"] > 1e-6 and rep["t3"] < 1e-9


def test_family1_exterior_is_pure_multipole(tables):
    params = LameParams(1.0, 1.0)
    z = plasmon_constants(params, 2)
    K = plasmon_kernel(assemble_H(2, params, z.zeta1, tables))[0]
    w = perfect_wave(K, 1, 2, 1.5, params, tables)
    assert len(w.exterior.terms) == 1
    assert w.exterior.terms[0].power == -3
    assert np.max(np.abs(w.exterior.terms[0].coef - K * 1.5**5)) < 1e-12


def test_perfect_wave_continuity_at_random_points(tables):
    params = LameParams(1.0, 1.0)
    z = plasmon_constants(params, 3)
    K = plasmon_kernel(assemble_H(3, params, z.zeta2, tables))[0]
    w = perfect_wave(K, 2, 3, 1.1, params, tables)
    rng = np.random.default_rng(1)
    d = rng.normal(size=(200, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    vin = eval_terms(w.interior.terms, 1.1 * d)
    vout = eval_terms(w.exterior.terms, 1.1 * d)
    assert np.max(np.abs(vin - vout)) < 1e-9


def test_np_eigenvalue_map_values():
    assert np_eigenvalue_map(-1.0) == 0.0
    assert np_eigenvalue_map(-4.0) == pytest.approx(0.3, abs=1e-15)
    assert np_eigenvalue_map(-1e9) == pytest.approx(0.5, abs=1e-8)
    with pytest.raises(ZeroDivisionError):
        np_eigenvalue_map(1.0)


def test_kelvin_matrix_properties():
    params = LameParams(1.0, 1.0)
    x = np.array([0.3, -0.7, 0.2])
    K = kelvin_matrix(x, params)
    assert np.max(np.abs(K - K.T)) == 0.0
    assert np.max(np.abs(kelvin_matrix(2 * x, params) - K / 2)) < 1e-14
    # alpha, beta at (1, 1): 2/3 and 1/3
    r = np.linalg.norm(x)
    diag_part = -2.0 / 3.0 / (4 * math.pi) / r
    offdiag = K[0, 1]
    assert offdiag == pytest.approx(-(1.0 / 3.0) / (4 * math.pi) * x[0] * x[1] / r**3, abs=1e-15)
    assert K[0, 0] == pytest.approx(diag_part - (1.0 / 3.0) / (4 * math.pi) * x[0] ** 2 / r**3, abs=1e-15)
    with pytest.raises(ZeroDivisionError):
        kelvin_matrix(np.zeros(3), params)


def test_single_layer_jump_relation(tables):
    # traction jump across the surface reproduces the density; continuity holds
    params = LameParams(1.0, 1.0)
    quad = build_quadrature(16)
    R = 1.0
    inside, outside = single_layer_field(0, 2, 1, R, params, tables)
    from elastoplasmon.lame import grad_terms, _traction_from_grad

    eps = 1e-8
    ti = _traction_from_grad(grad_terms(inside.terms, (1 - eps) * quad.nodes, tables), quad.nodes, params.lam, params.mu)
    to = _traction_from_grad(grad_terms(outside.terms, (1 + eps) * quad.nodes, tables), quad.nodes, params.lam, params.mu)
    dens = np.zeros_like(ti)
    dens[:, 0] = quad.harmonics(2)[:, 1]
    assert np.max(np.abs((to - ti) - dens)) < 1e-6
    vi = eval_terms(inside.terms, R * quad.nodes)
    vo = eval_terms(outside.terms, R * quad.nodes)
    assert np.max(np.abs(vi - vo)) < 1e-12


@pytest.fixture(scope="module")
def np_spectrum():
    params = LameParams(1.0, 1.0)
    quad = build_quadrature(2 * 5 + 6)
    return np_galerkin_spectrum(1.0, params, 5, quad)


def test_np_spectrum_contains_mapped_constants(np_spectrum, tables):
    eigs = np.array([e for e, _ in np_spectrum])
    params = LameParams(1.0, 1.0)
    for n in (2, 3):
        for c in plasmon_constants(params, n).as_tuple():
            target = np_eigenvalue_map(c)
            assert np.min(np.abs(eigs - target)) < 2e-3, (n, c, target)


def test_np_spectrum_within_half(np_spectrum):
    eigs = np.array([e for e, _ in np_spectrum])
    assert np.all(eigs > -0.5) and np.all(eigs < 0.5)


def test_np_spectrum_scale_invariance(tables):
    params = LameParams(1.0, 1.0)
    quad = build_quadrature(2 * 3 + 6)
    s1 = np.array([e for e, _ in np_galerkin_spectrum(1.0, params, 3, quad)])
    s2 = np.array([e for e, _ in np_galerkin_spectrum(2.0, params, 3, quad)])
    assert np.max(np.abs(np.sort(s1) - np.sort(s2))) < 1e-6


def test_np_spectrum_rejects_coarse_quadrature():
    with pytest.raises(ValueError):
        np_galerkin_spectrum(1.0, LameParams(1.0, 1.0), 5, build_quadrature(8))
