"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (collected again in the terminal summary)."""

import time

import numpy as np
import pytest
from scipy import special

from rankshape.bounds import alpha0, alpha0_quadrature
from rankshape.elliptical import GeneratorKind, make_generator, sample_es
from rankshape.estimators import renormalize
from rankshape.harness import (
    bp_curve,
    eif_curve,
    run_mse_sweep,
    run_scenario,
    spec_from_dict,
    write_csv,
    _mse_with_se,
)
from rankshape.matops import (
    Constraint,
    MatrixField,
    ShapeMatrix,
    build_compression,
    divide_by_real,
    herm_power,
    identity_complement_projector,
    ovec,
    ovecs,
    sym_expander,
    vec,
)
from rankshape.restimator import REstimatorConfig, clairvoyant_estimate, r_estimate
from rankshape.scores import score_from_generator, t_score, van_der_waerden_score

REAL, COMPLEX = MatrixField.REAL, MatrixField.COMPLEX
DECILES = np.arange(0.1, 0.95, 0.1)


def _random_shape(rng, n, complex_field):
    if complex_field:
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    else:
        a = rng.standard_normal((n, n))
    v = a @ a.conj().T + n * np.eye(n)
    v = 0.5 * (v + v.conj().T)
    return ShapeMatrix(divide_by_real(v, v[0, 0].real), Constraint.TOP_LEFT_UNIT)


def test_criterion_1_alpha_closed_forms(acceptance_record):
    start = time.perf_counter()
    ok = True
    for n in (2, 4, 8):
        for field, expect in ((REAL, 0.5), (COMPLEX, 1.0)):
            gen = make_generator(GeneratorKind.GAUSSIAN, n, field, 1.0)
            ok &= alpha0(gen) == expect
            ok &= abs(alpha0(gen) / alpha0_quadrature(gen) - 1.0) < 1e-6
        for s in (0.5, 1.0, 2.0):
            gen = make_generator(GeneratorKind.GENERALIZED_GAUSSIAN, n, COMPLEX,
                                 4.0, s=s)
            ok &= abs(alpha0(gen) - (n + s) / (n + 1.0)) < 1e-14
            ok &= abs(alpha0(gen) / alpha0_quadrature(gen) - 1.0) < 1e-6
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1.0
    acceptance_record("1 alpha0 closed forms", bool(ok), f"{elapsed * 1e3:.0f} ms")
    assert ok


def test_criterion_2_structural_algebra(acceptance_record):
    rng = np.random.default_rng(2024)
    ok = True
    for _ in range(100):
        n = int(rng.integers(2, 9))
        a = rng.standard_normal((n, n))
        a = a + a.T
        a[0, 0] = 0.0
        ok &= np.array_equal(sym_expander(n).T @ ovecs(a), vec(a))
    for _ in range(100):
        n = int(rng.integers(2, 9))
        proj = identity_complement_projector(n)
        ok &= np.linalg.norm(proj @ proj - proj) < 1e-12
    for _ in range(100):
        n = int(rng.integers(2, 9))
        v1 = _random_shape(rng, n, complex_field=bool(rng.integers(2)))
        comp = build_compression(v1)
        ok &= np.linalg.norm(comp @ vec(np.eye(n))) < 1e-12
    for _ in range(100):
        n = int(rng.integers(2, 9))
        v = _random_shape(rng, n, complex_field=bool(rng.integers(2))).mat
        s = herm_power(v, 0.5)
        ok &= np.linalg.norm(s @ s - v) / np.linalg.norm(v) < 1e-10
        ok &= np.linalg.norm(herm_power(v, -0.5) @ s - np.eye(n)) < 1e-10
    acceptance_record("2 structural algebra suite", bool(ok))
    assert ok


def test_criterion_3_score_identities(acceptance_record):
    ok = True
    n = 4
    # Gaussian-generator scores against their closed forms
    k_real = score_from_generator(make_generator(GeneratorKind.GAUSSIAN, n,
                                                 REAL, 1.0))
    expect_real = special.gammaincinv(0.5 * n, DECILES)  # chi2_n quantile / 2
    ok &= np.max(np.abs(k_real(DECILES) - expect_real)) < 1e-8
    k_cplx = score_from_generator(make_generator(GeneratorKind.GAUSSIAN, n,
                                                 COMPLEX, 1.0))
    expect_cplx = special.gammaincinv(float(n), DECILES)
    ok &= np.max(np.abs(k_cplx(DECILES) - expect_cplx)) < 1e-8
    # winsorized score converges to the Gaussian one as nu grows
    for field in (REAL, COMPLEX):
        vdw = van_der_waerden_score(n, field)(DECILES)
        big_nu = t_score(n, field, 1e6)(DECILES)
        ok &= np.max(np.abs(big_nu - vdw)) < 1e-3
    acceptance_record("3 score identities", bool(ok))
    assert ok


def test_criterion_4_exact_invariances(acceptance_record):
    rng = np.random.default_rng(44)
    score = van_der_waerden_score(4, COMPLEX)
    ok = True
    for k in range(50):
        v = _random_shape(rng, 4, complex_field=True)
        kind = (GeneratorKind.GAUSSIAN if k % 2 == 0
                else GeneratorKind.GENERALIZED_GAUSSIAN)
        gen = (make_generator(kind, 4, COMPLEX, 1.0) if k % 2 == 0
               else make_generator(kind, 4, COMPLEX, 4.0, s=0.5))
        data = sample_es(gen, np.zeros(4, complex), v.mat, 64,
                         np.random.default_rng(np.random.SeedSequence(45, spawn_key=(k,))))
        prelim = "tyler" if k % 3 else "scm"
        cfg = REstimatorConfig(score=score, preliminary=prelim,
                               perturbation_seed=k)
        base = r_estimate(data, cfg)
        # scale invariance, bitwise, power-of-two factor
        c = (2.0, 0.5, 4.0)[k % 3]
        scaled_data = type(data)(samples=c * data.samples, meta=data.meta)
        scaled = r_estimate(scaled_data, cfg)
        ok &= np.array_equal(base.shape.mat, scaled.shape.mat)
        ok &= base.alpha_hat == scaled.alpha_hat
        # score homogeneity, bitwise
        rescored = r_estimate(data, REstimatorConfig(
            score=2.0 * score, preliminary=prelim, perturbation_seed=k))
        ok &= np.array_equal(base.shape.mat, rescored.shape.mat)
        ok &= rescored.alpha_hat == 2.0 * base.alpha_hat
    acceptance_record("4 exact invariances (bitwise)", bool(ok))
    assert ok


@pytest.fixture(scope="module")
def efficiency_sweep():
    spec = spec_from_dict({
        "spec_version": 1, "scenario": "mse-vs-l", "field": "complex",
        "dim": 8, "runs": 1000, "master_seed": 20260809,
        "generator": {"kind": "gg", "s": 0.5, "sigma2": 4.0},
        "sigma0": {"kind": "toeplitz", "rho_abs": 0.8, "rho_phase_turns": 0.2},
        "sample_sizes": [128, 512, 2048],
        "estimators": [{"kind": "tyler"},
                       {"kind": "r", "score": "vdw", "preliminary": "tyler"}],
    })
    return run_mse_sweep(spec)


def test_criterion_5_semiparametric_efficiency(acceptance_record, efficiency_sweep):
    rows = efficiency_sweep
    floor = {r.coordinate: r.value for r in rows if r.metric == "cscrb_floor"}
    tyler = {r.coordinate: r.value for r in rows
             if r.estimator == "tyler" and r.metric == "mse_index"}
    rank = {r.coordinate: r.value for r in rows
            if r.estimator == "r-vdw-tyler" and r.metric == "mse_index"}
    ratio = rank[2048.0] / floor[2048.0]
    ok = abs(ratio - 1.0) <= 0.30
    ordering = all(rank[L] < tyler[L] for L in (128.0, 512.0, 2048.0))
    ok &= ordering
    acceptance_record("5 semiparametric efficiency", bool(ok),
                      f"mse/bound at L=2048: {ratio:.3f}; "
                      f"rank<preliminary at all L: {ordering}")
    assert ok


def test_criterion_6_consistency_slope(acceptance_record, efficiency_sweep):
    rows = efficiency_sweep
    ok = True
    slopes = {}
    for est in ("tyler", "r-vdw-tyler"):
        pts = sorted((r.coordinate, r.value) for r in rows
                     if r.estimator == est and r.metric == "mse_index")
        slope = np.polyfit(np.log([p[0] for p in pts]),
                           np.log([p[1] for p in pts]), 1)[0]
        slopes[est] = slope
        ok &= -1.25 <= slope <= -0.75
    acceptance_record("6 root-L consistency slope", bool(ok),
                      ", ".join(f"{k}: {v:.2f}" for k, v in slopes.items()))
    assert ok


def test_criterion_7_distributional_robustness(acceptance_record):
    n, L, runs = 4, 512, 500
    from rankshape.harness import build_sigma0

    sigma0 = build_sigma0({"kind": "toeplitz", "rho_abs": 0.8,
                           "rho_phase_turns": 0.2}, n, COMPLEX)
    v1 = ShapeMatrix(divide_by_real(sigma0, sigma0[0, 0].real),
                     Constraint.TOP_LEFT_UNIT)
    v0 = renormalize(v1, Constraint.TRACE_N)
    score = van_der_waerden_score(n, COMPLEX)
    results = {}
    generators = (
        ("t5", 0, make_generator(GeneratorKind.STUDENT_T, n, COMPLEX, 1.0, dof=5)),
        ("gg0.5", 1, make_generator(GeneratorKind.GENERALIZED_GAUSSIAN, n,
                                    COMPLEX, 4.0, s=0.5)),
    )
    for tag, key, gen in generators:
        errs = []
        for r in range(runs):
            data = sample_es(gen, np.zeros(n, complex), sigma0, L,
                             np.random.default_rng(
                                 np.random.SeedSequence(7007, spawn_key=(key, r))))
            rep = r_estimate(data, REstimatorConfig(
                score=score,
                perturbation_seed=np.random.SeedSequence(7007, spawn_key=(key, r, 1))))
            errs.append(vec(renormalize(rep.shape, Constraint.TRACE_N).mat - v0.mat))
        results[tag] = _mse_with_se(np.stack(errs))
    (m1, s1), (m2, s2) = results["t5"], results["gg0.5"]
    gap = abs(m1 - m2)
    tol = 3.0 * np.hypot(s1, s2)
    ok = gap <= tol
    acceptance_record("7 distributional robustness", bool(ok),
                      f"|{m1:.4g} - {m2:.4g}| = {gap:.2g} vs 3*SE = {tol:.2g}")
    assert ok


def test_criterion_8_robustness_metrics(acceptance_record):
    base = {
        "spec_version": 1, "field": "complex", "dim": 8, "master_seed": 808,
        "generator": {"kind": "gg", "s": 0.1, "sigma2": 4.0},
        "sigma0": {"kind": "toeplitz", "rho_abs": 0.8, "rho_phase_turns": 0.2},
        "estimators": [{"kind": "scm"}, {"kind": "tyler"},
                       {"kind": "r", "score": "t", "nu": 0.1},
                       {"kind": "r", "score": "t", "nu": 1.0}],
    }
    bp_spec = spec_from_dict({**base, "scenario": "bp-curve", "runs": 200,
                              "sample_sizes": [40],
                              "epsilon_grid": [0.0, 0.05, 0.25],
                              "outlier_rho": 0.1})
    bp_rows = bp_curve(bp_spec)
    bp = {(r.estimator, r.coordinate): r.value for r in bp_rows}
    robust = ("tyler", "r-t0.1-tyler", "r-t1-tyler")
    ok = all(bp[(e, 0.0)] == 1.0 for e in ("scm",) + robust)
    ok &= bp[("scm", 0.05)] > 1e3
    ok &= all(bp[(e, eps)] < 10.0 for e in robust for eps in (0.05, 0.25))

    eif_spec = spec_from_dict({**base, "scenario": "eif-curve", "runs": 100,
                               "sample_sizes": [1000],
                               "outlier_rho_grid": [1.0, 0.1, 0.01]})
    eif_rows = eif_curve(eif_spec)
    eif = {(r.estimator, r.coordinate): r.value for r in eif_rows}
    ok &= eif[("scm", 0.01)] > 1e2
    bounded = all(
        max(eif[(e, rho)] for rho in (1.0, 0.1, 0.01)) <= 10.0 * eif[(e, 1.0)]
        for e in robust)
    ok &= bounded
    acceptance_record(
        "8 robustness metrics", bool(ok),
        f"scm bp(0.05)={bp[('scm', 0.05)]:.2g}, "
        f"tyler bp(0.25)={bp[('tyler', 0.25)]:.2g}, "
        f"scm eif(0.01)={eif[('scm', 0.01)]:.2g}")
    assert ok


def test_criterion_9_oracle_agreement(acceptance_record):
    n, L, runs = 4, 4096, 400
    gen = make_generator(GeneratorKind.GAUSSIAN, n, COMPLEX, 1.0)
    from rankshape.harness import build_sigma0

    sigma0 = build_sigma0({"kind": "toeplitz", "rho_abs": 0.5,
                           "rho_phase_turns": 0.1}, n, COMPLEX)
    v1 = ShapeMatrix(divide_by_real(sigma0, sigma0[0, 0].real),
                     Constraint.TOP_LEFT_UNIT)
    score = van_der_waerden_score(n, COMPLEX)
    mean_rank = np.zeros((n, n), complex)
    mean_cl = np.zeros((n, n), complex)
    err_rank, err_cl = [], []
    for r in range(runs):
        data = sample_es(gen, np.zeros(n, complex), sigma0, L,
                         np.random.default_rng(np.random.SeedSequence(909, spawn_key=(r,))))
        rep = r_estimate(data, REstimatorConfig(
            score=score, perturbation_seed=np.random.SeedSequence(909, spawn_key=(r, 1))))
        oracle = clairvoyant_estimate(data, gen)
        mean_rank += rep.shape.mat / runs
        mean_cl += oracle.shape.mat / runs
        err_rank.append(ovec(rep.shape.mat) - ovec(v1.mat))
        err_cl.append(ovec(oracle.shape.mat) - ovec(v1.mat))
    gap = np.linalg.norm(mean_rank - mean_cl)
    ok = gap < 0.1
    m_r, s_r = _mse_with_se(np.stack(err_rank))
    m_c, s_c = _mse_with_se(np.stack(err_cl))
    ordering = m_c <= m_r + 2.0 * np.hypot(s_r, s_c)
    ok &= ordering
    acceptance_record("9 oracle agreement", bool(ok),
                      f"mean gap {gap:.2g}; oracle mse {m_c:.4g} <= "
                      f"rank mse {m_r:.4g} + 2 SE: {ordering}")
    assert ok


def test_criterion_10_harness_determinism(acceptance_record, tmp_path):
    specs = [
        {"spec_version": 1, "scenario": "mse-vs-l", "field": "complex",
         "dim": 3, "runs": 5, "master_seed": 1, "sample_sizes": [32],
         "generator": {"kind": "gaussian"}, "sigma0": {"kind": "identity"},
         "estimators": [{"kind": "tyler"}, {"kind": "r", "score": "vdw"}]},
        {"spec_version": 1, "scenario": "bp-curve", "field": "complex",
         "dim": 3, "runs": 5, "master_seed": 2, "sample_sizes": [24],
         "epsilon_grid": [0.0, 0.1], "outlier_rho": 0.1,
         "generator": {"kind": "gg", "s": 0.5, "sigma2": 4.0},
         "sigma0": {"kind": "identity"}, "estimators": [{"kind": "tyler"}]},
        {"spec_version": 1, "scenario": "eif-curve", "field": "real",
         "dim": 3, "runs": 4, "master_seed": 3, "sample_sizes": [64],
         "outlier_rho_grid": [0.5], "generator": {"kind": "t", "dof": 5},
         "sigma0": {"kind": "toeplitz", "rho_abs": 0.5},
         "estimators": [{"kind": "scm"}, {"kind": "tyler"}]},
        {"spec_version": 1, "scenario": "alpha-sweep", "field": "complex",
         "dim": 3, "runs": 4, "master_seed": 4, "upsilon_grid": [0.01, 0.1],
         "generator": {"kind": "gaussian"}, "sigma0": {"kind": "identity"},
         "estimators": [{"kind": "r", "score": "vdw"}]},
    ]
    ok = True
    for i, d in enumerate(specs):
        a, b = tmp_path / f"{i}a.csv", tmp_path / f"{i}b.csv"
        write_csv(run_scenario(spec_from_dict(d)), a)
        write_csv(run_scenario(spec_from_dict(d)), b)
        ok &= a.read_bytes() == b.read_bytes()
    acceptance_record("10 harness determinism", bool(ok))
    assert ok
