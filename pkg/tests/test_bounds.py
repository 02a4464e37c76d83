import numpy as np
import pytest

from rankshape.bounds import (
    alpha0,
    alpha0_quadrature,
    cscrb,
    sfim_shape,
    trace_rescale_jacobian,
)
from rankshape.elliptical import GeneratorKind, make_generator
from rankshape.matops import (
    Constraint,
    MatrixField,
    ShapeMatrix,
    build_compression,
    divide_by_real,
    ovec,
    ovecs,
    vec,
    vecs,
)

REAL, COMPLEX = MatrixField.REAL, MatrixField.COMPLEX


def random_shape(seed, n, complex_field):
    rng = np.random.default_rng(seed)
    if complex_field:
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    else:
        a = rng.standard_normal((n, n))
    v = a @ a.conj().T + n * np.eye(n)
    v = 0.5 * (v + v.conj().T)
    return ShapeMatrix(divide_by_real(v, v[0, 0].real), Constraint.TOP_LEFT_UNIT)


class TestAlpha0:
    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_real_gaussian_is_half(self, n):
        gen = make_generator(GeneratorKind.GAUSSIAN, n, REAL, 1.0)
        assert alpha0(gen) == 0.5
        assert abs(alpha0_quadrature(gen) - 0.5) < 1e-6

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_complex_gaussian_is_one(self, n):
        gen = make_generator(GeneratorKind.GAUSSIAN, n, COMPLEX, 3.0)
        assert alpha0(gen) == 1.0
        assert abs(alpha0_quadrature(gen) - 1.0) < 1e-6

    @pytest.mark.parametrize("n", [2, 4, 8])
    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
    def test_complex_gg_closed_form(self, n, s):
        gen = make_generator(GeneratorKind.GENERALIZED_GAUSSIAN, n, COMPLEX,
                             4.0, s=s)
        expect = (n + s) / (n + 1.0)
        assert alpha0(gen) == pytest.approx(expect, rel=1e-14)
        assert abs(alpha0_quadrature(gen) / expect - 1.0) < 1e-6

    @pytest.mark.parametrize("n,s", [(3, 0.5), (5, 2.0)])
    def test_real_gg_against_quadrature(self, n, s):
        gen = make_generator(GeneratorKind.GENERALIZED_GAUSSIAN, n, REAL, 1.0, s=s)
        expect = (n + 2.0 * s) / (2.0 * (n + 2.0))
        assert alpha0(gen) == pytest.approx(expect, rel=1e-14)
        assert abs(alpha0_quadrature(gen) / expect - 1.0) < 1e-6

    @pytest.mark.parametrize("n,dof", [(4, 5.0), (8, 3.0)])
    def test_t_against_quadrature(self, n, dof):
        for field, expect in ((REAL, (dof + n) / (2.0 * (dof + n + 2.0))),
                              (COMPLEX, (2 * n + dof) / (2 * n + dof + 2.0))):
            gen = make_generator(GeneratorKind.STUDENT_T, n, field, 2.0, dof=dof)
            assert alpha0(gen) == pytest.approx(expect, rel=1e-14)
            assert abs(alpha0_quadrature(gen) / expect - 1.0) < 1e-6

    def test_scale_free(self):
        a = alpha0_quadrature(make_generator(
            GeneratorKind.GENERALIZED_GAUSSIAN, 4, COMPLEX, 1.0, s=0.5))
        b = alpha0_quadrature(make_generator(
            GeneratorKind.GENERALIZED_GAUSSIAN, 4, COMPLEX, 4.0, s=0.5))
        assert abs(a - b) < 1e-7

    def test_unknown_method(self):
        gen = make_generator(GeneratorKind.GAUSSIAN, 4, REAL, 1.0)
        with pytest.raises(ValueError):
            alpha0(gen, method="guess")


class TestSfim:
    def test_identity_complex_gaussian(self):
        v = ShapeMatrix(np.eye(4, dtype=complex), Constraint.TOP_LEFT_UNIT)
        gen = make_generator(GeneratorKind.GAUSSIAN, 4, COMPLEX, 1.0)
        comp = build_compression(v)
        assert np.allclose(sfim_shape(v, gen), comp @ comp.conj().T, atol=1e-14)

    def test_gg_scales_by_alpha_ratio(self):
        v = random_shape(0, 4, complex_field=True)
        gauss = make_generator(GeneratorKind.GAUSSIAN, 4, COMPLEX, 1.0)
        gg = make_generator(GeneratorKind.GENERALIZED_GAUSSIAN, 4, COMPLEX,
                            1.0, s=0.5)
        ratio = (4 + 0.5) / (4 + 1.0)
        assert np.allclose(sfim_shape(v, gg), ratio * sfim_shape(v, gauss),
                           rtol=1e-12)

    def test_positive_definite_random_shape(self):
        v = random_shape(1, 5, complex_field=True)
        gen = make_generator(GeneratorKind.GAUSSIAN, 5, COMPLEX, 1.0)
        w = np.linalg.eigvalsh(sfim_shape(v, gen))
        assert w[0] > 0

    def test_field_mismatch(self):
        v = random_shape(2, 4, complex_field=False)
        gen = make_generator(GeneratorKind.GAUSSIAN, 4, COMPLEX, 1.0)
        with pytest.raises(ValueError, match="field"):
            sfim_shape(v, gen)


def rescale_map(coords, field):
    """Independent evaluation of the trace-N rescale in stacked coordinates."""
    if field is REAL:
        from rankshape.matops import matrix_from_ovecs

        a = matrix_from_ovecs(coords).mat
        return vecs(a.shape[0] * a / np.trace(a))
    n = int(round(np.sqrt(coords.size + 1)))
    full = np.concatenate(([1.0 + 0j], coords))
    a = full.reshape((n, n), order="F")
    return vec(n * a / np.trace(a))


class TestJacobian:
    @pytest.mark.parametrize("seed", range(5))
    def test_complex_against_finite_differences(self, seed):
        v1 = random_shape(seed, 3, complex_field=True)
        jac = trace_rescale_jacobian(v1)
        phi0 = ovec(v1.mat)
        h = 1e-6
        for k in range(phi0.size):
            for step in (h, 1j * h):
                up, dn = phi0.copy(), phi0.copy()
                up[k] += step
                dn[k] -= step
                fd = (rescale_map(up, COMPLEX)
                      - rescale_map(dn, COMPLEX)) / (2 * step)
                assert np.max(np.abs(fd - jac[:, k])) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_real_against_finite_differences(self, seed):
        v1 = random_shape(100 + seed, 3, complex_field=False)
        jac = trace_rescale_jacobian(v1)
        phi0 = ovecs(v1.mat)
        h = 1e-6
        for k in range(phi0.size):
            up, dn = phi0.copy(), phi0.copy()
            up[k] += h
            dn[k] -= h
            fd = (rescale_map(up, REAL) - rescale_map(dn, REAL)) / (2 * h)
            assert np.max(np.abs(fd - jac[:, k])) < 1e-6


class TestCscrb:
    def test_top_left_unit_is_information_inverse(self):
        v = random_shape(3, 4, complex_field=True)
        gen = make_generator(GeneratorKind.GENERALIZED_GAUSSIAN, 4, COMPLEX,
                             4.0, s=0.5)
        rep = cscrb(v, gen, Constraint.TOP_LEFT_UNIT)
        eye = np.eye(rep.sfim.shape[0])
        assert np.max(np.abs(rep.cscrb @ rep.sfim - eye)) < 1e-8
        assert rep.epsilon > 0
        w = np.linalg.eigvalsh(rep.cscrb)
        assert w[0] > 0

    @pytest.mark.parametrize("complex_field", [False, True])
    def test_trace_coordinates_psd_with_trace_kernel(self, complex_field):
        v = random_shape(4, 4, complex_field)
        gen = make_generator(GeneratorKind.GAUSSIAN, 4,
                             COMPLEX if complex_field else REAL, 1.0)
        rep = cscrb(v, gen, Constraint.TRACE_N)
        w = np.linalg.eigvalsh(rep.cscrb)
        assert w[0] > -1e-10  # PSD
        # exactly one zero direction: the fixed-trace constraint
        assert np.sum(w < 1e-12 * w[-1]) == 1
        assert np.array_equal(rep.cscrb, rep.cscrb.conj().T)

    def test_coordinates_recorded(self):
        v = random_shape(5, 3, complex_field=True)
        gen = make_generator(GeneratorKind.GAUSSIAN, 3, COMPLEX, 1.0)
        assert (cscrb(v, gen, Constraint.TRACE_N).coordinates
                is Constraint.TRACE_N)
