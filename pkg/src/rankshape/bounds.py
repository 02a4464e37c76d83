"""Efficiency benchmarks: information constant, shape information matrix,
and the constrained lower bound used as the MSE floor in experiments.

Coordinates matter here.  Estimation runs in top-left-unit coordinates
(the free entries of V with V[0,0] = 1); reporting and the MSE index use
the trace-N rescaling.  The bound is therefore offered in both: the
top-left-unit bound is the inverse information matrix, and the trace-N
bound is its image under the Jacobian of the rescaling map, expressed in
the same vectorization the MSE index uses (full ``vec`` for complex
data, ``vecs`` for real).  The trace-N bound matrix is singular by
construction (the rescaled estimate has a fixed trace), with exactly one
zero eigenvalue.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.linalg import cho_factor, cho_solve

from .elliptical import DensityGenerator, GeneratorKind
from .matops import (
    Constraint,
    MatrixField,
    ShapeMatrix,
    build_compression,
    ovec_selector,
    sym_expander,
    vec,
    vecs_selector,
)

__all__ = ["BoundReport", "alpha0", "alpha0_quadrature", "sfim_shape",
           "trace_rescale_jacobian", "cscrb"]


@dataclass(frozen=True)
class BoundReport:
    alpha0: float
    sfim: np.ndarray
    cscrb: np.ndarray
    epsilon: float
    coordinates: Constraint


def alpha0(gen: DensityGenerator, method: str = "auto") -> float:
    """Information constant of the shape block for one generator.

    Defined as c * E{Q^2 psi0(Q)^2} / (N (N + 2)) with c = 2 in the real
    case and c * E{Q^2 psi0(Q)^2} / (N (N + 1)) with c = 1 in the complex
    case.  ``method='auto'`` uses the closed form of the family (all
    three built-in families have one); ``'quadrature'`` integrates
    against the radial pdf.
    """
    if method not in ("auto", "closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "quadrature":
        return alpha0_quadrature(gen)
    n = gen.dim
    real = gen.field is MatrixField.REAL
    if gen.kind is GeneratorKind.GAUSSIAN:
        return 0.5 if real else 1.0
    if gen.kind is GeneratorKind.GENERALIZED_GAUSSIAN:
        s = gen.params["s"]
        return (n + 2.0 * s) / (2.0 * (n + 2.0)) if real else (n + s) / (n + 1.0)
    dof = gen.params["dof"]
    if real:
        return (dof + n) / (2.0 * (dof + n + 2.0))
    return (2.0 * n + dof) / (2.0 * n + dof + 2.0)


def alpha0_quadrature(gen: DensityGenerator, rtol: float = 1e-8) -> float:
    """Quadrature evaluation of the information constant."""
    second = _weighted_square_moment(gen, rtol)
    n = gen.dim
    if gen.field is MatrixField.REAL:
        return 2.0 * second / (n * (n + 2.0))
    return second / (n * (n + 1.0))


def _weighted_square_moment(gen: DensityGenerator, rtol: float) -> float:
    """E{Q^2 psi0(Q)^2} by adaptive quadrature against the radial pdf."""
    law = gen.q_law

    def integrand(q):
        return (q * gen.psi0(q)) ** 2 * law.pdf(q)

    upper = float(law.quantile(1.0 - 1e-10))
    # interior quantiles guide the adaptive subdivision; heavy-tailed laws
    # put the upper integration limit many decades past the bulk
    knots = [float(law.quantile(p)) for p in (0.1, 0.5, 0.9, 0.999, 1 - 1e-6)]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(integrand, 0.0, upper,
                                           epsrel=rtol, limit=500,
                                           points=knots)
        except integrate.IntegrationWarning as exc:
            raise RuntimeError(f"quadrature failed to converge: {exc}") from exc
    if value <= 0.0 or abserr > max(10.0 * rtol * value, 1e-12):
        raise RuntimeError(
            f"quadrature unreliable: value {value:.6e}, abserr {abserr:.2e}")
    return value


def sfim_shape(v1: ShapeMatrix, gen: DensityGenerator) -> np.ndarray:
    """Information matrix of the free shape coordinates: alpha times the
    Gram matrix of the compression matrix."""
    if v1.field is not gen.field:
        raise ValueError("shape matrix and generator live over different fields")
    c = build_compression(v1)
    gram = c @ c.conj().T
    return alpha0(gen) * 0.5 * (gram + gram.conj().T)


def trace_rescale_jacobian(v1: ShapeMatrix) -> np.ndarray:
    """Jacobian of the free coordinates of V1 into the stacked entries of
    N * V1 / trace(V1).

    Complex case: maps ovec coordinates (N^2 - 1) to the full vec (N^2);
    real case: maps ovecs coordinates to the full vecs.  The map is a
    ratio of affine functions of the coordinates, so this is its exact
    first-order linearization at V1.
    """
    n = v1.dim
    a = v1.mat
    tr = a.trace().real
    w0 = vec(a)
    vi = vec(np.eye(n))
    core = (n / tr) * np.eye(n * n) - (n / tr**2) * np.outer(w0, vi)
    if v1.field is MatrixField.COMPLEX:
        return core @ ovec_selector(n).T
    return vecs_selector(n) @ core @ sym_expander(n).T


def cscrb(v1: ShapeMatrix, gen: DensityGenerator,
          coordinates: Constraint = Constraint.TOP_LEFT_UNIT) -> BoundReport:
    """Lower bound on the error covariance of shape estimates at ``v1``.

    In top-left-unit coordinates the bound is the inverse information
    matrix.  In trace-N coordinates it is pushed through the rescaling
    Jacobian so that its Frobenius norm (``epsilon``) is directly
    comparable to the MSE index computed on trace-normalized estimates;
    the plotted floor for L observations is epsilon / L.
    """
    info = sfim_shape(v1, gen)
    try:
        factor = cho_factor(info)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"information matrix is singular: {exc}") from exc
    inv = cho_solve(factor, np.eye(info.shape[0], dtype=info.dtype))
    inv = 0.5 * (inv + inv.conj().T)
    if coordinates is Constraint.TOP_LEFT_UNIT:
        bound = inv
    else:
        jac = trace_rescale_jacobian(v1)
        bound = jac @ inv @ jac.conj().T
        bound = 0.5 * (bound + bound.conj().T)
    return BoundReport(alpha0=alpha0(gen), sfim=info, cscrb=bound,
                       epsilon=float(np.linalg.norm(bound)),
                       coordinates=coordinates)
