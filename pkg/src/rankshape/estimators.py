"""Preliminary root-L-consistent estimators of location and shape.

All fixed points are normalized inside each iteration so the top-left
entry of the shape iterate is exactly 1; only that normalized matrix is
well defined, the overall scale being absorbed by the radial law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .elliptical import Dataset, safe_row_norms
from .matops import (
    Constraint,
    MatrixField,
    ShapeMatrix,
    divide_by_real,
    herm_power,
)

__all__ = [
    "PreliminaryEstimate",
    "ConvergenceError",
    "scm",
    "tyler_joint",
    "huber",
    "renormalize",
]


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class PreliminaryEstimate:
    location: np.ndarray
    shape: ShapeMatrix  # top-left-unit constraint
    iterations: int
    converged: bool
    residual: float


def _check_size(x: np.ndarray) -> tuple[int, int]:
    n_samples, dim = x.shape
    if n_samples <= dim:
        raise ValueError(f"need more samples than dimensions (L={n_samples}, N={dim})")
    return n_samples, dim


def _normalized_shape(v: np.ndarray) -> np.ndarray:
    v = 0.5 * (v + v.conj().T)
    return divide_by_real(v, v[0, 0].real)


def scm(data: Dataset) -> PreliminaryEstimate:
    """Sample mean and sample covariance, rescaled to unit top-left entry.

    The covariance is accumulated on residuals prescaled by their largest
    magnitude, so the normalized shape survives samples whose squared
    norm would overflow.
    """
    x = data.samples
    n_samples, dim = _check_size(x)
    mu = x.mean(axis=0)
    d = x - mu
    scale = np.abs(d).max()
    if scale == 0.0:
        raise np.linalg.LinAlgError("sample covariance is singular")
    ds = d / scale
    cov = (ds.T @ ds.conj()) / n_samples  # (i, j) entry ~ mean of z_i * conj(z_j)
    w = np.linalg.eigvalsh(cov)
    if w[0] <= 1e-12 * max(w[-1], 0.0):
        raise np.linalg.LinAlgError("sample covariance is singular")
    shape = ShapeMatrix(_normalized_shape(cov), Constraint.TOP_LEFT_UNIT)
    return PreliminaryEstimate(location=mu, shape=shape, iterations=0,
                               converged=True, residual=0.0)


def _joint_m_step(x, mu, v, shape_factor, loc_weight):
    """One simultaneous location/shape update.

    Residuals enter through their unit directions and the factored radius
    (nrm, qhat) with Q = nrm^2 * qhat, so the update stays finite for
    arbitrarily distant samples.  ``shape_factor(nrm, qhat)`` is the
    shape weight times nrm^2; ``loc_weight(nrm, qhat)`` is the weighted-
    mean weight.  Samples sitting exactly at the location are excluded
    from the iteration's sums.
    """
    w_half = herm_power(v, -0.5)
    d = x - mu
    nrm = safe_row_norms(d)
    keep = nrm > 0.0
    dhat = d[keep] / nrm[keep, None]
    y = dhat @ w_half.T
    qhat = np.einsum("ij,ij->i", y, y.conj()).real
    nk = nrm[keep]
    with np.errstate(over="ignore"):
        wl = loc_weight(nk, qhat)
        fs = shape_factor(nk, qhat)
        q = (nk * np.sqrt(qhat)) ** 2
    mu_new = (wl[:, None] * x[keep]).sum(axis=0) / wl.sum()
    v_new = (dhat * fs[:, None]).T @ dhat.conj() / keep.sum()
    return mu_new, _normalized_shape(v_new), q


def _coordinatewise_median(x: np.ndarray) -> np.ndarray:
    # robust starting location: one distant sample must not poison the
    # first whitening step
    if np.iscomplexobj(x):
        return np.median(x.real, axis=0) + 1j * np.median(x.imag, axis=0)
    return np.median(x, axis=0)


def _run_fixed_point(x, shape_factor, loc_weight, tol, max_iter, name):
    n_samples, dim = _check_size(x)
    mu = _coordinatewise_median(x)
    v = np.eye(dim, dtype=complex if np.iscomplexobj(x) else float)
    residual = np.inf
    for it in range(1, max_iter + 1):
        mu_new, v_new, q = _joint_m_step(x, mu, v, shape_factor, loc_weight)
        shape_disp = np.linalg.norm(v_new - v) / np.linalg.norm(v)
        loc_disp = np.linalg.norm(mu_new - mu) / np.sqrt(np.median(q))
        residual = max(shape_disp, loc_disp)
        mu, v = mu_new, v_new
        if residual < tol:
            return PreliminaryEstimate(
                location=mu,
                shape=ShapeMatrix(v, Constraint.TOP_LEFT_UNIT),
                iterations=it, converged=True, residual=float(residual))
    raise ConvergenceError(
        f"{name} did not converge in {max_iter} iterations "
        f"(last residual {residual:.3e})", float(residual))


def tyler_joint(data: Dataset, tol: float = 1e-8, max_iter: int = 500) -> PreliminaryEstimate:
    """Joint fixed point for location and shape with scale-free weights.

    The location step is the weighted mean with weights Q^{-1/2}; the
    shape step is V <- (N/L) sum (z - mu)(z - mu)^H / Q, normalized to
    unit top-left entry.  Both weight maps ignore the overall data scale,
    which makes the estimator distribution-free over the elliptical
    family and exactly invariant under data rescaling.
    """
    x = data.samples
    dim = x.shape[1]
    return _run_fixed_point(
        x,
        shape_factor=lambda nrm, qhat: dim / qhat,
        loc_weight=lambda nrm, qhat: 1.0 / (nrm * np.sqrt(qhat)),
        tol=tol, max_iter=max_iter, name="joint Tyler fixed point")


def huber_tuning(q: float, dim: int, field: MatrixField) -> tuple[float, float]:
    """Winsorization threshold c^2 and consistency factor beta.

    c^2 is the q-quantile of the Gaussian radial law (chi^2_N real,
    Gamma(N, 1) complex); beta makes E{u(Q) Q} = N under Gaussianity so
    the estimator needs no posthoc rescaling there.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("huber tuning parameter must lie in (0, 1)")
    if field is MatrixField.REAL:
        c2 = 2.0 * special.gammaincinv(0.5 * dim, q)
        below = special.gammainc(0.5 * dim + 1.0, 0.5 * c2)
        tail = 1.0 - special.gammainc(0.5 * dim, 0.5 * c2)
    else:
        c2 = special.gammaincinv(dim, q)
        below = special.gammainc(dim + 1.0, c2)
        tail = 1.0 - special.gammainc(dim, c2)
    beta = below + c2 * tail / dim
    return float(c2), float(beta)


def huber(data: Dataset, q: float, tol: float = 1e-8, max_iter: int = 500) -> PreliminaryEstimate:
    """Huber-type M-estimator of location and shape with tuning ``q``.

    Interpolates between the sample covariance (q -> 1) and the Tyler
    fixed point (q -> 0).  Shape weights are min(1, c^2/Q)/beta; location
    weights are the square root of the unnormalized shape weight, which
    reproduces the Tyler location weights in the q -> 0 limit.
    """
    x = data.samples
    c2, beta = huber_tuning(q, x.shape[1], data.field)
    c = np.sqrt(c2)
    return _run_fixed_point(
        x,
        # min(1, c^2/Q) * nrm^2 == min(nrm^2, c^2/qhat), overflow-safe
        shape_factor=lambda nrm, qhat: np.minimum(nrm * nrm, c2 / qhat) / beta,
        loc_weight=lambda nrm, qhat: np.minimum(1.0, c / (nrm * np.sqrt(qhat))),
        tol=tol, max_iter=max_iter, name="Huber fixed point")


def renormalize(v: ShapeMatrix, target: Constraint) -> ShapeMatrix:
    """Exact scalar rescale between the two shape normalizations."""
    a = v.mat
    if target is Constraint.TOP_LEFT_UNIT:
        return ShapeMatrix(divide_by_real(a, a[0, 0].real), Constraint.TOP_LEFT_UNIT)
    return ShapeMatrix(divide_by_real(v.dim * a, a.trace().real), Constraint.TRACE_N)
