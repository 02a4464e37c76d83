"""One-step rank-based shape estimator and its exact-score oracle twin.

The estimator applies a single Newton-type correction to a consistent
preliminary shape estimate.  The correction direction is driven by a
rank statistic: the squared radii of the whitened observations are
replaced by a score of their normalized ranks, which makes the statistic
distribution-free over the elliptical family.  The curvature is the
score-compression Gram matrix times a scalar information constant, which
is itself estimated by probing the rank statistic with a small random
perturbation of the preliminary shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import bounds
from .elliptical import Dataset, DensityGenerator, q_u_all
from .estimators import (
    ConvergenceError,
    PreliminaryEstimate,
    huber,
    scm,
    tyler_joint,
)
from .matops import (
    Constraint,
    MatrixField,
    NotPositiveDefiniteError,
    ShapeMatrix,
    build_compression,
    is_positive_definite,
    matrix_from_ovec,
    matrix_from_ovecs,
    ovec,
    ovecs,
    vec,
)
from .scores import ScoreFunction

__all__ = [
    "REstimatorConfig",
    "REstimateReport",
    "compute_ranks",
    "central_sequence",
    "estimate_alpha",
    "gen_perturbation",
    "r_estimate",
    "clairvoyant_estimate",
    "report_to_json",
]

_MAX_HALVINGS = 64


@dataclass(frozen=True)
class REstimatorConfig:
    """Everything needed to run the one-step estimator on a dataset.

    ``perturbation_scale`` is the entry scale of the random Hermitian
    probe matrix; it must be small enough that the probed preliminary
    shape stays positive definite (checked at run time).  ``fixed_h0``
    overrides the random draw for exact-reproducibility tests.
    """

    score: ScoreFunction
    preliminary: str = "tyler"  # "tyler" | "huber" | "scm"
    huber_q: float = 0.5
    perturbation_scale: float = 0.01
    perturbation_seed: object = 0
    fixed_h0: np.ndarray | None = None
    preliminary_tol: float = 1e-8
    preliminary_max_iter: int = 500

    def __post_init__(self) -> None:
        if self.preliminary not in ("tyler", "huber", "scm"):
            raise ValueError(f"unknown preliminary estimator {self.preliminary!r}")
        if self.perturbation_scale <= 0:
            raise ValueError("perturbation scale must be positive")


@dataclass(frozen=True)
class REstimateReport:
    shape: ShapeMatrix  # top-left-unit
    alpha_hat: float
    preliminary: PreliminaryEstimate
    ranks: np.ndarray
    correction_norm: float
    pd_repaired: bool


def compute_ranks(values: np.ndarray) -> np.ndarray:
    """Ascending-sort positions (1..L) of the entries of ``values``.

    Ties (probability zero for continuous data) are broken by original
    index order via a stable sort.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("rank input must be a nonempty vector")
    if np.isnan(values).any():
        raise ValueError("rank input contains NaN")
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.int64)
    ranks[order] = np.arange(1, values.size + 1)
    return ranks


def _free_coords(a: np.ndarray, field: MatrixField) -> np.ndarray:
    return ovec(a) if field is MatrixField.COMPLEX else ovecs(a)


def _weighted_outer(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    # sum_l w_l u_l u_l^H for row-stacked unit vectors u
    return (u * w[:, None]).T @ u.conj()


def _rank_statistic(x, mu, v1: ShapeMatrix, score: ScoreFunction):
    """Radii/directions/ranks under (mu, V1) and the rank-weighted sum."""
    q, u = q_u_all(x, mu, v1.mat)
    ranks = compute_ranks(q)
    w = score(ranks / (x.shape[0] + 1.0))
    return q, u, ranks, _weighted_outer(u, w)


def central_sequence(data: Dataset, mu: np.ndarray, v1: ShapeMatrix,
                     score: ScoreFunction) -> np.ndarray:
    """Rank-based approximation of the efficient central sequence.

    Length N(N+1)/2 - 1 for real data, N^2 - 1 for complex data.  Its
    distribution at the true shape does not depend on the radial law,
    because ranks and whitened directions are both distribution-free.
    """
    x = data.samples
    _, _, _, s_mat = _rank_statistic(x, mu, v1, score)
    comp = build_compression(v1)
    return comp @ vec(s_mat) / np.sqrt(x.shape[0])


def gen_perturbation(dim: int, field: MatrixField, upsilon: float, seed) -> np.ndarray:
    """Random Hermitian probe matrix with zero top-left entry.

    Entries of the underlying matrix are centered normal with total
    variance upsilon^2 (complex entries split across real and imaginary
    parts); the output is its Hermitian part.
    """
    if upsilon <= 0:
        raise ValueError("perturbation scale must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if field is MatrixField.REAL:
        g = rng.normal(0.0, upsilon, size=(dim, dim))
    else:
        half = upsilon / np.sqrt(2.0)
        g = rng.normal(0.0, half, size=(dim, dim)) \
            + 1j * rng.normal(0.0, half, size=(dim, dim))
    g[0, 0] = 0.0
    return 0.5 * (g + g.conj().T)


def _validate_h0(h0: np.ndarray, dim: int, field: MatrixField) -> np.ndarray:
    h0 = np.asarray(h0)
    if h0.shape != (dim, dim):
        raise ValueError("perturbation matrix has the wrong shape")
    if field is MatrixField.REAL and np.iscomplexobj(h0):
        raise ValueError("complex perturbation passed for real data")
    if not np.array_equal(h0, h0.conj().T):
        raise ValueError("perturbation matrix must be exactly Hermitian")
    if h0[0, 0] != 0:
        raise ValueError("perturbation matrix must have zero top-left entry")
    if not np.any(h0):
        raise ValueError("perturbation matrix is zero; cannot probe the curvature")
    return h0


def _perturbed_shape(v1: ShapeMatrix, h0: np.ndarray, n_samples: int) -> ShapeMatrix:
    vp = v1.mat + h0 / np.sqrt(n_samples)
    if not is_positive_definite(vp):
        raise NotPositiveDefiniteError(
            "perturbed preliminary shape is not positive definite; "
            "reduce the perturbation scale upsilon")
    return ShapeMatrix(vp, Constraint.TOP_LEFT_UNIT)


def estimate_alpha(data: Dataset, mu: np.ndarray, v1: ShapeMatrix,
                   score: ScoreFunction, h0: np.ndarray) -> float:
    """Consistent estimate of the information constant.

    Ratio of the displacement of the rank statistic under the probe
    H0 / sqrt(L) to the displacement the Gram curvature predicts for a
    unit constant; the radii, ranks and directions are fully recomputed
    under the perturbed shape.
    """
    x = data.samples
    field = data.field
    h0 = _validate_h0(h0, v1.dim, field)
    delta = central_sequence(data, mu, v1, score)
    delta_p = central_sequence(data, mu, _perturbed_shape(v1, h0, x.shape[0]), score)
    comp = build_compression(v1)
    gram = comp @ comp.conj().T
    denom = np.linalg.norm(gram @ _free_coords(h0, field))
    return float(np.linalg.norm(delta_p - delta) / denom)


def _run_preliminary(data: Dataset, cfg: REstimatorConfig) -> PreliminaryEstimate:
    if cfg.preliminary == "tyler":
        return tyler_joint(data, tol=cfg.preliminary_tol,
                           max_iter=cfg.preliminary_max_iter)
    if cfg.preliminary == "huber":
        return huber(data, cfg.huber_q, tol=cfg.preliminary_tol,
                     max_iter=cfg.preliminary_max_iter)
    return scm(data)


def _reshape_with_repair(phi0: np.ndarray, correction: np.ndarray,
                         field: MatrixField) -> tuple[ShapeMatrix, float, bool]:
    """Apply the one-step correction, halving it until the result is PD.

    Halving walks back toward the (positive definite) preliminary, so it
    terminates; the repair flag records that the full step left the cone.
    """
    applied = correction
    repaired = False
    for _ in range(_MAX_HALVINGS):
        coords = phi0 + applied
        cand = (matrix_from_ovec(coords, field) if field is MatrixField.COMPLEX
                else matrix_from_ovecs(coords))
        if is_positive_definite(cand.mat):
            return cand, float(np.linalg.norm(applied)), repaired
        applied = applied / 2.0
        repaired = True
    raise ConvergenceError("positive-definite repair failed after "
                           f"{_MAX_HALVINGS} halvings", float("nan"))


def _one_step(v1: ShapeMatrix, field: MatrixField, gram_factor,
              delta: np.ndarray, alpha: float, n_samples: int):
    correction = cho_solve(gram_factor, delta) / (np.sqrt(n_samples) * alpha)
    if field is MatrixField.REAL:
        correction = correction.real
    phi0 = _free_coords(v1.mat, field)
    return _reshape_with_repair(phi0, correction, field)


def r_estimate(data: Dataset, cfg: REstimatorConfig) -> REstimateReport:
    """Rank-based one-step shape estimate.

    Runs the configured preliminary estimator, forms the rank statistic
    and the probe-based information constant, applies the one-step
    correction in the free coordinates and reshapes back to a top-left-
    unit Hermitian matrix (with PD repair by correction halving if the
    full step leaves the cone).
    """
    x = data.samples
    field = data.field
    n_samples, dim = x.shape
    if n_samples <= dim:
        raise ValueError("need more samples than dimensions")
    prelim = _run_preliminary(data, cfg)
    mu, v1 = prelim.location, prelim.shape
    if cfg.fixed_h0 is not None:
        h0 = _validate_h0(cfg.fixed_h0, dim, field)
    else:
        h0 = gen_perturbation(dim, field, cfg.perturbation_scale,
                              cfg.perturbation_seed)

    _, _, ranks, s_mat = _rank_statistic(x, mu, v1, cfg.score)
    comp = build_compression(v1)
    gram = comp @ comp.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    delta = comp @ vec(s_mat) / np.sqrt(n_samples)

    v1_probed = _perturbed_shape(v1, h0, n_samples)
    _, _, _, s_mat_p = _rank_statistic(x, mu, v1_probed, cfg.score)
    delta_p = build_compression(v1_probed) @ vec(s_mat_p) / np.sqrt(n_samples)
    denom = np.linalg.norm(gram @ _free_coords(h0, field))
    alpha = float(np.linalg.norm(delta_p - delta) / denom)

    try:
        factor = cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"compression Gram matrix is numerically singular: {exc}") from exc
    shape, corr_norm, repaired = _one_step(v1, field, factor, delta,
                                           alpha, n_samples)
    return REstimateReport(shape=shape, alpha_hat=alpha, preliminary=prelim,
                           ranks=ranks, correction_norm=corr_norm,
                           pd_repaired=repaired)


def clairvoyant_estimate(data: Dataset, gen_true: DensityGenerator,
                         preliminary: str = "tyler", huber_q: float = 0.5,
                         tol: float = 1e-8, max_iter: int = 500) -> REstimateReport:
    """One-step estimate using the true radial law (test oracle).

    Replaces the rank scores by the exact weights -Q psi0(Q) and the
    probe-based constant by the exact information constant of
    ``gen_true``; only meaningful when ``gen_true`` actually generated
    the data (with a top-left-unit scatter).
    """
    x = data.samples
    field = data.field
    n_samples, dim = x.shape
    if preliminary == "tyler":
        prelim = tyler_joint(data, tol=tol, max_iter=max_iter)
    elif preliminary == "huber":
        prelim = huber(data, huber_q, tol=tol, max_iter=max_iter)
    elif preliminary == "scm":
        prelim = scm(data)
    else:
        raise ValueError(f"unknown preliminary estimator {preliminary!r}")
    mu, v1 = prelim.location, prelim.shape
    q, u = q_u_all(x, mu, v1.mat)
    ranks = compute_ranks(q)
    weights = gen_true.radial_weight(q)
    s_mat = _weighted_outer(u, weights)
    comp = build_compression(v1)
    gram = comp @ comp.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    delta = comp @ vec(s_mat) / np.sqrt(n_samples)
    alpha = bounds.alpha0(gen_true)
    factor = cho_factor(gram)
    shape, corr_norm, repaired = _one_step(v1, field, factor, delta,
                                           alpha, n_samples)
    return REstimateReport(shape=shape, alpha_hat=alpha, preliminary=prelim,
                           ranks=ranks, correction_norm=corr_norm,
                           pd_repaired=repaired)


def report_to_json(report: REstimateReport) -> str:
    """Serialize a report (matrix split into real/imaginary parts)."""
    shape = report.shape
    complex_data = shape.field is MatrixField.COMPLEX
    payload = {
        "shape": {
            "constraint": shape.constraint.value,
            "dim": shape.dim,
            "re": shape.mat.real.tolist(),
            "im": shape.mat.imag.tolist() if complex_data else None,
        },
        "alpha_hat": report.alpha_hat,
        "correction_norm": report.correction_norm,
        "pd_repaired": report.pd_repaired,
        "ranks": report.ranks.tolist(),
        "preliminary": {
            "iterations": report.preliminary.iterations,
            "converged": report.preliminary.converged,
            "residual": report.preliminary.residual,
            "location_re": np.asarray(report.preliminary.location).real.tolist(),
            "location_im": (np.asarray(report.preliminary.location).imag.tolist()
                            if complex_data else None),
        },
    }
    return json.dumps(payload)
