"""Elliptically symmetric data model: generators, sampling, contamination.

A generator is identified by its family, dimension, field and target
power sigma^2 = E{Q}/N, where Q is the squared Mahalanobis radius of an
observation.  The scale needed to hit the power target is absorbed into
the radial law at construction, so downstream code never solves for it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .matops import MatrixField, herm_power

__all__ = [
    "GeneratorKind",
    "ModularVariateLaw",
    "DensityGenerator",
    "Dataset",
    "DatasetMeta",
    "DegenerateObservationError",
    "make_generator",
    "sample_sphere",
    "sample_es",
    "q_u_stats",
    "sample_outlier",
    "sample_contaminated",
    "save_csv",
    "load_csv",
]

_UNIFORM_EPS = 1e-15  # keep inverse-cdf arguments inside the open interval


class GeneratorKind(Enum):
    GAUSSIAN = "gaussian"
    GENERALIZED_GAUSSIAN = "gg"
    STUDENT_T = "t"


class DegenerateObservationError(ValueError):
    """An observation coincides with the location vector."""


@dataclass(frozen=True)
class ModularVariateLaw:
    """Law of the squared radius Q, wrapping a frozen scipy distribution."""

    dist: Any
    mean_q: float

    def pdf(self, q):
        return self.dist.pdf(q)

    def cdf(self, q):
        return self.dist.cdf(q)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError("quantile argument must lie strictly inside (0, 1)")
        return self.dist.ppf(u)


@dataclass(frozen=True)
class DensityGenerator:
    """One member of the elliptical family, with its radial law attached.

    ``psi0`` is the derivative of the log density generator; together with
    the radial quantile it determines the exact score of the family.
    """

    kind: GeneratorKind
    field: MatrixField
    dim: int
    sigma2: float
    params: dict
    q_law: ModularVariateLaw

    def psi0(self, t):
        t = np.asarray(t, dtype=float)
        n = self.dim
        if self.kind is GeneratorKind.GAUSSIAN:
            scale = 2.0 * self.sigma2 if self.field is MatrixField.REAL else self.sigma2
            return np.full_like(t, -1.0 / scale)
        if self.kind is GeneratorKind.GENERALIZED_GAUSSIAN:
            s, b = self.params["s"], self.params["b"]
            return -s * np.power(t, s - 1.0) / b
        dof, c = self.params["dof"], self.params["q_scale"]
        if self.field is MatrixField.REAL:
            return -(dof + n) / (2.0 * (c * dof + t))
        return -(2.0 * n + dof) / (c * dof + 2.0 * t)

    def radial_weight(self, t):
        """-t * psi0(t), written so that t -> inf saturates for the t family
        instead of evaluating inf * 0."""
        t = np.asarray(t, dtype=float)
        n = self.dim
        if self.kind is GeneratorKind.GAUSSIAN:
            scale = 2.0 * self.sigma2 if self.field is MatrixField.REAL else self.sigma2
            return t / scale
        if self.kind is GeneratorKind.GENERALIZED_GAUSSIAN:
            s, b = self.params["s"], self.params["b"]
            return s * np.power(t, s) / b
        dof, c = self.params["dof"], self.params["q_scale"]
        with np.errstate(divide="ignore"):
            ratio = np.where(t > 0.0, (c * dof) / t, np.inf)
        if self.field is MatrixField.REAL:
            return 0.5 * (dof + n) / (ratio + 1.0)
        return (2.0 * n + dof) / (ratio + 2.0)

    def log_density_generator(self, t):
        """log g(t) up to an additive constant (enough for psi0 checks)."""
        t = np.asarray(t, dtype=float)
        n = self.dim
        if self.kind is GeneratorKind.GAUSSIAN:
            scale = 2.0 * self.sigma2 if self.field is MatrixField.REAL else self.sigma2
            return -t / scale
        if self.kind is GeneratorKind.GENERALIZED_GAUSSIAN:
            s, b = self.params["s"], self.params["b"]
            return -np.power(t, s) / b
        dof, c = self.params["dof"], self.params["q_scale"]
        if self.field is MatrixField.REAL:
            return -0.5 * (dof + n) * np.log1p(t / (c * dof))
        return -0.5 * (2.0 * n + dof) * np.log1p(2.0 * t / (c * dof))

    def describe(self) -> str:
        extra = "".join(f", {k}={v:g}" for k, v in sorted(self.params.items()))
        return (f"{self.kind.value}({self.field.value}, N={self.dim}, "
                f"sigma2={self.sigma2:g}{extra})")


def make_generator(
    kind: GeneratorKind,
    dim: int,
    field: MatrixField,
    sigma2: float = 1.0,
    *,
    s: float | None = None,
    dof: float | None = None,
) -> DensityGenerator:
    """Build a generator whose radial law satisfies E{Q} = N * sigma2.

    Gaussian needs no extra parameter; the generalized Gaussian takes the
    shape ``s`` (s=1 recovers the Gaussian law up to scale, s<1 heavier
    tails); the t family takes ``dof`` and requires dof > 2 for the power
    constraint to be satisfiable.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    if sigma2 <= 0:
        raise ValueError("target power sigma2 must be positive")
    half = field is MatrixField.REAL
    mean_q = dim * sigma2
    if kind is GeneratorKind.GAUSSIAN:
        if half:
            dist = stats.chi2(df=dim, scale=sigma2)
        else:
            dist = stats.gamma(a=dim, scale=sigma2)
        return DensityGenerator(kind, field, dim, sigma2, {}, ModularVariateLaw(dist, mean_q))
    if kind is GeneratorKind.GENERALIZED_GAUSSIAN:
        if s is None or s <= 0:
            raise ValueError("generalized Gaussian requires shape s > 0")
        nbar = dim / 2.0 if half else float(dim)
        # E{Q} = b^{1/s} * Gamma((nbar+1)/s) / Gamma(nbar/s)
        root = mean_q * np.exp(gammaln(nbar / s) - gammaln((nbar + 1.0) / s))
        b = root**s
        dist = stats.gengamma(a=nbar / s, c=s, scale=root)
        return DensityGenerator(kind, field, dim, sigma2, {"s": float(s), "b": float(b)},
                                ModularVariateLaw(dist, mean_q))
    if dof is None or dof <= 0:
        raise ValueError("t generator requires dof > 0")
    if dof <= 2:
        raise ValueError("t generator with dof <= 2 has infinite power; "
                         "the constraint E{Q}/N = sigma2 cannot be met")
    c = sigma2 * (dof - 2.0) / dof
    dfn = dim if half else 2 * dim
    dist = stats.f(dfn=dfn, dfd=dof, scale=c * dim)
    return DensityGenerator(kind, field, dim, sigma2,
                            {"dof": float(dof), "q_scale": float(c)},
                            ModularVariateLaw(dist, mean_q))


@dataclass
class DatasetMeta:
    generator: str
    mu: np.ndarray
    sigma: np.ndarray
    epsilon: float = 0.0
    seed: Any = None
    outlier_rho: float | None = None
    outlier_flags: np.ndarray | None = None


@dataclass
class Dataset:
    """L observation vectors of dimension N plus provenance metadata."""

    samples: np.ndarray  # (L, N)
    meta: DatasetMeta

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def field(self) -> MatrixField:
        return MatrixField.COMPLEX if np.iscomplexobj(self.samples) else MatrixField.REAL


def sample_sphere(rng: np.random.Generator, dim: int, field: MatrixField,
                  size: int) -> np.ndarray:
    """Draw vectors uniformly on the unit sphere of R^N or C^N."""
    if field is MatrixField.REAL:
        g = rng.standard_normal((size, dim))
    else:
        g = rng.standard_normal((size, dim)) + 1j * rng.standard_normal((size, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _draw_clean(rng: np.random.Generator, gen: DensityGenerator, mu: np.ndarray,
                sigma_root: np.ndarray, size: int) -> np.ndarray:
    u = np.clip(rng.random(size), _UNIFORM_EPS, 1.0 - _UNIFORM_EPS)
    q = gen.q_law.quantile(u)
    directions = sample_sphere(rng, gen.dim, gen.field, size)
    return mu + np.sqrt(q)[:, None] * (directions @ sigma_root.T)


def sample_es(gen: DensityGenerator, mu: np.ndarray, sigma: np.ndarray,
              n_samples: int, seed) -> Dataset:
    """Sample i.i.d. observations mu + sqrt(Q) * Sigma^{1/2} u.

    Q is drawn by inverting the radial cdf at a uniform variate and u
    uniformly on the unit sphere; the draw is deterministic given the
    seed.
    """
    rng = _as_rng(seed)
    mu = np.asarray(mu)
    sigma = np.asarray(sigma)
    if mu.shape != (gen.dim,) or sigma.shape != (gen.dim, gen.dim):
        raise ValueError("location/scatter dimensions do not match the generator")
    root = herm_power(sigma, 0.5)
    x = _draw_clean(rng, gen, mu, root, n_samples)
    meta = DatasetMeta(generator=gen.describe(), mu=mu, sigma=sigma,
                       epsilon=0.0, seed=_seed_repr(seed))
    return Dataset(samples=x, meta=meta)


def _seed_repr(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return None


def q_u_stats(x: np.ndarray, mu: np.ndarray, v: np.ndarray) -> tuple[float, np.ndarray]:
    """Squared Mahalanobis radius and unit direction of one observation.

    Returns (Q, u) with Q = (x - mu)^H V^{-1} (x - mu) and
    u = Q^{-1/2} V^{-1/2} (x - mu); raises on a degenerate observation
    (x == mu).
    """
    q, u = q_u_all(np.asarray(x)[None, :], np.asarray(mu), np.asarray(v))
    return float(q[0]), u[0]


def safe_row_norms(d: np.ndarray) -> np.ndarray:
    """Euclidean norms of the rows, immune to overflow of the squares."""
    m = np.abs(d).max(axis=1)
    scaled = np.divide(d, m[:, None], out=np.zeros_like(d), where=m[:, None] > 0)
    return m * np.sqrt(np.einsum("ij,ij->i", scaled, scaled.conj()).real)


def q_u_all(x: np.ndarray, mu: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`q_u_stats` over the rows of ``x``.

    Residuals are normalized before whitening so that the directions stay
    finite for arbitrarily distant samples; the returned radii may
    overflow to inf, which downstream rank statistics handle.
    """
    w = herm_power(v, -0.5)
    d = x - mu
    nrm = safe_row_norms(d)
    if np.any(nrm == 0.0):
        raise DegenerateObservationError(
            "observation coincides with the location vector (Q = 0)")
    dhat = d / nrm[:, None]
    y = dhat @ w.T  # rows are W @ unit residuals; W Hermitian so W.T = conj(W)
    qhat = np.einsum("ij,ij->i", y, y.conj()).real
    with np.errstate(over="ignore"):
        q = (nrm * np.sqrt(qhat)) ** 2
    u = y / np.sqrt(qhat)[:, None]
    return q, u


def sample_outlier(rho: float, dim: int, field: MatrixField, seed,
                   size: int = 1) -> np.ndarray:
    """Draw outliers tau^{-1} u with tau ~ Gamma(rho, 1/rho), so E{tau} = 1.

    Small rho produces a heavy right tail for the outlier radius.  The
    radius is capped at 1e300 so the samples stay finite (for rho around
    0.01 the raw 1/tau regularly leaves double range).
    """
    if rho <= 0:
        raise ValueError("outlier shape rho must be positive")
    rng = _as_rng(seed)
    tau = rng.gamma(shape=rho, scale=1.0 / rho, size=size)
    tau = np.maximum(tau, 1e-300)
    u = sample_sphere(rng, dim, field, size)
    return u / tau[:, None]


def sample_contaminated(gen: DensityGenerator, mu: np.ndarray, sigma: np.ndarray,
                        n_samples: int, epsilon: float, rho: float, seed) -> Dataset:
    """Mixture draw: clean elliptical with probability 1 - epsilon, outlier
    with probability epsilon.  With epsilon = 0 the result is bitwise
    identical to :func:`sample_es` under the same seed."""
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError("contamination fraction must lie in [0, 1/2]")
    rng = _as_rng(seed)
    mu = np.asarray(mu)
    sigma = np.asarray(sigma)
    root = herm_power(sigma, 0.5)
    x = _draw_clean(rng, gen, mu, root, n_samples)
    flags = rng.random(n_samples) < epsilon
    k = int(flags.sum())
    if k:
        x[flags] = sample_outlier(rho, gen.dim, gen.field, rng, size=k)
    meta = DatasetMeta(generator=gen.describe(), mu=mu, sigma=sigma,
                       epsilon=float(epsilon), seed=_seed_repr(seed),
                       outlier_rho=float(rho), outlier_flags=flags)
    return Dataset(samples=x, meta=meta)


# --- CSV fixtures ---------------------------------------------------------

def save_csv(dataset: Dataset, path) -> None:
    """One row per sample; complex data stored as interleaved re/im columns."""
    x = dataset.samples
    n = x.shape[1]
    complex_data = np.iscomplexobj(x)
    meta = dataset.meta
    header_meta = {
        "generator": meta.generator,
        "field": "complex" if complex_data else "real",
        "mu": _encode_array(meta.mu),
        "sigma": _encode_array(meta.sigma),
        "epsilon": meta.epsilon,
        "seed": meta.seed,
        "outlier_rho": meta.outlier_rho,
        "outlier_flags": (meta.outlier_flags.astype(int).tolist()
                          if meta.outlier_flags is not None else None),
    }
    if complex_data:
        cols = [f"x{i}_{part}" for i in range(n) for part in ("re", "im")]
        body = np.empty((x.shape[0], 2 * n))
        body[:, 0::2] = x.real
        body[:, 1::2] = x.imag
    else:
        cols = [f"x{i}" for i in range(n)]
        body = np.asarray(x, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# rankshape-dataset v1\n")
        fh.write("# meta: " + json.dumps(header_meta) + "\n")
        fh.write(",".join(cols) + "\n")
        for row in body:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        line = fh.readline()
        if not line.startswith("# rankshape-dataset"):
            raise ValueError("not a rankshape dataset file")
        meta_line = fh.readline()
        if not meta_line.startswith("# meta: "):
            raise ValueError("missing metadata line")
        raw = json.loads(meta_line[len("# meta: "):])
        fh.readline()  # column header
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    if raw["field"] == "complex":
        x = body[:, 0::2] + 1j * body[:, 1::2]
    else:
        x = body
    flags = raw.get("outlier_flags")
    meta = DatasetMeta(
        generator=raw["generator"],
        mu=_decode_array(raw["mu"]),
        sigma=_decode_array(raw["sigma"]),
        epsilon=float(raw["epsilon"]),
        seed=raw.get("seed"),
        outlier_rho=raw.get("outlier_rho"),
        outlier_flags=np.asarray(flags, dtype=bool) if flags is not None else None,
    )
    return Dataset(samples=x, meta=meta)


def _encode_array(a) -> dict:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return {"re": a.tolist()}


def _decode_array(d: dict) -> np.ndarray:
    re = np.asarray(d["re"], dtype=float)
    if "im" in d and d["im"] is not None:
        return re + 1j * np.asarray(d["im"], dtype=float)
    return re
