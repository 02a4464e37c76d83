"""Score functions on (0, 1) applied to normalized ranks.

All scores here are nonnegative, monotone maps K: (0, 1) -> R+.  Callers
are expected to evaluate them at r/(L+1) with integer ranks r in 1..L, so
the endpoints (where the scores diverge) are avoided by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from .matops import MatrixField

if TYPE_CHECKING:  # pragma: no cover
    from .elliptical import DensityGenerator

__all__ = [
    "QuantileFamily",
    "QuantileFunction",
    "chi_square_quantile",
    "gamma_quantile",
    "fisher_f_quantile",
    "ScoreKind",
    "ScoreFunction",
    "van_der_waerden_score",
    "t_score",
    "score_from_generator",
]


class QuantileFamily(Enum):
    CHI_SQUARE = "chi_square"
    GAMMA = "gamma"
    FISHER_F = "fisher_f"


def _check_open_unit(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("argument must lie strictly inside (0, 1)")
    return u


@dataclass(frozen=True)
class QuantileFunction:
    """Strictly increasing inverse cdf on (0, 1) for one named family.

    Built on the regularized incomplete gamma/beta functions
    (``scipy.special.gammaincinv`` / ``betaincinv``), which invert the
    corresponding cdfs to full double precision.
    """

    family: QuantileFamily
    params: tuple[float, ...]

    def quantile(self, u):
        u = _check_open_unit(u)
        if self.family is QuantileFamily.CHI_SQUARE:
            (df,) = self.params
            return 2.0 * special.gammaincinv(0.5 * df, u)
        if self.family is QuantileFamily.GAMMA:
            shape, scale = self.params
            return scale * special.gammaincinv(shape, u)
        d1, d2 = self.params
        y = special.betaincinv(0.5 * d1, 0.5 * d2, u)
        return d2 * y / (d1 * (1.0 - y))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family is QuantileFamily.CHI_SQUARE:
            (df,) = self.params
            return special.gammainc(0.5 * df, 0.5 * x)
        if self.family is QuantileFamily.GAMMA:
            shape, scale = self.params
            return special.gammainc(shape, x / scale)
        d1, d2 = self.params
        return special.betainc(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))

    def __call__(self, u):
        return self.quantile(u)


def chi_square_quantile(df: float) -> QuantileFunction:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    return QuantileFunction(QuantileFamily.CHI_SQUARE, (float(df),))


def gamma_quantile(shape: float, scale: float = 1.0) -> QuantileFunction:
    if shape <= 0 or scale <= 0:
        raise ValueError("gamma parameters must be positive")
    return QuantileFunction(QuantileFamily.GAMMA, (float(shape), float(scale)))


def fisher_f_quantile(d1: float, d2: float) -> QuantileFunction:
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    return QuantileFunction(QuantileFamily.FISHER_F, (float(d1), float(d2)))


class ScoreKind(Enum):
    VAN_DER_WAERDEN = "vdw"
    T = "t"
    FROM_GENERATOR = "from_generator"


@dataclass(frozen=True)
class ScoreFunction:
    """A rank score K: (0, 1) -> R+, evaluable elementwise on arrays.

    ``scale`` supports the homogeneity hook: ``c * K`` evaluates to
    ``c * K(u)`` for positive c, a legal rescaling that leaves the
    one-step estimator invariant.
    """

    kind: ScoreKind
    field: MatrixField
    dim: int
    nu: float | None = None
    generator: "DensityGenerator | None" = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("score scale must be positive")
        if self.kind is ScoreKind.T and (self.nu is None or self.nu <= 0):
            raise ValueError("t score requires nu > 0")
        if self.kind is ScoreKind.FROM_GENERATOR and self.generator is None:
            raise ValueError("generator-derived score requires a generator")

    @property
    def name(self) -> str:
        base = {
            ScoreKind.VAN_DER_WAERDEN: "vdw",
            ScoreKind.T: f"t{self.nu:g}" if self.nu is not None else "t",
            ScoreKind.FROM_GENERATOR: "gen",
        }[self.kind]
        return base if self.scale == 1.0 else f"{self.scale:g}*{base}"

    def __call__(self, u):
        u = _check_open_unit(u)
        n = self.dim
        if self.kind is ScoreKind.VAN_DER_WAERDEN:
            if self.field is MatrixField.REAL:
                out = 0.5 * chi_square_quantile(n).quantile(u)
            else:
                out = gamma_quantile(n).quantile(u)
        elif self.kind is ScoreKind.T:
            # algebraically equal to the bounded map of the F quantile
            # d * F / (nu + d * F) scaled by (d + nu) / 2, but evaluated
            # through the beta quantile so u -> 1 saturates instead of
            # producing inf/inf
            nu = self.nu
            if self.field is MatrixField.REAL:
                y = special.betaincinv(0.5 * n, 0.5 * nu, u)
                out = 0.5 * (n + nu) * y
            else:
                y = special.betaincinv(float(n), 0.5 * nu, u)
                out = 0.5 * (2 * n + nu) * y
        else:
            gen = self.generator
            q = gen.q_law.quantile(u)
            out = gen.radial_weight(q)
        return self.scale * out

    def scaled(self, c: float) -> "ScoreFunction":
        if c <= 0:
            raise ValueError("score scaling factor must be positive")
        return ScoreFunction(self.kind, self.field, self.dim, self.nu,
                             self.generator, self.scale * c)

    def __mul__(self, c: float) -> "ScoreFunction":
        return self.scaled(c)

    __rmul__ = __mul__


def van_der_waerden_score(dim: int, field: MatrixField) -> ScoreFunction:
    """Score derived from a (possibly misspecified) Gaussian model."""
    return ScoreFunction(ScoreKind.VAN_DER_WAERDEN, field, dim)


def t_score(dim: int, field: MatrixField, nu: float) -> ScoreFunction:
    """Score derived from a t model with ``nu`` degrees of freedom.

    Bounded above by N(N + nu)/(2N) (real) resp. N(2N + nu)/(2N)
    (complex), which is what makes small-nu variants outlier-robust;
    converges to the van der Waerden score as nu -> infinity.
    """
    return ScoreFunction(ScoreKind.T, field, dim, nu=float(nu))


def score_from_generator(gen: "DensityGenerator") -> ScoreFunction:
    """Score K(u) = -q(u) * psi0(q(u)) with q the generator's modular-variate
    quantile; exact for data actually drawn from ``gen``."""
    return ScoreFunction(ScoreKind.FROM_GENERATOR, gen.field, gen.dim,
                         generator=gen)
