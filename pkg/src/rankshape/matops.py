"""Matrix and vectorization algebra shared by all estimation code.

Conventions, fixed once and used everywhere:

* ``vec`` stacks matrix entries column by column (column-major).
* ``vecs`` stacks the lower triangle of a symmetric matrix column by
  column, so its leading entry is the (0, 0) element.
* ``ovec``/``ovecs`` drop the leading entry of ``vec``/``vecs``: they carry
  the free coordinates of a shape matrix whose top-left entry is pinned
  to 1.
* Powers of Hermitian positive definite matrices are principal powers
  computed from the eigendecomposition, so the square root is the unique
  positive definite one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "MatrixField",
    "Constraint",
    "ShapeMatrix",
    "StructuralMatrices",
    "NotPositiveDefiniteError",
    "vec",
    "unvec",
    "vecs",
    "ovec",
    "ovecs",
    "matrix_from_ovec",
    "matrix_from_ovecs",
    "build_structural",
    "build_compression",
    "herm_power",
    "is_positive_definite",
]

SYMMETRY_RTOL = 1e-12
PD_RTOL = 1e-12  # an eigenvalue counts as positive if > PD_RTOL * lambda_max
TRACE_RTOL = 1e-12


class MatrixField(Enum):
    """Scalar field of the observations; mixing fields in one call is an error."""

    REAL = "real"
    COMPLEX = "complex"


class Constraint(Enum):
    """Normalization pinning the scale of a shape matrix."""

    TOP_LEFT_UNIT = "top_left_unit"  # V[0, 0] == 1
    TRACE_N = "trace_n"  # trace(V) == N


class NotPositiveDefiniteError(ValueError):
    """A matrix required to be positive definite is not."""


def field_of(a: np.ndarray) -> MatrixField:
    return MatrixField.COMPLEX if np.iscomplexobj(a) else MatrixField.REAL


def _check_hermitian(a: np.ndarray, what: str = "matrix") -> None:
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValueError(f"{what} is not symmetric/Hermitian within tolerance")


@dataclass(frozen=True)
class ShapeMatrix:
    """A normalized scatter matrix together with its scale constraint.

    The entries are validated to be square (N >= 2), Hermitian within
    tolerance and to satisfy the declared constraint.  Positive
    definiteness is *not* enforced at construction (one-step corrections
    can momentarily leave the cone); operations that require it check
    explicitly.
    """

    mat: np.ndarray
    constraint: Constraint

    def __post_init__(self) -> None:
        a = np.array(self.mat)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("shape matrix must be square")
        n = a.shape[0]
        if n < 2:
            raise ValueError("shape matrix dimension must be at least 2")
        _check_hermitian(a, "shape matrix")
        if self.constraint is Constraint.TOP_LEFT_UNIT:
            if a[0, 0] != 1:
                raise ValueError(f"top-left entry is {a[0, 0]}, expected exactly 1")
        else:
            tr = a.trace().real
            if abs(tr - n) > TRACE_RTOL * n:
                raise ValueError(f"trace is {tr}, expected {n}")
        a.setflags(write=False)
        object.__setattr__(self, "mat", a)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def field(self) -> MatrixField:
        return field_of(self.mat)

    @property
    def is_positive_definite(self) -> bool:
        return is_positive_definite(self.mat)


def is_positive_definite(a: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(a)
    return bool(w[0] > PD_RTOL * max(w[-1], 0.0))


def divide_by_real(a: np.ndarray, d: float) -> np.ndarray:
    """Divide by a real scalar componentwise.

    Complex division in numpy goes through the general complex formula,
    which does not even return exactly 1 for a/a; splitting real and
    imaginary parts keeps x/x == 1 and power-of-two scalings exact, which
    the unit-top-left constraint and the scale-invariance contracts rely
    on.
    """
    if np.iscomplexobj(a):
        return a.real / d + 1j * (a.imag / d)
    return a / d


def vec(a: np.ndarray) -> np.ndarray:
    """Column-major stack of an N x N matrix into an N^2 vector."""
    a = np.asarray(a)
    return a.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    v = np.asarray(v)
    n = math.isqrt(v.size)
    if n * n != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


def _tril_indices_colwise(n: int) -> tuple[np.ndarray, np.ndarray]:
    # column-by-column lower triangle: (0,0),(1,0),...,(n-1,0),(1,1),...
    rows = np.concatenate([np.arange(j, n) for j in range(n)])
    cols = np.concatenate([np.full(n - j, j) for j in range(n)])
    return rows, cols


def vecs(a: np.ndarray) -> np.ndarray:
    """Column-major stack of the lower triangle of a symmetric matrix."""
    a = np.asarray(a)
    _check_hermitian(a, "vecs argument")
    rows, cols = _tril_indices_colwise(a.shape[0])
    return a[rows, cols]


def ovec(a: np.ndarray) -> np.ndarray:
    """:func:`vec` with the leading entry dropped."""
    return vec(a)[1:]


def ovecs(a: np.ndarray) -> np.ndarray:
    """:func:`vecs` with the leading entry dropped."""
    return vecs(a)[1:]


def matrix_from_ovec(v: np.ndarray, field: MatrixField) -> ShapeMatrix:
    """Rebuild a top-left-unit shape matrix from its free ``ovec`` coordinates.

    The vector fills all entries except the (0, 0) one, which is set to 1;
    the result is then Hermitized as (A + A^H)/2.  One-step corrections
    generically produce vectors that are not exactly the ``ovec`` of a
    Hermitian matrix, and Hermitization is the minimal-distance repair.
    """
    v = np.asarray(v)
    n = math.isqrt(v.size + 1)
    if n * n != v.size + 1 or n < 2:
        raise ValueError(f"length {v.size} is not N^2 - 1 for an integer N >= 2")
    if field is MatrixField.REAL:
        if np.iscomplexobj(v):
            raise ValueError("complex coordinates passed with a real field tag")
        full = np.concatenate(([1.0], v.astype(float)))
    else:
        full = np.concatenate(([1.0 + 0.0j], v.astype(complex)))
    a = unvec(full)
    a = 0.5 * (a + a.conj().T)
    return ShapeMatrix(a, Constraint.TOP_LEFT_UNIT)


def matrix_from_ovecs(v: np.ndarray) -> ShapeMatrix:
    """Real-symmetric analogue of :func:`matrix_from_ovec`.

    Rebuilds the symmetric matrix with unit (0, 0) entry from the
    triangular coordinates; symmetry is exact by construction.
    """
    v = np.asarray(v, dtype=float)
    m = v.size + 1  # n(n+1)/2
    n = math.isqrt(2 * m)
    if n * (n + 1) // 2 != m or n < 2:
        raise ValueError(f"length {v.size} is not N(N+1)/2 - 1 for an integer N >= 2")
    a = np.zeros((n, n))
    rows, cols = _tril_indices_colwise(n)
    full = np.concatenate(([1.0], v))
    a[rows, cols] = full
    a[cols, rows] = full
    return ShapeMatrix(a, Constraint.TOP_LEFT_UNIT)


def sym_expander(n: int) -> np.ndarray:
    """0/1 matrix E of shape (n(n+1)/2 - 1, n^2) with E^T ovecs(A) = vec(A)
    for every symmetric A whose (0, 0) entry is zero."""
    rows, cols = _tril_indices_colwise(n)
    m = rows.size
    e = np.zeros((m, n * n))
    for k in range(m):
        i, j = rows[k], cols[k]
        e[k, j * n + i] = 1.0
        e[k, i * n + j] = 1.0  # same cell when i == j
    return e[1:]


def ovec_selector(n: int) -> np.ndarray:
    """0/1 matrix S of shape (n^2 - 1, n^2) with S vec(A) = ovec(A)."""
    return np.eye(n * n)[1:]


def vecs_selector(n: int) -> np.ndarray:
    """0/1 matrix S of shape (n(n+1)/2, n^2) with S vec(A) = vecs(A)."""
    rows, cols = _tril_indices_colwise(n)
    s = np.zeros((rows.size, n * n))
    s[np.arange(rows.size), cols * n + rows] = 1.0
    return s


def identity_complement_projector(n: int) -> np.ndarray:
    """Orthogonal projector onto the complement of vec(I_n) in R^{n^2}."""
    vi = vec(np.eye(n))
    return np.eye(n * n) - np.outer(vi, vi) / n


@dataclass(frozen=True)
class StructuralMatrices:
    """Constant selector/projector matrices for one dimension and field.

    ``sym_expander`` (real case) satisfies sym_expander^T @ ovecs(A) ==
    vec(A) exactly for symmetric A with zero (0, 0) entry; ``ovec_selector``
    (complex case) satisfies ovec_selector @ vec(A) == ovec(A);
    ``proj_perp`` is the idempotent symmetric projector annihilating
    vec(I_n).
    """

    dim: int
    field: MatrixField
    sym_expander: np.ndarray | None
    ovec_selector: np.ndarray | None
    proj_perp: np.ndarray


def build_structural(n: int, field: MatrixField) -> StructuralMatrices:
    if n < 2:
        raise ValueError("dimension must be at least 2")
    return StructuralMatrices(
        dim=n,
        field=field,
        sym_expander=sym_expander(n) if field is MatrixField.REAL else None,
        ovec_selector=ovec_selector(n) if field is MatrixField.COMPLEX else None,
        proj_perp=identity_complement_projector(n),
    )


def build_compression(v1: ShapeMatrix) -> np.ndarray:
    """Score-compression matrix mapping vec-space to the free shape coordinates.

    Real case: sym_expander @ (W kron W) @ proj_perp with W = V^{-1/2},
    of shape (N(N+1)/2 - 1, N^2).  Complex case: ovec_selector @
    (W^T kron W) @ proj_perp, of shape (N^2 - 1, N^2).  The Gram matrix
    C @ C^H is positive definite for positive definite V.
    """
    if v1.constraint is not Constraint.TOP_LEFT_UNIT:
        raise ValueError("compression matrix is defined for top-left-unit shape matrices")
    n = v1.dim
    w = herm_power(v1.mat, -0.5)
    proj = identity_complement_projector(n)
    if v1.field is MatrixField.REAL:
        return sym_expander(n) @ np.kron(w, w) @ proj
    # W is Hermitian, so W.T == W.conj()
    return ovec_selector(n) @ np.kron(w.T, w) @ proj


def herm_power(v: np.ndarray, exponent: float) -> np.ndarray:
    """Principal power of a symmetric/Hermitian positive definite matrix."""
    v = np.asarray(v)
    w, e = np.linalg.eigh(v)
    floor = PD_RTOL * max(w[-1], 0.0)
    if w[0] <= floor:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: eigenvalue {w[0]:.6e} "
            f"(largest is {w[-1]:.6e})"
        )
    out = (e * np.power(w, exponent)) @ e.conj().T
    return 0.5 * (out + out.conj().T)
