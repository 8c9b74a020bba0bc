"""Kernel evaluation, Gram assembly, and regularized positive-definite solves.

Two kernel families are supported:

* ``PolynomialKernel(a, b, d)``:      k(x, y) = (a <x, y> + b)^d
* ``SquaredExponentialKernel(sf2, sl2)``: k(x, y) = sf2 exp(-||x - y||^2 / (2 sl2))

All evaluation paths (scalar, vector, Gram matrix) are routed through one
pairwise routine so that ``eval_kernel``, ``kvec`` and ``gram`` agree exactly,
entry for entry. Everything is plain 64-bit floating point.

The regularized system (K + r I) is handled by a Cholesky factorization held
in a :class:`GramFactorization`; the factorization is immutable and may be
shared across threads for concurrent solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, FactorizationError


@dataclass(frozen=True)
class PolynomialKernel:
    """Inner-product kernel (a <x,y> + b)^d with a > 0, b >= 0, integer d >= 1."""

    a: float
    b: float
    d: int

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"polynomial kernel needs a > 0, got a={self.a}")
        if self.b < 0:
            raise ValueError(f"polynomial kernel needs b >= 0, got b={self.b}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"polynomial kernel needs integer d >= 1, got d={self.d}")


@dataclass(frozen=True)
class SquaredExponentialKernel:
    """Gaussian kernel sf2 * exp(-||x-y||^2 / (2 sl2)); both parameters > 0."""

    sigma_f_sq: float
    sigma_l_sq: float

    def __post_init__(self):
        if not self.sigma_f_sq > 0:
            raise ValueError(f"needs sigma_f_sq > 0, got {self.sigma_f_sq}")
        if not self.sigma_l_sq > 0:
            raise ValueError(f"needs sigma_l_sq > 0, got {self.sigma_l_sq}")

    @property
    def sigma_f(self) -> float:
        return float(np.sqrt(self.sigma_f_sq))


KernelSpec = Union[PolynomialKernel, SquaredExponentialKernel]


def _as_points(arr, name="points") -> np.ndarray:
    pts = np.atleast_2d(np.asarray(arr, dtype=float))
    if pts.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-d array of row vectors")
    return pts


def cross_kernel(spec: KernelSpec, left, right) -> np.ndarray:
    """Pairwise kernel matrix k(left_i, right_j) of shape (len(left), len(right)).

    Single shared code path for all kernel evaluations; symmetric inputs give
    an exactly symmetric result.
    """
    left = _as_points(left, "left")
    right = _as_points(right, "right")
    if left.shape[1] != right.shape[1]:
        raise DimensionMismatchError(
            f"point dimensions differ: {left.shape[1]} vs {right.shape[1]}"
        )
    out = left @ right.T
    if isinstance(spec, PolynomialKernel):
        out *= spec.a
        out += spec.b
        out **= spec.d
        return out
    # single-buffer squared distances: ||x||^2 + ||y||^2 - 2 <x, y>
    sq_left = np.einsum("ij,ij->i", left, left)
    sq_right = np.einsum("ij,ij->i", right, right)
    out *= -2.0
    out += sq_left[:, None]
    out += sq_right[None, :]
    np.maximum(out, 0.0, out=out)
    out *= -1.0 / (2.0 * spec.sigma_l_sq)
    np.exp(out, out=out)
    out *= spec.sigma_f_sq
    return out


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """k(x, y) for two state vectors of equal dimension."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return float(cross_kernel(spec, x, y)[0, 0])


def gram(spec: KernelSpec, points) -> np.ndarray:
    """Symmetric positive semidefinite Gram matrix over a nonempty point set."""
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise DimensionMismatchError("gram() needs at least one point")
    return cross_kernel(spec, pts, pts)


def kvec(spec: KernelSpec, anchors, x) -> np.ndarray:
    """Length-N vector [k(x, anchors_i)]_i."""
    anchors = _as_points(anchors, "anchors")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return cross_kernel(spec, anchors, x)[:, 0]


@dataclass(frozen=True)
class GramFactorization:
    """Cholesky factor of (K + r I) supporting backward-stable solves.

    ``factor`` is lower triangular with strictly positive diagonal;
    ``regularizer`` is the diagonal shift r that was added before factorizing.
    """

    matrix_dim: int
    factor: np.ndarray
    regularizer: float

    def solve(self, rhs) -> np.ndarray:
        """Solve (K + r I) z = rhs for one or many right-hand sides."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.matrix_dim:
            raise DimensionMismatchError(
                f"rhs has leading dimension {rhs.shape[0]}, expected {self.matrix_dim}"
            )
        return scipy.linalg.cho_solve((self.factor, True), rhs, check_finite=False)


def factorize_regularized(K: np.ndarray, n_times_lambda: float) -> GramFactorization:
    """Factorize (K + n_times_lambda I) for a symmetric K.

    Raises :class:`FactorizationError` when the shifted matrix is not positive
    definite to working precision, which signals that the regularization is
    too small for this dataset.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionMismatchError(f"K must be square, got shape {K.shape}")
    if n_times_lambda < 0:
        raise ValueError(f"regularizer must be nonnegative, got {n_times_lambda}")
    shifted = K.copy()
    shifted[np.diag_indices_from(shifted)] += n_times_lambda
    try:
        factor = scipy.linalg.cholesky(
            shifted, lower=True, overwrite_a=True, check_finite=False
        )
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(
            "Gram system is not positive definite at this regularization; "
            "increase the regularization constant (lambda)."
        ) from exc
    return GramFactorization(
        matrix_dim=K.shape[0], factor=factor, regularizer=float(n_times_lambda)
    )
