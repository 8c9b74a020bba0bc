"""Empirical conditional mean embedding of a transition kernel.

Given transitions (X, X+) the embedding is carried entirely by the weight
function

    w(x)^T = k_X(x)^T (K_X + N lambda I)^{-1}

so that w(x)^T f(X+) estimates the conditional expectation E[f(X+) | x] for
any f in the target RKHS. The Gram system is factorized once; every query is
a kernel vector plus a triangular solve (or a cached solve when the same f is
queried at many points).

Robustness against the unknown true kernel enters through an ambiguity ball
of radius epsilon around the empirical embedding; the scalar consequence used
downstream is the margin epsilon * sqrt(k_x(x, x)) * b_bar. epsilon itself is
always a user input; `half_split_discrepancy` offers a non-rigorous, purely
diagnostic aid for choosing it.

When the conditioning kernel is polynomial, x -> w(x)^T f(X+) is itself a
polynomial of the kernel degree; `cme_monomial_lift` materializes it as one
compact polynomial per requested monomial of f, which is what makes the
downstream martingale constraint a polynomial constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, RkhsBarrierError
from .kernels import (
    GramFactorization,
    KernelSpec,
    PolynomialKernel,
    SquaredExponentialKernel,
    cross_kernel,
    eval_kernel,
    factorize_regularized,
    gram,
    kvec,
)
from .polynomials import (
    MonomialBasis,
    Polynomial,
    monomials_up_to,
    multinomial_coefficient,
)
from .systems import StateBox, TransitionDataset, purpose_stream, STREAM_PROBE

# Inflation applied when the diagonal supremum is estimated on a grid instead
# of computed exactly; the constant must over-approximate, never under.
GRID_SUP_INFLATION = 1.05


@dataclass(frozen=True)
class AmbiguityConfig:
    """Ambiguity-ball radius epsilon, confidence mass rho, RKHS norm cap b_bar."""

    epsilon: float
    rho: float
    b_bar: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.b_bar < 0:
            raise ValueError(f"b_bar must be nonnegative, got {self.b_bar}")


@dataclass(frozen=True)
class EmpiricalCme:
    """Anchors, successors, and the factorized regularized Gram system."""

    anchors: np.ndarray
    successors: np.ndarray
    factorization: GramFactorization
    kx_spec: KernelSpec

    def __post_init__(self):
        anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        successors = np.atleast_2d(np.asarray(self.successors, dtype=float))
        if anchors.shape[0] != self.factorization.matrix_dim:
            raise DimensionMismatchError("factorization dimension differs from anchors")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "successors", successors)

    @property
    def n(self) -> int:
        return self.anchors.shape[0]

    @property
    def dim(self) -> int:
        return self.anchors.shape[1]


def fit_cme(
    data: TransitionDataset, kx_spec: KernelSpec, lam: float
) -> EmpiricalCme:
    """Assemble the conditioning Gram matrix and factorize (K + N lambda I)."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    K = gram(kx_spec, data.states)
    facto = factorize_regularized(K, data.n * lam)
    return EmpiricalCme(
        anchors=data.states,
        successors=data.successors,
        factorization=facto,
        kx_spec=kx_spec,
    )


def weights(cme: EmpiricalCme, x) -> np.ndarray:
    """w(x) as a length-N vector; not normalized to sum to one."""
    return cme.factorization.solve(kvec(cme.kx_spec, cme.anchors, x))


def weights_many(cme: EmpiricalCme, points) -> np.ndarray:
    """Stack of w(x) rows for a batch of query points."""
    G = cross_kernel(cme.kx_spec, np.atleast_2d(points), cme.anchors)
    return cme.factorization.solve(G.T).T


def expected_value(cme: EmpiricalCme, f_at_successors, x) -> float:
    """Empirical conditional expectation w(x)^T f(X+)."""
    f = np.asarray(f_at_successors, dtype=float).reshape(-1)
    if f.shape[0] != cme.n:
        raise DimensionMismatchError(
            f"function values have length {f.shape[0]}, dataset has {cme.n}"
        )
    return float(weights(cme, x) @ f)


def solve_against(cme: EmpiricalCme, f_at_successors) -> np.ndarray:
    """Cached solve s = (K + N lambda I)^{-1} f(X+); then w(x)^T f = k_X(x)^T s.

    Use for repeated queries of the same function over many points (dense
    grids): each query reduces to one kernel row times a fixed vector.
    """
    f = np.asarray(f_at_successors, dtype=float)
    if f.shape[0] != cme.n:
        raise DimensionMismatchError("function values do not match dataset size")
    return cme.factorization.solve(f)


def expected_value_many(
    cme: EmpiricalCme, f_at_successors, points, chunk: int = 8192
) -> np.ndarray:
    """Vectorized w(x)^T f(X+) over rows of ``points`` (chunked kernel rows)."""
    s = solve_against(cme, f_at_successors)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(pts.shape[0] if s.ndim == 1 else (pts.shape[0], s.shape[1]))
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        out[start : start + block.shape[0]] = (
            cross_kernel(cme.kx_spec, block, cme.anchors) @ s
        )
    return out


def robust_margin(kx_spec: KernelSpec, cfg: AmbiguityConfig, x) -> float:
    """Pointwise ambiguity margin epsilon * b_bar * sqrt(k_x(x, x))."""
    return cfg.epsilon * cfg.b_bar * float(np.sqrt(eval_kernel(kx_spec, x, x)))


def robust_margin_many(kx_spec: KernelSpec, cfg: AmbiguityConfig, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(kx_spec, SquaredExponentialKernel):
        diag = np.full(pts.shape[0], kx_spec.sigma_f_sq)
    else:
        sq = np.einsum("ij,ij->i", pts, pts)
        diag = (kx_spec.a * sq + kx_spec.b) ** kx_spec.d
    return cfg.epsilon * cfg.b_bar * np.sqrt(diag)


def sup_sqrt_kx(kx_spec: KernelSpec, domain) -> float:
    """sup over the domain of sqrt(k_x(x, x)).

    * squared-exponential: the diagonal is constant, returns sigma_f;
    * polynomial kernel on a box: exact, since k(x, x) is monotone in
      ||x||^2 and the squared norm is maximized coordinatewise at
      max(l_i^2, u_i^2);
    * polynomial kernel on a general semi-algebraic set with a box hull:
      dense-grid maximization over hull points inside the set, inflated by
      a 1.05 safety factor (documented over-approximation).
    """
    if isinstance(kx_spec, SquaredExponentialKernel):
        return kx_spec.sigma_f
    if isinstance(domain, StateBox):
        r_sq = float(
            np.sum(np.maximum(domain.lower**2, domain.upper**2))
        )
        return (kx_spec.a * r_sq + kx_spec.b) ** (kx_spec.d / 2.0)
    box = getattr(domain, "box_hull", None)
    if box is None:
        raise RkhsBarrierError(
            "sup_sqrt_kx needs a box, or a semi-algebraic set with a box hull"
        )
    counts = [33] * box.dim
    grid = box.lattice(counts)
    inside = domain.contains_many(grid, tol=1e-12)
    if not np.any(inside):
        raise RkhsBarrierError("no grid point lies inside the semi-algebraic set")
    sq = np.einsum("ij,ij->i", grid[inside], grid[inside])
    val = float(np.max((kx_spec.a * sq + kx_spec.b) ** kx_spec.d))
    return GRID_SUP_INFLATION * np.sqrt(val)


def lift_function_values(cme: EmpiricalCme, values: np.ndarray) -> list:
    """Polynomials q_j with w(x)^T values[:, j] = q_j(x).

    With A = (K + N lambda I)^{-1} V, q_j(x) = sum_i A[i, j] k_x(x, anchor_i)
    which is a degree-d polynomial for the polynomial conditioning kernel.
    The kernel sections are expanded once for all anchors and aggregated, so
    each q_j is a single dense polynomial regardless of the dataset size.
    """
    spec = cme.kx_spec
    if not isinstance(spec, PolynomialKernel):
        raise RkhsBarrierError(
            "the monomial lift requires the polynomial conditioning kernel"
        )
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != cme.n:
        raise DimensionMismatchError("lift values do not match dataset size")
    n_vars = cme.dim
    A = cme.factorization.solve(values)  # N x J

    # Expansion matrix: row i holds the grlex coefficients of k_x(., anchor_i).
    section_exponents = monomials_up_to(n_vars, spec.d)
    cols = []
    for expo in section_exponents:
        k = sum(expo)
        const = (
            multinomial_coefficient(spec.d, expo)
            * spec.a**k
            * float(spec.b) ** (spec.d - k)
        )
        cols.append(const * np.prod(cme.anchors ** np.asarray(expo, dtype=float), axis=1))
    E = np.column_stack(cols)  # N x C

    coeffs = A.T @ E  # J x C
    return [
        Polynomial(n_vars, dict(zip(section_exponents, row))) for row in coeffs
    ]


def cme_monomial_lift(cme: EmpiricalCme, monomial_basis) -> list:
    """Lift of the monomial targets m_j: q_j(x) = w(x)^T m_j(X+), so that
    w(x)^T B(X+) = sum_j b_j q_j(x) for any coefficient vector b over the
    requested basis."""
    if isinstance(monomial_basis, MonomialBasis):
        exponents = list(monomial_basis.exponents)
    else:
        exponents = [tuple(int(v) for v in e) for e in monomial_basis]
    phi_plus = np.column_stack(
        [
            np.prod(cme.successors ** np.asarray(e, dtype=float), axis=1)
            for e in exponents
        ]
    )
    return lift_function_values(cme, phi_plus)


@dataclass(frozen=True)
class HalfSplitReport:
    """Refit-on-halves discrepancy summary. Heuristic only: this is a rough
    stability diagnostic for choosing epsilon by hand, not a concentration
    bound of any kind."""

    max_discrepancy: float
    mean_discrepancy: float
    n_probe: int
    note: str = "non-rigorous diagnostic; not a concentration bound"


def half_split_discrepancy(
    data: TransitionDataset,
    kx_spec: KernelSpec,
    lam: float,
    n_probe: int = 200,
    seed: int = 0,
) -> HalfSplitReport:
    """Fit the embedding on each half of the data and compare predictions of
    the successor coordinates at uniformly drawn probe points."""
    half = data.n // 2
    if half < 1:
        raise RkhsBarrierError("need at least two samples for a half split")
    parts = []
    for states, succs in (
        (data.states[:half], data.successors[:half]),
        (data.states[half:], data.successors[half:]),
    ):
        sub = TransitionDataset(
            states=states,
            successors=succs,
            seed=data.seed,
            system_tag=data.system_tag,
            box=data.box,
        )
        parts.append(fit_cme(sub, kx_spec, lam))
    probes = data.box.sample_uniform(purpose_stream(seed, STREAM_PROBE), n_probe)
    preds = [
        expected_value_many(part, part.successors, probes) for part in parts
    ]
    gap = np.abs(preds[0] - preds[1])
    return HalfSplitReport(
        max_discrepancy=float(np.max(gap)),
        mean_discrepancy=float(np.mean(gap)),
        n_probe=n_probe,
    )
