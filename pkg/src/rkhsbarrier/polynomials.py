"""Multivariate polynomial arithmetic, monomial bases, and semi-algebraic sets.

Conventions used throughout the toolkit:

* A monomial is an exponent tuple ``(e_1, ..., e_n)`` of nonnegative ints.
* Monomial order is graded lexicographic (grlex): ascending total degree,
  then lexicographic with x1 > x2 > ... > xn inside each degree block. The
  constant monomial always comes first. Coefficient vectors produced against
  this order are portable across modules and serialized artifacts.
* Coefficients with magnitude below ``COEFF_PRUNE_TOL`` are dropped after
  arithmetic, keeping downstream SDP data sparse without affecting
  certification at solver tolerance.

Serialization is a plain text format, one term per ``+``-joined chunk::

    coeff * x1^e1 x2^e2 ... xn^en

with every variable spelled out (so the number of variables round-trips) and
coefficients printed with 17 significant digits (exact float64 round trip).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, RkhsBarrierError

COEFF_PRUNE_TOL = 1e-14


def grlex_key(exponents: tuple) -> tuple:
    """Sort key implementing graded lex order with x1 > x2 > ... > xn."""
    return (sum(exponents), tuple(-e for e in exponents))


def monomials_up_to(num_vars: int, max_degree: int) -> list:
    """All exponent tuples of total degree <= max_degree, in grlex order."""
    if num_vars < 1:
        raise ValueError("need at least one variable")
    if max_degree < 0:
        raise ValueError("degree must be nonnegative")
    out = []

    def fill(prefix, remaining_vars, remaining_deg):
        if remaining_vars == 1:
            out.append(prefix + (remaining_deg,))
            return
        for e in range(remaining_deg, -1, -1):
            fill(prefix + (e,), remaining_vars - 1, remaining_deg - e)

    for deg in range(max_degree + 1):
        fill((), num_vars, deg)
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """Grlex-ordered monomial basis up to a total degree; constant first."""

    num_vars: int
    max_degree: int
    exponents: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "exponents", tuple(monomials_up_to(self.num_vars, self.max_degree))
        )

    def __len__(self):
        return len(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def index_map(self) -> dict:
        return {e: i for i, e in enumerate(self.exponents)}

    def evaluate(self, points) -> np.ndarray:
        """Matrix of monomial values, one row per point, one column per basis element."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.num_vars:
            raise DimensionMismatchError(
                f"points have dimension {pts.shape[1]}, basis expects {self.num_vars}"
            )
        cols = [
            np.prod(pts ** np.asarray(e, dtype=float), axis=1) for e in self.exponents
        ]
        return np.column_stack(cols)


class Polynomial:
    """Sparse multivariate polynomial: exponent tuple -> float coefficient.

    Instances are treated as immutable; arithmetic returns new objects in
    canonical form (no stored zero or sub-tolerance coefficients).
    """

    __slots__ = ("num_vars", "terms")

    def __init__(self, num_vars: int, terms: dict | None = None):
        if num_vars < 1:
            raise ValueError("polynomial needs at least one variable")
        self.num_vars = int(num_vars)
        clean = {}
        for expo, coeff in (terms or {}).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != num_vars:
                raise DimensionMismatchError(
                    f"exponent {expo} has length {len(expo)}, expected {num_vars}"
                )
            if any(e < 0 for e in expo):
                raise ValueError(f"negative exponent in {expo}")
            coeff = float(coeff)
            if abs(coeff) >= COEFF_PRUNE_TOL:
                clean[expo] = clean.get(expo, 0.0) + coeff
        self.terms = {e: c for e, c in clean.items() if abs(c) >= COEFF_PRUNE_TOL}

    # ---------------------------------------------------------------- builders
    @classmethod
    def zero(cls, num_vars: int) -> "Polynomial":
        return cls(num_vars, {})

    @classmethod
    def constant(cls, num_vars: int, value: float) -> "Polynomial":
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, index: int, num_vars: int) -> "Polynomial":
        expo = [0] * num_vars
        expo[index] = 1
        return cls(num_vars, {tuple(expo): 1.0})

    @classmethod
    def from_coeff_vector(cls, basis: MonomialBasis, coeffs) -> "Polynomial":
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != len(basis):
            raise DimensionMismatchError(
                f"coefficient vector has length {coeffs.shape[0]}, basis has {len(basis)}"
            )
        return cls(basis.num_vars, dict(zip(basis.exponents, coeffs)))

    # ------------------------------------------------------------- inspection
    @property
    def total_degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def coeff_vector(self, basis: MonomialBasis) -> np.ndarray:
        if basis.num_vars != self.num_vars:
            raise DimensionMismatchError("basis dimension mismatch")
        vec = np.zeros(len(basis))
        index = basis.index_map()
        for expo, coeff in self.terms.items():
            if expo not in index:
                raise DimensionMismatchError(
                    f"monomial {expo} exceeds basis degree {basis.max_degree}"
                )
            vec[index[expo]] = coeff
        return vec

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda item: grlex_key(item[0]))

    # ------------------------------------------------------------- arithmetic
    def add(self, other: "Polynomial") -> "Polynomial":
        self._check_same_vars(other)
        merged = dict(self.terms)
        for expo, coeff in other.terms.items():
            merged[expo] = merged.get(expo, 0.0) + coeff
        return Polynomial(self.num_vars, merged)

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(
            self.num_vars, {e: factor * c for e, c in self.terms.items()}
        )

    def multiply(self, other: "Polynomial") -> "Polynomial":
        self._check_same_vars(other)
        prod: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                prod[key] = prod.get(key, 0.0) + c1 * c2
        return Polynomial(self.num_vars, prod)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.num_vars, other)
        return self.add(other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.num_vars, other)
        return self.add(other.scale(-1.0))

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        return self.multiply(other)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.num_vars == other.num_vars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.num_vars, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.num_vars}, {self.terms!r})"

    def _check_same_vars(self, other: "Polynomial"):
        if self.num_vars != other.num_vars:
            raise DimensionMismatchError(
                f"mixing polynomials in {self.num_vars} and {other.num_vars} variables"
            )

    # -------------------------------------------------------------- evaluation
    def evaluate(self, x) -> float:
        """Direct term-by-term evaluation with compensated summation."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.num_vars:
            raise DimensionMismatchError(
                f"point has dimension {x.shape[0]}, expected {self.num_vars}"
            )
        contributions = []
        for expo, coeff in self.sorted_terms():
            value = coeff
            for xi, e in zip(x, expo):
                if e:
                    value *= xi**e
            contributions.append(value)
        return math.fsum(contributions)

    def evaluate_many(self, points) -> np.ndarray:
        """Vectorized evaluation over rows of ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.num_vars:
            raise DimensionMismatchError(
                f"points have dimension {pts.shape[1]}, expected {self.num_vars}"
            )
        total = np.zeros(pts.shape[0])
        for expo, coeff in self.sorted_terms():
            term = np.full(pts.shape[0], coeff)
            for k, e in enumerate(expo):
                if e:
                    term *= pts[:, k] ** e
            total += term
        return total

    def affine_substitute(self, scale, shift) -> "Polynomial":
        """Polynomial p(scale * x + shift) with per-variable scale and shift."""
        scale = np.asarray(scale, dtype=float).reshape(-1)
        shift = np.asarray(shift, dtype=float).reshape(-1)
        if scale.shape[0] != self.num_vars or shift.shape[0] != self.num_vars:
            raise DimensionMismatchError("affine map dimension mismatch")
        total = Polynomial.zero(self.num_vars)
        for expo, coeff in self.sorted_terms():
            term = Polynomial.constant(self.num_vars, coeff)
            for k, e in enumerate(expo):
                if e:
                    lin = Polynomial(
                        self.num_vars,
                        {
                            tuple(1 if j == k else 0 for j in range(self.num_vars)): scale[k],
                            (0,) * self.num_vars: shift[k],
                        },
                    )
                    for _ in range(e):
                        term = term.multiply(lin)
            total = total.add(term)
        return total

    # ------------------------------------------------------------ serialization
    def to_text(self) -> str:
        """Grlex-ordered text form; zero polynomial keeps explicit variables."""
        items = self.sorted_terms()
        if not items:
            items = [((0,) * self.num_vars, 0.0)]
        chunks = []
        for expo, coeff in items:
            vars_part = " ".join(f"x{k + 1}^{e}" for k, e in enumerate(expo))
            chunks.append(f"{coeff:.17g} * {vars_part}")
        return " + ".join(chunks)

    @classmethod
    def from_text(cls, text: str) -> "Polynomial":
        terms = {}
        num_vars = None
        for chunk in text.split(" + "):
            chunk = chunk.strip()
            if not chunk:
                raise RkhsBarrierError("empty term in polynomial text")
            coeff_part, _, vars_part = chunk.partition("*")
            if not vars_part:
                raise RkhsBarrierError(f"malformed polynomial term {chunk!r}")
            coeff = float(coeff_part.strip())
            expo = []
            for token in vars_part.split():
                name, _, power = token.partition("^")
                if not name.startswith("x") or not power:
                    raise RkhsBarrierError(f"malformed variable token {token!r}")
                expo.append(int(power))
            expo = tuple(expo)
            if num_vars is None:
                num_vars = len(expo)
            elif num_vars != len(expo):
                raise RkhsBarrierError("inconsistent variable count in polynomial text")
            terms[expo] = terms.get(expo, 0.0) + coeff
        if num_vars is None:
            raise RkhsBarrierError("empty polynomial text")
        return cls(num_vars, terms)


def expand_poly_kernel_section(anchor, a: float, b: float, d: int) -> Polynomial:
    """Expansion of x -> (a <x, anchor> + b)^d as an explicit degree-d polynomial.

    Multinomial expansion: the coefficient of x^alpha with |alpha| <= d is
    d! / (alpha! (d - |alpha|)!) * a^|alpha| * anchor^alpha * b^(d - |alpha|).
    """
    anchor = np.asarray(anchor, dtype=float).reshape(-1)
    if a <= 0 or d < 1:
        raise ValueError("need a > 0 and d >= 1")
    n = anchor.shape[0]
    terms = {}
    for expo in monomials_up_to(n, d):
        k = sum(expo)
        coeff = multinomial_coefficient(d, expo)
        coeff *= a**k * float(b) ** (d - k)
        for xk, e in zip(anchor, expo):
            if e:
                coeff *= xk**e
        if coeff != 0.0:
            terms[expo] = coeff
    return Polynomial(n, terms)


def multinomial_coefficient(d: int, expo: Sequence[int]) -> float:
    """d! / (expo_1! ... expo_n! (d - |expo|)!)."""
    k = sum(expo)
    if k > d:
        raise ValueError("exponent total exceeds degree")
    value = math.factorial(d) // math.factorial(d - k)
    for e in expo:
        value //= math.factorial(e)
    return float(value)


@dataclass(frozen=True)
class SemiAlgebraicSet:
    """Basic closed set {x : g_k(x) >= 0 for all k} with an optional box hull.

    The box hull, when present, is only used for sampling and grid layout;
    membership is decided by the inequalities alone.
    """

    ambient_dim: int
    inequalities: tuple
    box_hull: object = None  # StateBox or None

    def __post_init__(self):
        for g in self.inequalities:
            if g.num_vars != self.ambient_dim:
                raise DimensionMismatchError(
                    "inequality dimension does not match ambient dimension"
                )

    def contains(self, x, tol: float = 0.0) -> bool:
        return all(g.evaluate(x) >= -tol for g in self.inequalities)

    def contains_many(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.ones(pts.shape[0], dtype=bool)
        for g in self.inequalities:
            ok &= g.evaluate_many(pts) >= -tol
        return ok


def box_to_semialgebraic(box) -> SemiAlgebraicSet:
    """One quadratic inequality (x_i - l_i)(u_i - x_i) >= 0 per dimension."""
    lower = np.asarray(box.lower, dtype=float)
    upper = np.asarray(box.upper, dtype=float)
    n = lower.shape[0]
    polys = []
    for i in range(n):
        li, ui = lower[i], upper[i]
        quad = [0] * n
        quad[i] = 2
        lin = [0] * n
        lin[i] = 1
        polys.append(
            Polynomial(
                n,
                {
                    tuple(quad): -1.0,
                    tuple(lin): li + ui,
                    (0,) * n: -li * ui,
                },
            )
        )
    return SemiAlgebraicSet(ambient_dim=n, inequalities=tuple(polys), box_hull=box)
