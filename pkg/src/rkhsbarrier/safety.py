"""Safety bounds, certificate falsification, and Monte-Carlo cross checks.

`probability_bound` turns barrier constants into the certified lower bound
max(0, 1 - (eta + c T) / gamma) on the probability of avoiding the unsafe
set for T steps; with c = 0 the bound extends to an unbounded horizon. The
bound holds with the confidence 1 - rho carried by the ambiguity radius; rho
is reported verbatim, never recomputed.

`validate_certificate` is the independent falsifier: it re-checks the three
barrier conditions on dense grids directly against the dataset-backed
embedding, reporting the worst point and margin per condition. For the
certified path this is advisory (the algebraic certificate is the
guarantee), but it is a mandatory gate in the acceptance suite.

`monte_carlo_safety` estimates the true safety probability by simulation
with an exact (Clopper-Pearson) binomial confidence interval, providing the
end-to-end conservativeness check: the certified bound must sit below the
empirical estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .cme import (
    AmbiguityConfig,
    EmpiricalCme,
    expected_value_many,
    robust_margin_many,
)
from .errors import RkhsBarrierError
from .polynomials import SemiAlgebraicSet
from .sos import BarrierCertificate
from .systems import (
    StateBox,
    purpose_stream,
    STREAM_MC_INIT,
    STREAM_MC_NOISE,
)


@dataclass(frozen=True)
class SafetySpec:
    """Unsafe union plus a finite or infinite horizon."""

    unsafe: tuple
    horizon: float  # positive integer or math.inf

    def __post_init__(self):
        if not self.unsafe:
            raise ValueError("safety specification needs at least one unsafe set")
        if math.isinf(self.horizon):
            return
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"finite horizon must be an integer >= 1, got {self.horizon}")


@dataclass(frozen=True)
class SafetyBound:
    p_psi: float
    confidence: float  # 1 - rho
    certificate_fingerprint: str

    def __post_init__(self):
        if not 0.0 <= self.p_psi <= 1.0:
            raise ValueError(f"p_psi must lie in [0, 1], got {self.p_psi}")


def probability_bound(eta: float, gamma: float, c: float, T) -> float:
    """max(0, 1 - (eta + c T) / gamma); infinite T requires c = 0."""
    if not gamma > eta >= 0:
        raise ValueError(f"need gamma > eta >= 0, got gamma={gamma}, eta={eta}")
    if c < 0:
        raise ValueError(f"need c >= 0, got c={c}")
    if math.isinf(T):
        if c > 0:
            raise ValueError("an unbounded horizon requires c = 0")
        return max(0.0, 1.0 - eta / gamma)
    if T < 1:
        raise ValueError(f"finite horizon must be >= 1, got {T}")
    return max(0.0, 1.0 - (eta + c * T) / gamma)


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    margin: float
    worst_point: tuple
    worst_value: float


@dataclass(frozen=True)
class FalsificationReport:
    initial: ConditionCheck
    unsafe: tuple
    martingale: ConditionCheck
    grid_density: int

    @property
    def all_passed(self) -> bool:
        return (
            self.initial.passed
            and all(u.passed for u in self.unsafe)
            and self.martingale.passed
        )

    @property
    def min_margin(self) -> float:
        return min(
            [self.initial.margin, self.martingale.margin]
            + [u.margin for u in self.unsafe]
        )

    def checks(self):
        return [self.initial, *self.unsafe, self.martingale]


def _grid_for(region, density: int) -> np.ndarray:
    box = region if isinstance(region, StateBox) else region.box_hull
    if box is None:
        raise RkhsBarrierError("validation needs a box hull on every set")
    grid = box.lattice([density] * box.dim)
    if isinstance(region, SemiAlgebraicSet):
        inside = region.contains_many(grid, tol=1e-12)
        grid = grid[inside]
    if grid.shape[0] == 0:
        raise RkhsBarrierError("validation grid is empty")
    return grid


def validate_certificate(
    cert: BarrierCertificate,
    state_space,
    initial,
    unsafe,
    cme: EmpiricalCme,
    grid_density: int = 50,
    margin_tol: float = 1e-6,
) -> FalsificationReport:
    """Dense-grid falsification of the three barrier conditions.

    (a) max over the initial grid of B <= eta,
    (b) min over each unsafe-component grid of B >= gamma,
    (c) max over the state grid of
        w(x)^T B(X+) - B(x) + epsilon b_bar sqrt(k_x(x, x)) <= c.

    Margins are signed (positive = satisfied with slack); a condition passes
    when its margin is >= -margin_tol.
    """
    barrier = cert.barrier

    grid0 = _grid_for(initial, grid_density)
    vals0 = barrier.evaluate_many(grid0)
    worst0 = int(np.argmax(vals0))
    check_a = ConditionCheck(
        name="initial-level",
        passed=bool(cert.eta - vals0[worst0] >= -margin_tol),
        margin=float(cert.eta - vals0[worst0]),
        worst_point=tuple(grid0[worst0]),
        worst_value=float(vals0[worst0]),
    )

    unsafe_checks = []
    for idx, region in enumerate(unsafe):
        grid_u = _grid_for(region, grid_density)
        vals_u = barrier.evaluate_many(grid_u)
        worst = int(np.argmin(vals_u))
        unsafe_checks.append(
            ConditionCheck(
                name=f"unsafe-level-{idx}",
                passed=bool(vals_u[worst] - cert.gamma >= -margin_tol),
                margin=float(vals_u[worst] - cert.gamma),
                worst_point=tuple(grid_u[worst]),
                worst_value=float(vals_u[worst]),
            )
        )

    grid_x = _grid_for(state_space, grid_density)
    b_plus = barrier.evaluate_many(cme.successors)
    drift = (
        expected_value_many(cme, b_plus, grid_x)
        - barrier.evaluate_many(grid_x)
        + robust_margin_many(cert.kx_spec, cert.ambiguity, grid_x)
    )
    worst = int(np.argmax(drift))
    check_c = ConditionCheck(
        name="martingale",
        passed=bool(cert.c - drift[worst] >= -margin_tol),
        margin=float(cert.c - drift[worst]),
        worst_point=tuple(grid_x[worst]),
        worst_value=float(drift[worst]),
    )
    return FalsificationReport(
        initial=check_a,
        unsafe=tuple(unsafe_checks),
        martingale=check_c,
        grid_density=grid_density,
    )


@dataclass(frozen=True)
class MonteCarloReport:
    empirical_probability: float
    ci_low: float
    ci_high: float
    n_runs: int
    n_safe: int
    confidence: float = 0.99


def clopper_pearson(k: int, n: int, confidence: float = 0.99):
    """Exact two-sided binomial confidence interval for k successes of n."""
    alpha = 1.0 - confidence
    low = 0.0 if k == 0 else float(scipy.stats.beta.ppf(alpha / 2, k, n - k + 1))
    high = 1.0 if k == n else float(scipy.stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return low, high


def monte_carlo_safety(
    system,
    initial_box: StateBox,
    unsafe,
    T: int,
    n_runs: int,
    seed: int,
) -> MonteCarloReport:
    """Empirical safety probability over uniformly initialized trajectories.

    A run is safe when no visited state (including the initial one) belongs
    to any unsafe component during the first T steps.
    """
    if n_runs < 100:
        raise ValueError("need at least 100 runs for a meaningful interval")
    if T < 1:
        raise ValueError("horizon must be >= 1")
    init_rng = purpose_stream(seed, STREAM_MC_INIT)
    noise_rng = purpose_stream(seed, STREAM_MC_NOISE)
    states = initial_box.sample_uniform(init_rng, n_runs)

    def in_unsafe(batch):
        hit = np.zeros(batch.shape[0], dtype=bool)
        for region in unsafe:
            hit |= region.contains_many(batch)
        return hit

    alive_unsafe = in_unsafe(states)
    for _ in range(T):
        states = system.step_batch(states, noise_rng)
        alive_unsafe |= in_unsafe(states)
    n_safe = int(np.sum(~alive_unsafe))
    low, high = clopper_pearson(n_safe, n_runs)
    return MonteCarloReport(
        empirical_probability=n_safe / n_runs,
        ci_low=low,
        ci_high=high,
        n_runs=n_runs,
        n_safe=n_safe,
    )
