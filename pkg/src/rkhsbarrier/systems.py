"""Simulators and transition sampling for the benchmark systems.

Two systems are provided:

* a kinematic lane-keeping vehicle with state (x, y, phi) = (longitudinal
  position, lateral position, heading angle) and additive zero-mean Gaussian
  noise per axis,
* a 1-d linear-Gaussian map x+ = alpha x + w whose conditional mean is known
  in closed form (alpha x), used as an analytic oracle in tests.

The lane-keeping slip angle is computed as

    psi = l_r / (l_r + l_f) * arctan(delta_f)

with the steering angle delta_f held in radians internally; configuration
accepts degrees through an explicit unit key to avoid unit bugs. Note the
arctan is applied to the angle value itself, which is the convention this
toolkit follows and documents.

Randomness: one root seed is split per purpose over a counter-based Philox
generator, so state sampling and transition noise draw from independent
streams and enlarging a dataset never reshuffles earlier draws.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, RkhsBarrierError

# Fixed purpose identifiers for stream splitting; order is part of the
# reproducibility contract.
STREAM_STATES = 1
STREAM_NOISE = 2
STREAM_MC_INIT = 3
STREAM_MC_NOISE = 4
STREAM_PROBE = 5


def purpose_stream(seed: int, purpose: int) -> np.random.Generator:
    """Independent counter-based generator for (seed, purpose)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(purpose),)))
    )


@dataclass(frozen=True)
class StateBox:
    """Axis-aligned box with strict per-dimension bounds lower[i] < upper[i]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionMismatchError("box bounds have different lengths")
        if not np.all(lower < upper):
            raise ValueError(f"box needs lower < upper per dimension: {lower}, {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def edge_lengths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def contains_many(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(
            (pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1
        )

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def lattice(self, counts) -> np.ndarray:
        """Regular lattice with counts[i] points per axis (1 point -> midpoint)."""
        axes = []
        for lo, hi, c in zip(self.lower, self.upper, counts):
            c = int(c)
            axes.append(
                np.array([0.5 * (lo + hi)]) if c == 1 else np.linspace(lo, hi, c)
            )
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])


@dataclass(frozen=True)
class LaneKeepingParams:
    """Time step tau [s], speed v [m/s], axle lengths l_r/l_f [m], steering
    angle delta_f [rad], and per-axis noise standard deviations."""

    tau: float = 0.1
    v: float = 5.0
    l_r: float = 1.384
    l_f: float = 1.384
    delta_f: float = math.radians(5.0)
    noise_std: tuple = (0.01, 0.01, 0.001)

    def __post_init__(self):
        if self.tau < 0 or self.v <= 0 or self.l_r <= 0 or self.l_f <= 0:
            raise ValueError("lane-keeping parameters out of range")
        if any(s < 0 for s in self.noise_std):
            raise ValueError("noise standard deviations must be nonnegative")

    @property
    def psi(self) -> float:
        return self.l_r / (self.l_r + self.l_f) * math.atan(self.delta_f)


def lane_keeping_drift(params: LaneKeepingParams, x) -> np.ndarray:
    """Deterministic part of the lane-keeping step (the added increment)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    psi = params.psi
    return np.array(
        [
            params.tau * params.v * math.cos(x[2] + psi),
            params.tau * params.v * math.sin(x[2] + psi),
            params.tau * params.v / params.l_r * math.sin(psi),
        ]
    )


def lane_keeping_step(
    params: LaneKeepingParams, x, rng: np.random.Generator
) -> np.ndarray:
    """One noisy step of the lane-keeping dynamics."""
    x = np.asarray(x, dtype=float).reshape(-1)
    noise = rng.normal(0.0, params.noise_std, size=3)
    return x + lane_keeping_drift(params, x) + noise


def linear_gaussian_step(
    alpha: float, noise_std: float, x, rng: np.random.Generator
) -> np.ndarray:
    """x+ = alpha x + w with w ~ N(0, noise_std^2); conditional mean alpha x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return alpha * x + rng.normal(0.0, noise_std, size=x.shape)


class LaneKeepingSystem:
    """Lane-keeping vehicle wrapped with batch stepping for fast rollouts."""

    def __init__(self, params: LaneKeepingParams | None = None):
        self.params = params or LaneKeepingParams()

    dim = 3

    @property
    def tag(self) -> str:
        return "lane-keeping"

    def step(self, x, rng) -> np.ndarray:
        return lane_keeping_step(self.params, x, rng)

    def step_batch(self, states: np.ndarray, rng) -> np.ndarray:
        p = self.params
        psi = p.psi
        phi = states[:, 2]
        drift = np.column_stack(
            [
                p.tau * p.v * np.cos(phi + psi),
                p.tau * p.v * np.sin(phi + psi),
                np.full(states.shape[0], p.tau * p.v / p.l_r * math.sin(psi)),
            ]
        )
        noise = rng.normal(0.0, p.noise_std, size=states.shape)
        return states + drift + noise


class LinearGaussianSystem:
    """Scalar linear map with additive Gaussian noise; analytic oracle system."""

    def __init__(self, alpha: float, noise_std: float):
        self.alpha = float(alpha)
        self.noise_std = float(noise_std)

    dim = 1

    @property
    def tag(self) -> str:
        return "linear-gaussian"

    def step(self, x, rng) -> np.ndarray:
        return linear_gaussian_step(self.alpha, self.noise_std, x, rng)

    def step_batch(self, states: np.ndarray, rng) -> np.ndarray:
        return self.alpha * states + rng.normal(0.0, self.noise_std, size=states.shape)


@dataclass(frozen=True)
class TransitionDataset:
    """Paired (state, successor) samples with the sampling box and seed kept
    for provenance. Successors are stored exactly as drawn (no clamping)."""

    states: np.ndarray
    successors: np.ndarray
    seed: int
    system_tag: str
    box: StateBox

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        successors = np.asarray(self.successors, dtype=float)
        if states.shape != successors.shape:
            raise DimensionMismatchError("states and successors differ in shape")
        if not np.all(self.box.contains_many(states, tol=1e-12)):
            raise ValueError("some sampled states lie outside the sampling box")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "successors", successors)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def to_csv_bytes(self) -> bytes:
        n = self.dim
        buf = io.StringIO()
        header = [f"x{i + 1}" for i in range(n)] + [f"xp{i + 1}" for i in range(n)]
        buf.write(",".join(header) + "\n")
        for row, succ in zip(self.states, self.successors):
            vals = [f"{v:.17g}" for v in row] + [f"{v:.17g}" for v in succ]
            buf.write(",".join(vals) + "\n")
        return buf.getvalue().encode("ascii")

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_csv_bytes()).hexdigest()


def sample_transitions(system, box: StateBox, n: int, seed: int) -> TransitionDataset:
    """n i.i.d. uniform states over the box, one successor draw per state."""
    if n < 1:
        raise ValueError("need at least one sample")
    if box.dim != system.dim:
        raise DimensionMismatchError("box dimension does not match system")
    states = box.sample_uniform(purpose_stream(seed, STREAM_STATES), n)
    successors = system.step_batch(states, purpose_stream(seed, STREAM_NOISE))
    return TransitionDataset(
        states=states,
        successors=successors,
        seed=int(seed),
        system_tag=system.tag,
        box=box,
    )


def simulate_trajectory(system, x0, T: int, rng: np.random.Generator) -> np.ndarray:
    """Apply the step map T times; returns the (T+1) x n array of visited states."""
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    x = np.asarray(x0, dtype=float).reshape(-1)
    out = np.empty((T + 1, x.shape[0]))
    out[0] = x
    for t in range(T):
        x = system.step(x, rng)
        out[t + 1] = x
    return out


# --------------------------------------------------------------------- file IO

def write_dataset(dataset: TransitionDataset, csv_path) -> Path:
    """CSV with header x1..xn,xp1..xpn plus a key=value sidecar (.meta)."""
    csv_path = Path(csv_path)
    csv_path.write_bytes(dataset.to_csv_bytes())
    meta = csv_path.with_suffix(".meta")
    lines = [
        f"seed={dataset.seed}",
        f"system={dataset.system_tag}",
        f"n={dataset.n}",
        "box_lower=" + " ".join(f"{v:.17g}" for v in dataset.box.lower),
        "box_upper=" + " ".join(f"{v:.17g}" for v in dataset.box.upper),
    ]
    meta.write_text("\n".join(lines) + "\n", encoding="ascii")
    return csv_path


def read_dataset(csv_path) -> TransitionDataset:
    csv_path = Path(csv_path)
    meta_path = csv_path.with_suffix(".meta")
    if not meta_path.exists():
        raise RkhsBarrierError(f"missing dataset sidecar {meta_path}")
    meta = {}
    for line in meta_path.read_text(encoding="ascii").splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    raw = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    dim = raw.shape[1] // 2
    box = StateBox(
        lower=np.fromstring(meta["box_lower"], sep=" "),
        upper=np.fromstring(meta["box_upper"], sep=" "),
    )
    return TransitionDataset(
        states=raw[:, :dim],
        successors=raw[:, dim:],
        seed=int(meta["seed"]),
        system_tag=meta["system"],
        box=box,
    )
