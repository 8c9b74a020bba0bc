"""Run configuration: a flat, typed key=value text format.

Design points: no nesting, one key per line, explicit unit keys (the
steering angle carries ``angle_unit = deg`` or ``rad``), and line-precise
validation errors so a broken config points at the offending line. Two named
profiles bundle scale defaults: ``desk`` (N = 2000 samples, 1e4 Monte-Carlo
runs; the entire pipeline finishes in minutes) and ``paper`` (N = 1e4,
1e5 runs). Explicit keys always win over profile defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kernels import PolynomialKernel, SquaredExponentialKernel
from .systems import (
    LaneKeepingParams,
    LaneKeepingSystem,
    LinearGaussianSystem,
    StateBox,
)

PROFILES = {
    "desk": {"n_samples": 2000, "mc_runs": 10_000},
    "paper": {"n_samples": 10_000, "mc_runs": 100_000},
}


@dataclass(frozen=True)
class RunConfig:
    # system
    system: str = "lane-keeping"
    tau: float = 0.1
    speed: float = 5.0
    l_r: float = 1.384
    l_f: float = 1.384
    steering_angle: float = 5.0
    angle_unit: str = "deg"
    noise_std: tuple = (0.01, 0.01, 0.001)
    lg_alpha: float = 0.8
    lg_noise_std: float = 0.1
    # sets
    x_lower: tuple = (1.0, -7.0, -0.05)
    x_upper: tuple = (10.0, 7.0, 0.05)
    x0_lower: tuple = (1.0, -0.5, -0.005)
    x0_upper: tuple = (2.0, 0.5, 0.005)
    unsafe_lower: tuple = ((1.0, -7.0, -0.05), (1.0, 6.0, -0.05))
    unsafe_upper: tuple = ((10.0, -6.0, 0.05), (10.0, 7.0, 0.05))
    # kernels
    kx_a: float = 0.005
    kx_b: float = 0.11
    kx_d: int = 2
    kplus_sigma_f_sq: float = 1500.0**2
    kplus_sigma_l_sq: float = 2.98**2
    # embedding / ambiguity
    n_samples: int = 2000
    lam: float = 1e-3
    epsilon: float = 0.1
    rho: float = 0.05
    b_bar: float = 0.1
    # synthesis
    gamma: float = 5.0
    eta_mode: str = "minimize"
    eta_fixed: float = 0.0
    c: float = 1e-4
    zeta1: float = 0.01
    zeta2: float = 0.01
    barrier_degree: int = 2
    multiplier_degree: int = 2
    # horizon
    horizon: float = 10
    # solver
    sdp_tol: float = 1e-8
    sdp_max_iters: int = 200
    # envelope
    envelope_axis_points: int = 12
    envelope_max_refinements: int = 3
    envelope_center_cap: int = 20_000
    gp_regularizer: float = 0.0  # 0 -> default 1e-8 * sigma_f_sq
    envelope_grid_density: int = 50
    # validation / Monte Carlo
    validation_grid: int = 50
    mc_runs: int = 10_000
    # misc
    seed: int = 0
    dataset: str = ""  # optional path of a pre-generated dataset

    # ------------------------------------------------------------- accessors
    def state_box(self) -> StateBox:
        return StateBox(np.asarray(self.x_lower), np.asarray(self.x_upper))

    def initial_box(self) -> StateBox:
        return StateBox(np.asarray(self.x0_lower), np.asarray(self.x0_upper))

    def unsafe_boxes(self) -> list:
        return [
            StateBox(np.asarray(lo), np.asarray(hi))
            for lo, hi in zip(self.unsafe_lower, self.unsafe_upper)
        ]

    def build_system(self):
        if self.system == "lane-keeping":
            delta = (
                math.radians(self.steering_angle)
                if self.angle_unit == "deg"
                else self.steering_angle
            )
            return LaneKeepingSystem(
                LaneKeepingParams(
                    tau=self.tau,
                    v=self.speed,
                    l_r=self.l_r,
                    l_f=self.l_f,
                    delta_f=delta,
                    noise_std=tuple(self.noise_std),
                )
            )
        if self.system == "linear-gaussian":
            return LinearGaussianSystem(self.lg_alpha, self.lg_noise_std)
        raise ConfigError(f"unknown system {self.system!r}")

    def kx_spec(self) -> PolynomialKernel:
        return PolynomialKernel(a=self.kx_a, b=self.kx_b, d=self.kx_d)

    def kplus_spec(self) -> SquaredExponentialKernel:
        return SquaredExponentialKernel(
            sigma_f_sq=self.kplus_sigma_f_sq, sigma_l_sq=self.kplus_sigma_l_sq
        )

    def effective_gp_regularizer(self) -> float:
        if self.gp_regularizer > 0:
            return self.gp_regularizer
        return 1e-8 * self.kplus_sigma_f_sq

    def validate(self, path=None):
        box_dims = {
            len(self.x_lower),
            len(self.x_upper),
            len(self.x0_lower),
            len(self.x0_upper),
        }
        for lo, hi in zip(self.unsafe_lower, self.unsafe_upper):
            box_dims.add(len(lo))
            box_dims.add(len(hi))
        if len(box_dims) != 1:
            raise ConfigError("box definitions have mixed dimensions", path=path)
        self.state_box()
        self.initial_box()
        if not self.unsafe_boxes():
            raise ConfigError("need at least one unsafe box", path=path)
        if self.system == "lane-keeping" and len(self.x_lower) != 3:
            raise ConfigError("lane-keeping needs 3-dimensional boxes", path=path)
        if self.system == "linear-gaussian" and len(self.x_lower) != 1:
            raise ConfigError("linear-gaussian needs 1-dimensional boxes", path=path)
        if self.angle_unit not in ("deg", "rad"):
            raise ConfigError(f"angle_unit must be deg or rad, got {self.angle_unit}", path=path)
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1", path=path)
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative", path=path)
        if self.epsilon < 0 or self.b_bar < 0 or not 0 <= self.rho <= 1:
            raise ConfigError("invalid ambiguity parameters", path=path)
        if not self.gamma > 0 or self.c < 0:
            raise ConfigError("need gamma > 0 and c >= 0", path=path)
        if self.zeta1 <= 0 or self.zeta2 <= 0:
            raise ConfigError("zeta1 and zeta2 must be positive", path=path)
        if self.barrier_degree < 2 or self.barrier_degree % 2:
            raise ConfigError("barrier_degree must be an even integer >= 2", path=path)
        if self.multiplier_degree < 0 or self.multiplier_degree % 2:
            raise ConfigError("multiplier_degree must be an even integer >= 0", path=path)
        if self.eta_mode not in ("minimize", "fixed"):
            raise ConfigError("eta_mode must be minimize or fixed", path=path)
        if not math.isinf(self.horizon) and (
            int(self.horizon) != self.horizon or self.horizon < 1
        ):
            raise ConfigError("horizon must be a positive integer or inf", path=path)
        if not 0 < self.sdp_tol <= 1e-2:
            raise ConfigError("sdp_tol must lie in (0, 1e-2]", path=path)
        if self.mc_runs < 100:
            raise ConfigError("mc_runs must be >= 100", path=path)
        if self.validation_grid < 2:
            raise ConfigError("validation_grid must be >= 2", path=path)
        return self


_VECTOR_KEYS = {"noise_std", "x_lower", "x_upper", "x0_lower", "x0_upper"}
_INT_KEYS = {
    "kx_d",
    "n_samples",
    "barrier_degree",
    "multiplier_degree",
    "sdp_max_iters",
    "envelope_axis_points",
    "envelope_max_refinements",
    "envelope_center_cap",
    "envelope_grid_density",
    "validation_grid",
    "mc_runs",
    "seed",
}
_STR_KEYS = {"system", "angle_unit", "eta_mode", "dataset"}
_FLOAT_KEYS = {
    f.name
    for f in fields(RunConfig)
    if f.name
    not in _VECTOR_KEYS | _INT_KEYS | _STR_KEYS | {"unsafe_lower", "unsafe_upper", "lam", "horizon"}
} | {"lam"}


def parse_config_text(text: str, path=None, profile: str | None = None) -> RunConfig:
    """Parse key=value text into a validated RunConfig.

    Unsafe components are numbered keys ``unsafe<k>_lower`` / ``unsafe<k>_upper``
    with k = 1, 2, ...; the horizon accepts ``inf``.
    """
    values: dict = {}
    unsafe_lo: dict = {}
    unsafe_hi: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("expected 'key = value'", path=path, line=lineno)
        key, value = key.strip(), value.strip()
        try:
            if key.startswith("unsafe") and key.endswith("_lower"):
                unsafe_lo[int(key[6:-6])] = tuple(float(t) for t in value.split())
            elif key.startswith("unsafe") and key.endswith("_upper"):
                unsafe_hi[int(key[6:-6])] = tuple(float(t) for t in value.split())
            elif key == "lambda":
                values["lam"] = float(value)
            elif key == "horizon":
                values["horizon"] = math.inf if value == "inf" else float(int(value))
            elif key in _VECTOR_KEYS:
                values[key] = tuple(float(t) for t in value.split())
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key in _STR_KEYS:
                values[key] = value
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                raise ConfigError(f"unknown key {key!r}", path=path, line=lineno)
        except ValueError as exc:
            raise ConfigError(
                f"cannot parse value for {key!r}: {exc}", path=path, line=lineno
            ) from None
    if unsafe_lo or unsafe_hi:
        if sorted(unsafe_lo) != sorted(unsafe_hi):
            raise ConfigError("unsafe boxes need matching _lower/_upper keys", path=path)
        order = sorted(unsafe_lo)
        values["unsafe_lower"] = tuple(unsafe_lo[k] for k in order)
        values["unsafe_upper"] = tuple(unsafe_hi[k] for k in order)
    base = dict(PROFILES.get(profile or "", {}))
    base.update(values)
    cfg = replace(RunConfig(), **base)
    return cfg.validate(path=path)


def load_config(path, profile: str | None = None) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), path=str(path), profile=profile)


def config_to_text(cfg: RunConfig) -> str:
    """Serialize a RunConfig; parse(config_to_text(cfg)) == cfg."""
    lines = []

    def vec(v):
        return " ".join(f"{x:.17g}" for x in v)

    lines.append(f"system = {cfg.system}")
    lines.append(f"tau = {cfg.tau:.17g}")
    lines.append(f"speed = {cfg.speed:.17g}")
    lines.append(f"l_r = {cfg.l_r:.17g}")
    lines.append(f"l_f = {cfg.l_f:.17g}")
    lines.append(f"steering_angle = {cfg.steering_angle:.17g}")
    lines.append(f"angle_unit = {cfg.angle_unit}")
    lines.append(f"noise_std = {vec(cfg.noise_std)}")
    lines.append(f"lg_alpha = {cfg.lg_alpha:.17g}")
    lines.append(f"lg_noise_std = {cfg.lg_noise_std:.17g}")
    lines.append(f"x_lower = {vec(cfg.x_lower)}")
    lines.append(f"x_upper = {vec(cfg.x_upper)}")
    lines.append(f"x0_lower = {vec(cfg.x0_lower)}")
    lines.append(f"x0_upper = {vec(cfg.x0_upper)}")
    for k, (lo, hi) in enumerate(zip(cfg.unsafe_lower, cfg.unsafe_upper), start=1):
        lines.append(f"unsafe{k}_lower = {vec(lo)}")
        lines.append(f"unsafe{k}_upper = {vec(hi)}")
    lines.append(f"kx_a = {cfg.kx_a:.17g}")
    lines.append(f"kx_b = {cfg.kx_b:.17g}")
    lines.append(f"kx_d = {cfg.kx_d}")
    lines.append(f"kplus_sigma_f_sq = {cfg.kplus_sigma_f_sq:.17g}")
    lines.append(f"kplus_sigma_l_sq = {cfg.kplus_sigma_l_sq:.17g}")
    lines.append(f"n_samples = {cfg.n_samples}")
    lines.append(f"lambda = {cfg.lam:.17g}")
    lines.append(f"epsilon = {cfg.epsilon:.17g}")
    lines.append(f"rho = {cfg.rho:.17g}")
    lines.append(f"b_bar = {cfg.b_bar:.17g}")
    lines.append(f"gamma = {cfg.gamma:.17g}")
    lines.append(f"eta_mode = {cfg.eta_mode}")
    lines.append(f"eta_fixed = {cfg.eta_fixed:.17g}")
    lines.append(f"c = {cfg.c:.17g}")
    lines.append(f"zeta1 = {cfg.zeta1:.17g}")
    lines.append(f"zeta2 = {cfg.zeta2:.17g}")
    lines.append(f"barrier_degree = {cfg.barrier_degree}")
    lines.append(f"multiplier_degree = {cfg.multiplier_degree}")
    horizon = "inf" if math.isinf(cfg.horizon) else str(int(cfg.horizon))
    lines.append(f"horizon = {horizon}")
    lines.append(f"sdp_tol = {cfg.sdp_tol:.17g}")
    lines.append(f"sdp_max_iters = {cfg.sdp_max_iters}")
    lines.append(f"envelope_axis_points = {cfg.envelope_axis_points}")
    lines.append(f"envelope_max_refinements = {cfg.envelope_max_refinements}")
    lines.append(f"envelope_center_cap = {cfg.envelope_center_cap}")
    lines.append(f"gp_regularizer = {cfg.gp_regularizer:.17g}")
    lines.append(f"envelope_grid_density = {cfg.envelope_grid_density}")
    lines.append(f"validation_grid = {cfg.validation_grid}")
    lines.append(f"mc_runs = {cfg.mc_runs}")
    lines.append(f"seed = {cfg.seed}")
    if cfg.dataset:
        lines.append(f"dataset = {cfg.dataset}")
    return "\n".join(lines) + "\n"
