"""End-to-end certification pipeline shared by the command-line verbs.

Stage order: dataset -> embedding -> constraint compilation -> semidefinite
solve -> certificate extraction -> envelope certification -> grid
falsification -> safety bound. Every stage failure is wrapped in a
:class:`StageFailure` carrying the stage name and its documented exit code;
the CLI maps these one-to-one onto process exit statuses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import certfile
from .cme import AmbiguityConfig, fit_cme
from .config import RunConfig
from .errors import FactorizationError, RkhsBarrierError
from .gp_envelope import certify_envelope, fit_gp, sample_barrier
from .polynomials import box_to_semialgebraic
from .safety import monte_carlo_safety, probability_bound, validate_certificate
from .sdp import solve as sdp_solve
from .sos import (
    CertificateContext,
    SosSynthesisConfig,
    VerificationSets,
    build_sos_program,
    extract_certificate,
    sos_to_sdp,
)
from .systems import read_dataset, sample_transitions

EXIT_CODES = {
    "config": 2,
    "data": 3,
    "embedding": 4,
    "sos-build": 5,
    "sdp-solve": 6,
    "extraction": 7,
    "envelope": 8,
    "validation": 9,
    "certificate-io": 10,
}


class StageFailure(RkhsBarrierError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = EXIT_CODES.get(stage, 1)


@dataclass
class CertifyResult:
    config: RunConfig
    dataset: object
    certificate: object
    envelope: object
    validation: object
    p_psi: float
    document: certfile.CertificateDocument


def obtain_dataset(cfg: RunConfig):
    try:
        if cfg.dataset:
            data = read_dataset(cfg.dataset)
            if data.dim != len(cfg.x_lower):
                raise RkhsBarrierError("dataset dimension does not match config boxes")
            return data
        system = cfg.build_system()
        return sample_transitions(system, cfg.state_box(), cfg.n_samples, cfg.seed)
    except Exception as exc:
        raise StageFailure("data", str(exc)) from exc


def verification_sets(cfg: RunConfig) -> VerificationSets:
    return VerificationSets(
        state_space=box_to_semialgebraic(cfg.state_box()),
        initial=box_to_semialgebraic(cfg.initial_box()),
        unsafe=tuple(box_to_semialgebraic(b) for b in cfg.unsafe_boxes()),
    )


def synthesis_config(cfg: RunConfig) -> SosSynthesisConfig:
    return SosSynthesisConfig(
        gamma=cfg.gamma,
        c=cfg.c,
        zeta1=cfg.zeta1,
        zeta2=cfg.zeta2,
        ambiguity=AmbiguityConfig(epsilon=cfg.epsilon, rho=cfg.rho, b_bar=cfg.b_bar),
        barrier_degree=cfg.barrier_degree,
        multiplier_degree=cfg.multiplier_degree,
        eta_mode=cfg.eta_mode,
        eta_fixed=cfg.eta_fixed if cfg.eta_mode == "fixed" else None,
    )


def fit_envelope(cfg: RunConfig, barrier, cme):
    """Fit the RKHS envelope, refining the lattice (and, on factorization
    trouble, the jitter) until the caps are met or the budget is exhausted."""
    box = cfg.state_box()
    counts = np.full(box.dim, cfg.envelope_axis_points, dtype=int)
    report = None
    for _ in range(cfg.envelope_max_refinements + 1):
        if int(np.prod(counts)) > cfg.envelope_center_cap:
            break
        train_x, train_y = sample_barrier(
            barrier, box, int(np.prod(counts)), scheme="grid", axis_counts=counts
        )
        reg = cfg.effective_gp_regularizer()
        model = None
        for _attempt in range(4):
            try:
                model = fit_gp(train_x, train_y, cfg.kplus_spec(), reg)
                break
            except FactorizationError:
                reg *= 10.0
        if model is None:
            raise StageFailure(
                "envelope", "Gram factorization failed even with inflated jitter"
            )
        report = certify_envelope(
            barrier,
            model,
            cme,
            box,
            zeta1=cfg.zeta1,
            zeta2=cfg.zeta2,
            b_bar=cfg.b_bar,
            grid_density=cfg.envelope_grid_density,
        )
        if report.passed:
            return report
        if report.rkhs_norm > cfg.b_bar:
            break  # a finer lattice only grows the norm; refining cannot help
        counts = counts * 2
    return report


def certify(cfg: RunConfig, dataset=None) -> CertifyResult:
    """Run the full pipeline; raises StageFailure with a stage tag on error."""
    data = dataset if dataset is not None else obtain_dataset(cfg)

    try:
        cme = fit_cme(data, cfg.kx_spec(), cfg.lam)
    except Exception as exc:
        raise StageFailure("embedding", str(exc)) from exc

    sets = verification_sets(cfg)
    syn_cfg = synthesis_config(cfg)
    try:
        program = build_sos_program(cme, sets, syn_cfg)
    except Exception as exc:
        raise StageFailure("sos-build", str(exc)) from exc

    problem = sos_to_sdp(program)
    solution = sdp_solve(problem, tol=cfg.sdp_tol, max_iters=cfg.sdp_max_iters)
    if not solution.optimal:
        raise StageFailure(
            "sdp-solve", f"solver finished with status {solution.status!r}"
        )

    context = CertificateContext(
        x_box=cfg.state_box(),
        dataset_fingerprint=data.fingerprint(),
        kplus_spec=cfg.kplus_spec(),
        lam=cfg.lam,
    )
    try:
        cert = extract_certificate(program, solution, syn_cfg, context)
    except Exception as exc:
        raise StageFailure("extraction", str(exc)) from exc

    envelope = fit_envelope(cfg, cert.barrier, cme)
    if envelope is None or not envelope.passed:
        detail = "" if envelope is None else f" (margins {envelope.margins})"
        raise StageFailure("envelope", "envelope caps not met" + detail)

    report = validate_certificate(
        cert,
        sets.state_space,
        sets.initial,
        sets.unsafe,
        cme,
        grid_density=cfg.validation_grid,
    )
    if not report.all_passed:
        raise StageFailure(
            "validation",
            f"grid falsification found a violation (min margin {report.min_margin:.3e})",
        )

    p_psi = probability_bound(cert.eta, cert.gamma, cert.c, cfg.horizon)
    document = certfile.CertificateDocument(
        certificate=cert,
        envelope=envelope,
        p_psi=p_psi,
        horizon=cfg.horizon,
        confidence=1.0 - cfg.rho,
        seed=cfg.seed,
        tool_version=certfile.TOOL_VERSION,
    )
    return CertifyResult(
        config=cfg,
        dataset=data,
        certificate=cert,
        envelope=envelope,
        validation=report,
        p_psi=p_psi,
        document=document,
    )


def sweep_epsilon(cfg: RunConfig, epsilons, n_repeats: int = 1):
    """Certification across ambiguity radii with the norm cap held fixed.

    One dataset per repeat seed, shared across all radii; a failed synthesis
    is recorded as p_psi = 0 rather than aborting the sweep. Returns a list
    of rows (epsilon, mean_p, per-seed list).
    """
    from dataclasses import replace

    if not epsilons:
        raise ValueError("epsilon list must be nonempty")
    seeds = [cfg.seed + k for k in range(n_repeats)]
    datasets = []
    for seed in seeds:
        datasets.append(obtain_dataset(replace(cfg, seed=seed, dataset="")))
    rows = []
    for eps in epsilons:
        per_seed = []
        for seed, data in zip(seeds, datasets):
            run_cfg = replace(cfg, epsilon=float(eps), seed=seed)
            try:
                result = certify(run_cfg, dataset=data)
                per_seed.append(result.p_psi)
            except StageFailure:
                per_seed.append(0.0)
        rows.append((float(eps), float(np.mean(per_seed)), per_seed))
    return rows


def run_monte_carlo(cfg: RunConfig):
    system = cfg.build_system()
    unsafe = [box_to_semialgebraic(b) for b in cfg.unsafe_boxes()]
    if math.isinf(cfg.horizon):
        raise StageFailure("validation", "Monte-Carlo check needs a finite horizon")
    return monte_carlo_safety(
        system,
        cfg.initial_box(),
        unsafe,
        int(cfg.horizon),
        cfg.mc_runs,
        cfg.seed,
    )
