"""Command-line interface.

Verbs: generate-data, certify, validate, sweep-epsilon, plot-data, simulate.
Everything is batch-oriented: inputs are a config file, outputs are text
artifacts (CSV, certificate documents). Exit codes are documented per stage:

    0   success
    1   unexpected error
    2   configuration / argument error
    3   data generation or loading
    4   embedding fit
    5   constraint compilation
    6   semidefinite solve (includes infeasibility)
    7   certificate extraction
    8   envelope certification
    9   grid falsification / Monte-Carlo validation
    10  certificate document parsing
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import certfile, pipeline
from .config import config_to_text, load_config
from .errors import CertificateParseError, ConfigError, RkhsBarrierError
from .pipeline import StageFailure
from .safety import probability_bound, validate_certificate
from .cme import fit_cme
from .systems import purpose_stream, sample_transitions, simulate_trajectory, write_dataset


def _load(args):
    try:
        cfg = load_config(args.config, profile=args.profile)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        raise SystemExit(2) from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed).validate()
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate_data(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    try:
        system = cfg.build_system()
        data = sample_transitions(system, cfg.state_box(), cfg.n_samples, cfg.seed)
    except Exception as exc:
        print(f"data generation failed: {exc}", file=sys.stderr)
        return 3
    path = write_dataset(data, out / "dataset.csv")
    print(f"wrote {path} ({data.n} transitions, fingerprint {data.fingerprint()[:16]})")
    return 0


def cmd_certify(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    try:
        result = pipeline.certify(cfg)
    except StageFailure as exc:
        print(f"certification failed {exc}", file=sys.stderr)
        return exc.exit_code
    cert_path = out / "certificate.txt"
    certfile.write_certificate(result.document, cert_path)
    if not cfg.dataset:
        write_dataset(result.dataset, out / "dataset.csv")
    cert = result.certificate
    print(f"certificate written to {cert_path}")
    print(f"  eta = {cert.eta:.6g}, gamma = {cert.gamma:.6g}, c = {cert.c:.6g}")
    print(
        f"  envelope: zeta1_hat = {result.envelope.zeta1_hat:.3e}, "
        f"zeta2_hat = {result.envelope.zeta2_hat:.3e}, "
        f"rkhs_norm = {result.envelope.rkhs_norm:.3e}"
    )
    print(f"  falsifier min margin = {result.validation.min_margin:.3e}")
    print(
        f"  P(safe for T = {int(cfg.horizon) if cfg.horizon != float('inf') else 'inf'}) "
        f">= {result.p_psi:.4f} with confidence >= {1 - cfg.rho:.4f}"
    )
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    try:
        doc = certfile.read_certificate(args.certificate)
    except (CertificateParseError, OSError) as exc:
        print(f"certificate parse error: {exc}", file=sys.stderr)
        return 10
    try:
        data = pipeline.obtain_dataset(cfg)
        cme = fit_cme(data, doc.certificate.kx_spec, doc.certificate.lam)
    except StageFailure as exc:
        print(f"validation setup failed {exc}", file=sys.stderr)
        return exc.exit_code
    sets = pipeline.verification_sets(cfg)
    report = validate_certificate(
        doc.certificate,
        sets.state_space,
        sets.initial,
        sets.unsafe,
        cme,
        grid_density=cfg.validation_grid,
    )
    for check in report.checks():
        state = "pass" if check.passed else "VIOLATED"
        print(
            f"  {check.name}: {state} (margin {check.margin:.3e} "
            f"at {tuple(round(v, 6) for v in check.worst_point)})"
        )
    mc = pipeline.run_monte_carlo(cfg)
    print(
        f"  monte-carlo: {mc.empirical_probability:.4f} "
        f"(99% CI [{mc.ci_low:.4f}, {mc.ci_high:.4f}], {mc.n_runs} runs)"
    )
    bound = probability_bound(
        doc.certificate.eta, doc.certificate.gamma, doc.certificate.c, doc.horizon
    )
    conservative = mc.ci_low >= bound - 0.01
    print(f"  certified bound p_psi = {bound:.4f}; conservative: {conservative}")
    if not report.all_passed:
        return 9
    return 0


def cmd_sweep_epsilon(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    try:
        epsilons = [float(tok) for tok in args.epsilons.split(",") if tok.strip()]
    except ValueError:
        print("cannot parse epsilon list", file=sys.stderr)
        return 2
    rows = pipeline.sweep_epsilon(cfg, epsilons, n_repeats=args.repeats)
    path = out / "epsilon_sweep.csv"
    header = ["epsilon", "mean_p_psi"] + [
        f"p_psi_seed{cfg.seed + k}" for k in range(args.repeats)
    ]
    lines = [",".join(header)]
    for eps, mean_p, per_seed in rows:
        lines.append(
            ",".join([f"{eps:.17g}", f"{mean_p:.17g}"] + [f"{p:.17g}" for p in per_seed])
        )
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"wrote {path}")
    for eps, mean_p, _ in rows:
        print(f"  epsilon = {eps:g}: mean p_psi = {mean_p:.4f}")
    return 0


def cmd_plot_data(args) -> int:
    try:
        doc = certfile.read_certificate(args.certificate)
    except (CertificateParseError, OSError) as exc:
        print(f"certificate parse error: {exc}", file=sys.stderr)
        return 10
    cfg = _load(args)
    out = _out_dir(args)
    box = cfg.state_box()
    barrier = doc.certificate.barrier
    n = barrier.num_vars
    slice_axis = args.slice_axis
    slice_value = args.slice_value
    axes = [k for k in range(n) if k != slice_axis]
    if len(axes) != 2:
        print("plot-data needs a 3-d state with one sliced axis", file=sys.stderr)
        return 2
    g = args.grid
    u = np.linspace(box.lower[axes[0]], box.upper[axes[0]], g)
    v = np.linspace(box.lower[axes[1]], box.upper[axes[1]], g)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.zeros((g * g, n))
    pts[:, axes[0]] = U.reshape(-1)
    pts[:, axes[1]] = V.reshape(-1)
    pts[:, slice_axis] = slice_value
    vals = barrier.evaluate_many(pts)
    path = out / "barrier_slice.csv"
    lines = [f"kind,x{axes[0] + 1},x{axes[1] + 1},value"]
    for row, val in zip(pts, vals):
        lines.append(f"B,{row[axes[0]]:.17g},{row[axes[1]]:.17g},{val:.17g}")
    lines.append(f"eta,,,{doc.certificate.eta:.17g}")
    lines.append(f"gamma,,,{doc.certificate.gamma:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"wrote {path} ({g}x{g} grid slice at x{slice_axis + 1} = {slice_value:g})")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    system = cfg.build_system()
    rng = purpose_stream(cfg.seed, 17)
    x0 = (
        np.asarray([float(t) for t in args.x0.split()])
        if args.x0
        else cfg.initial_box().midpoint
    )
    horizon = args.steps
    lines = ["run,t," + ",".join(f"x{i + 1}" for i in range(system.dim))]
    for run in range(args.runs):
        traj = simulate_trajectory(system, x0, horizon, rng)
        for t, state in enumerate(traj):
            lines.append(f"{run},{t}," + ",".join(f"{v:.17g}" for v in state))
    path = _out_dir(args) / "trajectories.csv"
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"wrote {path} ({args.runs} runs, {horizon} steps)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rkhsbarrier",
        description="Data-driven barrier certificates via kernel mean embeddings",
    )
    parser.add_argument("--config", required=True, help="path of a key=value config")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument(
        "--profile", choices=["desk", "paper"], default=None, help="scale profile"
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("generate-data", help="draw transitions and write CSV + metadata")
    sub.add_parser("certify", help="run the full synthesis pipeline")

    p_val = sub.add_parser("validate", help="falsify + Monte-Carlo check a certificate")
    p_val.add_argument("--certificate", required=True)

    p_sweep = sub.add_parser("sweep-epsilon", help="certify across ambiguity radii")
    p_sweep.add_argument("--epsilons", required=True, help="comma-separated radii")
    p_sweep.add_argument("--repeats", type=int, default=1)

    p_plot = sub.add_parser("plot-data", help="emit a barrier level-set grid CSV")
    p_plot.add_argument("--certificate", required=True)
    p_plot.add_argument("--slice-axis", type=int, default=2, dest="slice_axis")
    p_plot.add_argument("--slice-value", type=float, default=0.0, dest="slice_value")
    p_plot.add_argument("--grid", type=int, default=100)

    p_sim = sub.add_parser("simulate", help="roll out trajectories to CSV")
    p_sim.add_argument("--steps", type=int, default=10)
    p_sim.add_argument("--runs", type=int, default=1)
    p_sim.add_argument("--x0", default="", help="space-separated initial state")

    return parser


_VERBS = {
    "generate-data": cmd_generate_data,
    "certify": cmd_certify,
    "validate": cmd_validate,
    "sweep-epsilon": cmd_sweep_epsilon,
    "plot-data": cmd_plot_data,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _VERBS[args.verb](args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 1
    except RkhsBarrierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
