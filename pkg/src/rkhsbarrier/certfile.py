"""Certificate document: a flat, diff-friendly text format.

Sections (in order): [barrier], [constants], [envelope], [bound],
[provenance]. Keys are ``key = value`` lines; floats are printed with 17
significant digits so that documents round-trip exactly and identical runs
produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cme import AmbiguityConfig
from .errors import CertificateParseError
from .gp_envelope import EnvelopeReport
from .kernels import KernelSpec, PolynomialKernel, SquaredExponentialKernel
from .polynomials import Polynomial
from .sos import BarrierCertificate

TOOL_VERSION = "rkhsbarrier 0.1.0"


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def format_kernel(spec: KernelSpec) -> str:
    if isinstance(spec, PolynomialKernel):
        return f"polynomial a={_fmt(spec.a)} b={_fmt(spec.b)} d={spec.d}"
    return (
        f"squared-exponential sigma_f_sq={_fmt(spec.sigma_f_sq)} "
        f"sigma_l_sq={_fmt(spec.sigma_l_sq)}"
    )


def parse_kernel(text: str) -> KernelSpec:
    toks = text.split()
    kind, kv = toks[0], dict(tok.split("=", 1) for tok in toks[1:])
    if kind == "polynomial":
        return PolynomialKernel(a=float(kv["a"]), b=float(kv["b"]), d=int(kv["d"]))
    if kind == "squared-exponential":
        return SquaredExponentialKernel(
            sigma_f_sq=float(kv["sigma_f_sq"]), sigma_l_sq=float(kv["sigma_l_sq"])
        )
    raise CertificateParseError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class CertificateDocument:
    certificate: BarrierCertificate
    envelope: EnvelopeReport
    p_psi: float
    horizon: float
    confidence: float
    seed: int
    tool_version: str


def write_certificate(doc: CertificateDocument, path) -> Path:
    cert = doc.certificate
    env = doc.envelope
    lines = []
    lines.append("[barrier]")
    lines.append(f"polynomial = {cert.barrier.to_text()}")
    lines.append(f"num_vars = {cert.barrier.num_vars}")
    lines.append("[constants]")
    for key, val in (
        ("eta", cert.eta),
        ("gamma", cert.gamma),
        ("c", cert.c),
        ("epsilon", cert.ambiguity.epsilon),
        ("b_bar", cert.ambiguity.b_bar),
        ("zeta1", cert.zeta1),
        ("zeta2", cert.zeta2),
        ("lambda", cert.lam),
        ("rho", cert.ambiguity.rho),
        ("xi", cert.xi),
        ("sup_sqrt_kx", cert.sup_sqrt),
    ):
        lines.append(f"{key} = {_fmt(val)}")
    lines.append("[envelope]")
    lines.append(f"passed = {'true' if env.passed else 'false'}")
    for key, val in (
        ("zeta1_hat", env.zeta1_hat),
        ("zeta2_hat", env.zeta2_hat),
        ("rkhs_norm", env.rkhs_norm),
        ("zeta1_cap", env.zeta1_cap),
        ("zeta2_cap", env.zeta2_cap),
        ("b_bar_cap", env.b_bar_cap),
        ("gp_regularizer", env.gp_regularizer),
    ):
        lines.append(f"{key} = {_fmt(val)}")
    lines.append("grid_spacing = " + " ".join(_fmt(v) for v in env.grid_spacing))
    lines.append(f"n_centers = {env.n_centers}")
    lines.append("[bound]")
    lines.append(f"p_psi = {_fmt(doc.p_psi)}")
    horizon = "inf" if np.isinf(doc.horizon) else str(int(doc.horizon))
    lines.append(f"T = {horizon}")
    lines.append(f"confidence = {_fmt(doc.confidence)}")
    lines.append("[provenance]")
    lines.append(f"dataset_fingerprint = {cert.dataset_fingerprint}")
    lines.append(f"seed = {doc.seed}")
    lines.append(f"tool_version = {doc.tool_version}")
    lines.append(f"kx = {format_kernel(cert.kx_spec)}")
    lines.append(f"kplus = {format_kernel(cert.kplus_spec)}")
    for key in sorted(cert.solver_residuals):
        lines.append(f"solver_{key} = {_fmt(cert.solver_residuals[key])}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def _parse_sections(text: str) -> dict:
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = {}
            continue
        if current is None:
            raise CertificateParseError(f"line {lineno}: key outside any section")
        key, sep, value = line.partition("=")
        if not sep:
            raise CertificateParseError(f"line {lineno}: expected 'key = value'")
        sections[current][key.strip()] = value.strip()
    return sections


def read_certificate(path) -> CertificateDocument:
    text = Path(path).read_text(encoding="ascii")
    sections = _parse_sections(text)
    for name in ("barrier", "constants", "envelope", "bound", "provenance"):
        if name not in sections:
            raise CertificateParseError(f"missing section [{name}]")

    def pick(section, key):
        try:
            return sections[section][key]
        except KeyError:
            raise CertificateParseError(
                f"missing key {key!r} in section [{section}]"
            ) from None

    barrier = Polynomial.from_text(pick("barrier", "polynomial"))
    if barrier.num_vars != int(pick("barrier", "num_vars")):
        raise CertificateParseError("barrier num_vars disagrees with polynomial text")

    con = sections["constants"]
    ambiguity = AmbiguityConfig(
        epsilon=float(pick("constants", "epsilon")),
        rho=float(pick("constants", "rho")),
        b_bar=float(pick("constants", "b_bar")),
    )
    residuals = {
        key[len("solver_") :]: float(val)
        for key, val in sections["provenance"].items()
        if key.startswith("solver_")
    }
    cert = BarrierCertificate(
        barrier=barrier,
        eta=float(pick("constants", "eta")),
        gamma=float(pick("constants", "gamma")),
        c=float(pick("constants", "c")),
        ambiguity=ambiguity,
        zeta1=float(pick("constants", "zeta1")),
        zeta2=float(pick("constants", "zeta2")),
        lam=float(pick("constants", "lambda")),
        kx_spec=parse_kernel(pick("provenance", "kx")),
        kplus_spec=parse_kernel(pick("provenance", "kplus")),
        dataset_fingerprint=pick("provenance", "dataset_fingerprint"),
        solver_residuals=residuals,
        xi=float(con.get("xi", 0.0)),
        sup_sqrt=float(con.get("sup_sqrt_kx", 0.0)),
    )
    env = EnvelopeReport(
        passed=pick("envelope", "passed") == "true",
        zeta1_hat=float(pick("envelope", "zeta1_hat")),
        zeta2_hat=float(pick("envelope", "zeta2_hat")),
        rkhs_norm=float(pick("envelope", "rkhs_norm")),
        zeta1_cap=float(pick("envelope", "zeta1_cap")),
        zeta2_cap=float(pick("envelope", "zeta2_cap")),
        b_bar_cap=float(pick("envelope", "b_bar_cap")),
        grid_spacing=tuple(
            float(tok) for tok in pick("envelope", "grid_spacing").split()
        ),
        n_centers=int(pick("envelope", "n_centers")),
        gp_regularizer=float(pick("envelope", "gp_regularizer")),
    )
    horizon_text = pick("bound", "T")
    horizon = float("inf") if horizon_text == "inf" else float(int(horizon_text))
    return CertificateDocument(
        certificate=cert,
        envelope=env,
        p_psi=float(pick("bound", "p_psi")),
        horizon=horizon,
        confidence=float(pick("bound", "confidence")),
        seed=int(pick("provenance", "seed")),
        tool_version=pick("provenance", "tool_version"),
    )
