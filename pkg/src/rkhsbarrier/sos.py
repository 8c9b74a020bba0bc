"""Sum-of-squares compilation of the data-driven barrier constraints.

Level-set convention (documented once, used everywhere): eta is the level on
the initial set, gamma the level on the unsafe set, gamma > eta >= 0. Some
presentations swap the two symbols in the constraint block; this toolkit
always uses the convention above, with every constraint tightened by the
approximation slack zeta1 so that the smooth envelope fitted afterwards
inherits the conditions at the stated levels:

    (1)  B - zeta1                     >= 0   on X   (B >= zeta1, envelope >= 0)
    (2)  eta - zeta1 - B               >= 0   on X0  (envelope <= eta)
    (3)  B - zeta1 - gamma             >= 0   on each unsafe component
    (4)  B - w(x)^T B(X+) - xi         >= 0   on X

with the constant

    xi = epsilon * sup_X sqrt(k_x(x,x)) * b_bar - c + zeta1 + zeta2.

Each inequality is certified in Putinar form sigma_0 + sum_k sigma_k g_k with
all sigma sum-of-squares (degree of the multipliers is a configuration knob),
and every polynomial identity is recorded monomial by monomial against the
global graded-lex order. Unsafe-set unions get one Putinar block per
component. The lowering to a semidefinite program equates each sigma of
degree 2t with z(x)^T Q z(x) over the degree-t basis, Q >= 0; the barrier
coefficients (and eta, when minimized) enter the SDP as free scalars.

Certificate extraction re-verifies every identity numerically at random
points before anything is reported, so an inaccurate solver answer fails
loudly instead of producing an untrustworthy certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cme import AmbiguityConfig, EmpiricalCme, lift_function_values, sup_sqrt_kx
from .errors import (
    DegreeBookkeepingError,
    ExtractionError,
    RkhsBarrierError,
    SynthesisInfeasibleError,
)
from .kernels import KernelSpec, PolynomialKernel
from .polynomials import MonomialBasis, Polynomial, SemiAlgebraicSet, monomials_up_to
from .sdp import SdpProblem, SdpSolution
from .systems import StateBox

# fixed seed for the extraction spot check; part of the determinism contract
_RECHECK_SEED = 20240917
_RECHECK_POINTS = 10_000
_RECHECK_REL_TOL = 1e-6


@dataclass(frozen=True)
class VerificationSets:
    """Semi-algebraic descriptions of the state space, initial set, and the
    unsafe union (one basic closed set per component)."""

    state_space: SemiAlgebraicSet
    initial: SemiAlgebraicSet
    unsafe: tuple

    def __post_init__(self):
        dims = {self.state_space.ambient_dim, self.initial.ambient_dim}
        dims.update(u.ambient_dim for u in self.unsafe)
        if len(dims) != 1:
            raise RkhsBarrierError("verification sets have mixed dimensions")
        if not self.unsafe:
            raise RkhsBarrierError("need at least one unsafe component")


@dataclass(frozen=True)
class SosSynthesisConfig:
    gamma: float
    c: float
    zeta1: float
    zeta2: float
    ambiguity: AmbiguityConfig
    barrier_degree: int = 2
    multiplier_degree: int = 2
    eta_mode: str = "minimize"  # "minimize" | "fixed"
    eta_fixed: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.c < 0:
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not (self.zeta1 > 0 and self.zeta2 > 0):
            raise ValueError("zeta1 and zeta2 must be positive")
        if self.barrier_degree < 2 or self.barrier_degree % 2:
            raise ValueError("barrier degree must be an even integer >= 2")
        if self.multiplier_degree < 0 or self.multiplier_degree % 2:
            raise ValueError("multiplier degree must be an even integer >= 0")
        if self.eta_mode not in ("minimize", "fixed"):
            raise ValueError(f"unknown eta mode {self.eta_mode!r}")
        if self.eta_mode == "fixed" and self.eta_fixed is None:
            raise ValueError("fixed eta mode needs eta_fixed")


@dataclass
class SosBlock:
    label: str
    basis: tuple  # z monomial exponents
    weight: Polynomial  # multiplying inequality (constant one for sigma_0)


@dataclass
class SosIdentity:
    """One polynomial identity target(x) = sum_blocks z^T Q z * g, recorded
    coefficientwise: target(alpha) = const + b_coef . b + eta_coef * eta."""

    label: str
    num_vars: int
    degree: int
    const: dict
    b_coef: dict  # alpha -> dense vector over the barrier basis
    eta_coef: dict
    blocks: list


@dataclass
class SosProgram:
    """Compiled identities, expressed in normalized coordinates.

    The compiler maps the state box onto [-1, 1]^n (x = shift + scale * u)
    before emitting any constraint; this equalizes monomial magnitudes across
    axes of very different physical extent, which the downstream solver
    repays with several digits of accuracy. ``scale``/``shift`` record the
    map; extraction converts the barrier back to original coordinates.
    """

    barrier_basis: MonomialBasis
    identities: list
    cfg: SosSynthesisConfig
    sets: VerificationSets  # normalized copies
    lift_polys: list  # normalized coordinates
    xi: float
    sup_sqrt: float
    kx_spec: KernelSpec
    scale: np.ndarray
    shift: np.ndarray

    @property
    def num_barrier_coeffs(self) -> int:
        return len(self.barrier_basis)

    @property
    def minimizes_eta(self) -> bool:
        return self.cfg.eta_mode == "minimize"


@dataclass(frozen=True)
class BarrierCertificate:
    """Polynomial barrier with all constants needed to state the safety bound."""

    barrier: Polynomial
    eta: float
    gamma: float
    c: float
    ambiguity: AmbiguityConfig
    zeta1: float
    zeta2: float
    lam: float
    kx_spec: KernelSpec
    kplus_spec: KernelSpec
    dataset_fingerprint: str
    solver_residuals: dict
    xi: float = 0.0
    sup_sqrt: float = 0.0

    def __post_init__(self):
        if not self.gamma > self.eta >= 0:
            raise ValueError(
                f"certificate needs gamma > eta >= 0, got gamma={self.gamma}, eta={self.eta}"
            )
        if self.c < 0:
            raise ValueError("certificate needs c >= 0")


def _even_ceil(v: int) -> int:
    return v + (v % 2)


def _putinar_blocks(
    label: str, num_vars: int, target_degree: int, region: SemiAlgebraicSet, mult_degree: int
):
    """sigma_0 plus one SOS multiplier per region inequality; returns
    (blocks, identity_degree)."""
    g_deg = max((g.total_degree for g in region.inequalities), default=0)
    degree = _even_ceil(max(target_degree, mult_degree + g_deg))
    blocks = [
        SosBlock(
            label=f"{label}/sigma0",
            basis=tuple(monomials_up_to(num_vars, degree // 2)),
            weight=Polynomial.constant(num_vars, 1.0),
        )
    ]
    half = mult_degree // 2
    for k, g in enumerate(region.inequalities):
        blocks.append(
            SosBlock(
                label=f"{label}/sigma{k + 1}",
                basis=tuple(monomials_up_to(num_vars, half)),
                weight=g,
            )
        )
    for blk in blocks:
        max_prod = 2 * max(sum(e) for e in blk.basis) + blk.weight.total_degree
        if max_prod > degree:
            raise DegreeBookkeepingError(
                f"{blk.label}: product degree {max_prod} exceeds identity degree "
                f"{degree}; increase multiplier_degree"
            )
    if target_degree > degree:
        raise DegreeBookkeepingError(
            f"{label}: target degree {target_degree} not representable; "
            "increase multiplier_degree"
        )
    return blocks, degree


def _normalize_set(region: SemiAlgebraicSet, scale, shift) -> SemiAlgebraicSet:
    """Rewrite {g >= 0} in normalized coordinates, rescaling each inequality
    to unit max coefficient (a positive factor, so the set is unchanged)."""
    polys = []
    for g in region.inequalities:
        gn = g.affine_substitute(scale, shift)
        peak = max((abs(c) for c in gn.terms.values()), default=1.0)
        polys.append(gn.scale(1.0 / peak))
    hull = region.box_hull
    if hull is not None:
        hull = StateBox(
            (np.asarray(hull.lower) - shift) / scale,
            (np.asarray(hull.upper) - shift) / scale,
        )
    return SemiAlgebraicSet(
        ambient_dim=region.ambient_dim, inequalities=tuple(polys), box_hull=hull
    )


def build_sos_program(
    cme: EmpiricalCme, sets: VerificationSets, cfg: SosSynthesisConfig
) -> SosProgram:
    """Compile the four barrier constraints into SOS identities."""
    if not isinstance(cme.kx_spec, PolynomialKernel):
        raise RkhsBarrierError("synthesis requires the polynomial conditioning kernel")
    n = sets.state_space.ambient_dim
    if cme.dim != n:
        raise RkhsBarrierError("dataset dimension does not match the verification sets")

    # kernel diagonal supremum over the original state space (pre-normalization)
    sup_domain = sets.state_space.box_hull or sets.state_space
    sup_sqrt = sup_sqrt_kx(cme.kx_spec, sup_domain)
    amb = cfg.ambiguity
    xi = amb.epsilon * sup_sqrt * amb.b_bar - cfg.c + cfg.zeta1 + cfg.zeta2

    hull = sets.state_space.box_hull
    if hull is not None:
        shift = np.asarray(hull.midpoint, dtype=float)
        scale = 0.5 * np.asarray(hull.edge_lengths, dtype=float)
    else:
        shift = np.zeros(n)
        scale = np.ones(n)
    sets = VerificationSets(
        state_space=_normalize_set(sets.state_space, scale, shift),
        initial=_normalize_set(sets.initial, scale, shift),
        unsafe=tuple(_normalize_set(u, scale, shift) for u in sets.unsafe),
    )

    basis = MonomialBasis(num_vars=n, max_degree=cfg.barrier_degree)
    q = len(basis)

    # lift of the normalized-coordinate monomials: values m_j((x+ - shift)/scale),
    # lifted over the original-coordinate kernel sections, then normalized.
    scaled_successors = (cme.successors - shift) / scale
    phi_plus = basis.evaluate(scaled_successors)
    lift_polys = [
        p.affine_substitute(scale, shift)
        for p in lift_function_values(cme, phi_plus)
    ]

    zero = (0,) * n
    identities = []

    def unit(j):
        e = np.zeros(q)
        e[j] = 1.0
        return e

    # (1) B - zeta1 >= 0 on X
    blocks, deg = _putinar_blocks(
        "nonneg-on-X", n, cfg.barrier_degree, sets.state_space, cfg.multiplier_degree
    )
    identities.append(
        SosIdentity(
            label="nonneg-on-X",
            num_vars=n,
            degree=deg,
            const={zero: -cfg.zeta1},
            b_coef={expo: unit(j) for j, expo in enumerate(basis.exponents)},
            eta_coef={},
            blocks=blocks,
        )
    )

    # (2) eta - zeta1 - B >= 0 on X0
    blocks, deg = _putinar_blocks(
        "init-upper", n, cfg.barrier_degree, sets.initial, cfg.multiplier_degree
    )
    const2 = {zero: -cfg.zeta1}
    eta2 = {}
    if cfg.eta_mode == "fixed":
        const2[zero] += cfg.eta_fixed
    else:
        eta2[zero] = 1.0
    identities.append(
        SosIdentity(
            label="init-upper",
            num_vars=n,
            degree=deg,
            const=const2,
            b_coef={expo: -unit(j) for j, expo in enumerate(basis.exponents)},
            eta_coef=eta2,
            blocks=blocks,
        )
    )

    # (3) B - zeta1 - gamma >= 0 on each unsafe component
    for idx, region in enumerate(sets.unsafe):
        blocks, deg = _putinar_blocks(
            f"unsafe-lower-{idx}", n, cfg.barrier_degree, region, cfg.multiplier_degree
        )
        identities.append(
            SosIdentity(
                label=f"unsafe-lower-{idx}",
                num_vars=n,
                degree=deg,
                const={zero: -(cfg.zeta1 + cfg.gamma)},
                b_coef={expo: unit(j) for j, expo in enumerate(basis.exponents)},
                eta_coef={},
                blocks=blocks,
            )
        )

    # (4) B - sum_j b_j q_j - xi >= 0 on X (the lifted martingale constraint)
    lift_degree = max(p.total_degree for p in lift_polys)
    blocks, deg = _putinar_blocks(
        "martingale",
        n,
        max(cfg.barrier_degree, lift_degree),
        sets.state_space,
        cfg.multiplier_degree,
    )
    b4: dict = {}
    for j, expo in enumerate(basis.exponents):
        b4.setdefault(expo, np.zeros(q))
        b4[expo] += unit(j)
    for j, qpoly in enumerate(lift_polys):
        for expo, coeff in qpoly.terms.items():
            b4.setdefault(expo, np.zeros(q))
            b4[expo][j] -= coeff
    identities.append(
        SosIdentity(
            label="martingale",
            num_vars=n,
            degree=deg,
            const={zero: -xi},
            b_coef=b4,
            eta_coef={},
            blocks=blocks,
        )
    )

    return SosProgram(
        barrier_basis=basis,
        identities=identities,
        cfg=cfg,
        sets=sets,
        lift_polys=lift_polys,
        xi=xi,
        sup_sqrt=sup_sqrt,
        kx_spec=cme.kx_spec,
        scale=scale,
        shift=shift,
    )


def sos_to_sdp(prog: SosProgram) -> SdpProblem:
    """Lower the SOS program to a block-diagonal SDP in standard primal form.

    Decision variables: one PSD Gram matrix per SOS block, the barrier
    coefficient vector b, and eta when it is minimized (kept nonnegative by a
    one-dimensional linking block). Each monomial of each identity yields one
    linear equality.
    """
    q = prog.num_barrier_coeffs
    with_eta = prog.minimizes_eta
    n_free = q + (1 if with_eta else 0)

    block_sizes = []
    block_offset = []
    for ident in prog.identities:
        offsets = []
        for blk in ident.blocks:
            offsets.append(len(block_sizes))
            block_sizes.append(len(blk.basis))
        block_offset.append(offsets)

    constraints = []
    free_rows = []
    rhs = []
    n = prog.identities[0].num_vars
    for ident, offsets in zip(prog.identities, block_offset):
        for alpha in monomials_up_to(n, ident.degree):
            row = {}
            for blk, gidx in zip(ident.blocks, offsets):
                basis = blk.basis
                size = len(basis)
                A = np.zeros((size, size))
                hit = False
                for r in range(size):
                    for s in range(size):
                        residue = tuple(
                            a - br - bs for a, br, bs in zip(alpha, basis[r], basis[s])
                        )
                        if min(residue) < 0:
                            continue
                        coeff = blk.weight.terms.get(residue)
                        if coeff:
                            A[r, s] += coeff
                            hit = True
                if hit:
                    row[gidx] = A
            fr = np.zeros(n_free)
            bvec = ident.b_coef.get(alpha)
            if bvec is not None:
                fr[:q] = -bvec
            if with_eta:
                fr[q] = -ident.eta_coef.get(alpha, 0.0)
            constraints.append(row)
            free_rows.append(fr)
            rhs.append(ident.const.get(alpha, 0.0))

    obj_free = np.zeros(n_free)
    if with_eta:
        # eta >= 0 via a linking 1x1 block: eta - U = 0, U >= 0
        link_idx = len(block_sizes)
        block_sizes.append(1)
        constraints.append({link_idx: np.array([[-1.0]])})
        fr = np.zeros(n_free)
        fr[q] = 1.0
        free_rows.append(fr)
        rhs.append(0.0)
        obj_free[q] = 1.0

    return SdpProblem(
        block_sizes=block_sizes,
        constraints=constraints,
        rhs=np.asarray(rhs, dtype=float),
        obj_blocks={},
        free_cols=np.vstack(free_rows),
        obj_free=obj_free,
    )


@dataclass(frozen=True)
class CertificateContext:
    """Everything extraction needs beyond the program and the solver answer."""

    x_box: StateBox
    dataset_fingerprint: str
    kplus_spec: KernelSpec
    lam: float


def _project_psd(Q: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return (V * np.maximum(w, 0.0)) @ V.T


def extract_certificate(
    prog: SosProgram,
    sol: SdpSolution,
    cfg: SosSynthesisConfig,
    context: CertificateContext,
) -> BarrierCertificate:
    """Read off (b, eta), re-verify all polynomial identities numerically,
    and package the certificate constants."""
    if not sol.optimal:
        raise SynthesisInfeasibleError(
            f"no certificate: solver status is {sol.status!r}", status=sol.status
        )
    q = prog.num_barrier_coeffs
    b = np.asarray(sol.free_values[:q], dtype=float)
    if prog.minimizes_eta:
        eta = float(sol.free_values[q])
        if eta < 0:
            if eta < -1e-8:
                raise ExtractionError(f"solver returned negative eta = {eta}")
            eta = 0.0
    else:
        eta = float(cfg.eta_fixed)
    if not cfg.gamma > eta:
        raise ExtractionError(
            f"vacuous certificate: eta = {eta} does not satisfy eta < gamma = {cfg.gamma}"
        )

    # the identities live in normalized coordinates; sample there
    rng = np.random.Generator(np.random.Philox(_RECHECK_SEED))
    sample_box = prog.sets.state_space.box_hull
    if sample_box is None:
        sample_box = StateBox(
            (context.x_box.lower - prog.shift) / prog.scale,
            (context.x_box.upper - prog.shift) / prog.scale,
        )
    points = sample_box.sample_uniform(rng, _RECHECK_POINTS)

    block_iter = iter(sol.primal_blocks)
    for ident in prog.identities:
        target = np.zeros(points.shape[0])
        target_poly_terms: dict = {}
        for alpha, c0 in ident.const.items():
            target_poly_terms[alpha] = target_poly_terms.get(alpha, 0.0) + c0
        for alpha, vec in ident.b_coef.items():
            target_poly_terms[alpha] = target_poly_terms.get(alpha, 0.0) + float(
                vec @ b
            )
        for alpha, ec in ident.eta_coef.items():
            target_poly_terms[alpha] = target_poly_terms.get(alpha, 0.0) + ec * eta
        target_poly = Polynomial(ident.num_vars, target_poly_terms)
        target = target_poly.evaluate_many(points)

        total = np.zeros(points.shape[0])
        magnitude = np.zeros(points.shape[0])
        for blk in ident.blocks:
            Q = _project_psd(next(block_iter))
            Z = np.column_stack(
                [
                    np.prod(points ** np.asarray(e, dtype=float), axis=1)
                    for e in blk.basis
                ]
            )
            sigma = np.einsum("ni,ij,nj->n", Z, Q, Z, optimize=True)
            contrib = sigma * blk.weight.evaluate_many(points)
            total += contrib
            magnitude += np.abs(contrib)
        scale = 1.0 + max(float(np.max(np.abs(target))), float(np.max(magnitude)))
        worst = float(np.max(np.abs(target - total)))
        if worst > _RECHECK_REL_TOL * scale:
            raise ExtractionError(
                f"identity {ident.label!r} fails the numerical re-check: "
                f"max violation {worst:.3e} vs allowed {_RECHECK_REL_TOL * scale:.3e}; "
                "tighten the solver tolerance or increase the slacks"
            )

    # back to original coordinates: B(x) = Bn((x - shift) / scale)
    barrier = Polynomial.from_coeff_vector(prog.barrier_basis, b).affine_substitute(
        1.0 / prog.scale, -prog.shift / prog.scale
    )
    return BarrierCertificate(
        barrier=barrier,
        eta=eta,
        gamma=cfg.gamma,
        c=cfg.c,
        ambiguity=cfg.ambiguity,
        zeta1=cfg.zeta1,
        zeta2=cfg.zeta2,
        lam=context.lam,
        kx_spec=prog.kx_spec,
        kplus_spec=context.kplus_spec,
        dataset_fingerprint=context.dataset_fingerprint,
        solver_residuals=dict(sol.residuals),
        xi=prog.xi,
        sup_sqrt=prog.sup_sqrt,
    )
