"""Block-diagonal semidefinite programming by a primal-dual interior-point method.

Problem form (primal)::

    minimize    sum_l <C_l, X_l>  +  c_free . f
    subject to  sum_l <A_il, X_l> +  F[i, :] . f  =  b_i ,   i = 1..m
                X_l  positive semidefinite,  f  free

The solver runs a homogeneous self-dual (HSD) embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step. Free variables are removed
up front by an orthogonal (QR) elimination, which keeps the cone part clean:
the top rows of the rotated constraint system define ``f`` as an affine
function of the blocks and the bottom rows become equality constraints of a
pure conic program. Dual variables and infeasibility certificates are mapped
back exactly (the elimination is an affine bijection on the feasible sets).

Status values:

* ``optimal``            all scaled residuals below tolerance,
* ``infeasible``         primal infeasibility, certified by a dual improving
                         ray (Farkas direction stored in ``dual``),
* ``unbounded``          dual infeasibility (primal objective unbounded below
                         along a certified ray),
* ``numerical-failure``  no conclusion within the iteration budget.

Infeasibility is triggered by certified ray residuals or by the embedding's
tau/kappa ratio falling below 1e-8. The initial point is the identity scaled
by 10 times the largest input magnitude. Rows are equilibrated to unit
max-norm before solving; this only rescales dual variables, which are mapped
back before reporting. The solver is deterministic: identical problems give
bit-identical iterates.

The SDPA sparse export writes the problem so that a standard SDPA solver
processes our Lagrangian dual; its optimal value is the *negative* of this
problem's optimal value. Free variables are encoded as a trailing pair of
diagonal blocks (split f = u - v), flagged by a leading ``*FREEVARS`` comment
so that re-importing restores the original problem exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import RkhsBarrierError

TAU_KAPPA_RATIO = 1e-8


@dataclass
class SdpProblem:
    block_sizes: list
    constraints: list  # per constraint: dict block index -> symmetric matrix
    rhs: np.ndarray
    obj_blocks: dict = field(default_factory=dict)
    free_cols: np.ndarray | None = None  # (m, n_free)
    obj_free: np.ndarray | None = None

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if len(self.constraints) != self.rhs.shape[0]:
            raise RkhsBarrierError("constraint count differs from rhs length")
        for size in self.block_sizes:
            if size < 1:
                raise RkhsBarrierError("block sizes must be positive")
        for con in self.constraints:
            for l, mat in con.items():
                self._check_block(l, mat)
        for l, mat in self.obj_blocks.items():
            self._check_block(l, mat)
        if self.free_cols is not None:
            self.free_cols = np.asarray(self.free_cols, dtype=float)
            if self.free_cols.shape[0] != self.m:
                raise RkhsBarrierError("free-variable columns have wrong row count")
            if self.obj_free is None:
                self.obj_free = np.zeros(self.free_cols.shape[1])
            self.obj_free = np.asarray(self.obj_free, dtype=float).reshape(-1)
            if self.obj_free.shape[0] != self.free_cols.shape[1]:
                raise RkhsBarrierError("free objective length mismatch")

    def _check_block(self, l, mat):
        n = self.block_sizes[l]
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (n, n):
            raise RkhsBarrierError(f"block {l} matrix has shape {mat.shape}, expected {(n, n)}")
        if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-10 * (1 + np.abs(mat).max())):
            raise RkhsBarrierError(f"block {l} coefficient matrix is not symmetric")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def n_free(self) -> int:
        return 0 if self.free_cols is None else self.free_cols.shape[1]

    def max_abs_coefficient(self) -> float:
        vals = [np.abs(self.rhs).max(initial=0.0)]
        for con in self.constraints:
            vals.extend(np.abs(mat).max(initial=0.0) for mat in con.values())
        vals.extend(np.abs(mat).max(initial=0.0) for mat in self.obj_blocks.values())
        if self.free_cols is not None:
            vals.append(np.abs(self.free_cols).max(initial=0.0))
            vals.append(np.abs(self.obj_free).max(initial=0.0))
        return float(max(vals))


@dataclass
class SdpSolution:
    status: str
    primal_blocks: list | None
    dual: np.ndarray | None
    free_values: np.ndarray | None
    primal_objective: float
    dual_objective: float
    residuals: dict
    iterations: int
    iterate_log: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ----------------------------------------------------------------------------
# dense per-block operator bundles


class _BlockOperator:
    """Constraint tensors stacked per block for vectorized A / A^T products."""

    def __init__(self, block_sizes, constraints, obj_blocks):
        self.sizes = list(block_sizes)
        self.m = len(constraints)
        self.tensors = []
        self.C = []
        for l, n in enumerate(self.sizes):
            T = np.zeros((self.m, n, n))
            for i, con in enumerate(constraints):
                if l in con:
                    T[i] = con[l]
            self.tensors.append(T)
            self.C.append(np.asarray(obj_blocks.get(l, np.zeros((n, n))), dtype=float))

    def apply(self, blocks) -> np.ndarray:
        out = np.zeros(self.m)
        for T, X in zip(self.tensors, blocks):
            out += T.reshape(self.m, -1) @ X.reshape(-1)
        return out

    def apply_adjoint(self, y) -> list:
        return [np.einsum("m,mij->ij", y, T) for T in self.tensors]

    def inner_obj(self, blocks) -> float:
        return float(sum(np.tensordot(C, X) for C, X in zip(self.C, blocks)))

    def norm_obj(self) -> float:
        return float(np.sqrt(sum(np.sum(C * C) for C in self.C)))


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def _max_step(block: np.ndarray, direction: np.ndarray) -> float:
    """sup {alpha : block + alpha * direction is PSD} for PD block."""
    L = scipy.linalg.cholesky(block, lower=True, check_finite=False)
    tmp = scipy.linalg.solve_triangular(L, direction, lower=True, check_finite=False)
    B = scipy.linalg.solve_triangular(L, tmp.T, lower=True, check_finite=False)
    wmin = float(scipy.linalg.eigvalsh(_sym(B), check_finite=False)[0])
    if wmin >= -1e-300:
        return np.inf
    return 1.0 / (-wmin)


class _IpmFailure(Exception):
    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log or []


def _solve_cone_program(op: _BlockOperator, b: np.ndarray, tol: float, max_iters: int):
    """HSD interior-point iteration on a pure conic problem (no free vars).

    Returns (status, X_list, y, S_list, tau, kappa, iters, log).
    """
    m = op.m
    sizes = op.sizes
    nu = sum(sizes)
    if m == 0:
        # No equality constraints: X = 0 is optimal iff C is PSD.
        eigmins = [scipy.linalg.eigvalsh(C)[0] if C.size else 0.0 for C in op.C]
        if all(e >= -1e-12 for e in eigmins):
            X = [np.zeros((n, n)) for n in sizes]
            return "optimal", X, np.zeros(0), [C.copy() for C in op.C], 1.0, 0.0, 0, []
        return "unbounded", None, None, None, 0.0, 1.0, 0, []

    scale = 10.0 * max(
        1.0,
        max((np.abs(T).max(initial=0.0) for T in op.tensors), default=0.0),
        np.abs(b).max(initial=0.0),
        max((np.abs(C).max(initial=0.0) for C in op.C), default=0.0),
    )
    X = [scale * np.eye(n) for n in sizes]
    S = [scale * np.eye(n) for n in sizes]
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + float(np.linalg.norm(b))
    norm_C = 1.0 + op.norm_obj()
    log = []

    for iteration in range(max_iters):
        mu = (sum(np.tensordot(Xl, Sl) for Xl, Sl in zip(X, S)) + tau * kappa) / (
            nu + 1
        )

        AX = op.apply(X)
        ATy = op.apply_adjoint(y)
        rp = b * tau - AX
        Rd = [C * tau - A - Sl for C, A, Sl in zip(op.C, ATy, S)]
        cx = op.inner_obj(X)
        by = float(b @ y)
        rg = by - cx - kappa

        # scaled (divide by tau) optimality measures
        pres = float(np.linalg.norm(AX / tau - b)) / norm_b
        dres = (
            float(np.sqrt(sum(np.sum((R / tau) ** 2) for R in Rd)))
            / norm_C
        )
        pobj = cx / tau
        dobj = by / tau
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        log.append(
            {
                "iter": iteration,
                "pobj": pobj,
                "dobj": dobj,
                "pres": pres,
                "dres": dres,
                "gap": gap,
                "tau": tau,
                "kappa": kappa,
                "rg": rg,
                "mu": mu,
            }
        )

        if pres <= tol and dres <= tol and gap <= tol:
            return "optimal", X, y, S, tau, kappa, iteration, log

        # certified infeasibility rays
        rd_norm = float(np.sqrt(sum(np.sum(R**2) for R in Rd)))
        if by > 0:
            if (tau * (norm_C - 1.0) + rd_norm) / by <= tol:
                return "infeasible", X, y, S, tau, kappa, iteration, log
        if cx < 0:
            rp_norm = float(np.linalg.norm(rp))
            if (tau * (norm_b - 1.0) + rp_norm) / (-cx) <= tol:
                return "unbounded", X, y, S, tau, kappa, iteration, log
        if tau / kappa <= TAU_KAPPA_RATIO:
            if by > 0:
                return "infeasible", X, y, S, tau, kappa, iteration, log
            if cx < 0:
                return "unbounded", X, y, S, tau, kappa, iteration, log
            raise _IpmFailure("tau collapsed without an infeasibility certificate", log=log)

        # Nesterov-Todd scaling per block
        R_list, Rinv_list, W_list, lam_list = [], [], [], []
        try:
            for Xl, Sl in zip(X, S):
                Lx = scipy.linalg.cholesky(Xl, lower=True, check_finite=False)
                Ls = scipy.linalg.cholesky(Sl, lower=True, check_finite=False)
                U, sv, Vt = scipy.linalg.svd(Ls.T @ Lx, check_finite=False)
                sv = np.maximum(sv, 1e-300)
                R = Lx @ Vt.T / np.sqrt(sv)[None, :]
                Lx_inv = scipy.linalg.solve_triangular(
                    Lx, np.eye(Xl.shape[0]), lower=True, check_finite=False
                )
                Rinv = np.sqrt(sv)[:, None] * (Vt @ Lx_inv)
                R_list.append(R)
                Rinv_list.append(Rinv)
                W_list.append(R @ R.T)
                lam_list.append(sv)
        except scipy.linalg.LinAlgError as exc:
            raise _IpmFailure(f"lost positive definiteness: {exc}", log=log) from exc

        # Schur complement M = A(W . W) A^T and cached pieces
        M = np.zeros((m, m))
        AWCW = np.zeros(m)
        WCW = []
        cc = 0.0
        AWRdW = np.zeros(m)
        CWRdW = 0.0
        for T, C, W, Rdl in zip(op.tensors, op.C, W_list, Rd):
            Z = np.einsum("ab,mbc,cd->mad", W, T, W, optimize=True)
            M += Z.reshape(m, -1) @ T.reshape(m, -1).T
            wcw = W @ C @ W
            WCW.append(wcw)
            AWCW += T.reshape(m, -1) @ wcw.reshape(-1)
            cc += float(np.tensordot(C, wcw))
            wrw = W @ Rdl @ W
            AWRdW += T.reshape(m, -1) @ wrw.reshape(-1)
            CWRdW += float(np.tensordot(C, wrw))
        M = _sym(M)
        try:
            M_cho = scipy.linalg.cho_factor(
                M + 1e-14 * (1.0 + np.trace(M) / m) * np.eye(m),
                lower=True,
                check_finite=False,
            )
        except scipy.linalg.LinAlgError as exc:
            raise _IpmFailure(f"Schur complement not positive definite: {exc}", log=log) from exc
        u = scipy.linalg.cho_solve(M_cho, AWCW + b, check_finite=False)

        def direction(gamma, G_list, rc2):
            RGRt = [R @ G @ R.T for R, G in zip(R_list, G_list)]
            ARGR = np.zeros(m)
            CRGR = 0.0
            for T, C, Rg in zip(op.tensors, op.C, RGRt):
                ARGR += T.reshape(m, -1) @ Rg.reshape(-1)
                CRGR += float(np.tensordot(C, Rg))
            rhs1 = (1.0 - gamma) * rp - ARGR + (1.0 - gamma) * AWRdW
            v = scipy.linalg.cho_solve(M_cho, rhs1, check_finite=False)
            bw = b - AWCW
            rhs2 = (
                (gamma - 1.0) * rg + CRGR - (1.0 - gamma) * CWRdW + rc2 / tau
            )
            denom = float(bw @ u) + cc + kappa / tau
            if abs(denom) < 1e-300:
                raise _IpmFailure("degenerate tau pivot")
            d_tau = (rhs2 - float(bw @ v)) / denom
            d_y = v + u * d_tau
            ATdy = op.apply_adjoint(d_y)
            d_S = [
                _sym(C * d_tau - A + (1.0 - gamma) * Rdl)
                for C, A, Rdl in zip(op.C, ATdy, Rd)
            ]
            d_X = [
                _sym(Rg - W @ dS @ W) for Rg, W, dS in zip(RGRt, W_list, d_S)
            ]
            d_kappa = (rc2 - kappa * d_tau) / tau
            return d_X, d_y, d_S, d_tau, d_kappa

        def max_step_all(d_X, d_S, d_tau, d_kappa):
            alpha = np.inf
            for Xl, dXl in zip(X, d_X):
                alpha = min(alpha, _max_step(Xl, dXl))
            for Sl, dSl in zip(S, d_S):
                alpha = min(alpha, _max_step(Sl, dSl))
            if d_tau < 0:
                alpha = min(alpha, tau / (-d_tau))
            if d_kappa < 0:
                alpha = min(alpha, kappa / (-d_kappa))
            return alpha

        # predictor (affine scaling) direction
        G_aff = [-np.diag(lam) for lam in lam_list]
        aff = direction(0.0, G_aff, -tau * kappa)
        a_aff = min(1.0, max_step_all(aff[0], aff[2], aff[3], aff[4]))

        # Mehrotra centering parameter from the affine trial point
        inner = 0.0
        for Xl, Sl, dXl, dSl in zip(X, S, aff[0], aff[2]):
            inner += float(
                np.tensordot(Xl + a_aff * dXl, Sl + a_aff * dSl)
            )
        mu_aff = (
            inner + (tau + a_aff * aff[3]) * (kappa + a_aff * aff[4])
        ) / (nu + 1)
        gamma = float(np.clip((mu_aff / mu) ** 3, 1e-10, 1.0 - 1e-10))

        # corrector terms in the scaled space
        G_comb = []
        for Rinv, R, lam, dXl, dSl in zip(
            Rinv_list, R_list, lam_list, aff[0], aff[2]
        ):
            dXbar = Rinv @ dXl @ Rinv.T
            dSbar = R.T @ dSl @ R
            H = _sym(dXbar @ dSbar)
            Rc = gamma * mu * np.eye(len(lam)) - np.diag(lam**2) - H
            G_comb.append(2.0 * Rc / (lam[:, None] + lam[None, :]))
        rc2 = gamma * mu - tau * kappa - aff[3] * aff[4]

        comb = direction(gamma, G_comb, rc2)
        alpha = min(1.0, 0.98 * max_step_all(comb[0], comb[2], comb[3], comb[4]))
        if alpha <= 1e-12:
            raise _IpmFailure("step length collapsed", log=log)

        X = [Xl + alpha * dXl for Xl, dXl in zip(X, comb[0])]
        y = y + alpha * comb[1]
        S = [Sl + alpha * dSl for Sl, dSl in zip(S, comb[2])]
        tau += alpha * comb[3]
        kappa += alpha * comb[4]

    raise _IpmFailure(f"no convergence within {max_iters} iterations", log=log)


# ----------------------------------------------------------------------------
# public solve with row equilibration and free-variable elimination


def solve(prob: SdpProblem, tol: float = 1e-8, max_iters: int = 200) -> SdpSolution:
    if not 0 < tol <= 1e-2:
        raise ValueError(f"tolerance must lie in (0, 1e-2], got {tol}")
    m = prob.m
    nf = prob.n_free

    # row equilibration to unit max-norm
    d = np.ones(m)
    for i, con in enumerate(prob.constraints):
        row_max = max(
            (np.abs(mat).max(initial=0.0) for mat in con.values()), default=0.0
        )
        if nf:
            row_max = max(row_max, np.abs(prob.free_cols[i]).max(initial=0.0))
        if row_max == 0.0:
            if prob.rhs[i] != 0.0:
                return _failure_solution("constraint with zero row and nonzero rhs")
            row_max = 1.0
        d[i] = 1.0 / row_max
    scaled_constraints = [
        {l: d[i] * mat for l, mat in con.items()} for i, con in enumerate(prob.constraints)
    ]
    b_s = d * prob.rhs

    op_full = _BlockOperator(prob.block_sizes, scaled_constraints, prob.obj_blocks)

    if nf == 0:
        Q = None
        op_red, b_red, obj_offset = op_full, b_s, 0.0
    else:
        F = d[:, None] * prob.free_cols
        Qmat, Rmat = np.linalg.qr(F, mode="complete")
        Rtop = Rmat[:nf, :]
        diag = np.abs(np.diag(Rtop))
        if diag.size == 0 or diag.min() <= 1e-12 * max(1.0, diag.max()):
            return _failure_solution("free-variable columns are rank deficient")
        P = Qmat.T
        rot_tensors = [np.tensordot(P, T, axes=1) for T in op_full.tensors]
        b_rot = P @ b_s
        g = scipy.linalg.solve_triangular(Rtop.T, prob.obj_free, lower=True)
        C_red = [
            C - np.einsum("k,kij->ij", g, T[:nf]) for C, T in zip(op_full.C, rot_tensors)
        ]
        obj_offset = float(g @ b_rot[:nf])
        op_red = _BlockOperator.__new__(_BlockOperator)
        op_red.sizes = op_full.sizes
        op_red.m = m - nf
        op_red.tensors = [T[nf:] for T in rot_tensors]
        op_red.C = C_red
        b_red = b_rot[nf:]
        Q = Qmat

    try:
        status, X, y_red, S, tau, kappa, iters, log = _solve_cone_program(
            op_red, b_red, tol, max_iters
        )
    except _IpmFailure as exc:
        return _failure_solution(str(exc), log=exc.log)

    if status == "optimal":
        Xs = [Xl / tau for Xl in X]
        Ss = [Sl / tau for Sl in S]
        y_s = y_red / tau
        if nf:
            top_T = [T[:nf] for T in rot_tensors]
            AtopX = np.zeros(nf)
            for T, Xl in zip(top_T, Xs):
                AtopX += T.reshape(nf, -1) @ Xl.reshape(-1)
            f = scipy.linalg.solve_triangular(Rtop, b_rot[:nf] - AtopX, lower=False)
            y_full = Q[:, :nf] @ g + Q[:, nf:] @ y_s
        else:
            f = np.zeros(0)
            y_full = y_s
        y_orig = d * y_full
        pobj, dobj, res = _original_residuals(prob, Xs, y_orig, Ss, f)
        return SdpSolution(
            status="optimal",
            primal_blocks=Xs,
            dual=y_orig,
            free_values=f,
            primal_objective=pobj,
            dual_objective=dobj,
            residuals=res,
            iterations=iters,
            iterate_log=log,
        )

    if status in ("infeasible", "unbounded"):
        ray = None
        if status == "infeasible" and y_red is not None:
            y_full = (Q[:, nf:] @ y_red) if nf else y_red
            ray = d * y_full
            scale = float(prob.rhs @ ray)
            if scale > 0:
                ray = ray / scale
        return SdpSolution(
            status=status,
            primal_blocks=None,
            dual=ray,
            free_values=None,
            primal_objective=np.nan,
            dual_objective=np.nan,
            residuals={},
            iterations=iters,
            iterate_log=log,
        )

    return _failure_solution("unclassified solver outcome")


def _failure_solution(message: str, log=None) -> SdpSolution:
    return SdpSolution(
        status="numerical-failure",
        primal_blocks=None,
        dual=None,
        free_values=None,
        primal_objective=np.nan,
        dual_objective=np.nan,
        residuals={"message": message},
        iterations=len(log or []),
        iterate_log=log or [],
    )


def _original_residuals(prob, Xs, y, Ss, f):
    op = _BlockOperator(prob.block_sizes, prob.constraints, prob.obj_blocks)
    Ax = op.apply(Xs)
    if prob.n_free:
        Ax = Ax + prob.free_cols @ f
    pres = float(np.linalg.norm(Ax - prob.rhs)) / (1.0 + np.linalg.norm(prob.rhs))
    ATy = op.apply_adjoint(y)
    dres_sq = sum(np.sum((A + Sl - C) ** 2) for A, Sl, C in zip(ATy, Ss, op.C))
    dres = float(np.sqrt(dres_sq)) / (1.0 + op.norm_obj())
    if prob.n_free:
        dres = max(
            dres,
            float(np.linalg.norm(prob.free_cols.T @ y - prob.obj_free))
            / (1.0 + np.linalg.norm(prob.obj_free)),
        )
    pobj = op.inner_obj(Xs) + (float(prob.obj_free @ f) if prob.n_free else 0.0)
    dobj = float(prob.rhs @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return pobj, dobj, {"primal": pres, "dual": dres, "gap": gap}


# ----------------------------------------------------------------------------
# SDPA sparse format


def export_sdpa(prob: SdpProblem, path) -> Path:
    """Write the problem in SDPA sparse format (.dat-s conventions).

    Entries are 1-indexed upper-triangle ``cons block i j value`` lines; the
    constant matrix (index 0) is the negated objective. Free variables become
    a trailing pair of diagonal blocks, announced by a ``*FREEVARS`` comment.
    """
    path = Path(path)
    nf = prob.n_free
    sizes = list(prob.block_sizes)
    lines = []
    if nf:
        lines.append(f"*FREEVARS {nf}")
        sizes = sizes + [-nf, -nf]
    lines.append(f"{prob.m}")
    lines.append(f"{len(sizes)}")
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(f"{v:.17g}" for v in prob.rhs))

    def emit(cons_idx, block_idx, mat):
        n = mat.shape[0]
        for i in range(n):
            for j in range(i, n):
                v = mat[i, j]
                if v != 0.0:
                    lines.append(
                        f"{cons_idx} {block_idx + 1} {i + 1} {j + 1} {v:.17g}"
                    )

    nb = len(prob.block_sizes)
    for l in sorted(prob.obj_blocks):
        emit(0, l, -np.asarray(prob.obj_blocks[l], dtype=float))
    if nf:
        for j in range(nf):
            v = prob.obj_free[j]
            if v != 0.0:
                lines.append(f"0 {nb + 1} {j + 1} {j + 1} {-v:.17g}")
                lines.append(f"0 {nb + 2} {j + 1} {j + 1} {v:.17g}")
    for i, con in enumerate(prob.constraints, start=1):
        for l in sorted(con):
            emit(i, l, np.asarray(con[l], dtype=float))
        if nf:
            for j in range(nf):
                v = prob.free_cols[i - 1, j]
                if v != 0.0:
                    lines.append(f"{i} {nb + 1} {j + 1} {j + 1} {v:.17g}")
                    lines.append(f"{i} {nb + 2} {j + 1} {j + 1} {-v:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_sdpa(path) -> SdpProblem:
    """Parse a file written by :func:`export_sdpa` back into an SdpProblem."""
    path = Path(path)
    nf = 0
    rows = []
    for raw in path.read_text(encoding="ascii").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("*") or line.startswith('"'):
            if line.startswith("*FREEVARS"):
                nf = int(line.split()[1])
            continue
        rows.append(line)
    m = int(rows[0])
    n_block = int(rows[1])
    sizes = [
        int(tok) for tok in rows[2].replace(",", " ").replace("{", " ").replace("}", " ").split()
    ]
    if len(sizes) != n_block:
        raise RkhsBarrierError("block structure line disagrees with block count")
    rhs = np.array([float(tok) for tok in rows[3].split()])
    if rhs.shape[0] != m:
        raise RkhsBarrierError("rhs length disagrees with constraint count")
    psd_sizes = sizes[:-2] if nf else sizes
    psd_sizes = [abs(s) for s in psd_sizes]
    mats = {}  # (cons, block) -> matrix
    for line in rows[4:]:
        toks = line.split()
        k, blk, i, j = (int(t) for t in toks[:4])
        v = float(toks[4])
        n = abs(sizes[blk - 1])
        key = (k, blk - 1)
        if key not in mats:
            mats[key] = np.zeros((n, n))
        mats[key][i - 1, j - 1] = v
        mats[key][j - 1, i - 1] = v

    def psd_parts(k):
        return {
            blk: mat for (kk, blk), mat in mats.items() if kk == k and blk < len(psd_sizes)
        }

    obj_blocks = {blk: -mat for blk, mat in psd_parts(0).items()}
    constraints = [psd_parts(k) for k in range(1, m + 1)]

    free_cols = None
    obj_free = None
    if nf:
        u_idx = len(psd_sizes)
        free_cols = np.zeros((m, nf))
        for k in range(1, m + 1):
            mat = mats.get((k, u_idx))
            if mat is not None:
                free_cols[k - 1] = np.diag(mat)
        obj_free = np.zeros(nf)
        mat0 = mats.get((0, u_idx))
        if mat0 is not None:
            obj_free = -np.diag(mat0)
    return SdpProblem(
        block_sizes=psd_sizes,
        constraints=constraints,
        rhs=rhs,
        obj_blocks=obj_blocks,
        free_cols=free_cols,
        obj_free=obj_free,
    )
