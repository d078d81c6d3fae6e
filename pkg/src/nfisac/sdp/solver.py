"""Primal-dual interior-point SDP solver on a homogeneous self-dual embedding.

The lowered problem (:func:`nfisac.sdp.problem.lower`) is

    min c.y   s.t.  A y = b,   s = h - G y,   s in K,

with K a product of a nonnegative orthant and dense PSD blocks.  The solver
follows the self-dual model of Ye/Todd/Mizuno: find (y, v, z, s, tau, kappa)
with

    A^T v + G^T z + c tau = 0
    -A y            + b tau = 0
    -G y - s        + h tau = 0
    -c.y - b.v - h.z - kappa = 0,    s, z in K,  tau, kappa >= 0,

driven to complementarity by Nesterov-Todd scaled Mehrotra predictor-corrector
steps.  tau > 0 at convergence yields an optimal pair (y, v, z)/tau; kappa > 0
yields a Farkas certificate: h.z + b.v < 0 proves infeasibility, c.y < 0
proves unboundedness.  Infeasibility of a problem is therefore detected by an
explicit improving-ray certificate rather than by timeout.

Reported residuals are absolute maxima over constraint violations computed at
the problem level (see :func:`compute_residuals`); `status == "optimal"`
guarantees they are within the configured tolerances.  One solve call is
single threaded and fully deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import kernels
from .problem import ConicProblem, CoreData, lower

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolverSettings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iterations: int = 200
    infeasibility_certificate_tol: float = 1e-7
    step_fraction: float = 0.98
    refine_steps: int = 2
    min_step: float = 1e-9
    verbose: bool = False

    def __post_init__(self):
        for name in (
            "feas_tol",
            "gap_tol",
            "max_iterations",
            "infeasibility_certificate_tol",
            "step_fraction",
            "min_step",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class DualValues:
    rows: np.ndarray
    lmis: list
    matrix_vars: list
    nonneg: dict


@dataclass
class SolverResult:
    status: str
    objective: float
    y: np.ndarray | None
    matrix_values: dict
    scalar_values: dict
    duals: DualValues | None
    residuals: tuple
    iterations: int
    mu: float
    certificate: dict | None = None

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


class ConeVec:
    """Point in R^md x Prod Sym(d_b): a scalar part and dense symmetric blocks."""

    __slots__ = ("d", "mats")

    def __init__(self, d, mats):
        self.d = d
        self.mats = mats

    @classmethod
    def identity(cls, core: CoreData) -> "ConeVec":
        return cls(
            np.ones(core.h_diag.shape[0]),
            [np.eye(b.dim) for b in core.blocks],
        )

    @classmethod
    def zeros(cls, core: CoreData) -> "ConeVec":
        return cls(
            np.zeros(core.h_diag.shape[0]),
            [np.zeros((b.dim, b.dim)) for b in core.blocks],
        )

    def copy(self) -> "ConeVec":
        return ConeVec(self.d.copy(), [m.copy() for m in self.mats])

    def __add__(self, o):
        return ConeVec(self.d + o.d, [a + b for a, b in zip(self.mats, o.mats)])

    def __sub__(self, o):
        return ConeVec(self.d - o.d, [a - b for a, b in zip(self.mats, o.mats)])

    def scale(self, a: float) -> "ConeVec":
        return ConeVec(a * self.d, [a * m for m in self.mats])

    def axpy(self, a: float, o: "ConeVec") -> None:
        self.d += a * o.d
        for m, om in zip(self.mats, o.mats):
            m += a * om

    def dot(self, o: "ConeVec") -> float:
        acc = float(self.d @ o.d)
        for a, b in zip(self.mats, o.mats):
            acc += float(np.tensordot(a, b))
        return acc

    def inf_norm(self) -> float:
        vals = [float(np.abs(self.d).max(initial=0.0))]
        vals += [float(np.abs(m).max(initial=0.0)) for m in self.mats]
        return max(vals)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


# ---------------------------------------------------------------------------
# linear operators of the lowered problem
# ---------------------------------------------------------------------------


def _h_vec(core: CoreData) -> ConeVec:
    return ConeVec(core.h_diag.copy(), [b.const.copy() for b in core.blocks])


def _g_apply(core: CoreData, y: np.ndarray) -> ConeVec:
    mats = [-kernels.block_apply(b, y) for b in core.blocks]
    return ConeVec(core.g_diag @ y, mats)


def _g_adjoint(core: CoreData, zv: ConeVec) -> np.ndarray:
    out = core.g_diag.T @ zv.d if zv.d.size else np.zeros(core.n)
    tmp = np.zeros(core.n)
    for b, z in zip(core.blocks, zv.mats):
        kernels.block_adjoint_into(b, z, tmp)
    return out - tmp


class _BlockScaling:
    __slots__ = ("r", "rinv", "lam", "winv", "w")

    def __init__(self, s_mat, z_mat):
        ls = np.linalg.cholesky(_sym(s_mat))
        m = ls.T @ _sym(z_mat) @ ls
        theta, vv = np.linalg.eigh(_sym(m))
        if theta[-1] <= 0.0:
            raise np.linalg.LinAlgError("scaled point not positive definite")
        # clamping the scaled spectrum keeps the factors finite when the
        # iterate drifts far off center; the full-system Newton refinement
        # absorbs the resulting direction bias
        theta = np.maximum(theta, 1e-14 * theta[-1])
        self.lam = np.sqrt(theta)
        q = vv * theta**-0.25
        self.r = ls @ q
        self.rinv = (q * theta**0.5).T @ np.linalg.inv(ls)
        # rinv = theta^{1/4} V^T Ls^{-1}; (q * theta**0.5)^T = theta^{1/4} V^T
        self.w = self.r @ self.r.T
        self.winv = self.rinv.T @ self.rinv


class _Scaling:
    __slots__ = ("w2", "blocks")

    def __init__(self, core: CoreData, s: ConeVec, z: ConeVec):
        if np.any(s.d <= 0.0) or np.any(z.d <= 0.0):
            raise np.linalg.LinAlgError("scalar iterate left the cone")
        self.w2 = s.d / z.d
        self.blocks = [
            _BlockScaling(sm, zm) for sm, zm in zip(s.mats, z.mats)
        ]

    def lam_apply(self, u: ConeVec) -> ConeVec:
        # W M W evaluated in factored form R (R^T M R) R^T: the error grows
        # with cond(R) = sqrt(cond(W)), which matters near convergence
        mats = [
            bs.r @ (bs.r.T @ m @ bs.r) @ bs.r.T
            for bs, m in zip(self.blocks, u.mats)
        ]
        return ConeVec(self.w2 * u.d, mats)

    def lam_inv_apply(self, u: ConeVec) -> ConeVec:
        mats = [
            bs.rinv.T @ (bs.rinv @ m @ bs.rinv.T) @ bs.rinv
            for bs, m in zip(self.blocks, u.mats)
        ]
        return ConeVec(u.d / self.w2, mats)


def _schur(core: CoreData, scaling: _Scaling) -> np.ndarray:
    n = core.n
    h = np.zeros((n, n))
    if core.g_diag.size:
        h += core.g_diag.T @ (core.g_diag / scaling.w2[:, None])
    for blk, bs in zip(core.blocks, scaling.blocks):
        sub = kernels.schur_block(bs.winv, blk)
        if blk.uniq.size:
            h[np.ix_(blk.uniq, blk.uniq)] += sub
    return h


def _max_step_scaled(lam: np.ndarray, dbar: np.ndarray) -> float:
    scale = np.sqrt(lam)
    b = dbar / np.outer(scale, scale)
    w = np.linalg.eigvalsh(_sym(b))[0]
    if w >= 0.0:
        return math.inf
    return -1.0 / w


def _min_complementarity(s: ConeVec, z: ConeVec) -> float:
    """Smallest eigenvalue-level complementarity product of a cone pair."""
    out = math.inf
    if s.d.size:
        out = float(np.min(s.d * z.d))
    for sm, zm in zip(s.mats, z.mats):
        try:
            ls = np.linalg.cholesky(_sym(sm))
        except np.linalg.LinAlgError:
            return -math.inf
        w = np.linalg.eigvalsh(_sym(ls.T @ _sym(zm) @ ls))
        out = min(out, float(w[0]))
    return out


def _max_step(
    scaling: _Scaling, s: ConeVec, z: ConeVec, ds: ConeVec, dz: ConeVec,
    tau, dtau, kappa, dkappa,
) -> float:
    alpha = math.inf
    for cur, step in ((s.d, ds.d), (z.d, dz.d)):
        neg = step < 0.0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-cur[neg] / step[neg])))
    for bs, dsm, dzm in zip(scaling.blocks, ds.mats, dz.mats):
        dsbar = bs.rinv @ dsm @ bs.rinv.T
        alpha = min(alpha, _max_step_scaled(bs.lam, dsbar))
        dzbar = bs.r.T @ dzm @ bs.r
        alpha = min(alpha, _max_step_scaled(bs.lam, dzbar))
    if dtau < 0.0:
        alpha = min(alpha, -tau / dtau)
    if dkappa < 0.0:
        alpha = min(alpha, -kappa / dkappa)
    return alpha


# ---------------------------------------------------------------------------
# problem-level residuals (shared by the solver's stopping test and check_kkt)
# ---------------------------------------------------------------------------


def compute_residuals(
    problem: ConicProblem,
    y: np.ndarray,
    duals: DualValues,
) -> tuple[float, float, float]:
    """Absolute KKT residuals of a primal/dual pair at the problem level.

    * primal: largest constraint violation (rows, LMIs, PSD variables,
      nonnegative scalars);
    * dual: largest stationarity violation of the Lagrangian of the
      maximization problem, together with dual cone violations;
    * gap: |primal objective - dual objective| / (1 + max(|p|, |d|)).
    """
    y = np.asarray(y, dtype=float)
    pres = 0.0
    for row in problem.rows:
        val = float(row.coeffs @ y) - row.rhs
        pres = max(pres, abs(val) if row.op == "==" else max(0.0, val))
    for lmi in problem.lmis:
        w = np.linalg.eigvalsh(_sym(lmi.evaluate(y)))[0]
        pres = max(pres, max(0.0, -float(w)))
    for var in problem.matrix_vars:
        m = var.to_matrix(y)
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        pres = max(pres, max(0.0, -float(w)))
    for _, idx in problem.nonneg_params:
        pres = max(pres, max(0.0, -float(y[idx])))

    st = problem.objective.copy()
    dviol = 0.0
    for row, lam in zip(problem.rows, duals.rows):
        st -= lam * row.coeffs
        if row.op == "<=":
            dviol = max(dviol, max(0.0, -float(lam)))
    for lmi, zm in zip(problem.lmis, duals.lmis):
        if lmi.param_ids.size:
            np.add.at(st, lmi.param_ids, lmi.vals * zm[lmi.rows, lmi.cols])
        dviol = max(dviol, max(0.0, -float(np.linalg.eigvalsh(_sym(zm))[0])))
    for var, sm in zip(problem.matrix_vars, duals.matrix_vars):
        pids, rows, cols, vals = _var_basis(var)
        np.add.at(st, pids, vals * sm[rows, cols])
        dviol = max(dviol, max(0.0, -float(np.linalg.eigvalsh(_sym(sm))[0])))
    for idx, eta in duals.nonneg.items():
        st[idx] += eta
        dviol = max(dviol, max(0.0, -float(eta)))
    dres = max(float(np.abs(st).max(initial=0.0)), dviol)

    pobj = float(problem.objective @ y)
    dobj = sum(
        float(lam) * row.rhs for row, lam in zip(problem.rows, duals.rows)
    )
    dobj += sum(
        float(np.tensordot(zm, lmi.const))
        for lmi, zm in zip(problem.lmis, duals.lmis)
    )
    gap = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
    return pres, dres, gap


def _var_basis(var):
    cached = getattr(var, "_basis_cache", None)
    if cached is None:
        cached = var.basis_coo()
        var._basis_cache = cached
    return cached


def check_kkt(problem: ConicProblem, result: SolverResult):
    """Recompute (primal_feas, dual_feas, duality_gap) from a result alone."""
    if result.y is None or result.duals is None:
        raise ValueError("result carries no primal/dual values")
    return compute_residuals(problem, result.y, result.duals)


# ---------------------------------------------------------------------------
# solution mapping
# ---------------------------------------------------------------------------


def _map_candidate(problem, core, y, v, z, tau):
    yhat = y / tau
    row_duals = np.zeros(len(problem.rows))
    nonneg_duals: dict[int, float] = {}
    for i, (kind, ref) in enumerate(core.diag_origin):
        if kind == "nonneg":
            nonneg_duals[ref] = float(z.d[i] / tau)
        else:
            row_duals[ref] = float(z.d[i] / tau)
    eq_indices = [i for i, r in enumerate(problem.rows) if r.op == "=="]
    for j, ri in enumerate(eq_indices):
        row_duals[ri] = float(v[j] / tau)
    lmi_duals, var_duals = [], []
    for blk, zm in zip(core.blocks, z.mats):
        if blk.origin[0] == "var":
            var_duals.append(zm / tau)
        else:
            lmi_duals.append(zm / tau)
    return yhat, DualValues(row_duals, lmi_duals, var_duals, nonneg_duals)


def _build_result(problem, status, yhat, duals, residuals, iterations, mu, cert=None):
    matrix_values = {}
    scalar_values = {}
    objective = math.nan
    if yhat is not None:
        for var in problem.matrix_vars:
            matrix_values[var.name] = var.to_matrix(yhat)
        for name, idx in problem.nonneg_params:
            scalar_values[name] = float(yhat[idx])
        for name, idx in problem.free_params:
            scalar_values[name] = float(yhat[idx])
        objective = float(problem.objective @ yhat)
    return SolverResult(
        status=status,
        objective=objective,
        y=yhat,
        matrix_values=matrix_values,
        scalar_values=scalar_values,
        duals=duals,
        residuals=residuals,
        iterations=iterations,
        mu=mu,
        certificate=cert,
    )


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------


def solve(problem: ConicProblem, settings: SolverSettings | None = None) -> SolverResult:
    """Solve a :class:`ConicProblem` (maximization), see module docstring."""
    settings = settings or SolverSettings()
    core = lower(problem)
    n, me, md = core.n, core.b_eq.shape[0], core.h_diag.shape[0]
    hv = _h_vec(core)
    h_norm = max(1.0, hv.inf_norm())
    c_norm = max(1.0, float(np.abs(core.c).max(initial=0.0)))

    y = np.zeros(n)
    v = np.zeros(me)
    s = ConeVec.identity(core)
    z = ConeVec.identity(core)
    tau, kappa = 1.0, 1.0
    deg = core.cone_degree + 1
    mu0 = (s.dot(z) + tau * kappa) / deg
    mu = mu0

    best = None  # (score, yhat, duals, residuals, iteration)
    status = MAX_ITER
    cert = None
    iterations = 0

    for it in range(1, settings.max_iterations + 1):
        iterations = it
        gty = _g_apply(core, y)
        rho_y = _g_adjoint(core, z) + core.c * tau
        if me:
            rho_y += core.a_eq.T @ v
        rho_v = -(core.a_eq @ y) + core.b_eq * tau if me else np.zeros(0)
        rho_z = hv.scale(tau) - gty - s
        h_dot_z = hv.dot(z)
        rho_t = -float(core.c @ y) - float(core.b_eq @ v) - h_dot_z - kappa
        mu = (s.dot(z) + tau * kappa) / deg

        # -- optimality test on the mapped candidate
        if tau > 1e-12 * max(1.0, kappa) and mu < 1e-2 * mu0 + 1e-12:
            yhat, duals = _map_candidate(problem, core, y, v, z, tau)
            residuals = compute_residuals(problem, yhat, duals)
            score = max(residuals[0], residuals[1], residuals[2])
            if best is None or score < best[0]:
                best = (score, yhat, duals, residuals, it)
            if (
                residuals[0] <= settings.feas_tol
                and residuals[1] <= settings.feas_tol
                and residuals[2] <= settings.gap_tol
            ):
                return _build_result(
                    problem, OPTIMAL, yhat, duals, residuals, it, mu
                )

        # -- certificate tests
        ip_num = -(h_dot_z + float(core.b_eq @ v))
        if ip_num > 0.0:
            res = _g_adjoint(core, z)
            if me:
                res = res + core.a_eq.T @ v
            quality = float(np.abs(res).max(initial=0.0)) * h_norm / ip_num
            if quality <= settings.infeasibility_certificate_tol:
                _, duals = _map_candidate(problem, core, y, v, z, max(ip_num, 1e-300))
                cert = {"kind": "primal_infeasible", "quality": quality}
                return _build_result(
                    problem, INFEASIBLE, None, duals, (math.inf, 0.0, 0.0), it, mu, cert
                )
        un_num = -float(core.c @ y)
        if un_num > 0.0:
            ray_res = (gty + s).inf_norm()
            if me:
                ray_res = max(ray_res, float(np.abs(core.a_eq @ y).max(initial=0.0)))
            quality = ray_res * c_norm / un_num
            if quality <= settings.infeasibility_certificate_tol:
                cert = {"kind": "unbounded", "quality": quality, "ray": y / un_num}
                return _build_result(
                    problem, UNBOUNDED, None, None, (0.0, math.inf, 0.0), it, mu, cert
                )

        if mu < 1e-16 * mu0:
            status = NUMERICAL_FAILURE
            break

        # -- Nesterov-Todd scaling and KKT factorization
        try:
            scaling = _Scaling(core, s, z)
            hmat = _schur(core, scaling)
            qh = scaling.lam_inv_apply(hv)
            g1 = _g_adjoint(core, qh)
            g2 = hv.dot(qh)
            dim = n + me + 1
            kkt = np.zeros((dim, dim))
            kkt[:n, :n] = hmat
            if me:
                kkt[:n, n : n + me] = core.a_eq.T
                kkt[n : n + me, :n] = core.a_eq
                kkt[n : n + me, -1] = -core.b_eq
                kkt[-1, n : n + me] = -core.b_eq
            kkt[:n, -1] = core.c - g1
            kkt[-1, :n] = -(core.c + g1)
            kkt[-1, -1] = g2 + kappa / tau
            # signed static regularization keeps the factorization alive when
            # the scaled system degenerates near convergence; the full-system
            # Newton refinement absorbs the perturbation.  If a factorization
            # still comes out singular (catastrophic cancellation can zero
            # the tau pivot exactly), escalate the regularization.
            reg = 1e-12 * max(1.0, core.data_norm)
            ii = np.arange(n)
            probe = np.ones(dim)
            for _ in range(4):
                kkt_reg = kkt.copy()
                kkt_reg[ii, ii] += reg
                if me:
                    jj = np.arange(n, n + me)
                    kkt_reg[jj, jj] -= reg
                kkt_reg[-1, -1] += reg
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    lu = lu_factor(kkt_reg)
                if np.all(np.isfinite(lu_solve(lu, probe))):
                    break
                reg *= 1e4
            kkt = kkt_reg
        except np.linalg.LinAlgError as exc:
            warnings.warn(f"interior-point factorization failed: {exc}")
            status = NUMERICAL_FAILURE
            break

        def newton_general(b1, b2, b3: ConeVec, b4: ConeVec, b5, b6):
            """Solve one linearized self-dual system:
            A^T dv + G^T dz + c dtau = b1;  A dy - b dtau = b2;
            -G dy + h dtau - ds = b3;  ds + W dz W = b4;
            dkappa + (kappa/tau) dtau = b5;
            -c.dy - b.dv - h.dz - dkappa = b6.
            """
            q2 = scaling.lam_inv_apply(b3 + b4)
            rhs = np.empty(dim)
            rhs[:n] = b1 - _g_adjoint(core, q2)
            if me:
                rhs[n : n + me] = b2
            rhs[-1] = b6 + b5 + hv.dot(q2)
            sol = lu_solve(lu, rhs)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError("singular KKT system")
            for _ in range(2):
                err = rhs - kkt @ sol
                if float(np.abs(err).max()) <= 1e-14 * max(1.0, float(np.abs(rhs).max())):
                    break
                upd = lu_solve(lu, err)
                if not np.all(np.isfinite(upd)):
                    break
                sol = sol + upd
            dy = sol[:n]
            dv = sol[n : n + me]
            dtau = float(sol[-1])
            gdy = _g_apply(core, dy)
            dz = scaling.lam_inv_apply((b3 + b4) + gdy - hv.scale(dtau))
            ds = b4 - scaling.lam_apply(dz)
            dkappa = b5 - (kappa / tau) * dtau
            return [dy, dv, dz, ds, dtau, dkappa]

        def newton(gamma, rc: ConeVec, rkt: float):
            """Direction with residual reduction gamma plus iterative
            refinement measured against the true operators (the formed Schur
            matrix loses accuracy as the scaling degenerates)."""
            b1 = -gamma * rho_y
            b2 = gamma * rho_v
            b3 = rho_z.scale(-gamma)
            b4 = rc
            b5 = rkt
            b6 = -gamma * rho_t
            d = newton_general(b1, b2, b3, b4, b5, b6)
            for _ in range(settings.refine_steps):
                dy, dv, dz, ds, dtau, dkappa = d
                r1 = b1 - (_g_adjoint(core, dz) + core.c * dtau)
                if me:
                    r1 -= core.a_eq.T @ dv
                    r2 = b2 - (core.a_eq @ dy - core.b_eq * dtau)
                else:
                    r2 = b2
                r3 = b3 - (hv.scale(dtau) - _g_apply(core, dy) - ds)
                r4 = b4 - (ds + scaling.lam_apply(dz))
                r5 = b5 - (dkappa + (kappa / tau) * dtau)
                r6 = b6 - (
                    -float(core.c @ dy) - float(core.b_eq @ dv) - hv.dot(dz) - dkappa
                )
                err = max(
                    float(np.abs(r1).max(initial=0.0)),
                    float(np.abs(r2).max(initial=0.0)),
                    r3.inf_norm(),
                    r4.inf_norm(),
                    abs(r5),
                    abs(r6),
                )
                if err <= 1e-13 * max(1.0, core.data_norm):
                    break
                corr = newton_general(r1, r2, r3, r4, r5, r6)
                d = [
                    d[0] + corr[0],
                    d[1] + corr[1],
                    d[2] + corr[2],
                    d[3] + corr[3],
                    d[4] + corr[4],
                    d[5] + corr[5],
                ]
            return d

        # predictor
        try:
            rc_aff = s.scale(-1.0)
            dy_a, dv_a, dz_a, ds_a, dtau_a, dkap_a = newton(1.0, rc_aff, -kappa)
        except np.linalg.LinAlgError:
            status = NUMERICAL_FAILURE
            break
        alpha_aff = min(
            1.0, _max_step(scaling, s, z, ds_a, dz_a, tau, dtau_a, kappa, dkap_a)
        )
        mu_aff = (
            (s + ds_a.scale(alpha_aff)).dot(z + dz_a.scale(alpha_aff))
            + (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkap_a)
        ) / deg
        # the floor keeps late iterations from outrunning the dual accuracy
        sigma = min(0.999, max(0.02, (max(mu_aff, 0.0) / mu) ** 3))

        # corrector (Mehrotra second order in the scaled space)
        rc_d = (sigma * mu - s.d * z.d - ds_a.d * dz_a.d) / z.d
        rc_mats = []
        for bs, dsm, dzm in zip(scaling.blocks, ds_a.mats, dz_a.mats):
            dsbar = bs.rinv @ dsm @ bs.rinv.T
            dzbar = bs.r.T @ dzm @ bs.r
            mc = -_sym(dsbar @ dzbar)
            mc[np.diag_indices_from(mc)] += sigma * mu - bs.lam**2
            x = 2.0 * mc / np.add.outer(bs.lam, bs.lam)
            rc_mats.append(bs.r @ x @ bs.r.T)
        rc = ConeVec(rc_d, rc_mats)
        rkt = (sigma * mu - tau * kappa - dtau_a * dkap_a) / tau

        try:
            dy, dv, dz, ds, dtau, dkappa = newton(1.0 - sigma, rc, rkt)
        except np.linalg.LinAlgError:
            status = NUMERICAL_FAILURE
            break
        alpha = settings.step_fraction * _max_step(
            scaling, s, z, ds, dz, tau, dtau, kappa, dkappa
        )
        alpha = min(1.0, alpha)
        if alpha < 0.05:
            # combined step blocked near the cone boundary: fall back to a
            # pure centering step to restore progress on the next iteration
            rc_c_mats = []
            for bs in scaling.blocks:
                mc = np.diag(mu - bs.lam**2)
                x = 2.0 * mc / np.add.outer(bs.lam, bs.lam)
                rc_c_mats.append(bs.r @ x @ bs.r.T)
            rc_c = ConeVec((mu - s.d * z.d) / z.d, rc_c_mats)
            try:
                cand = newton(0.0, rc_c, (mu - tau * kappa) / tau)
            except np.linalg.LinAlgError:
                cand = None
            if cand is not None:
                alpha_c = min(
                    1.0,
                    settings.step_fraction
                    * _max_step(
                        scaling, s, z, cand[3], cand[2], tau, cand[4], kappa, cand[5]
                    ),
                )
                if alpha_c > alpha:
                    dy, dv, dz, ds, dtau, dkappa = cand
                    alpha = alpha_c
        if not math.isfinite(alpha) or alpha < settings.min_step:
            status = NUMERICAL_FAILURE
            break

        # neighborhood backoff: keep the smallest complementarity pair from
        # collapsing many orders below the average, which would wreck the
        # next scaling
        for _ in range(12):
            s_try = s + ds.scale(alpha)
            z_try = z + dz.scale(alpha)
            mu_try = (
                s_try.dot(z_try) + (tau + alpha * dtau) * (kappa + alpha * dkappa)
            ) / deg
            if mu_try > 0.0 and _min_complementarity(s_try, z_try) >= 1e-4 * mu_try:
                break
            alpha *= 0.8
        if alpha < settings.min_step:
            status = NUMERICAL_FAILURE
            break

        y += alpha * dy
        if me:
            v += alpha * dv
        s.axpy(alpha, ds)
        z.axpy(alpha, dz)
        tau += alpha * dtau
        kappa += alpha * dkappa

        if settings.verbose:
            print(
                f"  it {it:3d}  mu {mu:9.2e}  alpha {alpha:6.3f} "
                f"sigma {sigma:6.3f}  tau {tau:9.2e}  kappa {kappa:9.2e}"
            )

    # loop fell through: report the best candidate seen
    if best is not None:
        _, yhat, duals, residuals, _ = best
        return _build_result(problem, status, yhat, duals, residuals, iterations, mu)
    if tau > 1e-300:
        yhat, duals = _map_candidate(problem, core, y, v, z, tau)
        residuals = compute_residuals(problem, yhat, duals)
        return _build_result(problem, status, yhat, duals, residuals, iterations, mu)
    return _build_result(
        problem, status, None, None, (math.inf, math.inf, math.inf), iterations, mu
    )
