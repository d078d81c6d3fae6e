"""Independent certification of robust constraints.

Nothing here shares code with the S-procedure/SDP pipeline: worst cases over
the CSI error ball are computed by an *exact* trust-region subproblem oracle
(eigendecomposition plus a safeguarded secular-equation Newton iteration,
with explicit hard-case handling), worst/best-case SINRs by bisection on the
threshold, and everything is additionally falsifiable by boundary-biased
Monte Carlo sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CsiEstimate, Scenario, unit_complex_vector
from .metrics import (
    BeamformingSolution,
    beampattern_gain,
    hermitian_part,
    nominal_cu_sinr,
    nominal_eve_sinr,
    total_power,
)
from . import robust

_HARD_CASE_TOL = 1e-10  # orthogonality detection on the minimal eigenspace


@dataclass
class TrustRegionResult:
    min_value: float
    argmin: np.ndarray
    multiplier: float
    boundary_active: bool


def trust_region_min(a: np.ndarray, b: np.ndarray, c: float, radius: float) -> TrustRegionResult:
    """Global minimum of d^H A d + 2 Re(b^H d) + c over ||d|| <= radius.

    A may be indefinite (Hermitian complex or symmetric real).  The global
    solution is d = -(A + nu I)^+ b with nu >= max(0, -lambda_min) chosen so
    that either nu = 0 and the unconstrained minimizer is interior, or
    ||d|| = radius (secular equation); when b is orthogonal to the minimal
    eigenspace and the pseudoinverse step is short (hard case), a minimal
    eigenspace component tops the step up to the boundary.
    """
    a = np.asarray(a)
    b = np.asarray(b).reshape(-1)
    n = b.shape[0]
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    ah = 0.5 * (a + a.conj().T)
    if radius == 0.0:
        return TrustRegionResult(float(c), np.zeros(n, dtype=ah.dtype), 0.0, True)
    lam, u = np.linalg.eigh(ah)
    bt = u.conj().T @ b

    def point(nu: float) -> np.ndarray:
        denom = lam + nu
        coef = np.zeros_like(bt)
        ok = denom > 0.0
        coef[ok] = bt[ok] / denom[ok]
        return -(u @ coef)

    def value(d: np.ndarray) -> float:
        return float(np.real(d.conj() @ ah @ d) + 2.0 * np.real(b.conj() @ d) + c)

    def norm_at(nu: float) -> float:
        denom = lam + nu
        if np.any((denom <= 0.0) & (np.abs(bt) > 0.0)):
            return math.inf
        ok = denom > 0.0
        return float(np.sqrt(np.sum(np.abs(bt[ok]) ** 2 / denom[ok] ** 2)))

    # interior minimizer
    if lam[0] > 0.0:
        d0 = point(0.0)
        nrm = float(np.linalg.norm(d0))
        if nrm <= radius:
            return TrustRegionResult(
                value(d0), d0, 0.0, abs(nrm - radius) <= 1e-8 * max(1.0, radius)
            )

    nu_min = max(0.0, -float(lam[0]))
    scale = max(1.0, float(np.abs(lam).max()))

    # hard case: negligible b-component on the minimal eigenspace and the
    # pseudoinverse step does not reach the boundary
    if lam[0] <= 0.0:
        gap = 1e-12 * scale
        active = lam <= lam[0] + gap
        b_active = float(np.linalg.norm(bt[active]))
        if b_active <= _HARD_CASE_TOL * max(1.0, float(np.linalg.norm(b))):
            denom = lam + nu_min
            ok = ~active & (denom > 0.0)
            phi_perp = float(np.sum(np.abs(bt[ok]) ** 2 / denom[ok] ** 2))
            if phi_perp <= radius * radius:
                coef = np.zeros_like(bt)
                coef[ok] = bt[ok] / denom[ok]
                d = -(u @ coef)
                alpha = math.sqrt(max(0.0, radius * radius - phi_perp))
                d = d + alpha * u[:, int(np.argmax(active))]
                return TrustRegionResult(value(d), d, nu_min, True)

    # regular boundary case: solve ||point(nu)|| = radius for nu > nu_min
    b_norm = float(np.linalg.norm(b))
    lo = nu_min
    hi = nu_min + b_norm / radius + 1e-30
    while norm_at(hi) > radius:
        hi = nu_min + 2.0 * (hi - nu_min)
    nu = 0.5 * (lo + hi)
    for _ in range(100):
        nrm = norm_at(nu)
        if nrm > radius:
            lo = nu
        else:
            hi = nu
        if abs(nrm - radius) <= 1e-13 * radius:
            break
        # Newton on 1/||p(nu)|| - 1/radius (More-Sorensen reformulation)
        denom = lam + nu
        ok = denom > 0.0
        if nrm == 0.0 or not math.isfinite(nrm) or not np.any(ok):
            nu = 0.5 * (lo + hi)
            continue
        dphi = -2.0 * float(np.sum(np.abs(bt[ok]) ** 2 / denom[ok] ** 3))
        f = 1.0 / nrm - 1.0 / radius
        fp = -0.5 * dphi / nrm**3
        step = -f / fp if fp != 0.0 else 0.0
        cand = nu + step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        nu = cand
    d = point(nu)
    # land exactly on the boundary to kill line-search residue
    nrm = float(np.linalg.norm(d))
    if nrm > 0.0:
        d = d * (radius / nrm)
    return TrustRegionResult(value(d), d, nu, True)


def worst_case_beampattern(sol: BeamformingSolution, est: CsiEstimate) -> float:
    """Minimum beampattern gain over the target's CSI error ball."""
    psi = hermitian_part(sum(sol.comm_covariances) + sol.sensing_covariance)
    h = est.vector
    res = trust_region_min(
        psi, psi @ h, float(np.real(h.conj() @ psi @ h)), est.error_bound
    )
    return res.min_value


def _sinr_quadratic(sol: BeamformingSolution, k: int, gamma: float, noise_power: float):
    """Matrix/vector/scalar of h^H W_k h - gamma*(interference + noise) as a
    quadratic in the channel error around the estimate (filled in by caller)."""
    a = np.array(sol.comm_covariances[k], dtype=complex)
    for i, w in enumerate(sol.comm_covariances):
        if i != k:
            a -= gamma * w
    a -= gamma * sol.sensing_covariance
    return hermitian_part(a), -gamma * noise_power


def worst_case_cu_sinr(
    sol: BeamformingSolution, est: CsiEstimate, k: int, noise_power: float,
    rel_tol: float = 1e-6,
) -> float:
    """Worst-case SINR of CU k over its error ball, by bisection.

    For a candidate threshold gamma the robust feasibility test
    min_{||d||<=eps} (h+d)^H (W_k - gamma*(sum_{i!=k} W_i + R0)) (h+d)
    - gamma sigma^2 >= 0 is monotone in gamma, so the largest passing gamma is
    the worst-case SINR; the returned value is a certified lower bound within
    ``rel_tol`` relative bisection width and never exceeds the nominal SINR.
    """
    h = est.vector
    nominal = nominal_cu_sinr(sol, h, k, noise_power)
    if est.error_bound == 0.0 or nominal == 0.0:
        return nominal

    def holds(gamma: float) -> bool:
        a, const = _sinr_quadratic(sol, k, gamma, noise_power)
        res = trust_region_min(
            a, a @ h, float(np.real(h.conj() @ a @ h)) + const, est.error_bound
        )
        return res.min_value >= 0.0

    lo, hi = 0.0, nominal
    if holds(hi):
        return nominal
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def best_case_eve_sinr(
    sol: BeamformingSolution, est: CsiEstimate, k: int, noise_power: float,
    rel_tol: float = 1e-6,
) -> float:
    """Best-case (largest) SINR an eavesdropper attains on CU k's stream.

    Mirror of :func:`worst_case_cu_sinr` with maximization semantics; the
    bisection bracket is closed from above by the analytic bound
    (||h|| + eps)^2 lambda_max(W_k) / sigma^2 = (1 + eps/||h||)^2 ||h||^2
    lambda_max / sigma^2, and the returned value is a certified upper bound,
    hence >= the nominal SINR.
    """
    h = est.vector
    nominal = nominal_eve_sinr(sol, h, k, noise_power)
    if est.error_bound == 0.0:
        return nominal
    wk = hermitian_part(sol.comm_covariances[k])
    lam_max = float(np.linalg.eigvalsh(wk)[-1])
    if lam_max <= 0.0:
        return nominal

    def leaks_at_most(gamma: float) -> bool:
        a, const = _sinr_quadratic(sol, k, gamma, noise_power)
        res = trust_region_min(
            -a, -(a @ h), -(float(np.real(h.conj() @ a @ h)) + const),
            est.error_bound,
        )
        return res.min_value >= 0.0

    hnorm = float(np.linalg.norm(h))
    hi = (hnorm + est.error_bound) ** 2 * lam_max / noise_power + 1.0
    lo = nominal
    if leaks_at_most(lo):
        return nominal
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if leaks_at_most(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Monte Carlo falsification
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloReport:
    samples: int
    cu_violations: list
    eve_violations: list  # [l][k]
    target_violations: list
    worst_cu_sinr: list
    worst_eve_sinr: list  # best case found, [l][k]
    worst_target_gain: list

    @property
    def total_violations(self) -> int:
        nested = sum(sum(row) for row in self.eve_violations)
        return sum(self.cu_violations) + nested + sum(self.target_violations)


def _error_batch(eps, n, count, rng, radius_fraction):
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radius_fraction * eps * g


def _quad_batch(h: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("sn,nm,sm->s", h.conj(), a, h).real


def monte_carlo_check(
    sol: BeamformingSolution,
    scenario: Scenario,
    samples: int = 10_000,
    seed: int = 0,
    radius_fraction: float = 1.0,
    rel_tol: float = 1e-6,
) -> MonteCarloReport:
    """Count constraint violations over boundary-biased random error draws.

    Per entity, ``samples`` errors are drawn uniformly on the sphere of radius
    ``radius_fraction * eps``; a CU sample violates when its SINR drops below
    gamma*(1 - rel_tol), an eavesdropper sample when the leakage exceeds
    gamma*(1 + rel_tol), a target sample when the gain drops below
    t*(1 - rel_tol).  Deterministic for a fixed seed.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    n = scenario.geometry.antenna_count
    covs = [hermitian_part(w) for w in sol.comm_covariances]
    r0 = hermitian_part(sol.sensing_covariance)
    psi = sum(covs) + r0

    cu_viol, cu_worst = [], []
    for k, cu in enumerate(scenario.cus):
        h = cu.csi.vector + _error_batch(
            cu.csi.error_bound, n, samples, rng, radius_fraction
        )
        num = _quad_batch(h, covs[k])
        den = _quad_batch(h, psi - covs[k]) + cu.noise_power
        sinr = num / den
        cu_viol.append(int(np.sum(sinr < cu.sinr_min * (1.0 - rel_tol))))
        cu_worst.append(float(sinr.min()))

    eve_viol, eve_worst = [], []
    for eve in scenario.eves:
        h = eve.csi.vector + _error_batch(
            eve.csi.error_bound, n, samples, rng, radius_fraction
        )
        row_v, row_w = [], []
        for k in range(scenario.num_cus):
            num = _quad_batch(h, covs[k])
            den = _quad_batch(h, psi - covs[k]) + eve.noise_power
            sinr = num / den
            row_v.append(int(np.sum(sinr > eve.leak_max[k] * (1.0 + rel_tol))))
            row_w.append(float(sinr.max()))
        eve_viol.append(row_v)
        eve_worst.append(row_w)

    tgt_viol, tgt_worst = [], []
    for tgt in scenario.targets:
        h = tgt.csi.vector + _error_batch(
            tgt.csi.error_bound, n, samples, rng, radius_fraction
        )
        gain = _quad_batch(h, psi)
        tgt_viol.append(int(np.sum(gain < sol.objective * (1.0 - rel_tol))))
        tgt_worst.append(float(gain.min()))

    return MonteCarloReport(
        samples, cu_viol, eve_viol, tgt_viol, cu_worst, eve_worst, tgt_worst
    )


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------


@dataclass
class RobustnessReport:
    power: float
    power_slack: float
    rank_ratios: list
    target_gains: list
    target_slacks: list
    cu_sinrs: list
    cu_slacks: list
    eve_sinrs: list  # [l][k]
    eve_slacks: list
    lmi_min_eigs: dict
    monte_carlo: MonteCarloReport | None
    passed: bool
    slack_tol: float
    power_tol: float

    @property
    def min_cu_slack(self) -> float:
        return min(self.cu_slacks, default=math.inf)

    @property
    def max_eve_excess(self) -> float:
        """Largest leakage excess over its threshold (negative = margin)."""
        return max((-s for row in self.eve_slacks for s in row), default=-math.inf)

    def to_text(self) -> str:
        lines = [
            f"power_w {self.power!r}",
            f"power_slack_w {self.power_slack!r}",
            f"pass {self.passed}",
        ]
        for k, r in enumerate(self.rank_ratios):
            lines.append(f"rank_ratio_cu{k + 1} {r!r}")
        for m, (g, s) in enumerate(zip(self.target_gains, self.target_slacks)):
            lines.append(f"target{m + 1}_worst_gain_w {g!r}")
            lines.append(f"target{m + 1}_slack_w {s!r}")
        for k, (g, s) in enumerate(zip(self.cu_sinrs, self.cu_slacks)):
            lines.append(f"cu{k + 1}_worst_sinr {g!r}")
            lines.append(f"cu{k + 1}_slack {s!r}")
        for l, (row_g, row_s) in enumerate(zip(self.eve_sinrs, self.eve_slacks)):
            for k, (g, s) in enumerate(zip(row_g, row_s)):
                lines.append(f"eve{l + 1}_cu{k + 1}_best_sinr {g!r}")
                lines.append(f"eve{l + 1}_cu{k + 1}_slack {s!r}")
        for tag, w in sorted(self.lmi_min_eigs.items()):
            lines.append(f"lmi_min_eig {tag} {w!r}")
        if self.monte_carlo is not None:
            lines.append(f"mc_samples {self.monte_carlo.samples}")
            lines.append(f"mc_violations {self.monte_carlo.total_violations}")
        return "\n".join(lines) + "\n"


def _rank_ratio(w: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(hermitian_part(w))
    if lam[-1] <= 0.0:
        return 0.0
    if lam.shape[0] == 1:
        return 0.0
    return float(max(0.0, lam[-2]) / lam[-1])


def validate(
    sol: BeamformingSolution,
    scenario: Scenario,
    mc_samples: int = 10_000,
    seed: int = 0,
    slack_tol: float = 1e-6,
    power_tol: float = 1e-9,
) -> RobustnessReport:
    """Full certification: power, rank ratios, oracle worst cases, LMI
    eigenvalues at the returned multipliers, and Monte Carlo counts.

    ``passed`` requires every oracle slack >= -slack_tol, transmit power
    within power_tol of the budget, and zero Monte Carlo violations.
    """
    kk, ll, mm = scenario.num_cus, scenario.num_eves, scenario.num_targets
    power = total_power(sol)
    power_slack = scenario.power_budget - power

    # bisection an order tighter than the pass tolerance so the reported
    # slacks are not dominated by bracket width
    bis_tol = min(1e-8, slack_tol * 1e-2)
    target_gains = [
        worst_case_beampattern(sol, tgt.csi) for tgt in scenario.targets
    ]
    target_slacks = [g - sol.objective for g in target_gains]
    cu_sinrs = [
        worst_case_cu_sinr(sol, cu.csi, k, cu.noise_power, rel_tol=bis_tol)
        for k, cu in enumerate(scenario.cus)
    ]
    cu_slacks = [s - cu.sinr_min for s, cu in zip(cu_sinrs, scenario.cus)]
    eve_sinrs, eve_slacks = [], []
    for eve in scenario.eves:
        row = [
            best_case_eve_sinr(sol, eve.csi, k, eve.noise_power, rel_tol=bis_tol)
            for k in range(kk)
        ]
        eve_sinrs.append(row)
        eve_slacks.append([eve.leak_max[k] - row[k] for k in range(kk)])

    lmi_eigs = {}
    w, r0 = sol.comm_covariances, sol.sensing_covariance
    psi = robust.psi_total(w, r0)
    mu = sol.slacks
    for k, cu in enumerate(scenario.cus):
        if cu.csi.error_bound > 0.0:
            blk = robust.lmi_cu(
                robust.psi_cu(w, r0, k, cu.sinr_min),
                cu.csi.vector, cu.csi.error_bound, cu.noise_power, float(mu[k]),
            )
            lmi_eigs[f"cu_{k + 1}"] = blk.min_eigenvalue()
    for l, eve in enumerate(scenario.eves):
        if eve.csi.error_bound > 0.0:
            for k in range(kk):
                blk = robust.lmi_eve(
                    robust.psi_eve(w, r0, k, eve.leak_max[k]),
                    eve.csi.vector, eve.csi.error_bound, eve.noise_power,
                    float(mu[kk + l * kk + k]),
                )
                lmi_eigs[f"eve_{l + 1}_{k + 1}"] = blk.min_eigenvalue()
    for m, tgt in enumerate(scenario.targets):
        if tgt.csi.error_bound > 0.0:
            blk = robust.lmi_target(
                psi, tgt.csi.vector, tgt.csi.error_bound,
                sol.objective, float(mu[kk + ll * kk + m]),
            )
            lmi_eigs[f"target_{m + 1}"] = blk.min_eigenvalue()

    mc = (
        monte_carlo_check(sol, scenario, mc_samples, seed)
        if mc_samples > 0
        else None
    )

    slacks_ok = (
        all(s >= -slack_tol for s in target_slacks)
        and all(s >= -slack_tol for s in cu_slacks)
        and all(s >= -slack_tol for row in eve_slacks for s in row)
    )
    passed = (
        slacks_ok
        and power_slack >= -power_tol
        and (mc is None or mc.total_violations == 0)
    )
    return RobustnessReport(
        power=power,
        power_slack=power_slack,
        rank_ratios=[_rank_ratio(wk) for wk in sol.comm_covariances],
        target_gains=target_gains,
        target_slacks=target_slacks,
        cu_sinrs=cu_sinrs,
        cu_slacks=cu_slacks,
        eve_sinrs=eve_sinrs,
        eve_slacks=eve_slacks,
        lmi_min_eigs=lmi_eigs,
        monte_carlo=mc,
        passed=passed,
        slack_tol=slack_tol,
        power_tol=power_tol,
    )
