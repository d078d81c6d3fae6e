"""Sequential rank-one constraint relaxation driver.

The rank-one constraints rank(W_k) = 1 are equivalent to
lambda_max(W_k) = tr(W_k).  Starting from the rank-relaxed solution, each
iteration solves the LMI problem with one linear eigenvector cut per CU,

    u_k^H W_k u_k >= v_k tr(W_k),

where u_k is the leading eigenvector of the previously adopted W_k.  A
feasible solve is adopted and the relaxation level is advanced to
v_k = min(1, lambda_max/tr + delta_k); an infeasible solve keeps the previous
iterate and halves every step delta_k (uniformly across k).  At v_k = 1 the
cut forces u_k^H W_k u_k = lambda_max = tr, i.e. an exactly rank-one W_k.
The loop stops once every v_k equals one, the objective has stabilized, and
the adopted covariances pass the rank-one ratio test.

A solve counts as feasible when the solver reports optimality, or when it hit
its iteration limit while primal-feasible (gap not closed); a numerical
failure is treated as infeasible with a logged warning, so the loop degrades
into step halving instead of aborting.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import Scenario
from .metrics import (
    BeamformingSolution,
    beampattern_gain,
    hermitian_part,
    nominal_cu_sinr,
    nominal_eve_sinr,
    total_power,
)
from . import robust as robust_defaults
from .robust import assemble_p2, solution_from_result
from .sdp import solver as sdp_solver
from .sdp.solver import SolverSettings, solve


@dataclass
class SrocrSettings:
    v_init: float = 0.0
    delta_init: float = 0.1
    objective_tol: float = 1e-4
    rank_one_tol: float = 1e-3  # ratio lambda_2 / lambda_1
    delta_floor: float = 1e-6
    max_outer_iterations: int = 100
    adopt_feas_tol: float = 1e-6  # primal residual at which max_iter still adopts
    adopt_gap_tol: float = 1e-3  # certified relative gap required for adoption
    # below this fraction of the power budget a covariance carries no rank
    # information beyond solver noise and counts as rank one
    rank_energy_floor: float = 1e-7
    # the v = 1 cut leaves the feasible set without interior (every feasible
    # W_k is exactly rank one); backing the solve-time cut off by this margin
    # restores Slater while bounding lambda_2/lambda_1 by ~cut_margin
    cut_margin: float = 1e-6
    # interior margin applied to SINR thresholds while solving; delivered
    # solutions are verified against the unmargined scenario thresholds
    threshold_margin: float = robust_defaults.DEFAULT_THRESHOLD_MARGIN

    def __post_init__(self):
        if not 0.0 <= self.v_init < 1.0:
            raise ValueError("v_init must lie in [0, 1)")
        for name in (
            "delta_init",
            "objective_tol",
            "rank_one_tol",
            "delta_floor",
            "max_outer_iterations",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TraceRow:
    iteration: int
    objective: float
    solver_status: str
    walltime_ms: float
    v: tuple
    delta: tuple
    fraction: tuple  # lambda_max / tr per CU covariance


@dataclass
class SrocrState:
    iteration: int
    v: np.ndarray
    delta: np.ndarray
    eigvecs: list
    covariances: list
    sensing: np.ndarray
    mu: np.ndarray
    objective: float
    history: list
    trace: list


class SrocrError(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InfeasibleScenario(SrocrError):
    """The scenario is infeasible even without rank constraints."""


class SrocrStalled(SrocrError):
    """Step sizes collapsed below the floor before reaching rank one."""


class SrocrIterationLimit(SrocrError):
    """Outer iteration budget exhausted."""


@dataclass
class SrocrOutcome:
    solution: BeamformingSolution
    state: SrocrState
    trace: list
    relaxed_objective: float
    nominal_slacks: dict


def leading_eigvec(w: np.ndarray):
    """Largest eigenpair with a deterministic phase: the largest-modulus entry
    of the eigenvector is made real positive (ties break at the lowest index;
    ties among equal eigenvalues keep the eigensolver's first occurrence)."""
    lam, vecs = np.linalg.eigh(hermitian_part(np.asarray(w, dtype=complex)))
    i = int(np.argmax(lam))
    u = vecs[:, i]
    j = int(np.argmax(np.abs(u)))
    piv = u[j]
    if abs(piv) > 0.0:
        u = u * (np.conj(piv) / abs(piv))
    u = u / np.linalg.norm(u)
    return float(lam[i]), u


class RankOneExtractionError(ValueError):
    pass


def extract_rank_one(w: np.ndarray, tol: float, energy_floor: float = 0.0) -> np.ndarray:
    """w = sqrt(lambda_1) u_1 when lambda_2/lambda_1 <= tol; raises otherwise.

    Matrices with lambda_1 below ``energy_floor`` extract as the dominant
    eigendirection without the ratio test (or as the zero vector when no
    positive eigenvalue remains): they are numerically rank one.
    """
    lam = np.linalg.eigvalsh(hermitian_part(np.asarray(w, dtype=complex)))
    lam1 = float(lam[-1])
    lam2 = float(lam[-2]) if lam.shape[0] > 1 else 0.0
    if lam1 <= max(0.0, energy_floor):
        if lam1 <= 0.0:
            return np.zeros(np.asarray(w).shape[0], dtype=complex)
    elif max(0.0, lam2) / lam1 > tol:
        raise RankOneExtractionError(
            f"eigenvalue ratio {max(0.0, lam2) / lam1:.3e} exceeds {tol:.3e}"
        )
    val, u = leading_eigvec(w)
    return math.sqrt(max(0.0, val)) * u


def _rank_ratio(w: np.ndarray, energy_floor: float = 0.0) -> float:
    """lambda_2 / lambda_1: the rank-one quality measure (0 = exactly rank one)."""
    lam = np.linalg.eigvalsh(hermitian_part(np.asarray(w, dtype=complex)))
    if lam.shape[0] == 1 or lam[-1] <= max(0.0, energy_floor):
        return 0.0
    return float(max(0.0, lam[-2]) / lam[-1])


def _eig_fraction(w: np.ndarray) -> float:
    """lambda_max / tr: the relaxation level driven to 1 by the algorithm."""
    lam = np.linalg.eigvalsh(hermitian_part(np.asarray(w, dtype=complex)))
    tr = float(np.sum(np.clip(lam, 0.0, None)))
    if tr <= 0.0:
        return 1.0
    return float(max(0.0, lam[-1]) / tr)


def _is_adoptable(result, settings: SrocrSettings) -> bool:
    """Feasibility test for the relaxation loop.

    A solve is adopted when it is optimal, or when it returned a candidate
    that is primal feasible within ``adopt_feas_tol`` and carries a certified
    relative gap within ``adopt_gap_tol`` (an iteration-limited or
    numerically stalled run that nevertheless landed near the optimum keeps
    the loop progressing).  An infeasibility certificate, or a failure
    without a usable candidate, triggers the step-halving branch.
    """
    if result.status == sdp_solver.OPTIMAL:
        return True
    if result.status == sdp_solver.INFEASIBLE:
        return False
    if (
        result.y is not None
        and result.residuals[0] <= settings.adopt_feas_tol
        and result.residuals[2] <= settings.adopt_gap_tol
    ):
        return True
    if result.status == sdp_solver.NUMERICAL_FAILURE:
        warnings.warn("solver reported numerical failure; treating as infeasible")
    return False


def init_relaxed(
    scenario: Scenario,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
    include_sensing: bool = True,
) -> SrocrState:
    """Solve the rank-relaxed problem and seed the relaxation state."""
    settings = settings or SrocrSettings()
    t0 = time.perf_counter()
    problem = assemble_p2(
        scenario, None, include_sensing, threshold_margin=settings.threshold_margin
    )
    result = solver(problem, solver_settings)
    wall = (time.perf_counter() - t0) * 1e3
    if result.status == sdp_solver.INFEASIBLE:
        raise InfeasibleScenario("rank-relaxed problem is infeasible")
    if not _is_adoptable(result, settings):
        raise SrocrError(f"rank-relaxed solve failed with status {result.status}")
    sol = solution_from_result(problem, result, scenario)
    kk = scenario.num_cus
    eigvecs = [leading_eigvec(w)[1] for w in sol.comm_covariances]
    fractions = tuple(_eig_fraction(w) for w in sol.comm_covariances)
    state = SrocrState(
        iteration=0,
        v=np.full(kk, settings.v_init),
        delta=np.full(kk, settings.delta_init),
        eigvecs=eigvecs,
        covariances=sol.comm_covariances,
        sensing=sol.sensing_covariance,
        mu=sol.slacks,
        objective=sol.objective,
        history=[sol.objective],
        trace=[
            TraceRow(
                0,
                sol.objective,
                result.status,
                wall,
                tuple(np.full(kk, settings.v_init)),
                tuple(np.full(kk, settings.delta_init)),
                fractions,
            )
        ],
    )
    return state


def build_p3(
    scenario: Scenario,
    state: SrocrState,
    include_sensing: bool = True,
    cut_margin: float = 0.0,
    threshold_margin: float = 0.0,
):
    """Current iteration's convex problem: the relaxed problem plus one
    eigenvector cut per CU at the state's (u_k, v_k).  ``cut_margin`` backs
    the cut level off to min(v_k, 1 - cut_margin); see SrocrSettings."""
    level = np.minimum(state.v, 1.0 - cut_margin)
    cuts = list(zip(state.eigvecs, level))
    return assemble_p2(
        scenario, cuts, include_sensing, threshold_margin=threshold_margin
    )


def step(
    scenario: Scenario,
    state: SrocrState,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
    include_sensing: bool = True,
) -> SrocrState:
    """One relaxation iteration; see module docstring for the update rule."""
    settings = settings or SrocrSettings()
    t0 = time.perf_counter()
    problem = build_p3(
        scenario,
        state,
        include_sensing,
        settings.cut_margin,
        settings.threshold_margin,
    )
    result = solver(problem, solver_settings)
    wall = (time.perf_counter() - t0) * 1e3

    delta = state.delta.copy()
    adopted = False
    if _is_adoptable(result, settings):
        sol = solution_from_result(problem, result, scenario)
        # A one-shot jump of some v_k to 1 can pin W_k to a poorly aligned
        # eigenvector and collapse the objective.  Such solves are rerouted
        # into the step-halving branch: the relaxation then reapproaches
        # rank one gradually with refreshed directions.
        collapsed = sol.objective < 0.5 * state.objective - 1e-9
        if not collapsed:
            adopted = True
            covs = sol.comm_covariances
            sensing = sol.sensing_covariance
            mu = sol.slacks
            objective = sol.objective
    if not adopted:
        covs = state.covariances
        sensing = state.sensing
        mu = state.mu
        objective = state.objective
        delta = delta / 2.0

    fractions = np.array([_eig_fraction(w) for w in covs])
    v = np.minimum(1.0, fractions + delta)
    if np.any((delta < settings.delta_floor) & (v < 1.0)):
        raise SrocrStalled(
            f"step size collapsed below {settings.delta_floor:g} at iteration "
            f"{state.iteration + 1}",
            state,
        )
    eigvecs = [leading_eigvec(w)[1] for w in covs]
    trace = state.trace + [
        TraceRow(
            state.iteration + 1,
            objective,
            result.status,
            wall,
            tuple(v),
            tuple(delta),
            tuple(fractions),
        )
    ]
    return SrocrState(
        iteration=state.iteration + 1,
        v=v,
        delta=delta,
        eigvecs=eigvecs,
        covariances=covs,
        sensing=sensing,
        mu=mu,
        objective=objective,
        history=state.history + [objective],
        trace=trace,
    )


def _nominal_slacks(sol: BeamformingSolution, scenario: Scenario) -> dict:
    out = {}
    for k, cu in enumerate(scenario.cus):
        s = nominal_cu_sinr(sol, cu.csi.vector, k, cu.noise_power) - cu.sinr_min
        out[f"cu_{k + 1}"] = s
    for l, eve in enumerate(scenario.eves):
        for k in range(scenario.num_cus):
            s = eve.leak_max[k] - nominal_eve_sinr(
                sol, eve.csi.vector, k, eve.noise_power
            )
            out[f"eve_{l + 1}_{k + 1}"] = s
    for m, tgt in enumerate(scenario.targets):
        out[f"target_{m + 1}"] = beampattern_gain(sol, tgt.csi.vector) - sol.objective
    out["power"] = scenario.power_budget - total_power(sol)
    return out


def run(
    scenario: Scenario,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
    include_sensing: bool = True,
) -> SrocrOutcome:
    """Full relaxation loop: returns the rank-one solution with extracted
    beamforming vectors, the final state, and the per-iteration trace.

    Termination requires v_k = 1 for every CU, an objective change within
    ``objective_tol``, and adopted covariances passing ``rank_one_tol``; the
    last condition guards against exiting on a clamped v before the v = 1 cut
    has actually been enforced by a solve.
    """
    settings = settings or SrocrSettings()
    state = init_relaxed(scenario, solver, settings, solver_settings, include_sensing)
    relaxed_objective = state.objective
    floor = settings.rank_energy_floor * scenario.power_budget
    while True:
        if state.iteration >= settings.max_outer_iterations:
            raise SrocrIterationLimit(
                f"no rank-one point within {settings.max_outer_iterations} iterations",
                state,
            )
        prev_objective = state.objective
        state = step(
            scenario, state, solver, settings, solver_settings, include_sensing
        )
        ratios = [_rank_ratio(w, floor) for w in state.covariances]
        if (
            np.all(state.v >= 1.0)
            and abs(state.objective - prev_objective) <= settings.objective_tol
            and all(r <= settings.rank_one_tol for r in ratios)
        ):
            break

    vectors = [
        extract_rank_one(w, settings.rank_one_tol, floor) for w in state.covariances
    ]
    solution = BeamformingSolution(
        comm_covariances=state.covariances,
        sensing_covariance=state.sensing,
        objective=state.objective,
        slacks=state.mu,
        comm_vectors=vectors,
    )
    slacks = _nominal_slacks(solution, scenario)
    worst = min(slacks.values())
    if worst < -1e-6:
        warnings.warn(f"nominal constraint slack {worst:.3e} below tolerance")
    return SrocrOutcome(solution, state, state.trace, relaxed_objective, slacks)


def trace_csv(trace) -> str:
    """Per-iteration CSV log: v_k, delta_k, and lambda_max/tr per CU."""
    if not trace:
        return ""
    kk = len(trace[0].v)
    cols = ["iteration", "objective_w", "solver_status", "walltime_ms"]
    for k in range(kk):
        cols += [f"v_{k + 1}", f"delta_{k + 1}", f"lmax_over_tr_{k + 1}"]
    lines = [",".join(cols)]
    for row in trace:
        cells = [
            str(row.iteration),
            "%.9e" % row.objective,
            row.solver_status,
            "%.9e" % row.walltime_ms,
        ]
        for k in range(kk):
            cells += [
                "%.9e" % row.v[k],
                "%.9e" % row.delta[k],
                "%.9e" % row.fraction[k],
            ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
