"""Comparison schemes: plain semidefinite relaxation with rank-one recovery,
information-only transmission, far-field-model design, and perfect CSI.

Every baseline emits the same solution type as the main pipeline so the
verifier and the experiment runner treat them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import verifier
from .geometry import (
    CommUser,
    CsiEstimate,
    Eavesdropper,
    Scenario,
    SensingTarget,
    far_field_steering,
)
from .metrics import BeamformingSolution, hermitian_part
from .robust import DEFAULT_THRESHOLD_MARGIN, assemble_p2, solution_from_result
from .srocr import (
    InfeasibleScenario,
    SrocrOutcome,
    SrocrSettings,
    _is_adoptable,
    _rank_ratio,
    leading_eigvec,
    run,
)
from .sdp import solver as sdp_solver
from .sdp.solver import SolverSettings, solve


class BaselineKind(str, Enum):
    SROCR = "srocr"
    SDR = "sdr"
    INFO_ONLY = "info_only"
    FAR_FIELD = "far_field"
    PERFECT_CSI = "perfect_csi"


@dataclass
class RankReport:
    """Per-CU eigenvalue ratios of the relaxed solution and what recovery did."""

    ratios: list
    extraction_applied: bool
    relaxed_objective: float
    achieved_objective: float
    robust_cu_ok: list
    robust_eve_ok: list  # [l][k]


def sdr_solve(
    scenario: Scenario,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
    include_sensing: bool = True,
):
    """Rank-relaxed solve with leading-eigenvector rank-one recovery.

    When the relaxed covariances already pass the rank-one ratio test, the
    relaxed solution is returned as is (its objective equals the relaxation
    bound).  Otherwise every W_k is replaced by its dominant rank-one part
    and the objective is re-certified: the achieved value is the smallest
    oracle worst-case beampattern gain of the recovered solution (never
    reported above the relaxation bound), and robust CU/eavesdropper
    constraints are re-checked and reported, not enforced.  Recovery uses the
    deterministic leading eigenvector rather than Gaussian randomization:
    under robust LMI constraints a rejected random sample has no cheap
    feasibility restoration, and determinism keeps the comparison honest.

    Returns (solution, rank_report).
    """
    settings = settings or SrocrSettings()
    problem = assemble_p2(
        scenario, None, include_sensing, threshold_margin=settings.threshold_margin
    )
    result = solver(problem, solver_settings)
    if result.status == sdp_solver.INFEASIBLE:
        raise InfeasibleScenario("rank-relaxed problem is infeasible")
    if not _is_adoptable(result, settings):
        raise InfeasibleScenario(
            f"rank-relaxed solve failed with status {result.status}"
        )
    relaxed = solution_from_result(problem, result, scenario)
    floor = settings.rank_energy_floor * scenario.power_budget
    ratios = [_rank_ratio(w, floor) for w in relaxed.comm_covariances]

    if all(r <= settings.rank_one_tol for r in ratios):
        vectors = []
        for w in relaxed.comm_covariances:
            val, u = leading_eigvec(w)
            vectors.append(math.sqrt(max(0.0, val)) * u)
        relaxed.comm_vectors = vectors
        report = RankReport(
            ratios=ratios,
            extraction_applied=False,
            relaxed_objective=relaxed.objective,
            achieved_objective=relaxed.objective,
            robust_cu_ok=[True] * scenario.num_cus,
            robust_eve_ok=[[True] * scenario.num_cus for _ in scenario.eves],
        )
        return relaxed, report

    vectors = []
    covs = []
    for w in relaxed.comm_covariances:
        val, u = leading_eigvec(w)
        vec = math.sqrt(max(0.0, val)) * u
        vectors.append(vec)
        covs.append(np.outer(vec, vec.conj()))
    recovered = BeamformingSolution(
        comm_covariances=covs,
        sensing_covariance=relaxed.sensing_covariance,
        objective=relaxed.objective,
        slacks=relaxed.slacks,
        comm_vectors=vectors,
    )
    gains = [
        verifier.worst_case_beampattern(recovered, tgt.csi)
        for tgt in scenario.targets
    ]
    achieved = min([relaxed.objective] + gains) if gains else 0.0
    recovered.objective = achieved
    cu_ok = [
        verifier.worst_case_cu_sinr(recovered, cu.csi, k, cu.noise_power)
        >= cu.sinr_min * (1.0 - 1e-6)
        for k, cu in enumerate(scenario.cus)
    ]
    eve_ok = [
        [
            verifier.best_case_eve_sinr(recovered, eve.csi, k, eve.noise_power)
            <= eve.leak_max[k] * (1.0 + 1e-6)
            for k in range(scenario.num_cus)
        ]
        for eve in scenario.eves
    ]
    report = RankReport(
        ratios=ratios,
        extraction_applied=True,
        relaxed_objective=relaxed.objective,
        achieved_objective=achieved,
        robust_cu_ok=cu_ok,
        robust_eve_ok=eve_ok,
    )
    return recovered, report


def info_only_solve(
    scenario: Scenario,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
) -> SrocrOutcome:
    """Full relaxation pipeline with the sensing covariance pinned to zero
    (information-bearing beams only)."""
    return run(scenario, solver, settings, solver_settings, include_sensing=False)


def perfect_csi_scenario(scenario: Scenario) -> Scenario:
    """Copy of a scenario with every CSI error bound set to zero."""
    cus = [
        CommUser(c.position, CsiEstimate(c.csi.vector, 0.0), c.noise_power, c.sinr_min)
        for c in scenario.cus
    ]
    eves = [
        Eavesdropper(
            e.position, CsiEstimate(e.csi.vector, 0.0), e.noise_power, e.leak_max
        )
        for e in scenario.eves
    ]
    targets = [
        SensingTarget(t.position, CsiEstimate(t.csi.vector, 0.0))
        for t in scenario.targets
    ]
    return Scenario(scenario.geometry, cus, eves, targets, scenario.power_budget)


def perfect_csi_solve(
    scenario: Scenario,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
) -> SrocrOutcome:
    """Relaxation pipeline on the zero-error copy of the scenario; the robust
    LMIs degenerate into the nominal constraints."""
    return run(perfect_csi_scenario(scenario), solver, settings, solver_settings)


def far_field_scenario(scenario: Scenario) -> Scenario:
    """Scenario whose channel estimates use planar-wavefront phase structure.

    Each estimate keeps its norm (pathloss magnitude) and error bound; only
    the per-element phase profile is replaced by the far-field steering
    vector at the entity's angle, isolating the wavefront-curvature mismatch.
    """
    geom = scenario.geometry
    root_n = math.sqrt(geom.antenna_count)

    def swap(csi: CsiEstimate, angle: float) -> CsiEstimate:
        amp = float(np.linalg.norm(csi.vector)) / root_n
        return CsiEstimate(amp * far_field_steering(geom, angle), csi.error_bound)

    cus = [
        CommUser(
            c.position, swap(c.csi, c.position.angle_rad), c.noise_power, c.sinr_min
        )
        for c in scenario.cus
    ]
    eves = [
        Eavesdropper(
            e.position, swap(e.csi, e.position.angle_rad), e.noise_power, e.leak_max
        )
        for e in scenario.eves
    ]
    targets = [
        SensingTarget(t.position, swap(t.csi, t.position.angle_rad))
        for t in scenario.targets
    ]
    return Scenario(geom, cus, eves, targets, scenario.power_budget)


@dataclass
class FarFieldOutcome:
    design: SrocrOutcome
    evaluated_objective: float
    report: "verifier.RobustnessReport"

    @property
    def design_objective(self) -> float:
        return self.design.solution.objective


def far_field_solve(
    scenario: Scenario,
    solver=solve,
    settings: SrocrSettings | None = None,
    solver_settings: SolverSettings | None = None,
) -> FarFieldOutcome:
    """Design under the far-field channel model, evaluate under the true
    near-field one.

    The relaxation pipeline runs on the far-field surrogate scenario; the
    resulting beamformers are then certified by the oracle against the
    original near-field estimates and uncertainty balls.  The evaluated
    objective is the smallest worst-case beampattern gain over the true
    targets; evaluated CU/eavesdropper constraints may be violated, which is
    reported, never raised.
    """
    design = run(
        far_field_scenario(scenario), solver, settings, solver_settings
    )
    sol = design.solution
    gains = [
        verifier.worst_case_beampattern(sol, tgt.csi) for tgt in scenario.targets
    ]
    evaluated = min(gains) if gains else 0.0
    evaluated_sol = BeamformingSolution(
        comm_covariances=sol.comm_covariances,
        sensing_covariance=sol.sensing_covariance,
        objective=evaluated,
        slacks=sol.slacks,
        comm_vectors=sol.comm_vectors,
    )
    report = verifier.validate(evaluated_sol, scenario, mc_samples=0)
    return FarFieldOutcome(design, evaluated, report)
