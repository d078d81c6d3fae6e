"""Relaxation driver tests: eigenvector conventions, the update rule, solver
injection for the infeasibility branch, and end-to-end desk runs."""

import numpy as np
import pytest

from nfisac import srocr
from nfisac.metrics import total_power
from nfisac.sdp import solver as sdp_solver
from nfisac.sdp.solver import SolverResult, solve
from nfisac.srocr import (
    InfeasibleScenario,
    RankOneExtractionError,
    SrocrSettings,
    SrocrStalled,
    build_p3,
    extract_rank_one,
    init_relaxed,
    leading_eigvec,
    run,
    step,
    trace_csv,
)

from conftest import desk_scenario


class TestLeadingEigvec:
    def test_diagonal(self):
        val, vec = leading_eigvec(np.diag([2.0, 1.0]))
        assert val == pytest.approx(2.0)
        np.testing.assert_allclose(vec, [1.0, 0.0], atol=1e-14)

    def test_identity_tie_break(self):
        val, vec = leading_eigvec(np.eye(2))
        assert val == pytest.approx(1.0)
        np.testing.assert_allclose(vec, [1.0, 0.0], atol=1e-14)

    def test_phase_pinned_and_matches_eigensolver(self, rng):
        for _ in range(20):
            a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
            w = a @ a.conj().T
            val, vec = leading_eigvec(w)
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)
            lam = np.linalg.eigvalsh(w)
            assert val == pytest.approx(lam[-1], rel=1e-10)
            piv = vec[np.argmax(np.abs(vec))]
            assert piv.imag == pytest.approx(0.0, abs=1e-12)
            assert piv.real > 0
            # the eigen-equation holds
            assert np.linalg.norm(w @ vec - val * vec) <= 1e-8 * val


class TestExtractRankOne:
    def test_scaled_basis_vector(self):
        w = 4.0 * np.outer([1, 0, 0], [1, 0, 0]).astype(complex)
        np.testing.assert_allclose(extract_rank_one(w, 1e-3), [2, 0, 0], atol=1e-12)

    def test_identity_refused(self):
        with pytest.raises(RankOneExtractionError):
            extract_rank_one(np.eye(2), 1e-3)

    def test_near_rank_one_perturbation(self, rng):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w = np.outer(v, v.conj()) + 1e-6 * np.eye(4)
        out = extract_rank_one(w, 1e-3)
        c = np.vdot(v, out)
        aligned = v * (c / abs(c))
        assert np.linalg.norm(out - aligned) <= 1e-3 * np.linalg.norm(v)

    def test_energy_floor_permits_noise_matrices(self):
        w = 1e-12 * np.eye(3)
        out = extract_rank_one(w, 1e-3, energy_floor=1e-9)
        assert np.linalg.norm(out) ** 2 == pytest.approx(1e-12, rel=1e-9)


def _fake_result(status, residuals=(0.0, 0.0, 0.0)):
    return SolverResult(
        status=status,
        objective=np.nan,
        y=None,
        matrix_values={},
        scalar_values={},
        duals=None,
        residuals=residuals,
        iterations=1,
        mu=0.0,
    )


class TestStepRule:
    def test_update_arithmetic_identity_covariance(self):
        # lambda_max/tr of the 2x2 identity is 0.5, so v = 0.5 + 0.1
        assert srocr._eig_fraction(np.eye(2)) == pytest.approx(0.5)
        assert min(1.0, srocr._eig_fraction(np.eye(2)) + 0.1) == pytest.approx(0.6)

    def test_rank_one_covariance_clamps_to_one(self, rng):
        v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        w = np.outer(v, v.conj())
        assert min(1.0, srocr._eig_fraction(w) + 0.1) == 1.0

    def test_infeasible_solve_halves_all_steps(self):
        scn = desk_scenario(2)
        state = init_relaxed(scn)
        before_w = [w.copy() for w in state.covariances]

        calls = {"n": 0}

        def failing_solver(problem, settings=None):
            calls["n"] += 1
            return _fake_result(sdp_solver.INFEASIBLE)

        nxt = step(scn, state, solver=failing_solver)
        assert calls["n"] == 1
        np.testing.assert_array_equal(nxt.delta, state.delta / 2.0)
        for a, b in zip(nxt.covariances, before_w):
            np.testing.assert_array_equal(a, b)
        # v recomputed from the previous covariances at the halved step
        fr = np.array([srocr._eig_fraction(w) for w in before_w])
        np.testing.assert_allclose(nxt.v, np.minimum(1.0, fr + state.delta / 2))

    def test_numerical_failure_treated_as_infeasible_with_warning(self):
        scn = desk_scenario(2)
        state = init_relaxed(scn)

        def broken_solver(problem, settings=None):
            return _fake_result(sdp_solver.NUMERICAL_FAILURE, (1.0, 1.0, 1.0))

        import warnings as w

        with w.catch_warnings(record=True) as caught:
            w.simplefilter("always")
            nxt = step(scn, state, solver=broken_solver)
        assert any("numerical failure" in str(c.message) for c in caught)
        np.testing.assert_array_equal(nxt.delta, state.delta / 2.0)

    def test_stall_raises_with_state(self):
        # force covariances whose eigenvalue fraction stays below one, so the
        # halving chain must hit the floor while v < 1
        scn = desk_scenario(2)
        state = init_relaxed(scn)
        state.covariances = [0.1 * np.eye(8, dtype=complex) for _ in range(2)]

        def always_infeasible(problem, settings=None):
            return _fake_result(sdp_solver.INFEASIBLE)

        settings = SrocrSettings(delta_floor=1e-2)
        with pytest.raises(SrocrStalled) as exc:
            cur = state
            for _ in range(20):
                cur = step(scn, cur, solver=always_infeasible, settings=settings)
        assert exc.value.state is not None

    def test_build_p3_row_count_and_cut_levels(self):
        scn = desk_scenario(3)
        state = init_relaxed(scn)
        base = len(build_p3(scn, state).rows)
        relaxed_rows = len(srocr.assemble_p2(scn).rows)
        assert base == relaxed_rows + scn.num_cus
        capped = build_p3(scn, state, cut_margin=1e-6)
        tags = [r.tag for r in capped.rows]
        assert sum(t.startswith("srocr_") for t in tags) == scn.num_cus


class TestInitRelaxed:
    def test_unreachable_sinr_is_terminal(self):
        # the SINR demand must exceed the budget by a *numerically visible*
        # margin: at 40 dB over a -20 dBm noise floor the required signal
        # power is 100x the budget, so the certificate is unambiguous
        scn = desk_scenario(1, sinr_db=40.0, noise_dbm=-20.0)
        with pytest.raises(InfeasibleScenario):
            init_relaxed(scn)

    def test_desk_scale_positive_objective(self):
        state = init_relaxed(desk_scenario(4, k=1, l=0, m=1))
        assert state.objective > 0
        assert state.iteration == 0
        assert np.all(state.v == 0.0) and np.all(state.delta == 0.1)


class TestRun:
    def test_end_to_end_desk(self):
        scn = desk_scenario(1)
        out = run(scn)
        assert np.all(out.state.v == 1.0)
        ratios = [srocr._rank_ratio(w) for w in out.state.covariances]
        assert max(ratios) <= 1e-3
        assert out.solution.comm_vectors is not None
        out.solution.check_structure()
        # relaxation bound dominates every adopted objective
        for t in out.state.history:
            assert t <= out.relaxed_objective + 1e-6
        assert min(out.nominal_slacks.values()) >= -1e-6
        assert total_power(out.solution) <= scn.power_budget * (1 + 1e-9)

    def test_trace_csv_format(self):
        out = run(desk_scenario(4))
        text = trace_csv(out.trace)
        lines = text.strip().splitlines()
        assert lines[0].startswith(
            "iteration,objective_w,solver_status,walltime_ms,v_1,delta_1,lmax_over_tr_1"
        )
        assert len(lines) == len(out.trace) + 1
        assert text.endswith("\n")

    def test_iteration_limit_raises(self):
        scn = desk_scenario(3)

        def sticky_solver(problem, settings=None):
            return solve(problem, settings)

        with pytest.raises(srocr.SrocrIterationLimit):
            run(scn, settings=SrocrSettings(max_outer_iterations=1, objective_tol=1e-12))
