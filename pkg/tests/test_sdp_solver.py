"""Solver tests: analytic instances, constructed instances with known optima,
infeasibility certificates, and the solve contract's invariants."""

import numpy as np
import pytest

from nfisac.sdp import (
    ConicProblem,
    SolverSettings,
    check_kkt,
    solve,
)

try:
    import cvxopt  # noqa: F401

    HAVE_CVXOPT = True
except ImportError:  # pragma: no cover
    HAVE_CVXOPT = False


def cap_problem(cap=1.0):
    p = ConicProblem()
    t = p.add_free("t")
    p.set_objective({t: 1.0})
    p.add_row({t: 1.0}, "<=", cap, "cap")
    return p


def min_trace_problem():
    """min tr(X) s.t. X >= 0 (real sym 2x2), X[0,0] = 1; optimum 1 at e1 e1^T."""
    p = ConicProblem()
    x = p.add_symmetric_var("X", 2)
    obj = np.zeros(p.n_params)
    obj[x.param_slice] = -x.inner_coeffs(np.eye(2))
    p.set_objective(obj)
    row = np.zeros(p.n_params)
    row[x.offset] = 1.0
    p.add_row(row, "==", 1.0, "pin")
    return p, x


def lmi_form_instance(rng, n, m, rank):
    """max b.y s.t. C - sum y_i A_i >= 0 with a known strictly complementary
    optimum; returns (problem, optimal value)."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    x_star = q[:, :rank] @ np.diag(rng.uniform(0.5, 2.0, rank)) @ q[:, :rank].T
    s_star = q[:, rank:] @ np.diag(rng.uniform(0.5, 2.0, n - rank)) @ q[:, rank:].T
    amats = [0.5 * (a + a.T) for a in rng.standard_normal((m, n, n))]
    y_star = rng.standard_normal(m)
    cmat = s_star + sum(ys * a for ys, a in zip(y_star, amats))
    b = np.array([np.tensordot(a, x_star) for a in amats])
    prob = ConicProblem()
    ys = [prob.add_free(f"y{i}") for i in range(m)]
    prob.set_objective({yi: bi for yi, bi in zip(ys, b)})
    pids, rows, cols, vals = [], [], [], []
    for i, a in enumerate(amats):
        for r in range(n):
            for c in range(n):
                pids.append(ys[i])
                rows.append(r)
                cols.append(c)
                vals.append(-a[r, c])
    prob.add_lmi(n, cmat, pids, rows, cols, vals, "lmi")
    return prob, float(b @ y_star)


def primal_form_instance(rng, n, m, rank):
    """max <-C, X> s.t. <A_i, X> = b_i, X >= 0; optimum -b.y_star known."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    x_star = q[:, :rank] @ np.diag(rng.uniform(0.5, 2.0, rank)) @ q[:, :rank].T
    s_star = q[:, rank:] @ np.diag(rng.uniform(0.5, 2.0, n - rank)) @ q[:, rank:].T
    amats = [0.5 * (a + a.T) for a in rng.standard_normal((m, n, n))]
    y_star = rng.standard_normal(m)
    cmat = s_star + sum(ys * a for ys, a in zip(y_star, amats))
    b = np.array([np.tensordot(a, x_star) for a in amats])
    prob = ConicProblem()
    x = prob.add_symmetric_var("X", n)
    obj = np.zeros(prob.n_params)
    obj[x.param_slice] = -x.inner_coeffs(cmat)
    prob.set_objective(obj)
    for i, a in enumerate(amats):
        row = np.zeros(prob.n_params)
        row[x.param_slice] = x.inner_coeffs(a)
        prob.add_row(row, "==", float(b[i]), f"eq{i}")
    return prob, -float(b @ y_star)


def infeasible_instance(rng, n, m):
    """LMI system with an explicit Farkas certificate Z*: <A_i, Z*> = 0 and
    <C, Z*> = -1, hence no feasible y exists."""
    g = rng.standard_normal((n, n))
    z_star = g @ g.T + 0.1 * np.eye(n)
    amats = []
    for a in rng.standard_normal((m, n, n)):
        a = 0.5 * (a + a.T)
        a -= (np.tensordot(a, z_star) / np.tensordot(z_star, z_star)) * z_star
        amats.append(a)
    cmat = -z_star / np.tensordot(z_star, z_star)
    prob = ConicProblem()
    ys = [prob.add_free(f"y{i}") for i in range(m)]
    prob.set_objective({ys[0]: 1.0})
    pids, rows, cols, vals = [], [], [], []
    for i, a in enumerate(amats):
        for r in range(n):
            for c in range(n):
                if a[r, c] != 0.0:
                    pids.append(ys[i])
                    rows.append(r)
                    cols.append(c)
                    vals.append(-a[r, c])
    prob.add_lmi(n, cmat, pids, rows, cols, vals, "lmi")
    return prob


class TestAnalyticInstances:
    def test_scalar_cap(self):
        res = solve(cap_problem())
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0, abs=1e-7)

    def test_min_trace_pinned_corner(self):
        prob, x = min_trace_problem()
        res = solve(prob)
        assert res.status == "optimal"
        assert -res.objective == pytest.approx(1.0, abs=1e-7)
        np.testing.assert_allclose(
            res.matrix_values["X"], np.outer([1, 0], [1, 0]), atol=1e-6
        )

    def test_hermitian_completion(self):
        # min tr(X), X hermitian PSD with pinned first row -> Schur value
        prob = ConicProblem()
        x = prob.add_hermitian_var("X", 2)
        obj = np.zeros(prob.n_params)
        obj[x.param_slice] = -x.inner_coeffs(np.eye(2))
        prob.set_objective(obj)
        for idx, val in ((0, 1.0), (2, 0.3), (3, -0.2)):
            row = np.zeros(prob.n_params)
            row[x.offset + idx] = 1.0
            prob.add_row(row, "==", val, f"pin{idx}")
        res = solve(prob)
        assert res.status == "optimal"
        assert -res.objective == pytest.approx(1.13, abs=1e-6)


class TestConstructedInstances:
    @pytest.mark.parametrize("seed", range(6))
    def test_lmi_form_known_optimum(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(3, 7))
        rank = int(rng.integers(1, n))
        m = int(rng.integers(2, 7))
        prob, opt = lmi_form_instance(rng, n, m, rank)
        res = solve(prob)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(opt, rel=1e-6, abs=1e-7)
        pres, dres, gap = check_kkt(prob, res)
        assert max(pres, dres) <= 1e-8 and gap <= 1e-8

    @pytest.mark.parametrize("seed", range(6))
    def test_primal_form_known_optimum(self, seed):
        rng = np.random.default_rng(200 + seed)
        n = int(rng.integers(3, 6))
        rank = int(rng.integers(1, n))
        m = int(rng.integers(2, 1 + rank * (rank + 1) // 2 + 2))
        prob, opt = primal_form_instance(rng, n, m, rank)
        res = solve(prob)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(opt, rel=1e-6, abs=1e-7)

    @pytest.mark.parametrize("seed", range(4))
    def test_infeasible_certified(self, seed):
        rng = np.random.default_rng(300 + seed)
        prob = infeasible_instance(rng, int(rng.integers(3, 6)), int(rng.integers(2, 5)))
        res = solve(prob)
        assert res.status == "infeasible"
        assert res.certificate["kind"] == "primal_infeasible"
        assert res.certificate["quality"] <= 1e-7


class TestContract:
    def test_reported_residuals_match_independent_recomputation(self):
        rng = np.random.default_rng(7)
        prob, _ = lmi_form_instance(rng, 4, 3, 2)
        res = solve(prob)
        recomputed = check_kkt(prob, res)
        for a, b in zip(res.residuals, recomputed):
            assert a == pytest.approx(b, abs=1e-9)

    def test_kkt_gap_within_tolerance_at_optimum(self):
        res = solve(cap_problem())
        assert res.residuals[2] <= SolverSettings().gap_tol

    def test_hand_built_feasible_point_zero_primal_residual(self):
        from nfisac.sdp import DualValues, compute_residuals

        prob = cap_problem()
        duals = DualValues(np.array([1.0]), [], [], {})
        pres, dres, _ = compute_residuals(prob, np.array([0.5]), duals)
        assert pres == 0.0
        assert dres == 0.0  # objective 1 == dual 1 on the row

    def test_residual_grows_linearly_with_perturbation(self):
        from nfisac.sdp import DualValues, compute_residuals

        prob = cap_problem()
        duals = DualValues(np.array([1.0]), [], [], {})
        r1 = compute_residuals(prob, np.array([1.0 + 1e-4]), duals)[0]
        r2 = compute_residuals(prob, np.array([1.0 + 2e-4]), duals)[0]
        assert r2 == pytest.approx(2 * r1, rel=1e-9)

    def test_determinism(self):
        rng = np.random.default_rng(11)
        prob, _ = lmi_form_instance(rng, 4, 4, 2)
        r1 = solve(prob)
        r2 = solve(prob)
        assert np.array_equal(r1.y, r2.y)
        assert r1.iterations == r2.iterations

    def test_objective_scale_invariance(self):
        rng = np.random.default_rng(13)
        prob, opt = lmi_form_instance(rng, 4, 3, 2)
        res1 = solve(prob)
        prob.set_objective(prob.objective * 10.0)
        res2 = solve(prob)
        assert res1.status == res2.status == "optimal"
        assert res2.objective == pytest.approx(10.0 * res1.objective, rel=1e-6)
        np.testing.assert_allclose(res2.y, res1.y, rtol=0, atol=1e-6)

    def test_redundant_row_does_not_move_optimum(self):
        rng = np.random.default_rng(17)
        prob, _ = lmi_form_instance(rng, 4, 3, 2)
        prob.add_row(prob.objective * 0.0 + 1.0 * 0, "<=", 1.0, "trivial")
        base = solve(prob).objective
        # duplicate an existing inequality row exactly
        row = prob.rows[0]
        prob.add_row(row.coeffs.copy(), row.op, row.rhs, "dup")
        again = solve(prob).objective
        assert again == pytest.approx(base, abs=1e-7)

    def test_weak_duality_on_optimal_results(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            prob, _ = lmi_form_instance(rng, 4, 3, 2)
            res = solve(prob)
            assert res.status == "optimal"
            dobj = sum(
                float(lam) * row.rhs for row, lam in zip(prob.rows, res.duals.rows)
            ) + sum(
                float(np.tensordot(z, lmi.const))
                for lmi, z in zip(prob.lmis, res.duals.lmis)
            )
            assert res.objective <= dobj + 1e-7 * max(1.0, abs(dobj))

    def test_unbounded_detection(self):
        p = ConicProblem()
        t = p.add_free("t")
        u = p.add_nonneg("u")
        p.set_objective({t: 1.0})
        p.add_row({t: 1.0, u: -1.0}, "<=", 0.0, "t<=u")
        res = solve(p)
        assert res.status == "unbounded"

    def test_validation_rejects_bad_problems(self):
        p = ConicProblem()
        with pytest.raises(ValueError):
            p.validate()
        t = p.add_free("t")
        p.add_lmi(2, np.eye(2), [5], [0], [0], [1.0], "bad")
        with pytest.raises(ValueError, match="unknown parameter"):
            p.validate()


class TestTextInterfaces:
    def test_round_trip_lossless(self):
        rng = np.random.default_rng(23)
        prob, _ = lmi_form_instance(rng, 4, 3, 2)
        prob.add_row({0: np.pi * 1e-3}, "<=", np.e * 100, "tagged row")
        text = prob.to_text()
        back = ConicProblem.from_text(text)
        assert back.to_text() == text
        r1, r2 = solve(prob), solve(back)
        assert r1.objective == r2.objective

    def test_debug_dump_lists_structure(self):
        prob, x = min_trace_problem()
        dump = prob.debug_dump()
        assert "matrix var X" in dump
        assert "row[pin]" in dump
        assert "maximize" in dump


@pytest.mark.skipif(not HAVE_CVXOPT, reason="cvxopt unavailable")
class TestCrossValidation:
    """The pluggable-solver seam: the same lowered data through cvxopt."""

    def test_agrees_with_cvxopt(self):
        from cvxopt import matrix, solvers

        from nfisac.sdp.problem import lower

        rng = np.random.default_rng(29)
        prob, opt = lmi_form_instance(rng, 5, 4, 2)
        core = lower(prob)
        n = core.n
        gmats = []
        hmats = []
        for blk in core.blocks:
            d = blk.dim
            g = np.zeros((d * d, n))
            for pid, r, c, v in zip(blk.param_ids, blk.rows, blk.cols, blk.vals):
                g[r * d + c, pid] -= v
            gmats.append(matrix(g))
            hmats.append(matrix(np.asarray(blk.const)))
        solvers.options["show_progress"] = False
        out = solvers.sdp(matrix(core.c), Gs=gmats, hs=hmats)
        assert out["status"] == "optimal"
        ours = solve(prob)
        external_obj = -float((matrix(core.c).T * out["x"])[0])
        assert ours.objective == pytest.approx(external_obj, rel=1e-6)
        assert ours.objective == pytest.approx(opt, rel=1e-6)
