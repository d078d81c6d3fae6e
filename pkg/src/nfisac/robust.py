"""S-procedure machinery: aggregate covariance combinations, LMI block
construction, and assembly of the robust max-min beampattern SDP.

For a norm-bounded channel error ``||delta|| <= eps`` the robust constraints
are quadratic in delta:

* target m:      (h+d)^H Psi   (h+d) >= t
* CU k:          (h+d)^H Psi_k (h+d) >= sigma^2
* eavesdropper:  (h+d)^H Psi_lk(h+d) <= sigma^2

with Psi = sum_k W_k + R0, Psi_k = W_k / gamma_k - sum_{i != k} W_i - R0 and
Psi_lk the same with the leakage threshold.  The S-procedure turns each
семi-infinite constraint into one LMI with a nonnegative slack multiplier mu,
e.g. for a target

    [[mu I + Psi,      Psi h      ],
     [h^H Psi,  h^H Psi h - t - mu eps^2]]  >=  0.

The eavesdropper block carries flipped signs.  When eps == 0 the uncertainty
ball is a single point and the LMI degenerates; :func:`assemble_p2` then emits
the nominal constraint as a plain linear row instead (a finite mu cannot
represent the nominal constraint exactly, and letting mu run off to infinity
is numerically hopeless).

Blocks are affine in the decision parameters; complex Hermitian structure is
embedded into real symmetric blocks of twice the size before the solver sees
it (eigenvalue multiplicities double, which is benign).  Quadratic corner
terms like h^H Psi h are expanded into affine functions of the matrix
parameters here, at assembly time.

All data entering the solver is internally rescaled (channels to unit order,
powers to the budget): this is a pure congruence/substitution and is undone
when solutions are extracted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Scenario
from .metrics import BeamformingSolution, hermitian_part
from .sdp.problem import ConicProblem, MatrixVar, embed_hermitian_entries


# ---------------------------------------------------------------------------
# aggregate covariance combinations
# ---------------------------------------------------------------------------


def psi_total(comm_covariances, sensing_covariance) -> np.ndarray:
    """Psi = sum_k W_k + R0."""
    mats = [np.asarray(w, dtype=complex) for w in comm_covariances]
    r0 = np.asarray(sensing_covariance, dtype=complex)
    shape = r0.shape
    if any(w.shape != shape for w in mats):
        raise ValueError("covariance dimensions disagree")
    return sum(mats) + r0


def psi_cu(comm_covariances, sensing_covariance, k: int, sinr_min: float) -> np.ndarray:
    """Psi_k = W_k / gamma - sum_{i != k} W_i - R0."""
    if sinr_min <= 0.0:
        raise ValueError("SINR threshold must be positive")
    mats = [np.asarray(w, dtype=complex) for w in comm_covariances]
    out = mats[k] / sinr_min
    for i, w in enumerate(mats):
        if i != k:
            out = out - w
    return out - np.asarray(sensing_covariance, dtype=complex)


def psi_eve(comm_covariances, sensing_covariance, k: int, leak_max: float) -> np.ndarray:
    """Psi_lk: same combination as psi_cu with the leakage threshold."""
    return psi_cu(comm_covariances, sensing_covariance, k, leak_max)


@dataclass
class PsiSet:
    """All aggregates of one candidate solution against one scenario."""

    total: np.ndarray
    cu: list
    eve: list  # eve[l][k]


def psi_set(sol: BeamformingSolution, scenario: Scenario) -> PsiSet:
    w, r0 = sol.comm_covariances, sol.sensing_covariance
    return PsiSet(
        total=psi_total(w, r0),
        cu=[psi_cu(w, r0, k, cu.sinr_min) for k, cu in enumerate(scenario.cus)],
        eve=[
            [psi_eve(w, r0, k, eve.leak_max[k]) for k in range(scenario.num_cus)]
            for eve in scenario.eves
        ],
    )


# ---------------------------------------------------------------------------
# complex/real embedding
# ---------------------------------------------------------------------------


def complex_to_real(h: np.ndarray) -> np.ndarray:
    """Embed a Hermitian matrix as [[Re, -Im], [Im, Re]].

    The output is PSD iff the input is; every eigenvalue appears with doubled
    multiplicity.
    """
    h = np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.abs(h).max(initial=0.0)))
    if float(np.abs(h - h.conj().T).max(initial=0.0)) > 1e-8 * scale:
        raise ValueError("input is not Hermitian")
    h = hermitian_part(h)
    a, b = h.real, h.imag
    return np.block([[a, -b], [b, a]])


# ---------------------------------------------------------------------------
# LMI blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamRef:
    """Reference to a scalar decision parameter of a ConicProblem."""

    index: int


class LmiBlock:
    """Hermitian (N+1)x(N+1) matrix, affine in the decision parameters.

    ``const`` is the constant part; ``coeffs`` maps a parameter index to its
    Hermitian coefficient matrix, stored as upper-triangular (r, c, value)
    entries with the conjugate entry implied.
    """

    def __init__(self, dim: int, tag: str = ""):
        self.dim = dim
        self.tag = tag
        self.const = np.zeros((dim, dim), dtype=complex)
        self.coeffs: dict[int, list[tuple[int, int, complex]]] = {}

    # -- construction helpers
    def add_const(self, r: int, c: int, v: complex) -> None:
        if r > c:
            r, c, v = c, r, np.conj(v)
        self.const[r, c] += v
        if r != c:
            self.const[c, r] += np.conj(v)

    def add_coeff(self, param: int, r: int, c: int, v: complex) -> None:
        if v == 0:
            return
        if r > c:
            r, c, v = c, r, np.conj(v)
        self.coeffs.setdefault(param, []).append((r, c, complex(v)))

    # -- evaluation
    def evaluate(self, values) -> np.ndarray:
        """Dense Hermitian value at a parameter vector (or dict)."""
        out = np.array(self.const)
        get = values.__getitem__
        for param, entries in self.coeffs.items():
            y = get(param)
            for r, c, v in entries:
                out[r, c] += y * v
                if r != c:
                    out[c, r] += y * np.conj(v)
        return out

    def matrix(self) -> np.ndarray:
        if self.coeffs:
            raise ValueError("block depends on decision parameters")
        return np.array(self.const)

    def min_eigenvalue(self, values=None) -> float:
        m = self.matrix() if values is None else self.evaluate(values)
        return float(np.linalg.eigvalsh(hermitian_part(m))[0])

    def is_psd(self, tol: float = 0.0, values=None) -> bool:
        return self.min_eigenvalue(values) >= -tol

    # -- lowering
    def real_parts(self):
        """(const_2d, param_ids, rows, cols, vals) of the real embedding."""
        const_real = complex_to_real(hermitian_part(self.const))
        pids, rows, cols, vals = [], [], [], []
        for param, entries in self.coeffs.items():
            merged: dict[tuple[int, int], complex] = {}
            for r, c, v in entries:
                merged[(r, c)] = merged.get((r, c), 0.0) + v
            er, ec, ev = embed_hermitian_entries(
                [(r, c, v) for (r, c), v in merged.items()], self.dim
            )
            pids.append(np.full(er.shape, param, dtype=np.int64))
            rows.append(er)
            cols.append(ec)
            vals.append(ev)
        if pids:
            return (
                const_real,
                np.concatenate(pids),
                np.concatenate(rows),
                np.concatenate(cols),
                np.concatenate(vals),
            )
        z = np.zeros(0, dtype=np.int64)
        return const_real, z, z.copy(), z.copy(), np.zeros(0)


def _coerce_scalar(x):
    """Split a float-or-ParamRef into (const, param or None)."""
    if isinstance(x, ParamRef):
        return 0.0, x.index
    return float(x), None


def _coerce_psi(psi):
    """Split psi into (const matrix or None, [(MatrixVar, mult), ...])."""
    if isinstance(psi, np.ndarray):
        return np.asarray(psi, dtype=complex), []
    terms = []
    for var, mult in psi:
        if not isinstance(var, MatrixVar):
            raise TypeError("psi terms must be (MatrixVar, float) pairs")
        terms.append((var, float(mult)))
    return None, terms


def _hermitian_basis_entries(var: MatrixVar):
    """Yield (param_id, p, q, value): the complex upper-triangular entry of the
    Hermitian basis matrix of each parameter of ``var``."""
    n = var.dim
    off = var.offset
    for p in range(n):
        yield off + p, p, p, 1.0 + 0.0j
    n_off = n * (n - 1) // 2
    idx = 0
    for p in range(n):
        for q in range(p + 1, n):
            yield off + n + idx, p, q, 1.0 + 0.0j
            yield off + n + n_off + idx, p, q, 1.0j
            idx += 1


def _build_sprocedure_block(psi, h_est, eps, mu, corner_const, corner_params, sign, tag):
    """Common builder for the three S-procedure LMIs.

    The block is [[mu I + sign*Psi, sign*Psi h], [sign*h^H Psi,
    sign*h^H Psi h + corner - mu eps^2]] of complex dimension N+1.
    """
    h = np.asarray(h_est, dtype=complex)
    n = h.shape[0]
    if eps < 0.0:
        raise ValueError("error bound must be nonnegative")
    blk = LmiBlock(n + 1, tag)

    mu_const, mu_param = _coerce_scalar(mu)
    if mu_param is not None:
        for p in range(n):
            blk.add_coeff(mu_param, p, p, 1.0)
        blk.add_coeff(mu_param, n, n, -(eps**2))
    else:
        for p in range(n):
            blk.add_const(p, p, mu_const)
        blk.add_const(n, n, -mu_const * eps**2)

    psi_const, psi_terms = _coerce_psi(psi)
    if psi_const is not None:
        if psi_const.shape != (n, n):
            raise ValueError("psi dimension does not match the channel estimate")
        pm = sign * hermitian_part(psi_const)
        blk.const[:n, :n] += pm
        col = pm @ h
        blk.const[:n, n] += col
        blk.const[n, :n] += col.conj()
        blk.const[n, n] += complex(h.conj() @ pm @ h).real
    for var, mult in psi_terms:
        if var.dim != n:
            raise ValueError("psi dimension does not match the channel estimate")
        m0 = sign * mult
        for param, p, q, e in _hermitian_basis_entries(var):
            e = m0 * e
            if p == q:
                blk.add_coeff(param, p, p, e)
                blk.add_coeff(param, p, n, e * h[p])
                blk.add_coeff(param, n, n, (e * abs(h[p]) ** 2).real)
            else:
                blk.add_coeff(param, p, q, e)
                blk.add_coeff(param, p, n, e * h[q])
                blk.add_coeff(param, q, n, np.conj(e) * h[p])
                corner = e * np.conj(h[p]) * h[q]
                blk.add_coeff(param, n, n, 2.0 * corner.real)

    cc, cp = corner_const, corner_params
    blk.add_const(n, n, cc)
    for param, coeff in cp:
        blk.add_coeff(param, n, n, coeff)
    return blk


def lmi_target(psi, h_est, eps, t, mu, tag: str = "target") -> LmiBlock:
    """Robust beampattern-gain LMI for one sensing target."""
    t_const, t_param = _coerce_scalar(t)
    corner_params = [(t_param, -1.0)] if t_param is not None else []
    return _build_sprocedure_block(
        psi, h_est, eps, mu, -t_const, corner_params, +1.0, tag
    )


def lmi_cu(psi_k, h_est, eps, noise_power, mu, tag: str = "cu") -> LmiBlock:
    """Robust worst-case SINR LMI for one communication user."""
    return _build_sprocedure_block(
        psi_k, h_est, eps, mu, -float(noise_power), [], +1.0, tag
    )


def lmi_eve(psi_lk, h_est, eps, noise_power, mu, tag: str = "eve") -> LmiBlock:
    """Robust best-case leakage LMI for one (eavesdropper, CU) pair; note the
    sign flips relative to :func:`lmi_cu`."""
    return _build_sprocedure_block(
        psi_lk, h_est, eps, mu, +float(noise_power), [], -1.0, tag
    )


def search_certifying_multiplier(block_fn, tol: float = 1e-11):
    """Maximize the minimum eigenvalue of an LMI over its slack mu >= 0.

    ``block_fn(mu)`` must return the numeric LMI for a given multiplier.  The
    minimum eigenvalue is concave in mu (the block is affine in it), so a
    bracket expansion followed by golden-section search is exact.  Returns
    (mu_star, min_eigenvalue); the LMI is feasible over mu >= 0 iff the
    returned eigenvalue is >= 0 (up to numerical tolerance).  Intended for
    eps > 0 blocks; at eps = 0 the eigenvalue can plateau and the search only
    returns a lower bound.
    """

    def f(mu):
        return block_fn(mu).min_eigenvalue()

    lo, hi = 0.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    while f_hi > f_lo and hi < 1e12:
        lo, f_lo = hi, f_hi
        hi *= 4.0
        f_hi = f(hi)
    lo = 0.0 if lo == 0.0 or hi <= 4.0 else lo / 4.0
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol * max(1.0, b):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = f(x1)
    best = max((f(a), a), (f1, x1), (f2, x2), (f(b), b))
    return best[1], best[0]


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemScaling:
    """Internal conditioning: channels scaled to unit order, powers to the
    budget.  Constraints transform by congruence, so the scaled SDP is exactly
    equivalent; quadratic-form values (sigma^2, t) pick up channel^2 * power.
    """

    channel: float
    power: float

    @property
    def value(self) -> float:
        return self.channel**2 * self.power

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "ProblemScaling":
        norms = [
            float(np.linalg.norm(ent.csi.vector))
            for ent in (*scenario.cus, *scenario.eves, *scenario.targets)
        ]
        norms = [x for x in norms if x > 0.0]
        # anchor to the largest channel so every coefficient entering the
        # solver is O(1) and absolute residual tolerances behave relatively
        channel = 1.0 / max(norms) if norms else 1.0
        return cls(channel=channel, power=1.0 / scenario.power_budget)


# Default interior margin on the SINR thresholds used by the solve pipeline.
# Finite solver tolerances translate into worst-case SINR errors amplified by
# the inverse interference level; tightening the thresholds by this relative
# margin during optimization keeps the *true* constraints strictly satisfied.
# Delivered solutions are always verified against the unmargined thresholds.
DEFAULT_THRESHOLD_MARGIN = 2e-4


def assemble_p2(
    scenario: Scenario,
    srocr_cuts=None,
    include_sensing: bool = True,
    threshold_margin: float = 0.0,
) -> ConicProblem:
    """Build the LMI-constrained SDP for a scenario.

    Decision variables: Hermitian PSD covariances W_1..W_K (and R0 unless
    ``include_sensing`` is False), one nonnegative slack per robust
    constraint with a positive error bound, and the free objective t
    (maximized).  Constraints: the power budget, one LMI (or degenerate
    nominal row, see module docstring) per target / CU / (eavesdropper, CU)
    pair, and optionally one linear eigenvector cut per CU:
    u_k^H W_k u_k >= v_k tr(W_k), supplied as ``srocr_cuts = [(u_k, v_k)]``.

    ``threshold_margin`` tightens every CU threshold to gamma*(1 + margin)
    and every leakage threshold to gamma*(1 - margin); see
    DEFAULT_THRESHOLD_MARGIN.

    Rank-one constraints are *not* encoded; the sequential relaxation driver
    (or plain relaxation for the SDR baseline) is responsible for them.
    """
    if not 0.0 <= threshold_margin < 1.0:
        raise ValueError("threshold_margin must lie in [0, 1)")
    geom = scenario.geometry
    n = geom.antenna_count
    kk, ll, mm = scenario.num_cus, scenario.num_eves, scenario.num_targets
    sc = ProblemScaling.for_scenario(scenario)

    prob = ConicProblem()
    w_vars = [prob.add_hermitian_var(f"W_{k + 1}", n) for k in range(kk)]
    r0_var = prob.add_hermitian_var("R0", n) if include_sensing else None
    mu_params: dict[tuple, int | None] = {}
    for k, cu in enumerate(scenario.cus):
        key = ("cu", k)
        mu_params[key] = (
            prob.add_nonneg(f"mu_C_{k + 1}") if cu.csi.error_bound > 0.0 else None
        )
    for l, eve in enumerate(scenario.eves):
        for k in range(kk):
            key = ("eve", l, k)
            mu_params[key] = (
                prob.add_nonneg(f"mu_E_{l + 1}_{k + 1}")
                if eve.csi.error_bound > 0.0
                else None
            )
    for m, tgt in enumerate(scenario.targets):
        key = ("target", m)
        mu_params[key] = (
            prob.add_nonneg(f"mu_T_{m + 1}") if tgt.csi.error_bound > 0.0 else None
        )
    t_param = prob.add_free("t")
    prob.set_objective({t_param: 1.0})

    all_vars = w_vars + ([r0_var] if r0_var is not None else [])
    psi_full = [(v, 1.0) for v in all_vars]

    def psi_terms(k: int, threshold: float):
        terms = [(w_vars[k], 1.0 / threshold)]
        terms += [(w_vars[i], -1.0) for i in range(kk) if i != k]
        if r0_var is not None:
            terms.append((r0_var, -1.0))
        return terms

    def row_from_terms(terms, h, extra=None):
        """Coefficients of <h h^H, sum_j mult_j V_j> plus extra scalar terms."""
        coeffs = np.zeros(prob.n_params)
        q = np.outer(h, h.conj())
        for var, mult in terms:
            coeffs[var.param_slice] += mult * var.inner_coeffs(q)
        for param, c in extra or []:
            coeffs[param] += c
        return coeffs

    def add_block(blk: LmiBlock):
        const_real, pids, rows, cols, vals = blk.real_parts()
        prob.add_lmi(2 * blk.dim, const_real, pids, rows, cols, vals, blk.tag)

    # power budget (scaled to tr(sum) <= 1)
    power_row = np.zeros(prob.n_params)
    for var in all_vars:
        power_row[var.offset : var.offset + n] = 1.0
    prob.add_row(power_row, "<=", 1.0, "power")

    lmi_logical = 0
    for m, tgt in enumerate(scenario.targets):
        h = sc.channel * tgt.csi.vector
        eps = sc.channel * tgt.csi.error_bound
        tag = f"target_{m + 1}"
        if eps > 0.0:
            add_block(
                lmi_target(
                    psi_full, h, eps, ParamRef(t_param),
                    ParamRef(mu_params[("target", m)]), tag,
                )
            )
            lmi_logical += 1
        else:
            # nominal: t - h^H Psi h <= 0
            coeffs = -row_from_terms(psi_full, h)
            coeffs[t_param] += 1.0
            prob.add_row(coeffs, "<=", 0.0, tag + "_nominal")
    for k, cu in enumerate(scenario.cus):
        h = sc.channel * cu.csi.vector
        eps = sc.channel * cu.csi.error_bound
        sig = sc.value * cu.noise_power
        tag = f"cu_{k + 1}"
        terms = psi_terms(k, cu.sinr_min * (1.0 + threshold_margin))
        if eps > 0.0:
            add_block(
                lmi_cu(terms, h, eps, sig, ParamRef(mu_params[("cu", k)]), tag)
            )
            lmi_logical += 1
        else:
            prob.add_row(-row_from_terms(terms, h), "<=", -sig, tag + "_nominal")
    for l, eve in enumerate(scenario.eves):
        h = sc.channel * eve.csi.vector
        eps = sc.channel * eve.csi.error_bound
        sig = sc.value * eve.noise_power
        for k in range(kk):
            tag = f"eve_{l + 1}_{k + 1}"
            terms = psi_terms(k, eve.leak_max[k] * (1.0 - threshold_margin))
            if eps > 0.0:
                add_block(
                    lmi_eve(terms, h, eps, sig, ParamRef(mu_params[("eve", l, k)]), tag)
                )
                lmi_logical += 1
            else:
                prob.add_row(row_from_terms(terms, h), "<=", sig, tag + "_nominal")

    if srocr_cuts is not None:
        if len(srocr_cuts) != kk:
            raise ValueError("need one eigenvector cut per communication user")
        for k, (u, v) in enumerate(srocr_cuts):
            u = np.asarray(u, dtype=complex)
            q = np.outer(u, u.conj()) - float(v) * np.eye(n)
            prob.add_row(
                -_inner_row(prob, w_vars[k], q), "<=", 0.0, f"srocr_{k + 1}"
            )

    if mm == 0:
        # no sensing targets: the max-min gain degenerates to zero
        prob.add_row({t_param: 1.0}, "<=", 0.0, "t_degenerate")

    prob.meta = {
        "scaling": sc,
        "t_param": t_param,
        "mu_params": mu_params,
        "w_vars": w_vars,
        "r0_var": r0_var,
        "counts": {
            "lmi_np1": lmi_logical,
            "psd_vars_n": len(all_vars),
            "params": prob.n_params,
        },
    }
    prob.validate()
    return prob


def _inner_row(prob: ConicProblem, var: MatrixVar, q: np.ndarray) -> np.ndarray:
    coeffs = np.zeros(prob.n_params)
    coeffs[var.param_slice] = var.inner_coeffs(q)
    return coeffs


def solution_from_result(problem: ConicProblem, result, scenario: Scenario) -> BeamformingSolution:
    """Map a solver result back to unscaled covariances, slacks, and objective."""
    meta = problem.meta
    sc: ProblemScaling = meta["scaling"]
    kk, ll, mm = scenario.num_cus, scenario.num_eves, scenario.num_targets
    w = [result.matrix_values[f"W_{k + 1}"] / sc.power for k in range(kk)]
    if meta["r0_var"] is not None:
        r0 = result.matrix_values["R0"] / sc.power
    else:
        r0 = np.zeros((scenario.geometry.antenna_count,) * 2, dtype=complex)
    t = result.scalar_values["t"] / sc.value

    def mu_value(key):
        param = meta["mu_params"].get(key)
        if param is None:
            return 0.0
        name = [nm for nm, idx in problem.nonneg_params if idx == param][0]
        return max(0.0, result.scalar_values[name]) / sc.power

    slacks = [mu_value(("cu", k)) for k in range(kk)]
    slacks += [mu_value(("eve", l, k)) for l in range(ll) for k in range(kk)]
    slacks += [mu_value(("target", m)) for m in range(mm)]
    return BeamformingSolution(
        comm_covariances=[hermitian_part(x) for x in w],
        sensing_covariance=hermitian_part(r0),
        objective=float(t),
        slacks=np.asarray(slacks),
    )
