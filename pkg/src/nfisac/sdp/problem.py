"""Conic problem container and its lowering to solver-ready block data.

A :class:`ConicProblem` holds

* PSD matrix variables (complex Hermitian or real symmetric), scalarized into
  a flat real parameter vector ``y``;
* nonnegative and free scalar variables;
* a linear objective (always maximized);
* scalar linear rows (``<=`` / ``==``); and
* LMI constraints: real symmetric affine matrix functions of ``y`` required
  to be PSD.

Complex Hermitian quantities are embedded as real symmetric blocks of twice
the size before they reach the solver; the embedding doubles every eigenvalue
multiplicity, which is benign for feasibility and optimal values.  A Hermitian
N x N variable contributes N**2 real parameters (diagonal, then real and
imaginary parts of the upper triangle).

Coefficient matrices of LMIs are stored in "full COO" convention: the matrix
is exactly sum(v * e_r e_c^T) over the stored triplets, i.e. symmetric
counterparts are stored explicitly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

COMPLEX_HERMITIAN = "complex_hermitian"
REAL_SYMMETRIC = "real_symmetric"


def _upper_pairs(n: int):
    for p in range(n):
        for q in range(p + 1, n):
            yield p, q


@dataclass
class MatrixVar:
    """One PSD matrix variable and its parameterization."""

    name: str
    dim: int
    kind: str
    offset: int  # first global parameter index

    @property
    def n_params(self) -> int:
        if self.kind == COMPLEX_HERMITIAN:
            return self.dim * self.dim
        return self.dim * (self.dim + 1) // 2

    @property
    def block_dim(self) -> int:
        """Dimension of the real PSD cone block enforcing this variable."""
        return 2 * self.dim if self.kind == COMPLEX_HERMITIAN else self.dim

    @property
    def param_slice(self) -> slice:
        return slice(self.offset, self.offset + self.n_params)

    def to_matrix(self, y: np.ndarray) -> np.ndarray:
        """Materialize the matrix from a full parameter vector."""
        p = np.asarray(y)[self.param_slice]
        n = self.dim
        if self.kind == REAL_SYMMETRIC:
            m = np.zeros((n, n))
            m[np.diag_indices(n)] = p[:n]
            for idx, (r, c) in enumerate(_upper_pairs(n)):
                m[r, c] = m[c, r] = p[n + idx]
            return m
        m = np.zeros((n, n), dtype=complex)
        m[np.diag_indices(n)] = p[:n]
        n_off = n * (n - 1) // 2
        for idx, (r, c) in enumerate(_upper_pairs(n)):
            v = p[n + idx] + 1j * p[n + n_off + idx]
            m[r, c] = v
            m[c, r] = v.conjugate()
        return m

    def from_matrix(self, m: np.ndarray) -> np.ndarray:
        """Local parameter vector representing (the Hermitian part of) m."""
        n = self.dim
        m = np.asarray(m)
        m = 0.5 * (m + m.conj().T)
        out = np.zeros(self.n_params)
        out[:n] = np.real(np.diag(m))
        if self.kind == REAL_SYMMETRIC:
            for idx, (r, c) in enumerate(_upper_pairs(n)):
                out[n + idx] = np.real(m[r, c])
            return out
        n_off = n * (n - 1) // 2
        for idx, (r, c) in enumerate(_upper_pairs(n)):
            out[n + idx] = np.real(m[r, c])
            out[n + n_off + idx] = np.imag(m[r, c])
        return out

    def inner_coeffs(self, q: np.ndarray) -> np.ndarray:
        """Local coefficients c with c . params == Re tr(Q X).

        Q is symmetrized first, so only its Hermitian part matters.
        """
        n = self.dim
        q = np.asarray(q)
        q = 0.5 * (q + q.conj().T)
        out = np.zeros(self.n_params)
        out[:n] = np.real(np.diag(q))
        if self.kind == REAL_SYMMETRIC:
            for idx, (r, c) in enumerate(_upper_pairs(n)):
                out[n + idx] = 2.0 * np.real(q[r, c])
            return out
        n_off = n * (n - 1) // 2
        for idx, (r, c) in enumerate(_upper_pairs(n)):
            out[n + idx] = 2.0 * np.real(q[r, c])
            out[n + n_off + idx] = 2.0 * np.imag(q[r, c])
        return out

    def basis_coo(self):
        """Full-COO patterns of the cone block enforcing X >= 0.

        Returns (param_ids, rows, cols, vals) with *global* parameter ids.
        For a Hermitian variable the patterns live in the real embedding
        [[Re X, -Im X], [Im X, Re X]] of size 2*dim.
        """
        n = self.dim
        pids, rows, cols, vals = [], [], [], []

        def put(pid, r, c, v):
            pids.append(pid)
            rows.append(r)
            cols.append(c)
            vals.append(v)

        if self.kind == REAL_SYMMETRIC:
            for p in range(n):
                put(self.offset + p, p, p, 1.0)
            for idx, (r, c) in enumerate(_upper_pairs(n)):
                pid = self.offset + n + idx
                put(pid, r, c, 1.0)
                put(pid, c, r, 1.0)
        else:
            n_off = n * (n - 1) // 2
            for p in range(n):
                pid = self.offset + p
                put(pid, p, p, 1.0)
                put(pid, n + p, n + p, 1.0)
            for idx, (r, c) in enumerate(_upper_pairs(n)):
                pid = self.offset + n + idx
                put(pid, r, c, 1.0)
                put(pid, c, r, 1.0)
                put(pid, n + r, n + c, 1.0)
                put(pid, n + c, n + r, 1.0)
                pid = self.offset + n + n_off + idx
                # Im part: B[r,c]=1, B[c,r]=-1 in [[A,-B],[B,A]]
                put(pid, r, n + c, -1.0)
                put(pid, n + c, r, -1.0)
                put(pid, c, n + r, 1.0)
                put(pid, n + r, c, 1.0)
        return (
            np.asarray(pids, dtype=np.int64),
            np.asarray(rows, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=float),
        )


def embed_hermitian_entries(entries, dim: int):
    """Map complex upper-triangular entries of a Hermitian matrix function to
    full-COO entries of its real 2*dim embedding.

    ``entries`` is an iterable of (r, c, complex value) with r <= c; the
    implied conjugate entry at (c, r) is expanded here.
    """
    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for r, c, v in entries:
        if r > c:
            raise ValueError("entries must be upper-triangular (r <= c)")
        a, b = float(np.real(v)), float(np.imag(v))
        if r == c:
            if abs(b) > 0.0:
                raise ValueError("diagonal of a Hermitian matrix must be real")
            put(r, r, a)
            put(dim + r, dim + r, a)
            continue
        if a != 0.0:
            put(r, c, a)
            put(c, r, a)
            put(dim + r, dim + c, a)
            put(dim + c, dim + r, a)
        if b != 0.0:
            put(r, dim + c, -b)
            put(dim + c, r, -b)
            put(c, dim + r, b)
            put(dim + r, c, b)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=float),
    )


@dataclass
class LinearRow:
    coeffs: np.ndarray
    op: str  # "<=" or "=="
    rhs: float
    tag: str = ""


@dataclass
class LmiData:
    """Real symmetric affine-PSD constraint const + sum(y_j A_j) >= 0."""

    dim: int
    const: np.ndarray
    param_ids: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    tag: str = ""

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        m = np.array(self.const, dtype=float)
        if self.param_ids.size:
            np.add.at(
                m,
                (self.rows, self.cols),
                self.vals * np.asarray(y)[self.param_ids],
            )
        return m


class ConicProblem:
    """See module docstring.  Build with the add_* methods, then validate()."""

    def __init__(self):
        self.matrix_vars: list[MatrixVar] = []
        self.nonneg_params: list[tuple[str, int]] = []
        self.free_params: list[tuple[str, int]] = []
        self.rows: list[LinearRow] = []
        self.lmis: list[LmiData] = []
        self._n_params = 0
        self._objective: np.ndarray | None = None
        self.meta: dict = {}

    # ---- variables -----------------------------------------------------
    @property
    def n_params(self) -> int:
        return self._n_params

    def add_hermitian_var(self, name: str, dim: int) -> MatrixVar:
        return self._add_matrix_var(name, dim, COMPLEX_HERMITIAN)

    def add_symmetric_var(self, name: str, dim: int) -> MatrixVar:
        return self._add_matrix_var(name, dim, REAL_SYMMETRIC)

    def _add_matrix_var(self, name, dim, kind) -> MatrixVar:
        if dim < 1:
            raise ValueError("matrix dimension must be >= 1")
        var = MatrixVar(name, dim, kind, self._n_params)
        self.matrix_vars.append(var)
        self._n_params += var.n_params
        return var

    def add_nonneg(self, name: str) -> int:
        idx = self._n_params
        self.nonneg_params.append((name, idx))
        self._n_params += 1
        return idx

    def add_free(self, name: str) -> int:
        idx = self._n_params
        self.free_params.append((name, idx))
        self._n_params += 1
        return idx

    # ---- objective and constraints --------------------------------------
    def set_objective(self, coeffs) -> None:
        """Linear objective, always in maximization sense."""
        vec = self._as_coeff_vector(coeffs)
        self._objective = vec

    @property
    def objective(self) -> np.ndarray:
        if self._objective is None:
            return np.zeros(self._n_params)
        if self._objective.shape[0] != self._n_params:
            out = np.zeros(self._n_params)
            out[: self._objective.shape[0]] = self._objective
            return out
        return self._objective

    def _as_coeff_vector(self, coeffs) -> np.ndarray:
        if isinstance(coeffs, dict):
            vec = np.zeros(self._n_params)
            for idx, v in coeffs.items():
                vec[idx] = v
            return vec
        vec = np.zeros(self._n_params)
        arr = np.asarray(coeffs, dtype=float)
        vec[: arr.shape[0]] = arr
        return vec

    def add_row(self, coeffs, op: str, rhs: float, tag: str = "") -> None:
        if op not in ("<=", "=="):
            raise ValueError("row operator must be '<=' or '=='")
        self.rows.append(LinearRow(self._as_coeff_vector(coeffs), op, float(rhs), tag))

    def add_lmi(
        self, dim, const, param_ids, rows, cols, vals, tag: str = ""
    ) -> None:
        const = np.asarray(const, dtype=float)
        if const.shape != (dim, dim):
            raise ValueError("LMI constant has wrong shape")
        self.lmis.append(
            LmiData(
                dim,
                0.5 * (const + const.T),
                np.asarray(param_ids, dtype=np.int64),
                np.asarray(rows, dtype=np.int64),
                np.asarray(cols, dtype=np.int64),
                np.asarray(vals, dtype=float),
                tag,
            )
        )

    # ---- bookkeeping -----------------------------------------------------
    def param_names(self) -> list[str]:
        names = [""] * self._n_params
        for var in self.matrix_vars:
            n = var.dim
            for p in range(n):
                names[var.offset + p] = f"{var.name}[{p},{p}]"
            if var.kind == REAL_SYMMETRIC:
                for idx, (r, c) in enumerate(_upper_pairs(n)):
                    names[var.offset + n + idx] = f"{var.name}[{r},{c}]"
            else:
                n_off = n * (n - 1) // 2
                for idx, (r, c) in enumerate(_upper_pairs(n)):
                    names[var.offset + n + idx] = f"{var.name}.re[{r},{c}]"
                    names[var.offset + n + n_off + idx] = f"{var.name}.im[{r},{c}]"
        for name, idx in self.nonneg_params:
            names[idx] = name
        for name, idx in self.free_params:
            names[idx] = name
        return names

    def validate(self) -> None:
        """Check coefficient/dimension consistency; raises ValueError."""
        n = self._n_params
        if n == 0:
            raise ValueError("problem has no variables")
        for row in self.rows:
            if row.coeffs.shape != (n,):
                raise ValueError(f"row '{row.tag}' has wrong coefficient length")
        for i, lmi in enumerate(self.lmis):
            if lmi.param_ids.size and (
                lmi.param_ids.min() < 0 or lmi.param_ids.max() >= n
            ):
                raise ValueError(f"LMI '{lmi.tag or i}' references unknown parameter")
            for arr in (lmi.rows, lmi.cols):
                if arr.size and (arr.min() < 0 or arr.max() >= lmi.dim):
                    raise ValueError(f"LMI '{lmi.tag or i}' has out-of-range indices")
            if not (
                lmi.param_ids.shape == lmi.rows.shape == lmi.cols.shape == lmi.vals.shape
            ):
                raise ValueError(f"LMI '{lmi.tag or i}' has ragged COO arrays")
        if self.objective.shape != (n,):
            raise ValueError("objective has wrong length")

    # ---- text interfaces -------------------------------------------------
    def debug_dump(self) -> str:
        """Self-describing listing of blocks, dimensions, and tags for diffing."""
        out = io.StringIO()
        print(f"conic problem: {self._n_params} parameters", file=out)
        for var in self.matrix_vars:
            print(
                f"  matrix var {var.name}: dim={var.dim} kind={var.kind} "
                f"params={var.offset}..{var.offset + var.n_params - 1} "
                f"(cone block dim {var.block_dim})",
                file=out,
            )
        for name, idx in self.nonneg_params:
            print(f"  nonneg var {name}: param {idx}", file=out)
        for name, idx in self.free_params:
            print(f"  free var {name}: param {idx}", file=out)
        nz = np.nonzero(self.objective)[0]
        names = self.param_names()
        terms = " + ".join(f"{self.objective[i]:g}*{names[i]}" for i in nz)
        print(f"  maximize {terms or '0'}", file=out)
        for row in self.rows:
            print(
                f"  row[{row.tag}] {row.op} {row.rhs!r} "
                f"({int(np.count_nonzero(row.coeffs))} coefficients)",
                file=out,
            )
        for lmi in self.lmis:
            print(
                f"  lmi[{lmi.tag}] dim={lmi.dim} nnz={lmi.vals.size} "
                f"params={np.unique(lmi.param_ids).size}",
                file=out,
            )
        return out.getvalue()

    def to_text(self) -> str:
        """Lossless plain-text serialization (variable table + triplets)."""
        out = io.StringIO()
        print("nfisac-conic-problem v1", file=out)
        for var in self.matrix_vars:
            print(f"matrix {var.name} {var.dim} {var.kind}", file=out)
        for name, _ in self.nonneg_params:
            print(f"nonneg {name}", file=out)
        for name, _ in self.free_params:
            print(f"free {name}", file=out)
        obj = self.objective
        for i in np.nonzero(obj)[0]:
            print(f"obj {i} {float(obj[i])!r}", file=out)
        for row in self.rows:
            print(f"row {row.op} {float(row.rhs)!r} {row.tag}", file=out)
            for i in np.nonzero(row.coeffs)[0]:
                print(f"  c {i} {float(row.coeffs[i])!r}", file=out)
        for lmi in self.lmis:
            print(f"lmi {lmi.dim} {lmi.tag}", file=out)
            for r in range(lmi.dim):
                for c in range(lmi.dim):
                    if lmi.const[r, c] != 0.0:
                        print(f"  k {r} {c} {float(lmi.const[r, c])!r}", file=out)
            for p, r, c, v in zip(lmi.param_ids, lmi.rows, lmi.cols, lmi.vals):
                print(f"  a {int(p)} {int(r)} {int(c)} {float(v)!r}", file=out)
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ConicProblem":
        prob = cls()
        obj: dict[int, float] = {}
        cur_row = None
        cur_lmi = None  # (dim, tag, const entries, coo lists)

        def flush_lmi():
            nonlocal cur_lmi
            if cur_lmi is None:
                return
            dim, tag, kent, coo = cur_lmi
            const = np.zeros((dim, dim))
            for r, c, v in kent:
                const[r, c] = v
            prob.add_lmi(
                dim,
                const,
                [e[0] for e in coo],
                [e[1] for e in coo],
                [e[2] for e in coo],
                [e[3] for e in coo],
                tag,
            )
            cur_lmi = None

        lines = text.splitlines()
        if not lines or lines[0].strip() != "nfisac-conic-problem v1":
            raise ValueError("not a serialized conic problem")
        for line in lines[1:]:
            if not line.strip():
                continue
            parts = line.split()
            kind = parts[0]
            if kind == "matrix":
                flush_lmi()
                _, name, dim, mkind = parts
                prob._add_matrix_var(name, int(dim), mkind)
            elif kind == "nonneg":
                flush_lmi()
                prob.add_nonneg(parts[1])
            elif kind == "free":
                flush_lmi()
                prob.add_free(parts[1])
            elif kind == "obj":
                obj[int(parts[1])] = float(parts[2])
            elif kind == "row":
                flush_lmi()
                tag = " ".join(parts[3:]) if len(parts) > 3 else ""
                cur_row = LinearRow(np.zeros(0), parts[1], float(parts[2]), tag)
                cur_row._pending = {}  # type: ignore[attr-defined]
                prob.rows.append(cur_row)
            elif kind == "c":
                cur_row._pending[int(parts[1])] = float(parts[2])  # type: ignore[attr-defined]
            elif kind == "lmi":
                flush_lmi()
                tag = " ".join(parts[2:]) if len(parts) > 2 else ""
                cur_lmi = (int(parts[1]), tag, [], [])
            elif kind == "k":
                cur_lmi[2].append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif kind == "a":
                cur_lmi[3].append(
                    (int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]))
                )
            else:
                raise ValueError(f"unknown record '{kind}'")
        flush_lmi()
        for row in prob.rows:
            pending = getattr(row, "_pending", {})
            row.coeffs = np.zeros(prob.n_params)
            for idx, v in pending.items():
                row.coeffs[idx] = v
            if hasattr(row, "_pending"):
                del row._pending
        prob.set_objective(obj)
        prob.validate()
        return prob


# ---------------------------------------------------------------------------
# Lowering to solver block data
# ---------------------------------------------------------------------------


@dataclass
class ConeBlock:
    """One PSD cone block of the lowered problem: s_block(y) = const + sum y_j A_j."""

    dim: int
    const: np.ndarray
    param_ids: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    origin: tuple
    # grouped-by-parameter views, filled by finalize():
    uniq: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ptr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    srows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    scols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    svals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=float))
    dense_stack: np.ndarray | None = None  # (n_active, dim, dim), numpy backend cache

    def finalize(self):
        order = np.argsort(self.param_ids, kind="stable")
        pids = self.param_ids[order]
        self.srows = np.ascontiguousarray(self.rows[order])
        self.scols = np.ascontiguousarray(self.cols[order])
        self.svals = np.ascontiguousarray(self.vals[order])
        self.uniq, counts = np.unique(pids, return_counts=True)
        self.ptr = np.zeros(self.uniq.size + 1, dtype=np.int64)
        np.cumsum(counts, out=self.ptr[1:])

    def stack(self) -> np.ndarray:
        """Dense (n_active, dim, dim) coefficient stack (cached)."""
        if self.dense_stack is None:
            na = self.uniq.size
            st = np.zeros((na, self.dim, self.dim))
            for j in range(na):
                lo, hi = self.ptr[j], self.ptr[j + 1]
                np.add.at(
                    st[j], (self.srows[lo:hi], self.scols[lo:hi]), self.svals[lo:hi]
                )
            self.dense_stack = st
        return self.dense_stack

    def apply(self, y: np.ndarray) -> np.ndarray:
        """sum_j y_j A_j as a dense matrix."""
        m = np.zeros((self.dim, self.dim))
        if self.param_ids.size:
            np.add.at(
                m, (self.rows, self.cols), self.vals * np.asarray(y)[self.param_ids]
            )
        return m

    def adjoint_into(self, z: np.ndarray, out: np.ndarray) -> None:
        """out[j] += <A_j, Z> for every referenced parameter j."""
        if self.param_ids.size:
            np.add.at(out, self.param_ids, self.vals * z[self.rows, self.cols])


@dataclass
class CoreData:
    """Standard-form data: min c.y s.t. A_eq y = b_eq, s = h - G y in K."""

    n: int
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    g_diag: np.ndarray
    h_diag: np.ndarray
    diag_origin: list
    blocks: list[ConeBlock]
    data_norm: float

    @property
    def cone_degree(self) -> int:
        return self.h_diag.shape[0] + sum(b.dim for b in self.blocks)


def lower(problem: ConicProblem) -> CoreData:
    problem.validate()
    n = problem.n_params
    c = -problem.objective

    eq_rows = [r for r in problem.rows if r.op == "=="]
    a_eq = (
        np.vstack([r.coeffs for r in eq_rows]) if eq_rows else np.zeros((0, n))
    )
    b_eq = np.asarray([r.rhs for r in eq_rows])

    g_rows, h_vals, diag_origin = [], [], []
    for _, idx in problem.nonneg_params:
        row = np.zeros(n)
        row[idx] = -1.0
        g_rows.append(row)
        h_vals.append(0.0)
        diag_origin.append(("nonneg", idx))
    for i, r in enumerate(problem.rows):
        if r.op == "<=":
            g_rows.append(r.coeffs)
            h_vals.append(r.rhs)
            diag_origin.append(("ineq", i))
    g_diag = np.vstack(g_rows) if g_rows else np.zeros((0, n))
    h_diag = np.asarray(h_vals)

    blocks: list[ConeBlock] = []
    for vi, var in enumerate(problem.matrix_vars):
        pids, rows, cols, vals = var.basis_coo()
        blk = ConeBlock(
            var.block_dim,
            np.zeros((var.block_dim, var.block_dim)),
            pids,
            rows,
            cols,
            vals,
            ("var", vi),
        )
        blk.finalize()
        blocks.append(blk)
    for li, lmi in enumerate(problem.lmis):
        blk = ConeBlock(
            lmi.dim,
            np.array(lmi.const),
            lmi.param_ids,
            lmi.rows,
            lmi.cols,
            lmi.vals,
            ("lmi", li),
        )
        blk.finalize()
        blocks.append(blk)

    norms = [1.0, float(np.abs(c).max(initial=0.0))]
    if a_eq.size:
        norms.append(float(np.abs(a_eq).max()))
    if g_diag.size:
        norms.append(float(np.abs(g_diag).max()))
    if h_diag.size:
        norms.append(float(np.abs(h_diag).max()))
    for blk in blocks:
        if blk.vals.size:
            norms.append(float(np.abs(blk.vals).max()))
        if blk.const.size:
            norms.append(float(np.abs(blk.const).max()))
    return CoreData(
        n, c, a_eq, b_eq, g_diag, h_diag, diag_origin, blocks, max(norms)
    )
