"""Nominal (fixed-channel) SINR, beampattern gain, and power accounting.

Everything here evaluates a candidate design at a *given* channel vector; the
worst-case counterparts over the CSI uncertainty ball live in
:mod:`nfisac.verifier`.  Metrics are computed from covariance matrices so that
relaxed solutions of rank > 1 remain evaluable; every quadratic form is taken
through an explicit Hermitian symmetrization to suppress solver asymmetry
noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, PolarPoint, channel


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def quad_form(h: np.ndarray, a: np.ndarray) -> float:
    """Real value of h^H A h with A symmetrized first."""
    return float(np.real(h.conj() @ hermitian_part(a) @ h))


@dataclass
class BeamformingSolution:
    """Communication covariances, sensing covariance, objective, and slacks.

    ``slacks`` concatenates the S-procedure multipliers in the order
    [mu_C1..mu_CK, mu_E(1,1)..mu_E(1,K), .., mu_E(L,1)..mu_E(L,K),
    mu_T1..mu_TM]; entries belonging to constraints with a zero error bound
    (which degenerate to plain linear constraints) are reported as 0.
    ``comm_vectors`` is populated once rank-one beamformers have been
    extracted.
    """

    comm_covariances: list[np.ndarray]
    sensing_covariance: np.ndarray
    objective: float
    slacks: np.ndarray
    comm_vectors: list[np.ndarray] | None = None

    def __post_init__(self):
        self.comm_covariances = [np.asarray(w, dtype=complex) for w in self.comm_covariances]
        self.sensing_covariance = np.asarray(self.sensing_covariance, dtype=complex)
        self.slacks = np.asarray(self.slacks, dtype=float)

    @property
    def num_cus(self) -> int:
        return len(self.comm_covariances)

    def check_structure(self, herm_tol=1e-10, psd_tol=1e-8, rank_one_tol=1e-3):
        """Raise if matrices are not numerically Hermitian PSD, or if extracted
        vectors disagree with their covariances."""
        for name, m in self._named_matrices():
            if np.linalg.norm(m - m.conj().T, ord=np.inf) > herm_tol * max(
                1.0, float(np.linalg.norm(m, ord=np.inf))
            ):
                raise ValueError(f"{name} is not Hermitian")
            if float(np.linalg.eigvalsh(hermitian_part(m))[0]) < -psd_tol:
                raise ValueError(f"{name} is not PSD")
        if self.comm_vectors is not None:
            for k, (w_mat, w_vec) in enumerate(
                zip(self.comm_covariances, self.comm_vectors)
            ):
                err = np.linalg.norm(w_mat - np.outer(w_vec, w_vec.conj()))
                if err > rank_one_tol * max(1.0, float(np.linalg.norm(w_mat))):
                    raise ValueError(f"W_{k + 1} disagrees with its extracted vector")

    def _named_matrices(self):
        for k, w in enumerate(self.comm_covariances):
            yield f"W_{k + 1}", w
        yield "R0", self.sensing_covariance


def total_power(sol: BeamformingSolution) -> float:
    """Transmit power: sum of covariance traces."""
    p = sum(float(np.real(np.trace(w))) for w in sol.comm_covariances)
    return p + float(np.real(np.trace(sol.sensing_covariance)))


def _interference(sol: BeamformingSolution, h: np.ndarray, k: int) -> float:
    acc = 0.0
    for i, w in enumerate(sol.comm_covariances):
        if i != k:
            acc += quad_form(h, w)
    return acc + quad_form(h, sol.sensing_covariance)


def nominal_cu_sinr(
    sol: BeamformingSolution, h: np.ndarray, k: int, noise_power: float
) -> float:
    """SINR of CU k at channel h: own-beam power over interference plus noise."""
    if noise_power <= 0.0:
        raise ValueError("noise power must be positive")
    num = quad_form(h, sol.comm_covariances[k])
    return num / (_interference(sol, h, k) + noise_power)


def nominal_eve_sinr(
    sol: BeamformingSolution, h: np.ndarray, k: int, noise_power: float
) -> float:
    """SINR an eavesdropper at channel h attains on CU k's stream."""
    if noise_power <= 0.0:
        raise ValueError("noise power must be positive")
    num = quad_form(h, sol.comm_covariances[k])
    return num / (_interference(sol, h, k) + noise_power)


def beampattern_gain(sol: BeamformingSolution, h: np.ndarray) -> float:
    """Power illuminated at channel h by the full transmit covariance."""
    psi = sum(sol.comm_covariances) + sol.sensing_covariance
    return quad_form(h, psi)


def beampattern_map(
    sol: BeamformingSolution,
    geom: ArrayGeometry,
    r_grid,
    theta_grid,
) -> np.ndarray:
    """Beampattern gain over a polar grid; entry (i, j) is (r_i, theta_j)."""
    r_grid = np.asarray(r_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    if r_grid.size == 0 or theta_grid.size == 0:
        raise ValueError("grids must be nonempty")
    psi = hermitian_part(sum(sol.comm_covariances) + sol.sensing_covariance)
    out = np.empty((r_grid.size, theta_grid.size))
    for i, r in enumerate(r_grid):
        for j, th in enumerate(theta_grid):
            h = channel(geom, PolarPoint(float(r), float(th)))
            out[i, j] = float(np.real(h.conj() @ psi @ h))
    return out


def beampattern_csv(gain_map: np.ndarray, r_grid, theta_grid) -> str:
    """CSV text: header row of theta values, first column r values, cells in
    watts, all numbers in '%.9e' format."""
    r_grid = np.asarray(r_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    lines = ["r_m," + ",".join("%.9e" % th for th in theta_grid)]
    for i, r in enumerate(r_grid):
        lines.append(
            "%.9e," % r + ",".join("%.9e" % v for v in gain_map[i])
        )
    return "\n".join(lines) + "\n"
