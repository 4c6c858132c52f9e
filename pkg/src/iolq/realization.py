"""Adaptive-filter realization machinery and the model-based oracle.

The filter state Z, driven only by measured (u, y), together with the decaying
auxiliary coordinate, forms the learner-visible vector. The oracle side
reconstructs the exact change of coordinates (T, theta) from the hidden plant
matrices so that every structural identity can be verified numerically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .matops import kron, solve_care_kleinman, solve_sylvester, vec


class BadFilterMatrix(Exception):
    """Filter matrix is not triangular with distinct negative diagonal."""


class IllConditionedT(Exception):
    """Could not find a well-conditioned coordinate change."""


def _check_triangular(m_mat):
    lower_ok = np.allclose(m_mat, np.tril(m_mat))
    upper_ok = np.allclose(m_mat, np.triu(m_mat))
    if not (lower_ok or upper_ok):
        raise BadFilterMatrix("filter matrix must be triangular")
    d = np.diag(m_mat)
    if np.any(d >= 0):
        raise BadFilterMatrix("filter diagonal must be strictly negative")
    if np.unique(d).size != d.size:
        raise BadFilterMatrix("filter diagonal entries must be distinct")
    return "lower" if lower_ok else "upper"


def triangular_eigenvectors(m_mat):
    """Eigenvector matrix of a triangular matrix with distinct diagonal.

    Columns are ordered to match the diagonal; computed by substitution, so no
    general eigensolver is needed. Satisfies m_mat = V diag(d) V^-1.
    """
    m_mat = np.asarray(m_mat, dtype=float)
    form = _check_triangular(m_mat)
    n = m_mat.shape[0]
    d = np.diag(m_mat)
    v = np.zeros((n, n))
    for i in range(n):
        v[i, i] = 1.0
        if form == "lower":
            for j in range(i + 1, n):
                v[j, i] = -(m_mat[j, i:j] @ v[i:j, i]) / (d[j] - d[i])
        else:
            for j in range(i - 1, -1, -1):
                v[j, i] = -(m_mat[j, j + 1 : i + 1] @ v[j + 1 : i + 1, i]) / (
                    d[j] - d[i]
                )
    return v


@dataclass(frozen=True)
class FilterBank:
    """Structural matrices of the vectorized adaptive filter."""

    n: int
    m: int
    p: int
    m_mat: np.ndarray
    lambda_m: np.ndarray
    a_z: np.ndarray
    b_xi: np.ndarray
    l_z: np.ndarray

    @property
    def n_tilde_z(self):
        return (self.p + self.m) * self.n

    @property
    def n_z(self):
        return self.n * self.n * (self.p + self.m)

    @property
    def n_zeta(self):
        return self.n_z + self.n

    @property
    def b_zeta(self):
        return np.vstack([self.b_xi, np.zeros((self.n, self.m))])


def build_filter(n, m, p, m_mat):
    """Assemble the filter's structural matrices for given plant sizes."""
    m_mat = np.atleast_2d(np.asarray(m_mat, dtype=float))
    if m_mat.shape != (n, n):
        raise BadFilterMatrix(f"filter matrix must be {n}x{n}")
    _check_triangular(m_mat)
    n_tz = (p + m) * n
    a_z = kron(np.eye(n_tz), m_mat)
    vec_eye = vec(np.eye(n)).reshape(-1, 1)
    b_xi = np.vstack([np.zeros((p * n * n, m)), kron(np.eye(m), vec_eye)])
    l_z = np.vstack([kron(np.eye(p), vec_eye), np.zeros((m * n * n, p))])
    return FilterBank(
        n=n,
        m=m,
        p=p,
        m_mat=m_mat,
        lambda_m=np.diag(m_mat).copy(),
        a_z=a_z,
        b_xi=b_xi,
        l_z=l_z,
    )


@dataclass(frozen=True)
class OracleRealization:
    """Model-derived coordinate change and augmented-system matrices.

    Built from the hidden plant; used only for verification, never on the
    learner path.
    """

    fb: FilterBank
    t_mat: np.ndarray
    theta_y: np.ndarray
    theta: np.ndarray
    pi: np.ndarray
    a_xi: np.ndarray
    c_xi: np.ndarray
    gamma: np.ndarray
    a_zeta: np.ndarray
    c_zeta: np.ndarray
    c: np.ndarray

    @property
    def b_zeta(self):
        return self.fb.b_zeta


def _zeta_matrices(fb, a_xi, c_xi, c, t_inv, gamma):
    n, n_z = fb.n, fb.n_z
    coupling = c @ t_inv @ gamma
    a_zeta = np.block(
        [
            [a_xi, fb.l_z @ coupling],
            [np.zeros((n, n_z)), np.diag(fb.lambda_m)],
        ]
    )
    c_zeta = np.hstack([c_xi, coupling])
    return a_zeta, c_zeta


def matched_gamma(fb, t_mat, x0):
    """The coupling matrix consistent with a run started at x0 (filter at 0)."""
    v = triangular_eigenvectors(fb.m_mat)
    eps0 = t_mat @ np.asarray(x0, dtype=float)
    return v @ np.diag(np.linalg.solve(v, eps0))


def construct_oracle(plant, fb, theta_y_seed=0, theta_y=None, x0=None,
                     cond_cap=1e8, max_tries=10):
    """Solve for the coordinate change and assemble the augmented matrices.

    Draws the free parameter matrix from a seeded PRNG and retries while the
    resulting coordinate change is ill conditioned. ``gamma`` is the identity
    unless an x0 is supplied, in which case it matches a zero-filter-state run
    from that x0.
    """
    rng = np.random.default_rng(theta_y_seed)
    n, m, p = plant.n, plant.m, plant.p
    tries = max_tries if theta_y is None else 1
    for _ in range(tries):
        th_y = rng.standard_normal((n, p)) if theta_y is None else np.asarray(
            theta_y, dtype=float
        ).reshape(n, p)
        t_mat = solve_sylvester(plant.a, fb.m_mat, th_y @ plant.c)
        if np.linalg.cond(t_mat) <= cond_cap:
            break
    else:
        raise IllConditionedT("no well-conditioned coordinate change found")
    t_inv = np.linalg.inv(t_mat)
    theta = np.concatenate([vec(th_y), vec(t_mat @ plant.b)])
    pi = kron(theta.reshape(1, -1), t_inv)
    c_xi = plant.c @ pi
    a_xi = fb.a_z + fb.l_z @ c_xi
    gamma = np.eye(n) if x0 is None else matched_gamma(fb, t_mat, x0)
    a_zeta, c_zeta = _zeta_matrices(fb, a_xi, c_xi, plant.c, t_inv, gamma)
    return OracleRealization(
        fb=fb,
        t_mat=t_mat,
        theta_y=th_y,
        theta=theta,
        pi=pi,
        a_xi=a_xi,
        c_xi=c_xi,
        gamma=gamma,
        a_zeta=a_zeta,
        c_zeta=c_zeta,
        c=plant.c,
    )


def with_gamma(oracle, gamma):
    """Rebuild the augmented matrices for a different coupling matrix."""
    t_inv = np.linalg.inv(oracle.t_mat)
    a_zeta, c_zeta = _zeta_matrices(
        oracle.fb, oracle.a_xi, oracle.c_xi, oracle.c, t_inv, gamma
    )
    return replace(oracle, gamma=gamma, a_zeta=a_zeta, c_zeta=c_zeta)


def realization_residuals(oracle, plant):
    """Residuals of the defining identities of the canonical realization."""
    pi = oracle.pi
    return {
        "state": np.linalg.norm(pi @ oracle.a_xi - plant.a @ pi),
        "input": np.linalg.norm(pi @ oracle.fb.b_xi - plant.b),
        "output": np.linalg.norm(oracle.c_xi - plant.c @ pi),
    }


def plant_optimal_gain(plant, w, k0=None):
    """(P*, K*) of the plant's Riccati equation with output weighting."""
    q_eff = plant.c.T @ w.q @ plant.c
    return solve_care_kleinman(plant.a, plant.b, q_eff, w.r, k0=k0)


def zeta_optimal_gain(oracle, w, k_star_pi=None):
    """(P*, K*) of the augmented system's Riccati equation.

    Seeded with the block gain [K* Pi, 0], which stabilizes the augmented
    dynamics because the auxiliary block is already Hurwitz.
    """
    fb = oracle.fb
    q_eff = oracle.c_zeta.T @ w.q @ oracle.c_zeta
    if k_star_pi is None:
        raise ValueError("a stabilizing top-block gain is required")
    k0 = np.hstack([k_star_pi, np.zeros((fb.m, fb.n))])
    return solve_care_kleinman(oracle.a_zeta, oracle.b_zeta, q_eff, w.r, k0=k0)


def verify_gain_transfer(oracle, plant, w, alt_gamma_seed=1):
    """Check that the augmented optimum reproduces the plant optimum.

    Returns a report with the Riccati residual of the projected solution, the
    relative gain-transfer error, and the gamma-invariance error of the
    learned-coordinate gain block.
    """
    p_star, k_star = plant_optimal_gain(plant, w)
    pi = oracle.pi
    p_xi = pi.T @ p_star @ pi
    r_inv_bt = np.linalg.solve(w.r, oracle.fb.b_xi.T)
    xi_resid = (
        oracle.a_xi.T @ p_xi
        + p_xi @ oracle.a_xi
        - p_xi @ oracle.fb.b_xi @ r_inv_bt @ p_xi
        + oracle.c_xi.T @ w.q @ oracle.c_xi
    )
    k_star_pi = k_star @ pi
    p_zeta, k_zeta = zeta_optimal_gain(oracle, w, k_star_pi=k_star_pi)
    k_z = k_zeta[:, : oracle.fb.n_z]

    rng = np.random.default_rng(alt_gamma_seed)
    alt = with_gamma(oracle, rng.standard_normal((plant.n, plant.n)))
    _, k_zeta_alt = zeta_optimal_gain(alt, w, k_star_pi=k_star_pi)
    k_z_alt = k_zeta_alt[:, : oracle.fb.n_z]

    return {
        "p_star": p_star,
        "k_star": k_star,
        "p_zeta": p_zeta,
        "k_zeta": k_zeta,
        "xi_are_residual": np.linalg.norm(xi_resid),
        "xi_are_scale": 1.0 + np.linalg.norm(p_xi),
        "gain_transfer_rel_err": np.linalg.norm(k_z - k_star_pi)
        / np.linalg.norm(k_star_pi),
        "gamma_invariance_rel_err": np.linalg.norm(k_z - k_z_alt)
        / np.linalg.norm(k_z),
    }


def dump_matrices(oracle, out_dir):
    """Write each oracle matrix to its own CSV for inspection."""
    mats = {
        "t_mat": oracle.t_mat,
        "theta": oracle.theta.reshape(-1, 1),
        "pi": oracle.pi,
        "a_xi": oracle.a_xi,
        "c_xi": oracle.c_xi,
        "gamma": oracle.gamma,
        "a_zeta": oracle.a_zeta,
        "c_zeta": oracle.c_zeta,
        "b_zeta": oracle.b_zeta,
    }
    paths = []
    for name, mat in mats.items():
        path = f"{out_dir}/{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in np.atleast_2d(mat):
                writer.writerow([f"{v:.17g}" for v in row])
        paths.append(path)
    return paths
