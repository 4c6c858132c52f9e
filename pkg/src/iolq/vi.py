"""Value iteration: model-based oracle path and the data-driven algorithm.

Data collection co-integrates the quadratic accumulators inside the same RK4
step as the states, so the per-interval integrals are consistent with the
sampled boundary values to integrator accuracy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .matops import (
    LstsqSolver,
    duplication_map,
    psd_cholesky,
    sym_lmax,
    unvech,
    vec,
)
from .plant import TrajectoryLog, rk4_path


class IterationCap(Exception):
    """Value iteration hit its iteration cap without meeting the tolerance."""


class RankDeficient(Exception):
    """The data regression does not pin down the symmetric unknown."""


@dataclass(frozen=True)
class StepSchedule:
    """Harmonic stepsize sequence gamma_i = 1/(offset + i).

    Satisfies the stochastic-approximation conditions by construction:
    positive, divergent sum, convergent sum of squares.
    """

    offset: float = 1.0

    def __post_init__(self):
        if self.offset <= 0:
            raise ValueError("offset must be positive")

    def gamma(self, i):
        return 1.0 / (self.offset + i)


@dataclass(frozen=True)
class EscapeSets:
    """Nested bounded sets of PSD matrices, indexed by j.

    Membership at level j: P is PSD (pivoted Cholesky) and its largest
    eigenvalue (power iteration) is at most scale * growth**j.
    """

    scale: float = 5.0
    growth: float = 2.0

    def contains(self, p, j):
        if not psd_cholesky(p):
            return False
        return sym_lmax(p) <= self.scale * self.growth**j


@dataclass
class RegressionData:
    """Per-interval integral matrices assembled from one collection run."""

    i_zz: np.ndarray
    i_zu: np.ndarray
    i_yy: np.ndarray
    d_zz: np.ndarray
    times: np.ndarray
    n_zeta: int
    m: int
    p: int

    @property
    def l(self):
        return self.i_zz.shape[0]

    def to_csv(self, out_dir):
        paths = []
        for name in ("i_zz", "i_zu", "i_yy", "d_zz"):
            path = f"{out_dir}/{name}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                for row in getattr(self, name):
                    writer.writerow([f"{v:.17g}" for v in row])
            paths.append(path)
        return paths

    @classmethod
    def from_csv(cls, out_dir, n_zeta, m, p):
        mats = {}
        for name in ("i_zz", "i_zu", "i_yy", "d_zz"):
            with open(f"{out_dir}/{name}.csv", newline="") as fh:
                mats[name] = np.array(
                    [[float(v) for v in row] for row in csv.reader(fh)]
                )
        l = mats["i_zz"].shape[0]
        return cls(times=np.arange(l + 1, dtype=float), n_zeta=n_zeta, m=m, p=p,
                   **mats)


def collect(plant, fb, probing, t_end=5.0, dt=1e-4, sample_dt=0.01):
    """Run the coupled plant/filter/auxiliary simulation under pure probing.

    Returns (TrajectoryLog, RegressionData). The regression rows are the
    accumulator differences across consecutive sampling intervals.
    """
    n, m, p = plant.n, plant.m, plant.p
    n_z, n_zeta = fb.n_z, fb.n_zeta
    a, b, c = plant.a, plant.b, plant.c
    a_z, b_xi, l_z = fb.a_z, fb.b_xi, fb.l_z
    lam = fb.lambda_m

    i_x = slice(0, n)
    i_z = slice(n, n + n_z)
    i_e = slice(n + n_z, n + n_z + n)
    i_azz = slice(n + n_z + n, n + n_z + n + n_zeta * n_zeta)
    i_azu = slice(i_azz.stop, i_azz.stop + n_zeta * m)
    i_ayy = slice(i_azu.stop, i_azu.stop + p * p)

    def deriv(t, s):
        x = s[i_x]
        z = s[i_z]
        eps = s[i_e]
        u = np.atleast_1d(probing(t))
        y = c @ x
        ds = np.empty_like(s)
        ds[i_x] = a @ x + b @ u
        ds[i_z] = a_z @ z + b_xi @ u + l_z @ y
        ds[i_e] = lam * eps
        zeta = s[i_z.start : i_e.stop]
        ds[i_azz] = np.outer(zeta, zeta).ravel()
        # kron(zeta, u) in the column-stacking convention
        ds[i_azu] = np.outer(zeta, u).ravel()
        ds[i_ayy] = np.outer(y, y).ravel()
        return ds

    s0 = np.zeros(i_ayy.stop)
    s0[i_x] = plant.x0
    s0[i_e] = 1.0
    times, states = rk4_path(deriv, s0, t_end, dt, sample_dt)

    zeta = states[:, i_z.start : i_e.stop]
    xs = states[:, i_x]
    ys = xs @ c.T
    us = np.array([np.atleast_1d(probing(t)) for t in times])

    kzz = np.einsum("ki,kj->kij", zeta, zeta).reshape(times.size, -1)
    traj = TrajectoryLog(t=times, u=us, y=ys, zeta=zeta, x=xs)
    reg = RegressionData(
        i_zz=np.diff(states[:, i_azz], axis=0),
        i_zu=np.diff(states[:, i_azu], axis=0),
        i_yy=np.diff(states[:, i_ayy], axis=0),
        d_zz=np.diff(kzz, axis=0),
        times=times,
        n_zeta=n_zeta,
        m=m,
        p=p,
    )
    return traj, reg


def rank_check(reg, rcond=1e-8):
    """Numerical rank of the symmetry-reduced regression matrix."""
    needed = reg.n_zeta * (reg.n_zeta + 1) // 2
    solver = LstsqSolver(reg.i_zz @ duplication_map(reg.n_zeta), rcond=rcond)
    return solver.rank == needed, solver.rank, needed


class RegressionSolver:
    """One-time factorization of the regression operator, reused across VI steps.

    With ``allow_deficient`` the rank requirement is waived and every solve
    returns the minimum-norm candidate; the recovered matrix is then only
    determined on the excited monomial directions.
    """

    def __init__(self, reg, b_zeta, q, rcond=1e-8, allow_deficient=False):
        self.reg = reg
        self.n_zeta = reg.n_zeta
        self.s = duplication_map(reg.n_zeta)
        self.solver = LstsqSolver(reg.i_zz @ self.s, rcond=rcond)
        needed = reg.n_zeta * (reg.n_zeta + 1) // 2
        self.rank = self.solver.rank
        self.full_rank = self.rank == needed
        if not self.full_rank and not allow_deficient:
            raise RankDeficient(
                f"regression rank {self.solver.rank} < required {needed}; "
                "collect a longer or better-excited trajectory"
            )
        b_zeta = np.asarray(b_zeta, dtype=float)
        # constant parts of the right-hand side
        self.w = self.reg.d_zz - 2.0 * reg.i_zu @ np.kron(
            np.eye(reg.n_zeta), b_zeta.T
        )
        self.const = reg.i_yy @ vec(np.atleast_2d(q))

    def solve_o(self, p_mat):
        """Recover the symmetric regression target for the current iterate."""
        xi = self.w @ vec(p_mat) + self.const
        return unvech(self.solver.solve(xi), self.n_zeta)


@dataclass
class ViHistory:
    """Per-iteration diagnostics; error columns only when an oracle is attached."""

    rows: list = field(default_factory=list)

    def append(self, i, gamma, resid, err_p, err_k, j):
        self.rows.append((i, gamma, resid, err_p, err_k, j))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "gamma", "resid", "err_P", "err_K", "j"])
            for i, gamma, resid, err_p, err_k, j in self.rows:
                writer.writerow(
                    [
                        i,
                        f"{gamma:.17g}",
                        f"{resid:.17g}",
                        "" if err_p is None else f"{err_p:.17g}",
                        "" if err_k is None else f"{err_k:.17g}",
                        j,
                    ]
                )


def _vi_loop(update, p0, schedule, escape, delta, max_iter, on_cap, track):
    p = np.array(p0, dtype=float)
    j = 0
    history = ViHistory()
    converged = False
    i = 0
    for i in range(max_iter):
        gamma = schedule.gamma(i)
        p_tilde = update(p, gamma)
        resid = np.linalg.norm(p_tilde - p) / gamma
        err_p, err_k = track(p) if track else (None, None)
        history.append(i, gamma, resid, err_p, err_k, j)
        if not escape.contains(p_tilde, j):
            p = np.array(p0, dtype=float)
            j += 1
        elif resid <= delta:
            converged = True
            break
        else:
            p = p_tilde
    if not converged and on_cap == "raise":
        raise IterationCap(f"no convergence within {max_iter} iterations")
    return p, i + 1, converged, history


def model_vi(a, b, q_eff, r, p0=None, schedule=StepSchedule(), escape=EscapeSets(),
             delta=1e-4, max_iter=1_000_000, on_cap="raise"):
    """Model-based value iteration on the Riccati residual."""
    a = np.asarray(a, dtype=float)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    q_eff = np.atleast_2d(np.asarray(q_eff, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    n = a.shape[0]
    p0 = np.eye(n) if p0 is None else np.atleast_2d(np.asarray(p0, dtype=float))

    def update(p, gamma):
        k = np.linalg.solve(r, b.T @ p)
        return p + gamma * (a.T @ p + p @ a - k.T @ r @ k + q_eff)

    p, iters, converged, _ = _vi_loop(
        update, p0, schedule, escape, delta, max_iter, on_cap, None
    )
    return p, iters


def data_vi(reg_solver, w, b_zeta, p0=None, schedule=StepSchedule(),
            escape=EscapeSets(), delta=1e-4, max_iter=200_000, on_cap="return",
            oracle_pk=None):
    """Data-driven value iteration using only regression data and B_zeta.

    ``oracle_pk``, when given as (P*, K*), adds relative-error columns to the
    returned history. Returns (P, K, history, converged).
    """
    n_zeta = reg_solver.n_zeta
    b_zeta = np.asarray(b_zeta, dtype=float)
    r = np.atleast_2d(np.asarray(w.r, dtype=float))
    p0 = np.eye(n_zeta) if p0 is None else np.atleast_2d(np.asarray(p0, dtype=float))
    if not psd_cholesky(p0 - 1e-12 * np.eye(n_zeta)):
        raise ValueError("p0 must be positive definite")

    def update(p, gamma):
        k = np.linalg.solve(r, b_zeta.T @ p)
        o = reg_solver.solve_o(p)
        return p + gamma * (o - k.T @ r @ k)

    track = None
    if oracle_pk is not None:
        p_star, k_star = oracle_pk
        np_star = np.linalg.norm(p_star)
        nk_star = np.linalg.norm(k_star)

        def track(p):
            k = np.linalg.solve(r, b_zeta.T @ p)
            return (
                np.linalg.norm(p - p_star) / np_star,
                np.linalg.norm(k - k_star) / nk_star,
            )

    p, iters, converged, history = _vi_loop(
        update, p0, schedule, escape, delta, max_iter, on_cap, track
    )
    k = np.linalg.solve(r, b_zeta.T @ p)
    return p, k, history, converged


def extract_controller(k_hat, n_z):
    """Split the learned augmented gain into filter and auxiliary blocks."""
    k_hat = np.atleast_2d(np.asarray(k_hat, dtype=float))
    if k_hat.shape[1] <= n_z:
        raise ValueError("gain has too few columns to split")
    return k_hat[:, :n_z].copy(), k_hat[:, n_z:].copy()
