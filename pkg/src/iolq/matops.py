"""Dense real-matrix kernels: vectorization utilities and structured solvers.

All matrices are plain ``numpy.ndarray``; the column-stacking convention
vec(A) = [a_1^T, a_2^T, ...]^T is used throughout, with symmetric unknowns
stored in half-vectorized (lower-triangle, column-major) form.
"""

from __future__ import annotations

import numpy as np


class SingularSystem(Exception):
    """A structured linear system is numerically singular."""


class NotStabilizing(Exception):
    """The supplied initial gain fails the Hurwitz certificate."""


class NoConvergence(Exception):
    """An iterative solver hit its iteration cap."""


def kron(a, b):
    """Kronecker product of two matrices."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def vec(a):
    """Column-stacking vectorization."""
    return np.asarray(a, dtype=float).flatten(order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def vech(a):
    """Half-vectorization: lower triangle stacked column by column."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    # upper triangle of a.T in row-major order == lower triangle column-major
    return a.T[np.triu_indices(n)]


def unvech(v, dim):
    """Symmetric matrix from its half-vector."""
    v = np.asarray(v, dtype=float)
    if v.size != dim * (dim + 1) // 2:
        raise ValueError(f"half-vector length {v.size} does not match dim {dim}")
    out = np.zeros((dim, dim))
    out[np.triu_indices(dim)] = v
    out = out.T
    out[np.triu_indices(dim, 1)] = out.T[np.triu_indices(dim, 1)]
    return out


def duplication_map(dim):
    """Matrix S with vec(O) = S @ vech(O) for every symmetric O of size dim."""
    cols = dim * (dim + 1) // 2
    s = np.zeros((dim * dim, cols))
    k = 0
    for j in range(dim):
        for i in range(j, dim):
            s[j * dim + i, k] = 1.0
            s[i * dim + j, k] = 1.0
            k += 1
    return s


def psd_cholesky(a, tol=1e-10):
    """Pivoted-Cholesky test for positive semidefiniteness.

    Returns True iff every pivot is nonnegative up to ``tol`` relative to the
    largest diagonal entry.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    scale = max(np.max(np.abs(np.diag(a))), 1.0)
    piv = list(range(n))
    for k in range(n):
        # pick the largest remaining diagonal entry as pivot
        d = np.diag(a)[k:]
        j = k + int(np.argmax(d))
        a[[k, j]] = a[[j, k]]
        a[:, [k, j]] = a[:, [j, k]]
        pivot = a[k, k]
        if pivot < -tol * scale:
            return False
        if pivot <= tol * scale:
            # remaining block must be (numerically) zero for PSD
            rest = a[k:, k:]
            return bool(np.all(np.abs(rest) <= np.sqrt(tol) * scale))
        l = a[k + 1:, k] / pivot
        a[k + 1:, k + 1:] -= np.outer(l, a[k, k + 1:])
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
    return True


def sym_lmax(a, rel_tol=1e-6, max_iter=10_000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(max_iter):
        w = a @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (a @ v))
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-30):
            return lam_new
        lam = lam_new
    return lam


class LstsqSolver:
    """Reusable minimum-norm least-squares solver backed by a one-time SVD.

    Repeated right-hand sides (one per value-iteration step) reuse the
    factorization. Numerical rank uses the threshold sigma > rcond * sigma_max.
    """

    def __init__(self, a, rcond=1e-8):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        self.shape = a.shape
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        if s.size and s[0] > 0:
            keep = s > rcond * s[0]
        else:
            keep = np.zeros_like(s, dtype=bool)
        self.rank = int(np.count_nonzero(keep))
        self.smallest_kept = float(s[keep][-1]) if self.rank else 0.0
        self._ut = u[:, keep].T
        self._v_over_s = vt[keep].T / s[keep] if self.rank else vt.T[:, :0]

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        return self._v_over_s @ (self._ut @ b)


def lstsq(a, b, rcond=1e-8):
    """Minimum-norm least squares; returns (x, rank, smallest kept singular)."""
    solver = LstsqSolver(a, rcond=rcond)
    return solver.solve(b), solver.rank, solver.smallest_kept


def solve_sylvester(a, m, w, resid_tol=1e-9):
    """Solve T a - m T = w via the Kronecker linear system.

    Requires the spectra of ``a`` and ``m`` to be disjoint; detected
    numerically through the solve itself.
    """
    a = np.asarray(a, dtype=float)
    m = np.asarray(m, dtype=float)
    w = np.asarray(w, dtype=float)
    n = a.shape[0]
    eye = np.eye(n)
    kmat = np.kron(a.T, eye) - np.kron(eye, m)
    try:
        t_vec = np.linalg.solve(kmat, vec(w))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Sylvester coefficient matrix is singular") from exc
    t = unvec(t_vec, n, n)
    resid = np.linalg.norm(t @ a - m @ t - w)
    if not np.isfinite(resid) or resid > resid_tol * max(np.linalg.norm(w), 1.0) * 1e3:
        raise SingularSystem("Sylvester solve failed residual check")
    return t


def solve_lyapunov(a, q, resid_tol=1e-8):
    """Symmetric P with a^T P + P a + q = 0, via half-vectorized Kronecker solve."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    n = a.shape[0]
    eye = np.eye(n)
    kmat = np.kron(eye, a.T) + np.kron(a.T, eye)
    s = duplication_map(n)
    h, rank, _ = lstsq(kmat @ s, -vec(q), rcond=1e-13)
    if rank < s.shape[1]:
        raise SingularSystem("Lyapunov operator is rank deficient")
    p = unvech(h, n)
    resid = np.linalg.norm(a.T @ p + p @ a + q)
    scale = np.linalg.norm(q) + 2.0 * np.linalg.norm(a) * np.linalg.norm(p)
    if resid > resid_tol * max(scale, 1.0):
        raise SingularSystem("Lyapunov solve failed residual check")
    return p


def is_hurwitz(a):
    """Lyapunov-plus-Cholesky stability certificate (no eigensolver needed)."""
    a = np.asarray(a, dtype=float)
    try:
        p = solve_lyapunov(a, np.eye(a.shape[0]))
    except SingularSystem:
        return False
    try:
        np.linalg.cholesky(0.5 * (p + p.T))
    except np.linalg.LinAlgError:
        return False
    return True


def solve_care_kleinman(a, b, q_eff, r, k0=None, max_iter=100, tol=1e-10):
    """Stabilizing CARE solution by Kleinman's Newton iteration.

    Solves a^T P + P a - P b r^-1 b^T P + q_eff = 0 starting from a
    stabilizing gain ``k0``; returns (P, K) with K = r^-1 b^T P.
    """
    a = np.asarray(a, dtype=float)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    q_eff = np.asarray(q_eff, dtype=float)
    r = np.atleast_2d(np.asarray(r, dtype=float))
    n, m = b.shape
    k = np.zeros((m, n)) if k0 is None else np.atleast_2d(np.asarray(k0, dtype=float))
    if not is_hurwitz(a - b @ k):
        raise NotStabilizing("initial gain does not stabilize the plant")
    p = None
    for _ in range(max_iter):
        a_cl = a - b @ k
        p = solve_lyapunov(a_cl, q_eff + k.T @ r @ k)
        k_new = np.linalg.solve(r, b.T @ p)
        step = np.linalg.norm(k_new - k)
        k = k_new
        if step <= tol * max(np.linalg.norm(k), 1.0):
            break
    else:
        raise NoConvergence("Kleinman iteration did not converge")
    resid = a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T @ p) + q_eff
    if np.linalg.norm(resid) > 1e-9 * (1.0 + np.linalg.norm(p)):
        raise NoConvergence("CARE residual check failed")
    return p, k
