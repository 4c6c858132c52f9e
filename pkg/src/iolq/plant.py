"""Ground-truth LTI plant, probing signals, fixed-step simulation, cost.

The learner only ever sees the (u, y) streams produced here; the state x and
the matrices (A, B, C) stay on the oracle side of the fence.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .matops import psd_cholesky


class NonFiniteState(Exception):
    """Simulation diverged to non-finite values."""


def ctrb(a, b):
    """Kalman controllability matrix."""
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def obsv(c, a):
    """Kalman observability matrix."""
    n = a.shape[0]
    blocks = [c]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)


@dataclass(frozen=True)
class LtiPlant:
    """The triple (A, B, C) plus initial state; hidden from the learner."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        x0 = np.asarray(self.x0, dtype=float).ravel()
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x0", x0)
        n = a.shape[0]
        if a.shape != (n, n) or b.shape[0] != n or c.shape[1] != n or x0.size != n:
            raise ValueError("inconsistent plant dimensions")
        if np.linalg.matrix_rank(ctrb(a, b)) < n:
            raise ValueError("(A, B) is not controllable")
        if np.linalg.matrix_rank(obsv(c, a)) < n:
            raise ValueError("(C, A) is not observable")

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[0]


# Linearized F-16 short-period dynamics: state [alpha, q, delta_e], pitch-rate
# output in deg/s (57.2958 = rad-to-deg).
F16_A = np.array(
    [
        [-1.01887, 0.90506, -0.00215],
        [0.82225, -1.07741, -0.17555],
        [0.0, 0.0, -20.2],
    ]
)
F16_B = np.array([[0.0], [0.0], [20.2]])
F16_C = np.array([[0.0, 57.2958, 0.0]])

# Lower-triangular Hurwitz filter matrix with distinct diagonal.
F16_M = np.array(
    [
        [-1.0, 0.0, 0.0],
        [1.0, -2.0, 0.0],
        [0.0, 2.0, -3.0],
    ]
)


def random_unit_vector(n, seed):
    """Seeded random direction, used for default initial conditions."""
    v = np.random.default_rng(seed).standard_normal(n)
    return v / np.linalg.norm(v)


def f16_plant(x0=None, x0_seed=0):
    """The benchmark aircraft plant; x0 defaults to a seeded unit vector."""
    if x0 is None:
        x0 = random_unit_vector(3, x0_seed)
    return LtiPlant(F16_A, F16_B, F16_C, x0)


@dataclass(frozen=True)
class WeightSpec:
    """Cost weights: q >= 0 on the output, r > 0 on the input."""

    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        if not psd_cholesky(q):
            raise ValueError("Q must be positive semidefinite")
        try:
            np.linalg.cholesky(r)
        except np.linalg.LinAlgError as exc:
            raise ValueError("R must be positive definite") from exc

    def check_cost_observable(self, plant):
        """Verify (sqrt(Q) C, A) observability for the given plant."""
        w, v = np.linalg.eigh(self.q)
        sq = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
        return np.linalg.matrix_rank(obsv(sq @ plant.c, plant.a)) == plant.n


@dataclass(frozen=True)
class ProbingSignal:
    """Sum-of-sinusoids exploration input, reproducible from its seed."""

    amps: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    seed: int = 0

    def __call__(self, t):
        if self.amps.size == 0:
            return 0.0
        return float(np.sum(self.amps * np.sin(self.freqs * t + self.phases)))


def make_probing(
    seed,
    count=100,
    amp_base=20.0,
    amp_range=(0.0, 20.0),
    freq_range=(-500.0, 500.0),
    phase_range=(0.0, 2.0 * np.pi),
):
    """Draw probing parameters uniformly from the given ranges."""
    rng = np.random.default_rng(seed)
    iota = rng.uniform(*amp_range, size=count)
    omega = rng.uniform(*freq_range, size=count)
    phi = rng.uniform(*phase_range, size=count)
    return ProbingSignal(amps=amp_base + iota, freqs=omega, phases=phi, seed=seed)


def rk4_path(deriv, s0, t_end, dt, sample_dt):
    """Classical fixed-step RK4; records the state every ``sample_dt``.

    Returns (times, states) with states[k] the sample at times[k].
    ``dt`` must divide ``sample_dt``.
    """
    ratio = sample_dt / dt
    steps_per_sample = int(round(ratio))
    if abs(ratio - steps_per_sample) > 1e-9 or steps_per_sample < 1:
        raise ValueError("dt must divide the sampling interval")
    n_samples = int(round(t_end / sample_dt))
    if abs(t_end / sample_dt - n_samples) > 1e-9:
        raise ValueError("sample interval must divide t_end")
    s = np.asarray(s0, dtype=float).copy()
    times = np.empty(n_samples + 1)
    states = np.empty((n_samples + 1, s.size))
    times[0] = 0.0
    states[0] = s
    t = 0.0
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n_samples):
        for j in range(steps_per_sample):
            t = k * sample_dt + j * dt
            k1 = deriv(t, s)
            k2 = deriv(t + half, s + half * k1)
            k3 = deriv(t + half, s + half * k2)
            k4 = deriv(t + dt, s + dt * k3)
            s = s + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(s)):
            raise NonFiniteState(f"state diverged near t={t + dt:.4f}")
        times[k + 1] = (k + 1) * sample_dt
        states[k + 1] = s
    return times, states


@dataclass
class TrajectoryLog:
    """Sampled (t, u, y, zeta) records from a single run."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    zeta: np.ndarray
    x: np.ndarray | None = field(default=None, repr=False)  # oracle-only

    def to_csv(self, path):
        m = self.u.shape[1]
        p = self.y.shape[1]
        nz = self.zeta.shape[1]
        header = (
            ["t"]
            + [f"u_{i + 1}" for i in range(m)]
            + [f"y_{i + 1}" for i in range(p)]
            + [f"zeta_{i + 1}" for i in range(nz)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.t.size):
                row = np.concatenate(([self.t[k]], self.u[k], self.y[k], self.zeta[k]))
                writer.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        m = sum(1 for h in header if h.startswith("u_"))
        p = sum(1 for h in header if h.startswith("y_"))
        return cls(
            t=data[:, 0],
            u=data[:, 1 : 1 + m],
            y=data[:, 1 + m : 1 + m + p],
            zeta=data[:, 1 + m + p :],
        )


def eval_cost(traj, w, horizon):
    """Trapezoidal quadrature of y'Qy + u'Ru over [0, horizon]."""
    mask = traj.t <= horizon + 1e-12
    t = traj.t[mask]
    if t.size < 2 or t[-1] < horizon - 1e-9:
        raise ValueError("horizon exceeds trajectory length")
    y = traj.y[mask]
    u = traj.u[mask]
    integrand = np.einsum("ki,ij,kj->k", y, w.q, y) + np.einsum(
        "ki,ij,kj->k", u, w.r, u
    )
    return float(np.trapezoid(integrand, t))
