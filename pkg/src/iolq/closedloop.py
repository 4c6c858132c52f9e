"""Closed-loop evaluation: the learned dynamic output-feedback controller.

The controller integrates the adaptive filter from measured (u, y) only and
feeds back the filter state; the plant model is used here purely to simulate
the world the controller acts on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plant import TrajectoryLog, rk4_path


class UnstableClosedLoop(Exception):
    """The learned controller failed the stability certificate or diverged."""


@dataclass
class ClosedLoopController:
    """Dynamic output-feedback law u = -K z with filter-driven state z.

    The internal state follows the filter dynamics driven by [y; u]; it is
    zero-initialized so no plant knowledge enters the controller.
    """

    fb: object
    k_z: np.ndarray
    z: np.ndarray = field(init=False)

    def __post_init__(self):
        self.k_z = np.atleast_2d(np.asarray(self.k_z, dtype=float))
        if self.k_z.shape != (self.fb.m, self.fb.n_z):
            raise ValueError("gain shape does not match the filter dimensions")
        self.z = np.zeros(self.fb.n_z)

    @property
    def a_c(self):
        return self.fb.a_z

    @property
    def b_c(self):
        # accepts the stacked measurement [y; u]
        return np.hstack([self.fb.l_z, self.fb.b_xi])

    def control(self, z=None):
        z = self.z if z is None else z
        return -(self.k_z @ z)


def simulate_output_feedback(plant, fb, k_z, t_end=28.0, dt=1e-4,
                             sample_dt=0.01, x0=None):
    """Closed-loop run of plant + filter under u = -K_z z from a fresh x0."""
    ctrl = ClosedLoopController(fb, k_z)
    n, n_z = plant.n, fb.n_z
    a, b, c = plant.a, plant.b, plant.c
    a_z, b_xi, l_z = fb.a_z, fb.b_xi, fb.l_z
    k = ctrl.k_z

    def deriv(t, s):
        x = s[:n]
        z = s[n:]
        u = -(k @ z)
        y = c @ x
        return np.concatenate([a @ x + b @ u, a_z @ z + b_xi @ u + l_z @ y])

    s0 = np.concatenate([plant.x0 if x0 is None else np.asarray(x0, float),
                         np.zeros(n_z)])
    times, states = rk4_path(deriv, s0, t_end, dt, sample_dt)
    xs = states[:, :n]
    zs = states[:, n:]
    us = -(zs @ k.T)
    ys = xs @ c.T
    return TrajectoryLog(t=times, u=us, y=ys, zeta=zs, x=xs)


def simulate_state_feedback(plant, k_star, t_end=28.0, dt=1e-4, sample_dt=0.01,
                            x0=None):
    """Reference run under the optimal full-state law u = -K* x."""
    a, b, c = plant.a, plant.b, plant.c
    k = np.atleast_2d(np.asarray(k_star, dtype=float))
    a_cl = a - b @ k

    def deriv(t, s):
        return a_cl @ s

    s0 = plant.x0 if x0 is None else np.asarray(x0, dtype=float)
    times, states = rk4_path(deriv, s0, t_end, dt, sample_dt)
    us = -(states @ k.T)
    ys = states @ c.T
    return TrajectoryLog(t=times, u=us, y=ys, zeta=states.copy(), x=states)


def decay_metrics(traj):
    """Terminal-over-initial state ratio and terminal-over-peak filter ratio."""
    x_ratio = np.linalg.norm(traj.x[-1]) / np.linalg.norm(traj.x[0])
    z_norms = np.linalg.norm(traj.zeta, axis=1)
    z_ratio = z_norms[-1] / max(z_norms.max(), 1e-300)
    return x_ratio, z_ratio
