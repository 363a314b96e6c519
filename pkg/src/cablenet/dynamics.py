"""Nonlinear time integration with time-varying rest lengths.

Boundary nodes are motionless; the moving-boundary coupling terms of the
partitioned equations are retained in the right-hand side helper so they can
be exercised with prescribed boundary motion, but no shipped scenario moves
supports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import assembly
from .errors import IntegrationError, ValidationError
from .model import Model

__all__ = ["DynamicState", "ActuationSchedule", "dynamics_rhs", "integrate",
           "TimeHistory", "total_energy"]


@dataclass
class DynamicState:
    """Free-node coordinates and velocities at one instant."""

    coords: np.ndarray  # (3 n_a,)
    velocity: np.ndarray  # (3 n_a,)
    time: float = 0.0

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).ravel()
        self.velocity = np.asarray(self.velocity, dtype=float).ravel()
        if self.coords.shape != self.velocity.shape:
            raise ValidationError("coords and velocity must have equal length")


@dataclass
class ActuationSchedule:
    """Piecewise-linear cluster rest lengths over time."""

    times: np.ndarray  # (m,) strictly increasing
    rest_lengths: np.ndarray  # (m, n_ec)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.rest_lengths = np.atleast_2d(np.asarray(self.rest_lengths, dtype=float))
        if len(self.times) != len(self.rest_lengths):
            raise ValidationError("schedule needs one rest-length row per knot")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("schedule times must be strictly increasing")
        if np.any(self.rest_lengths <= 0):
            raise ValidationError("rest lengths must stay positive")

    @classmethod
    def constant(cls, l0c: np.ndarray, t_end: float) -> "ActuationSchedule":
        return cls(np.array([0.0, t_end]), np.vstack([l0c, l0c]))

    @classmethod
    def ramp(cls, start: np.ndarray, end: np.ndarray, duration: float,
             t0: float = 0.0) -> "ActuationSchedule":
        return cls(np.array([t0, t0 + duration]), np.vstack([start, end]))

    def at(self, t: float) -> np.ndarray:
        """Interpolated rest lengths, clamped to the end knots."""
        out = np.empty(self.rest_lengths.shape[1])
        for j in range(self.rest_lengths.shape[1]):
            out[j] = np.interp(t, self.times, self.rest_lengths[:, j])
        return out


@dataclass
class TimeHistory:
    """Per-step records streamed out of the integrator."""

    time: np.ndarray  # (n,)
    coords: np.ndarray  # (n, 3 n_n) full coordinate vectors
    velocity: np.ndarray  # (n, 3 n_a)
    tensions: np.ndarray  # (n, n_ec)
    rest_lengths: np.ndarray  # (n, n_ec)


def _full_coords(model: Model, free_coords: np.ndarray) -> np.ndarray:
    coords = model.coords.copy()
    coords[model.topology.free_dof] = free_coords
    return coords


def dynamics_rhs(model: Model, state: DynamicState, l0c: np.ndarray,
                 f_ex: np.ndarray | None = None) -> np.ndarray:
    """Free-node accelerations with M, D, t_c at the current configuration."""
    acc, _ = _rhs(model, state.coords, state.velocity, l0c, f_ex)
    return acc


def _rhs(model: Model, free_coords: np.ndarray, velocity: np.ndarray,
         l0c: np.ndarray, f_ex: np.ndarray | None):
    topo, spec = model.topology, model.spec
    free = topo.free_dof
    coords = _full_coords(model, free_coords)

    lengths, l_c, _ = assembly.member_lengths(topo, coords)
    t_c = assembly.cluster_tensions(l_c, spec, l0c, slack=model.options.slack,
                                    cluster_names=topo.cluster_names)
    l0 = assembly.rest_length_split(topo, lengths, l0c)
    m = assembly.mass_matrix(topo, spec, l0, model.point_masses)
    d = assembly.damping_matrix(topo, coords, spec)
    g = assembly.gravity_vector(topo, spec, l0, model.point_masses)
    a2c = assembly.equilibrium_matrix(topo, coords)

    rhs = (0.0 if f_ex is None else np.asarray(f_ex, dtype=float)[free]) \
        + g[free] - (a2c @ t_c)[free] - d[np.ix_(free, free)] @ velocity
    try:
        acc = linalg.solve(m[np.ix_(free, free)], rhs, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise ValidationError(f"mass matrix is not positive definite: {exc}") from exc
    return acc, t_c


def integrate(model: Model, initial: DynamicState, schedule: ActuationSchedule,
              dt: float, t_end: float, f_ex=None,
              record_every: int = 1) -> TimeHistory:
    """Classical fixed-step RK4 trajectory, sampled every `record_every` steps.

    `f_ex` may be a constant force vector or a callable f_ex(t).
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    topo = model.topology
    free = topo.free_dof
    force_at = f_ex if callable(f_ex) else (lambda t: f_ex)

    pts = model.coords.reshape(-1, 3)
    bbox = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    blow_up = 1e6 * max(bbox, 1.0)

    n_steps = int(round(t_end / dt))
    x = initial.coords.copy()
    v = initial.velocity.copy()
    t = initial.time

    times, coords_out, vel_out, tens_out, rest_out = [], [], [], [], []

    def record(t, x, v):
        l0c = schedule.at(t)
        coords = _full_coords(model, x)
        _, l_c, _ = assembly.member_lengths(topo, coords)
        t_c = assembly.cluster_tensions(l_c, model.spec, l0c,
                                        slack=model.options.slack,
                                        cluster_names=topo.cluster_names)
        times.append(t)
        coords_out.append(coords)
        vel_out.append(v.copy())
        tens_out.append(t_c)
        rest_out.append(l0c)

    record(t, x, v)
    for step in range(1, n_steps + 1):
        k1x = v
        k1v, _ = _rhs(model, x, v, schedule.at(t), force_at(t))
        k2x = v + 0.5 * dt * k1v
        k2v, _ = _rhs(model, x + 0.5 * dt * k1x, k2x,
                      schedule.at(t + 0.5 * dt), force_at(t + 0.5 * dt))
        k3x = v + 0.5 * dt * k2v
        k3v, _ = _rhs(model, x + 0.5 * dt * k2x, k3x,
                      schedule.at(t + 0.5 * dt), force_at(t + 0.5 * dt))
        k4x = v + dt * k3v
        k4v, _ = _rhs(model, x + dt * k3x, k4x,
                      schedule.at(t + dt), force_at(t + dt))
        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t = initial.time + step * dt
        if not np.all(np.isfinite(x)) or np.abs(x).max() > blow_up:
            raise IntegrationError(step)
        if step % record_every == 0 or step == n_steps:
            record(t, x, v)

    return TimeHistory(
        time=np.array(times),
        coords=np.array(coords_out),
        velocity=np.array(vel_out),
        tensions=np.array(tens_out),
        rest_lengths=np.array(rest_out),
    )


def total_energy(model: Model, free_coords: np.ndarray, velocity: np.ndarray,
                 l0c: np.ndarray) -> float:
    """Kinetic + elastic + gravitational energy of a state (audit helper)."""
    topo, spec = model.topology, model.spec
    free = topo.free_dof
    coords = _full_coords(model, free_coords)
    lengths, l_c, _ = assembly.member_lengths(topo, coords)
    l0 = assembly.rest_length_split(topo, lengths, l0c)
    m_aa = assembly.mass_matrix(topo, spec, l0, model.point_masses)[np.ix_(free, free)]
    kinetic = 0.5 * velocity @ m_aa @ velocity
    stretch = l_c - l0c
    if model.options.slack:
        stretch = np.maximum(stretch, 0.0)
    elastic = 0.5 * np.sum(spec.axial_stiffness * stretch**2 / l0c)
    g = assembly.gravity_vector(topo, spec, l0, model.point_masses)
    return float(kinetic + elastic - g @ coords)
