"""Deployment trajectory design and open/closed-loop control simulation.

A deployment plan is a ladder of equilibrium states indexed by substep.  The
"plant" replaying a plan is the same physics with an injectable error model
(rest-length bias/noise, initial configuration offset) standing in for spool
radius drift, friction and imperfect rigging.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import assembly
from .dynamics import ActuationSchedule, DynamicState, TimeHistory, integrate
from .errors import (
    ConvergenceError,
    ControlDivergenceError,
    DegenerateGeometryError,
    SingularStiffnessError,
    ValidationError,
)
from .model import Model
from .statics import (
    FormFindResult,
    _resolve_clusters,
    form_find,
    modal_analysis,
    prestress_design,
)

__all__ = ["PlanStep", "DeploymentPlan", "ErrorModel", "DeploymentHistory",
           "design_trajectory", "redesign_plan_prestress", "rest_length_for",
           "open_loop_deploy", "closed_loop_deploy", "default_time_step"]

log = logging.getLogger(__name__)


@dataclass
class PlanStep:
    rest_lengths: np.ndarray  # l0c
    tensions: np.ndarray  # t_c at equilibrium
    coords: np.ndarray  # full equilibrium coordinates
    cluster_lengths: np.ndarray  # l_c


@dataclass
class DeploymentPlan:
    """Ordered equilibrium substeps; step 0 is the undeployed start state."""

    steps: list[PlanStep]
    actuated: np.ndarray  # cluster indices driven by the schedule
    designed: np.ndarray | None = None  # clusters pinned by prestress redesign
    target: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def rest_length_table(self) -> np.ndarray:
        return np.array([s.rest_lengths for s in self.steps])

    def tension_table(self) -> np.ndarray:
        return np.array([s.tensions for s in self.steps])


@dataclass
class ErrorModel:
    """Injectable actuation error: multiplicative bias, noise, initial offset."""

    rest_length_bias: float | np.ndarray = 0.0  # per-cluster drift, e.g. 0.01
    rest_length_noise: float = 0.0  # std of per-substep multiplicative noise
    initial_offset: float = 0.0  # free-node coordinate perturbation scale

    def __post_init__(self):
        if self.rest_length_noise < 0 or self.initial_offset < 0:
            raise ValidationError("error magnitudes must be >= 0")

    def apply(self, l0c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        factor = 1.0 + np.asarray(self.rest_length_bias)
        if self.rest_length_noise:
            factor = factor * (1.0 + self.rest_length_noise
                               * rng.standard_normal(len(l0c)))
        return l0c * factor

    def perturb_coords(self, model: Model, coords: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
        if not self.initial_offset:
            return coords.copy()
        out = coords.copy()
        free = model.topology.free_dof
        out[free] += self.initial_offset * rng.standard_normal(len(free))
        return out


@dataclass
class DeploymentHistory:
    """Per-substep records of a deployment run (open or closed loop)."""

    commanded: np.ndarray  # (n_steps, n_ec) rest lengths sent to the actuators
    applied: np.ndarray  # (n_steps, n_ec) rest lengths after error injection
    coords: np.ndarray  # (n_steps, 3 n_n)
    cluster_lengths: np.ndarray  # (n_steps, n_ec)
    tensions: np.ndarray  # (n_steps, n_ec)
    residuals: np.ndarray  # (n_steps,)
    corrections: np.ndarray  # (n_steps,) feedback iterations used
    dynamic: TimeHistory | None = None


def rest_length_for(t_c: np.ndarray, l_c: np.ndarray,
                    spec: assembly.MemberSpec) -> np.ndarray:
    """Rest lengths realizing given tensions at given lengths: EA l_c/(t_c+EA)."""
    t_c = np.asarray(t_c, dtype=float)
    ea = spec.axial_stiffness
    if np.any(t_c <= -ea):
        raise ValidationError("tension at or below -EA has no physical rest length")
    return ea * np.asarray(l_c, dtype=float) / (t_c + ea)


def _equilibrium_step(model: Model, coords: np.ndarray,
                      l0c: np.ndarray) -> tuple[PlanStep, FormFindResult]:
    result = form_find(model.with_coords(coords), l0c=l0c)
    _, l_c, _ = assembly.member_lengths(model.topology, result.coords)
    step = PlanStep(rest_lengths=np.asarray(l0c, dtype=float).copy(),
                    tensions=result.tensions, coords=result.coords,
                    cluster_lengths=l_c)
    return step, result


def design_trajectory(model: Model, start: FormFindResult | PlanStep,
                      actuated, total_delta: float, n_substeps: int,
                      max_bisections: int = 6) -> DeploymentPlan:
    """Equilibrium ladder: shorten the actuated clusters by total_delta in
    n_substeps equal decrements, form-finding each state from the previous
    (warm start).  Non-actuated rest lengths (the hoop) stay fixed.

    If a substep's Newton solve fails, the decrement is bisected internally;
    after max_bisections the partial plan is attached to the raised error.
    """
    topo = model.topology
    if isinstance(actuated, (str, int, np.integer)):
        actuated = [actuated]
    act = np.asarray([topo.cluster_index(a) if isinstance(a, str) else int(a)
                      for a in actuated], dtype=int)

    if isinstance(start, FormFindResult):
        l0c0 = model.spec.rest_length.copy()
        _, l_c, _ = assembly.member_lengths(topo, start.coords)
        start_step = PlanStep(l0c0, start.tensions, start.coords, l_c)
    else:
        start_step = start

    steps = [start_step]
    delta = total_delta / n_substeps
    for k in range(1, n_substeps + 1):
        target_l0c = steps[-1].rest_lengths.copy()
        target_l0c[act] -= delta
        coords = steps[-1].coords
        reached = steps[-1].rest_lengths  # last rest lengths solved for
        stack = [target_l0c]  # intermediate homotopy goals, innermost last
        depth = 0
        step = None
        while stack:
            goal = stack[-1]
            try:
                step, _ = _equilibrium_step(model, coords, goal)
            except (ConvergenceError, SingularStiffnessError) as exc:
                depth += 1
                if depth > max_bisections:
                    err = ConvergenceError(
                        f"trajectory design failed at substep {k}: {exc}",
                        residual_history=getattr(exc, "residual_history", None),
                    )
                    err.partial_plan = DeploymentPlan(steps, act)
                    raise err from exc
                stack.append(0.5 * (reached + goal))
                continue
            coords = step.coords
            reached = goal
            stack.pop()
        steps.append(step)
        log.debug("trajectory substep %d: max tension %.4g", k,
                  float(step.tensions.max()))
    return DeploymentPlan(steps, act)


def redesign_plan_prestress(model: Model, plan: DeploymentPlan, designed,
                            target) -> DeploymentPlan:
    """Pin the designed clusters' tension at every substep and recompute the
    rest lengths so statics, tensions and rest lengths stay consistent."""
    new_steps = []
    designed_idx = _resolve_clusters(model, designed)
    for step in plan.steps:
        sol = prestress_design(model, step.coords, designed, target)
        l0c = rest_length_for(sol.tensions, step.cluster_lengths, model.spec)
        new_steps.append(PlanStep(rest_lengths=l0c, tensions=sol.tensions,
                                  coords=step.coords.copy(),
                                  cluster_lengths=step.cluster_lengths.copy()))
    return DeploymentPlan(new_steps, plan.actuated, designed_idx,
                          np.atleast_1d(np.asarray(target, dtype=float)))


def default_time_step(model: Model, coords: np.ndarray, l0c: np.ndarray,
                      periods_per_step: int = 50) -> float:
    """dt resolving the stiffest mode: 1 / (periods_per_step * f_max)."""
    modal = modal_analysis(model, coords, l0c)
    f_max = float(modal.frequencies[-1])
    return 1.0 / (periods_per_step * f_max)


def _plant_equilibrium(model: Model, coords: np.ndarray, l0c: np.ndarray,
                       fallback: np.ndarray | None = None):
    # the plant is reality: actuation errors may genuinely slacken cables
    try:
        result = form_find(model.with_coords(coords), l0c=l0c, slack=True)
    except (ConvergenceError, DegenerateGeometryError):
        # a perturbed warm start can stall in a residual local minimum or
        # collapse a slack member mid-iteration even when the equilibrium
        # exists; retry from the planned configuration
        if fallback is None:
            raise
        result = form_find(model.with_coords(fallback), l0c=l0c, slack=True)
    _, l_c, _ = assembly.member_lengths(model.topology, result.coords)
    return result, l_c


def open_loop_deploy(model: Model, plan: DeploymentPlan,
                     mode: str = "pseudo-static", duration: float | None = None,
                     dt: float | None = None, error_model: ErrorModel | None = None,
                     seed: int | None = None) -> DeploymentHistory:
    """Replay the plan's rest-length schedule without feedback.

    mode "pseudo-static": substep-by-substep form-finding.  mode "dynamic":
    one time integration over `duration` seconds with the substep rest
    lengths ramped piecewise linearly.
    """
    if mode not in ("pseudo-static", "dynamic"):
        raise ValidationError(f"mode must be 'pseudo-static' or 'dynamic', got {mode!r}")
    error_model = error_model or ErrorModel()
    rng = np.random.default_rng(seed)
    topo = model.topology
    n_steps = len(plan.steps)

    commanded = plan.rest_length_table()
    applied = np.array([error_model.apply(row, rng) for row in commanded])

    start_coords = error_model.perturb_coords(model, plan.steps[0].coords, rng)

    if mode == "dynamic":
        if duration is None or duration <= 0:
            raise ValidationError("dynamic mode needs a positive duration")
        times = duration * np.arange(n_steps) / (n_steps - 1)
        schedule = ActuationSchedule(times, applied)
        eq0, _ = _plant_equilibrium(model, start_coords, applied[0])
        free = topo.free_dof
        if dt is None:
            dt = default_time_step(model, eq0.coords, applied[0])
        state = DynamicState(coords=eq0.coords[free],
                             velocity=np.zeros(len(free)))
        hist = integrate(model.with_coords(eq0.coords), state, schedule, dt, duration)
        # substep-aligned records sampled from the time history
        idx = np.searchsorted(hist.time, times, side="left")
        idx = np.minimum(idx, len(hist.time) - 1)
        coords_rows = hist.coords[idx]
        tens_rows = hist.tensions[idx]
        l_c_rows = np.array([
            assembly.member_lengths(topo, row)[1] for row in coords_rows])
        return DeploymentHistory(
            commanded=commanded, applied=applied, coords=coords_rows,
            cluster_lengths=l_c_rows, tensions=tens_rows,
            residuals=np.full(n_steps, np.nan),
            corrections=np.zeros(n_steps, dtype=int), dynamic=hist)

    coords_rows, l_c_rows, tens_rows, res_rows = [], [], [], []
    coords = start_coords
    for k in range(n_steps):
        result, l_c = _plant_equilibrium(model, coords, applied[k],
                                         fallback=plan.steps[k].coords)
        coords = result.coords
        coords_rows.append(coords)
        l_c_rows.append(l_c)
        tens_rows.append(result.tensions)
        res_rows.append(result.residual)
    return DeploymentHistory(
        commanded=commanded, applied=applied, coords=np.array(coords_rows),
        cluster_lengths=np.array(l_c_rows), tensions=np.array(tens_rows),
        residuals=np.array(res_rows),
        corrections=np.zeros(n_steps, dtype=int))


def _scalar_sensitivity(model: Model, coords: np.ndarray, l0c: np.ndarray,
                        cluster: int) -> float:
    """Model-based gain: d t_cluster / d l0c_cluster at the estimated state."""
    k_tc_l0c = assembly.sensitivity_matrices(model.topology, coords, model.spec,
                                             l0c=l0c, slack=model.options.slack)[3]
    return float(k_tc_l0c[cluster, cluster])


def closed_loop_deploy(model: Model, plan: DeploymentPlan, feedback_cluster,
                       error_model: ErrorModel | None = None,
                       seed: int | None = None,
                       gain_policy: str = "newton") -> DeploymentHistory:
    """Tension-feedback deployment (pseudo-static).

    Per substep the actuated (diagonal) clusters are commanded from the plan;
    the feedback cluster's rest length is corrected from its measured tension
    through the model-based scalar sensitivity, iterated until the tension
    error is within tolerance (gain_policy "newton") or applied once
    (gain_policy "one-shot").
    """
    if gain_policy not in ("newton", "one-shot"):
        raise ValidationError(f"unknown gain_policy {gain_policy!r}")
    error_model = error_model or ErrorModel()
    rng = np.random.default_rng(seed)
    topo, opts = model.topology, model.options
    fb = topo.cluster_index(feedback_cluster) if isinstance(feedback_cluster, str) \
        else int(feedback_cluster)

    commanded_rows, applied_rows = [], []
    coords_rows, l_c_rows, tens_rows, res_rows, corr_rows = [], [], [], [], []

    coords = error_model.perturb_coords(model, plan.steps[0].coords, rng)
    for k, step in enumerate(plan.steps):
        command = step.rest_lengths.copy()
        target = float(step.tensions[fb])
        tol = opts.tension_tol_rel * abs(target)

        # re-linearized once per substep, at the model's predicted state
        gain = _scalar_sensitivity(model, step.coords, command, fb)
        if gain == 0.0 or not np.isfinite(gain):
            raise ControlDivergenceError(
                f"zero feedback sensitivity at substep {k}")

        errors = []
        corrections = 0
        while True:
            applied = error_model.apply(command, rng)
            result, l_c = _plant_equilibrium(model, coords, applied,
                                             fallback=step.coords)
            coords = result.coords
            measured = float(result.tensions[fb])
            dt1 = target - measured
            errors.append(dt1)
            if abs(dt1) <= tol or corrections >= opts.max_corrections:
                break
            if gain_policy == "one-shot" and corrections >= 1:
                break
            # genuine divergence drives the error well past the uncorrected
            # starting error without ever improving; noisy actuation hovers
            # at its noise floor and bias errors decay after one correction
            if len(errors) >= 4:
                mags = [abs(e) for e in errors[-3:]]
                if mags[0] <= mags[1] <= mags[2] and mags[2] > tol \
                        and mags[2] >= 2.0 * abs(errors[0]):
                    raise ControlDivergenceError(
                        f"tension feedback diverging at substep {k} "
                        f"(errors {errors[-3:]})"
                    )
            command[fb] += dt1 / gain
            corrections += 1

        commanded_rows.append(command)
        applied_rows.append(applied)
        coords_rows.append(coords)
        l_c_rows.append(l_c)
        tens_rows.append(result.tensions)
        res_rows.append(result.residual)
        corr_rows.append(corrections)
        log.debug("closed-loop substep %d: %d corrections, tension error %.3g",
                  k, corrections, errors[-1])

    return DeploymentHistory(
        commanded=np.array(commanded_rows), applied=np.array(applied_rows),
        coords=np.array(coords_rows), cluster_lengths=np.array(l_c_rows),
        tensions=np.array(tens_rows), residuals=np.array(res_rows),
        corrections=np.array(corr_rows))
