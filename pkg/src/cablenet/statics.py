"""Nonlinear equilibrium, prestress design and eigen-analysis.

Sign convention: the nodal gravity vector g holds the actual gravity force
(negative z for a downward g0), so the free-node unbalance at equilibrium is
F_p = Ea^T (A2c t_c - f_ex - g) = 0.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import assembly
from .errors import (
    ConvergenceError,
    DegenerateGeometryError,
    InfeasiblePrestressError,
    UnstableStructureError,
    ValidationError,
)
from .model import Model

__all__ = ["FormFindResult", "PrestressSolution", "ModalResult",
           "form_find", "prestress_design", "modal_analysis"]

log = logging.getLogger(__name__)


@dataclass
class FormFindResult:
    coords: np.ndarray  # full equilibrated coordinate vector
    tensions: np.ndarray  # t_c at equilibrium
    residual: float  # infinity norm of the free-node unbalance
    iterations: int
    converged: bool
    residual_history: list


@dataclass
class PrestressSolution:
    rank: int
    self_stress_modes: np.ndarray  # V2, n_ec x (n_ec - r)
    mechanism_modes: np.ndarray  # U2, n_a x (n_a - r)
    coefficients: np.ndarray  # z
    tensions: np.ndarray  # designed t_c
    particular: np.ndarray  # pinv(Abar_2c) w_a


@dataclass
class ModalResult:
    frequencies: np.ndarray  # Hz, ascending
    mode_shapes: np.ndarray  # columns over free coordinates, M-orthonormal
    stiffness_eigenvalues: np.ndarray  # ascending eigenvalues of K_Taa


def default_force_tol(model: Model, f_ex: np.ndarray, gravity: np.ndarray) -> float:
    ea_max = float(model.spec.axial_stiffness.max())
    return 1e-8 * max(
        float(np.abs(gravity).max(initial=0.0)),
        float(np.abs(f_ex).max(initial=0.0)),
        ea_max * 1e-6,
    )


def _unbalance(model: Model, coords: np.ndarray, l0c: np.ndarray,
               f_ex: np.ndarray, slack: bool | None = None):
    """Free-node residual and tensions at a configuration."""
    topo, spec = model.topology, model.spec
    lengths, l_c, _ = assembly.member_lengths(topo, coords)
    slack = model.options.slack if slack is None else slack
    t_c = assembly.cluster_tensions(l_c, spec, l0c, slack=slack,
                                    cluster_names=topo.cluster_names)
    l0 = assembly.rest_length_split(topo, lengths, l0c)
    g = assembly.gravity_vector(topo, spec, l0, model.point_masses)
    a2c = assembly.equilibrium_matrix(topo, coords)
    residual = (a2c @ t_c - f_ex - g)[topo.free_dof]
    return residual, t_c, g


def form_find(model: Model, l0c: np.ndarray | None = None,
              f_ex: np.ndarray | None = None, tol: float | None = None,
              max_iter: int | None = None,
              slack: bool | None = None) -> FormFindResult:
    """Newton-Raphson equilibrium solve on the free coordinates.

    Starts from the model's coordinates; fixed nodes never move.  Each step
    solves K_Taa dn_a = -F_p with backtracking damping on residual increase.
    `slack` overrides the model option: when False the converged equilibrium
    must be fully taut (iterates may still pass through slack states).
    """
    topo, spec, opts = model.topology, model.spec, model.options
    l0c = spec.rest_length if l0c is None else np.asarray(l0c, dtype=float)
    f_ex = np.zeros(3 * topo.node_count) if f_ex is None else np.asarray(f_ex, dtype=float)
    max_iter = opts.max_iter if max_iter is None else max_iter
    slack = opts.slack if slack is None else slack

    coords = model.coords.copy()
    free = topo.free_dof

    # Iterates may pass through slack states (clamped to zero tension); only
    # the converged equilibrium must be taut when slack mode is off.
    residual, t_c, g = _unbalance(model, coords, l0c, f_ex, slack=True)
    if tol is None:
        tol = opts.force_tol if opts.force_tol is not None else \
            default_force_tol(model, f_ex, g)

    history = [float(np.abs(residual).max())]
    iterations = 0
    while history[-1] > tol and iterations < max_iter:
        _, _, _, k_t = assembly.stiffness_matrices(
            topo, coords, spec, t_c, l0c, slack=True)
        step = -assembly._solve_spd(k_t[np.ix_(free, free)], residual)

        alpha = 1.0
        for backtrack in range(opts.max_backtracks + 1):
            trial = coords.copy()
            trial[free] += alpha * step
            try:
                trial_res, trial_t, _ = _unbalance(model, trial, l0c, f_ex,
                                                   slack=True)
            except DegenerateGeometryError:
                if backtrack == opts.max_backtracks:
                    raise
                alpha *= 0.5
                continue
            if float(np.abs(trial_res).max()) < history[-1] or \
                    backtrack == opts.max_backtracks:
                break
            alpha *= 0.5
        coords, residual, t_c = trial, trial_res, trial_t
        iterations += 1
        history.append(float(np.abs(residual).max()))
        log.debug("form_find iter=%d residual=%.3e step=%.3e alpha=%.3g",
                  iterations, history[-1], float(np.linalg.norm(step)), alpha)

    converged = history[-1] <= tol
    if not converged:
        raise ConvergenceError(
            f"form-finding did not converge in {iterations} iterations "
            f"(residual {history[-1]:.3e} > tol {tol:.3e})",
            residual_history=history,
        )
    if not slack:
        # raises CompressionError if the equilibrium itself needs slack cables
        _, l_c, _ = assembly.member_lengths(topo, coords)
        t_c = assembly.cluster_tensions(l_c, spec, l0c, slack=False,
                                        cluster_names=topo.cluster_names)
    return FormFindResult(coords=coords, tensions=t_c, residual=history[-1],
                          iterations=iterations, converged=True,
                          residual_history=history)


def _resolve_clusters(model: Model, designed) -> np.ndarray:
    if isinstance(designed, (str, int, np.integer)):
        designed = [designed]
    idx = [model.topology.cluster_index(d) if isinstance(d, str) else int(d)
           for d in designed]
    return np.asarray(idx, dtype=int)


def prestress_design(model: Model, coords: np.ndarray, designed, target,
                     w_a: np.ndarray | None = None) -> PrestressSolution:
    """SVD prestress design: t_c = pinv(Abar_2c) w_a + V2 z with t_d = target.

    `designed` names (or indexes) exactly n_ec - rank clusters whose tensions
    are pinned to `target`.
    """
    topo, opts = model.topology, model.options
    e_d = _resolve_clusters(model, designed)
    target = np.atleast_1d(np.asarray(target, dtype=float))

    abar = assembly.equilibrium_matrix(topo, coords)[topo.free_dof]
    u, sigma, vt = linalg.svd(abar)
    rank = int(np.sum(sigma > opts.svd_rtol * sigma[0]))
    v2 = vt[rank:].T
    u2 = u[:, rank:]
    n_modes = topo.cluster_count - rank

    if n_modes == 0:
        raise InfeasiblePrestressError("structure has no self-stress mode")
    if len(e_d) != n_modes:
        raise ValidationError(
            f"{n_modes} cluster(s) must be designed (one per self-stress mode), "
            f"got {len(e_d)}"
        )
    if target.shape != (n_modes,):
        raise ValidationError(f"target must have {n_modes} entries")

    if w_a is None:
        particular = np.zeros(topo.cluster_count)
    else:
        w_a = np.asarray(w_a, dtype=float)
        if np.any(w_a != 0.0):
            warnings.warn(
                "nonzero free-node load in prestress design: the net's two-"
                "cable free joints require w_a = 0 for a feasible prestress",
                stacklevel=2,
            )
        particular = linalg.pinv(abar) @ w_a

    reduced = v2[e_d, :]
    if np.linalg.matrix_rank(reduced) < n_modes:
        raise InfeasiblePrestressError("designed members do not span prestress modes")
    z = linalg.solve(reduced, target - particular[e_d])
    t_c = particular + v2 @ z

    if np.any(t_c < 0) and not opts.slack:
        raise InfeasiblePrestressError(
            f"designed prestress puts cluster "
            f"{topo.cluster_names[int(np.argmin(t_c))]!r} into compression"
        )
    if np.max(np.abs(t_c[e_d] - target)) > 1e-9 * max(np.abs(target).max(), 1.0):
        raise InfeasiblePrestressError("designed tensions missed their target")
    return PrestressSolution(rank=rank, self_stress_modes=v2, mechanism_modes=u2,
                             coefficients=z, tensions=t_c, particular=particular)


def modal_analysis(model: Model, coords: np.ndarray | None = None,
                   l0c: np.ndarray | None = None, k: int | None = None,
                   t_c: np.ndarray | None = None) -> ModalResult:
    """Lowest-k free-vibration modes of (K_Taa, M_aa) plus K_Taa eigenvalues."""
    topo, spec, opts = model.topology, model.spec, model.options
    coords = model.coords if coords is None else np.asarray(coords, dtype=float)
    l0c = spec.rest_length if l0c is None else np.asarray(l0c, dtype=float)

    lengths, l_c, _ = assembly.member_lengths(topo, coords)
    if t_c is None:
        t_c = assembly.cluster_tensions(l_c, spec, l0c, slack=opts.slack,
                                        cluster_names=topo.cluster_names)
    _, _, _, k_t = assembly.stiffness_matrices(topo, coords, spec, t_c, l0c,
                                               slack=opts.slack)
    free = topo.free_dof
    k_taa = k_t[np.ix_(free, free)]
    l0 = assembly.rest_length_split(topo, lengths, l0c)
    m_aa = assembly.mass_matrix(topo, spec, l0, model.point_masses)[np.ix_(free, free)]

    stiff_eig = linalg.eigvalsh(k_taa)
    negative = int(np.sum(stiff_eig < -1e-10 * max(abs(stiff_eig[-1]), 1.0)))
    if negative:
        raise UnstableStructureError(negative)

    omega2, phi = linalg.eigh(k_taa, m_aa)
    omega2 = np.maximum(omega2, 0.0)  # roundoff guard on semidefinite states
    freqs = np.sqrt(omega2) / (2.0 * np.pi)
    if k is not None:
        freqs, phi, stiff_eig = freqs[:k], phi[:, :k], stiff_eig[:k]
    return ModalResult(frequencies=freqs, mode_shapes=phi,
                       stiffness_eigenvalues=stiff_eig)
