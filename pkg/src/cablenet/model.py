"""Model container: topology + configuration + materials + solver options."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import MemberSpec
from .errors import ValidationError
from .geometry import CableNetParams, Configuration, Topology

__all__ = ["SolverOptions", "Model"]


@dataclass
class SolverOptions:
    """Tolerances and behavioural switches shared by the solvers."""

    force_tol: float | None = None  # None: derived from loads and EA
    max_iter: int = 100
    max_backtracks: int = 20
    svd_rtol: float = 1e-10  # rank cutoff relative to sigma_max
    slack: bool = False  # clamp compressive cable tensions to zero
    tension_tol_rel: float = 1e-3  # closed-loop tension tolerance, relative
    max_corrections: int = 10  # closed-loop correction cap per substep


@dataclass
class Model:
    """A complete structural model in its reference configuration."""

    topology: Topology
    coords: np.ndarray  # (3 n_n,) reference nodal coordinates
    spec: MemberSpec
    point_masses: np.ndarray | None = None  # (n_n,) nodal masses
    params: CableNetParams | None = None  # present for generated nets
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).ravel()
        if self.coords.shape != (3 * self.topology.node_count,):
            raise ValidationError("coords length must be 3 * node_count")
        if self.point_masses is not None:
            self.point_masses = np.asarray(self.point_masses, dtype=float).ravel()
            if self.point_masses.shape != (self.topology.node_count,):
                raise ValidationError("point_masses must have one entry per node")
            if np.any(self.point_masses < 0):
                raise ValidationError("point_masses must be >= 0")

    @property
    def configuration(self) -> Configuration:
        return Configuration(self.topology, self.coords)

    def with_coords(self, coords: np.ndarray) -> "Model":
        return replace(self, coords=np.asarray(coords, dtype=float).copy())

    def with_rest_length(self, l0c: np.ndarray) -> "Model":
        return replace(self, spec=replace(self.spec, rest_length=np.asarray(l0c, dtype=float).copy()))
