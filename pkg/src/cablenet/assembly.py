"""Matrix and vector assembly for clustered cable structures.

Everything here is a pure function of (topology, coords, member properties).
Cluster tensions are uniform along a clustered cable (frictionless pulleys),
so per-member tension is S^T t_c and cluster length is S l.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CompressionError,
    DegenerateGeometryError,
    SingularStiffnessError,
    ValidationError,
)
from .geometry import Topology

__all__ = [
    "MemberSpec",
    "AssembledSystem",
    "member_lengths",
    "rest_length_split",
    "cluster_tensions",
    "equilibrium_matrix",
    "member_equilibrium_matrix",
    "compatibility_matrix",
    "stiffness_matrices",
    "mass_matrix",
    "damping_matrix",
    "gravity_vector",
    "sensitivity_matrices",
    "partition",
    "assemble",
    "internal_force",
]

# Members shorter than this fraction of the bounding-box diagonal are treated
# as geometrically degenerate.
DEGENERACY_RTOL = 1e-9


@dataclass
class MemberSpec:
    """Material and sizing data: per-member (rho, A) and per-cluster (E, A, l0).

    rest_length holds the cluster rest lengths l0c; the per-member rest
    lengths needed by the mass assembly are derived on demand by
    rest_length_split (proportional to current member lengths, which is the
    uniform-strain distribution of a frictionless clustered cable).
    """

    density: np.ndarray  # (n_e,) mass density
    area: np.ndarray  # (n_e,) cross-section area
    modulus: np.ndarray  # (n_ec,) Young's modulus per cluster
    cluster_area: np.ndarray  # (n_ec,) cross-section area per cluster
    rest_length: np.ndarray  # (n_ec,) cluster rest lengths
    damping_coeff: float = 0.0  # dimensionless xi
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    damping_exponent: float = 0.5  # exponent on rho_c and E_c in d_c

    def __post_init__(self):
        for name in ("density", "area", "modulus", "cluster_area", "rest_length"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
            if np.any(getattr(self, name) <= 0):
                raise ValidationError(f"{name} entries must be strictly positive")
        self.gravity = np.asarray(self.gravity, dtype=float).ravel()
        if self.gravity.shape != (3,):
            raise ValidationError("gravity must be a 3-vector")
        if self.damping_coeff < 0:
            raise ValidationError("damping_coeff must be >= 0")

    @property
    def axial_stiffness(self) -> np.ndarray:
        """EA per cluster."""
        return self.modulus * self.cluster_area

    def cluster_density(self, topology: Topology) -> np.ndarray:
        """Per-cluster density as the mean over member densities."""
        s = topology.clustering()
        return (s @ self.density) / s.sum(axis=1)


@dataclass
class AssembledSystem:
    """All matrices of one configuration, computed in one pass."""

    lengths: np.ndarray
    cluster_lengths: np.ndarray
    tensions: np.ndarray
    eq_matrix: np.ndarray  # A2c, 3n_n x n_ec
    compat_matrix: np.ndarray  # B_lc = A2c^T
    stiffness: np.ndarray  # secant K
    geometric_stiffness: np.ndarray
    material_stiffness: np.ndarray
    tangent_stiffness: np.ndarray
    mass: np.ndarray
    damping: np.ndarray
    gravity_force: np.ndarray


def _check_degenerate(lengths: np.ndarray, coords: np.ndarray) -> None:
    pts = coords.reshape(-1, 3)
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    floor = DEGENERACY_RTOL * max(diag, 1.0)
    if np.any(lengths < floor):
        k = int(np.argmin(lengths))
        raise DegenerateGeometryError(
            f"member {k} has near-zero length {lengths[k]:.3e}"
        )


def member_lengths(topology: Topology, coords: np.ndarray):
    """Per-member lengths l, cluster lengths l_c = S l, directions H = N C^T."""
    pts = np.asarray(coords, dtype=float).reshape(-1, 3)
    h = pts[topology.members[:, 1]] - pts[topology.members[:, 0]]  # (n_e, 3)
    lengths = np.linalg.norm(h, axis=1)
    _check_degenerate(lengths, coords)
    l_c = np.bincount(topology.cluster_of, weights=lengths,
                      minlength=topology.cluster_count)
    return lengths, l_c, h.T


def rest_length_split(topology: Topology, lengths: np.ndarray,
                      l0c: np.ndarray) -> np.ndarray:
    """Per-member rest lengths: each member's share of l0c proportional to l."""
    l_c = np.bincount(topology.cluster_of, weights=lengths,
                      minlength=topology.cluster_count)
    return lengths * (np.asarray(l0c) / l_c)[topology.cluster_of]


def cluster_tensions(l_c: np.ndarray, spec: MemberSpec, l0c: np.ndarray | None = None,
                     slack: bool = False, cluster_names=None) -> np.ndarray:
    """Linear-elastic cluster tensions t_c = EA (l_c - l0c) / l0c.

    Taut mode (default) raises on compression; slack mode clamps to zero.
    """
    l0c = spec.rest_length if l0c is None else np.asarray(l0c, dtype=float)
    if np.any(l0c <= 0):
        raise ValidationError("cluster rest lengths must be strictly positive")
    t_c = spec.axial_stiffness * (l_c - l0c) / l0c
    if np.any(t_c < 0):
        if not slack:
            i = int(np.argmin(t_c))
            name = cluster_names[i] if cluster_names else str(i)
            raise CompressionError(name, float(t_c[i]))
        t_c = np.maximum(t_c, 0.0)
    return t_c


def member_equilibrium_matrix(topology: Topology, coords: np.ndarray) -> np.ndarray:
    """Unclustered equilibrium matrix A2 (3n_n x n_e): -u at tail, +u at head."""
    lengths, _, h = member_lengths(topology, coords)
    u = h / lengths  # (3, n_e)
    a2 = np.zeros((3 * topology.node_count, topology.member_count))
    cols = np.arange(topology.member_count)
    for axis in range(3):
        a2[3 * topology.members[:, 0] + axis, cols] = -u[axis]
        a2[3 * topology.members[:, 1] + axis, cols] = u[axis]
    return a2


def equilibrium_matrix(topology: Topology, coords: np.ndarray) -> np.ndarray:
    """Clustered equilibrium matrix A2c = A2 S^T (3n_n x n_ec)."""
    return member_equilibrium_matrix(topology, coords) @ topology.clustering().T


def compatibility_matrix(topology: Topology, coords: np.ndarray) -> np.ndarray:
    """B_lc with B_lc dn = dl_c; the exact transpose of the equilibrium matrix."""
    return equilibrium_matrix(topology, coords).T


def constrained_equilibrium_matrix(topology: Topology, coords: np.ndarray) -> np.ndarray:
    """A2c restricted to free-node rows (Abar_2c)."""
    return equilibrium_matrix(topology, coords)[topology.free_dof]


def _force_density_matrix(topology: Topology, q: np.ndarray) -> np.ndarray:
    """C^T diag(q) C expanded to 3D blocks, assembled by scatter."""
    n = topology.node_count
    small = np.zeros((n, n))
    i, j = topology.members[:, 0], topology.members[:, 1]
    np.add.at(small, (i, i), q)
    np.add.at(small, (j, j), q)
    np.add.at(small, (i, j), -q)
    np.add.at(small, (j, i), -q)
    return np.kron(small, np.eye(3))


def _slack_mask(l_c: np.ndarray, l0c: np.ndarray, slack: bool) -> np.ndarray:
    if not slack:
        return np.zeros(len(l_c), dtype=bool)
    return l_c < l0c


def stiffness_matrices(topology: Topology, coords: np.ndarray, spec: MemberSpec,
                       t_c: np.ndarray, l0c: np.ndarray | None = None,
                       slack: bool = False):
    """Secant K, geometric K_G, material K_E and tangent K_T = K_G + K_E."""
    l0c = spec.rest_length if l0c is None else np.asarray(l0c, dtype=float)
    lengths, l_c, _ = member_lengths(topology, coords)
    t_member = (np.asarray(t_c))[topology.cluster_of]  # S^T t_c

    k_secant = _force_density_matrix(topology, t_member / lengths)
    a2 = member_equilibrium_matrix(topology, coords)
    a2c = a2 @ topology.clustering().T
    k_g = k_secant - (a2 * (t_member / lengths)) @ a2.T

    ea = spec.axial_stiffness.copy()
    ea[_slack_mask(l_c, l0c, slack)] = 0.0  # slack cables carry no material stiffness
    k_e = (a2c * (ea / l0c)) @ a2c.T
    return k_secant, k_g, k_e, k_g + k_e


def mass_matrix(topology: Topology, spec: MemberSpec, l0: np.ndarray,
                point_masses: np.ndarray | None = None) -> np.ndarray:
    """Consistent bar-mass matrix plus nodal point masses on the diagonal.

    l0 is the per-member rest-length split; member mass m = rho A l0.
    """
    m = spec.density * spec.area * np.asarray(l0)
    n = topology.node_count
    small = np.zeros((n, n))
    i, j = topology.members[:, 0], topology.members[:, 1]
    np.add.at(small, (i, i), m)
    np.add.at(small, (j, j), m)
    np.add.at(small, (i, j), m)
    np.add.at(small, (j, i), m)
    small = (small + np.diag(np.diag(small))) / 6.0
    if point_masses is not None:
        small = small + np.diag(np.asarray(point_masses, dtype=float))
    return np.kron(small, np.eye(3))


def damping_matrix(topology: Topology, coords: np.ndarray, spec: MemberSpec) -> np.ndarray:
    """D = xi A2c diag(d_c) A2c^T with near-critical per-cluster coefficients."""
    if spec.damping_coeff == 0.0:
        return np.zeros((3 * topology.node_count,) * 2)
    e = spec.damping_exponent
    d_c = (2.0 * np.sqrt(3.0) / 3.0) * (
        spec.cluster_density(topology) ** e * spec.cluster_area * spec.modulus ** e
    )
    a2c = equilibrium_matrix(topology, coords)
    return spec.damping_coeff * (a2c * d_c) @ a2c.T


def gravity_vector(topology: Topology, spec: MemberSpec, l0: np.ndarray,
                   point_masses: np.ndarray | None = None) -> np.ndarray:
    """Nodal gravity force: half of each member's weight lumped to each end."""
    m = spec.density * spec.area * np.asarray(l0)
    nodal = np.zeros(topology.node_count)
    np.add.at(nodal, topology.members[:, 0], 0.5 * m)
    np.add.at(nodal, topology.members[:, 1], 0.5 * m)
    if point_masses is not None:
        nodal = nodal + np.asarray(point_masses, dtype=float)
    return np.kron(nodal, spec.gravity)


def internal_force(topology: Topology, coords: np.ndarray, spec: MemberSpec,
                   l0c: np.ndarray | None = None, slack: bool = False) -> np.ndarray:
    """Nodal internal force A2c t_c at the given configuration."""
    _, l_c, _ = member_lengths(topology, coords)
    t_c = cluster_tensions(l_c, spec, l0c, slack=slack,
                           cluster_names=topology.cluster_names)
    return equilibrium_matrix(topology, coords) @ t_c


def partition(matrix: np.ndarray, topology: Topology):
    """Split a 3n x 3n matrix into (free,free) and (free,fixed) blocks."""
    free = topology.free_dof
    fixed = np.setdiff1d(np.arange(matrix.shape[0]), free)
    return matrix[np.ix_(free, free)], matrix[np.ix_(free, fixed)]


def _solve_spd(k_aa: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve with K_aa, raising a rank report when it is numerically singular."""
    import warnings

    from scipy import linalg

    try:
        with warnings.catch_warnings():
            # near-singular iterates are expected mid-Newton (slack states);
            # hard singularity is reported explicitly below
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            sol = linalg.solve(k_aa, rhs, assume_a="sym")
    except linalg.LinAlgError:
        sol = None
    if sol is None or not np.all(np.isfinite(sol)):
        eig = linalg.eigvalsh(k_aa)
        null_dim = int(np.sum(np.abs(eig) <= 1e-12 * max(np.abs(eig).max(), 1.0)))
        raise SingularStiffnessError(null_dim)
    return sol


def sensitivity_matrices(topology: Topology, coords: np.ndarray, spec: MemberSpec,
                         t_c: np.ndarray | None = None,
                         l0c: np.ndarray | None = None, slack: bool = False):
    """The five linearized-statics sensitivity matrices.

    Returns (K_l0c, K_na_l0c, K_na_w, K_tc_l0c, K_tc_w).  Note the derivative
    of tension w.r.t. rest length carries an l_c factor, dt_c/dl0c =
    -EA l_c / l0c^2, which propagates into K_l0c.
    """
    l0c = spec.rest_length if l0c is None else np.asarray(l0c, dtype=float)
    lengths, l_c, _ = member_lengths(topology, coords)
    if t_c is None:
        t_c = cluster_tensions(l_c, spec, l0c, slack=slack,
                               cluster_names=topology.cluster_names)
    ea = spec.axial_stiffness.copy()
    ea[_slack_mask(l_c, l0c, slack)] = 0.0

    a2c = equilibrium_matrix(topology, coords)
    free = topology.free_dof
    a2c_free = a2c[free]
    _, _, _, k_t = stiffness_matrices(topology, coords, spec, t_c, l0c, slack=slack)
    k_taa = k_t[np.ix_(free, free)]

    k_l0c = -(a2c * (ea * l_c / l0c**2))  # 3n_n x n_ec
    k_na_l0c = -_solve_spd(k_taa, k_l0c[free])
    inv_free = _solve_spd(k_taa, np.eye(len(free)))
    k_na_w = np.zeros((len(free), 3 * topology.node_count))
    k_na_w[:, free] = inv_free

    front = (ea / l0c)[:, None]
    k_tc_l0c = front * (a2c_free.T @ k_na_l0c) - np.diag(ea * l_c / l0c**2)
    k_tc_w = front * (a2c_free.T @ k_na_w)
    return k_l0c, k_na_l0c, k_na_w, k_tc_l0c, k_tc_w


def assemble(topology: Topology, coords: np.ndarray, spec: MemberSpec,
             l0c: np.ndarray | None = None, point_masses: np.ndarray | None = None,
             slack: bool = False) -> AssembledSystem:
    """One-stop assembly of every matrix at the given configuration."""
    l0c = spec.rest_length if l0c is None else np.asarray(l0c, dtype=float)
    lengths, l_c, _ = member_lengths(topology, coords)
    t_c = cluster_tensions(l_c, spec, l0c, slack=slack,
                           cluster_names=topology.cluster_names)
    a2c = equilibrium_matrix(topology, coords)
    k, k_g, k_e, k_t = stiffness_matrices(topology, coords, spec, t_c, l0c, slack=slack)
    l0 = rest_length_split(topology, lengths, l0c)
    return AssembledSystem(
        lengths=lengths,
        cluster_lengths=l_c,
        tensions=t_c,
        eq_matrix=a2c,
        compat_matrix=a2c.T,
        stiffness=k,
        geometric_stiffness=k_g,
        material_stiffness=k_e,
        tangent_stiffness=k_t,
        mass=mass_matrix(topology, spec, l0, point_masses),
        damping=damping_matrix(topology, coords, spec),
        gravity_force=gravity_vector(topology, spec, l0, point_masses),
    )
