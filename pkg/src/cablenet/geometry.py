"""Parametric generation of the deployable saddle-shaped cable net.

The net lives on the hyperbolic paraboloid z = y^2/b^2 - x^2/a^2, anchored to
p pinned nodes on the ellipse x^2/Rx^2 + y^2/Ry^2 = 1.  Inside the boundary
there are q free rings of p nodes each, every node on the saddle surface; the
innermost ring carries the closing hoop cable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "CableNetParams",
    "Topology",
    "Configuration",
    "boundary_nodes",
    "ring_scale",
    "ring_nodes",
    "build_topology",
    "cluster_names_for",
]


@dataclass(frozen=True)
class CableNetParams:
    """Seven scalars that fully define the net family.

    p  : boundary node count (>= 3)
    q  : radial complexity, number of free rings (>= 1)
    rx : major radius of the boundary ellipse
    ry : minor radius of the boundary ellipse
    a  : xz curvature constant of the saddle
    b  : yz curvature constant of the saddle
    c  : deployment-ratio coefficient, in-plane scale of the innermost ring
    """

    p: int
    q: int
    rx: float
    ry: float
    a: float
    b: float
    c: float
    angle_spacing: str = "parametric"  # or "arclength"

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise ValidationError(f"p must be an integer >= 3, got {self.p}")
        if int(self.q) != self.q or self.q < 1:
            raise ValidationError(f"q must be an integer >= 1, got {self.q}")
        for name in ("rx", "ry", "a", "b"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.c < 1:
            raise ValidationError(f"c must satisfy 0 < c < 1, got {self.c}")
        if self.angle_spacing not in ("parametric", "arclength"):
            raise ValidationError(
                f"angle_spacing must be 'parametric' or 'arclength', got {self.angle_spacing!r}"
            )

    def saddle_z(self, x, y):
        """Surface height z = y^2/b^2 - x^2/a^2."""
        return y**2 / self.b**2 - x**2 / self.a**2


@dataclass
class Topology:
    """Node/member incidence, cluster membership and the fixed/free split."""

    node_count: int
    members: np.ndarray  # (n_e, 2) int, [tail, head]
    cluster_of: np.ndarray  # (n_e,) int, index into cluster_names
    cluster_names: list[str]
    fixed_nodes: np.ndarray  # sorted int indices

    _free_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=int)
        self.cluster_of = np.asarray(self.cluster_of, dtype=int)
        self.fixed_nodes = np.unique(np.asarray(self.fixed_nodes, dtype=int))
        if self.members.ndim != 2 or self.members.shape[1] != 2:
            raise ValidationError("members must be an (n_e, 2) array of node pairs")
        if np.any(self.members[:, 0] == self.members[:, 1]):
            raise ValidationError("members must connect two distinct nodes")
        if self.members.size and (
            self.members.min() < 0 or self.members.max() >= self.node_count
        ):
            raise ValidationError("member node index out of range")
        if self.cluster_of.shape != (len(self.members),):
            raise ValidationError("cluster_of must assign every member to one cluster")
        if self.cluster_of.size and (
            self.cluster_of.min() < 0 or self.cluster_of.max() >= len(self.cluster_names)
        ):
            raise ValidationError("cluster index out of range")
        if self.fixed_nodes.size and (
            self.fixed_nodes.min() < 0 or self.fixed_nodes.max() >= self.node_count
        ):
            raise ValidationError("fixed node index out of range")

    @property
    def member_count(self) -> int:
        return len(self.members)

    @property
    def cluster_count(self) -> int:
        return len(self.cluster_names)

    @property
    def free_nodes(self) -> np.ndarray:
        if self._free_cache is None:
            mask = np.ones(self.node_count, dtype=bool)
            mask[self.fixed_nodes] = False
            self._free_cache = np.flatnonzero(mask)
        return self._free_cache

    @property
    def free_dof(self) -> np.ndarray:
        """Indices of free coordinates within the stacked 3*n_n vector."""
        return (3 * self.free_nodes[:, None] + np.arange(3)).ravel()

    def connectivity(self) -> np.ndarray:
        """Signed incidence matrix C (n_e x n_n): -1 at tail, +1 at head."""
        c = np.zeros((self.member_count, self.node_count))
        rows = np.arange(self.member_count)
        c[rows, self.members[:, 0]] = -1.0
        c[rows, self.members[:, 1]] = 1.0
        return c

    def clustering(self) -> np.ndarray:
        """0/1 membership matrix S (n_ec x n_e); cluster length = S @ l."""
        s = np.zeros((self.cluster_count, self.member_count))
        s[self.cluster_of, np.arange(self.member_count)] = 1.0
        return s

    def cluster_index(self, name: str) -> int:
        try:
            return self.cluster_names.index(name)
        except ValueError:
            raise ValidationError(
                f"unknown cluster {name!r}; available: {self.cluster_names}"
            ) from None

    def cluster_members(self, index: int) -> np.ndarray:
        return np.flatnonzero(self.cluster_of == index)


@dataclass
class Configuration:
    """Stacked nodal coordinate vector tied to a Topology's free/fixed split."""

    topology: Topology
    coords: np.ndarray  # (3 * node_count,)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).ravel()
        if self.coords.shape != (3 * self.topology.node_count,):
            raise ValidationError(
                f"coords must have length {3 * self.topology.node_count}, "
                f"got {self.coords.shape[0]}"
            )

    def node_positions(self) -> np.ndarray:
        return self.coords.reshape(-1, 3)


def _boundary_angles(params: CableNetParams) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(params.p) / params.p
    if params.angle_spacing == "parametric":
        return theta
    # Even spacing in arc length along the plan ellipse: invert the cumulative
    # arc-length function numerically on a dense parameter grid.
    t = np.linspace(0.0, 2.0 * np.pi, 20001)
    speed = np.hypot(-params.rx * np.sin(t), params.ry * np.cos(t))
    arc = np.concatenate(([0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(t))))
    targets = arc[-1] * np.arange(params.p) / params.p
    return np.interp(targets, arc, t)


def boundary_nodes(params: CableNetParams) -> np.ndarray:
    """The p pinned nodes on the boundary ellipse, lifted to the saddle."""
    theta = _boundary_angles(params)
    x = params.rx * np.cos(theta)
    y = params.ry * np.sin(theta)
    return np.column_stack([x, y, params.saddle_z(x, y)])


def ring_scale(params: CableNetParams, ring_index: int) -> float:
    """In-plane scale of ring r: linear from 1 at the boundary to c innermost."""
    if not 1 <= ring_index <= params.q:
        raise ValidationError(
            f"ring_index must be in 1..{params.q}, got {ring_index}"
        )
    return 1.0 - ring_index * (1.0 - params.c) / params.q


def ring_nodes(params: CableNetParams, ring_index: int) -> np.ndarray:
    """Free nodes of ring r: boundary X,Y scaled, z re-evaluated on the saddle."""
    s = ring_scale(params, ring_index)
    pts = boundary_nodes(params).copy()
    pts[:, 0] *= s
    pts[:, 1] *= s
    pts[:, 2] = params.saddle_z(pts[:, 0], pts[:, 1])
    return pts


def cluster_names_for(q: int) -> list[str]:
    """Diagonal cluster names outermost-in, then the hoop cluster."""
    if q == 1:
        diagonals = ["DC"]
    elif q == 2:
        diagonals = ["ODC", "IDC"]
    else:
        diagonals = [f"DC{r}" for r in range(1, q + 1)]
    return diagonals + ["HC"]


def build_topology(params: CableNetParams) -> tuple[Topology, Configuration]:
    """Generate the full net: 2p nodes, p*(q+1) members, q+1 clusters.

    Node ordering: boundary nodes 0..p-1 counterclockwise from theta=0, then
    the free hoop-ring nodes p..2p-1 at the same parametric angles, scaled by
    c onto the saddle.  The diagonal clusters fan out at decreasing angular
    offset (outermost first): the outermost cluster connects boundary node
    k+q-1 to free node k for every k, the innermost runs straight along the
    radial line; all hoop segments form the last cluster.

    Every free node is a pulley joint of at least three members, so positive
    prestress stabilizes it (a two-member pulley node would be an exact
    sliding mechanism with zero tangent stiffness).
    """
    p, q = params.p, params.q
    nodes = np.vstack([boundary_nodes(params), ring_nodes(params, q)])

    members = []
    cluster_of = []
    for j in range(q):
        for k in range(p):
            members.append(((k + q - 1 - j) % p, p + k))
            cluster_of.append(j)
    for k in range(p):
        members.append((p + k, p + (k + 1) % p))
        cluster_of.append(q)

    topo = Topology(
        node_count=2 * p,
        members=np.array(members),
        cluster_of=np.array(cluster_of),
        cluster_names=cluster_names_for(q),
        fixed_nodes=np.arange(p),
    )
    return topo, Configuration(topo, nodes.ravel())
