"""Shared fixtures: the two example nets and random clustered structures."""

from __future__ import annotations

import numpy as np
import pytest

from cablenet import assembly
from cablenet.fixtures import initialize_prestress, saddle_lab, saddle_paper
from cablenet.geometry import Topology
from cablenet.model import Model


@pytest.fixture(scope="session")
def lab_model():
    return saddle_lab()


@pytest.fixture(scope="session")
def lab_equilibrated(lab_model):
    """Lab net prestressed so the hoop carries 100 N."""
    return initialize_prestress(lab_model, ["HC"], [100.0])


@pytest.fixture(scope="session")
def paper_model():
    return saddle_paper()


@pytest.fixture(scope="session")
def paper_equilibrated(paper_model):
    """Large net prestressed so the outer diagonals carry 1e4 N."""
    return initialize_prestress(paper_model, ["ODC"], [1e4])


def random_structure(rng: np.random.Generator, n_nodes: int | None = None,
                     clustered: bool = True) -> Model:
    """A random pinned cable structure in general position.

    Nodes are scattered in a unit box; a random connected member set is drawn
    and members are grouped into clusters (or left one-per-cluster).  Rest
    lengths are set 1% short so every cluster is taut.
    """
    if n_nodes is None:
        n_nodes = int(rng.integers(5, 10))
    coords = rng.uniform(-1.0, 1.0, size=3 * n_nodes)

    # spanning tree plus extra chords keeps the structure connected
    edges = set()
    order = rng.permutation(n_nodes)
    for i in range(1, n_nodes):
        a = int(order[i])
        b = int(order[int(rng.integers(0, i))])
        edges.add((min(a, b), max(a, b)))
    n_extra = int(rng.integers(1, n_nodes))
    while len(edges) < n_nodes - 1 + n_extra:
        a, b = rng.integers(0, n_nodes, size=2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    members = np.array(sorted(edges))
    n_e = len(members)

    if clustered:
        n_ec = int(rng.integers(2, n_e + 1))
        cluster_of = np.concatenate([
            np.arange(n_ec),  # every cluster non-empty
            rng.integers(0, n_ec, size=n_e - n_ec),
        ])
        rng.shuffle(cluster_of)
    else:
        n_ec = n_e
        cluster_of = np.arange(n_e)

    n_fixed = int(rng.integers(3, max(4, n_nodes // 2 + 1)))
    fixed = rng.choice(n_nodes, size=n_fixed, replace=False)

    topo = Topology(
        node_count=n_nodes,
        members=members,
        cluster_of=cluster_of,
        cluster_names=[f"C{i}" for i in range(n_ec)],
        fixed_nodes=fixed,
    )
    lengths, l_c, _ = assembly.member_lengths(topo, coords)
    spec = assembly.MemberSpec(
        density=rng.uniform(500.0, 8000.0, size=n_e),
        area=rng.uniform(1e-5, 1e-4, size=n_e),
        modulus=rng.uniform(1e9, 1e11, size=n_ec),
        cluster_area=rng.uniform(1e-5, 1e-4, size=n_ec),
        rest_length=l_c / 1.01,  # 1% taut everywhere
        damping_coeff=rng.uniform(0.0, 0.1),
        gravity=np.array([0.0, 0.0, -9.80665]),
    )
    return Model(topology=topo, coords=coords, spec=spec)
