"""Form-finding, prestress design and modal analysis against oracles.

Oracles used here:
- direct minimization of an independently coded potential energy (scipy BFGS)
  for the Newton form-finder,
- Gaussian elimination with full pivoting for the equilibrium-matrix rank,
- explicit eigen-residual and mass-orthonormality checks for the modes.
"""

import numpy as np
import pytest
from scipy import optimize

from cablenet import assembly
from cablenet.errors import (
    ConvergenceError,
    InfeasiblePrestressError,
    UnstableStructureError,
    ValidationError,
)
from cablenet.fixtures import initialize_prestress, saddle_lab
from cablenet.geometry import CableNetParams, build_topology
from cablenet.model import Model
from cablenet.statics import form_find, modal_analysis, prestress_design


# ---------------------------------------------------------------------------
# independent potential energy (naive loops, no shared assembly code)
# ---------------------------------------------------------------------------

def naive_elastic_energy(nodes, members, cluster_of, n_clusters, ea, l0c):
    l_c = np.zeros(n_clusters)
    for e, (i, j) in enumerate(members):
        l_c[cluster_of[e]] += np.linalg.norm(nodes[j] - nodes[i])
    return float(np.sum(0.5 * ea * (l_c - l0c) ** 2 / l0c))


def test_form_find_matches_energy_minimization(lab_model):
    """The Newton equilibrium is the minimum of the total potential energy."""
    model = lab_model
    topo, spec = model.topology, model.spec
    l0c = spec.rest_length * 0.99  # 1% taut everywhere

    # small external load so the test state is not the symmetric one
    f_ex = np.zeros(3 * topo.node_count)
    f_ex[3 * topo.free_nodes[0] + 2] = 5.0

    result = form_find(model, l0c=l0c, f_ex=f_ex)

    free = topo.free_dof
    ea = spec.axial_stiffness

    def potential(x_free):
        full = model.coords.copy()
        full[free] = x_free
        elastic = naive_elastic_energy(full.reshape(-1, 3), topo.members,
                                       topo.cluster_of, topo.cluster_count,
                                       ea, l0c)
        return elastic - float(f_ex @ full)

    opt = optimize.minimize(potential, model.coords[free], method="BFGS",
                            options={"gtol": 1e-10, "maxiter": 2000})
    scale = np.abs(result.coords[free]).max()
    assert np.abs(opt.x - result.coords[free]).max() <= 1e-5 * scale
    assert potential(result.coords[free]) <= opt.fun + 1e-10 * abs(opt.fun)


def test_form_find_converges_and_reports(lab_model):
    result = form_find(lab_model, l0c=lab_model.spec.rest_length * 0.995)
    assert result.converged
    assert result.residual <= 1e-8 * lab_model.spec.axial_stiffness.max() * 1e-6
    assert len(result.residual_history) == result.iterations + 1
    assert np.all(result.tensions > 0)


def test_form_find_nonconvergence_raises(lab_model):
    with pytest.raises(ConvergenceError) as err:
        form_find(lab_model, l0c=lab_model.spec.rest_length * 0.9, max_iter=1)
    assert err.value.exit_code == 3
    assert err.value.residual_history


def test_fixed_nodes_never_move(lab_model):
    result = form_find(lab_model, l0c=lab_model.spec.rest_length * 0.99)
    topo = lab_model.topology
    fixed_dof = (3 * topo.fixed_nodes[:, None] + np.arange(3)).ravel()
    np.testing.assert_array_equal(result.coords[fixed_dof],
                                  lab_model.coords[fixed_dof])


# ---------------------------------------------------------------------------
# rank oracle: Gaussian elimination with full pivoting
# ---------------------------------------------------------------------------

def elimination_rank(matrix, rtol=1e-10):
    a = np.array(matrix, dtype=float)
    scale = np.abs(a).max()
    if scale == 0.0:
        return 0
    rank = 0
    while a.size:
        idx = np.unravel_index(np.argmax(np.abs(a)), a.shape)
        pivot = a[idx]
        if abs(pivot) <= rtol * scale:
            break
        rank += 1
        a = np.delete(np.delete(
            a - np.outer(a[:, idx[1]], a[idx[0], :]) / pivot, idx[0], axis=0),
            idx[1], axis=1)
    return rank


def saddle_equilibrium(p, q, **geo):
    """Generic net of the family, form-found to its taut equilibrium.

    The generated configuration is not self-stressable (the free ring rotates
    into equilibrium), so rank checks must use the equilibrated coordinates.
    """
    params = CableNetParams(p=p, q=q, **geo)
    topo, config = build_topology(params)
    n_e, n_ec = topo.member_count, topo.cluster_count
    _, l_c, _ = assembly.member_lengths(topo, config.coords)
    spec = assembly.MemberSpec(
        density=np.full(n_e, 7850.0), area=np.full(n_e, 1e-4),
        modulus=np.full(n_ec, 2e11), cluster_area=np.full(n_ec, 1e-4),
        rest_length=l_c / 1.02,  # 2% bootstrap strain clears the slack basin
        damping_coeff=0.02,
        gravity=np.zeros(3),
    )
    model = Model(topology=topo, coords=config.coords, spec=spec, params=params)
    result = form_find(model)
    return model.with_coords(result.coords), result


@pytest.mark.parametrize("p,q", [(3, 1), (5, 1), (12, 1), (8, 2), (20, 2)])
def test_exactly_one_self_stress_mode(p, q):
    model, _ = saddle_equilibrium(p, q, rx=10.0, ry=8.0, a=6.0, b=5.0, c=0.35)
    abar = assembly.constrained_equilibrium_matrix(model.topology, model.coords)
    sigma = np.linalg.svd(abar, compute_uv=False)
    rank_svd = int(np.sum(sigma > 1e-10 * sigma[0]))
    assert model.topology.cluster_count - rank_svd == 1
    assert elimination_rank(abar) == rank_svd  # independent oracle


def test_prestress_design_hits_target(lab_equilibrated):
    model, result = lab_equilibrated
    sol = prestress_design(model, model.coords, ["HC"], [100.0])
    assert sol.tensions[model.topology.cluster_index("HC")] == pytest.approx(
        100.0, abs=1e-9 * 100.0)
    assert np.all(sol.tensions > 0)
    # the designed tensions are a genuine self-stress state
    abar = assembly.constrained_equilibrium_matrix(model.topology, model.coords)
    assert np.abs(abar @ sol.tensions).max() <= 1e-9 * np.abs(sol.tensions).max()
    # V2 spans the null space
    assert np.abs(abar @ sol.self_stress_modes).max() <= 1e-9


def test_prestress_design_validation(lab_equilibrated):
    model, _ = lab_equilibrated
    with pytest.raises(ValidationError):
        prestress_design(model, model.coords, ["DC", "HC"], [10.0, 20.0])
    with pytest.raises(ValidationError):
        prestress_design(model, model.coords, ["HC"], [1.0, 2.0])


def test_prestress_design_compression_infeasible(lab_equilibrated):
    model, _ = lab_equilibrated
    with pytest.raises(InfeasiblePrestressError) as err:
        prestress_design(model, model.coords, ["HC"], [-100.0])
    assert err.value.exit_code == 3


def test_prestress_design_warns_on_free_node_load(lab_equilibrated):
    model, _ = lab_equilibrated
    w_a = np.zeros(len(model.topology.free_dof))
    w_a[0] = 1.0
    with pytest.warns(UserWarning):
        prestress_design(model, model.coords, ["HC"], [100.0], w_a=w_a)


def test_no_self_stress_raises():
    """A tripod (one free node on three anchors) has no self-stress mode."""
    from cablenet.geometry import Topology

    topo = Topology(
        node_count=4,
        members=np.array([[0, 3], [1, 3], [2, 3]]),
        cluster_of=np.array([0, 1, 2]),
        cluster_names=["C0", "C1", "C2"],
        fixed_nodes=np.array([0, 1, 2]),
    )
    coords = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
                       0.2, 0.3, 0.1])
    lengths, l_c, _ = assembly.member_lengths(topo, coords)
    spec = assembly.MemberSpec(
        density=np.full(3, 1000.0), area=np.full(3, 1e-5),
        modulus=np.full(3, 1e9), cluster_area=np.full(3, 1e-5),
        rest_length=l_c / 1.01, damping_coeff=0.0, gravity=np.zeros(3),
    )
    model = Model(topology=topo, coords=coords, spec=spec)
    with pytest.raises(InfeasiblePrestressError):
        prestress_design(model, coords, ["C0"], [1.0])


# ---------------------------------------------------------------------------
# modal analysis
# ---------------------------------------------------------------------------

def test_modal_residuals_and_orthonormality(lab_equilibrated):
    model, result = lab_equilibrated
    modal = modal_analysis(model)
    topo, spec = model.topology, model.spec
    free = topo.free_dof
    _, _, _, k_t = assembly.stiffness_matrices(topo, model.coords, spec,
                                               result.tensions)
    k_taa = k_t[np.ix_(free, free)]
    lengths, _, _ = assembly.member_lengths(topo, model.coords)
    l0 = assembly.rest_length_split(topo, lengths, spec.rest_length)
    m_aa = assembly.mass_matrix(topo, spec, l0, model.point_masses)[
        np.ix_(free, free)]

    omega2 = (2 * np.pi * modal.frequencies) ** 2
    scale = np.abs(k_taa).max()
    for i in range(len(omega2)):
        res = k_taa @ modal.mode_shapes[:, i] \
            - omega2[i] * (m_aa @ modal.mode_shapes[:, i])
        assert np.abs(res).max() <= 1e-8 * scale
    gram = modal.mode_shapes.T @ m_aa @ modal.mode_shapes
    assert np.abs(gram - np.eye(len(gram))).max() <= 1e-8
    assert np.all(np.diff(modal.frequencies) >= -1e-12)
    assert np.all(modal.stiffness_eigenvalues > 0)


def test_modal_k_truncation(lab_equilibrated):
    model, _ = lab_equilibrated
    modal = modal_analysis(model, k=4)
    assert len(modal.frequencies) == 4
    assert modal.mode_shapes.shape[1] == 4


def test_unstable_structure_raises(lab_equilibrated):
    model, result = lab_equilibrated
    with pytest.raises(UnstableStructureError) as err:
        modal_analysis(model, t_c=-50.0 * np.ones_like(result.tensions))
    assert err.value.exit_code == 3


def test_initialize_prestress_equilibrium(lab_model):
    model, result = initialize_prestress(lab_model, ["HC"], [100.0])
    # the returned model is in equilibrium under its own rest lengths
    re_solved = form_find(model)
    assert re_solved.iterations == 0
    np.testing.assert_allclose(re_solved.tensions, result.tensions, rtol=1e-9)
