"""Clustered-cable saddle net toolkit: statics, dynamics, deployment control."""

from .assembly import AssembledSystem, MemberSpec, assemble
from .dynamics import ActuationSchedule, DynamicState, TimeHistory, integrate
from .deployment import (
    DeploymentHistory,
    DeploymentPlan,
    ErrorModel,
    closed_loop_deploy,
    design_trajectory,
    open_loop_deploy,
    redesign_plan_prestress,
    rest_length_for,
)
from .fixtures import initialize_prestress, saddle_lab, saddle_paper
from .geometry import CableNetParams, Configuration, Topology, build_topology
from .io import load_model, save_model
from .model import Model, SolverOptions
from .statics import (
    FormFindResult,
    ModalResult,
    PrestressSolution,
    form_find,
    modal_analysis,
    prestress_design,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem", "MemberSpec", "assemble",
    "ActuationSchedule", "DynamicState", "TimeHistory", "integrate",
    "DeploymentHistory", "DeploymentPlan", "ErrorModel",
    "closed_loop_deploy", "design_trajectory", "open_loop_deploy",
    "redesign_plan_prestress", "rest_length_for",
    "initialize_prestress", "saddle_lab", "saddle_paper",
    "CableNetParams", "Configuration", "Topology", "build_topology",
    "load_model", "save_model",
    "Model", "SolverOptions",
    "FormFindResult", "ModalResult", "PrestressSolution",
    "form_find", "modal_analysis", "prestress_design",
]
