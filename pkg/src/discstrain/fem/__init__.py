"""Plane-stress finite elements driven by the damage-plasticity kernel."""
from .elements import GaussBlock, build_blocks, element_strain
from .mesh import Mesh, MeshError, load_mesh, save_mesh, structured_quads
from .probes import LineProbe, NodePairProbe, Probe, probe_relative_displacement
from .solver import (
    DirichletHistory,
    FieldSnapshot,
    ForceTrigger,
    MaterialPointError,
    NodalLoad,
    NonConvergenceError,
    QuadraturePointStore,
    RunResult,
    SolverConfig,
    StepRecord,
    assemble,
    run_history,
)

__all__ = [
    "GaussBlock", "build_blocks", "element_strain",
    "Mesh", "MeshError", "load_mesh", "save_mesh", "structured_quads",
    "Probe", "NodePairProbe", "LineProbe", "probe_relative_displacement",
    "DirichletHistory", "ForceTrigger", "NodalLoad", "SolverConfig", "QuadraturePointStore",
    "RunResult", "StepRecord", "FieldSnapshot", "NonConvergenceError",
    "MaterialPointError", "assemble", "run_history",
]  # fmt: skip
