"""Relative-displacement probes evaluated on the global displacement vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Probe", "NodePairProbe", "LineProbe", "probe_relative_displacement"]

_DOF = {"x": 0, "y": 1}


class Probe:
    name: str

    def check(self, mesh) -> None:  # pragma: no cover - interface
        raise NotImplementedError

    def value(self, u: np.ndarray) -> float:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass
class NodePairProbe(Probe):
    """Absolute relative displacement |u(A) - u(B)| of two nodes in one direction."""

    name: str
    set_a: str
    set_b: str
    dof: str = "x"

    def check(self, mesh) -> None:
        self._a = _single(mesh, self.set_a)
        self._b = _single(mesh, self.set_b)
        self._d = _DOF[self.dof]

    def value(self, u: np.ndarray) -> float:
        return abs(float(u[2 * self._a + self._d] - u[2 * self._b + self._d]))


@dataclass
class LineProbe(Probe):
    """Signed difference of set-averaged displacements, mean(B) - mean(A)."""

    name: str
    set_a: str
    set_b: str
    dof: str = "x"

    def check(self, mesh) -> None:
        self._a = mesh.node_set(self.set_a)
        self._b = mesh.node_set(self.set_b)
        self._d = _DOF[self.dof]

    def value(self, u: np.ndarray) -> float:
        ua = u[2 * self._a + self._d]
        ub = u[2 * self._b + self._d]
        return float(np.mean(ub) - np.mean(ua))


def _single(mesh, name: str) -> int:
    ids = mesh.node_set(name)
    if ids.size != 1:
        raise ValueError(f"node set {name!r} must hold exactly one node for a pair probe")
    return int(ids[0])


def probe_relative_displacement(mesh, u: np.ndarray, probe: Probe) -> float:
    """Evaluate one probe on a displacement vector."""
    probe.check(mesh)
    return probe.value(np.asarray(u, dtype=float))
