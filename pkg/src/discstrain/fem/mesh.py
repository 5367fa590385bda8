"""Unstructured 2-D meshes of TRI3/QUAD4 elements with named node sets."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .._yaml import load_yaml

__all__ = ["Mesh", "MeshError", "load_mesh", "save_mesh", "structured_quads"]

KINDS = {3: "TRI3", 4: "QUAD4"}


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


@dataclass
class Mesh:
    """Nodes (m), connectivity, node sets and out-of-plane thickness (m).

    Element kind follows from the connectivity length (3 -> TRI3,
    4 -> QUAD4); nodes are listed counter-clockwise.
    """

    nodes: np.ndarray
    elements: list[tuple[int, ...]]
    sets: dict[str, list[int]] = field(default_factory=dict)
    thickness: float = 1.0

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.elements = [tuple(int(i) for i in e) for e in self.elements]
        self.sets = {str(k): [int(i) for i in v] for k, v in self.sets.items()}
        self.thickness = float(self.thickness)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    def kind(self, e: int) -> str:
        return KINDS[len(self.elements[e])]

    def node_set(self, name: str) -> np.ndarray:
        try:
            return np.asarray(self.sets[name], dtype=int)
        except KeyError:
            raise MeshError(f"unknown node set {name!r}") from None

    def validate(self) -> "Mesh":
        """Check indices, sets, thickness and element Jacobians; return self."""
        from .elements import jacobian_dets

        n = self.n_nodes
        if not np.all(np.isfinite(self.nodes)):
            raise MeshError("non-finite nodal coordinates")
        if not self.thickness > 0:
            raise MeshError("thickness must be positive")
        if not self.elements:
            raise MeshError("mesh has no elements")
        for e, conn in enumerate(self.elements):
            if len(conn) not in KINDS:
                raise MeshError(f"element {e}: {len(conn)} nodes; only TRI3 and QUAD4 are supported")
            if min(conn) < 0 or max(conn) >= n:
                raise MeshError(f"element {e}: node index out of range")
            if len(set(conn)) != len(conn):
                raise MeshError(f"element {e}: repeated node")
        for name, ids in self.sets.items():
            if not ids:
                raise MeshError(f"node set {name!r} is empty")
            if min(ids) < 0 or max(ids) >= n:
                raise MeshError(f"node set {name!r} references missing nodes")
        for e, dets in enumerate(jacobian_dets(self)):
            if np.min(dets) <= 0.0:
                raise MeshError(f"element {e}: non-positive Jacobian")
        return self

    def translated(self, dx: float, dy: float) -> "Mesh":
        return Mesh(self.nodes + [dx, dy], list(self.elements), dict(self.sets), self.thickness)

    def checksum(self) -> str:
        """SHA-256 over coordinates, connectivity, sets and thickness."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.nodes, dtype="<f8").tobytes())
        for conn in self.elements:
            h.update(np.asarray(conn, dtype="<i8").tobytes())
            h.update(b";")
        for name in sorted(self.sets):
            h.update(name.encode())
            h.update(np.asarray(self.sets[name], dtype="<i8").tobytes())
        h.update(repr(self.thickness).encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "thickness": self.thickness,
            "nodes": self.nodes.tolist(),
            "elements": [list(c) for c in self.elements],
            "sets": {k: list(v) for k, v in self.sets.items()},
        }


def load_mesh(path: str | Path) -> Mesh:
    """Read a mesh document (YAML or JSON) with keys nodes, elements, sets, thickness."""
    path = Path(path)
    text = path.read_text()
    data = json.loads(text) if path.suffix == ".json" else load_yaml(text)
    if not isinstance(data, dict):
        raise MeshError(f"{path}: expected a mapping")
    unknown = set(data) - {"nodes", "elements", "sets", "thickness"}
    if unknown:
        raise MeshError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        mesh = Mesh(data["nodes"], data["elements"], data.get("sets", {}), data.get("thickness", 1.0))
    except KeyError as exc:
        raise MeshError(f"{path}: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise MeshError(f"{path}: {exc}") from None
    return mesh.validate()


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(mesh.to_dict()))
    else:
        path.write_text(yaml.safe_dump(mesh.to_dict(), default_flow_style=None, sort_keys=False))


def structured_quads(xs, ys, thickness: float = 1.0) -> Mesh:
    """Tensor-product QUAD4 grid on coordinate lines ``xs`` x ``ys``.

    Node ``i + j * len(xs)`` sits at ``(xs[i], ys[j])``.  Sets ``left``,
    ``right``, ``bottom`` and ``top`` hold the boundary lines.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    elems = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = i + j * nx
            elems.append((a, a + 1, a + 1 + nx, a + nx))
    sets = {
        "left": [j * nx for j in range(ny)],
        "right": [nx - 1 + j * nx for j in range(ny)],
        "bottom": list(range(nx)),
        "top": list(range((ny - 1) * nx, ny * nx)),
    }
    return Mesh(nodes, elems, sets, thickness)
