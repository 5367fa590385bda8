"""Shape functions, quadrature and strain-displacement operators.

``B`` maps element dofs (u1x, u1y, u2x, ...) to (exx, eyy, gamma_xy) with
engineering shear; this is the only place the factor 2 on shear appears.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GaussBlock", "build_blocks", "jacobian_dets", "element_strain"]

_G = 1.0 / np.sqrt(3.0)
QUAD_POINTS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
QUAD_WEIGHTS = np.ones(4)
TRI_POINTS = np.array([[1.0 / 3.0, 1.0 / 3.0]])
TRI_WEIGHTS = np.array([0.5])


def _quad_shape(xi, eta):
    N = 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])
    dN = 0.25 * np.array(
        [
            [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
            [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
        ]
    )
    return N, dN


def _tri_shape(xi, eta):
    N = np.array([1 - xi - eta, xi, eta])
    dN = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    return N, dN


_RULES = {
    3: (TRI_POINTS, TRI_WEIGHTS, _tri_shape),
    4: (QUAD_POINTS, QUAD_WEIGHTS, _quad_shape),
}


@dataclass
class GaussBlock:
    """All Gauss points of the elements of one kind, stacked.

    Shapes: ``conn`` (ne, k), ``B`` (ne, ng, 3, 2k), ``wdet`` (ne, ng) with
    thickness included, ``xy`` (ne, ng, 2).
    """

    elem_ids: np.ndarray
    conn: np.ndarray
    B: np.ndarray
    wdet: np.ndarray
    xy: np.ndarray

    @property
    def n_gauss(self) -> int:
        return self.B.shape[1]

    @property
    def dof_index(self) -> np.ndarray:
        """(ne, 2k) global dof numbers."""
        ne, k = self.conn.shape
        idx = np.empty((ne, 2 * k), dtype=int)
        idx[:, 0::2] = 2 * self.conn
        idx[:, 1::2] = 2 * self.conn + 1
        return idx


def _geometry(X: np.ndarray, k: int):
    """Per-element Jacobian dets, physical derivatives and GP coordinates."""
    pts, wts, shape = _RULES[k]
    ne = X.shape[0]
    ng = len(pts)
    dets = np.empty((ne, ng))
    dNdx = np.empty((ne, ng, 2, k))
    xy = np.empty((ne, ng, 2))
    for g, (xi, eta) in enumerate(pts):
        N, dN = shape(xi, eta)
        J = np.einsum("ak,ekb->eab", dN, X)  # (ne, 2, 2): dx_b/dxi_a
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        dets[:, g] = det
        safe = np.where(det == 0.0, 1.0, det)
        Jinv = np.empty_like(J)
        Jinv[:, 0, 0] = J[:, 1, 1] / safe
        Jinv[:, 1, 1] = J[:, 0, 0] / safe
        Jinv[:, 0, 1] = -J[:, 0, 1] / safe
        Jinv[:, 1, 0] = -J[:, 1, 0] / safe
        dNdx[:, g] = np.einsum("eab,bk->eak", Jinv, dN)
        xy[:, g] = np.einsum("k,ekb->eb", N, X)
    return dets, dNdx, xy, wts


def jacobian_dets(mesh) -> list[np.ndarray]:
    out = []
    for conn in mesh.elements:
        X = mesh.nodes[list(conn)][None]
        out.append(_geometry(X, len(conn))[0][0])
    return out


def build_blocks(mesh) -> list[GaussBlock]:
    """Group elements by kind and precompute B-operators (engineering shear)."""
    blocks = []
    for k in (3, 4):
        ids = np.array([e for e, c in enumerate(mesh.elements) if len(c) == k], dtype=int)
        if ids.size == 0:
            continue
        conn = np.array([mesh.elements[e] for e in ids], dtype=int)
        X = mesh.nodes[conn]
        dets, dNdx, xy, wts = _geometry(X, k)
        if np.min(dets) <= 0.0:
            bad = ids[np.argmin(np.min(dets, axis=1))]
            raise ValueError(f"element {bad}: degenerate or inverted Jacobian")
        ne, ng = dets.shape
        B = np.zeros((ne, ng, 3, 2 * k))
        B[:, :, 0, 0::2] = dNdx[:, :, 0]
        B[:, :, 1, 1::2] = dNdx[:, :, 1]
        B[:, :, 2, 0::2] = dNdx[:, :, 1]
        B[:, :, 2, 1::2] = dNdx[:, :, 0]
        blocks.append(GaussBlock(ids, conn, B, dets * wts[None, :] * mesh.thickness, xy))
    return blocks


def element_strain(mesh, element: int, u: np.ndarray) -> np.ndarray:
    """Tensorial strain (exx, eyy, exy) at each Gauss point of one element.

    ``u`` is the global displacement vector (2 dofs per node).
    """
    conn = list(mesh.elements[element])
    X = mesh.nodes[conn][None]
    dets, dNdx, _, _ = _geometry(X, len(conn))
    if np.min(dets) <= 0.0:
        raise ValueError(f"element {element}: degenerate or inverted Jacobian")
    ue = np.asarray(u, dtype=float).reshape(-1, 2)[conn]  # (k, 2)
    grad = np.einsum("gak,kb->gba", dNdx[0], ue)  # du_b/dx_a
    return np.stack([grad[:, 0, 0], grad[:, 1, 1], 0.5 * (grad[:, 0, 1] + grad[:, 1, 0])], axis=1)
