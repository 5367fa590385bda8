"""Material-point drivers: strain-controlled paths and the PathRecord log."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from ._yaml import load_yaml
from .constitutive import MaterialParams, MaterialState, map_to_cauchy, update, virgin_state
from .tensor2d import SymTensor2, _eig

__all__ = [
    "PathRecord",
    "PATH_COLUMNS",
    "drive_strain_path",
    "drive_uniaxial",
    "sample_path",
    "subdivide",
    "standard_cyclic_path",
    "load_path_file",
    "write_path_csv",
]


@dataclass(frozen=True)
class PathRecord:
    """One committed step of a material-point run."""

    step: int
    strain: SymTensor2
    sigma_eff: SymTensor2
    sigma: SymTensor2
    damage: float
    regime: str
    acc_p: float
    jump: float
    eps_d: SymTensor2

    def row(self) -> list:
        return [
            self.step,
            *self.strain,
            *self.sigma_eff,
            *self.sigma,
            self.damage,
            self.regime,
            self.acc_p,
            self.jump,
            *self.eps_d,
        ]


PATH_COLUMNS = [
    "step",
    "eps_xx", "eps_yy", "eps_xy",
    "seff_xx", "seff_yy", "seff_xy",
    "sig_xx", "sig_yy", "sig_xy",
    "damage", "regime", "acc_p", "jump",
    "epsd_xx", "epsd_yy", "epsd_xy",
]  # fmt: skip


def sample_path(knots: Sequence[Sequence[float]], n: int) -> list[SymTensor2]:
    """Piecewise-linear tensor path with ``n`` increments distributed by segment length."""
    pts = [np.asarray(k, dtype=float) for k in knots]
    lengths = [float(np.linalg.norm(b - a)) for a, b in zip(pts[:-1], pts[1:])]
    total = sum(lengths) or 1.0
    out = [SymTensor2(*pts[0])]
    for a, b, ln in zip(pts[:-1], pts[1:], lengths):
        m = max(1, round(n * ln / total))
        for i in range(1, m + 1):
            out.append(SymTensor2(*(a + (b - a) * (i / m))))
    return out


def subdivide(knots: Sequence[Sequence[float]], n: int) -> list[SymTensor2]:
    """Piecewise-linear tensor path with ``n`` equal increments on every segment."""
    pts = [np.asarray(k, dtype=float) for k in knots]
    out = [SymTensor2(*pts[0])]
    for a, b in zip(pts[:-1], pts[1:]):
        for i in range(1, n + 1):
            out.append(SymTensor2(*(a + (b - a) * (i / n))))
    return out


def standard_cyclic_path(params: MaterialParams) -> list[tuple[float, float, float]]:
    """Non-proportional cyclic strain path (knots, tensorial shear).

    Shear-biased loading that swings into tension past crack inception, a
    reversal into compression, a reload along another direction and a final
    compression.  Principal axes rotate while yielding, so the response
    depends on the increment size.  Amplitudes scale with the crack inception
    strain (the ``d_cr = 0.45`` value is used when ``d_cr = 1``).
    """
    ey = params.sigma_y / params.E
    cap = params.eps_p_cr if math.isfinite(params.eps_p_cr) else -math.log(0.55) / params.a
    ec = ey + cap
    return [
        (0.0, 0.0, 0.0),
        (0.4 * ec, 0.0, 0.4 * ec),
        (1.0 * ec, 0.2 * ec, 0.0),
        (1.3 * ec, 0.0, -0.2 * ec),
        (-3.0 * ey, -1.0 * ey, 0.0),
        (1.6 * ec, 0.2 * ec, -0.15 * ec),
        (-3.0 * ey, -1.0 * ey, 0.0),
    ]


def drive_strain_path(
    params: MaterialParams,
    strains: Iterable[SymTensor2],
    state: MaterialState | None = None,
) -> list[PathRecord]:
    """Apply a sequence of total strains (first entry = starting strain)."""
    strains = list(strains)
    state = state or virgin_state()
    prev = strains[0]
    d0 = 0.0
    s0 = state.sigma_eff
    records = [PathRecord(0, prev, s0, s0, d0, state.regime.name, state.acc_p, state.jump, state.eps_d)]
    for k, eps in enumerate(strains[1:], start=1):
        res = update(state, eps - prev, params)
        state = res.state
        prev = eps
        records.append(
            PathRecord(k, eps, res.sigma_eff, res.sigma, res.damage, state.regime.name,
                       state.acc_p, state.jump, state.eps_d)
        )
    return records


def drive_uniaxial(params: MaterialParams, strains: Sequence[float]) -> list[PathRecord]:
    """Axial strain history at zero lateral stress, logged as :class:`PathRecord` rows."""
    from .oracle import mixed_control_drive

    trace, states = mixed_control_drive(params, strains)
    records = []
    for k, (rec, st) in enumerate(zip(trace, states)):
        records.append(
            PathRecord(k, SymTensor2(rec.strain, rec.lateral, 0.0), st.sigma_eff,
                       map_to_cauchy(st.sigma_eff, rec.damage), rec.damage, st.regime.name,
                       st.acc_p, st.jump, st.eps_d)
        )  # fmt: skip
    return records


def principal_max(t: SymTensor2) -> float:
    return _eig(t)[0]


def load_path_file(path: str | Path) -> dict:
    """Read a material-point path document.

    Keys: ``mode`` (``strain`` for full tensor control or ``uniaxial`` for
    mixed control with zero lateral stress), ``knots`` (list of strains:
    3-tuples for ``strain`` mode, scalars for ``uniaxial``), ``steps``.
    A bare list of knots is also accepted (mode inferred).
    """
    try:
        data = load_yaml(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if isinstance(data, list):
        data = {"knots": data}
    if not isinstance(data, dict) or "knots" not in data:
        raise ValueError(f"{path}: expected a mapping with 'knots'")
    unknown = set(data) - {"mode", "knots", "steps"}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    knots = data["knots"]
    scalar = all(isinstance(k, (int, float)) for k in knots)
    mode = data.get("mode", "uniaxial" if scalar else "strain")
    if mode not in ("strain", "uniaxial"):
        raise ValueError(f"{path}: mode must be 'strain' or 'uniaxial'")
    if mode == "uniaxial" and not scalar:
        raise ValueError(f"{path}: uniaxial knots must be scalars")
    if mode == "strain":
        knots = [tuple(float(v) for v in k) for k in knots]
        if any(len(k) != 3 for k in knots):
            raise ValueError(f"{path}: strain knots need 3 components (xx, yy, xy)")
    steps = int(data.get("steps", 512))
    if steps < 1:
        raise ValueError(f"{path}: steps must be positive")
    return {"mode": mode, "knots": knots, "steps": steps}


def write_path_csv(path, records: Sequence[PathRecord], extra: dict[str, Sequence] | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PATH_COLUMNS + list(extra))
        for i, r in enumerate(records):
            row = [_fmt(v) for v in r.row()] + [_fmt(col[i]) for col in extra.values()]
            w.writerow(row)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return v
