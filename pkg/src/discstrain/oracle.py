"""Uniaxial-stress reference solution and the matching kernel driver.

Under uniaxial stress the plane-stress Rankine return degenerates to a scalar
problem, so the whole response (yielding, damage growth, crack inception,
opening, closure, compression) has an exact piecewise-linear-in-strain form.
:func:`uniaxial_closed_form` evaluates it with scalar arithmetic only and
never touches :mod:`discstrain.constitutive`; :func:`mixed_control_drive`
runs the 2-D kernel with the lateral stress held at zero.  Comparing the two
is the main correctness check of the kernel.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy.optimize import brentq

from .constitutive import MaterialParams, MaterialState, Regime, update, virgin_state
from .tensor2d import SymTensor2

__all__ = [
    "UniaxialRecord",
    "UniaxialTrace",
    "OracleScopeError",
    "uniaxial_closed_form",
    "mixed_control_drive",
    "refine_history",
    "standard_uniaxial_cycle",
    "write_trace_csv",
]

# segment labels
ELASTIC = "elastic"
PLASTIC = "plastic-damage"
OPEN = "crack-open"
FROZEN = "frozen-unload"
CLOSED = "closed-elastic"


class OracleScopeError(ValueError):
    """History outside what the closed form covers."""


@dataclass(frozen=True)
class UniaxialRecord:
    strain: float
    stress: float
    damage: float
    regime: str
    lateral: float = 0.0  # lateral strain; filled in by the kernel driver only


class UniaxialTrace(list):
    """List of :class:`UniaxialRecord` with column accessors."""

    @property
    def strain(self) -> list[float]:
        return [r.strain for r in self]

    @property
    def stress(self) -> list[float]:
        return [r.stress for r in self]

    @property
    def damage(self) -> list[float]:
        return [r.damage for r in self]

    @property
    def regime(self) -> list[str]:
        return [r.regime for r in self]


def refine_history(knots: Sequence[float], n: int) -> list[float]:
    """Sample a piecewise-linear strain history with ``n`` increments in total.

    Increments are distributed over the segments in proportion to their
    length, at least one per segment; every knot is hit exactly.
    """
    knots = [float(k) for k in knots]
    lengths = [abs(b - a) for a, b in zip(knots[:-1], knots[1:])]
    total = sum(lengths)
    out = [knots[0]]
    for (a, b), ln in zip(zip(knots[:-1], knots[1:]), lengths):
        m = max(1, round(n * ln / total)) if total > 0 else 1
        out.extend(a + (b - a) * (i / m) for i in range(1, m))
        out.append(b)
    return out


def standard_uniaxial_cycle(params: MaterialParams) -> list[float]:
    """Load past cracking, unload into compression, reload further, compress.

    Amplitudes scale with the crack inception strain; for ``d_cr = 1`` the
    cracking strain is replaced by the one for ``d_cr = 0.45``.
    """
    eps_y = params.sigma_y / params.E
    cap = params.eps_p_cr if math.isfinite(params.eps_p_cr) else -math.log(0.55) / params.a
    eps_cr = eps_y + cap
    return [0.0, eps_cr + 0.002, -5.0 * eps_y, eps_cr + 0.004, -5.0 * eps_y]


def uniaxial_closed_form(params: MaterialParams, strains: Iterable[float]) -> UniaxialTrace:
    """Exact uniaxial-stress response along a sampled strain history.

    Scalar history variables: effective stress ``s``, accumulated plastic
    strain ``p``, discontinuity strain ``w`` and its history maximum.  Between
    consecutive samples the strain moves linearly, so each move is resolved
    exactly in at most a few closed-form pieces.
    """
    E, sy, a, b = params.E, params.sigma_y, params.a, params.b
    cap = params.eps_p_cr
    strains = list(strains)
    if not strains or strains[0] != 0.0:
        raise OracleScopeError("history must start at zero strain")

    s = p = w = w_max = 0.0
    is_open = False
    prev = 0.0
    trace = UniaxialTrace()

    def record(eps, label):
        d = 1.0 - math.exp(-a * p) * math.exp(-b * w_max)
        sig = (1.0 - d) * s if s > 0.0 else s
        trace.append(UniaxialRecord(eps, sig, d, label))

    record(0.0, ELASTIC)
    for eps in strains[1:]:
        de = eps - prev
        prev = eps
        if is_open:
            w += de
            if w >= 0.0:
                w_max = max(w_max, w)
                record(eps, OPEN if w >= w_max else FROZEN)
                continue
            # faces meet at w = 0; the rest of the move is elastic
            de, w, is_open = w, 0.0, False
        trial = s + E * de
        if trial <= sy:
            s = trial
            record(eps, CLOSED if p >= cap else ELASTIC)
            continue
        plastic = (trial - sy) / E
        s = sy
        if p + plastic <= cap:
            p += plastic
            record(eps, PLASTIC)
            continue
        w = plastic - (cap - p)
        p = cap
        is_open = True
        w_max = max(w_max, w)
        record(eps, OPEN)
    return trace


def _lateral_root(state: MaterialState, dax: float, params: MaterialParams, guess: float):
    """Lateral strain increment giving zero lateral Cauchy stress."""
    sy = params.sigma_y

    def g(x):
        return update(state, SymTensor2(dax, x, 0.0), params).sigma.yy

    g0 = g(0.0)
    if abs(g0) <= 1e-12 * sy:
        return 0.0
    gg = g(guess)
    if abs(gg) <= 1e-12 * sy:
        return guess
    scale = max(abs(dax), abs(guess), 1e-12)
    lo, glo = 0.0, g0
    step = scale if g0 > 0.0 else -scale
    hi, ghi = guess, gg
    if glo * ghi > 0.0:
        hi = step
        for _ in range(60):
            ghi = g(hi)
            if glo * ghi <= 0.0:
                break
            hi *= 2.0
        else:
            raise RuntimeError("lateral stress root not bracketed; increment too large")
    x = brentq(g, min(lo, hi), max(lo, hi), xtol=1e-300, rtol=1e-15, maxiter=200)
    if abs(g(x)) > 1e-6 * sy:
        raise RuntimeError("lateral stress root-find failed")
    return x


def mixed_control_drive(params: MaterialParams, strains: Iterable[float]) -> tuple[UniaxialTrace, list[MaterialState]]:
    """Drive the 2-D kernel along an axial strain history at zero lateral stress.

    Returns the uniaxial trace and the committed states (one per sample).
    """
    strains = list(strains)
    if not strains or strains[0] != 0.0:
        raise OracleScopeError("history must start at zero strain")
    state = virgin_state()
    trace = UniaxialTrace([UniaxialRecord(0.0, 0.0, 0.0, Regime.ELASTOPLASTIC.name)])
    states = [state]
    prev = lateral = 0.0
    for eps in strains[1:]:
        dax = eps - prev
        prev = eps
        x = _lateral_root(state, dax, params, -params.nu * dax)
        res = update(state, SymTensor2(dax, x, 0.0), params)
        lateral += x
        state = res.state
        states.append(state)
        trace.append(UniaxialRecord(eps, res.sigma.xx, res.damage, state.regime.name, lateral))
    return trace, states


def write_trace_csv(path, trace: UniaxialTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strain", "stress", "damage", "regime"])
        for r in trace:
            w.writerow([f"{r.strain:.17g}", f"{r.stress:.17g}", f"{r.damage:.17g}", r.regime])
