"""Rankine plastic-damage kernel with a reversible discontinuity strain.

The material point carries an effective (undamaged) stress that obeys
perfect Rankine plasticity.  Damage grows exponentially with the accumulated
plastic multiplier until it reaches the critical value ``d_cr``.  At that
moment plastic flow is switched off for good: the crack plane is fixed to the
current maximum tensile stress plane and all further strain goes into a
discontinuity strain, which can close again (unilateral contact) and reopen.

The Cauchy stress degrades only the tensile part of the effective stress,
so a closed crack recovers the full elastic stiffness in compression.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .tensor2d import ZERO, ElasticOperator, SymTensor2, _eig, outer, split_tension_compression

__all__ = [
    "Regime",
    "MaterialParams",
    "MaterialState",
    "UpdateResult",
    "ConstitutiveError",
    "InconsistentStepError",
    "StepTooLargeError",
    "yield_function",
    "return_map",
    "damage_from_state",
    "map_to_cauchy",
    "solve_alpha",
    "solve_beta",
    "update",
    "tangent_numeric",
    "stabilize_tangent",
    "virgin_state",
]

MAX_TRANSITIONS = 10
ALPHA_MAX_ITER = 100
YIELD_TOL = 1e-9  # relative to sigma_y


class ConstitutiveError(RuntimeError):
    """Base class for stress-update failures the caller should handle by cutting the step."""


class InconsistentStepError(ConstitutiveError):
    """The sub-step fraction equation has no root in the admissible interval."""


class StepTooLargeError(ConstitutiveError):
    """Too many regime transitions inside one strain increment."""


class Regime(enum.IntEnum):
    ELASTOPLASTIC = 0
    CRACK_OPEN = 1


@dataclass(frozen=True)
class MaterialParams:
    """Material constants.

    ``d_cr = 1`` disables the discontinuity strain entirely (the critical
    plastic strain becomes infinite), which recovers a conventional
    plastic-damage model.
    """

    E: float
    nu: float
    sigma_y: float
    a: float
    b: float
    d_cr: float = 1.0
    elastic: ElasticOperator = field(init=False, repr=False, compare=False)
    eps_p_cr: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        checks = [
            (self.E > 0.0, "E must be positive"),
            (0.0 <= self.nu < 0.5, "nu must lie in [0, 0.5)"),
            (self.sigma_y > 0.0, "sigma_y must be positive"),
            (self.a > 0.0, "a must be positive"),
            (self.b >= 0.0, "b must be non-negative"),
            (0.0 < self.d_cr <= 1.0, "d_cr must lie in (0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"{msg} ({self!r})")
        object.__setattr__(self, "elastic", ElasticOperator(self.E, self.nu))
        cap = math.inf if self.d_cr >= 1.0 else -math.log1p(-self.d_cr) / self.a
        object.__setattr__(self, "eps_p_cr", cap)

    def with_dcr(self, d_cr: float) -> MaterialParams:
        return MaterialParams(self.E, self.nu, self.sigma_y, self.a, self.b, d_cr)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("E", "nu", "sigma_y", "a", "b", "d_cr")}


@dataclass(frozen=True, slots=True)
class MaterialState:
    """Committed history of one material point.

    ``sigma_eff`` is carried explicitly so the effective stress stays
    continuous when the discontinuity strain is discarded at crack closure.
    """

    sigma_eff: SymTensor2 = ZERO
    eps_p: SymTensor2 = ZERO
    eps_d: SymTensor2 = ZERO
    acc_p: float = 0.0
    max_jump: float = 0.0
    normal: tuple[float, float] | None = None
    regime: Regime = Regime.ELASTOPLASTIC

    @property
    def jump(self) -> float:
        """Current normal opening n.T eps_d n (zero when no crack plane exists)."""
        if self.normal is None:
            return 0.0
        return self.eps_d.project(self.normal)

    def is_virgin(self) -> bool:
        return self.acc_p == 0.0 and self.max_jump == 0.0 and self.regime is Regime.ELASTOPLASTIC

    def is_finite(self) -> bool:
        return (
            self.sigma_eff.is_finite()
            and self.eps_p.is_finite()
            and self.eps_d.is_finite()
            and math.isfinite(self.acc_p)
            and math.isfinite(self.max_jump)
        )


def virgin_state() -> MaterialState:
    return MaterialState()


@dataclass(frozen=True)
class UpdateResult:
    state: MaterialState
    sigma: SymTensor2
    sigma_eff: SymTensor2
    damage: float
    tangent: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def yield_function(sigma_eff: SymTensor2, params: MaterialParams) -> float:
    """Rankine criterion with the implicit zero out-of-plane principal stress."""
    l1 = _eig(sigma_eff)[0]
    return max(l1, 0.0) - params.sigma_y


def _return_in_frame(l1: float, l2: float, params: MaterialParams):
    """Principal-space return. Returns (s1, s2, dg1, dg2)."""
    ep = params.elastic.plane_modulus
    nu = params.nu
    sy = params.sigma_y
    dg = (l1 - sy) / ep
    s1, s2 = sy, l2 - nu * ep * dg
    if s2 <= sy:
        return s1, s2, dg, 0.0
    # corner: both principal surfaces active, s1 = s2 = sy
    r1, r2 = l1 - sy, l2 - sy
    det = ep * (1.0 - nu * nu)
    dg1 = (r1 - nu * r2) / det
    dg2 = (r2 - nu * r1) / det
    return sy, sy, dg1, dg2


def return_map(sigma_trial: SymTensor2, params: MaterialParams):
    """Closest-point return onto the Rankine locus.

    Isotropic elasticity keeps the trial principal frame fixed, so the return
    is closed-form: a single active surface in the regular case, both
    surfaces (Koiter corner) when the regular return would leave the minor
    principal stress above the yield strength.

    Returns
    -------
    sigma : SymTensor2
        Returned effective stress.
    dgamma : float
        Total plastic multiplier (sum of active multipliers).
    flow : SymTensor2
        Unit-multiplier flow direction, ``delta eps_p = dgamma * flow``.
    """
    l1, l2, c, s = _eig(sigma_trial, params.sigma_y)
    if max(l1, 0.0) - params.sigma_y <= 0.0:
        raise ValueError("return_map called with an admissible trial stress")
    return _return_from_eig(l1, l2, c, s, params)


def _return_from_eig(l1, l2, c, s, params):
    s1, s2, dg1, dg2 = _return_in_frame(l1, l2, params)
    e1, e2 = (c, s), (-s, c)
    sigma = outer(e1) * s1 + outer(e2) * s2
    dg = dg1 + dg2
    flow = outer(e1) if dg2 == 0.0 else outer(e1) * (dg1 / dg) + outer(e2) * (dg2 / dg)
    return sigma, dg, flow


def _flow_direction(sigma_trial: SymTensor2, params: MaterialParams) -> SymTensor2:
    """Flow direction the return map would use from ``sigma_trial``.

    For an admissible trial the regular direction e1 (x) e1 is returned so the
    direction is continuous across the yield locus.
    """
    l1, l2, c, s = _eig(sigma_trial, params.sigma_y)
    if l1 <= params.sigma_y:
        return outer((c, s))
    return _return_from_eig(l1, l2, c, s, params)[2]


def damage_from_state(acc_p: float, max_jump: float, params: MaterialParams) -> float:
    """d = 1 - exp(-a acc_p) exp(-b max_jump)."""
    return -math.expm1(-params.a * acc_p - params.b * max_jump)


def map_to_cauchy(sigma_eff: SymTensor2, d: float) -> SymTensor2:
    """Degrade only the tensile spectral part of the effective stress."""
    if d == 0.0:
        return SymTensor2(sigma_eff.xx, sigma_eff.yy, sigma_eff.xy)
    tens, comp = split_tension_compression(sigma_eff)
    return tens * (1.0 - d) + comp


# ---------------------------------------------------------------------------
# Sub-step solves
# ---------------------------------------------------------------------------


def _intermediate_stress(state, deps_sig, lam, alpha, params):
    """Effective stress after a fraction alpha of the step with capped plastic flow lam."""
    s_tr = state.sigma_eff + deps_sig * alpha
    flow = _flow_direction(s_tr, params)
    return s_tr - params.elastic.apply(flow) * lam, flow


def solve_alpha(state: MaterialState, deps: SymTensor2, params: MaterialParams):
    """Locate the crack inception point inside an overshooting plastic step.

    The remaining plastic multiplier ``lam = eps_p_cr - acc_p`` is known, so
    the unknown is the step fraction ``alpha`` at which the stress, corrected
    by ``lam`` along the flow direction of the sub-step trial, lies exactly on
    the yield locus.  Solved by bracketed bisection with secant refinement.

    Returns ``(alpha, intermediate_state, sigma_int)``.
    """
    lam = params.eps_p_cr - state.acc_p
    if not lam >= 0.0:
        raise InconsistentStepError(f"accumulated plastic strain above cap (lam={lam})")
    deps_sig = params.elastic.apply(deps)
    sy = params.sigma_y
    # aim well inside the admissibility tolerance so commits never sit on its edge
    tol = 1e-3 * YIELD_TOL * sy

    def g(alpha):
        s, _ = _intermediate_stress(state, deps_sig, lam, alpha, params)
        return yield_function(s, params)

    lo, hi = 0.0, 1.0
    g_lo, g_hi = g(lo), g(hi)
    if g_hi < -tol or g_lo > tol:
        raise InconsistentStepError(f"no crack inception in step (g(0)={g_lo:g}, g(1)={g_hi:g})")
    if abs(g_lo) <= tol:
        alpha = 0.0
    elif abs(g_hi) <= tol:
        alpha = 1.0
    else:
        alpha = None
        x0, g0, x1, g1 = lo, g_lo, hi, g_hi
        for _ in range(ALPHA_MAX_ITER):
            # secant proposal, fall back to bisection when it leaves the bracket
            x = x1 - g1 * (x1 - x0) / (g1 - g0) if g1 != g0 else 0.5 * (lo + hi)
            if not lo < x < hi:
                x = 0.5 * (lo + hi)
            gx = g(x)
            if abs(gx) <= tol:
                alpha = x
                break
            if gx < 0.0:
                lo, g_lo = x, gx
            else:
                hi, g_hi = x, gx
            x0, g0, x1, g1 = x1, g1, x, gx
            if hi - lo < 1e-15:
                x = hi if abs(g_hi) < abs(g_lo) else lo
                if abs(g(x)) <= YIELD_TOL * sy:
                    alpha = x
                break
        if alpha is None:
            raise InconsistentStepError("crack inception root-find did not converge")

    sigma_int, flow = _intermediate_stress(state, deps_sig, lam, alpha, params)
    _, _, c, s = _eig(sigma_int, sy)
    inter = replace(
        state,
        sigma_eff=sigma_int,
        eps_p=state.eps_p + flow * lam,
        eps_d=ZERO,
        acc_p=params.eps_p_cr,
        normal=(c, s),
        regime=Regime.CRACK_OPEN,
    )
    return alpha, inter, sigma_int


def solve_beta(state: MaterialState, deps: SymTensor2) -> float:
    """Fraction of the increment at which the open crack faces meet."""
    n = state.normal
    jump = state.eps_d.project(n)
    rate = deps.project(n)
    if not rate < 0.0:
        raise AssertionError("closure requested for a non-closing increment")
    beta = -jump / rate
    return min(max(beta, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Regime handlers
# ---------------------------------------------------------------------------


def _elastoplastic(state: MaterialState, deps: SymTensor2, params: MaterialParams):
    sig_tr = state.sigma_eff + params.elastic.apply(deps)
    l1, l2, c, s = _eig(sig_tr, params.sigma_y)
    if l1 <= params.sigma_y:
        return replace(state, sigma_eff=sig_tr), None
    sigma, dg, flow = _return_from_eig(l1, l2, c, s, params)
    if state.acc_p + dg <= params.eps_p_cr:
        return replace(state, sigma_eff=sigma, eps_p=state.eps_p + flow * dg, acc_p=state.acc_p + dg), None
    alpha, inter, _ = solve_alpha(state, deps, params)
    rest = deps * (1.0 - alpha)
    if rest.project(inter.normal) < 0.0:
        # Yielding driven by a closing normal increment (lateral expansion):
        # open the crack along n only, by the plastic-like multiplier, so the
        # stress stays admissible and the faces do not penetrate.
        return _rank_one_opening(inter, rest, params), None
    return inter, rest


def _rank_one_opening(state: MaterialState, deps: SymTensor2, params: MaterialParams):
    n = state.normal
    sig_tr = state.sigma_eff + params.elastic.apply(deps)
    nn = outer(n)
    ep = params.elastic.plane_modulus
    # normal stress response of a unit n(x)n opening is ep along n
    mu = max(sig_tr.project(n) - params.sigma_y, 0.0) / ep
    if mu == 0.0 and yield_function(sig_tr, params) <= YIELD_TOL * params.sigma_y:
        # nothing opens: stay closed at the cap rather than open with zero jump
        return replace(state, sigma_eff=sig_tr, eps_d=ZERO, regime=Regime.ELASTOPLASTIC)
    sigma = sig_tr - params.elastic.apply(nn) * mu
    if yield_function(sigma, params) > YIELD_TOL * params.sigma_y:
        sigma, _, _ = return_map(sigma, params)
    eps_d = state.eps_d + nn * mu
    return replace(state, sigma_eff=sigma, eps_d=eps_d, max_jump=max(state.max_jump, eps_d.project(n)))


def _crack_open(state: MaterialState, deps: SymTensor2, params: MaterialParams):
    n = state.normal
    eps_d = state.eps_d + deps
    jump = eps_d.project(n)
    if jump >= 0.0:
        return replace(state, eps_d=eps_d, max_jump=max(state.max_jump, jump)), None
    beta = solve_beta(state, deps)
    closed = replace(state, eps_d=ZERO, regime=Regime.ELASTOPLASTIC)
    return closed, deps * (1.0 - beta)


def _finish(state: MaterialState, params: MaterialParams) -> UpdateResult:
    if not state.is_finite():
        raise ConstitutiveError("non-finite material state")
    d = damage_from_state(state.acc_p, state.max_jump, params)
    return UpdateResult(state, map_to_cauchy(state.sigma_eff, d), state.sigma_eff, d)


def update(
    state: MaterialState,
    deps: SymTensor2,
    params: MaterialParams,
    with_tangent: bool = False,
) -> UpdateResult:
    """Integrate one strain increment from a committed state.

    Crosses regime boundaries (crack inception, closure, reopening) inside the
    increment by sub-stepping; at most ``MAX_TRANSITIONS`` crossings are
    allowed before :class:`StepTooLargeError` is raised.
    """
    if not deps.is_finite():
        raise ConstitutiveError("non-finite strain increment")
    start = state
    remaining = deps
    for _ in range(MAX_TRANSITIONS + 1):
        if state.regime is Regime.ELASTOPLASTIC:
            state, remaining = _elastoplastic(state, remaining, params)
        else:
            state, remaining = _crack_open(state, remaining, params)
        if remaining is None:
            break
    else:
        raise StepTooLargeError(f"more than {MAX_TRANSITIONS} regime transitions in one increment")
    result = _finish(state, params)
    if with_tangent:
        result = replace(result, tangent=tangent_numeric(start, deps, params))
    return result


def fd_step(deps: SymTensor2) -> float:
    return max(1e-8, 1e-6 * deps.norm())


def tangent_numeric(state: MaterialState, deps: SymTensor2, params: MaterialParams) -> np.ndarray:
    """Central-difference tangent d(sigma)/d(deps), components (xx, yy, xy).

    Columns differentiate with respect to the tensorial shear strain; multiply
    the last column by 1/2 to act on engineering shear.
    """
    h = fd_step(deps)
    C = np.empty((3, 3))
    base = (deps.xx, deps.yy, deps.xy)
    for j in range(3):
        plus = list(base)
        minus = list(base)
        plus[j] += h
        minus[j] -= h
        sp = update(state, SymTensor2(*plus), params).sigma
        sm = update(state, SymTensor2(*minus), params).sigma
        C[0, j] = (sp.xx - sm.xx) / (2.0 * h)
        C[1, j] = (sp.yy - sm.yy) / (2.0 * h)
        C[2, j] = (sp.xy - sm.xy) / (2.0 * h)
    return C


def stabilize_tangent(C: np.ndarray, E: float, floor: float = 1e-6) -> np.ndarray:
    """Add ``floor * E`` on the diagonal of (numerically) zero rows.

    Only for the global stiffness; the stress update never sees this.
    """
    out = C.copy()
    thresh = floor * E
    for i in range(3):
        if np.max(np.abs(out[i])) < thresh:
            out[i, i] += thresh
    return out
