"""Assembly and displacement-controlled Newton iteration over load histories."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..constitutive import (
    ConstitutiveError,
    MaterialParams,
    MaterialState,
    stabilize_tangent,
    tangent_numeric,
    update,
    virgin_state,
)
from ..tensor2d import SymTensor2
from .elements import GaussBlock, build_blocks
from .mesh import Mesh
from .probes import Probe

__all__ = [
    "DirichletHistory",
    "ForceTrigger",
    "NodalLoad",
    "SolverConfig",
    "QuadraturePointStore",
    "TrialField",
    "StepRecord",
    "FieldSnapshot",
    "RunResult",
    "NonConvergenceError",
    "MaterialPointError",
    "assemble",
    "run_history",
]

log = logging.getLogger(__name__)

_DOF = {"x": 0, "y": 1}


class NonConvergenceError(RuntimeError):
    """Step cutting exhausted; ``partial`` holds everything converged so far."""

    def __init__(self, message: str, partial: "RunResult"):
        super().__init__(message)
        self.partial = partial


class MaterialPointError(ConstitutiveError):
    """Constitutive failure tagged with its element and Gauss point."""

    def __init__(self, element: int, gauss: int, cause: Exception):
        super().__init__(f"element {element}, gauss point {gauss}: {cause}")
        self.element = element
        self.gauss = gauss


def _check_knots(times, values, what):
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.size == 0 or t.shape != v.shape:
        raise ValueError(f"{what}: times and values must be equal-length 1-D sequences")
    if np.any(np.diff(t) <= 0.0):
        raise ValueError(f"{what}: pseudo-time knots must be strictly increasing")
    if t[0] < 0.0 or t[-1] > 1.0:
        raise ValueError(f"{what}: pseudo-time knots must lie in [0, 1]")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what}: non-finite amplitude")
    return tuple(t.tolist()), tuple(v.tolist())


@dataclass(frozen=True)
class DirichletHistory:
    """Prescribed displacement (m) of every node of a set in one direction.

    The amplitude is piecewise linear in pseudo-time and held constant
    outside the knot range.
    """

    node_set: str
    dof: str
    times: tuple[float, ...] = (0.0, 1.0)
    values: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        if self.dof not in _DOF:
            raise ValueError(f"dof must be 'x' or 'y', got {self.dof!r}")
        t, v = _check_knots(self.times, self.values, f"history on {self.node_set!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def fixed(cls, node_set: str, dof: str) -> "DirichletHistory":
        return cls(node_set, dof, (0.0,), (0.0,))

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class ForceTrigger:
    """Ends the unloading segments of a prescribed history at a force level.

    While the prescribed displacement of ``node_set``/``dof`` moves back
    towards zero, ``sign`` times the reaction of that set is watched after
    every step; once it has dropped to ``level`` (N) the displacement is held
    for the rest of the segment and the next segment starts from there.
    """

    node_set: str
    dof: str
    sign: float = 1.0
    level: float = 0.0

    def held(self, history: DirichletHistory, t: float, reaction: float) -> DirichletHistory | None:
        """``history`` with the unloading segment around ``t`` cut to a hold, if triggered."""
        times, values = history.times, history.values
        k = int(np.searchsorted(times, t, side="left"))
        if k == 0 or k >= len(times) or not abs(values[k]) < abs(values[k - 1]):
            return None
        if self.sign * reaction > self.level:
            return None
        v = history(t)
        if t >= times[k]:
            return None
        return replace(
            history,
            times=times[:k] + (t,) + times[k:],
            values=values[:k] + (v, v) + values[k + 1 :],
        )


@dataclass(frozen=True)
class NodalLoad:
    """Total force (N) in one direction shared equally by the nodes of a set."""

    node_set: str
    dof: str
    times: tuple[float, ...] = (0.0, 1.0)
    values: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        if self.dof not in _DOF:
            raise ValueError(f"dof must be 'x' or 'y', got {self.dof!r}")
        t, v = _check_knots(self.times, self.values, f"load on {self.node_set!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class SolverConfig:
    """Newton and step-control settings.

    ``force_floor`` (N) keeps the relative residual test meaningful when the
    structure is unloaded; ``None`` derives it from E, thickness and mesh size.
    """

    steps: int = 100
    tol: float = 1e-6
    max_iter: int = 25
    cut_factor: float = 0.5
    max_cuts: int = 8
    stabilization: float = 1e-6
    force_floor: float | None = None
    dump_steps: tuple[int, ...] = ()
    keep_fields: bool = False
    extrapolate: bool = True
    line_search: int = 4
    max_stabilization: float = 1e-2
    tol_stagnation: float = 1e-3
    max_stalls: int = 8
    damping: float = 1e-2
    damping_after: int = 2

    def __post_init__(self):
        if self.steps < 1 or self.max_iter < 1 or self.max_cuts < 0:
            raise ValueError("steps, max_iter must be positive and max_cuts non-negative")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if not self.tol <= self.tol_stagnation < 1.0:
            raise ValueError("tol_stagnation must lie in [tol, 1)")
        if not 0.0 < self.cut_factor < 1.0:
            raise ValueError("cut_factor must lie in (0, 1)")
        if self.max_stabilization < self.stabilization:
            raise ValueError("max_stabilization must be >= stabilization")
        if self.line_search < 0:
            raise ValueError("line_search must be non-negative")
        if self.damping < 0.0 or self.damping_after < 0:
            raise ValueError("damping and damping_after must be non-negative")
        if self.stabilization <= 0.0:
            raise ValueError("stabilization must be positive")


# ---------------------------------------------------------------------------
# Quadrature point storage
# ---------------------------------------------------------------------------


@dataclass
class TrialField:
    """Uncommitted Gauss-point results for one displacement increment."""

    states: list[MaterialState | None]
    sigma: np.ndarray
    sigma_eff: np.ndarray
    damage: np.ndarray
    tangent: np.ndarray
    fast: np.ndarray
    n_nonlinear: int


class QuadraturePointStore:
    """Committed material states at every Gauss point.

    Gauss points are numbered block by block (element kind), element by
    element, point by point.  Only :meth:`commit` mutates the store.
    """

    def __init__(self, blocks: Sequence[GaussBlock]):
        self.offsets = []
        n = 0
        elem, gauss, xy = [], [], []
        for b in blocks:
            ne, ng = b.wdet.shape
            self.offsets.append(n)
            n += ne * ng
            elem.append(np.repeat(b.elem_ids, ng))
            gauss.append(np.tile(np.arange(ng), ne))
            xy.append(b.xy.reshape(-1, 2))
        self.size = n
        self.element = np.concatenate(elem)
        self.gauss = np.concatenate(gauss)
        self.xy = np.concatenate(xy)
        self.states: list[MaterialState] = [virgin_state()] * n
        self.sigma = np.zeros((n, 3))
        self.sigma_eff = np.zeros((n, 3))
        self.damage = np.zeros(n)
        self.regime = np.zeros(n, dtype=np.int8)
        self.virgin = np.ones(n, dtype=bool)

    def commit(self, trial: TrialField) -> None:
        for i, st in enumerate(trial.states):
            if st is None:
                st = MaterialState(sigma_eff=SymTensor2(*trial.sigma_eff[i]))
            self.states[i] = st
        self.sigma = trial.sigma.copy()
        self.sigma_eff = trial.sigma_eff.copy()
        self.damage = trial.damage.copy()
        self.regime = np.array([int(s.regime) for s in self.states], dtype=np.int8)
        self.virgin = np.array([s.is_virgin() for s in self.states], dtype=bool)


def _max_principal(s: np.ndarray) -> np.ndarray:
    c = 0.5 * (s[:, 0] + s[:, 1])
    r = np.hypot(0.5 * (s[:, 0] - s[:, 1]), s[:, 2])
    return c + r


def _gauss_strains(blocks, du: np.ndarray) -> np.ndarray:
    """Tensorial strain increments (G, 3) at all Gauss points."""
    out = []
    for b in blocks:
        ue = du[b.dof_index]  # (ne, 2k)
        eng = np.einsum("egij,ej->egi", b.B, ue)
        eng[..., 2] *= 0.5
        out.append(eng.reshape(-1, 3))
    return np.concatenate(out)


def evaluate_trial(
    store: QuadraturePointStore,
    deps: np.ndarray,
    params: MaterialParams,
    stabilization: float = 1e-6,
    with_tangent: bool = True,
) -> TrialField:
    """Integrate all Gauss points from their committed states.

    Virgin points whose elastic trial stays below the yield strength take the
    vectorized elastic path with tangent D; every other point goes through
    the kernel and, if ``with_tangent``, the finite-difference tangent
    (otherwise the tangent field is left at D).
    """
    D = params.elastic.matrix()
    trial_eff = store.sigma_eff + deps @ D.T
    fast = store.virgin & (_max_principal(trial_eff) <= params.sigma_y)
    n = store.size
    sigma = trial_eff.copy()
    sigma_eff = trial_eff.copy()
    damage = np.zeros(n)
    tangent = np.broadcast_to(D, (n, 3, 3)).copy()
    states: list[MaterialState | None] = [None] * n
    slow = np.flatnonzero(~fast)
    for i in slow:
        st = store.states[i]
        de = SymTensor2(*deps[i])
        try:
            res = update(st, de, params)
            C = tangent_numeric(st, de, params) if with_tangent else None
        except ConstitutiveError as exc:
            raise MaterialPointError(int(store.element[i]), int(store.gauss[i]), exc) from exc
        states[i] = res.state
        sigma[i] = (res.sigma.xx, res.sigma.yy, res.sigma.xy)
        sigma_eff[i] = (res.sigma_eff.xx, res.sigma_eff.yy, res.sigma_eff.xy)
        damage[i] = res.damage
        if C is not None:
            tangent[i] = stabilize_tangent(C, params.E, stabilization)
    return TrialField(states, sigma, sigma_eff, damage, tangent, fast, len(slow))


def assemble(
    mesh: Mesh,
    store: QuadraturePointStore,
    du: np.ndarray,
    params: MaterialParams,
    blocks: Sequence[GaussBlock] | None = None,
    stabilization: float = 1e-6,
    with_tangent: bool = True,
) -> tuple[np.ndarray, sp.csr_matrix | None, TrialField]:
    """Internal force vector and tangent stiffness for a trial increment.

    ``du`` is the displacement increment since the last commit.  Returns
    ``(f_int, K, trial)``; the trial field is what :meth:`commit` expects.
    ``K`` is ``None`` when ``with_tangent`` is false.
    """
    blocks = blocks if blocks is not None else build_blocks(mesh)
    du = np.asarray(du, dtype=float)
    if du.shape != (mesh.n_dofs,):
        raise ValueError(f"increment has {du.size} entries, mesh has {mesh.n_dofs} dofs")
    trial = evaluate_trial(store, _gauss_strains(blocks, du), params, stabilization, with_tangent)
    f = np.zeros(mesh.n_dofs)
    rows, cols, vals = [], [], []
    eng = np.array([1.0, 1.0, 0.5])
    for b, off in zip(blocks, store.offsets):
        ne, ng = b.wdet.shape
        sl = slice(off, off + ne * ng)
        sig = trial.sigma[sl].reshape(ne, ng, 3)
        C = trial.tangent[sl].reshape(ne, ng, 3, 3) * eng  # engineering-shear columns
        fe = np.einsum("egia,egi,eg->ea", b.B, sig, b.wdet)
        idx = b.dof_index
        np.add.at(f, idx, fe)
        if not with_tangent:
            continue
        Ke = np.einsum("egia,egij,egjb,eg->eab", b.B, C, b.B, b.wdet)
        k = idx.shape[1]
        rows.append(np.repeat(idx, k, axis=1).ravel())
        cols.append(np.tile(idx, (1, k)).ravel())
        vals.append(Ke.ravel())
    if not with_tangent:
        return f, None, trial
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_dofs, mesh.n_dofs),
    ).tocsr()
    return f, K, trial


# ---------------------------------------------------------------------------
# Run outputs
# ---------------------------------------------------------------------------


@dataclass
class StepRecord:
    """Summary of one converged load step.

    ``residual`` is the worst relative residual accepted inside the step and
    ``balance`` the relative out-of-balance of reactions plus applied loads.
    ``loose`` counts sub-increments accepted on stagnation, ``damped`` those
    solved with artificial damping, and ``damping`` is the largest damping
    force relative to the reference force.
    """

    step: int
    time: float
    probes: dict[str, float]
    reactions: dict[str, tuple[float, float]]
    iterations: int
    cuts: int
    residual: float
    balance: float
    loose: int = 0
    damped: int = 0
    damping: float = 0.0


@dataclass
class FieldSnapshot:
    """Gauss-point fields after a committed step.

    ``jump`` and ``max_jump`` are the current and largest crack openings
    (normal discontinuity strain) of every Gauss point.
    """

    step: int
    time: float
    element: np.ndarray
    gauss: np.ndarray
    xy: np.ndarray
    sigma: np.ndarray
    sigma_eff: np.ndarray
    damage: np.ndarray
    regime: np.ndarray
    u: np.ndarray
    jump: np.ndarray | None = None
    max_jump: np.ndarray | None = None

    @property
    def principal(self) -> np.ndarray:
        """(G, 2) major and minor principal Cauchy stresses."""
        s = self.sigma
        c = 0.5 * (s[:, 0] + s[:, 1])
        r = np.hypot(0.5 * (s[:, 0] - s[:, 1]), s[:, 2])
        return np.stack([c + r, c - r], axis=1)


@dataclass
class RunResult:
    mesh: Mesh
    steps: list[StepRecord] = field(default_factory=list)
    snapshots: dict[int, FieldSnapshot] = field(default_factory=dict)
    u: np.ndarray | None = None
    store: QuadraturePointStore | None = None
    total_cuts: int = 0
    total_iterations: int = 0
    total_loose: int = 0
    total_damped: int = 0
    histories: list[DirichletHistory] = field(default_factory=list)
    triggered: list[tuple[int, float]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        """Probe value per step, or a reaction component as ``set.x``/``set.y``."""
        if "." in name and name.rsplit(".", 1)[1] in _DOF:
            key, comp = name.rsplit(".", 1)
            return np.array([s.reactions[key][_DOF[comp]] for s in self.steps])
        return np.array([s.probes[name] for s in self.steps])

    @property
    def time(self) -> np.ndarray:
        return np.array([s.time for s in self.steps])


# ---------------------------------------------------------------------------
# Newton driver
# ---------------------------------------------------------------------------


class _Converged(NamedTuple):
    u: np.ndarray
    f: np.ndarray
    trial: TrialField
    iterations: int
    residual: float
    scale: float
    loose: bool
    damping: float


class _Constraints:
    def __init__(self, mesh: Mesh, histories: Sequence[DirichletHistory]):
        owner: dict[int, DirichletHistory] = {}
        for h in histories:
            for n in mesh.node_set(h.node_set):
                dof = 2 * int(n) + _DOF[h.dof]
                if dof in owner and owner[dof] != h:
                    prev = owner[dof]
                    if prev.times != h.times or prev.values != h.values:
                        raise ValueError(f"dof {dof} prescribed by conflicting histories")
                owner[dof] = h
        if not owner:
            raise ValueError("no prescribed displacements")
        self.dofs = np.array(sorted(owner), dtype=int)
        self._hist = [owner[d] for d in self.dofs]
        self.histories = list(histories)
        self.free = np.setdiff1d(np.arange(mesh.n_dofs), self.dofs)
        self.sets = sorted({h.node_set for h in histories})

    def values(self, t: float) -> np.ndarray:
        return np.array([h(t) for h in self._hist])

    def find(self, node_set: str, dof: str) -> DirichletHistory | None:
        return next((h for h in self.histories if h.node_set == node_set and h.dof == dof), None)

    def swap(self, old: DirichletHistory, new: DirichletHistory) -> None:
        self._hist = [new if h is old else h for h in self._hist]
        self.histories = [new if h is old else h for h in self.histories]


def _external(mesh: Mesh, loads: Sequence[NodalLoad], t: float) -> np.ndarray:
    f = np.zeros(mesh.n_dofs)
    for ld in loads:
        nodes = mesh.node_set(ld.node_set)
        f[2 * nodes + _DOF[ld.dof]] += ld(t) / len(nodes)
    return f


def run_history(
    mesh: Mesh,
    histories: Sequence[DirichletHistory],
    params: MaterialParams,
    config: SolverConfig = SolverConfig(),
    probes: Sequence[Probe] = (),
    loads: Sequence[NodalLoad] = (),
    on_step: Callable[[StepRecord], None] | None = None,
    triggers: Sequence[ForceTrigger] = (),
) -> RunResult:
    """Drive the mesh through pseudo-time [0, 1] in ``config.steps`` steps.

    Each step applies the prescribed displacements, iterates Newton on the
    free dofs until the residual is below ``tol`` times the reference force
    (largest of the first-iteration internal force, the current reactions and
    the floor), then commits all Gauss points at once.  A failed step is
    retried with the increment scaled by ``cut_factor``, down to
    ``max_cuts`` levels; afterwards :class:`NonConvergenceError` is raised
    carrying every step converged so far.  ``triggers`` may shorten
    unloading segments of the histories at run time; the histories actually
    followed end up in ``RunResult.histories``.
    """
    mesh.validate()
    blocks = build_blocks(mesh)
    store = QuadraturePointStore(blocks)
    cons = _Constraints(mesh, histories)
    for pr in probes:
        pr.check(mesh)
    for trig in triggers:
        if cons.find(trig.node_set, trig.dof) is None:
            raise ValueError(f"trigger on {trig.node_set}.{trig.dof} has no prescribed history")
    if config.force_floor is None:
        span = float(np.ptp(mesh.nodes, axis=0).max())
        floor = 1e-12 * params.E * mesh.thickness * span
    else:
        floor = config.force_floor

    result = RunResult(mesh=mesh, store=store)
    u = np.zeros(mesh.n_dofs)
    u[cons.dofs] = cons.values(0.0)
    fr, p = cons.free, cons.dofs
    last_du = np.zeros(mesh.n_dofs)
    last_dt = 0.0

    K_el = assemble(mesh, QuadraturePointStore(blocks), np.zeros(mesh.n_dofs), params, blocks)[1][fr][:, fr]

    def newton(t: float, u0: np.ndarray, guess: np.ndarray | None, eta: float = 0.0):
        u1 = u0.copy()
        if guess is not None:
            u1[fr] += guess[fr]
        u1[p] = cons.values(t)
        fext = _external(mesh, loads, t)

        stab = [config.stabilization]

        def evaluate(u_try):
            f, K, trial = assemble(mesh, store, u_try - u0, params, blocks, stab[0])
            damp = eta * (K_el @ (u_try - u0)[fr]) if eta else 0.0
            r = fext[fr] - f[fr] - damp
            return f, K, trial, r, float(np.linalg.norm(r)), damp

        def done(u_c, f, trial, it, res, scale, loose, damp):
            return _Converged(u_c, f, trial, it, res, scale, loose, float(np.linalg.norm(damp)) / scale)

        f, K, trial, r, rn, damp = evaluate(u1)
        ref = max(float(np.linalg.norm(f)), float(np.linalg.norm(fext)), floor)
        stalls = 0
        best_seen = None
        for it in range(config.max_iter + 1):
            scale = max(ref, float(np.linalg.norm(f[p] - fext[p])))
            if not math.isfinite(rn) or rn > 1e8 * scale:
                return None
            if rn <= config.tol * scale:
                return done(u1, f, trial, it, rn / scale, scale, False, damp)
            if best_seen is None or rn / scale < best_seen[0]:
                best_seen = (rn / scale, u1.copy(), f, trial, scale, damp)
            if it == config.max_iter or stalls > config.max_stalls:
                # stalled on a kink of the Gauss-point response
                if best_seen[0] <= config.tol_stagnation:
                    res, ub, fb, tb, sb, db = best_seen
                    return done(ub, fb, tb, it, res, sb, True, db)
                log.debug("t=%.6g: stalled at relative residual %.3g", t, best_seen[0])
                return None
            Kit = K[fr][:, fr]
            if eta:
                Kit = Kit + eta * K_el
            du = spla.spsolve(Kit.tocsc(), r)
            if not np.all(np.isfinite(du)):
                return None
            # backtracking on the residual norm; keeps the best trial
            best = None
            step = 1.0
            decreased = False
            for _ in range(config.line_search + 1):
                u_try = u1.copy()
                u_try[fr] += step * du
                cand = evaluate(u_try)
                if best is None or cand[4] < best[1][4]:
                    best = (u_try, cand)
                if cand[4] <= (1.0 - 1e-4 * step) * rn:
                    decreased = True
                    break
                step *= 0.5
            if not decreased:
                stalls += 1
            if not decreased and stab[0] < config.max_stabilization:
                # stalled: stiffen the zero rows of the iteration matrix only;
                # the residual still uses the true stress
                stab[0] = min(stab[0] * 100.0, config.max_stabilization)
                f, K, trial, r, rn, damp = evaluate(u1)
                continue
            u1, (f, K, trial, r, rn, damp) = best
        return None

    times = np.linspace(0.0, 1.0, config.steps + 1)
    for k in range(1, config.steps + 1):
        t_cur, t_end = float(times[k - 1]), float(times[k])
        dt0 = t_end - t_cur
        dt = dt0
        depth = cuts = iters = n_loose = n_damped = 0
        worst = damping = eta = 0.0
        while t_cur < t_end:
            t_try = t_end if t_cur + dt >= t_end * (1 - 1e-14) else t_cur + dt
            guess = None
            if config.extrapolate and last_dt > 0.0 and depth == 0:
                guess = last_du * ((t_try - t_cur) / last_dt)
            try:
                out = newton(t_try, u, guess, eta)
            except ConstitutiveError as exc:
                log.debug("step %d at t=%.6g: %s", k, t_try, exc)
                out = None
            if out is None:
                cuts += 1
                depth += 1
                if not eta and config.damping > 0.0 and depth >= config.damping_after:
                    # cutting does not pass a local limit point (a node whose
                    # softening neighbours leave it without stiffness); finish
                    # the step with artificial damping instead
                    eta = config.damping
                    log.debug("step %d: damping switched on at t=%.6g", k, t_try)
                    continue
                if depth > config.max_cuts:
                    result.u = u.copy()
                    raise NonConvergenceError(
                        f"step {k} (t={t_try:.6g}) failed after {config.max_cuts} cuts", result
                    )
                dt *= config.cut_factor
                continue
            u_new, f, trial, it, res, scale, loose = out[:7]
            n_loose += int(loose)
            n_damped += int(eta > 0.0)
            worst = max(worst, res)
            damping = max(damping, out.damping)
            store.commit(trial)
            last_du = u_new - u
            last_dt = t_try - t_cur
            u = u_new
            iters += it
            t_cur = t_try
            if depth > 0 and dt < dt0:
                dt = min(dt / config.cut_factor, dt0)
                depth -= 1
        reactions = {}
        for name in cons.sets:
            nodes = mesh.node_set(name)
            reactions[name] = (float(f[2 * nodes].sum()), float(f[2 * nodes + 1].sum()))
        fext = _external(mesh, loads, t_end)
        # reactions on constrained dofs plus all applied loads must cancel
        net = np.zeros(mesh.n_dofs)
        net[p] = f[p] - fext[p]
        net += fext
        balance = float(np.max(np.abs(net.reshape(-1, 2).sum(axis=0)))) / scale
        rec = StepRecord(
            step=k,
            time=t_end,
            probes={pr.name: pr.value(u) for pr in probes},
            reactions=reactions,
            iterations=iters,
            cuts=cuts,
            residual=worst,
            balance=balance,
            loose=n_loose,
            damped=n_damped,
            damping=damping,
        )
        result.steps.append(rec)
        result.total_cuts += cuts
        result.total_iterations += iters
        result.total_loose += n_loose
        result.total_damped += n_damped
        if config.keep_fields or k in config.dump_steps:
            result.snapshots[k] = FieldSnapshot(
                k, t_end, store.element, store.gauss, store.xy,
                store.sigma.copy(), store.sigma_eff.copy(), store.damage.copy(), store.regime.copy(), u.copy(),
                np.array([s.jump for s in store.states]), np.array([s.max_jump for s in store.states]),
            )  # fmt: skip
        for trig in triggers:
            hist = cons.find(trig.node_set, trig.dof)
            new = trig.held(hist, t_end, reactions[trig.node_set][_DOF[trig.dof]])
            if new is not None:
                cons.swap(hist, new)
                result.triggered.append((k, t_end))
                last_dt = 0.0  # do not extrapolate the unloading into the hold
        result.histories = list(cons.histories)
        if on_step is not None:
            on_step(rec)
    result.u = u
    result.histories = list(cons.histories)
    return result
