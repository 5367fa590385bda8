"""Benchmark generators, load protocols and the scenario document schema.

Three specimens are built in, all with the notch modeled as a traction-free
gap one element wide:

``opening_mode``
    simply supported notched beam, notch at mid-span, load at mid-span
``mixed_mode``
    the same beam with the notch offset from the load line
``full_cycle``
    double-edge-notched bar pulled and pushed by its end faces

Lengths are in metres inside the code; the documented dimensions are in
millimetres and converted once in :data:`GEOMETRY`.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from ._yaml import load_yaml
from .constitutive import MaterialParams
from .fem.mesh import Mesh, load_mesh
from .fem.probes import LineProbe, NodePairProbe, Probe
from .fem.solver import DirichletHistory, ForceTrigger, SolverConfig

__all__ = [
    "GEOMETRY",
    "TABLE_PARAMS",
    "Benchmark",
    "Scenario",
    "ScenarioError",
    "gen_opening_mode",
    "gen_mixed_mode",
    "gen_full_cycle",
    "load_protocol",
    "load_scenario",
    "builtin_scenario",
    "BUILTIN",
]

MM = 1e-3

GEOMETRY = {
    "beam": {
        "span": 304.8 * MM,
        "height": 76.2 * MM,
        "overhang": 25.4 * MM,
        "thickness": 28.6 * MM,
        "notch_depth": 76.2 * MM / 3.0,
        "notch_offset": 75.6 * MM,  # mixed mode only
    },
    "bar": {
        "length": 250.0 * MM,
        "width": 60.0 * MM,
        "thickness": 50.0 * MM,
        "notch_depth": 5.0 * MM,  # assumed, not given for the specimen
        "probe_offset": 17.5 * MM,
    },
}

TABLE_PARAMS = {
    "opening_mode": dict(E=28e9, nu=0.2, sigma_y=3.8e6, a=80.0, b=70.0),
    "mixed_mode": dict(E=34e9, nu=0.2, sigma_y=4.2e6, a=110.0, b=70.0),
    "full_cycle": dict(E=25e9, nu=0.2, sigma_y=3.2e6, a=150.0, b=140.0),
}

SWEEPS = {
    "opening_mode": (1.0, 0.85, 0.60, 0.45),
    "mixed_mode": (1.0, 0.85, 0.60, 0.45),
    "full_cycle": (1.0, 0.60, 0.40, 0.20),
}


class ScenarioError(ValueError):
    """Malformed scenario document or override."""


# ---------------------------------------------------------------------------
# Mesh construction
# ---------------------------------------------------------------------------


def _graded(length: float, h0: float, hmax: float, ratio: float = 1.3) -> np.ndarray:
    """Spacings from h0 growing geometrically to hmax, scaled to sum to ``length``."""
    if length <= 0.0:
        return np.zeros(0)
    hs = []
    h = h0
    total = 0.0
    while total + h < length * (1 - 1e-9):
        hs.append(h)
        total += h
        h = min(h * ratio, hmax)
    rest = length - total
    if hs and rest < 0.5 * hs[-1]:
        hs[-1] += rest
    else:
        hs.append(rest)
    hs = np.array(hs)
    return hs * (length / hs.sum())


def _line(points: Sequence[float], fine: tuple[float, float], h0: float, hmax: float) -> np.ndarray:
    """Coordinate line through all ``points`` with spacing about h0 inside ``fine``.

    ``points`` must be sorted and include the ends; the fine window is
    meshed uniformly (adjusted so every interior point lands on a line),
    spacing grows away from it.
    """
    lo, hi = fine
    knots = sorted(set([*points, lo, hi]))
    coords = [knots[0]]
    for a, b in zip(knots[:-1], knots[1:]):
        if a >= lo - 1e-12 and b <= hi + 1e-12:
            n = max(1, round((b - a) / h0))
            seg = a + (b - a) * np.arange(1, n + 1) / n
        elif b <= lo + 1e-12:
            # grow leftwards from the fine window
            hs = _graded(b - a, h0, hmax)[::-1]
            seg = a + np.cumsum(hs)
        else:
            hs = _graded(b - a, h0, hmax)
            seg = a + np.cumsum(hs)
        seg[-1] = b
        coords.extend(seg.tolist())
    return np.array(coords)


class _Grid:
    """Structured QUAD4 grid with rectangular notches cut out.

    ``notches`` are ``(x_lo, x_hi, y_lo, y_hi)`` boxes; elements whose
    centroid falls inside one are removed together with orphaned nodes.
    A notch of finite width lets the crack band grow as one column straight
    from the notch root; a zero-width slit would make the band drag the
    elements along the notch faces and lose stability there.
    """

    def __init__(self, xs, ys, thickness, notches=()):
        self.xs, self.ys = np.asarray(xs), np.asarray(ys)
        nx, ny = len(xs), len(ys)
        elems = []
        for j in range(ny - 1):
            yc = 0.5 * (ys[j] + ys[j + 1])
            for i in range(nx - 1):
                xc = 0.5 * (xs[i] + xs[i + 1])
                if any(x0 < xc < x1 and y0 < yc < y1 for x0, x1, y0, y1 in notches):
                    continue
                elems.append((i + j * nx, i + 1 + j * nx, i + 1 + (j + 1) * nx, i + (j + 1) * nx))
        used = np.unique(np.array(elems).ravel())
        self._id = np.full(nx * ny, -1)
        self._id[used] = np.arange(used.size)
        X, Y = np.meshgrid(xs, ys)
        nodes = np.column_stack([X.ravel(), Y.ravel()])[used]
        conn = [tuple(int(self._id[k]) for k in e) for e in elems]
        self.mesh = Mesh(nodes, conn, {}, thickness)

    def node(self, x: float, y: float) -> int:
        i = int(np.argmin(np.abs(self.xs - x)))
        j = int(np.argmin(np.abs(self.ys - y)))
        if abs(self.xs[i] - x) > 1e-9 or abs(self.ys[j] - y) > 1e-9:
            raise AssertionError(f"no grid line through ({x}, {y})")
        k = int(self._id[i + j * len(self.xs)])
        if k < 0:
            raise AssertionError(f"grid point ({x}, {y}) lies inside a notch")
        return k

    def column(self, x: float) -> list[int]:
        """Existing nodes on the vertical grid line through ``x``."""
        return [self.node(x, y) for y in self.ys]


@dataclass
class Benchmark:
    """Generated mesh plus the boundary conditions and probes of a benchmark.

    ``control`` is the set/dof driven by the load protocol with ``sign``
    applied to the protocol amplitudes; ``fixed`` lists permanently zero
    dofs.  ``reaction`` names the set/dof whose reaction is reported (times
    ``reaction_sign``) and ``area`` converts it to an average stress.
    """

    name: str
    mesh: Mesh
    fixed: list[tuple[str, str]]
    control: list[tuple[str, str, float]]
    probes: list[Probe]
    reaction: tuple[str, str, float]
    area: float | None = None
    geometry: dict[str, float] = field(default_factory=dict)


def _beam(refinement: int, notch_x: float, name: str) -> Benchmark:
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    g = GEOMETRY["beam"]
    h, a = g["height"], g["notch_depth"]
    half = 0.5 * g["span"]
    end = half + g["overhang"]
    h0 = h / (6 * refinement)  # 4r elements through the ligament
    w = 0.5 * h0  # half-width of the notch gap and of the loading platen
    ys = np.linspace(0.0, h, 6 * refinement + 1)
    lo = min(0.0, notch_x) - w - 2 * h0
    hi = max(0.0, notch_x) + w + 2 * h0
    knots = sorted({-end, -half, -w, w, notch_x - w, notch_x + w, half, end})
    xs = _line(knots, (lo, hi), h0, 4 * h0)
    grid = _Grid(xs, ys, g["thickness"], [(notch_x - w, notch_x + w, 0.0, a)])
    mesh = grid.mesh
    mesh.sets = {
        "load": [grid.node(-w, h), grid.node(w, h)],
        "support_left": [grid.node(-half, 0.0)],
        "support_right": [grid.node(half, 0.0)],
        "mouth_left": [grid.node(notch_x - w, 0.0)],
        "mouth_right": [grid.node(notch_x + w, 0.0)],
        "notch_tip": [grid.node(notch_x - w, a), grid.node(notch_x + w, a)],
    }
    mesh.validate()
    return Benchmark(
        name=name,
        mesh=mesh,
        fixed=[("support_left", "x"), ("support_left", "y"), ("support_right", "y")],
        control=[("load", "y", -1.0)],
        probes=[NodePairProbe("cmd", "mouth_left", "mouth_right", "x")],
        reaction=("load", "y", -1.0),
        geometry={**g, "notch_x": notch_x, "notch_width": 2 * w, "ligament_elements": int(round((h - a) / h0))},
    )


def gen_opening_mode(refinement: int = 2) -> Benchmark:
    """Notched beam under three-point bending, notch at mid-span.

    ``refinement`` r gives 4r elements through the ligament and a graded
    mesh concentrated around the notch line.  Origin: mid-span, bottom fiber.
    """
    return _beam(refinement, 0.0, "opening_mode")


def gen_mixed_mode(refinement: int = 2) -> Benchmark:
    """The three-point-bending beam with the notch offset from the load line."""
    return _beam(refinement, GEOMETRY["beam"]["notch_offset"], "mixed_mode")


def gen_full_cycle(refinement: int = 1) -> Benchmark:
    """Double-edge-notched bar loaded by opposing x-displacements of its end faces.

    Origin at the mid-section, bottom edge.  The deflection probe is the
    difference of the mean x-displacements of the two node lines at
    +-probe_offset; the reported stress is the right-face reaction over the
    net width times thickness of the section.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    g = GEOMETRY["bar"]
    W, c, off = g["width"], g["notch_depth"], g["probe_offset"]
    half = 0.5 * g["length"]
    h0 = W / (12 * refinement)
    w = 0.5 * h0
    ys = np.linspace(0.0, W, 12 * refinement + 1)
    xs = _line([-half, -off, -w, w, off, half], (-off, off), h0, 4 * h0)
    notches = [(-w, w, 0.0, c), (-w, w, W - c, W)]
    grid = _Grid(xs, ys, g["thickness"], notches)
    mesh = grid.mesh
    mesh.sets = {
        "left": grid.column(-half),
        "right": grid.column(half),
        "anchor": [grid.node(-half, 0.5 * W)],
        "probe_left": grid.column(-off),
        "probe_right": grid.column(off),
    }
    mesh.validate()
    return Benchmark(
        name="full_cycle",
        mesh=mesh,
        fixed=[("anchor", "y")],
        control=[("left", "x", -0.5), ("right", "x", 0.5)],
        probes=[LineProbe("deflection", "probe_left", "probe_right", "x")],
        reaction=("right", "x", 1.0),
        area=W * g["thickness"],
        geometry={**g, "notch_width": 2 * w},
    )


GENERATORS = {
    "opening_mode": gen_opening_mode,
    "mixed_mode": gen_mixed_mode,
    "full_cycle": gen_full_cycle,
}


# ---------------------------------------------------------------------------
# Load protocols
# ---------------------------------------------------------------------------

PROTOCOLS = ("monotonic", "two_unload", "full_reversal")


def protocol_knots(kind: str, amplitudes: Sequence[float], rest: float = 0.0) -> tuple[list[float], list[float]]:
    """Pseudo-time knots and amplitudes of a named protocol template.

    ``monotonic``: ramp to ``amplitudes[0]``.
    ``two_unload``: ramp to u1, back to ``rest``, to u2, back to ``rest``, to u3.
    ``full_reversal``: alternate through the listed targets, e.g.
    ``[+u1, -c1, +u2, -c2]`` for two tension-compression cycles.
    Knot times are proportional to the accumulated travel so the step
    density is uniform in displacement.
    """
    amps = [float(a) for a in amplitudes]
    if kind == "monotonic":
        if len(amps) != 1:
            raise ValueError("monotonic protocol takes one amplitude")
        values = [0.0, amps[0]]
    elif kind == "two_unload":
        if len(amps) != 3:
            raise ValueError("two_unload protocol takes three amplitudes (u1, u2, u3)")
        values = [0.0, amps[0], rest, amps[1], rest, amps[2]]
    elif kind == "full_reversal":
        if len(amps) < 2:
            raise ValueError("full_reversal protocol takes at least two targets")
        values = [0.0, *amps]
    else:
        raise ValueError(f"unknown protocol {kind!r}; expected one of {PROTOCOLS}")
    travel = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(values)))])
    if travel[-1] <= 0.0 or np.any(np.diff(travel) <= 0.0):
        raise ValueError("protocol knots must be strictly monotone in pseudo-time (no zero-length segments)")
    return (travel / travel[-1]).tolist(), values


def load_protocol(kind: str, amplitudes: Sequence[float], node_set: str = "load", dof: str = "y",
                  scale: float = 1.0, rest: float = 0.0) -> DirichletHistory:
    """Prescribed-displacement history for a named template (see :func:`protocol_knots`)."""
    t, v = protocol_knots(kind, amplitudes, rest)
    return DirichletHistory(node_set, dof, tuple(t), tuple(scale * x for x in v))


# ---------------------------------------------------------------------------
# Scenario documents
# ---------------------------------------------------------------------------

_TOP_KEYS = {"name", "mesh", "material", "protocol", "steps", "solver", "dump_steps", "sweep",
             "fixed", "control", "probes", "reaction", "area"}  # fmt: skip
_MESH_KEYS = {"generator", "refinement", "path"}
_MAT_KEYS = {"E", "nu", "sigma_y", "a", "b", "d_cr"}
_PROTO_KEYS = {"kind", "amplitudes", "rest", "unload_to"}
UNLOAD_TARGETS = ("displacement", "force")
_SOLVER_KEYS = {"tol", "max_iter", "cut_factor", "max_cuts", "stabilization", "force_floor", "extrapolate", "line_search", "max_stabilization",
                "tol_stagnation", "max_stalls", "damping", "damping_after"}


@dataclass
class Scenario:
    """A benchmark case: mesh, material, loading, probes and output requests."""

    name: str
    benchmark: Benchmark
    params: MaterialParams
    protocol: dict[str, Any]
    steps: int = 100
    solver: dict[str, Any] = field(default_factory=dict)
    dump_steps: tuple[int, ...] = ()
    sweep: tuple[float, ...] = ()
    document: dict[str, Any] = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.benchmark.mesh

    def histories(self) -> list[DirichletHistory]:
        hs = [DirichletHistory.fixed(s, d) for s, d in self.benchmark.fixed]
        for s, d, sign in self.benchmark.control:
            hs.append(
                load_protocol(self.protocol["kind"], self.protocol["amplitudes"], s, d, sign,
                              self.protocol.get("rest", 0.0))
            )  # fmt: skip
        return hs

    def triggers(self) -> list[ForceTrigger]:
        """Force triggers ending each unload at zero reaction (``unload_to: force``)."""
        if self.protocol.get("unload_to", "displacement") != "force":
            return []
        s, d, sign = self.benchmark.reaction
        return [ForceTrigger(s, d, sign, 0.0)]

    def config(self, **overrides) -> SolverConfig:
        kw = dict(self.solver)
        kw.update(steps=self.steps, dump_steps=tuple(self.dump_steps))
        kw.update(overrides)
        return SolverConfig(**kw)

    def with_dcr(self, d_cr: float) -> "Scenario":
        return replace(self, params=self.params.with_dcr(d_cr))


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    """Apply ``dotted.key=value`` overrides (values parsed as YAML scalars/lists)."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        try:
            value = load_yaml(raw)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"override {item!r}: {exc}") from None
        allowed = {(): _TOP_KEYS, ("mesh",): _MESH_KEYS, ("material",): _MAT_KEYS,
                   ("protocol",): _PROTO_KEYS, ("solver",): _SOLVER_KEYS}  # fmt: skip
        node = doc
        for depth, p in enumerate(parts):
            scope = tuple(parts[:depth])
            if scope not in allowed or p not in allowed[scope]:
                raise ScenarioError(f"override {item!r}: unknown key {key!r}")
            if depth == len(parts) - 1:
                node[p] = value
            else:
                node = node.setdefault(p, {})
                if not isinstance(node, dict):
                    raise ScenarioError(f"override {item!r}: {p!r} is not a mapping")
    return doc


def _probe_from_doc(d) -> Probe:
    _check_keys(d, {"name", "type", "a", "b", "dof"}, "probes[]")
    kind = d.get("type", "pair")
    cls = {"pair": NodePairProbe, "line": LineProbe}.get(kind)
    if cls is None:
        raise ScenarioError(f"probe type must be 'pair' or 'line', got {kind!r}")
    return cls(str(d["name"]), str(d["a"]), str(d["b"]), str(d.get("dof", "x")))


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> Scenario:
    """Build a :class:`Scenario` from a parsed document (see ``load_scenario``)."""
    _check_keys(doc, _TOP_KEYS, "scenario")
    try:
        mesh_doc = doc.get("mesh", {})
        _check_keys(mesh_doc, _MESH_KEYS, "mesh")
        gen = mesh_doc.get("generator")
        if gen is not None:
            if gen not in GENERATORS:
                raise ScenarioError(f"unknown generator {gen!r}; expected one of {sorted(GENERATORS)}")
            bench = GENERATORS[gen](int(mesh_doc.get("refinement", 2)))
        elif "path" in mesh_doc:
            path = Path(mesh_doc["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            bench = Benchmark(doc.get("name", path.stem), load_mesh(path), [], [], [], ("", "x", 1.0))
        else:
            raise ScenarioError("mesh: need 'generator' or 'path'")

        # explicit boundary/probe definitions replace the generator's
        if "fixed" in doc:
            bench.fixed = [(str(s), str(d)) for s, d in doc["fixed"]]
        if "control" in doc:
            bench.control = [(str(s), str(d), float(k)) for s, d, k in doc["control"]]
        if "probes" in doc:
            bench.probes = [_probe_from_doc(p) for p in doc["probes"]]
        if "reaction" in doc:
            s, d, k = doc["reaction"]
            bench.reaction = (str(s), str(d), float(k))
        if "area" in doc:
            bench.area = None if doc["area"] is None else float(doc["area"])
        if not bench.control or not bench.reaction[0]:
            raise ScenarioError("scenario needs 'control' and 'reaction' for an external mesh")
        for s, *_ in [*bench.fixed, *bench.control, bench.reaction]:
            bench.mesh.node_set(s)
        for pr in bench.probes:
            pr.check(bench.mesh)

        name = str(doc.get("name", gen or "scenario"))
        mat = dict(TABLE_PARAMS.get(gen, {}))
        mdoc = doc.get("material", {})
        _check_keys(mdoc, _MAT_KEYS, "material")
        mat.update({k: float(v) for k, v in mdoc.items()})
        missing = {"E", "nu", "sigma_y", "a", "b"} - set(mat)
        if missing:
            raise ScenarioError(f"material: missing {sorted(missing)}")
        params = MaterialParams(**mat)

        proto = dict(doc.get("protocol", {}))
        _check_keys(proto, _PROTO_KEYS, "protocol")
        if "kind" not in proto or "amplitudes" not in proto:
            raise ScenarioError("protocol: need 'kind' and 'amplitudes'")
        protocol_knots(proto["kind"], proto["amplitudes"], proto.get("rest", 0.0))
        if proto.get("unload_to", "displacement") not in UNLOAD_TARGETS:
            raise ScenarioError(f"protocol.unload_to must be one of {UNLOAD_TARGETS}")
        if proto.get("unload_to") == "force" and not any(
            (s, d) == bench.reaction[:2] for s, d, _ in bench.control
        ):
            raise ScenarioError("protocol.unload_to=force needs the reaction on a controlled set")

        solver = dict(doc.get("solver", {}))
        _check_keys(solver, _SOLVER_KEYS, "solver")
        steps = int(doc.get("steps", 100))
        sweep = tuple(float(v) for v in doc.get("sweep", SWEEPS.get(gen, ())))
        if any(not 0.0 < v <= 1.0 for v in sweep):
            raise ScenarioError("sweep values must lie in (0, 1]")
        sc = Scenario(
            name=name,
            benchmark=bench,
            params=params,
            protocol=proto,
            steps=steps,
            solver=solver,
            dump_steps=tuple(int(s) for s in doc.get("dump_steps", ())),
            sweep=sweep,
            document=copy.deepcopy(doc),
        )
        sc.config()  # validates solver settings
        return sc
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


BUILTIN = ("opening_mode", "mixed_mode", "full_cycle")


def _builtin_text(name: str) -> str:
    return resources.files("discstrain").joinpath("scenario_files", f"{name}.yaml").read_text()


def load_scenario(source: str | Path, overrides: Sequence[str] = ()) -> Scenario:
    """Load a built-in scenario by name or a scenario document from disk."""
    path = Path(source)
    if str(source) in BUILTIN and not path.exists():
        text, base = _builtin_text(str(source)), None
    else:
        try:
            text, base = path.read_text(), path.parent
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {source!r}: {exc}") from None
    try:
        doc = load_yaml(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: expected a mapping")
    return scenario_from_dict(apply_overrides(doc, overrides), base)


def builtin_scenario(name: str, **overrides: Any) -> Scenario:
    """Built-in scenario with keyword overrides in dotted form (``material__a=100``)."""
    items = [f"{k.replace('__', '.')}={yaml.safe_dump(v, default_flow_style=True).strip()}" for k, v in overrides.items()]
    items = [i.removesuffix("\n...") for i in items]
    return load_scenario(name, items)
