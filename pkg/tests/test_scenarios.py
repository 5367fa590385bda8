from __future__ import annotations

import numpy as np
import pytest

from discstrain._yaml import load_yaml
from discstrain.fem import ForceTrigger, save_mesh, structured_quads
from discstrain.fem.elements import jacobian_dets
from discstrain.scenarios import (
    BUILTIN,
    GEOMETRY,
    ScenarioError,
    apply_overrides,
    builtin_scenario,
    gen_full_cycle,
    gen_mixed_mode,
    gen_opening_mode,
    load_protocol,
    load_scenario,
    protocol_knots,
)

MM = 1e-3
GENERATORS = [gen_opening_mode, gen_mixed_mode, gen_full_cycle]


def _xy(bench, name):
    return bench.mesh.nodes[bench.mesh.node_set(name)]


def _ligament_elements(bench, x):
    """Elements above the notch root whose x-range contains ``x``."""
    m = bench.mesh
    a = bench.geometry["notch_depth"]
    count = 0
    for conn in m.elements:
        xy = m.nodes[list(conn)]
        if xy[:, 0].min() <= x <= xy[:, 0].max() and xy[:, 1].min() >= a - 1e-12:
            count += 1
    return count


class TestGenerators:
    @pytest.mark.parametrize("refinement", [1, 2, 3, 4])
    @pytest.mark.parametrize("gen", GENERATORS, ids=lambda g: g.__name__)
    def test_valid_at_every_refinement(self, gen, refinement):
        bench = gen(refinement)
        m = bench.mesh.validate()
        assert all(d.min() > 0.0 for d in jacobian_dets(m))
        for s, *_ in [*bench.fixed, *bench.control, bench.reaction]:
            assert m.node_set(s).size > 0
        for pr in bench.probes:
            pr.check(m)

    @pytest.mark.parametrize("gen", GENERATORS, ids=lambda g: g.__name__)
    def test_refinement_must_be_positive(self, gen):
        with pytest.raises(ValueError):
            gen(0)

    @pytest.mark.parametrize("gen", GENERATORS, ids=lambda g: g.__name__)
    def test_refinement_increases_density(self, gen):
        assert gen(2).mesh.n_nodes > gen(1).mesh.n_nodes


class TestBeam:
    def test_dimensions(self):
        g = GEOMETRY["beam"]
        assert (g["span"], g["height"], g["overhang"], g["thickness"]) == pytest.approx(
            (304.8 * MM, 76.2 * MM, 25.4 * MM, 28.6 * MM), rel=1e-15
        )

    @pytest.mark.parametrize("refinement", [1, 2])
    def test_outline(self, refinement):
        b = gen_opening_mode(refinement)
        nodes = b.mesh.nodes
        assert nodes[:, 0].min() == pytest.approx(-(152.4 + 25.4) * MM, rel=1e-14)
        assert nodes[:, 0].max() == pytest.approx((152.4 + 25.4) * MM, rel=1e-14)
        assert nodes[:, 1].max() == pytest.approx(76.2 * MM, rel=1e-14)
        assert b.mesh.thickness == pytest.approx(28.6 * MM)

    @pytest.mark.parametrize("gen", [gen_opening_mode, gen_mixed_mode], ids=["opening", "mixed"])
    def test_notch_root_at_third_of_height(self, gen):
        b = gen(1)
        np.testing.assert_allclose(_xy(b, "notch_tip")[:, 1], 76.2 * MM / 3.0, rtol=1e-14)

    @pytest.mark.parametrize("gen", [gen_opening_mode, gen_mixed_mode], ids=["opening", "mixed"])
    def test_supports_at_half_span(self, gen):
        b = gen(2)
        assert _xy(b, "support_left").tolist() == [pytest.approx([-152.4 * MM, 0.0])]
        assert _xy(b, "support_right").tolist() == [pytest.approx([152.4 * MM, 0.0])]

    def test_load_at_mid_span_top(self):
        xy = _xy(gen_opening_mode(2), "load")
        assert xy[:, 1] == pytest.approx([76.2 * MM] * 2)
        assert xy[:, 0].mean() == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("gen, x", [(gen_opening_mode, 0.0), (gen_mixed_mode, 75.6 * MM)], ids=["opening", "mixed"])
    def test_mouth_nodes_on_opposite_faces(self, gen, x):
        b = gen(1)
        (xl, yl), (xr, yr) = _xy(b, "mouth_left")[0], _xy(b, "mouth_right")[0]
        assert yl == yr == 0.0
        assert xl < x < xr
        assert 0.5 * (xl + xr) == pytest.approx(x, abs=1e-15)
        assert xr - xl == pytest.approx(b.geometry["notch_width"], rel=1e-12)

    def test_notch_is_traction_free_gap(self):
        b = gen_opening_mode(2)
        m = b.mesh
        w = 0.5 * b.geometry["notch_width"]
        cent = np.array([m.nodes[list(c)].mean(axis=0) for c in m.elements])
        in_gap = (np.abs(cent[:, 0]) < w) & (cent[:, 1] < b.geometry["notch_depth"])
        assert not in_gap.any()

    def test_mixed_notch_offset(self):
        b = gen_mixed_mode(2)
        assert b.geometry["notch_x"] == pytest.approx(75.6 * MM, rel=1e-15)
        assert _xy(b, "notch_tip")[:, 0].mean() == pytest.approx(75.6 * MM, rel=1e-12)
        # everything else as in the centred beam
        ref = gen_opening_mode(2)
        assert {k: v for k, v in b.geometry.items() if k not in ("notch_x",)} == {
            k: v for k, v in ref.geometry.items() if k not in ("notch_x",)
        }

    @pytest.mark.parametrize("gen", [gen_opening_mode, gen_mixed_mode], ids=["opening", "mixed"])
    def test_ligament_elements(self, gen):
        b = gen(2)
        x = b.geometry["notch_x"]
        assert _ligament_elements(b, x) == b.geometry["ligament_elements"] == 8
        assert _ligament_elements(gen(1), x) >= 4

    def test_benchmark_probe_and_reaction(self):
        b = gen_opening_mode(1)
        assert [p.name for p in b.probes] == ["cmd"]
        assert b.reaction == ("load", "y", -1.0)
        assert b.area is None


class TestFullCycle:
    def test_dimensions(self):
        b = gen_full_cycle(1)
        nodes = b.mesh.nodes
        assert np.ptp(nodes[:, 0]) == pytest.approx(250.0 * MM, rel=1e-14)
        assert np.ptp(nodes[:, 1]) == pytest.approx(60.0 * MM, rel=1e-14)
        assert b.mesh.thickness == pytest.approx(50.0 * MM)

    @pytest.mark.parametrize("refinement", [1, 2])
    def test_probe_lines(self, refinement):
        b = gen_full_cycle(refinement)
        np.testing.assert_allclose(_xy(b, "probe_left")[:, 0], -17.5 * MM, rtol=1e-14)
        np.testing.assert_allclose(_xy(b, "probe_right")[:, 0], 17.5 * MM, rtol=1e-14)
        assert np.ptp(_xy(b, "probe_left")[:, 1]) == pytest.approx(60.0 * MM)

    def test_area(self):
        assert gen_full_cycle(1).area == pytest.approx(60.0 * MM * 50.0 * MM, rel=1e-15)

    def test_opposing_controls(self):
        b = gen_full_cycle(1)
        assert sorted(b.control) == [("left", "x", -0.5), ("right", "x", 0.5)]
        np.testing.assert_allclose(_xy(b, "left")[:, 0], -125.0 * MM, rtol=1e-14)
        np.testing.assert_allclose(_xy(b, "right")[:, 0], 125.0 * MM, rtol=1e-14)

    def test_edge_notches(self):
        b = gen_full_cycle(1)
        m = b.mesh
        c, W = GEOMETRY["bar"]["notch_depth"], GEOMETRY["bar"]["width"]
        w = 0.5 * b.geometry["notch_width"]
        cent = np.array([m.nodes[list(k)].mean(axis=0) for k in m.elements])
        gap = (np.abs(cent[:, 0]) < w) & ((cent[:, 1] < c) | (cent[:, 1] > W - c))
        assert not gap.any()
        assert ((np.abs(cent[:, 0]) < w)).sum() > 0


class TestProtocols:
    def test_monotonic(self):
        t, v = protocol_knots("monotonic", [1e-3])
        assert t == [0.0, 1.0] and v == [0.0, 1e-3]

    def test_two_unload_shape(self):
        h = load_protocol("two_unload", [1.0, 2.0, 3.0], "load", "y", scale=-1.0)
        assert h.values == (0.0, -1.0, 0.0, -2.0, 0.0, -3.0)
        # uniform displacement rate: knot times proportional to travel
        np.testing.assert_allclose(h.times, np.array([0, 1, 2, 4, 6, 9]) / 9.0, rtol=1e-15)

    def test_two_unload_rest(self):
        _, v = protocol_knots("two_unload", [1.0, 2.0, 3.0], rest=0.5)
        assert v == [0.0, 1.0, 0.5, 2.0, 0.5, 3.0]

    def test_full_reversal_crosses_zero(self):
        h = load_protocol("full_reversal", [1e-4, -5e-5, 2e-4, -5e-5], "right", "x")
        vals = np.array([h(t) for t in np.linspace(0, 1, 401)])
        assert (vals < 0).any() and (vals > 0).any()
        assert np.all(np.diff(h.times) > 0)

    @pytest.mark.parametrize(
        "kind, amps",
        [("monotonic", [1.0, 2.0]), ("two_unload", [1.0]), ("full_reversal", [1.0]), ("sawtooth", [1.0]),
         ("full_reversal", [1.0, 1.0]), ("monotonic", [0.0])],
    )  # fmt: skip
    def test_errors(self, kind, amps):
        with pytest.raises(ValueError):
            protocol_knots(kind, amps)


class TestScenarioDocuments:
    @pytest.mark.parametrize("name", BUILTIN)
    def test_builtin_loads(self, name):
        sc = load_scenario(name)
        assert sc.name == name
        assert len(sc.sweep) == 4 and all(0.0 < v <= 1.0 for v in sc.sweep)
        assert sc.config().steps == sc.steps
        assert sc.histories()

    def test_sweeps(self):
        assert load_scenario("opening_mode").sweep == (1.0, 0.85, 0.60, 0.45)
        assert load_scenario("mixed_mode").sweep == (1.0, 0.85, 0.60, 0.45)
        assert load_scenario("full_cycle").sweep == (1.0, 0.60, 0.40, 0.20)

    @pytest.mark.parametrize(
        "name, expected",
        [("opening_mode", (28e9, 0.2, 3.8e6, 80.0, 70.0)), ("mixed_mode", (34e9, 0.2, 4.2e6, 110.0, 70.0)),
         ("full_cycle", (25e9, 0.2, 3.2e6, 150.0, 140.0))],
    )  # fmt: skip
    def test_table_materials(self, name, expected):
        p = load_scenario(name).params
        assert (p.E, p.nu, p.sigma_y, p.a, p.b) == expected

    def test_with_dcr(self):
        sc = load_scenario("opening_mode").with_dcr(0.85)
        assert sc.params.d_cr == 0.85 and sc.params.a == 80.0

    def test_overrides(self):
        sc = load_scenario("opening_mode", ["steps=12", "material.a=100", "mesh.refinement=1", "solver.tol=1e-7"])
        assert sc.steps == 12 and sc.params.a == 100.0
        assert sc.config().tol == 1e-7
        assert sc.benchmark.geometry["ligament_elements"] == 4

    def test_builtin_keywords(self):
        sc = builtin_scenario("full_cycle", steps=10, material__d_cr=0.4)
        assert sc.steps == 10 and sc.params.d_cr == 0.4

    @pytest.mark.parametrize(
        "override, match",
        [("colour=red", "unknown key"), ("material.f_c=3", "unknown key"), ("solver.nope=1", "unknown key"),
         ("steps", "key=value"), ("material.a=[1", "override"), ("material.d_cr=1.5", "invalid"),
         ("protocol.kind=zigzag", "invalid"), ("protocol.unload_to=sideways", "unload_to"),
         ("sweep=[1.0, 0.0]", "sweep"), ("solver.tol=2", "invalid"), ("mesh.generator=cube", "generator")],
    )  # fmt: skip
    def test_bad_overrides(self, override, match):
        with pytest.raises(ScenarioError, match=match):
            load_scenario("opening_mode", [override])

    def test_overrides_do_not_mutate(self):
        doc = {"steps": 5}
        apply_overrides(doc, ["steps=7"])
        assert doc == {"steps": 5}

    def test_exponent_literals_are_floats(self):
        assert load_yaml("x: 1e-2\ny: 5E3\nz: 1.0e-3\nw: '1e-2'") == {"x": 0.01, "y": 5000.0, "z": 1e-3, "w": "1e-2"}
        sc = load_scenario("opening_mode", ["solver.damping=1e-3"])
        assert sc.config().damping == 1e-3

    def test_force_unload_triggers(self):
        sc = load_scenario("opening_mode")
        assert sc.protocol["unload_to"] == "force"
        assert sc.triggers() == [ForceTrigger("load", "y", -1.0, 0.0)]
        assert load_scenario("opening_mode", ["protocol.unload_to=displacement"]).triggers() == []
        assert load_scenario("full_cycle").triggers() == []

    def test_force_unload_needs_controlled_reaction(self):
        with pytest.raises(ScenarioError, match="controlled set"):
            load_scenario("opening_mode", ["reaction=[support_left, y, 1.0]", "protocol.unload_to=force"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario(tmp_path / "none.yaml")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ScenarioError, match="mapping"):
            load_scenario(path)

    def test_external_mesh(self, tmp_path):
        m = structured_quads(np.linspace(0, 0.1, 5), np.linspace(0, 0.02, 3), thickness=0.01)
        m.sets["pin"] = [0]
        save_mesh(m, tmp_path / "bar.yaml")
        (tmp_path / "bar_case.yaml").write_text(
            "name: bar\n"
            "mesh: {path: bar.yaml}\n"
            "material: {E: 3.0e10, nu: 0.2, sigma_y: 3.0e6, a: 80, b: 70, d_cr: 0.5}\n"
            "protocol: {kind: monotonic, amplitudes: [1.0e-5]}\n"
            "fixed: [[left, x], [pin, y]]\n"
            "control: [[right, x, 1.0]]\n"
            "reaction: [right, x, 1.0]\n"
            "probes: [{name: ext, type: line, a: left, b: right}]\n"
            "area: 2.0e-4\n"
            "steps: 4\n"
            "sweep: [0.5]\n"
        )
        sc = load_scenario(tmp_path / "bar_case.yaml")
        assert sc.mesh.checksum() == m.checksum()
        assert sc.benchmark.area == 2e-4
        assert [h.node_set for h in sc.histories()] == ["left", "pin", "right"]

    def test_external_mesh_needs_control(self, tmp_path):
        m = structured_quads([0, 1], [0, 1])
        save_mesh(m, tmp_path / "m.yaml")
        (tmp_path / "c.yaml").write_text(
            "mesh: {path: m.yaml}\nmaterial: {E: 1e9, nu: 0.2, sigma_y: 1e6, a: 1, b: 1}\n"
            "protocol: {kind: monotonic, amplitudes: [1e-5]}\n"
        )
        with pytest.raises(ScenarioError, match="control"):
            load_scenario(tmp_path / "c.yaml")

    def test_unknown_set_in_document(self):
        with pytest.raises(ScenarioError, match="unknown node set"):
            load_scenario("opening_mode", ["fixed=[[nowhere, x]]"])
