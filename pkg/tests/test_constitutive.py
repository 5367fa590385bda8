from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import table1
from discstrain import constitutive as cm
from discstrain.constitutive import (
    InconsistentStepError,
    MaterialParams,
    MaterialState,
    Regime,
    StepTooLargeError,
    damage_from_state,
    map_to_cauchy,
    return_map,
    solve_alpha,
    solve_beta,
    stabilize_tangent,
    tangent_numeric,
    update,
    virgin_state,
    yield_function,
)
from discstrain.matpoint import drive_strain_path, standard_cyclic_path, subdivide
from discstrain.oracle import mixed_control_drive
from discstrain.tensor2d import SymTensor2, outer, spectral

SY = 3.8e6


def _open_crack_state(p: MaterialParams, extra: float = 0.002) -> MaterialState:
    """Uniaxial-stress state with the crack open by ``extra`` beyond inception."""
    ecr = p.sigma_y / p.E + p.eps_p_cr
    _, states = mixed_control_drive(p, [0.0, p.sigma_y / p.E, ecr + extra])
    st = states[-1]
    assert st.regime is Regime.CRACK_OPEN
    return st


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


class TestParams:
    def test_cap(self, params):
        assert params.eps_p_cr == pytest.approx(7.4731e-3, rel=1e-4)
        assert damage_from_state(params.eps_p_cr, 0.0, params) == pytest.approx(0.45, rel=1e-14)

    def test_conventional_cap_is_infinite(self, params_conventional):
        assert math.isinf(params_conventional.eps_p_cr)

    @pytest.mark.parametrize(
        "field, value",
        [("E", 0.0), ("nu", 0.5), ("sigma_y", -1.0), ("a", 0.0), ("b", -1.0), ("d_cr", 0.0), ("d_cr", 1.2)],
    )
    def test_invalid(self, field, value):
        kw = dict(E=28e9, nu=0.2, sigma_y=SY, a=80.0, b=70.0, d_cr=0.45)
        kw[field] = value
        with pytest.raises(ValueError):
            MaterialParams(**kw)


# ---------------------------------------------------------------------------
# yield function and return map
# ---------------------------------------------------------------------------


class TestYield:
    def test_on_locus(self, params):
        assert yield_function(SymTensor2(3.8e6, 0.0, 0.0), params) == 0.0

    def test_compression_never_yields(self, params):
        assert yield_function(SymTensor2(-5e6, -1e6, 0.0), params) == -3.8e6

    def test_pure_shear(self, params):
        assert yield_function(SymTensor2(0.0, 0.0, 2e6), params) == pytest.approx(-1.8e6)


def _substepped_return(s1_trial, s2_trial, p, m=20000):
    """Explicit forward integration of the same strain increment in m slices.

    Starting from zero stress, each slice adds the elastic stress increment and
    then projects the major principal stress back along the associated flow
    e1(x)e1 (principal frame is fixed for this proportional input).
    """
    ep = p.E / (1 - p.nu**2)
    s1 = s2 = 0.0
    gamma = 0.0
    for _ in range(m):
        s1 += s1_trial / m
        s2 += s2_trial / m
        if s1 > p.sigma_y:
            dg = (s1 - p.sigma_y) / ep
            gamma += dg
            s1 -= ep * dg
            s2 -= p.nu * ep * dg
    return s1, s2, gamma


class TestReturnMap:
    def test_regular_closed_form(self, params):
        sig, dg, flow = return_map(SymTensor2(4.0e6, 0.0, 0.0), params)
        assert sig.xx == pytest.approx(3.8e6, rel=1e-14)
        assert sig.yy == pytest.approx(-4.0e4, rel=1e-12)
        assert dg == pytest.approx(6.857142857e-6, rel=1e-9)
        assert flow == SymTensor2(1.0, 0.0, 0.0)

    def test_regular_matches_substepped_oracle(self, params):
        sig, dg, _ = return_map(SymTensor2(4.0e6, 0.0, 0.0), params)
        s1, s2, gamma = _substepped_return(4.0e6, 0.0, params)
        assert sig.xx == pytest.approx(s1, rel=1e-12)
        # the forward oracle is first order in the slice size
        assert sig.yy == pytest.approx(s2, rel=1e-3)
        assert dg == pytest.approx(gamma, rel=1e-3)

    def test_corner(self, params):
        sig, dg, flow = return_map(SymTensor2(5e6, 4.5e6, 0.0), params)
        assert sig.xx == pytest.approx(3.8e6, rel=1e-14)
        assert sig.yy == pytest.approx(3.8e6, rel=1e-14)
        assert yield_function(sig, params) <= 1e-9 * SY
        # multipliers from the 2x2 principal system, solved independently
        ep = params.E / (1 - params.nu**2)
        A = ep * np.array([[1.0, params.nu], [params.nu, 1.0]])
        g1, g2 = np.linalg.solve(A, [5e6 - 3.8e6, 4.5e6 - 3.8e6])
        assert g1 > 0 and g2 > 0
        assert dg == pytest.approx(g1 + g2, rel=1e-12)
        assert flow.xx == pytest.approx(g1 / (g1 + g2), rel=1e-12)
        assert flow.yy == pytest.approx(g2 / (g1 + g2), rel=1e-12)

    def test_rotated_trial(self, params):
        theta = 0.4
        trial = SymTensor2(4.0e6, 0.0, 0.0).rotated(theta)
        sig, dg, flow = return_map(trial, params)
        ref = SymTensor2(3.8e6, -4.0e4, 0.0).rotated(theta)
        assert (sig - ref).norm() <= 1e-9 * SY
        assert (flow - outer((math.cos(theta), math.sin(theta)))).norm() <= 1e-12

    def test_rejects_admissible(self, params):
        with pytest.raises(ValueError):
            return_map(SymTensor2(3.8e6, 1e6, 0.0), params)


# ---------------------------------------------------------------------------
# damage and Cauchy mapping
# ---------------------------------------------------------------------------


class TestDamage:
    def test_pre_crack_law(self, params):
        assert damage_from_state(0.01, 0.0, params) == pytest.approx(0.550671, abs=1e-6)

    def test_virgin(self, params):
        assert damage_from_state(0.0, 0.0, params) == 0.0

    def test_post_crack_law(self, params):
        # 1 - 0.55 exp(-0.7)
        d = damage_from_state(params.eps_p_cr, 0.01, params)
        assert d == pytest.approx(0.7268781, abs=1e-7)


class TestMapToCauchy:
    def test_diagonal(self):
        s = map_to_cauchy(SymTensor2(4e6, -1e6, 0.0), 0.5)
        assert (s.xx, s.yy, s.xy) == (2e6, -1e6, 0.0)

    def test_compressive_recovers_full_stress(self):
        t = SymTensor2(-3e6, -1e6, 0.5e6)
        assert (map_to_cauchy(t, 0.9) - t).norm() == 0.0

    def test_zero_damage_identity(self):
        t = SymTensor2(3e6, -1e6, 0.5e6)
        assert map_to_cauchy(t, 0.0) == t


# ---------------------------------------------------------------------------
# sub-step solves
# ---------------------------------------------------------------------------


class TestSolveAlpha:
    def test_zero_lambda_is_elastic_fraction(self, params):
        st = MaterialState(sigma_eff=SymTensor2(1.9e6, 0.0, 0.0), acc_p=params.eps_p_cr)
        d = 1e-4
        alpha, inter, sig = solve_alpha(st, SymTensor2(d, 0.0, 0.0), params)
        ep = params.E / (1 - params.nu**2)
        assert alpha == pytest.approx((3.8e6 - 1.9e6) / (ep * d), rel=1e-9)
        assert abs(yield_function(sig, params)) <= 1e-9 * SY
        assert inter.regime is Regime.CRACK_OPEN
        assert inter.acc_p == params.eps_p_cr

    def test_uniaxial_inception(self, params):
        # on the locus, delta short of the cap; plastic flow keeps the lateral
        # effective stress at zero, so alpha = 1/2 by hand
        delta = 1e-4
        st = MaterialState(
            sigma_eff=SymTensor2(SY, 0.0, 0.0),
            eps_p=SymTensor2(params.eps_p_cr - delta, 0.0, 0.0),
            acc_p=params.eps_p_cr - delta,
        )
        alpha, inter, sig = solve_alpha(st, SymTensor2(2 * delta, 0.0, 0.0), params)
        assert alpha == pytest.approx(0.5, rel=1e-9)
        assert spectral(sig).values[0] == pytest.approx(SY, rel=1e-12)
        assert inter.acc_p == params.eps_p_cr
        assert inter.acc_p == pytest.approx(7.4731e-3, rel=1e-4)
        assert inter.normal[0] == pytest.approx(1.0)
        assert inter.eps_p.xx == pytest.approx(params.eps_p_cr, rel=1e-12)

    def test_root_is_on_locus(self, params):
        rng = np.random.default_rng(7)
        hits = 0
        for _ in range(300):
            st = MaterialState(
                sigma_eff=SymTensor2(*(rng.normal(size=3) * 1.5e6)),
                acc_p=params.eps_p_cr * rng.uniform(0.5, 1.0),
            )
            if yield_function(st.sigma_eff, params) > 0:
                continue
            deps = SymTensor2(*(rng.normal(size=3) * 2e-3))
            try:
                alpha, inter, sig = solve_alpha(st, deps, params)
            except InconsistentStepError:
                continue
            hits += 1
            assert 0.0 <= alpha <= 1.0
            assert abs(yield_function(sig, params)) <= 1e-9 * SY
        assert hits > 50

    def test_above_cap_is_inconsistent(self, params):
        st = MaterialState(acc_p=params.eps_p_cr * 1.01)
        with pytest.raises(InconsistentStepError):
            solve_alpha(st, SymTensor2(1e-3, 0.0, 0.0), params)


class TestSolveBeta:
    def _state(self, jump):
        return MaterialState(eps_d=SymTensor2(jump, 0.0, 0.0), normal=(1.0, 0.0), regime=Regime.CRACK_OPEN)

    def test_linear_root(self):
        assert solve_beta(self._state(0.002), SymTensor2(-0.005, 0.0, 0.0)) == pytest.approx(0.4)

    def test_already_closed(self):
        assert solve_beta(self._state(0.0), SymTensor2(-0.005, 0.0, 0.0)) == 0.0

    def test_closes_at_step_end(self):
        assert solve_beta(self._state(0.001), SymTensor2(-0.001, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)

    def test_non_closing_increment(self):
        with pytest.raises(AssertionError):
            solve_beta(self._state(0.001), SymTensor2(0.001, 0.0, 0.0))


# ---------------------------------------------------------------------------
# full update
# ---------------------------------------------------------------------------


class TestUpdate:
    def test_virgin_elastic(self, params):
        deps = SymTensor2(5e-5, -1e-5, 2e-5)
        res = update(virgin_state(), deps, params)
        assert res.sigma == params.elastic.apply(deps)
        assert res.damage == 0.0
        assert res.state.acc_p == 0.0 and res.state.regime is Regime.ELASTOPLASTIC

    def test_input_state_untouched(self, params):
        st = _open_crack_state(params)
        before = (st.eps_d, st.max_jump, st.regime)
        update(st, SymTensor2(-0.01, 0.0, 0.0), params)
        assert (st.eps_d, st.max_jump, st.regime) == before

    def test_further_opening_softens_by_post_crack_law(self, params):
        st = _open_crack_state(params, extra=0.002)
        delta = 0.003
        res = update(st, outer(st.normal) * delta, params)
        jump = 0.002 + delta
        d = 1.0 - 0.55 * math.exp(-params.b * jump)
        assert res.state.max_jump == pytest.approx(jump, rel=1e-9)
        assert res.sigma.project(st.normal) == pytest.approx((1 - d) * SY, rel=1e-9)
        assert res.sigma_eff == st.sigma_eff

    def test_closure_then_compression(self, params):
        st = _open_crack_state(params, extra=0.002)
        res = update(st, SymTensor2(-0.003, 0.0, 0.0), params)
        assert res.state.regime is Regime.ELASTOPLASTIC
        assert res.state.eps_d == SymTensor2()
        assert res.state.normal == st.normal
        assert res.state.max_jump == st.max_jump
        # effective stress unloads elastically from the frozen value by 0.001
        expect = st.sigma_eff + params.elastic.apply(SymTensor2(-0.001, 0.0, 0.0))
        assert (res.sigma_eff - expect).norm() <= 1e-6 * SY

    def test_reopening_uses_zero_lambda(self, params):
        st = _open_crack_state(params, extra=0.002)
        closed = update(st, SymTensor2(-0.0021, 0.0, 0.0), params).state
        reopened = update(closed, SymTensor2(0.0003, 0.0, 0.0), params).state
        assert reopened.regime is Regime.CRACK_OPEN
        assert reopened.acc_p == params.eps_p_cr
        assert reopened.jump == pytest.approx(0.0002, rel=1e-6)

    def test_transition_cap(self, params, monkeypatch):
        st = _open_crack_state(params, extra=0.002)
        monkeypatch.setattr(cm, "MAX_TRANSITIONS", 0)
        with pytest.raises(StepTooLargeError):
            update(st, SymTensor2(-0.003, 0.0, 0.0), params)

    def test_rejects_nan(self, params):
        with pytest.raises(cm.ConstitutiveError):
            update(virgin_state(), SymTensor2(math.nan, 0.0, 0.0), params)


# ---------------------------------------------------------------------------
# tangent
# ---------------------------------------------------------------------------


class TestTangent:
    def test_virgin_elastic(self, params):
        C = tangent_numeric(virgin_state(), SymTensor2(1e-5, 0.0, 0.0), params)
        D = params.elastic.matrix()
        assert np.allclose(C, D, rtol=1e-6, atol=1e-6 * params.E)

    def test_frozen_crack_row_vanishes(self, params):
        st = _open_crack_state(params)
        C = tangent_numeric(st, SymTensor2(-1e-4, 0.0, 0.0), params)
        assert np.max(np.abs(C[0])) <= 1e-9 * params.E
        K = stabilize_tangent(C, params.E)
        assert K[0, 0] == pytest.approx(1e-6 * params.E)
        assert np.all(np.diag(K) > 0)

    def test_compressive_after_closure(self, params):
        st = _open_crack_state(params)
        closed = update(st, SymTensor2(-0.0021, 0.0, 0.0), params).state
        deep = update(closed, SymTensor2(-1e-3, -1e-3, 0.0), params).state
        C = tangent_numeric(deep, SymTensor2(-1e-5, 0.0, 0.0), params)
        assert np.allclose(C, params.elastic.matrix(), rtol=1e-6, atol=1e-6 * params.E)

    def test_with_tangent_flag(self, params):
        res = update(virgin_state(), SymTensor2(1e-5, 0.0, 0.0), params, with_tangent=True)
        assert res.tangent.shape == (3, 3)

    @pytest.mark.parametrize("regime", ["elastic", "frozen"])
    def test_symmetric_in_smooth_regimes(self, params, regime):
        if regime == "elastic":
            st, deps = virgin_state(), SymTensor2(2e-5, -1e-5, 1e-5)
        else:
            st, deps = _open_crack_state(params), SymTensor2(-1e-4, 2e-5, 1e-5)
        C = tangent_numeric(st, deps, params)
        Ce = C @ np.diag([1.0, 1.0, 0.5])  # engineering-shear columns
        scale = max(np.max(np.abs(Ce)), 1e-300)
        assert np.max(np.abs(Ce - Ce.T)) <= 1e-4 * max(scale, params.E)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d_cr", [0.2, 0.45, 0.85])
def test_random_sequences_respect_invariants(d_cr):
    p = table1(d_cr)
    rng = np.random.default_rng(int(d_cr * 100))
    ec = p.sigma_y / p.E + p.eps_p_cr
    for _ in range(500):
        st, d_prev, jmax = virgin_state(), 0.0, 0.0
        for inc in rng.normal(size=(6, 3)) * ec * rng.uniform(0.01, 0.8):
            res = update(st, SymTensor2(*inc), p)
            st = res.state
            assert st.acc_p <= p.eps_p_cr + 1e-14
            assert yield_function(res.sigma_eff, p) <= 1e-9 * p.sigma_y
            assert res.damage >= d_prev
            assert st.max_jump >= jmax
            if st.regime is Regime.CRACK_OPEN:
                assert st.jump >= -1e-12
            else:
                assert st.eps_d == SymTensor2()
            assert res.damage == damage_from_state(st.acc_p, st.max_jump, p)
            d_prev, jmax = res.damage, st.max_jump


def test_crack_reversibility_recovers_stiffness(params):
    st = _open_crack_state(params, extra=1e-6)
    n = st.normal
    opened = update(st, outer(n) * 0.004, params).state
    assert opened.jump == pytest.approx(0.004 + 1e-6, rel=1e-9)
    closed = update(opened, outer(n) * -0.0041, params).state
    assert closed.eps_d.norm() <= 1e-15
    deep = update(closed, SymTensor2(-5e-4, -5e-4, 0.0), params).state
    C = tangent_numeric(deep, SymTensor2(-1e-5, -1e-5, 0.0), params)
    assert np.allclose(C, params.elastic.matrix(), rtol=1e-6, atol=1e-6 * params.E)


def test_conventional_model_never_cracks(params_conventional):
    p = params_conventional
    recs = drive_strain_path(p, subdivide(standard_cyclic_path(p), 32))
    assert all(r.regime == "ELASTOPLASTIC" for r in recs)
    assert all(r.eps_d == SymTensor2() for r in recs)
    assert recs[-1].acc_p > -math.log(0.55) / p.a


@pytest.mark.parametrize("d_cr", [1.0, 0.85, 0.45])
def test_substep_refinement_converges(d_cr):
    p = table1(d_cr)
    knots = standard_cyclic_path(p)
    ends = {n: drive_strain_path(p, subdivide(knots, n))[-1].sigma for n in (8, 16, 32, 64, 128)}
    diffs = [(ends[n] - ends[2 * n]).norm() for n in (8, 16, 32, 64)]
    assert all(b <= a for a, b in zip(diffs, diffs[1:])), diffs


def test_objectivity_under_rotation(params):
    theta = 0.7
    knots = standard_cyclic_path(params)
    base = drive_strain_path(params, subdivide(knots, 16))
    rot = drive_strain_path(params, [e.rotated(theta) for e in subdivide(knots, 16)])
    c, s = math.cos(theta), math.sin(theta)
    for r0, r1 in zip(base, rot):
        scale = max(r0.sigma.norm(), SY)
        assert (r0.sigma.rotated(theta) - r1.sigma).norm() <= 1e-9 * scale
        assert r0.regime == r1.regime
    # crack normals rotate with the path (compare planes via n (x) n)
    for st_pair in zip(_states(params, subdivide(knots, 16)), _states(params, [e.rotated(theta) for e in subdivide(knots, 16)])):
        n0, n1 = st_pair[0].normal, st_pair[1].normal
        if n0 is None:
            assert n1 is None
            continue
        rn0 = (c * n0[0] - s * n0[1], s * n0[0] + c * n0[1])
        assert (outer(rn0) - outer(n1)).norm() <= 1e-9


def _states(p, strains):
    st = virgin_state()
    out = [st]
    for a, b in zip(strains[:-1], strains[1:]):
        st = update(st, b - a, p).state
        out.append(st)
    return out
