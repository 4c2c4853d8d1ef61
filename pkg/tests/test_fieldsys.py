import numpy as np
import pytest

from hjequiv import corpus
from hjequiv import expr as ex
from hjequiv.errors import NothingToPromoteError
from hjequiv.fieldsys import (
    constraint_variations,
    constraints_from_hamiltonians,
    field_euler_lagrange,
    promote_to_field,
    total_partial,
)
from hjequiv.hj import build_system
from hjequiv.model import LagrangianModel, analyze, euler_lagrange, load_model
from hjequiv.reparam import parametrize


def make(lag, coords=("q", "t"), time="tau"):
    return LagrangianModel("m", coords, ex.parse(lag), time=time)


def field(m):
    return promote_to_field(m, analyze(m))


REPARAM_FREE = make("0.5*v_q^2/v_t")
REPARAM_OSC = make("0.5*v_q^2/v_t - 0.5*v_t*q^2")
REPARAM_FORCED = parametrize(load_model(corpus.FORCED)).extended


def test_modified_lagrangian_free_particle():
    f = field(REPARAM_FREE)
    assert f.params == ("tau", "t")
    assert f.regular == ("q",)
    expected = ex.parse("(dtau_q + dt_q*v_t)^2/(2*v_t)")
    assert ex.is_identically_zero(f.lagrangian - expected).verdict == "symbolic-zero"


def test_modified_lagrangian_oscillator():
    f = field(REPARAM_OSC)
    expected = ex.parse("(dtau_q + dt_q*v_t)^2/(2*v_t) - v_t*q^2/2")
    assert ex.is_identically_zero(f.lagrangian - expected).is_zero


def test_modified_lagrangian_signature():
    f = field(REPARAM_FORCED)
    allowed = {"q", "t", "v_t", "dtau_q", "dt_q"}
    assert ex.symbols(f.lagrangian) <= allowed


def test_regular_model_has_nothing_to_promote():
    m = LagrangianModel("osc", ("q",), ex.parse("0.5*v_q^2 - 0.5*q^2"))
    with pytest.raises(NothingToPromoteError):
        field(m)


@pytest.mark.parametrize("m", [REPARAM_FREE, REPARAM_OSC, REPARAM_FORCED], ids=["free", "osc", "forced"])
def test_constraints_equal_hamiltonians_on_momentum_surface(m):
    f = field(m)
    sys_ = build_system(m)
    from_h = constraints_from_hamiltonians(f, sys_)
    for a in f.params:
        assert ex.is_identically_zero(from_h[a] - f.constraints[a]).is_zero


def test_total_partial_uses_symmetric_second_partials():
    f = field(REPARAM_OSC)
    d = total_partial(ex.parse("dt_q*q"), f, "tau")
    assert ex.is_identically_zero(d - ex.parse("dtaut_q*q + dt_q*dtau_q")).is_zero
    assert f.second_name("t", "tau", "q") == f.second_name("tau", "t", "q") == "dtaut_q"


def test_oscillator_reduction():
    fel = field_euler_lagrange(field(REPARAM_OSC))
    assert fel.keep == "t"
    expected = ex.parse("v_t*(a_q + q)")
    assert ex.is_identically_zero(fel.reduced["q"] - expected).is_zero
    # numeric residual sampling with the base equation imposed (a_q = -q)
    sub = ex.substitute(fel.reduced["q"], {"a_q": ex.parse("-q")})
    rng = np.random.default_rng(1)
    for _ in range(50):
        b = {n: rng.uniform(0.5, 2) for n in ex.symbols(sub)}
        assert abs(ex.evaluate(sub, b)) <= 1e-9


def test_free_particle_reduction():
    fel = field_euler_lagrange(field(REPARAM_FREE))
    assert ex.is_identically_zero(fel.reduced["q"] - ex.parse("v_t*a_q")).is_zero


def test_constant_lagrangian_has_zero_residuals():
    m = make("3", coords=("q1", "q2"), time="t")
    fel = field_euler_lagrange(field(m))
    assert all(r == ex.ZERO for r in fel.residuals.values())


@pytest.mark.parametrize("key", sorted(corpus.REGULAR) + ["forced_oscillator"])
def test_reduction_property_corpus(key):
    base = corpus.model(key)
    ext = parametrize(base).extended
    fel = field_euler_lagrange(field(ext), keep="t")
    base_res = euler_lagrange(base).residuals
    for c in base.coordinates:
        diff = fel.reduced[c] - ex.sym("v_t") * base_res[c]
        assert ex.is_identically_zero(diff).is_zero


def test_oscillator_variations_vanish():
    f = field(REPARAM_OSC)
    rep = constraint_variations(f, build_system(REPARAM_OSC))
    assert rep.new_constraints == []
    for e in rep.entries:
        assert e.identically_zero.is_zero
        assert set(e.balanced_by) == {"dtau", "dt"}


def test_free_particle_time_variation_vanishes():
    rep = constraint_variations(field(REPARAM_FREE), build_system(REPARAM_FREE))
    g_t = next(e for e in rep.entries if e.id == "G_t")
    assert g_t.identically_zero.verdict == "symbolic-zero"


def test_forced_oscillator_balances_with_dtau():
    f = field(REPARAM_FORCED)
    sys_ = build_system(REPARAM_FORCED)
    rep = constraint_variations(f, sys_)
    g_t = next(e for e in rep.entries if e.id == "G_t")
    assert g_t.identically_zero.verdict == "nonzero"
    assert g_t.balanced_by == ["dtau"]
    assert not g_t.flagged
    # both sides independently, at 50 samples
    lhs = g_t.lhs["tau"] + g_t.lhs["t"] * ex.sym("v_t")
    rng = np.random.default_rng(9)
    names = sorted(ex.symbols(lhs) | ex.symbols(g_t.rhs))
    for _ in range(50):
        b = {n: rng.uniform(0.5, 2) for n in names}
        assert abs(ex.evaluate(lhs, b) - ex.evaluate(g_t.rhs, b)) <= 1e-9
    assert abs(ex.evaluate(g_t.rhs, {"q": 1.0, "t": 0.5, "v_t": 1.0})) > 0.1


def test_report_export_fields():
    rep = constraint_variations(field(REPARAM_OSC), build_system(REPARAM_OSC)).to_dict()
    entry = rep["constraints"][0]
    assert {"constraint_id", "expression", "verdict", "witness"} <= set(entry)
