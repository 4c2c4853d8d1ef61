import math

import numpy as np
import pytest

from hjequiv import corpus
from hjequiv import expr as ex
from hjequiv.errors import NotRegularError, ValidationError
from hjequiv.hj import evaluate_along
from hjequiv.model import LagrangianModel, analyze, load_model
from hjequiv.reparam import (
    build_extended_hj,
    complete_initial,
    direct_time_hamiltonian,
    homogeneity_check,
    hj_route,
    parametrize,
    reduction_check,
    verify_equivalence,
)


def make(lag, coords=("q",), time="t"):
    return LagrangianModel("m", coords, ex.parse(lag), time=time)


def test_free_particle_extension():
    pair = parametrize(make("0.5*v_q^2"))
    ext = pair.extended
    assert ext.coordinates == ("q", "t")
    assert ext.time == "tau"
    assert ex.is_identically_zero(ext.lagrangian - ex.parse("0.5*v_q^2/v_t")).verdict == "symbolic-zero"


def test_oscillator_extension():
    pair = parametrize(make("0.5*v_q^2 - 0.5*q^2"))
    expected = ex.parse("0.5*v_q^2/v_t - 0.5*v_t*q^2")
    assert ex.is_identically_zero(pair.extended.lagrangian - expected).verdict == "symbolic-zero"
    assert pair.provenance["v_q"] == "v_q/v_t"


def test_singular_base_rejected():
    with pytest.raises(NotRegularError):
        parametrize(make("0.5*v_q1^2 + q2*q1", coords=("q1", "q2")))


def test_parameter_name_avoids_clash():
    pair = parametrize(make("0.5*v_tau^2", coords=("tau",)))
    assert pair.extended.time == "tau_"


@pytest.mark.parametrize("key", sorted(corpus.REGULAR) + ["forced_oscillator"])
def test_extension_is_homogeneous_and_deficient(key):
    base = corpus.model(key)
    pair = parametrize(base)
    assert homogeneity_check(pair).is_zero
    a = analyze(pair.extended)
    assert (a.rank, a.deficiency, a.degenerate_coords) == (base.n, 1, ("t",))
    # structural form v_t * L(q, v/v_t, t)
    sub = {v: ex.sym(v) / ex.sym("v_t") for v in base.velocities}
    direct = ex.sym("v_t") * ex.substitute(base.lagrangian, sub)
    assert ex.is_identically_zero(pair.extended.lagrangian - direct).is_zero


def test_homogeneity_controls():
    zt = homogeneity_check(load_model(corpus.CONTROLS["non_homogeneous"]))
    assert zt.verdict == "nonzero"
    assert zt.witness is not None
    assert homogeneity_check(make("v_t", coords=("t",), time="tau")).is_zero


@pytest.mark.parametrize("lag, expected", [
    ("0.5*v_q^2", "p_q^2/2"),
    ("0.5*v_q^2 - 0.5*q^2", "p_q^2/2 + q^2/2"),
    ("0.5*v_q^2 + 3*v_q", "(p_q - 3)^2/2"),
])
def test_extended_time_hamiltonian(lag, expected):
    pair = parametrize(make(lag))
    sys_ = build_extended_hj(pair)
    assert ex.is_identically_zero(sys_.hamiltonians["t"] - ex.parse(expected)).is_zero
    assert sys_.hamiltonians["tau"] == ex.ZERO
    assert ex.is_identically_zero(direct_time_hamiltonian(pair.base) - ex.parse(expected)).is_zero


@pytest.mark.parametrize("key", sorted(corpus.REGULAR) + ["forced_oscillator"])
def test_reduction_check_corpus(key):
    checks = reduction_check(parametrize(corpus.model(key)))
    assert all(z.is_zero for z in checks.values())


def test_complete_initial_from_momenta():
    base = make("0.5*v_q^2 + 3*v_q")
    init = complete_initial(base, {"q": 0.0, "p_q": 4.0})
    assert init["v_q"] == pytest.approx(1.0)
    with pytest.raises(ValidationError, match="disagrees"):
        complete_initial(base, {"q": 0.0, "v_q": 0.0, "p_q": 1.0})
    with pytest.raises(ValidationError):
        complete_initial(base, {"v_q": 0.0})


def test_oscillator_equivalence_against_closed_form():
    pair = parametrize(make("0.5*v_q^2 - 0.5*q^2"))
    rep = verify_equivalence(pair, {"q": 1.0, "p_q": 0.0}, 2 * math.pi, 1e-3)
    assert rep.verdict == "equivalent"
    assert rep.max_dev <= 1e-6
    assert rep.pt_drift <= 1e-10
    tr = rep.hj_trajectory
    assert np.max(np.abs(tr["q"] - np.cos(tr["t"]))) <= 1e-6
    assert np.max(np.abs(tr["p_q"] + np.sin(tr["t"]))) <= 1e-6


def test_free_particle_equivalence():
    pair = parametrize(make("0.5*v_q^2"))
    rep = verify_equivalence(pair, {"q": 0.0, "p_q": 1.0}, 1.0, 1e-3)
    assert rep.max_dev <= 1e-9
    assert rep.hj_trajectory["q"][-1] == pytest.approx(1.0, abs=1e-12)


def test_zero_horizon():
    pair = parametrize(make("0.5*v_q^2 - 0.5*q^2"))
    rep = verify_equivalence(pair, {"q": 1.0, "v_q": 0.3}, 0.0, 1e-3)
    assert rep.max_dev_q == 0.0 and rep.max_dev_p == 0.0
    assert rep.verdict == "equivalent"
    with pytest.raises(ValidationError):
        verify_equivalence(pair, {"q": 1.0, "v_q": 0.3}, -1.0, 1e-3)


def test_forced_oscillator_equivalence():
    pair = parametrize(load_model(corpus.FORCED))
    rep = verify_equivalence(pair, corpus.FORCED["initial"], 2 * math.pi, 1e-3)
    assert rep.explicit_time
    assert rep.verdict == "equivalent"
    # p_t = -H_t changes when H_t depends on t
    assert rep.pt_drift > 1e-3
    assert rep.Hpt_max <= 1e-10


def test_tau_rate_invariance():
    pair = parametrize(corpus.model("coupled"))
    init = complete_initial(pair.base, corpus.REGULAR["coupled"]["initial"])
    a = hj_route(pair, init, 2.0, 1e-3)
    b = hj_route(pair, init, 2.0, 1e-3, tau_rate=2.0)
    assert np.array_equal(a["t"], b["t"])
    for x in ("x", "y", "p_x", "p_y", "p_t"):
        assert np.max(np.abs(a[x] - b[x])) <= 1e-12
    assert np.max(np.abs(evaluate_along(ex.parse("p_t") + build_extended_hj(pair).hamiltonians["t"], a))) <= 1e-10


def test_report_fields():
    pair = parametrize(make("0.5*v_q^2"))
    d = verify_equivalence(pair, {"q": 0.0, "v_q": 1.0}, 0.1, 1e-3).to_dict()
    assert {"model", "horizon", "step", "max_dev_q", "max_dev_p", "pt_drift", "Hpt_max", "verdict"} <= set(d)
