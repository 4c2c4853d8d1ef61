import io
import math

import numpy as np
import pytest
from scipy.integrate import simpson

from hjequiv import corpus
from hjequiv import expr as ex
from hjequiv.errors import NonAffineMomentaError, ValidationError
from hjequiv.hj import (
    ParameterPath,
    build_system,
    default_path,
    evaluate_along,
    integrability_report,
    integrate,
    legendre_invert,
    total_differential_system,
    total_variation,
)
from hjequiv.model import LagrangianModel, analyze, load_model
from hjequiv.reparam import complete_initial, parametrize


def make(lag, coords=("q",), time="t"):
    return LagrangianModel("m", coords, ex.parse(lag), time=time)


def same(a, b):
    return ex.is_identically_zero(a - (ex.parse(b) if isinstance(b, str) else b)).is_zero


REPARAM_FREE = make("0.5*v_q^2/v_t", coords=("q", "t"), time="tau")
REPARAM_OSC = make("0.5*v_q^2/v_t - 0.5*v_t*q^2", coords=("q", "t"), time="tau")
SECONDARY = load_model(corpus.CONTROLS["secondary"])


# -- Legendre inversion and Hamiltonians -------------------------------------------

def test_oscillator_inversion():
    m = make("0.5*v_q^2 - 0.5*q^2")
    assert legendre_invert(m, analyze(m)) == {"q": ex.sym("p_q")}


def test_inversion_with_parameter_velocity():
    m = make("0.5*(v_q1 + v_q2)^2", coords=("q1", "q2"))
    split = analyze(m)
    assert split.degenerate_coords == ("q2",)
    w = legendre_invert(m, split)
    assert same(w["q1"], "p_q1 - v_q2")


def test_non_affine_momenta_rejected():
    m = make("v_q^4")
    with pytest.raises(NonAffineMomentaError, match=r"4\*v_q\^3"):
        build_system(m)


def test_regular_oscillator_hamiltonian():
    s = build_system(make("0.5*v_q^2 - 0.5*q^2"))
    assert s.params == ("t",)
    assert s.degenerate == ()
    assert same(s.hamiltonians["t"], "0.5*p_q^2 + 0.5*q^2")


def test_reparametrized_free_particle_hamiltonians():
    s = build_system(REPARAM_FREE)
    assert s.params == ("tau", "t")
    assert same(s.hamiltonians["t"], "p_q^2/2")
    assert same(s.primed["t"], "p_t + p_q^2/2")
    assert same(s.hamiltonians["tau"], "0")


def test_reparametrized_oscillator_hamiltonian():
    s = build_system(REPARAM_OSC)
    assert same(s.hamiltonians["t"], "p_q^2/2 + q^2/2")


@pytest.mark.parametrize("m", [REPARAM_FREE, REPARAM_OSC, SECONDARY], ids=["free", "osc", "secondary"])
def test_system_invariants(m):
    s = build_system(m)
    for a in s.params:
        assert same(s.primed[a], ex.sym(f"p_{a}") + s.hamiltonians[a])
    # w inverts the momentum map
    mom = {f"p_{c}": ex.differentiate(m.lagrangian, f"v_{c}") for c in s.regular}
    for c in s.regular:
        assert same(ex.substitute(s.w[c], mom), ex.sym(f"v_{c}"))


# -- total differential system --------------------------------------------------

def test_oscillator_tds_is_hamilton():
    tds = total_differential_system(build_system(make("0.5*v_q^2 - 0.5*q^2")))
    assert tds.coefficients["q"]["t"] == ex.sym("p_q")
    assert tds.coefficients["p_q"]["t"] == ex.simplify(ex.parse("-q"))


def test_reparametrized_free_tds():
    s = build_system(REPARAM_FREE)
    tds = total_differential_system(s)
    c = tds.coefficients
    assert c["q"]["t"] == ex.sym("p_q") and c["q"]["tau"] == ex.ZERO
    assert c["p_q"]["t"] == ex.ZERO and c["p_t"]["t"] == ex.ZERO
    assert same(c["z"]["t"], "p_q^2/2")
    assert c["z"]["tau"] == ex.ZERO
    for m in (REPARAM_OSC, SECONDARY):
        sy = build_system(m)
        td = total_differential_system(sy)
        for q, p in zip(sy.regular, sy.momenta):
            for a in sy.params:
                assert td.coefficients[q][a] == ex.differentiate(sy.primed[a], p)


# -- integrability ---------------------------------------------------------------

@pytest.mark.parametrize("m", [REPARAM_FREE, REPARAM_OSC], ids=["free", "osc"])
def test_reparametrized_closes_at_round_zero(m):
    rep = integrability_report(build_system(m))
    assert rep.status == "closed"
    assert rep.closed_at == 0
    assert rep.constraints == []


def poisson(f, g, x, n, d=1e-6):
    """Canonical bracket of two phase functions at x = (q..., p...), by central differences."""
    out = 0.0
    for i in range(n):
        e_q, e_p = np.zeros(2 * n), np.zeros(2 * n)
        e_q[i], e_p[n + i] = d, d
        dfq = (f(x + e_q) - f(x - e_q)) / (2 * d)
        dfp = (f(x + e_p) - f(x - e_p)) / (2 * d)
        dgq = (g(x + e_q) - g(x - e_q)) / (2 * d)
        dgp = (g(x + e_p) - g(x - e_p)) / (2 * d)
        out += dfq * dgp - dfp * dgq
    return out


def test_secondary_constraint_matches_dirac_oracle():
    # hand Dirac analysis: primary p_q2 = 0, canonical H = p_q1^2/2 - q2*q1,
    # so {p_q2, H} = q1 and the secondary constraint is q1 = 0
    rep = integrability_report(build_system(SECONDARY))
    assert rep.status == "reduced-configuration"
    assert len(rep.constraints) == 1
    c = rep.constraints[0]
    assert (c.round, c.kind) == (1, "configurational")
    assert c.expression == ex.sym("q1")

    def ham(x):
        q1, q2, p1, p2 = x
        return 0.5 * p1 ** 2 - q2 * q1

    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.uniform(-2, 2, 4)
        br = poisson(lambda y: y[3], ham, x, 2)
        assert br == pytest.approx(ex.evaluate(c.expression, {"q1": x[0]}), abs=1e-6)


def test_momentum_linear_constraints_are_iterated():
    m = make("0.5*v_x^2 + 0.5*v_y^2 + v_z*x", coords=("x", "y", "z"))
    s = build_system(m)
    capped = integrability_report(s, max_iter=1)
    assert capped.status == "non-closing"
    assert [c.expression for c in capped.constraints] == [ex.sym("p_x")]
    assert capped.constraints[0].kind == "momentum-linear"
    full = integrability_report(s, max_iter=5)
    # p_x = 0 is not preserved along dz: the system has no solution
    assert full.status == "inconsistent"
    assert full.constraints[1].round == 2


def test_total_variation_of_explicit_time_function():
    s = build_system(make("0.5*v_q^2 - 0.5*q^2"))
    tds = total_differential_system(s)
    tv = total_variation(ex.parse("q*t"), tds)
    assert same(tv["t"], "q + t*p_q")


# -- integration -------------------------------------------------------------------

def test_reparametrized_oscillator_quarter_period():
    s = build_system(REPARAM_OSC)
    tds = total_differential_system(s)
    path = ParameterPath.linear(s.params, [0.0, 0.0], [1.0, 1.0], math.pi / 2)
    tr = integrate(tds, {"q": 1.0, "p_q": 0.0}, path, 1e-3)
    assert abs(tr["q"][-1]) <= 1e-6
    assert np.max(np.abs(tr["q"] - np.cos(tr["t"]))) <= 1e-6
    assert np.max(np.abs(evaluate_along(s.primed["t"], tr))) <= 1e-10


def test_free_particle_action():
    s = build_system(make("0.5*v_q^2"))
    tr = integrate(total_differential_system(s), {"q": 0.0, "p_q": 1.0}, default_path(s, 1.0), 1e-3)
    assert tr["q"][-1] == pytest.approx(1.0, abs=1e-8)
    assert tr["z"][-1] == pytest.approx(0.5, abs=1e-8)


def test_zero_length_path():
    s = build_system(REPARAM_OSC)
    tds = total_differential_system(s)
    tr = integrate(tds, {"q": 0.3, "p_q": 0.2}, ParameterPath.linear(s.params, [0, 0], [1, 1], 0.0), 1e-3)
    assert len(tr.s) == 1
    assert tr["q"][0] == 0.3 and tr["p_q"][0] == 0.2 and tr["z"][0] == 0.0
    assert tr["p_t"][0] == pytest.approx(-(0.5 * 0.2 ** 2 + 0.5 * 0.3 ** 2))


def test_tau_path_invariance():
    s = build_system(REPARAM_OSC)
    tds = total_differential_system(s)
    a = integrate(tds, {"q": 1.0, "p_q": 0.2}, ParameterPath.linear(s.params, [0, 0], [1, 1], 2.0), 1e-3)
    b = integrate(tds, {"q": 1.0, "p_q": 0.2}, ParameterPath.linear(s.params, [0, 0], [2, 1], 2.0), 1e-3)
    assert np.array_equal(a["t"], b["t"])
    for x in ("q", "p_q"):
        assert np.max(np.abs(a[x] - b[x])) <= 1e-12


def test_piecewise_path():
    s = build_system(REPARAM_OSC)
    tds = total_differential_system(s)
    path = ParameterPath(s.params, [0.0, 1.0, 2.0], [[0, 0], [1, 0], [1, 1]])
    tr = integrate(tds, {"q": 1.0, "p_q": 0.0}, path, 1e-3)
    # only the second leg advances t, so q follows cos over one unit of t
    assert tr["q"][-1] == pytest.approx(math.cos(1.0), abs=1e-9)
    with pytest.raises(ValidationError):
        ParameterPath(s.params, [0.0, 0.0], [[0, 0], [1, 1]])


@pytest.mark.parametrize("key", sorted(corpus.REGULAR) + ["forced_oscillator"])
def test_action_matches_quadrature(key):
    doc = corpus.documents()[key]
    base = load_model(doc)
    pair = parametrize(base)
    s = build_system(pair.extended)
    init = complete_initial(base, doc["initial"])
    path = ParameterPath.linear(s.params, [0.0, 0.0], [1.0, 1.0], 2 * math.pi)
    start = {x: init[x] for x in s.regular + s.momenta}
    tr = integrate(total_differential_system(s), start, path, 1e-3)
    # L(q, q-dot, t) with q-dot recovered from the base Legendre map
    w = legendre_invert(base, analyze(base))
    lw = ex.substitute(base.lagrangian, {f"v_{c}": w[c] for c in base.coordinates})
    lag = evaluate_along(lw, tr)
    assert abs(tr["z"][-1] - simpson(lag, x=tr["t"])) <= 1e-6


def test_integration_failure_truncates():
    s = build_system(make("0.5*v_q^2 - ln(q)"))
    tr = integrate(total_differential_system(s), {"q": 0.5, "p_q": 0.0}, default_path(s, 5.0), 1e-3)
    assert tr.failed
    assert tr.message
    assert np.all(np.isfinite(tr.states))
    assert np.all(np.diff(tr.s) > 0)


def test_integrate_rejects_bad_input():
    s = build_system(REPARAM_OSC)
    tds = total_differential_system(s)
    path = ParameterPath.linear(s.params, [0, 0], [1, 1], 1.0)
    with pytest.raises(ValidationError):
        integrate(tds, {"q": 1.0}, path, 1e-3)
    with pytest.raises(ValidationError):
        integrate(tds, {"q": 1.0, "p_q": 0.0}, path, 0.0)


def test_trajectory_csv_format():
    s = build_system(REPARAM_FREE)
    tr = integrate(total_differential_system(s), {"q": 0.0, "p_q": 1.0},
                   ParameterPath.linear(s.params, [0, 0], [1, 1], 0.01), 1e-3)
    text = tr.to_csv()
    rows = text.splitlines()
    assert rows[0] == "s,tau,t,q,p_q,p_tau,p_t,z"
    assert len(rows) == 12
    last = rows[-1].split(",")
    assert float(last[3]) == tr["q"][-1]
    buf = io.StringIO()
    tr.to_csv(buf)
    assert buf.getvalue() == text
