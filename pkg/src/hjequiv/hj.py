"""Hamilton-Jacobi treatment of singular Lagrangians.

The parameters ``t_alpha`` are ordered ``[time, q_mu...]``: the model's own
evolution parameter first, then the degenerate coordinates in coordinate
order.  Each parameter ``x`` has a momentum ``p_x`` and a Hamiltonian
``H_x``; the generators are ``H'_x = p_x + H_x``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import (
    InconsistentDegeneracyError,
    NonAffineMomentaError,
    NotInvertibleError,
    SplitError,
    ValidationError,
)
from .expr import Expr
from .model import (
    HessianAnalysis,
    LagrangianModel,
    analyze,
    momentum_name,
    solve_linear,
    velocity_name,
)
from .ode import rk4, step_grid


# ---------------------------------------------------------------------------
# Legendre inversion and Hamiltonians

def legendre_invert(m: LagrangianModel, split: HessianAnalysis) -> dict:
    """Regular velocities as functions of momenta, ``{coord: w_coord}``.

    The momenta ``p_a = dL/dv_a`` of the regular sector must be affine in the
    regular velocities; their coefficients may depend on coordinates, time
    and the degenerate velocities.
    """
    regular = split.regular_coords
    v_reg = [velocity_name(c) for c in regular]
    v_set = set(v_reg)
    momenta = [ex.differentiate(m.lagrangian, v) for v in v_reg]
    block = [[split.matrix[i][j] for j in split.regular] for i in split.regular]
    for a, row in enumerate(block):
        for entry in row:
            for v in sorted(ex.symbols(entry) & v_set):
                if not ex.is_identically_zero(ex.differentiate(entry, v)).is_zero:
                    raise NonAffineMomentaError(
                        f"momentum {momentum_name(regular[a])} = {momenta[a]} is not affine in the velocities"
                    )
    zero_v = {v: ex.ZERO for v in v_reg}
    offsets = [ex.simplify(ex.substitute(p, zero_v)) for p in momenta]
    rhs = [ex.sym(momentum_name(c)) - off for c, off in zip(regular, offsets)]
    try:
        w = solve_linear(block, rhs)
    except NotInvertibleError as exc:
        raise SplitError(f"regular sector of {m.name} is not invertible: {exc}") from exc
    back = {v: wv for v, wv in zip(v_reg, w)}
    for c, p in zip(regular, momenta):
        residual = ex.substitute(p, back) - ex.sym(momentum_name(c))
        if not ex.is_identically_zero(residual).is_zero:
            raise SplitError(f"Legendre inversion of {momentum_name(c)} failed to reproduce the momentum")
    return dict(zip(regular, w))


def _velocity_free(e: Expr, velocities: Sequence[str], what: str) -> Expr:
    e = ex.simplify(e)
    present = sorted(ex.symbols(e) & set(velocities))
    for v in present:
        zt = ex.is_identically_zero(ex.differentiate(e, v))
        if not zt.is_zero:
            raise InconsistentDegeneracyError(f"{what} = {e} depends on the parameter velocity {v}")
    if present:
        e = ex.simplify(ex.substitute(e, {v: ex.ONE for v in present}))
    return e


@dataclass
class HJSystem:
    model: LagrangianModel
    split: HessianAnalysis
    params: tuple
    regular: tuple
    w: dict
    hamiltonians: dict

    @property
    def time(self) -> str:
        return self.params[0]

    @property
    def degenerate(self) -> tuple:
        return self.params[1:]

    @property
    def momenta(self) -> tuple:
        return tuple(momentum_name(c) for c in self.regular)

    @property
    def param_momenta(self) -> tuple:
        return tuple(momentum_name(x) for x in self.params)

    @property
    def degenerate_velocities(self) -> tuple:
        return tuple(velocity_name(c) for c in self.degenerate)

    @property
    def primed(self) -> dict:
        return {x: ex.simplify(ex.sym(momentum_name(x)) + h) for x, h in self.hamiltonians.items()}

    @property
    def phase_symbols(self) -> tuple:
        """Symbols the Hamiltonians may depend on: parameters, q_a, p_a."""
        return self.params + self.regular + self.momenta

    def to_dict(self) -> dict:
        return {
            "model": self.model.name,
            "parameters": list(self.params),
            "regular": list(self.regular),
            "degenerate": list(self.degenerate),
            "w": {velocity_name(c): ex.to_text(e) for c, e in self.w.items()},
            "H": {x: ex.to_text(e) for x, e in self.hamiltonians.items()},
            "H_prime": {x: ex.to_text(e) for x, e in self.primed.items()},
        }


def build_hamiltonians(m: LagrangianModel, split: HessianAnalysis, w: Mapping[str, Expr]) -> HJSystem:
    """``H_mu = -dL/dv_mu`` and ``H_0 = p_a w_a - H_mu v_mu - L`` at ``v_a = w_a``."""
    params = (m.time,) + split.degenerate_coords
    regular = split.regular_coords
    vmu = [velocity_name(c) for c in split.degenerate_coords]
    on_w = {velocity_name(c): w[c] for c in regular}
    l_w = ex.substitute(m.lagrangian, on_w)
    hams = {}
    for c, v in zip(split.degenerate_coords, vmu):
        h = -ex.substitute(ex.differentiate(m.lagrangian, v), on_w)
        hams[c] = _velocity_free(h, vmu, f"H_{c}")
    h0 = ex.add_all([ex.sym(momentum_name(c)) * w[c] for c in regular])
    for c, v in zip(split.degenerate_coords, vmu):
        h0 = h0 - hams[c] * ex.sym(v)
    h0 = h0 - l_w
    hams = {m.time: _velocity_free(h0, vmu, f"H_{m.time}"), **hams}
    sys_ = HJSystem(m, split, params, regular, dict(w), hams)
    stray = set().union(*(ex.symbols(h) for h in hams.values())) - set(sys_.phase_symbols)
    if stray:
        raise InconsistentDegeneracyError(f"Hamiltonians depend on {sorted(stray)}")
    return sys_


def build_system(m: LagrangianModel, samples: int | None = None) -> HJSystem:
    split = analyze(m, samples)
    return build_hamiltonians(m, split, legendre_invert(m, split))


# ---------------------------------------------------------------------------
# total differential equations

@dataclass
class TotalDifferentialSystem:
    """``dx = sum_alpha A[x][alpha] dt_alpha`` for x in q_a, p_a, p_alpha, z."""

    system: HJSystem
    variables: tuple
    coefficients: dict

    @property
    def params(self) -> tuple:
        return self.system.params

    def coefficient_function(self):
        """Compiled ``f(*t_alpha, *q_a, *p_a)`` returning the flat (variable-major) coefficients."""
        flat = [self.coefficients[x][a] for x in self.variables for a in self.params]
        return ex.compile_exprs(flat, self.system.phase_symbols)

    def to_dict(self) -> dict:
        return {x: {a: ex.to_text(e) for a, e in row.items()} for x, row in self.coefficients.items()}


def total_differential_system(sys_: HJSystem) -> TotalDifferentialSystem:
    primed = sys_.primed
    coeffs = {}
    for c, p in zip(sys_.regular, sys_.momenta):
        coeffs[c] = {a: ex.differentiate(primed[a], p) for a in sys_.params}
    for c, p in zip(sys_.regular, sys_.momenta):
        coeffs[p] = {a: ex.simplify(-ex.differentiate(primed[a], c)) for a in sys_.params}
    for b, pb in zip(sys_.params, sys_.param_momenta):
        coeffs[pb] = {a: ex.simplify(-ex.differentiate(primed[a], b)) for a in sys_.params}
    coeffs["z"] = {
        a: ex.simplify(-sys_.hamiltonians[a] + ex.add_all(
            ex.sym(p) * coeffs[c][a] for c, p in zip(sys_.regular, sys_.momenta)))
        for a in sys_.params
    }
    variables = sys_.regular + sys_.momenta + sys_.param_momenta + ("z",)
    return TotalDifferentialSystem(sys_, variables, coeffs)


def total_variation(phi: Expr, tds: TotalDifferentialSystem) -> dict:
    """Coefficients of ``dt_beta`` in the total variation of ``phi``.

    Differentials of q_a, p_a and p_alpha are eliminated with the total
    differential system; ``phi`` may depend on the parameters explicitly.
    """
    sys_ = tds.system
    present = ex.symbols(phi)
    dependents = [x for x in sys_.regular + sys_.momenta + sys_.param_momenta if x in present]
    partials = {x: ex.differentiate(phi, x) for x in dependents}
    out = {}
    for b in sys_.params:
        terms = [ex.differentiate(phi, b)] if b in present else []
        for x in dependents:
            a = tds.coefficients[x][b]
            if not a.is_zero_const() and not partials[x].is_zero_const():
                terms.append(partials[x] * a)
        out[b] = ex.simplify(ex.add_all(terms))
    return out


# ---------------------------------------------------------------------------
# integrability

@dataclass
class Constraint:
    id: str
    expression: Expr
    round: int
    kind: str
    source: str

    def to_dict(self) -> dict:
        return {"id": self.id, "expression": ex.to_text(self.expression), "round": self.round,
                "kind": self.kind, "source": self.source}


@dataclass
class IntegrabilityReport:
    """Outcome of the consistency loop.

    ``status`` is ``closed`` (every variation vanishes), ``reduced-configuration``
    (a constraint free of momenta appeared), ``nonlinear-momentum`` (a new
    constraint is nonlinear in the momenta), ``inconsistent`` (a nonzero
    constant has to vanish) or ``non-closing`` (iteration cap).
    """

    status: str
    closed_at: int | None
    rounds: list
    constraints: list
    notes: list = field(default_factory=list)

    @property
    def closed(self) -> bool:
        return self.status == "closed"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "closed_at": self.closed_at,
            "rounds": self.rounds,
            "constraints": [c.to_dict() for c in self.constraints],
            "notes": list(self.notes),
        }


SIGN_NOTE = ("dp_a = -dH'_alpha/dq_a dt_alpha is used for every parameter, including the"
             " dq^0 term whose sign is printed inconsistently in the reparametrized equations")


def _is_multiple(a: Expr, b: Expr) -> bool:
    ratio = ex.simplify(a / b)
    return all(ex.is_identically_zero(ex.differentiate(ratio, s)).is_zero for s in ex.symbols(ratio))


def _classify(e: Expr, momenta: Sequence[str]) -> str:
    if e.is_const:
        return "inconsistent"
    present = [p for p in momenta if p in ex.symbols(e)]
    if not present:
        return "configurational"
    for p in present:
        second = ex.differentiate(ex.differentiate(e, p), p)
        if not ex.is_identically_zero(second).is_zero:
            return "momentum-nonlinear"
    return "momentum-linear"


def integrability_report(sys_: HJSystem, max_iter: int = 5,
                         tds: TotalDifferentialSystem | None = None) -> IntegrabilityReport:
    """Test dH'_alpha = 0 along the total differential system, iterating on new constraints.

    Round 0 checks the generators H'_alpha; constraints found there belong to
    round 1, and so on.  Momentum-linear constraints are adjoined and tested
    in turn; a configurational constraint ends the loop.
    """
    tds = tds or total_differential_system(sys_)
    momenta = sys_.momenta + sys_.param_momenta
    pending = [(f"H'_{a}", h) for a, h in sys_.primed.items()]
    constraints: list[Constraint] = []
    rounds = []
    rnd = 0
    while True:
        record = {"round": rnd, "checks": []}
        found = []
        for name, g in pending:
            for b, c in total_variation(g, tds).items():
                zt = ex.is_identically_zero(c)
                record["checks"].append({"generator": name, "parameter": b,
                                         "coefficient": ex.to_text(c), **zt.to_dict()})
                if not zt.is_zero:
                    found.append((name, b, ex.monic(c)))
        rounds.append(record)
        new: list[Constraint] = []
        for name, b, c in found:
            if any(_is_multiple(c, k.expression) for k in constraints + new):
                continue
            new.append(Constraint(f"C{len(constraints) + len(new) + 1}", c, rnd + 1,
                                  _classify(c, momenta), f"d{name}/d{b}"))
        if not new:
            return IntegrabilityReport("closed", rnd, rounds, constraints, [SIGN_NOTE])
        constraints.extend(new)
        kinds = {k.kind for k in new}
        if "inconsistent" in kinds:
            return IntegrabilityReport("inconsistent", None, rounds, constraints,
                                       [SIGN_NOTE, "a nonzero constant must vanish: the equations have no solution"])
        if "configurational" in kinds:
            return IntegrabilityReport("reduced-configuration", None, rounds, constraints,
                                       [SIGN_NOTE, "configurational constraints are reported, not eliminated"])
        if "momentum-nonlinear" in kinds:
            return IntegrabilityReport("nonlinear-momentum", None, rounds, constraints, [SIGN_NOTE])
        rnd += 1
        if rnd >= max_iter:
            return IntegrabilityReport("non-closing", None, rounds, constraints,
                                       [SIGN_NOTE, f"iteration cap {max_iter} reached"])
        pending = [(k.id, k.expression) for k in new]


# ---------------------------------------------------------------------------
# integration

class ParameterPath:
    """Piecewise-linear map ``s -> t_alpha(s)`` through the given knots."""

    def __init__(self, params: Sequence[str], knots: Sequence[float], values):
        self.params = tuple(params)
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float).reshape(len(self.knots), len(self.params))
        if self.knots.ndim != 1 or len(self.knots) < 1:
            raise ValidationError("a path needs at least one knot")
        if np.any(np.diff(self.knots) <= 0) or self.knots[0] != 0:
            raise ValidationError("path knots must start at 0 and increase strictly")

    @classmethod
    def linear(cls, params, start, rates, length: float) -> "ParameterPath":
        start = np.asarray(start, dtype=float)
        if length == 0:
            return cls(params, [0.0], [start])
        end = start + length * np.asarray(rates, dtype=float)
        return cls(params, [0.0, length], [start, end])

    @property
    def length(self) -> float:
        return float(self.knots[-1])

    def _segment(self, s: float) -> int:
        k = int(np.searchsorted(self.knots, s, side="right")) - 1
        return min(max(k, 0), max(len(self.knots) - 2, 0))

    def at(self, s: float) -> np.ndarray:
        if len(self.knots) == 1:
            return self.values[0]
        k = self._segment(s)
        frac = (s - self.knots[k]) / (self.knots[k + 1] - self.knots[k])
        return self.values[k] + frac * (self.values[k + 1] - self.values[k])

    def rate(self, s: float) -> np.ndarray:
        if len(self.knots) == 1:
            return np.zeros(len(self.params))
        k = self._segment(s)
        return (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])


def default_path(sys_: HJSystem, length: float, start: Mapping[str, float] | None = None) -> ParameterPath:
    """``t_0 = t_0(0) + s`` with the degenerate coordinates frozen."""
    start = start or {}
    s0 = [float(start.get(a, 0.0)) for a in sys_.params]
    rates = [1.0] + [0.0] * (len(sys_.params) - 1)
    return ParameterPath.linear(sys_.params, s0, rates, length)


@dataclass
class Trajectory:
    s: np.ndarray
    params: tuple
    t: np.ndarray
    variables: tuple
    states: np.ndarray
    step: float
    integrator: str = "rk4"
    failed: bool = False
    message: str = ""

    def column(self, name: str) -> np.ndarray:
        if name in self.params:
            return self.t[:, self.params.index(name)]
        return self.states[:, self.variables.index(name)]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    @property
    def header(self) -> list:
        return ["s", *self.params, *self.variables]

    def to_csv(self, fh=None) -> str | None:
        """Write ``s, t_alpha..., q..., p..., p_alpha..., z`` with 17 significant digits."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header)
        for k in range(len(self.s)):
            row = [self.s[k], *self.t[k], *self.states[k]]
            w.writerow([f"{x:.17g}" for x in row])
        return fh.getvalue() if own else None


def integrate(tds: TotalDifferentialSystem, initial: Mapping[str, float], path: ParameterPath,
              step: float) -> Trajectory:
    """RK4 along ``path`` of ``dx/ds = sum_alpha A[x][alpha] dt_alpha/ds``.

    ``initial`` must bind q_a and p_a; a missing p_alpha defaults to
    ``-H_alpha`` at the start (the constraint surface) and z to 0.
    """
    sys_ = tds.system
    if step <= 0:
        raise ValidationError("step must be positive")
    if tuple(path.params) != sys_.params:
        raise ValidationError(f"path parameters {path.params} do not match {sys_.params}")
    t0 = path.at(0.0)
    bind = dict(zip(sys_.params, t0.tolist()))
    for x in sys_.regular + sys_.momenta:
        if x not in initial:
            raise ValidationError(f"initial data misses {x!r}")
        bind[x] = float(initial[x])
    y0 = []
    for x in tds.variables:
        if x in initial:
            y0.append(float(initial[x]))
        elif x == "z":
            y0.append(0.0)
        elif x in sys_.param_momenta:
            a = sys_.params[sys_.param_momenta.index(x)]
            y0.append(0.0 - ex.evaluate(sys_.hamiltonians[a], bind))
        else:
            y0.append(bind[x])
    nv, npar = len(tds.variables), len(sys_.params)
    ncanon = 2 * len(sys_.regular)
    fc = tds.coefficient_function()

    # one RK4 run per linear segment, so no stage ever sees the rate of a neighbour
    ss, ys, steps = [np.zeros(1)], [np.asarray([y0], dtype=float)], []
    failed, message = False, ""
    for k in range(len(path.knots) - 1):
        s0, s1 = path.knots[k], path.knots[k + 1]
        v0 = path.values[k]
        rate = (path.values[k + 1] - v0) / (s1 - s0)

        def rhs(s, y, v0=v0, rate=rate, s0=s0):
            t = v0 + (s - s0) * rate
            a = np.asarray(fc(*t, *y[:ncanon]), dtype=float).reshape(nv, npar)
            return a @ rate

        res = rk4(rhs, ys[-1][-1], s0, s1 - s0, step)
        ss.append(res.s[1:])
        ys.append(res.y[1:])
        steps.append(step_grid(s1 - s0, step)[1])
        if res.failed:
            failed, message = True, f"segment {k}, {res.message}"
            break
    s_all = np.concatenate(ss)
    y_all = np.concatenate(ys)
    tvals = np.array([path.at(s) for s in s_all]).reshape(len(s_all), npar)
    return Trajectory(s_all, sys_.params, tvals, tds.variables, y_all, max(steps, default=step),
                      failed=failed, message=message)


def evaluate_along(e: Expr, traj: Trajectory) -> np.ndarray:
    """Values of ``e`` at every sample of ``traj``."""
    names = tuple(traj.params) + tuple(traj.variables)
    f = ex.compile_exprs([e], names)
    return np.array([f(*traj.t[k], *traj.states[k])[0] for k in range(len(traj.s))])
