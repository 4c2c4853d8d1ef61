"""Singular Lagrangians treated as field systems.

The regular coordinates are promoted to functions of every parameter
``t_alpha``.  The partial ``dq_a/dt_alpha`` is the symbol ``d<alpha>_<a>``
and the (symmetric) second partial is ``d<alpha><beta>_<a>`` with the two
parameters in parameter order.  Parameter velocities ``v_mu`` are external
data of the field picture and are held constant by the total partial
derivatives below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import expr as ex
from .errors import NothingToPromoteError
from .expr import Expr
from .hj import HJSystem, TotalDifferentialSystem, total_differential_system, total_variation
from .model import HessianAnalysis, LagrangianModel, accel_name, momentum_name, velocity_name


def partial_name(param: str, coord: str) -> str:
    return f"d{param}_{coord}"


@dataclass
class FieldSystemModel:
    base: LagrangianModel
    split: HessianAnalysis
    params: tuple
    regular: tuple
    lagrangian: Expr
    constraints: dict

    @property
    def rates(self) -> dict:
        """dt_alpha/dt_0 for each parameter."""
        out = {self.params[0]: ex.ONE}
        for c in self.params[1:]:
            out[c] = ex.sym(velocity_name(c))
        return out

    def second_name(self, a: str, b: str, coord: str) -> str:
        i, j = sorted((self.params.index(a), self.params.index(b)))
        return f"d{self.params[i]}{self.params[j]}_{coord}"

    def to_dict(self) -> dict:
        return {
            "parameters": list(self.params),
            "regular": list(self.regular),
            "L_prime": ex.to_text(self.lagrangian),
            "G": {k: ex.to_text(v) for k, v in self.constraints.items()},
        }


def promote_to_field(m: LagrangianModel, split: HessianAnalysis) -> FieldSystemModel:
    """Replace each regular velocity by ``sum_alpha d<alpha>_<a> * dt_alpha/dt_0``.

    Also records ``G_alpha`` computed straight from the Lagrangian:
    ``G_mu = -dL/dv_mu`` and ``G_0 = sum_i v_i dL/dv_i - L``.
    """
    if not split.degenerate:
        raise NothingToPromoteError(f"{m.name} has a regular Hessian; there is nothing to promote")
    params = (m.time,) + split.degenerate_coords
    regular = split.regular_coords
    rates = {params[0]: ex.ONE, **{c: ex.sym(velocity_name(c)) for c in params[1:]}}
    chain = {
        velocity_name(a): ex.add_all(ex.sym(partial_name(p, a)) * rates[p] for p in params)
        for a in regular
    }
    lprime = ex.simplify(ex.substitute(m.lagrangian, chain))
    gs = {m.time: ex.simplify(ex.add_all(ex.sym(v) * ex.differentiate(m.lagrangian, v) for v in m.velocities)
                              - m.lagrangian)}
    for c in split.degenerate_coords:
        gs[c] = ex.simplify(-ex.differentiate(m.lagrangian, velocity_name(c)))
    return FieldSystemModel(m, split, params, regular, lprime, gs)


def total_partial(e: Expr, f: FieldSystemModel, param: str) -> Expr:
    """d/dt_param of ``e`` with the promoted coordinates as fields of t_alpha."""
    terms = [ex.differentiate(e, param)]
    for a in f.regular:
        terms.append(ex.differentiate(e, a) * ex.sym(partial_name(param, a)))
        for b in f.params:
            terms.append(ex.differentiate(e, partial_name(b, a)) * ex.sym(f.second_name(param, b, a)))
    return ex.simplify(ex.add_all(t for t in terms if not t.is_zero_const()))


@dataclass
class FieldEulerLagrange:
    residuals: dict
    reduced: dict
    keep: str

    def to_dict(self) -> dict:
        return {
            "keep": self.keep,
            "residuals": {k: ex.to_text(v) for k, v in self.residuals.items()},
            "reduced": {k: ex.to_text(v) for k, v in self.reduced.items()},
        }


def reduction_map(f: FieldSystemModel, keep: str) -> dict:
    """Substitutions imposing ``q_a = q_a(keep)``: v_a and a_a for the kept partials, 0 otherwise."""
    out = {}
    for a in f.regular:
        for p in f.params:
            out[partial_name(p, a)] = ex.sym(velocity_name(a)) if p == keep else ex.ZERO
            for r in f.params:
                name = f.second_name(p, r, a)
                out[name] = ex.sym(accel_name(a)) if p == r == keep else ex.ZERO
    return out


def field_euler_lagrange(f: FieldSystemModel, keep: str | None = None) -> FieldEulerLagrange:
    """Multi-parameter Euler-Lagrange residuals and their reduction.

    Residual per promoted coordinate::

        sum_alpha d/dt_alpha [dL'/d(d<alpha>_<a>)] - dL'/dq_a

    ``keep`` (default: the last parameter) is the parameter the coordinates
    are taken to depend on in the reduced form.
    """
    keep = keep or f.params[-1]
    residuals = {}
    for a in f.regular:
        terms = [total_partial(ex.differentiate(f.lagrangian, partial_name(p, a)), f, p) for p in f.params]
        residuals[a] = ex.simplify(ex.add_all(terms) - ex.differentiate(f.lagrangian, a))
    red = reduction_map(f, keep)
    reduced = {a: ex.simplify(ex.substitute(r, red)) for a, r in residuals.items()}
    return FieldEulerLagrange(residuals, reduced, keep)


def constraints_from_hamiltonians(f: FieldSystemModel, sys_: HJSystem) -> dict:
    """``H_alpha`` with ``p_a -> dL/dv_a``; should reproduce ``G_alpha``."""
    m = f.base
    sub = {momentum_name(a): ex.differentiate(m.lagrangian, velocity_name(a)) for a in f.regular}
    return {x: ex.simplify(ex.substitute(h, sub)) for x, h in sys_.hamiltonians.items()}


@dataclass
class VariationEntry:
    id: str
    expression: Expr
    lhs: dict
    rhs: Expr
    balanced_by: list
    identically_zero: ex.ZeroTest
    checks: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return not self.balanced_by

    def to_dict(self) -> dict:
        return {
            "constraint_id": self.id,
            "expression": ex.to_text(self.expression),
            "verdict": self.identically_zero.verdict,
            "witness": self.identically_zero.witness,
            "variation": {k: ex.to_text(v) for k, v in self.lhs.items()},
            "rhs": ex.to_text(self.rhs),
            "balanced_by": list(self.balanced_by),
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "flagged": self.flagged,
        }


@dataclass
class VariationReport:
    entries: list

    @property
    def new_constraints(self) -> list:
        return [e for e in self.entries if e.flagged]

    def to_dict(self) -> dict:
        return {"constraints": [e.to_dict() for e in self.entries],
                "new_constraints": [e.id for e in self.new_constraints]}


def constraint_variations(f: FieldSystemModel, sys_: HJSystem,
                          tds: TotalDifferentialSystem | None = None) -> VariationReport:
    """Variations of ``G_alpha`` against ``-dL'/d(t_alpha)``.

    The left side is the total variation of ``H_alpha`` along the total
    differential system.  It is compared with the right side once per
    parameter differential: as a rate per ``d<time>`` (every ``dt_beta``
    written as ``v_beta d<time>``) and as the bare coefficient of each
    ``dt_beta``.  The partials in ``L'`` are mapped to phase space through
    ``d<alpha>_<a> = dH'_alpha/dp_a``.  ``balanced_by`` lists the
    differentials for which the identity holds; an entry that balances for
    none is flagged as a new constraint.
    """
    tds = tds or total_differential_system(sys_)
    rates = f.rates
    to_phase = {}
    for a in f.regular:
        for p in f.params:
            to_phase[partial_name(p, a)] = tds.coefficients[a][p]
    entries = []
    for x in f.params:
        lhs = total_variation(sys_.hamiltonians[x], tds)
        rhs = ex.simplify(-ex.substitute(ex.differentiate(f.lagrangian, x), to_phase))
        forms = {f"d{f.params[0]}": ex.simplify(ex.add_all(lhs[b] * rates[b] for b in f.params))}
        for b in f.params[1:]:
            forms[f"d{b}"] = lhs[b]
        checks = {k: ex.is_identically_zero(v - rhs) for k, v in forms.items()}
        balanced = [k for k, zt in checks.items() if zt.is_zero]
        zero = ex.is_identically_zero(forms[f"d{f.params[0]}"])
        entries.append(VariationEntry(f"G_{x}", f.constraints[x], lhs, rhs, balanced, zero, checks))
    return VariationReport(entries)
