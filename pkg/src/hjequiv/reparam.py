"""Parametrization-invariant extension of a regular Lagrangian.

Time becomes the last coordinate ``t`` of the extended model, with the new
evolution parameter ``tau``; the extended Lagrangian is
``v_t * L(q, v_q / v_t, t)``.  Keeping ``t`` last makes it the degenerate
coordinate picked by :func:`hjequiv.model.rank_and_split`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import expr as ex
from .errors import NotRegularError, SplitError, ValidationError
from .expr import Expr
from .fieldsys import field_euler_lagrange, promote_to_field
from .hj import (
    HJSystem,
    ParameterPath,
    Trajectory,
    build_hamiltonians,
    evaluate_along,
    integrate,
    legendre_invert,
    total_differential_system,
)
from .model import LagrangianModel, analyze, euler_lagrange, explicit_accelerations, momentum_name, velocity_name
from .ode import rk4


@dataclass
class ReparamPair:
    base: LagrangianModel
    extended: LagrangianModel
    provenance: dict

    @property
    def time(self) -> str:
        return self.base.time

    @property
    def tau(self) -> str:
        return self.extended.time


def _fresh_parameter(base: LagrangianModel) -> str:
    taken = set(base.coordinates) | {base.time} | set(base.velocities)
    name = "tau"
    while name in taken or f"v_{name}" in taken:
        name += "_"
    return name


def parametrize(base: LagrangianModel, samples: int | None = None) -> ReparamPair:
    """Promote time to a coordinate: ``L = v_t * base(q, v_q/v_t, t)``."""
    split = analyze(base, samples)
    if split.deficiency != 0:
        raise NotRegularError(f"{base.name} is singular (Hessian rank {split.rank} of {base.n})")
    t = base.time
    vt = ex.sym(velocity_name(t))
    sub = {v: ex.sym(v) / vt for v in base.velocities}
    lag = ex.simplify(vt * ex.substitute(base.lagrangian, sub))
    ext = LagrangianModel(
        name=f"{base.name}-reparametrized",
        coordinates=base.coordinates + (t,),
        lagrangian=lag,
        time=_fresh_parameter(base),
        parameter=None,
    )
    ext_split = analyze(ext, samples)
    if ext_split.deficiency != 1:
        raise SplitError(f"extended model has Hessian deficiency {ext_split.deficiency}, expected 1")
    provenance = {v: ex.to_text(e) for v, e in sub.items()}
    provenance[t] = t
    return ReparamPair(base, ext, provenance)


def homogeneity_residual(m: LagrangianModel) -> Expr:
    """Euler-identity residual ``sum v dL/dv - L``."""
    return ex.simplify(ex.add_all(ex.sym(v) * ex.differentiate(m.lagrangian, v) for v in m.velocities)
                       - m.lagrangian)


def homogeneity_check(pair_or_model) -> ex.ZeroTest:
    m = pair_or_model.extended if isinstance(pair_or_model, ReparamPair) else pair_or_model
    return ex.is_identically_zero(homogeneity_residual(m))


def direct_time_hamiltonian(base: LagrangianModel, samples: int | None = None) -> Expr:
    """``H_t = p w - L(q, w, t)`` from the base model's own Legendre map."""
    split = analyze(base, samples)
    w = legendre_invert(base, split)
    lw = ex.substitute(base.lagrangian, {velocity_name(c): w[c] for c in base.coordinates})
    return ex.simplify(ex.add_all(ex.sym(momentum_name(c)) * w[c] for c in base.coordinates) - lw)


def build_extended_hj(pair: ReparamPair, samples: int | None = None) -> HJSystem:
    """HJ system of the extended model, cross-checked against the direct ``H_t``.

    Also checks that ``p_q v_q + p_t v_t - L`` vanishes once the momenta are
    the Lagrangian ones and ``p_t = -H_t``; that is what leaves ``H'_0 = p_tau``.
    """
    ext = pair.extended
    split = analyze(ext, samples)
    if split.degenerate_coords != (pair.time,):
        raise SplitError(f"expected {pair.time!r} as the degenerate coordinate, got {split.degenerate_coords}")
    sys_ = build_hamiltonians(ext, split, legendre_invert(ext, split))
    direct = direct_time_hamiltonian(pair.base, samples)
    zt = ex.is_identically_zero(sys_.hamiltonians[pair.time] - direct)
    if not zt.is_zero:
        raise SplitError(f"H_{pair.time} routes disagree: {sys_.hamiltonians[pair.time]} vs {direct} at {zt.witness}")
    mom = {momentum_name(c): ex.differentiate(ext.lagrangian, velocity_name(c)) for c in pair.base.coordinates}
    ht = ex.substitute(sys_.hamiltonians[pair.time], mom)
    bracket = ex.add_all(ex.sym(momentum_name(c)) * ex.sym(velocity_name(c)) for c in pair.base.coordinates)
    bracket = ex.substitute(bracket, mom) - ht * ex.sym(velocity_name(pair.time)) - ext.lagrangian
    zt = ex.is_identically_zero(bracket)
    if not zt.is_zero:
        raise SplitError(f"H'_{pair.tau} does not reduce to p_{pair.tau}: residual at {zt.witness}")
    return sys_


def reduction_check(pair: ReparamPair, samples: int | None = None) -> dict:
    """Reduced field Euler-Lagrange residual minus ``v_t`` times the base residual, per coordinate."""
    split = analyze(pair.extended, samples)
    f = promote_to_field(pair.extended, split)
    fel = field_euler_lagrange(f, keep=pair.time)
    base = euler_lagrange(pair.base).residuals
    vt = ex.sym(velocity_name(pair.time))
    return {c: ex.is_identically_zero(fel.reduced[c] - vt * base[c]) for c in pair.base.coordinates}


@dataclass
class EquivalenceReport:
    model: str
    horizon: float
    step: float
    max_dev_q: float
    max_dev_p: float
    pt_drift: float
    Hpt_max: float
    verdict: str
    explicit_time: bool
    hj_trajectory: Trajectory
    el_times: np.ndarray
    el_states: np.ndarray
    el_momenta: np.ndarray
    message: str = ""

    @property
    def max_dev(self) -> float:
        return max(self.max_dev_q, self.max_dev_p)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "horizon": self.horizon,
            "step": self.step,
            "max_dev_q": self.max_dev_q,
            "max_dev_p": self.max_dev_p,
            "pt_drift": self.pt_drift,
            "Hpt_max": self.Hpt_max,
            "verdict": self.verdict,
            "explicit_time": self.explicit_time,
            "message": self.message,
        }


def lagrangian_route(base: LagrangianModel, initial: Mapping[str, float], horizon: float, step: float):
    """RK4 of the base Euler-Lagrange explicit form over ``[t0, t0 + horizon]``; states are ``(q..., v...)``."""
    acc = explicit_accelerations(base)
    coords = base.coordinates
    names = coords + base.velocities + (base.time,)
    fa = ex.compile_exprs([acc[c] for c in coords], names)
    t0 = float(initial.get(base.time, 0.0))
    n = len(coords)

    def rhs(t, y):
        return np.concatenate([y[n:], fa(*y, t)])

    y0 = [float(initial[c]) for c in coords] + [float(initial[v]) for v in base.velocities]
    return rk4(rhs, y0, t0, horizon, step)


def base_momenta(base: LagrangianModel):
    """Compiled ``p = dL/dv`` over ``(q..., v..., t)``."""
    names = base.coordinates + base.velocities + (base.time,)
    exprs = [ex.differentiate(base.lagrangian, v) for v in base.velocities]
    return ex.compile_exprs(exprs, names)


def complete_initial(base: LagrangianModel, initial: Mapping[str, float], samples: int | None = None) -> dict:
    """Fill in velocities from momenta (or momenta from velocities) through the base Legendre map."""
    out = {k: float(v) for k, v in initial.items()}
    out.setdefault(base.time, 0.0)
    missing = [c for c in base.coordinates if c not in out]
    if missing:
        raise ValidationError(f"initial data misses {missing}")
    need_v = [c for c in base.coordinates if velocity_name(c) not in out]
    if need_v:
        if any(momentum_name(c) not in out for c in need_v):
            raise ValidationError(f"initial data needs a velocity or momentum for each of {list(need_v)}")
        w = legendre_invert(base, analyze(base, samples))
        names = base.coordinates + tuple(momentum_name(c) for c in base.coordinates) + (base.time,)
        fw = ex.compile_exprs([w[c] for c in base.coordinates], names)
        vals = fw(*[out[c] for c in base.coordinates], *[out.get(momentum_name(c), 0.0) for c in base.coordinates],
                  out[base.time])
        for c, v in zip(base.coordinates, vals):
            if c in need_v:
                out[velocity_name(c)] = float(v)
    pm = base_momenta(base)(*[out[x] for x in base.coordinates + base.velocities], out[base.time])
    for c, p in zip(base.coordinates, pm):
        key = momentum_name(c)
        if key in out and not math.isclose(out[key], p, rel_tol=1e-9, abs_tol=1e-12):
            raise ValidationError(f"initial {key}={out[key]} disagrees with dL/dv = {p}")
        out[key] = float(p)
    return out


def hj_route(pair: ReparamPair, initial: Mapping[str, float], horizon: float, step: float,
             tau_rate: float = 1.0, sys_: HJSystem | None = None) -> Trajectory:
    """Extended total differential equations along ``tau = tau_rate * s``, ``t = t0 + s``.

    ``initial`` must already hold q, p and the base time (see :func:`complete_initial`).
    """
    sys_ = sys_ or build_extended_hj(pair)
    tds = total_differential_system(sys_)
    base = pair.base
    start = {x: float(initial[x]) for x in base.coordinates}
    start.update({momentum_name(c): float(initial[momentum_name(c)]) for c in base.coordinates})
    path = ParameterPath.linear(sys_.params, [0.0, float(initial[base.time])], [tau_rate, 1.0], horizon)
    return integrate(tds, start, path, step)


def verify_equivalence(pair: ReparamPair, initial: Mapping[str, float], horizon: float, step: float,
                       tol: float = 1e-6, constraint_tol: float = 1e-10,
                       samples: int | None = None) -> EquivalenceReport:
    """Integrate the extended HJ equations and the base Euler-Lagrange equations side by side.

    ``initial`` binds every base coordinate and either its velocity or its
    momentum (the base time defaults to 0).  The HJ route starts from the
    Legendre image of the velocities with ``p_t = -H_t``.
    """
    if horizon < 0:
        raise ValidationError("horizon must be non-negative")
    base = pair.base
    init = complete_initial(base, initial, samples)
    sys_ = build_extended_hj(pair, samples)
    traj = hj_route(pair, init, horizon, step, sys_=sys_)

    el = lagrangian_route(base, init, horizon, step)
    pmap = base_momenta(base)
    el_p = np.array([pmap(*row, t) for row, t in zip(el.y, el.s)]).reshape(len(el.s), base.n)
    failed = traj.failed or el.failed
    k = min(len(traj.s), len(el.s))
    n = base.n
    q_a = np.column_stack([traj[c][:k] for c in base.coordinates])
    p_a = np.column_stack([traj[momentum_name(c)][:k] for c in base.coordinates])
    dev_q = float(np.max(np.abs(q_a - el.y[:k, :n])))
    dev_p = float(np.max(np.abs(p_a - el_p[:k])))
    pt_name = momentum_name(pair.time)
    pt = traj[pt_name]
    pt_drift = float(np.max(np.abs(pt - pt[0])))
    ht = sys_.hamiltonians[pair.time]
    hpt = float(np.max(np.abs(evaluate_along(ex.sym(pt_name) + ht, traj))))
    explicit_time = pair.time in ex.symbols(ht)
    ok = (not failed and dev_q <= tol and dev_p <= tol and hpt <= constraint_tol
          and (explicit_time or pt_drift <= constraint_tol))
    verdict = "equivalent" if ok else ("failed" if failed else "not-equivalent")
    return EquivalenceReport(
        model=base.name, horizon=float(horizon), step=float(step),
        max_dev_q=dev_q, max_dev_p=dev_p, pt_drift=pt_drift, Hpt_max=hpt, verdict=verdict,
        explicit_time=explicit_time, hj_trajectory=traj, el_times=el.s, el_states=el.y, el_momenta=el_p,
        message=traj.message or el.message,
    )
