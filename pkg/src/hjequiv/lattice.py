"""A 1+1-dimensional scalar field on a periodic lattice.

The spatial integral becomes a Riemann sum over ``N`` sites with spacing
``dx`` and the spatial derivative a central difference with periodic wrap,
so the field is an ordinary finite-dof :class:`LagrangianModel` with
coordinates ``phi0 .. phi{N-1}``.  Everything downstream (HJ system,
reparametrization, equivalence check) is the finite-dof machinery applied
to that model.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import jsonschema
import numpy as np

from . import expr as ex
from .errors import ModelError, ValidationError
from .expr import Expr
from .hj import build_system, default_path, evaluate_along, integrate, total_differential_system
from .model import MODEL_SCHEMA, LagrangianModel, momentum_name, velocity_name
from .reparam import EquivalenceReport, parametrize, verify_equivalence

DENSITY_SYMBOLS = ("phi", "dphi_x", "dphi_t")


def site(i: int) -> str:
    return f"phi{i}"


@dataclass(frozen=True)
class LatticeFieldModel:
    """Density ``L(phi, dphi_x, dphi_t)`` on ``N`` periodic sites; ``dx`` defaults to ``1/N``."""

    N: int
    density: Expr
    dx: float | None = None
    name: str = "lattice"
    time: str = "t"

    def __post_init__(self):
        if isinstance(self.density, str):
            object.__setattr__(self, "density", ex.parse(self.density))
        if not isinstance(self.N, int) or self.N < 4:
            raise ModelError(f"a lattice needs N >= 4 sites, got {self.N}")
        if self.dx is not None and not (math.isfinite(self.dx) and self.dx > 0):
            raise ModelError(f"lattice spacing must be positive, got {self.dx}")
        unknown = ex.symbols(self.density) - set(DENSITY_SYMBOLS)
        if unknown:
            raise ModelError(f"unknown symbol {sorted(unknown)[0]!r} in density {self.density}")

    @property
    def spacing(self) -> Fraction:
        if self.dx is None:
            return Fraction(1, self.N)
        return Fraction(repr(float(self.dx)))

    @property
    def sites(self) -> tuple:
        return tuple(site(i) for i in range(self.N))

    def to_document(self) -> dict:
        doc = {"name": self.name, "time": self.time,
               "lattice": {"N": self.N, "density": ex.to_text(self.density)}}
        if self.dx is not None:
            doc["lattice"]["dx"] = self.dx
        return doc


def load_lattice(document) -> LatticeFieldModel:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model file is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(document, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ModelError(f"schema violation: {exc.message}") from exc
    if "lattice" not in document:
        raise ModelError("document has no lattice block")
    lat = document["lattice"]
    return LatticeFieldModel(N=lat["N"], density=ex.parse(lat["density"]), dx=lat.get("dx"),
                             name=document["name"], time=document.get("time", "t"))


def discretize(f: LatticeFieldModel) -> LagrangianModel:
    """``L = sum_i dx * density(phi_i, (phi_{i+1} - phi_{i-1}) / (2 dx), v_phi_i)``."""
    dx = ex.const(f.spacing)
    n = f.N
    terms = []
    for i in range(n):
        grad = (ex.sym(site((i + 1) % n)) - ex.sym(site((i - 1) % n))) / (ex.const(2) * dx)
        local = ex.substitute(f.density, {"phi": ex.sym(site(i)), "dphi_x": grad,
                                          "dphi_t": ex.sym(velocity_name(site(i)))})
        terms.append(dx * local)
    return LagrangianModel(f.name, f.sites, ex.simplify(ex.add_all(terms)), time=f.time)


@dataclass
class LatticeState:
    phi: np.ndarray
    pi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        if self.phi.ndim != 1 or self.phi.shape != self.pi.shape:
            raise ValidationError("phi and pi must be sequences of equal length")
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.pi)) and math.isfinite(self.time)):
            raise ValidationError("lattice state has non-finite entries")

    @property
    def N(self) -> int:
        return len(self.phi)

    def binding(self, m: LagrangianModel) -> dict:
        if self.N != m.n:
            raise ValidationError(f"state has {self.N} sites, model has {m.n}")
        out = {m.time: self.time}
        for c, a, b in zip(m.coordinates, self.phi, self.pi):
            out[c] = float(a)
            out[momentum_name(c)] = float(b)
        return out


def standing_wave(N: int, mode: int = 1, amplitude: float = 1.0) -> LatticeState:
    """``phi_i = A cos(2 pi mode i / N)`` at rest."""
    i = np.arange(N)
    return LatticeState(amplitude * np.cos(2 * np.pi * mode * i / N), np.zeros(N))


def dispersion(f: LatticeFieldModel, mode: int = 1) -> float:
    """Angular frequency of a massless free-field lattice mode.

    With the central-difference gradient the equation of motion is
    ``a_i = (phi_{i+2} - 2 phi_i + phi_{i-2}) / (4 dx^2)``; a plane wave
    ``exp(i(k x_i - w t))`` then gives ``w = |sin(k dx)| / dx``.
    """
    dx = float(f.spacing)
    k = 2 * np.pi * mode / (f.N * dx)
    return abs(math.sin(k * dx)) / dx


def spatial_momentum(m: LagrangianModel) -> Expr:
    """Lattice translation generator ``sum_i p_i (phi_{i+1} - phi_{i-1}) / 2``."""
    cs = m.coordinates
    n = len(cs)
    return ex.simplify(ex.add_all(
        ex.sym(momentum_name(c)) * (ex.sym(cs[(i + 1) % n]) - ex.sym(cs[(i - 1) % n])) / ex.const(2)
        for i, c in enumerate(cs)))


@dataclass
class LatticeRun:
    times: np.ndarray
    phi: np.ndarray
    pi: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    failed: bool = False
    message: str = ""

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    @property
    def momentum_drift(self) -> float:
        return float(np.max(np.abs(self.momentum - self.momentum[0])))

    def state(self, k: int = -1) -> LatticeState:
        return LatticeState(self.phi[k], self.pi[k], float(self.times[k]))

    def to_csv(self, fh=None) -> str | None:
        """Snapshot rows ``time, phi_0.., pi_0..`` with 17 significant digits."""
        own = fh is None
        fh = io.StringIO() if own else fh
        n = self.phi.shape[1]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", *[f"phi_{i}" for i in range(n)], *[f"pi_{i}" for i in range(n)]])
        for k in range(len(self.times)):
            w.writerow([f"{x:.17g}" for x in (self.times[k], *self.phi[k], *self.pi[k])])
        return fh.getvalue() if own else None


def canonical_field_evolution(m: LagrangianModel, state0: LatticeState, horizon: float, step: float,
                              samples: int | None = None) -> LatticeRun:
    """RK4 of ``phi' = dH_0/dpi``, ``pi' = -dH_0/dphi`` for a discretized (regular) model."""
    sys_ = build_system(m, samples)
    if sys_.degenerate:
        raise ValidationError(f"{m.name} is singular; canonical evolution needs a regular lattice density")
    tds = total_differential_system(sys_)
    bind = state0.binding(m)
    traj = integrate(tds, bind, default_path(sys_, horizon, {m.time: state0.time}), step)
    phi = np.column_stack([traj[c] for c in m.coordinates])
    pi = np.column_stack([traj[momentum_name(c)] for c in m.coordinates])
    return LatticeRun(
        times=traj[m.time], phi=phi, pi=pi,
        energy=evaluate_along(sys_.hamiltonians[m.time], traj),
        momentum=evaluate_along(spatial_momentum(m), traj),
        failed=traj.failed, message=traj.message,
    )


@dataclass
class FieldEquivalence:
    report: EquivalenceReport
    N: int

    @property
    def max_dev(self) -> float:
        return self.report.max_dev

    @property
    def pi_t_drift(self) -> float:
        return self.report.pt_drift

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out["N"] = self.N
        return out


def reparam_field_equivalence(f: LatticeFieldModel, state0: LatticeState, horizon: float, step: float,
                              tol: float = 1e-6, samples: int | None = None) -> FieldEquivalence:
    """Run the finite-dof equivalence check on the reparametrized lattice model."""
    m = discretize(f)
    pair = parametrize(m, samples)
    rep = verify_equivalence(pair, state0.binding(m), horizon, step, tol=tol, samples=samples)
    return FieldEquivalence(rep, f.N)
