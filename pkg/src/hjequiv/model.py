"""Lagrangian models, velocity Hessians and Euler-Lagrange equations."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from . import expr as ex
from .errors import ModelError, NotInvertibleError, StratifiedHessianError, ValidationError
from .expr import Expr

MODEL_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "coordinates": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "time": {"type": "string"},
        "parameter": {"type": ["string", "null"]},
        "lagrangian": {"type": "string"},
        "initial": {"type": "object", "additionalProperties": {"type": "number"}},
        "lattice": {
            "type": "object",
            "required": ["N", "density"],
            "properties": {
                "N": {"type": "integer"},
                "dx": {"type": "number", "exclusiveMinimum": 0},
                "density": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "anyOf": [{"required": ["coordinates", "lagrangian"]}, {"required": ["lattice"]}],
}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def velocity_name(coord: str) -> str:
    return f"v_{coord}"


def momentum_name(coord: str) -> str:
    return f"p_{coord}"


def accel_name(coord: str) -> str:
    return f"a_{coord}"


@dataclass(frozen=True)
class LagrangianModel:
    """A Lagrangian over named coordinates.

    Velocities are the symbols ``v_<coord>``; ``time`` is the evolution
    parameter the velocities are taken with respect to.  ``parameter``
    optionally names an evolution parameter distinct from ``time`` and is
    informational only.
    """

    name: str
    coordinates: tuple
    lagrangian: Expr
    time: str = "t"
    parameter: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "coordinates", tuple(self.coordinates))
        coords = self.coordinates
        if len(set(coords)) != len(coords):
            dup = next(c for c in coords if coords.count(c) > 1)
            raise ModelError(f"duplicate coordinate {dup!r}")
        for c in coords + (self.time,):
            if not _IDENT.match(c):
                raise ModelError(f"invalid symbol name {c!r}")
        if self.time in coords:
            raise ModelError(f"time symbol {self.time!r} is also a coordinate")
        derived = {f(c) for c in coords for f in (velocity_name, momentum_name, accel_name)}
        clash = derived & (set(coords) | {self.time})
        if clash:
            raise ModelError(f"symbol {sorted(clash)[0]!r} collides with a derived velocity/momentum name")
        allowed = set(coords) | set(self.velocities) | {self.time}
        unknown = ex.symbols(self.lagrangian) - allowed
        if unknown:
            raise ModelError(f"unknown symbol {sorted(unknown)[0]!r} in Lagrangian {self.lagrangian}")

    @property
    def velocities(self) -> tuple:
        return tuple(velocity_name(c) for c in self.coordinates)

    @property
    def n(self) -> int:
        return len(self.coordinates)

    def to_document(self) -> dict:
        doc = {
            "name": self.name,
            "coordinates": list(self.coordinates),
            "time": self.time,
            "lagrangian": ex.to_text(self.lagrangian),
        }
        if self.parameter is not None:
            doc["parameter"] = self.parameter
        return doc


def load_model(document) -> LagrangianModel:
    """Build a model from a model-file document (dict or JSON text).

    Lattice documents (with a ``lattice`` block and no ``lagrangian``) are
    handled by :func:`hjequiv.lattice.load_lattice`.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model file is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(document, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelError(f"schema violation at {path}: {exc.message}") from exc
    if "lagrangian" not in document:
        raise ModelError("document describes a lattice field; use lattice.load_lattice")
    lag = ex.parse(document["lagrangian"])
    return LagrangianModel(
        name=document["name"],
        coordinates=tuple(document["coordinates"]),
        lagrangian=lag,
        time=document.get("time", "t"),
        parameter=document.get("parameter"),
    )


# ---------------------------------------------------------------------------
# symbolic linear algebra

def _nonzero(e: Expr) -> bool:
    if e.is_const:
        return e.value != 0
    return not ex.is_identically_zero(e).is_zero


def solve_linear(matrix: Sequence[Sequence[Expr]], rhs: Sequence[Expr]) -> list[Expr]:
    """Gaussian elimination on an expression matrix.

    Pivots are chosen column by column, preferring nonzero constants, then
    any entry that is not identically zero.  Raises ``NotInvertibleError``
    when a column has no usable pivot.
    """
    n = len(matrix)
    a = [[ex.simplify(x) for x in row] + [ex.simplify(b)] for row, b in zip(matrix, rhs)]
    for k in range(n):
        candidates = [i for i in range(k, n) if not a[i][k].is_zero_const()]
        pivot = next((i for i in candidates if a[i][k].is_const), None)
        if pivot is None:
            pivot = next((i for i in candidates if _nonzero(a[i][k])), None)
        if pivot is None:
            raise NotInvertibleError(f"matrix is singular in column {k}")
        a[k], a[pivot] = a[pivot], a[k]
        piv = a[k][k]
        for i in range(k + 1, n):
            if a[i][k].is_zero_const():
                continue
            f = ex.simplify(a[i][k] / piv)
            a[i] = [ex.simplify(a[i][j] - f * a[k][j]) if j >= k else a[i][j] for j in range(n + 1)]
    x = [ex.ZERO] * n
    for k in reversed(range(n)):
        acc = a[k][n]
        for j in range(k + 1, n):
            if not a[k][j].is_zero_const():
                acc = acc - a[k][j] * x[j]
        x[k] = ex.simplify(acc / a[k][k])
    return x


# ---------------------------------------------------------------------------
# Hessian analysis

RANK_PIVOT_TOL = 1e-9


@dataclass
class HessianAnalysis:
    """Velocity Hessian of a model plus, once ranked, its regular/degenerate split.

    ``regular`` and ``degenerate`` hold coordinate indices.
    """

    model: LagrangianModel
    matrix: list
    rank: int | None = None
    regular: tuple = ()
    degenerate: tuple = ()
    sample_ranks: list = field(default_factory=list)

    @property
    def deficiency(self) -> int | None:
        return None if self.rank is None else self.model.n - self.rank

    @property
    def regular_coords(self) -> tuple:
        return tuple(self.model.coordinates[i] for i in self.regular)

    @property
    def degenerate_coords(self) -> tuple:
        return tuple(self.model.coordinates[i] for i in self.degenerate)

    def to_dict(self) -> dict:
        return {
            "hessian": [[ex.to_text(x) for x in row] for row in self.matrix],
            "rank": self.rank,
            "deficiency": self.deficiency,
            "regular": list(self.regular_coords),
            "degenerate": list(self.degenerate_coords),
            "sample_ranks": list(self.sample_ranks),
        }


def hessian(m: LagrangianModel) -> HessianAnalysis:
    vel = m.velocities
    first = [ex.differentiate(m.lagrangian, v) for v in vel]
    matrix = [[None] * m.n for _ in range(m.n)]
    for i in range(m.n):
        for j in range(i, m.n):
            h = ex.differentiate(first[i], vel[j])
            matrix[i][j] = h
            if j != i:
                # the mixed partial computed the other way round must agree
                matrix[j][i] = ex.differentiate(first[j], vel[i])
    return HessianAnalysis(m, matrix)


def _row_reduce_pivots(a: np.ndarray, tol: float) -> list[int]:
    a = a.astype(float).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        i = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[i, c]) <= tol:
            continue
        a[[r, i]] = a[[i, r]]
        a[r + 1:] -= np.outer(a[r + 1:, c] / a[r, c], a[r])
        pivots.append(c)
        r += 1
    return pivots


def rank_and_split(h: HessianAnalysis, samples: int | None = None) -> HessianAnalysis:
    """Numeric rank of the Hessian and the regular/degenerate split.

    The matrix is evaluated at ``samples`` random points (components uniform
    in [0.5, 2]) and row reduced with partial pivoting, columns scanned in
    coordinate order; a column is a pivot when its best remaining entry
    exceeds ``1e-9 * max(1, max|H|)``.  Degenerate coordinates are the
    non-pivot columns at the first sample, so with the usual ordering they
    are the trailing ones.
    """
    samples = ex.default_samples() if samples is None else samples
    if samples < 10:
        raise ValidationError("rank_and_split needs at least 10 samples")
    m = h.model
    n = m.n
    flat = [x for row in h.matrix for x in row]
    names = tuple(sorted(set().union(*(ex.symbols(x) for x in flat))))
    f = ex.compile_exprs(flat, names)
    rng = ex.rng_for("rank:" + m.name + ":" + ex.to_text(m.lagrangian))
    ranks, first_pivots = [], None
    for _ in range(samples):
        for _attempt in range(100):
            point = rng.uniform(0.5, 2.0, size=len(names))
            try:
                vals = np.array(f(*point.tolist()), dtype=float).reshape(n, n)
            except (ZeroDivisionError, ValueError, OverflowError):
                continue
            if np.all(np.isfinite(vals)):
                break
        else:
            raise StratifiedHessianError(f"Hessian of {m.name} cannot be evaluated on [0.5, 2]")
        tol = RANK_PIVOT_TOL * max(1.0, float(np.max(np.abs(vals))) if n else 1.0)
        pivots = _row_reduce_pivots(vals, tol) if n else []
        ranks.append(len(pivots))
        if first_pivots is None:
            first_pivots = pivots
    if len(set(ranks)) > 1:
        raise StratifiedHessianError(
            f"stratified Hessian: rank of {m.name} varies across samples ({sorted(set(ranks))})"
        )
    regular = tuple(first_pivots)
    degenerate = tuple(i for i in range(n) if i not in first_pivots)
    return replace(h, rank=ranks[0], regular=regular, degenerate=degenerate, sample_ranks=ranks)


def analyze(m: LagrangianModel, samples: int | None = None) -> HessianAnalysis:
    return rank_and_split(hessian(m), samples)


# ---------------------------------------------------------------------------
# Euler-Lagrange equations

@dataclass
class EulerLagrange:
    """Residuals ``d/dt(dL/dv_i) - dL/dq_i`` and, when solvable, ``a_i = f_i``."""

    model: LagrangianModel
    residuals: dict
    accelerations: dict | None = None

    def to_dict(self) -> dict:
        return {
            "residuals": {k: ex.to_text(v) for k, v in self.residuals.items()},
            "accelerations": None if self.accelerations is None
            else {k: ex.to_text(v) for k, v in self.accelerations.items()},
        }


def total_time_derivative(e: Expr, m: LagrangianModel) -> Expr:
    """d/dt along a path, via the chain rule with velocity and acceleration symbols."""
    terms = [ex.differentiate(e, m.time)]
    for c, v in zip(m.coordinates, m.velocities):
        terms.append(ex.differentiate(e, c) * ex.sym(v))
        terms.append(ex.differentiate(e, v) * ex.sym(accel_name(c)))
    return ex.simplify(ex.add_all(t for t in terms if not t.is_zero_const()))


def euler_lagrange(m: LagrangianModel, explicit: bool = False) -> EulerLagrange:
    """Euler-Lagrange residuals; with ``explicit`` also solve for accelerations."""
    residuals = {}
    for c, v in zip(m.coordinates, m.velocities):
        dl_dv = ex.differentiate(m.lagrangian, v)
        residuals[c] = ex.simplify(total_time_derivative(dl_dv, m) - ex.differentiate(m.lagrangian, c))
    out = EulerLagrange(m, residuals)
    if explicit:
        out.accelerations = explicit_accelerations(m, residuals)
    return out


def explicit_accelerations(m: LagrangianModel, residuals: Mapping[str, Expr] | None = None) -> dict:
    """Solve the (acceleration-affine) residuals for ``a_<coord>``."""
    if residuals is None:
        residuals = euler_lagrange(m).residuals
    accel = [accel_name(c) for c in m.coordinates]
    zero_acc = {a: ex.ZERO for a in accel}
    matrix, rhs = [], []
    for c in m.coordinates:
        r = residuals[c]
        matrix.append([ex.differentiate(r, a) for a in accel])
        rhs.append(ex.simplify(-ex.substitute(r, zero_acc)))
    try:
        sol = solve_linear(matrix, rhs)
    except NotInvertibleError as exc:
        raise NotInvertibleError(
            f"Euler-Lagrange equations of {m.name} cannot be solved for accelerations: "
            "the velocity Hessian is degenerate"
        ) from exc
    return dict(zip(m.coordinates, sol))


def energy(m: LagrangianModel) -> Expr:
    """Energy function sum_i v_i dL/dv_i - L."""
    terms = [ex.sym(v) * ex.differentiate(m.lagrangian, v) for v in m.velocities]
    return ex.simplify(ex.add_all(terms) - m.lagrangian)
