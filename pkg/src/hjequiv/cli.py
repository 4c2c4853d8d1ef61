"""Command-line entry point: ``hjequiv <subcommand> --model FILE --out DIR``.

Every run writes ``report.json`` (plus ``trajectory.csv`` or ``model.json``
where relevant) and a ``manifest.json`` with a sha256 per file.  Exit codes:
1 invalid input, 2 unsupported model, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import expr as ex
from .errors import NumericalError, ToolkitError, UnsupportedModelError, ValidationError
from .fieldsys import constraint_variations, promote_to_field
from .hj import build_system, integrability_report, total_differential_system
from .lattice import (
    canonical_field_evolution,
    discretize,
    dispersion,
    load_lattice,
    reparam_field_equivalence,
    standing_wave,
)
from .model import analyze, energy, euler_lagrange, load_model, velocity_name
from .reparam import build_extended_hj, homogeneity_check, parametrize, reduction_check, verify_equivalence

EXIT_VALIDATION, EXIT_UNSUPPORTED, EXIT_NUMERICAL = 1, 2, 3
FREE_DENSITY = ex.parse("0.5*dphi_t^2 - 0.5*dphi_x^2")


@dataclass
class RunConfig:
    command: str
    model: Path
    out: Path
    step: float = 1e-3
    horizon: float | None = None
    samples: int = 50
    seed: int = 0
    max_iter: int = 5

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError(f"--step must be positive, got {self.step}")
        if self.horizon is not None and not (self.horizon >= 0 and math.isfinite(self.horizon)):
            raise ValidationError(f"--horizon must be finite and non-negative, got {self.horizon}")
        if self.samples < 10:
            raise ValidationError("--samples must be at least 10")
        if self.max_iter < 1:
            raise ValidationError("--max-iter must be at least 1")


def _read_document(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _finite_model(doc: dict):
    if "lattice" in doc and "lagrangian" not in doc:
        return discretize(load_lattice(doc))
    return load_model(doc)


def _default_initial(m, doc: dict) -> dict:
    init = {c: 1.0 for c in m.coordinates}
    init.update({velocity_name(c): 0.0 for c in m.coordinates})
    init.update(doc.get("initial", {}))
    return init


def cmd_analyze(cfg: RunConfig, doc: dict) -> tuple[dict, dict]:
    m = _finite_model(doc)
    split = analyze(m, cfg.samples)
    report = {"model": m.to_document(), "analysis": split.to_dict()}
    el = euler_lagrange(m, explicit=split.deficiency == 0)
    report["euler_lagrange"] = el.to_dict()
    if split.deficiency == 0:
        report["energy"] = ex.to_text(energy(m))
    return report, {}


def cmd_constraints(cfg: RunConfig, doc: dict) -> tuple[dict, dict]:
    m = _finite_model(doc)
    sys_ = build_system(m, cfg.samples)
    tds = total_differential_system(sys_)
    rep = integrability_report(sys_, cfg.max_iter, tds)
    report = {"model": m.name, "system": sys_.to_dict(), "total_differential_system": tds.to_dict(),
              "integrability": rep.to_dict()}
    if sys_.degenerate:
        f = promote_to_field(m, sys_.split)
        report["field_system"] = f.to_dict()
        report["constraint_variations"] = constraint_variations(f, sys_, tds).to_dict()
    return report, {}


def cmd_reparametrize(cfg: RunConfig, doc: dict) -> tuple[dict, dict]:
    m = _finite_model(doc)
    pair = parametrize(m, cfg.samples)
    split = analyze(pair.extended, cfg.samples)
    ext_doc = pair.extended.to_document()
    report = {
        "base": m.to_document(),
        "extended": ext_doc,
        "provenance": pair.provenance,
        "homogeneity": homogeneity_check(pair).to_dict(),
        "rank": split.rank,
        "deficiency": split.deficiency,
        "degenerate": list(split.degenerate_coords),
    }
    return report, {"model.json": json.dumps(ext_doc, indent=2, sort_keys=True) + "\n"}


def cmd_verify(cfg: RunConfig, doc: dict) -> tuple[dict, dict]:
    m = _finite_model(doc)
    horizon = 2 * math.pi if cfg.horizon is None else cfg.horizon
    pair = parametrize(m, cfg.samples)
    sys_ = build_extended_hj(pair, cfg.samples)
    tds = total_differential_system(sys_)
    closure = integrability_report(sys_, cfg.max_iter, tds)
    f = promote_to_field(pair.extended, sys_.split)
    rep = verify_equivalence(pair, _default_initial(m, doc), horizon, cfg.step, samples=cfg.samples)
    report = rep.to_dict()
    report["max_dev"] = rep.max_dev
    report["homogeneity"] = homogeneity_check(pair).to_dict()
    report["hamiltonians"] = {k: ex.to_text(v) for k, v in sys_.hamiltonians.items()}
    report["integrability"] = {"status": closure.status, "closed_at": closure.closed_at}
    report["reduction"] = {k: v.to_dict() for k, v in reduction_check(pair, cfg.samples).items()}
    report["constraint_variations"] = constraint_variations(f, sys_, tds).to_dict()
    if rep.verdict == "failed":
        raise NumericalError(f"integration failed: {rep.message}")
    return report, {"trajectory.csv": rep.hj_trajectory.to_csv()}


def cmd_field_demo(cfg: RunConfig, doc: dict) -> tuple[dict, dict]:
    if "lattice" not in doc:
        raise ValidationError("field-demo needs a model file with a lattice block")
    f = load_lattice(doc)
    m = discretize(f)
    state0 = standing_wave(f.N)
    free = ex.is_identically_zero(f.density - FREE_DENSITY).is_zero
    omega = dispersion(f)
    if cfg.horizon is not None:
        horizon = cfg.horizon
    else:
        horizon = 2 * math.pi / omega if free else 1.0
    run = canonical_field_evolution(m, state0, horizon, cfg.step, cfg.samples)
    if run.failed:
        raise NumericalError(f"canonical evolution failed: {run.message}")
    report = {
        "model": f.to_document(),
        "horizon": horizon,
        "step": cfg.step,
        "H0_drift": run.energy_drift,
        "spatial_momentum_drift": run.momentum_drift,
    }
    if free:
        exact = state0.phi[None, :] * np.cos(omega * run.times)[:, None]
        report["dispersion_omega"] = omega
        report["amplitude_error"] = float(np.max(np.abs(run.phi - exact)))
    eq = reparam_field_equivalence(f, state0, min(horizon, 1.0), cfg.step, samples=cfg.samples)
    report["equivalence"] = eq.to_dict()
    report["pi_t_drift"] = eq.pi_t_drift
    return report, {"trajectory.csv": run.to_csv()}


COMMANDS = {
    "analyze": cmd_analyze,
    "constraints": cmd_constraints,
    "reparametrize": cmd_reparametrize,
    "verify": cmd_verify,
    "field-demo": cmd_field_demo,
}


def write_artifacts(out: Path, files: dict) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        hashes[name] = hashlib.sha256(data).hexdigest()
    manifest = json.dumps({"files": hashes}, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(manifest)
    return hashes


def run(cfg: RunConfig) -> dict:
    doc = _read_document(cfg.model)
    with ex.sampling(samples=cfg.samples, seed=cfg.seed):
        report, extra = COMMANDS[cfg.command](cfg, doc)
    report = {"command": cfg.command, "seed": cfg.seed, "samples": cfg.samples, **report}
    files = {"report.json": json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n", **extra}
    write_artifacts(cfg.out, files)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjequiv", description="Hamilton-Jacobi treatment of singular Lagrangians")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--model", required=True, type=Path, help="model file (JSON)")
        s.add_argument("--out", required=True, type=Path, help="output directory")
        s.add_argument("--step", type=float, default=1e-3)
        s.add_argument("--horizon", type=float, default=None)
        s.add_argument("--samples", type=int, default=50, help="samples for rank and zero tests")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--max-iter", type=int, default=5, dest="max_iter")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, args.model, args.out, args.step, args.horizon,
                        args.samples, args.seed, args.max_iter)
        report = run(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except UnsupportedModelError as exc:
        print(f"unsupported model: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    verdict = report.get("verdict")
    print(f"{cfg.command}: wrote {cfg.out}" + (f" (verdict: {verdict})" if verdict else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
