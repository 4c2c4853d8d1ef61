"""Reference models used by the CLI demos and the test-suite.

``REGULAR`` holds the regular Lagrangians whose reparametrized form is
checked for equivalence; the other groups are controls that must be
rejected or flagged.  ``write_models`` dumps everything as model files.
"""

from __future__ import annotations

import json
from pathlib import Path

from .lattice import LatticeFieldModel, load_lattice
from .model import LagrangianModel, load_model

REGULAR = {
    "free": {
        "name": "free",
        "coordinates": ["q"],
        "time": "t",
        "lagrangian": "0.5*v_q^2",
        "initial": {"q": 0.0, "v_q": 1.0},
    },
    "oscillator": {
        "name": "oscillator",
        "coordinates": ["q"],
        "time": "t",
        "lagrangian": "0.5*v_q^2 - 0.5*q^2",
        "initial": {"q": 1.0, "v_q": 0.0},
    },
    "affine": {
        "name": "affine",
        "coordinates": ["q"],
        "time": "t",
        "lagrangian": "0.5*v_q^2 + 3*v_q - 0.5*q^2",
        "initial": {"q": 1.0, "v_q": 0.0},
    },
    # bounded motion inside q > 0: the potential -ln(q) + q has its minimum at q = 1
    "ln_potential": {
        "name": "ln_potential",
        "coordinates": ["q"],
        "time": "t",
        "lagrangian": "0.5*v_q^2 + ln(q) - q",
        "initial": {"q": 2.0, "v_q": 0.0},
    },
    "coupled": {
        "name": "coupled",
        "coordinates": ["x", "y"],
        "time": "t",
        "lagrangian": "0.5*v_x^2 + 0.5*v_y^2 + 0.2*v_x*v_y - 0.5*x^2 - y^2 + 0.3*x*y",
        "initial": {"x": 1.0, "y": 0.0, "v_x": 0.0, "v_y": 0.0},
    },
}

FORCED = {
    "name": "forced_oscillator",
    "coordinates": ["q"],
    "time": "t",
    "lagrangian": "0.5*v_q^2 - 0.5*q^2 - q*sin(t)",
    "initial": {"q": 1.0, "v_q": 0.0},
}

CONTROLS = {
    "non_homogeneous": {"name": "non_homogeneous", "coordinates": ["q"], "time": "tau",
                        "lagrangian": "v_q^2"},
    "non_affine": {"name": "non_affine", "coordinates": ["q"], "time": "t", "lagrangian": "v_q^4"},
    # p_q2 = 0 is primary; its variation forces q1 = 0
    "secondary": {"name": "secondary", "coordinates": ["q1", "q2"], "time": "t",
                  "lagrangian": "0.5*v_q1^2 + q2*q1"},
    "reparametrized_free": {"name": "reparametrized_free", "coordinates": ["q", "t"], "time": "tau",
                            "lagrangian": "0.5*v_q^2/v_t"},
}

LATTICES = {
    "free_field": {"name": "free_field", "time": "t",
                   "lattice": {"N": 32, "density": "0.5*dphi_t^2 - 0.5*dphi_x^2"}},
    "phi4_field": {"name": "phi4_field", "time": "t",
                   "lattice": {"N": 8, "density": "0.5*dphi_t^2 - 0.5*dphi_x^2 - 0.25*phi^4"}},
}


def documents() -> dict:
    out = dict(REGULAR)
    out["forced_oscillator"] = FORCED
    out.update(CONTROLS)
    out.update(LATTICES)
    return out


def regular_models() -> dict:
    return {k: load_model(d) for k, d in REGULAR.items()}


def model(name: str) -> LagrangianModel:
    return load_model(documents()[name])


def lattice(name: str) -> LatticeFieldModel:
    return load_lattice(LATTICES[name])


def write_models(directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, doc in sorted(documents().items()):
        path = directory / f"{key}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        paths.append(path)
    return paths
