"""JSON spin-system files.

Schema::

    {
      "label": "optional text",
      "radicals": [
        {"name": "donor",    "nuclei": [{"multiplicity": 2, "tensor_mT": [[..3..], [..3..], [..3..]]}, ...]},
        {"name": "acceptor", "nuclei": [...]}
      ]
    }

The first radical is the donor (its nuclei couple to S_D), the second the
acceptor. Bundled toy sets are addressed by name, e.g. ``toy-1n1n``.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .spin_core import Nucleus, SpinSystemSpec

BUNDLED = ("toy-1n1n", "toy-2n2n", "toy-3n3n")


class SystemFileError(ValueError):
    pass


def _parse_nucleus(raw, where: str) -> Nucleus:
    if not isinstance(raw, dict):
        raise SystemFileError(f"{where}: expected an object, got {type(raw).__name__}")
    mult = raw.get("multiplicity")
    if not isinstance(mult, int) or isinstance(mult, bool) or mult < 2:
        raise SystemFileError(f"{where}.multiplicity: expected an integer >= 2, got {mult!r}")
    tensor = raw.get("tensor_mT")
    if not isinstance(tensor, list) or len(tensor) != 3:
        raise SystemFileError(f"{where}.tensor_mT: expected 3 rows, got {tensor!r}")
    for i, row in enumerate(tensor):
        if not isinstance(row, list) or len(row) != 3:
            n = len(row) if isinstance(row, list) else type(row).__name__
            raise SystemFileError(f"{where}.tensor_mT[{i}]: expected a row of 3 numbers, got length {n}")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise SystemFileError(f"{where}.tensor_mT[{i}][{j}]: expected a finite number, got {x!r}")
    return Nucleus(mult, np.array(tensor, dtype=float))


def system_from_dict(doc: dict, source: str = "<dict>") -> SpinSystemSpec:
    if not isinstance(doc, dict):
        raise SystemFileError(f"{source}: top level must be an object")
    radicals = doc.get("radicals")
    if not isinstance(radicals, list) or len(radicals) != 2:
        raise SystemFileError(f"{source}: 'radicals' must list exactly two radicals (donor, acceptor)")
    groups = []
    for r, rad in enumerate(radicals):
        if not isinstance(rad, dict):
            raise SystemFileError(f"{source}: radicals[{r}] must be an object")
        nuclei = rad.get("nuclei", [])
        if not isinstance(nuclei, list):
            raise SystemFileError(f"{source}: radicals[{r}].nuclei must be a list")
        groups.append(tuple(_parse_nucleus(n, f"radicals[{r}].nuclei[{k}]") for k, n in enumerate(nuclei)))
    return SpinSystemSpec(groups[0], groups[1], str(doc.get("label", source)))


def parse_system_file(path: str | Path) -> SpinSystemSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SystemFileError(f"system file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return system_from_dict(doc, str(path))


def load_system(name_or_path: str | Path) -> SpinSystemSpec:
    """Bundled toy set by name, otherwise a path to a system file."""
    if str(name_or_path) in BUNDLED:
        text = resources.files("chiralrp.data").joinpath(f"{name_or_path}.json").read_text(encoding="utf-8")
        return system_from_dict(json.loads(text), str(name_or_path))
    return parse_system_file(name_or_path)


def system_to_dict(system: SpinSystemSpec) -> dict:
    def nuclei(group):
        return [{"multiplicity": n.multiplicity, "tensor_mT": n.tensor.tolist()} for n in group]

    return {
        "label": system.label,
        "radicals": [
            {"name": "donor", "nuclei": nuclei(system.donor_nuclei)},
            {"name": "acceptor", "nuclei": nuclei(system.acceptor_nuclei)},
        ],
    }
