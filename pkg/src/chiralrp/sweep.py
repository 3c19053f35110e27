"""Parameter sweeps over chi, couplings, rates, dephasing and field orientation."""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .observables import CorrelationResult, delta_m, interaction_gap, pearson_fit
from .pipeline import FLAG_KEYS, RunConfig, deterministic_blas, run_point

DEFAULT_MAX_POINTS = 10_000
OUTPUTS = ("M_G", "M_L", "phi_F", "phi_R")

# axis name -> RunConfig override key
AXIS_KEYS = {
    "chi": "chi",
    "theta": "field__theta",
    "phi": "field__phi",
    "b0_ut": "field__b0_ut",
    "j_mt": "coupling__j_mt",
    "d_mt": "coupling__d_mt",
    "k_f": "rates__k_f",
    "k_r": "rates__k_r",
    "k_dec": "rates__k_dec",
}


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.name not in AXIS_KEYS:
            raise SweepError(f"unknown sweep axis {self.name!r}; choose from {sorted(AXIS_KEYS)}")
        if len(self.values) == 0:
            raise SweepError(f"axis {self.name!r} has no values")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[Axis, ...]
    base: RunConfig
    outputs: tuple[str, ...] = OUTPUTS
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise SweepError("a sweep needs at least one axis")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise SweepError(f"duplicate axes in {names}")
        unknown = set(self.outputs) - set(OUTPUTS)
        if unknown:
            raise SweepError(f"unknown outputs {sorted(unknown)}")
        if self.size > self.max_points:
            raise SweepError(f"grid of {self.size} points exceeds cap {self.max_points}")

    @property
    def size(self) -> int:
        return math.prod(len(a.values) for a in self.axes)

    def points(self):
        """(index, coordinates) in row-major order over the axes."""
        names = [a.name for a in self.axes]
        for i, combo in enumerate(product(*(a.values for a in self.axes))):
            yield i, dict(zip(names, combo))

    def config_at(self, coords: dict) -> RunConfig:
        return config_at(self.base, coords)

    def fingerprint(self) -> str:
        from .output import config_to_dict

        doc = {
            "axes": [[a.name, list(a.values)] for a in self.axes],
            "base": config_to_dict(self.base),
            "outputs": list(self.outputs),
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def config_at(base: RunConfig, coords: dict) -> RunConfig:
    return base.with_(**{AXIS_KEYS[k]: v for k, v in coords.items()})


@dataclass
class SweepRecord:
    index: int
    coords: dict[str, float]
    outputs: dict[str, float]
    flags: dict[str, bool]
    error: str = ""
    warnings: tuple[str, ...] = ()
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.error and all(self.flags.values())

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "coords": self.coords,
            "outputs": self.outputs,
            "flags": self.flags,
            "error": self.error,
            "warnings": list(self.warnings),
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SweepRecord":
        return cls(
            doc["index"], doc["coords"], doc["outputs"], doc["flags"],
            doc.get("error", ""), tuple(doc.get("warnings", ())), doc.get("wall_time", 0.0),
        )


def evaluate_point(index: int, coords: dict, base: RunConfig, outputs=OUTPUTS, deterministic: bool = True) -> SweepRecord:
    """Run one grid point; any failure becomes an error record instead of propagating."""
    start = time.perf_counter()
    try:
        with deterministic_blas(deterministic):
            res = run_point(config_at(base, coords))
    except Exception as exc:  # noqa: BLE001 - a failed point must not abort the sweep
        return SweepRecord(
            index, coords, {k: math.nan for k in outputs}, {k: False for k in FLAG_KEYS},
            f"{type(exc).__name__}: {exc}", wall_time=time.perf_counter() - start,
        )
    values = {
        "M_G": res.m_global.value,
        "M_L": res.m_local.value,
        "phi_F": res.yields.phi_f,
        "phi_R": res.yields.phi_r,
    }
    values = {k: float(values[k]) for k in outputs}
    flags = dict(res.flags)
    error = ""
    if not all(math.isfinite(v) for v in values.values()):
        error = "NonFiniteOutput: NaN or inf in outputs"
        flags["finite"] = False
    return SweepRecord(index, coords, values, flags, error, tuple(res.trajectory.warnings), time.perf_counter() - start)


def _evaluate_task(args):
    return evaluate_point(*args)


def _load_checkpoint(path: Path, fingerprint: str) -> dict[int, SweepRecord]:
    """Records already in ``path``; a torn trailing line is cut off the file."""
    if not path.exists() or path.stat().st_size == 0:
        return {}
    lines = path.read_text(encoding="utf-8").splitlines()
    if json.loads(lines[0]).get("fingerprint") != fingerprint:
        raise SweepError(f"checkpoint {path} belongs to a different sweep; remove it or choose another path")
    done, kept = {}, [lines[0]]
    for line in lines[1:]:
        try:
            rec = SweepRecord.from_json(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError):
            break  # interrupted mid-write
        done[rec.index] = rec
        kept.append(line)
    path.write_text("".join(x + "\n" for x in kept), encoding="utf-8")
    return done


def run_sweep(
    spec: SweepSpec,
    workers: int = 1,
    deterministic: bool = True,
    checkpoint: str | Path | None = None,
) -> list[SweepRecord]:
    """Evaluate every grid point; records come back in row-major axis order.

    With ``checkpoint`` each finished record is appended to a JSON-lines file
    and points already present there are not recomputed.
    """
    points = list(spec.points())
    done: dict[int, SweepRecord] = {}
    sink = None
    if checkpoint is not None:
        checkpoint = Path(checkpoint)
        fp = spec.fingerprint()
        done = _load_checkpoint(checkpoint, fp)
        fresh = not checkpoint.exists() or checkpoint.stat().st_size == 0
        sink = checkpoint.open("a", encoding="utf-8")
        if fresh:
            sink.write(json.dumps({"fingerprint": fp, "size": spec.size}) + "\n")
            sink.flush()

    todo = [(i, c, spec.base, spec.outputs, deterministic) for i, c in points if i not in done]

    def keep(rec):
        done[rec.index] = rec
        if sink is not None:
            sink.write(json.dumps(rec.to_json()) + "\n")
            sink.flush()

    try:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rec in pool.map(_evaluate_task, todo, chunksize=1):
                    keep(rec)
        else:
            for task in todo:
                keep(_evaluate_task(task))
    finally:
        if sink is not None:
            sink.close()
    return [done[i] for i, _ in points]


def orientation_grid(n_theta: int = 50, n_phi: int = 50) -> tuple[Axis, Axis]:
    """theta inclusive on [0, pi]; phi on [0, 2pi) without the duplicate 2pi point."""
    return (
        Axis("theta", tuple(np.linspace(0.0, np.pi, n_theta))),
        Axis("phi", tuple(np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False))),
    )


def ratio_pair(m0, m90):
    try:
        return delta_m(m0, m90)
    except (ZeroDivisionError, ValueError):
        return math.nan, math.nan


@dataclass
class RateTable:
    """ratio_ciss = M(pi/2)/M(0) per cell; rows follow k_r, columns k_f."""

    kf_values: tuple[float, ...]
    kr_values: tuple[float, ...]
    global_ratio: np.ndarray
    local_ratio: np.ndarray
    global_maxmin: np.ndarray
    local_maxmin: np.ndarray
    records: list[SweepRecord]


def rate_table(kf_values, kr_values, base: RunConfig, workers: int = 1, deterministic: bool = True,
               checkpoint=None) -> RateTable:
    kf_values, kr_values = tuple(map(float, kf_values)), tuple(map(float, kr_values))
    if any(v <= 0 for v in kf_values + kr_values):
        raise SweepError("rate-table rates must be positive")
    spec = SweepSpec(
        (Axis("k_r", kr_values), Axis("k_f", kf_values), Axis("chi", (0.0, np.pi / 2))),
        base, ("M_G", "M_L"),
    )
    records = run_sweep(spec, workers, deterministic, checkpoint)
    shape = (len(kr_values), len(kf_values))
    out = {k: np.full(shape, np.nan) for k in ("g", "l", "gm", "lm")}
    for r in range(shape[0]):
        for c in range(shape[1]):
            at0, at90 = records[2 * (r * shape[1] + c)], records[2 * (r * shape[1] + c) + 1]
            out["gm"][r, c], out["g"][r, c] = ratio_pair(at0.outputs["M_G"], at90.outputs["M_G"])
            out["lm"][r, c], out["l"][r, c] = ratio_pair(at0.outputs["M_L"], at90.outputs["M_L"])
    return RateTable(kf_values, kr_values, out["g"], out["l"], out["gm"], out["lm"], records)


@dataclass
class DecoherenceTable:
    kdec_values: tuple[float, ...]
    global_ratio: np.ndarray
    local_ratio: np.ndarray
    global_maxmin: np.ndarray
    local_maxmin: np.ndarray
    records: list[SweepRecord]


def decoherence_table(kdec_values, base: RunConfig, workers: int = 1, deterministic: bool = True,
                      checkpoint=None) -> DecoherenceTable:
    kdec_values = tuple(map(float, kdec_values))
    spec = SweepSpec((Axis("k_dec", kdec_values), Axis("chi", (0.0, np.pi / 2))), base, ("M_G", "M_L"))
    records = run_sweep(spec, workers, deterministic, checkpoint)
    n = len(kdec_values)
    g, l, gm, lm = (np.full(n, np.nan) for _ in range(4))
    for i in range(n):
        a, b = records[2 * i], records[2 * i + 1]
        gm[i], g[i] = ratio_pair(a.outputs["M_G"], b.outputs["M_G"])
        lm[i], l[i] = ratio_pair(a.outputs["M_L"], b.outputs["M_L"])
    return DecoherenceTable(kdec_values, g, l, gm, lm, records)


@dataclass
class ChiCurves:
    """M_G(chi) and M_L(chi) for each value of one interaction (d_mt or j_mt)."""

    interaction: str
    interaction_values: tuple[float, ...]
    chi_values: tuple[float, ...]
    m_global: np.ndarray  # (n_interaction, n_chi)
    m_local: np.ndarray
    records: list[SweepRecord]

    def gaps(self, baseline_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Baseline minus each curve, for global and local scope."""
        g = np.array([interaction_gap(self.m_global[baseline_index], row) for row in self.m_global])
        l = np.array([interaction_gap(self.m_local[baseline_index], row) for row in self.m_local])
        return g, l


def chi_curves(chi_values, base: RunConfig, interaction: str = "d_mt", interaction_values=(0.0,),
               workers: int = 1, deterministic: bool = True, checkpoint=None) -> ChiCurves:
    if interaction not in ("d_mt", "j_mt"):
        raise SweepError(f"interaction must be 'd_mt' or 'j_mt', got {interaction!r}")
    chi_values = tuple(map(float, chi_values))
    interaction_values = tuple(map(float, interaction_values))
    spec = SweepSpec((Axis(interaction, interaction_values), Axis("chi", chi_values)), base, ("M_G", "M_L"))
    records = run_sweep(spec, workers, deterministic, checkpoint)
    shape = (len(interaction_values), len(chi_values))
    mg = np.array([r.outputs["M_G"] for r in records]).reshape(shape)
    ml = np.array([r.outputs["M_L"] for r in records]).reshape(shape)
    return ChiCurves(interaction, interaction_values, chi_values, mg, ml, records)


@dataclass
class CorrelationStudy:
    records: list[SweepRecord]
    global_fit: CorrelationResult | None
    local_fit: CorrelationResult | None
    errors: dict[str, str] = field(default_factory=dict)


def correlation_study(base: RunConfig, n_theta: int = 50, n_phi: int = 50, workers: int = 1,
                      deterministic: bool = True, checkpoint=None, strict: bool = True) -> CorrelationStudy:
    """M_G, M_L and phi_F over an orientation grid with Pearson fits of M against phi_F.

    With ``strict`` an undefined correlation (zero variance) is raised; otherwise it
    is recorded in ``errors`` and the fit is None.
    """
    spec = SweepSpec(orientation_grid(n_theta, n_phi), base, ("M_G", "M_L", "phi_F"))
    records = run_sweep(spec, workers, deterministic, checkpoint)
    good = [r for r in records if not r.error]
    phi_f = [r.outputs["phi_F"] for r in good]
    fits, errors = {}, {}
    for key in ("M_G", "M_L"):
        try:
            fits[key] = pearson_fit(phi_f, [r.outputs[key] for r in good])
        except ValueError as exc:
            if strict:
                raise
            fits[key] = None
            errors[key] = f"{type(exc).__name__}: {exc}"
    return CorrelationStudy(records, fits["M_G"], fits["M_L"], errors)
