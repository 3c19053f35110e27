"""Command-line entry point: one subcommand per study.

Angles are given in degrees, couplings in mT, the field in uT and rates in
s^-1. Every command writes CSV files plus ``manifest.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import observables as obs
from .output import OutputError, config_to_dict, emit_csv, emit_records, write_manifest
from .pipeline import RunConfig, deterministic_blas, run_point
from .propagation import Engine, HorizonError, IntegratorConfig, PropagationError, Sampler
from .rp_model import RateSpec
from .spin_core import (
    DEFAULT_B0_UT,
    DEFAULT_DIPOLAR_SCALE,
    CouplingSpec,
    DimensionError,
    FieldConvention,
    FieldSpec,
    dipolar_constant_from_distance,
)
from .sweep import SweepError, ratio_pair, chi_curves, correlation_study, decoherence_table, rate_table
from .systemfile import SystemFileError, load_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_RATE_GRID = (1e4, 1e5, 1e6, 1e7, 1e8)
DEFAULT_KDEC_GRID = (0.0, 1e4, 1e5, 1e6, 1e7)

log = logging.getLogger("chiralrp")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("system and physics")
    g.add_argument("--system", default="toy-1n1n", help="bundled set (toy-1n1n, toy-2n2n, toy-3n3n) or JSON file")
    g.add_argument("--chi-deg", type=float, default=0.0, help="CISS angle in degrees, 0..90")
    g.add_argument("--theta-deg", type=float, default=0.0)
    g.add_argument("--phi-deg", type=float, default=0.0)
    g.add_argument("--b0-ut", type=float, default=DEFAULT_B0_UT, help="field strength in uT")
    g.add_argument("--field-convention", choices=[c.value for c in FieldConvention],
                   default=FieldConvention.STANDARD_SPHERICAL.value)
    g.add_argument("--kf", type=float, default=1e6, help="signaling-state rate k_F (1/s)")
    g.add_argument("--kr", type=float, default=1e8, help="recombination rate k_R (1/s)")
    g.add_argument("--kdec", type=float, default=0.0, help="Pauli dephasing rate (1/s)")
    g.add_argument("--j-mt", type=float, default=0.0, help="exchange coupling J (mT)")
    d = g.add_mutually_exclusive_group()
    d.add_argument("--d-mt", type=float, default=None, help="dipolar coupling D (mT, signed)")
    d.add_argument("--r-nm", type=float, default=None, help="electron distance (nm), converted to D")
    g.add_argument("--dipolar-scale", type=float, default=DEFAULT_DIPOLAR_SCALE,
                   help="kappa in kappa*D*(n n^T - I/3)")
    g.add_argument("--renormalize", action="store_true", help="evaluate entropies on rho/Tr rho")
    g.add_argument("--paper-literal-bracket", action="store_true",
                   help="debug: commutator instead of anticommutator for recombination")

    n = p.add_argument_group("numerics and execution")
    n.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.EIGENBASIS.value)
    n.add_argument("--dt", type=float, default=2.5e-10, help="RK4 step (s)")
    n.add_argument("--trace-eps", type=float, default=1e-6)
    n.add_argument("--samples", type=int, default=2000)
    n.add_argument("--sampler", choices=[s.value for s in Sampler], default=Sampler.FRONT_LOADED.value)
    n.add_argument("--workers", type=int, default=1)
    n.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                   help="single-threaded BLAS and no timing data, for byte-identical output")
    n.add_argument("--checkpoint", default=None, help="JSON-lines file for resumable sweeps")
    n.add_argument("--out", default="out", help="output directory")
    n.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="chiralrp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("trajectory", parents=[common], help="C_L(t), C_G(t) time series")

    chi_help = "comma-separated chi values in degrees (default 0,5,...,90)"
    for name, help_text in (("chi-sweep", "M_G(chi), M_L(chi) curves"), ("gap", "interaction gap curves vs chi")):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.add_argument("--chi-list-deg", type=_floats, default=None, help=chi_help)
        grp = sp.add_mutually_exclusive_group()
        grp.add_argument("--dipolar-list", type=_floats, default=None, help="D values in mT")
        grp.add_argument("--exchange-list", type=_floats, default=None, help="J values in mT")

    sp = sub.add_parser("rate-table", parents=[common], help="ratio M(90)/M(0) over (k_R, k_F) grids")
    sp.add_argument("--kf-list", type=_floats, default=list(DEFAULT_RATE_GRID))
    sp.add_argument("--kr-list", type=_floats, default=list(DEFAULT_RATE_GRID))

    sp = sub.add_parser("decoherence-table", parents=[common], help="ratio M(90)/M(0) vs dephasing rate")
    sp.add_argument("--kdec-list", type=_floats, default=list(DEFAULT_KDEC_GRID))

    sp = sub.add_parser("correlate", parents=[common], help="M_G, M_L vs phi_F over field orientations")
    sp.add_argument("--grid", type=int, default=50, help="n for an n x n (theta, phi) grid")
    return parser


def config_from_args(args) -> RunConfig:
    try:
        system = load_system(args.system)
        if args.r_nm is not None:
            d_mt = dipolar_constant_from_distance(args.r_nm)
        else:
            d_mt = args.d_mt or 0.0
        phi = math.radians(args.phi_deg) % (2 * math.pi)
        return RunConfig(
            system=system,
            chi=math.radians(args.chi_deg),
            field=FieldSpec(args.b0_ut, math.radians(args.theta_deg), phi, args.field_convention),
            coupling=CouplingSpec(args.j_mt, d_mt, dipolar_scale=args.dipolar_scale),
            rates=RateSpec(args.kf, args.kr, args.kdec),
            integrator=IntegratorConfig(args.dt, args.trace_eps, args.samples, args.sampler, args.engine),
            renormalize_before_entropy=args.renormalize,
            paper_literal_bracket=args.paper_literal_bracket,
        )
    except SystemFileError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _manifest(args, config: RunConfig, outputs: dict, extra: dict | None = None) -> dict:
    doc = {
        "command": args.command,
        "argv": list(args.argv),
        "config": config_to_dict(config),
        "system_source": args.system,
        "workers": args.workers,
        "deterministic": args.deterministic,
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    return doc


def cmd_trajectory(args, config: RunConfig, out: Path) -> int:
    with deterministic_blas(args.deterministic):
        res = run_point(config)
    s = res.trajectory.scalars
    t = res.trajectory.times
    emit_csv(({"t_s": a, "C_G_nats": b} for a, b in zip(t, s["c_global"])), out / "coherence_global.csv",
             ["t_s", "C_G_nats"])
    emit_csv(({"t_s": a, "C_L_nats": b} for a, b in zip(t, s["c_local"])), out / "coherence_local.csv",
             ["t_s", "C_L_nats"])
    cols = ["t_s", "trace", "recomb", "C_L_nats", "C_G_nats"]
    rows = ({"t_s": a, "trace": b, "recomb": c, "C_L_nats": d, "C_G_nats": e}
            for a, b, c, d, e in zip(t, s["trace"], s["recomb"], s["c_local"], s["c_global"]))
    emit_csv(rows, out / "trajectory.csv", cols)
    summary = {
        "M_G": res.m_global.value,
        "M_G_tail_bound": res.m_global.tail_bound,
        "M_L": res.m_local.value,
        "M_L_tail_bound": res.m_local.tail_bound,
        "phi_F": res.yields.phi_f,
        "phi_R": res.yields.phi_r,
        "flags": res.flags,
        "warnings": res.trajectory.warnings,
        "engine": res.trajectory.engine.value,
    }
    write_manifest(out / "manifest.json", _manifest(
        args, config, {"series": ["coherence_global.csv", "coherence_local.csv", "trajectory.csv"]},
        {"summary": summary}))
    print(f"M_G = {res.m_global.value:.6e} nats*s  M_L = {res.m_local.value:.6e} nats*s  "
          f"phi_F = {res.yields.phi_f:.6f}  phi_R = {res.yields.phi_r:.6f}")
    return EXIT_OK if res.ok else EXIT_NUMERICAL


def _chi_grid(args) -> list[float]:
    degs = args.chi_list_deg if args.chi_list_deg is not None else list(np.arange(0, 91, 5.0))
    return [math.radians(d) for d in degs]


def _interaction(args, config: RunConfig):
    if args.exchange_list is not None:
        return "j_mt", args.exchange_list
    if args.dipolar_list is not None:
        return "d_mt", args.dipolar_list
    return "d_mt", [config.coupling.d_mt]


def _sweep_kwargs(args):
    return {"workers": args.workers, "deterministic": args.deterministic, "checkpoint": args.checkpoint}


def _failed(records) -> int:
    bad = [r for r in records if r.error]
    for r in bad:
        log.error("point %d %s failed: %s", r.index, r.coords, r.error)
    return EXIT_NUMERICAL if bad else EXIT_OK


def cmd_chi_sweep(args, config, out) -> int:
    name, values = _interaction(args, config)
    curves = chi_curves(_chi_grid(args), config, name, values, **_sweep_kwargs(args))
    emit_records(curves.records, out / "chi_sweep.csv", not args.deterministic)
    rows = []
    for i, v in enumerate(curves.interaction_values):
        gm, g = ratio_pair(curves.m_global[i, 0], curves.m_global[i, -1])
        lm, l = ratio_pair(curves.m_local[i, 0], curves.m_local[i, -1])
        rows.append({name: v, "ratio_maxmin_G": gm, "ratio_ciss_G": g, "ratio_maxmin_L": lm, "ratio_ciss_L": l})
    emit_csv(rows, out / "delta_m.csv", [name, "ratio_maxmin_G", "ratio_ciss_G", "ratio_maxmin_L", "ratio_ciss_L"])
    write_manifest(out / "manifest.json", _manifest(args, config, {"records": "chi_sweep.csv", "delta_m": "delta_m.csv"},
                                                    {"chi_rad": curves.chi_values, name: curves.interaction_values}))
    return _failed(curves.records)


def cmd_gap(args, config, out) -> int:
    name, values = _interaction(args, config)
    values = [0.0] + [v for v in values if v != 0.0]
    curves = chi_curves(_chi_grid(args), config, name, values, **_sweep_kwargs(args))
    gap_g, gap_l = curves.gaps(0)
    rows = []
    for i, v in enumerate(curves.interaction_values[1:], start=1):
        for j, chi in enumerate(curves.chi_values):
            rows.append({name: v, "chi_rad": chi, "delta_G": gap_g[i, j], "delta_L": gap_l[i, j]})
    emit_csv(rows, out / "gap.csv", [name, "chi_rad", "delta_G", "delta_L"])
    emit_records(curves.records, out / "chi_sweep.csv", not args.deterministic)
    write_manifest(out / "manifest.json", _manifest(args, config, {"gap": "gap.csv", "records": "chi_sweep.csv"},
                                                    {"baseline": {name: 0.0}}))
    return _failed(curves.records)


def _grid_rows(kr_values, kf_values, matrix):
    return [{"k_r": kr, **{f"k_f={kf!r}": matrix[r, c] for c, kf in enumerate(kf_values)}}
            for r, kr in enumerate(kr_values)]


def cmd_rate_table(args, config, out) -> int:
    table = rate_table(args.kf_list, args.kr_list, config, **_sweep_kwargs(args))
    cols = ["k_r"] + [f"k_f={kf!r}" for kf in table.kf_values]
    emit_csv(_grid_rows(table.kr_values, table.kf_values, table.global_ratio), out / "rate_table_global.csv", cols)
    emit_csv(_grid_rows(table.kr_values, table.kf_values, table.local_ratio), out / "rate_table_local.csv", cols)
    emit_records(table.records, out / "rate_records.csv", not args.deterministic)
    write_manifest(out / "manifest.json", _manifest(args, config, {
        "global": "rate_table_global.csv", "local": "rate_table_local.csv", "records": "rate_records.csv"}))
    for label, m in (("global", table.global_ratio), ("local", table.local_ratio)):
        print(f"ratio M(90)/M(0), {label} scope (rows k_R, columns k_F):")
        for kr, row in zip(table.kr_values, m):
            print(f"  {kr:8.0e} " + " ".join(f"{x:8.3f}" for x in row))
    return _failed(table.records)


def cmd_decoherence_table(args, config, out) -> int:
    table = decoherence_table(args.kdec_list, config, **_sweep_kwargs(args))
    rows = [{"k_dec": k, "ratio_maxmin_G": table.global_maxmin[i], "ratio_ciss_G": table.global_ratio[i],
             "ratio_maxmin_L": table.local_maxmin[i], "ratio_ciss_L": table.local_ratio[i]}
            for i, k in enumerate(table.kdec_values)]
    emit_csv(rows, out / "decoherence_table.csv",
             ["k_dec", "ratio_maxmin_G", "ratio_ciss_G", "ratio_maxmin_L", "ratio_ciss_L"])
    emit_records(table.records, out / "decoherence_records.csv", not args.deterministic)
    write_manifest(out / "manifest.json", _manifest(args, config, {
        "table": "decoherence_table.csv", "records": "decoherence_records.csv"}))
    for row in rows:
        print(f"  k={row['k_dec']:8.0e}  G {row['ratio_ciss_G']:.3f}  L {row['ratio_ciss_L']:.3f}")
    return _failed(table.records)


def cmd_correlate(args, config, out) -> int:
    study = correlation_study(config, args.grid, args.grid, strict=False, **_sweep_kwargs(args))
    emit_records(study.records, out / "scatter.csv", not args.deterministic)
    rows = []
    for scope, fit in (("global", study.global_fit), ("local", study.local_fit)):
        if fit is None:
            rows.append({"scope": scope, "r": math.nan, "slope": math.nan, "intercept": math.nan, "n": 0})
        else:
            rows.append({"scope": scope, "r": fit.r, "slope": fit.slope, "intercept": fit.intercept, "n": fit.n})
    emit_csv(rows, out / "correlation.csv", ["scope", "r", "slope", "intercept", "n"])
    write_manifest(out / "manifest.json", _manifest(args, config, {"scatter": "scatter.csv",
                                                                   "correlation": "correlation.csv"},
                                                    {"fit_errors": study.errors}))
    for row in rows:
        print(f"  R({row['scope']}) = {row['r']:.6f}  (n = {row['n']})")
    if study.errors:
        for scope, msg in study.errors.items():
            log.error("correlation for %s undefined: %s", scope, msg)
        return EXIT_NUMERICAL
    return _failed(study.records)


COMMANDS = {
    "trajectory": cmd_trajectory,
    "chi-sweep": cmd_chi_sweep,
    "gap": cmd_gap,
    "rate-table": cmd_rate_table,
    "decoherence-table": cmd_decoherence_table,
    "correlate": cmd_correlate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        return COMMANDS[args.command](args, config, Path(args.out))
    except (ConfigError, SystemFileError, SweepError, DimensionError, OutputError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PropagationError, HorizonError, obs.InvalidStateError, obs.CorrelationUndefinedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
