"""Single-point pipeline: configuration in, total coherences and yields out."""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from functools import partial

import numpy as np
from threadpoolctl import threadpool_limits

from . import observables as obs
from .propagation import (
    Engine,
    IllConditionedError,
    IntegratorConfig,
    Trajectory,
    choose_horizon,
    propagate_eigenbasis,
    propagate_rk4,
    sample_times,
    stable_step,
)
from .rp_model import RateSpec, check_chi, effective_hamiltonian, initial_density, master_rhs, recombination_projector
from .spin_core import DEFAULT_MAX_DIM, CouplingSpec, FieldSpec, SpinSystemSpec, build_hamiltonian

HERMITICITY_TOL = 1e-9
MIN_EIG_TOL = -1e-8
TRACE_SLACK = 1e-9
COHERENCE_FLOOR = -1e-10
FLAG_KEYS = (
    "horizon_reached",
    "yield_conserved",
    "hermitian",
    "psd",
    "trace_monotone",
    "klein",
    "coherence_nonnegative",
    "finite",
)


@dataclass(frozen=True)
class RunConfig:
    system: SpinSystemSpec
    chi: float = 0.0
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    coupling: CouplingSpec = dc_field(default_factory=CouplingSpec)
    rates: RateSpec = dc_field(default_factory=RateSpec)
    integrator: IntegratorConfig = dc_field(default_factory=IntegratorConfig)
    renormalize_before_entropy: bool = False
    paper_literal_bracket: bool = False
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        object.__setattr__(self, "chi", check_chi(self.chi))

    def with_(self, **changes) -> "RunConfig":
        """Copy with top-level fields or nested ``field__x`` style overrides replaced."""
        nested: dict[str, dict] = {}
        top = {}
        for key, value in changes.items():
            if "__" in key:
                outer, inner = key.split("__", 1)
                nested.setdefault(outer, {})[inner] = value
            else:
                top[key] = value
        for outer, inner in nested.items():
            top[outer] = replace(top.get(outer, getattr(self, outer)), **inner)
        return replace(self, **top)


@dataclass
class PointResult:
    m_global: obs.TotalCoherence
    m_local: obs.TotalCoherence
    yields: obs.YieldPair
    trajectory: Trajectory
    flags: dict[str, bool]
    wall_time: float

    @property
    def ok(self) -> bool:
        return all(self.flags.values())


@contextlib.contextmanager
def deterministic_blas(enabled: bool = True):
    """Pin BLAS/LAPACK to one thread so reductions are bitwise repeatable."""
    if not enabled:
        yield
        return
    with threadpool_limits(limits=1):
        yield


@dataclass(frozen=True)
class Operators:
    hamiltonian: np.ndarray
    projector: np.ndarray
    rho0: np.ndarray


def build_operators(config: RunConfig) -> Operators:
    h = build_hamiltonian(config.system, config.field, config.coupling, max_dim=config.max_dim)
    return Operators(
        h,
        recombination_projector(config.chi, config.system),
        initial_density(config.chi, config.system),
    )


def simulate(config: RunConfig, keep_states: bool = False, operators: Operators | None = None) -> Trajectory:
    """Propagate the configured radical pair to its horizon with the requested engine.

    Dephasing or the literal-commutator debug mode force RK4; an ill-conditioned
    eigenbasis falls back to RK4. Either switch is noted in ``warnings``.
    """
    ops = operators or build_operators(config)
    cfg = config.integrator
    rates = config.rates
    warnings = []
    horizon, fallback = choose_horizon(rates, cfg.trace_eps, allow_fallback=True)
    if fallback:
        warnings.append("horizon_fallback")
    # the commutator debug mode is not positivity preserving; report, don't raise
    probe = obs.StateProbe(config.system, ops.projector, config.renormalize_before_entropy,
                           strict=not config.paper_literal_bracket)

    engine = cfg.engine
    if engine is Engine.EIGENBASIS and (rates.k_dec > 0 or config.paper_literal_bracket):
        warnings.append("engine_override:runge_kutta_4")
        engine = Engine.RUNGE_KUTTA_4

    traj = None
    if engine is Engine.EIGENBASIS:
        times = sample_times(horizon, cfg)
        h_eff = effective_hamiltonian(ops.hamiltonian, ops.projector, rates)
        try:
            traj = propagate_eigenbasis(h_eff, ops.rho0, times, probe, keep_states, cfg.cond_limit, ops.projector)
        except IllConditionedError as exc:
            warnings.append(f"eigenbasis_fallback:{exc}")
            engine = Engine.RUNGE_KUTTA_4
    if traj is None:
        dt = stable_step(cfg.dt, ops.hamiltonian, rates, cfg.max_step_phase)
        if dt != cfg.dt:
            warnings.append(f"dt_reduced:{dt!r}")
        times = sample_times(horizon, cfg, snap_dt=dt)
        rhs = partial(
            master_rhs,
            hamiltonian=ops.hamiltonian,
            projector=ops.projector,
            rates=rates,
            nuclear_dim=config.system.nuclear_dim,
            paper_literal_bracket=config.paper_literal_bracket,
        )
        traj = propagate_rk4(rhs, ops.rho0, times, dt, probe, keep_states, projector=ops.projector)
    traj.config = cfg
    traj.warnings.extend(warnings)
    return traj


def check_invariants(traj: Trajectory) -> dict[str, bool]:
    s = traj.scalars
    return {
        "hermitian": bool(np.max(s["herm_dev"]) < HERMITICITY_TOL),
        "psd": bool(np.min(s["min_eig"]) > MIN_EIG_TOL),
        "trace_monotone": bool(np.all(np.diff(s["trace"]) <= TRACE_SLACK)),
        "klein": bool(np.all(s["s_global_diag"] - s["s_global"] >= COHERENCE_FLOOR)),
        "coherence_nonnegative": bool(
            np.min(s["c_local"]) >= COHERENCE_FLOOR and np.min(s["c_global"]) >= COHERENCE_FLOOR
        ),
    }


def run_point(config: RunConfig, keep_states: bool = False) -> PointResult:
    start = time.perf_counter()
    traj = simulate(config, keep_states=keep_states)
    k_f, eps = config.rates.k_f, config.integrator.trace_eps
    m_g = obs.total_coherence(traj, obs.CoherenceScope.GLOBAL, k_f, eps)
    m_l = obs.total_coherence(traj, obs.CoherenceScope.LOCAL, k_f, eps)
    y = obs.yields(traj, k_f, config.rates.k_r, eps, check_conservation=not config.paper_literal_bracket)
    flags = {"horizon_reached": y.horizon_reached, "yield_conserved": y.conserved}
    flags.update(check_invariants(traj))
    flags["finite"] = bool(np.isfinite([m_g.value, m_l.value, y.phi_f, y.phi_r]).all())
    return PointResult(m_g, m_l, y, traj, flags, time.perf_counter() - start)
