"""Time evolution of the radical-pair density matrix.

Two engines share one output type:

* ``eigenbasis`` diagonalizes the non-Hermitian effective Hamiltonian once and
  evaluates rho(t) in closed form at every sample time (k_dec = 0 only).
* ``runge_kutta_4`` is a fixed-step classical RK4 on the full master equation,
  needed whenever Lindblad dephasing is on.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .rp_model import RateSpec

log = logging.getLogger(__name__)

Probe = Callable[[np.ndarray], dict]

# Build the dense RK4 propagator when the Liouville space is at most this big.
SUPEROPERATOR_MAX_DIM = 32


class Engine(str, enum.Enum):
    EIGENBASIS = "eigenbasis"
    RUNGE_KUTTA_4 = "runge_kutta_4"


class Sampler(str, enum.Enum):
    UNIFORM = "uniform"
    FRONT_LOADED = "front_loaded"


class HorizonError(ValueError):
    """No decay channel bounds the trace, so no finite horizon exists."""


class PropagationError(RuntimeError):
    """Integration became numerically invalid."""


class IllConditionedError(PropagationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 2.5e-10
    trace_eps: float = 1e-6
    sample_count: int = 2000
    sampler: Sampler = Sampler.FRONT_LOADED
    engine: Engine = Engine.EIGENBASIS
    cond_limit: float = 1e8
    max_step_phase: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "sampler", Sampler(self.sampler))
        object.__setattr__(self, "engine", Engine(self.engine))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.trace_eps < 1:
            raise ValueError(f"trace_eps must lie in (0, 1), got {self.trace_eps}")
        if self.sample_count < 16:
            raise ValueError(f"sample_count must be >= 16, got {self.sample_count}")


@dataclass
class Trajectory:
    times: np.ndarray
    scalars: dict[str, np.ndarray]
    horizon: float
    engine: Engine
    dim: int = 4
    config: IntegratorConfig | None = None
    states: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)
    # exact or step-resolved integrals over [0, horizon] of Tr rho and Tr[P rho]
    integrals: dict[str, float] | None = None

    def __len__(self):
        return len(self.times)

    @property
    def trace(self) -> np.ndarray:
        return self.scalars["trace"]


def choose_horizon(rates: RateSpec, trace_eps: float, allow_fallback: bool = False) -> tuple[float, bool]:
    """Time T after which Tr rho(T) <= trace_eps; returns (T, used_fallback).

    Only k_F drains every state, so it alone gives a guaranteed bound. With
    k_F = 0 the k_R-based time is used if ``allow_fallback`` and the caller
    must check the final trace itself.
    """
    if rates.k_f > 0:
        return math.log(1.0 / trace_eps) / rates.k_f, False
    if rates.k_r > 0 and allow_fallback:
        return math.log(1.0 / trace_eps) / rates.k_r, True
    if rates.k_r > 0:
        raise HorizonError("k_f = 0: trace decay is not guaranteed; pass allow_fallback=True to use a k_r-based horizon")
    raise HorizonError("both k_f and k_r are zero; the horizon is undefined")


def sample_times(horizon: float, config: IntegratorConfig, snap_dt: float | None = None) -> np.ndarray:
    """Sample grid on [0, horizon].

    ``front_loaded`` spends half the budget on the first e-fold of the slowest
    guaranteed decay (quadratically packed toward t = 0) and spaces the rest
    geometrically. With ``snap_dt``
    the grid is rounded to step multiples and de-duplicated.
    """
    n = config.sample_count
    if config.sampler is Sampler.UNIFORM:
        t = np.linspace(0.0, horizon, n)
    else:
        n_burst = n // 2
        t_burst = horizon / math.log(1.0 / config.trace_eps)
        # quadratic spacing resolves fast recombination decays near t = 0
        burst = t_burst * np.linspace(0.0, 1.0, n_burst, endpoint=False) ** 2
        tail = np.geomspace(t_burst, horizon, n - n_burst)
        t = np.concatenate([burst, tail])
    if snap_dt is not None:
        steps = np.unique(np.rint(t / snap_dt).astype(np.int64))
        t = steps * snap_dt
    return t


def _collect(times, states_iter, probe, keep_states):
    rows, kept = [], []
    for rho in states_iter:
        rows.append(probe(rho) if probe is not None else {"trace": float(np.trace(rho).real)})
        if keep_states:
            kept.append(rho)
    keys = rows[0].keys() if rows else ("trace",)
    scalars = {k: np.array([r[k] for r in rows]) for k in keys}
    states = np.array(kept) if keep_states else None
    return scalars, states


def _exact_integrals(lam, v, rho_tilde, horizon, projector):
    """int_0^T of Tr rho and Tr[P rho] from the spectral form, no sampling error."""
    delta = lam[:, None] - lam.conj()[None, :]
    small = np.abs(delta * horizon) < 1e-8
    safe = np.where(small, 1.0, delta)
    g = np.where(small, horizon, (1.0 - np.exp(-1j * safe * horizon)) / (1j * safe))
    integral = v @ (rho_tilde * g) @ v.conj().T
    out = {"trace": float(np.trace(integral).real)}
    if projector is not None:
        out["recomb"] = float(np.real(np.vdot(projector, integral)))
    return out


def propagate_eigenbasis(
    h_eff: np.ndarray,
    rho0: np.ndarray,
    times: np.ndarray,
    probe: Probe | None = None,
    keep_states: bool = False,
    cond_limit: float = 1e8,
    projector: np.ndarray | None = None,
) -> Trajectory:
    """rho(t) = exp(-i H_eff t) rho0 exp(+i H_eff^+ t) via one eigendecomposition.

    The trace and, given ``projector``, Tr[P rho] are also integrated in
    closed form over [0, times[-1]].
    """
    times = np.asarray(times, dtype=float)
    lam, v = linalg.eig(h_eff)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedError(f"eigenvector condition number {cond:.3e} exceeds {cond_limit:.1e}")
    w = linalg.inv(v)
    rho_tilde = w @ rho0 @ w.conj().T
    v_dag = v.conj().T

    def states():
        for t in times:
            f = np.exp(-1j * lam * t)
            yield v @ ((f[:, None] * rho_tilde) * f.conj()[None, :]) @ v_dag

    scalars, kept = _collect(times, states(), probe, keep_states)
    integrals = _exact_integrals(lam, v, rho_tilde, float(times[-1]), projector)
    return Trajectory(times, scalars, float(times[-1]), Engine.EIGENBASIS, rho0.shape[0], states=kept,
                      integrals=integrals)


def stable_step(dt: float, hamiltonian: np.ndarray, rates: RateSpec, max_phase: float = 0.05) -> float:
    """Largest step <= dt with dt * (spectral radius + rate scale) <= max_phase."""
    radius = float(np.max(np.abs(np.linalg.eigvalsh(hamiltonian)))) if hamiltonian.size else 0.0
    scale = radius + rates.k_r + rates.k_f + 8.0 * rates.k_dec
    if scale * dt <= max_phase:
        return dt
    reduced = max_phase / scale
    log.info("reducing RK4 step from %.3e s to %.3e s", dt, reduced)
    return reduced


def _rk4_superoperator(rhs, dim, dt):
    """Exact one-step RK4 map for a linear rhs, as a (dim^2 x dim^2) matrix."""
    n = dim * dim
    gen = np.empty((n, n), dtype=complex)
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        gen[:, k] = rhs(e.reshape(dim, dim)).ravel()
    a = dt * gen
    a2 = a @ a
    return np.eye(n) + a + a2 / 2 + a2 @ a / 6 + a2 @ a2 / 24


def propagate_rk4(
    rhs: Callable[[np.ndarray], np.ndarray],
    rho0: np.ndarray,
    times: np.ndarray,
    dt: float,
    probe: Probe | None = None,
    keep_states: bool = False,
    superoperator: bool | None = None,
    projector: np.ndarray | None = None,
) -> Trajectory:
    """Classical fixed-step RK4; samples are taken at the step nearest each time.

    The state is re-symmetrized to (rho + rho^+)/2 after every step and the run
    aborts if the trace grows past 1e-6 above its initial value. Tr rho and,
    given ``projector``, Tr[P rho] are integrated by the trapezoid rule over
    every step, not just the samples.
    """
    times = np.asarray(times, dtype=float)
    steps = np.unique(np.rint(times / dt).astype(np.int64))
    dim = rho0.shape[0]
    if superoperator is None:
        superoperator = dim <= SUPEROPERATOR_MAX_DIM
    trace0 = float(np.trace(rho0).real)
    limit = trace0 + 1e-6

    if superoperator:
        prop = _rk4_superoperator(rhs, dim, dt)

        def step(r):
            r = (prop @ r.ravel()).reshape(dim, dim)
            return r
    else:
        half = dt / 2

        def step(r):
            k1 = rhs(r)
            k2 = rhs(r + half * k1)
            k3 = rhs(r + half * k2)
            k4 = rhs(r + dt * k3)
            return r + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    acc = {"trace": 0.0, "recomb": 0.0}

    def linear(r):
        tr = float(np.trace(r).real)
        return tr, (float(np.real(np.vdot(projector, r))) if projector is not None else 0.0)

    def states():
        rho = np.array(rho0, dtype=complex)
        prev = linear(rho)
        n_done = 0
        for target in steps:
            for _ in range(target - n_done):
                rho = step(rho)
                rho = (rho + rho.conj().T) / 2
                cur = linear(rho)
                acc["trace"] += 0.5 * dt * (prev[0] + cur[0])
                acc["recomb"] += 0.5 * dt * (prev[1] + cur[1])
                prev = cur
            n_done = target
            tr = float(np.trace(rho).real)
            if not np.isfinite(tr) or tr > limit:
                raise PropagationError(f"trace grew to {tr!r} at t={target * dt:.3e} s (step {dt:.3e} s too large?)")
            yield rho

    sample_t = steps * dt
    scalars, kept = _collect(sample_t, states(), probe, keep_states)
    integrals = dict(acc) if projector is not None else {"trace": acc["trace"]}
    return Trajectory(sample_t, scalars, float(sample_t[-1]), Engine.RUNGE_KUTTA_4, dim, states=kept,
                      integrals=integrals)
