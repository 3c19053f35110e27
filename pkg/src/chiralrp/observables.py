"""Entropies, relative-entropy coherence, yields and summary statistics.

Entropies are evaluated on the subnormalized state exactly as the master
equation produces it. For rho = t*sigma this gives C(rho) = t*C(sigma), so the
coherence decays with the surviving population and its time integral converges.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .propagation import Trajectory
from .spin_core import DimensionError, SpinSystemSpec

NEGATIVE_EIG_TOL = 1e-8
# rounding slack on Tr rho(T) <= trace_eps
HORIZON_SLACK = 1e-3


class InvalidStateError(ValueError):
    """Density matrix has an eigenvalue below the numerical floor."""


class CorrelationUndefinedError(ValueError):
    """One of the series has zero variance."""


class CoherenceScope(str, enum.Enum):
    LOCAL = "local"
    GLOBAL = "global"


def _entropy_from_eigs(eigs: np.ndarray, trace: float | None = None, strict: bool = True) -> float:
    trace = float(np.sum(eigs)) if trace is None else trace
    floor = -NEGATIVE_EIG_TOL * max(abs(trace), 1.0)
    if strict and eigs.size and eigs.min() < floor:
        raise InvalidStateError(f"eigenvalue {eigs.min():.3e} below floor {floor:.1e}")
    p = eigs[eigs > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho: np.ndarray, strict: bool = True) -> float:
    """S(rho) = -Tr rho ln rho in nats; tiny negative eigenvalues are clipped.

    With ``strict`` an eigenvalue below the numerical floor raises instead.
    """
    eigs = np.linalg.eigvalsh(rho)
    return _entropy_from_eigs(eigs, float(np.trace(rho).real), strict)


def diagonal_entropy(rho: np.ndarray, strict: bool = True) -> float:
    """Entropy of the state dephased in the computational product basis."""
    return _entropy_from_eigs(np.real(np.diag(rho)), float(np.trace(rho).real), strict)


def partial_trace_to_electrons(rho: np.ndarray, system: SpinSystemSpec | int) -> np.ndarray:
    """Reduced 4x4 electron-pair state (electrons occupy the leading factors)."""
    z = system if isinstance(system, (int, np.integer)) else system.nuclear_dim
    if rho.shape != (4 * z, 4 * z):
        raise DimensionError(f"state of shape {rho.shape} does not match electron x nuclear dim 4*{z}")
    return np.einsum("ajbj->ab", rho.reshape(4, z, 4, z))


def coherence(rho: np.ndarray, scope: CoherenceScope | str, system: SpinSystemSpec | int) -> float:
    scope = CoherenceScope(scope)
    if scope is CoherenceScope.LOCAL:
        rho = partial_trace_to_electrons(rho, system)
    return diagonal_entropy(rho) - von_neumann_entropy(rho)


class StateProbe:
    """Per-sample scalar extractor handed to the propagators.

    Besides the physical scalars it records the diagnostics the state
    invariants are checked against (Hermiticity, lowest eigenvalue, both
    global entropies).
    """

    def __init__(self, system: SpinSystemSpec, projector: np.ndarray, renormalize: bool = False,
                 strict: bool = True):
        self.z = system.nuclear_dim
        self.projector = projector
        self.renormalize = renormalize
        self.strict = strict

    def __call__(self, rho: np.ndarray) -> dict:
        herm_dev = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
        rho = (rho + rho.conj().T) / 2
        trace = float(np.trace(rho).real)
        recomb = float(np.real(np.vdot(self.projector, rho)))  # Tr[P_R rho], P_R Hermitian
        state = rho / trace if self.renormalize and trace > 0 else rho

        eigs = np.linalg.eigvalsh(state)
        s_glob = _entropy_from_eigs(eigs, trace, self.strict)
        s_glob_diag = _entropy_from_eigs(np.real(np.diag(state)), trace, self.strict)
        el = partial_trace_to_electrons(state, self.z)
        c_loc = diagonal_entropy(el, self.strict) - von_neumann_entropy(el, self.strict)
        return {
            "trace": trace,
            "recomb": recomb,
            "c_local": c_loc,
            "c_global": s_glob_diag - s_glob,
            "s_global": s_glob,
            "s_global_diag": s_glob_diag,
            "min_eig": float(eigs[0]) if eigs.size else 0.0,
            "herm_dev": herm_dev,
        }


def trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(y, x))


@dataclass(frozen=True)
class TotalCoherence:
    """Time-integrated coherence with its truncation diagnostics (nats*s)."""

    value: float
    tail_estimate: float
    tail_bound: float
    horizon_reached: bool

    def __float__(self):
        return self.value


def total_coherence(
    traj: Trajectory,
    scope: CoherenceScope | str,
    k_f: float,
    trace_eps: float = 1e-6,
) -> TotalCoherence:
    """Trapezoidal integral of C(t) over the trajectory.

    The tail beyond the horizon is estimated as C(T)/k_F and bounded by
    Tr rho(T) ln(dim)/k_F; both are reported, neither is added.
    """
    key = "c_local" if CoherenceScope(scope) is CoherenceScope.LOCAL else "c_global"
    c = traj.scalars[key]
    value = trapezoid(c, traj.times)
    final_trace = float(traj.trace[-1])
    dim = 4 if key == "c_local" else traj.dim
    if k_f > 0:
        tail_est = max(float(c[-1]), 0.0) / k_f
        tail_bound = final_trace * math.log(dim) / k_f
    else:
        tail_est = tail_bound = 0.0 if final_trace <= trace_eps * (1 + HORIZON_SLACK) else math.inf
    return TotalCoherence(value, tail_est, tail_bound, final_trace <= trace_eps * (1 + HORIZON_SLACK))


@dataclass(frozen=True)
class YieldPair:
    phi_f: float
    phi_r: float
    horizon_reached: bool
    conserved: bool

    @property
    def total(self) -> float:
        return self.phi_f + self.phi_r


def yields(traj: Trajectory, k_f: float, k_r: float, trace_eps: float = 1e-6, check_conservation: bool = True) -> YieldPair:
    """phi_F = k_F int Tr rho dt and phi_R = k_R int Tr[P_R rho] dt.

    The propagators' step-resolved or closed-form integrals are used when
    present, else the sampled series. Both integrals get a tail term assuming
    decay at k_F past the horizon. ``conserved`` is False if phi_F + phi_R
    leaves 1 +/- 5e-3 while ``check_conservation`` applies (no dephasing loss
    terms in the budget).
    """
    tr, rec = traj.trace, traj.scalars["recomb"]
    integrals = traj.integrals or {}
    int_tr = integrals.get("trace", trapezoid(tr, traj.times))
    int_rec = integrals.get("recomb", trapezoid(rec, traj.times))
    t_end = float(tr[-1])
    tail_tr = t_end / k_f if k_f > 0 else 0.0
    tail_rec = float(rec[-1]) / k_f if k_f > 0 else 0.0
    phi_f = k_f * (int_tr + tail_tr)
    phi_r = k_r * (int_rec + tail_rec)
    reached = t_end <= trace_eps * (1 + HORIZON_SLACK)
    conserved = (not check_conservation) or abs(phi_f + phi_r - 1.0) <= 5e-3
    return YieldPair(phi_f, phi_r, reached, conserved)


def delta_m(m_at_chi0: float, m_at_chi90: float) -> tuple[float, float]:
    """(max/min over the two CISS extremes, M(pi/2)/M(0))."""
    a, b = float(m_at_chi0), float(m_at_chi90)
    if a <= 0 or b <= 0:
        raise ZeroDivisionError(f"total coherences must be positive, got M(0)={a}, M(90)={b}")
    if a == b:
        return 1.0, 1.0
    return max(a, b) / min(a, b), b / a


def interaction_gap(baseline, with_interaction) -> np.ndarray:
    """Pointwise M_baseline(chi) - M_interaction(chi); negative means the coupling helps."""
    base = np.asarray(baseline, dtype=float)
    other = np.asarray(with_interaction, dtype=float)
    if base.shape != other.shape:
        raise ValueError(f"chi grids differ: {base.shape} vs {other.shape}")
    return base - other


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    slope: float
    intercept: float
    n: int


def pearson_fit(xs, ys) -> CorrelationResult:
    """Pearson coefficient and least-squares line y = slope*x + intercept."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D sequences of equal length")
    n = x.size
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy, sxy = float(dx @ dx), float(dy @ dy), float(dx @ dy)
    if sxx <= (1e-12 * np.max(np.abs(x))) ** 2 * n or syy <= (1e-12 * np.max(np.abs(y))) ** 2 * n:
        raise CorrelationUndefinedError("zero variance in xs or ys; correlation is undefined")
    r = sxy / math.sqrt(sxx * syy)
    slope = sxy / sxx
    return CorrelationResult(max(-1.0, min(1.0, r)), slope, float(y.mean() - slope * x.mean()), n)
