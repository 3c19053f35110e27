"""CISS-parameterized radical-pair states and the reaction master equation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin_core import DimensionError, SpinSystemSpec

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def check_chi(chi: float) -> float:
    chi = float(chi)
    if not 0.0 <= chi <= np.pi / 2 + 1e-12:
        raise ValueError(f"CISS angle chi must lie in [0, pi/2], got {chi}")
    return min(chi, np.pi / 2)


@dataclass(frozen=True)
class RateSpec:
    """Reaction and decoherence rates in s^-1.

    ``k_f`` feeds the signaling state, ``k_r`` recombines through P_R and
    ``k_dec`` scales the six Pauli dephasing channels (0 disables them).
    """

    k_f: float = 1e6
    k_r: float = 1e8
    k_dec: float = 0.0

    def __post_init__(self):
        for name in ("k_f", "k_r", "k_dec"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def initial_electron_state(chi: float) -> np.ndarray:
    """|psi_I> in the (uu, ud, du, dd) basis, D electron first."""
    chi = check_chi(chi)
    s, c = np.sin(chi / 2), np.cos(chi / 2)
    return np.array([0.0, (s + c), (s - c), 0.0], dtype=complex) / np.sqrt(2)


def recombination_electron_state(chi: float) -> np.ndarray:
    chi = check_chi(chi)
    s, c = np.sin(chi / 2), np.cos(chi / 2)
    return np.array([0.0, -(s - c), -(s + c), 0.0], dtype=complex) / np.sqrt(2)


def initial_density(chi: float, system: SpinSystemSpec) -> np.ndarray:
    """|psi_I><psi_I| tensored with the maximally mixed nuclear state."""
    psi = initial_electron_state(chi)
    z = system.nuclear_dim
    return np.kron(np.outer(psi, psi.conj()), np.eye(z) / z)


def recombination_projector(chi: float, system: SpinSystemSpec) -> np.ndarray:
    psi = recombination_electron_state(chi)
    return np.kron(np.outer(psi, psi.conj()), np.eye(system.nuclear_dim))


def collapse_operators(system: SpinSystemSpec) -> list[np.ndarray]:
    """sigma_{x,y,z} on the D electron, then on the A electron, padded with identities."""
    z = system.nuclear_dim
    eye2, eye_n = np.eye(2), np.eye(z)
    ops = [np.kron(np.kron(p, eye2), eye_n) for p in PAULI]
    ops += [np.kron(np.kron(eye2, p), eye_n) for p in PAULI]
    return ops


def pauli_dissipator(rho: np.ndarray, nuclear_dim: int) -> np.ndarray:
    """Sum over the six electron Pauli channels of C rho C^+ - {C^+ C, rho}/2.

    Uses the single-qubit twirl identity sum_a s_a X s_a = 2 Tr(X) I - X, so no
    full-size operator products are needed.
    """
    d = rho.shape[0]
    t = rho.reshape(2, 2, nuclear_dim, 2, 2, nuclear_dim)
    tr_d = np.einsum("abjakl->bjkl", t)  # trace out electron D
    tr_a = np.einsum("abjcbl->ajcl", t)  # trace out electron A
    eye2 = np.eye(2)
    out = np.einsum("ac,bjkl->abjckl", eye2, tr_d).reshape(d, d)
    out = out + np.einsum("bk,ajcl->abjckl", eye2, tr_a).reshape(d, d)
    return 2.0 * out - 8.0 * rho


def master_rhs(
    rho: np.ndarray,
    hamiltonian: np.ndarray,
    projector: np.ndarray,
    rates: RateSpec,
    nuclear_dim: int | None = None,
    paper_literal_bracket: bool = False,
) -> np.ndarray:
    """d rho/dt for coherent evolution, spin-selective reaction and dephasing.

    Recombination uses the Haberkorn anticommutator ``-(k_R/2){P_R, rho}``.
    ``paper_literal_bracket`` swaps in the commutator ``-(k_R/2)[P_R, rho]``
    for inspection only; it does not drain the trace.
    """
    if rho.shape != hamiltonian.shape or rho.shape != projector.shape:
        raise DimensionError(f"shape mismatch: rho {rho.shape}, H {hamiltonian.shape}, P_R {projector.shape}")
    h_rho = hamiltonian @ rho
    out = -1j * (h_rho - rho @ hamiltonian)
    if rates.k_r:
        p_rho = projector @ rho
        rho_p = rho @ projector
        bracket = p_rho - rho_p if paper_literal_bracket else p_rho + rho_p
        out -= 0.5 * rates.k_r * bracket
    if rates.k_f:
        out -= rates.k_f * rho
    if rates.k_dec:
        z = nuclear_dim if nuclear_dim is not None else rho.shape[0] // 4
        out += rates.k_dec * pauli_dissipator(rho, z)
    return out


def effective_hamiltonian(hamiltonian: np.ndarray, projector: np.ndarray, rates: RateSpec) -> np.ndarray:
    """Non-Hermitian H_eff with rhs(rho) = -i (H_eff rho - rho H_eff^+) when k_dec = 0."""
    if rates.k_dec != 0:
        raise ValueError("effective Hamiltonian only exists without Lindblad dephasing (k_dec = 0)")
    dim = hamiltonian.shape[0]
    return hamiltonian - 0.5j * rates.k_r * projector - 0.5j * rates.k_f * np.eye(dim)
