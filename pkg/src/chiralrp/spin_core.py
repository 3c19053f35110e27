"""Spin operators and the radical-pair Hamiltonian.

Tensor-product ordering used throughout the package::

    [electron_D, electron_A, donor nuclei..., acceptor nuclei...]

All couplings are carried in mT and converted once to angular frequency
(rad/s) with a single electron gyromagnetic ratio.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

GAMMA_E = 1.76086e11  # rad s^-1 T^-1
MT = 1e-3  # T per mT
UT = 1e-6  # T per uT
DIPOLAR_UT_NM3 = -2.78e3  # D(r) [uT] * (r [nm])^3

DEFAULT_B0_UT = 50.0
DEFAULT_MAX_DIM = 4096
# Scale of the axial dipolar tensor: kappa * D * (n n^T - I/3).
# kappa = 3/2 makes the principal value along the axis equal to D.
DEFAULT_DIPOLAR_SCALE = 1.5


class DimensionError(ValueError):
    """Operator or state dimensions are inconsistent."""


class FieldConvention(str, enum.Enum):
    STANDARD_SPHERICAL = "standard_spherical"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class Nucleus:
    """One nuclear spin with its hyperfine coupling tensor (mT)."""

    multiplicity: int
    tensor: np.ndarray

    def __post_init__(self):
        if int(self.multiplicity) != self.multiplicity or self.multiplicity < 2:
            raise ValueError(f"multiplicity must be an integer >= 2, got {self.multiplicity}")
        a = np.asarray(self.tensor, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"hyperfine tensor must be 3x3, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("hyperfine tensor has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "multiplicity", int(self.multiplicity))
        object.__setattr__(self, "tensor", a)

    @classmethod
    def isotropic(cls, a_mt: float, multiplicity: int = 2) -> "Nucleus":
        return cls(multiplicity, a_mt * np.eye(3))


@dataclass(frozen=True)
class SpinSystemSpec:
    donor_nuclei: tuple[Nucleus, ...] = ()
    acceptor_nuclei: tuple[Nucleus, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "donor_nuclei", tuple(self.donor_nuclei))
        object.__setattr__(self, "acceptor_nuclei", tuple(self.acceptor_nuclei))

    @property
    def nuclei(self) -> tuple[Nucleus, ...]:
        return self.donor_nuclei + self.acceptor_nuclei

    @property
    def dims(self) -> list[int]:
        return [2, 2] + [n.multiplicity for n in self.nuclei]

    @property
    def nuclear_dim(self) -> int:
        return int(np.prod([n.multiplicity for n in self.nuclei], dtype=np.int64))

    @property
    def dim(self) -> int:
        return 4 * self.nuclear_dim


@dataclass(frozen=True)
class FieldSpec:
    """Static field of magnitude ``b0_ut`` (uT) at polar ``theta``, azimuth ``phi`` (rad)."""

    b0_ut: float = DEFAULT_B0_UT
    theta: float = 0.0
    phi: float = 0.0
    convention: FieldConvention = FieldConvention.STANDARD_SPHERICAL

    def __post_init__(self):
        object.__setattr__(self, "convention", FieldConvention(self.convention))
        if not self.b0_ut >= 0:
            raise ValueError(f"b0 must be >= 0, got {self.b0_ut}")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")

    def direction(self) -> np.ndarray:
        t, p = self.theta, self.phi
        if self.convention is FieldConvention.PAPER_LITERAL:
            # printed as-is; not a unit vector
            return np.array([np.cos(t) * np.cos(p), np.cos(t) * np.sin(p), np.cos(t)])
        return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])

    def vector_tesla(self) -> np.ndarray:
        return self.b0_ut * UT * self.direction()


@dataclass(frozen=True)
class CouplingSpec:
    j_mt: float = 0.0
    d_mt: float = 0.0
    dipolar_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    dipolar_scale: float = DEFAULT_DIPOLAR_SCALE

    def __post_init__(self):
        axis = np.asarray(self.dipolar_axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError(f"dipolar_axis must be a unit 3-vector, got {self.dipolar_axis}")
        object.__setattr__(self, "dipolar_axis", tuple(float(x) for x in axis))

    def dipolar_tensor(self) -> np.ndarray:
        """Traceless axial electron-electron tensor in mT."""
        n = np.asarray(self.dipolar_axis)
        return self.dipolar_scale * self.d_mt * (np.outer(n, n) - np.eye(3) / 3.0)


def spin_operators(multiplicity: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Sx, Sy, Sz) for a spin of the given multiplicity 2s+1."""
    if int(multiplicity) != multiplicity or multiplicity < 2:
        raise ValueError(f"multiplicity must be an integer >= 2, got {multiplicity}")
    s = (multiplicity - 1) / 2.0
    m = s - np.arange(multiplicity)
    # <m+1|S+|m> on the superdiagonal (basis ordered s, s-1, ..., -s)
    sp = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    sm = sp.conj().T
    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


def embed_operator(op: np.ndarray, slot: int, dims: list[int]) -> np.ndarray:
    """Kronecker-embed ``op`` at position ``slot`` of the product space ``dims``."""
    op = np.asarray(op)
    if not 0 <= slot < len(dims):
        raise DimensionError(f"slot {slot} out of range for {len(dims)} factors")
    if op.shape != (dims[slot], dims[slot]):
        raise DimensionError(f"operator of shape {op.shape} does not fit slot {slot} of size {dims[slot]}")
    left = int(np.prod(dims[:slot], dtype=np.int64))
    right = int(np.prod(dims[slot + 1:], dtype=np.int64))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def dipolar_constant_from_distance(r_nm: float) -> float:
    """Point-dipole coupling strength in mT for an inter-electron distance in nm."""
    if not r_nm > 0:
        raise ValueError(f"distance must be positive, got {r_nm}")
    return DIPOLAR_UT_NM3 / r_nm**3 * 1e-3


def _vector_ops(multiplicity, slot, dims):
    return [embed_operator(o, slot, dims) for o in spin_operators(multiplicity)]


def _bilinear(a_ops, tensor, b_ops):
    """Sum_ij a_i T_ij b_j for embedded vector operators."""
    out = 0
    for i in range(3):
        for j in range(3):
            if tensor[i, j] != 0:
                out = out + tensor[i, j] * (a_ops[i] @ b_ops[j])
    return out


def build_hamiltonian(
    system: SpinSystemSpec,
    field: FieldSpec | None = None,
    coupling: CouplingSpec | None = None,
    max_dim: int = DEFAULT_MAX_DIM,
) -> np.ndarray:
    """Assemble the Zeeman + hyperfine + exchange + dipolar Hamiltonian in rad/s.

    Donor nuclei couple only to the donor electron, acceptor nuclei only to the
    acceptor electron. Exchange enters as ``-J (2 S_A.S_D + 1/2)``.
    """
    field = field or FieldSpec()
    coupling = coupling or CouplingSpec()
    dims = system.dims
    dim = system.dim
    if dim > max_dim:
        raise DimensionError(f"Hilbert dimension {dim} exceeds cap {max_dim}")

    s_d = _vector_ops(2, 0, dims)
    s_a = _vector_ops(2, 1, dims)
    h = np.zeros((dim, dim), dtype=complex)

    b = field.vector_tesla()
    for k in range(3):
        h += GAMMA_E * b[k] * (s_a[k] + s_d[k])

    for idx, nuc in enumerate(system.nuclei):
        electron = s_d if idx < len(system.donor_nuclei) else s_a
        i_ops = _vector_ops(nuc.multiplicity, 2 + idx, dims)
        h += GAMMA_E * MT * _bilinear(electron, nuc.tensor, i_ops)

    if coupling.j_mt != 0:
        sa_sd = sum(s_a[k] @ s_d[k] for k in range(3))
        h += -GAMMA_E * MT * coupling.j_mt * (2 * sa_sd + 0.5 * np.eye(dim))

    if coupling.d_mt != 0:
        h += GAMMA_E * MT * _bilinear(s_a, coupling.dipolar_tensor(), s_d)

    return (h + h.conj().T) / 2
