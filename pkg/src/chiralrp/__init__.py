"""Radical-pair spin dynamics with chiral-induced spin selectivity.

Builds the radical-pair Hamiltonian, evolves the reaction master equation,
and evaluates relative-entropy coherence, total coherence and reaction yields
over parameter sweeps.
"""

from .observables import (
    CoherenceScope,
    coherence,
    delta_m,
    interaction_gap,
    partial_trace_to_electrons,
    pearson_fit,
    total_coherence,
    von_neumann_entropy,
    yields,
)
from .pipeline import RunConfig, run_point, simulate
from .propagation import Engine, IntegratorConfig, Sampler, choose_horizon
from .rp_model import RateSpec, effective_hamiltonian, initial_density, master_rhs, recombination_projector
from .spin_core import (
    CouplingSpec,
    FieldConvention,
    FieldSpec,
    Nucleus,
    SpinSystemSpec,
    build_hamiltonian,
    dipolar_constant_from_distance,
    embed_operator,
    spin_operators,
)

__version__ = "0.1.0"
