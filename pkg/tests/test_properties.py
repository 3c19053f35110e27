import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralrp import observables as obs
from chiralrp.output import format_value
from chiralrp.propagation import IntegratorConfig, Sampler, sample_times
from chiralrp.rp_model import (
    RateSpec,
    collapse_operators,
    initial_electron_state,
    master_rhs,
    pauli_dissipator,
    recombination_electron_state,
    recombination_projector,
)
from chiralrp.spin_core import CouplingSpec, FieldSpec, Nucleus, SpinSystemSpec, build_hamiltonian, spin_operators

chis = st.floats(0.0, math.pi / 2)
seeds = st.integers(0, 2**32 - 1)
angles = st.tuples(st.floats(0.0, math.pi), st.floats(0.0, 2 * math.pi, exclude_max=True))


def density(seed, dim, trace=1.0):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, dim + 1))
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return trace * rho / np.trace(rho).real


def random_system(seed):
    rng = np.random.default_rng(seed)
    nuclei = [Nucleus(int(rng.integers(2, 4)), rng.normal(scale=0.5, size=(3, 3))) for _ in range(2)]
    return SpinSystemSpec(nuclei[:1], nuclei[1:])


@given(st.integers(2, 7))
def test_spin_operators_hermitian_and_closed(mult):
    sx, sy, sz = spin_operators(mult)
    for s in (sx, sy, sz):
        np.testing.assert_allclose(s, s.conj().T, atol=1e-14)
    np.testing.assert_allclose(sy @ sz - sz @ sy, 1j * sx, atol=1e-12)


@given(chis)
def test_state_overlap_is_cos_chi(chi):
    overlap = np.vdot(recombination_electron_state(chi), initial_electron_state(chi))
    assert abs(overlap - math.cos(chi)) < 1e-12


@given(angles)
def test_field_direction_unit(ang):
    assert abs(np.linalg.norm(FieldSpec(50.0, *ang).direction()) - 1.0) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, angles, st.floats(-2, 2), st.floats(-2, 2), chis)
def test_rhs_preserves_hermiticity(seed, ang, j, d, chi):
    system = random_system(seed)
    h = build_hamiltonian(system, FieldSpec(50.0, *ang), CouplingSpec(j, d))
    assert np.max(np.abs(h - h.conj().T)) == 0.0
    rho = density(seed, system.dim)
    out = master_rhs(rho, h, recombination_projector(chi, system), RateSpec(1e6, 1e8, 1e5), system.nuclear_dim)
    assert np.max(np.abs(out - out.conj().T)) < 1e-9 * np.abs(out).max()


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_dissipator_matches_explicit_channels(seed):
    system = random_system(seed)
    rho = density(seed, system.dim)
    ref = sum(c @ rho @ c.conj().T - rho for c in collapse_operators(system))
    np.testing.assert_allclose(pauli_dissipator(rho, system.nuclear_dim), ref, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([4, 8, 16]), st.floats(1e-6, 1.0))
def test_coherence_bounds_and_scaling(seed, dim, t):
    rho = density(seed, dim)
    c = obs.coherence(rho, "global", dim // 4)
    assert -1e-10 <= c <= math.log(dim) + 1e-10
    assert obs.diagonal_entropy(rho) >= obs.von_neumann_entropy(rho) - 1e-10
    assert abs(obs.coherence(t * rho, "global", dim // 4) - t * c) <= 1e-9 * max(c, 1.0)
    assert obs.coherence(rho, "local", dim // 4) >= -1e-10


def brute_pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    return sxy / math.sqrt(sxx * syy), sxy / sxx


@settings(max_examples=100)
@given(seeds, st.integers(3, 200))
def test_pearson_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=n)
    ys = rng.normal(size=n) + rng.normal() * xs
    fit = obs.pearson_fit(xs, ys)
    r, slope = brute_pearson(list(xs), list(ys))
    assert abs(fit.r - r) < 1e-12
    assert abs(fit.slope - slope) < 1e-12 * max(1.0, abs(slope))
    assert -1.0 <= fit.r <= 1.0


@given(seeds, st.floats(0.1, 10.0), st.floats(-5, 5))
def test_pearson_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    xs, ys = rng.normal(size=20), rng.normal(size=20)
    r = obs.pearson_fit(xs, ys).r
    assert abs(obs.pearson_fit(xs, a * ys + b).r - r) < 1e-9
    assert abs(obs.pearson_fit(xs, -a * ys + b).r + r) < 1e-9


@given(st.floats(1e-12, 1e3), st.floats(1e-12, 1e3))
def test_delta_m_ratios(m0, m90):
    maxmin, ciss = obs.delta_m(m0, m90)
    assert maxmin >= 1.0
    assert math.isclose(maxmin, max(ciss, 1 / ciss), rel_tol=1e-12)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_round_trip(x):
    assert float(format_value(x)) == x
    assert float(format_value(np.float64(x))) == x


@given(st.floats(1e-9, 1e-3), st.integers(16, 3000), st.sampled_from(list(Sampler)))
def test_sample_times_monotone(horizon, n, sampler):
    t = sample_times(horizon, IntegratorConfig(sample_count=n, sampler=sampler))
    assert t[0] == 0.0 and math.isclose(t[-1], horizon, rel_tol=1e-12)
    assert np.all(np.diff(t) > 0)
