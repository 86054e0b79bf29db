import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import single_mode_amps
from fockcrit.bounds import bound_L, bound_Lw
from fockcrit.errors import DomainError, NonNormalizableError, ValidationError
from fockcrit.fock import SingleModeState, coherent_state, number_state
from fockcrit.minimizer import (RecurrenceParams, default_cutoff, gaussian_fit, gaussian_trial,
                                gaussian_trial_bound, implied_params, r_functional, recurrence_generate,
                                solve_min_direct, solve_min_recurrence, stationarity_residual)
from fockcrit.sampler import tilt_to_mean
from oracles import brute_r, constrained_min_trust

# constrained minima of var(N_A) + var(a); recurrence and direct routes agree to
# 2e-11 and a trust-constr oracle (oracles.constrained_min_trust) to 1e-10
FROZEN_MIN = {
    0.25: 0.2201717074542384,
    1.0: 0.6220955188644594,
    5.0: 1.7473636925837148,
    20.0: 3.9217372385391833,
    200.0: 13.542171021350356,
}
# weighted minimum at <N_A> = 5, w = 0.3 (direct route, trust-constr oracle)
FROZEN_WEIGHTED = 0.728091180513306


# -- the functional --------------------------------------------------------------------

def test_r_vacuum():
    assert r_functional(number_state(0, 5)) == 0.0


@pytest.mark.parametrize("k", [1, 2, 7, 30])
def test_r_number_state(k):
    assert r_functional(number_state(k, k + 3)) == pytest.approx(k, abs=1e-12)


@pytest.mark.parametrize("N", [0.5, 4.0, 25.0])
def test_r_coherent(N):
    assert r_functional(coherent_state(math.sqrt(N))) == pytest.approx(N, abs=1e-9)


@given(single_mode_amps(), st.one_of(st.none(), st.floats(0.0, 1.0)))
def test_r_matches_brute_force(c, w):
    assert r_functional(SingleModeState(c), w) == pytest.approx(brute_r(c, w), abs=1e-10)


def test_r_requires_normalized():
    with pytest.raises(ValidationError):
        r_functional(SingleModeState(np.array([1.0, 1.0])))
    with pytest.raises(DomainError):
        r_functional(number_state(1), 1.5)


@given(single_mode_amps(max_cut=10))
def test_real_amplitudes_do_not_increase_r(c):
    s = SingleModeState(c)
    assert r_functional(SingleModeState(np.abs(c))) <= r_functional(s) + 1e-12


# -- recurrence --------------------------------------------------------------------------

def test_recurrence_first_step():
    s = recurrence_generate(RecurrenceParams(1.0, 1.0, 0.0, 60))
    assert s.amps[0] == 1.0 and s.amps[1] == 0.0


def test_recurrence_divergence_flagged():
    with pytest.raises(NonNormalizableError) as err:
        recurrence_generate(RecurrenceParams(0.1, 1.0, 1.0, 60))
    assert err.value.index is not None


def test_recurrence_params_validation():
    with pytest.raises(ValueError):
        RecurrenceParams(0.0, 1.0, 1.0, 60)
    with pytest.raises(ValueError):
        RecurrenceParams(1.0, 1.0, 1.0, 5)


def test_recurrence_regenerates_solution():
    res = solve_min_recurrence(20.0)
    regen = recurrence_generate(res.params).normalized()
    k = min(regen.cutoff, res.state.cutoff) + 1
    assert np.max(np.abs(regen.amps[:k] - res.state.amps[:k])) < 1e-9


@pytest.mark.parametrize("T", sorted(FROZEN_MIN))
def test_recurrence_frozen_values(T):
    res = solve_min_recurrence(T)
    assert res.value == pytest.approx(FROZEN_MIN[T], abs=1e-9)
    assert res.residuals["constraint"] <= 1e-8
    assert res.residuals["self_consistency"] <= 1e-8
    assert res.value >= bound_L(T) - 1e-9
    assert np.all(res.state.amps.real >= 0)


def test_recurrence_quarter_bound():
    res = solve_min_recurrence(0.25)
    assert bound_L(0.25) == 0.0 and res.value >= 0.0


def test_cutoff_rule():
    for T in (0.1, 20, 200, 400):
        assert default_cutoff(T) >= max(50, T + 10 * math.sqrt(T) + 25)


# -- direct route -----------------------------------------------------------------------

@pytest.mark.parametrize("T", [1.0, 5.0, 20.0])
def test_direct_matches_recurrence(T):
    assert abs(solve_min_direct(T).value - solve_min_recurrence(T).value) <= 1e-6


@pytest.mark.parametrize("T,K", [(1.0, 30), (5.0, 45)])
def test_direct_matches_trust_constr_oracle(T, K):
    assert solve_min_direct(T).value == pytest.approx(constrained_min_trust(T, K), abs=1e-8)


def test_direct_is_seed_deterministic():
    a, b = solve_min_direct(7.3, seed=4), solve_min_direct(7.3, seed=4)
    assert a.value == b.value and np.array_equal(a.state.amps, b.state.amps)


def test_direct_stationarity():
    res = solve_min_direct(20.0)
    assert res.residuals["stationarity"] <= 1e-6
    assert stationarity_residual(res.state, implied_params(res.state)) <= 1e-6


def test_weighted_frozen_value():
    res = solve_min_direct(5.0, w=0.3)
    assert res.value == pytest.approx(FROZEN_WEIGHTED, abs=1e-9)
    assert res.value >= bound_Lw(5.0, 0.3) - 1e-9


def test_weighted_number_state_limit():
    for w, tol in ((0.9, 0.05), (0.99, 1e-6)):
        res = solve_min_direct(5.0, w=w)
        assert res.value == pytest.approx((1 - w) * 5, abs=tol)
    near = solve_min_direct(5.0, w=0.99).state
    assert abs(near.amps[5]) ** 2 > 0.999


def test_weighted_coherent_limit():
    w = 0.01
    res = solve_min_direct(5.0, w=w)
    assert res.value <= w * 5
    coh = coherent_state(math.sqrt(5.0), cutoff=res.state.cutoff)
    overlap = abs(np.vdot(coh.amps, res.state.amps))
    assert overlap > 0.99


@settings(max_examples=8)
@given(st.floats(0.1, 60.0), st.floats(0.02, 0.98))
def test_weighted_bound_validity(T, w):
    res = solve_min_direct(T, w=w)
    assert res.value >= bound_Lw(T, w) - 1e-9
    assert res.residuals["constraint"] <= 1e-8


@settings(max_examples=10)
@given(st.floats(0.1, 150.0))
def test_unweighted_bound_and_sandwich(T):
    res = solve_min_recurrence(T)
    assert bound_L(T) - 1e-9 <= res.value <= gaussian_trial_bound(T) + 1e-9


@settings(max_examples=15)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.5, 30.0))
def test_random_states_never_beat_minimum(seed, T):
    rng = np.random.default_rng(seed)
    K = default_cutoff(T)
    n = np.arange(K + 1)
    env = np.exp(-np.abs(n - T) / rng.uniform(0.5, 5.0))
    c = (rng.normal(size=K + 1) + 1j * rng.normal(size=K + 1)) * env
    s = tilt_to_mean(SingleModeState(c).normalized(), T)
    assert r_functional(s) >= solve_min_recurrence(T).value - 1e-9


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 0.5))
def test_phase_perturbation_never_lowers_r(seed, scale):
    res = solve_min_recurrence(10.0)
    rng = np.random.default_rng(seed)
    c = res.state.amps * np.exp(1j * scale * rng.normal(size=res.state.cutoff + 1))
    assert r_functional(SingleModeState(c)) >= res.value - 1e-12


# -- Gaussian family ---------------------------------------------------------------------

def test_gaussian_trial_near_optimal_at_20():
    assert gaussian_trial_bound(20.0) <= 1.01 * FROZEN_MIN[20.0]
    assert gaussian_trial_bound(20.0) >= FROZEN_MIN[20.0]


def test_gaussian_trial_meets_constraint():
    t = gaussian_trial(12.5)
    n = np.arange(t.state.cutoff + 1)
    assert (np.abs(t.state.amps) ** 2) @ n == pytest.approx(12.5, abs=1e-8)


def test_gaussian_trial_vacuum_limit():
    v = gaussian_trial_bound(0.01)
    assert 0 < v < 0.05


def test_gaussian_fit_at_20():
    fit = gaussian_fit(solve_min_recurrence(20.0).state)
    assert fit.r2 >= 0.99
    assert fit.centre == pytest.approx(20.0, abs=0.5)


def test_domain_errors():
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(DomainError):
            solve_min_recurrence(bad)
        with pytest.raises(DomainError):
            solve_min_direct(bad)
