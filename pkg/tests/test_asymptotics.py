import math

import numpy as np
import pytest

from semifront.asymptotics import DecayFit, detect_oscillation, fit_decay
from semifront.kernel import LeftTail
from semifront.model import builtin_kpp, builtin_nicholson
from semifront.profile import ProfileSolution, solve_profile

NICH_C_STAR = math.sqrt(math.log(2.0))


def synthetic_profile(fn, lam, t_lo=-80.0):
    """Wrap an explicit phi(t) in the solution container the fitter reads."""
    m = builtin_kpp(0.0)
    t = np.arange(t_lo, 40.0 + 0.01, 0.02)
    phi = fn(t)
    return ProfileSolution(
        model=m, c=2.5, t=t, phi=phi, dphi=np.gradient(phi, t), source=phi,
        tail=LeftTail(float(phi[0]), lam, 0.0), lambda1=lam, lambda2=lam,
        critical=False, residual=0.0, drift=0.0, iterations=0,
        converged=True, clamp_low=0, clamp_high=0,
    )


@pytest.fixture(scope="module")
def kpp_half():
    return solve_profile(builtin_kpp(0.5), 2.5)


# ----------------------------------------------------------- exact inputs


def test_pure_exponential_recovered():
    sol = synthetic_profile(lambda t: np.minimum(1.0, np.exp(0.5 * t)), 0.5)
    fit = fit_decay(sol)
    assert fit.mode == "pure_exponential"
    assert abs(fit.rate - 0.5) <= 1e-6
    assert fit.fit_error <= 1e-10


def test_critical_shape_recovered():
    sol = synthetic_profile(
        lambda t: np.where(t < -2.0, -t * np.exp(t), 2.0 * math.exp(-2.0)), 1.0
    )
    fit = fit_decay(sol)
    assert fit.mode == "critical_t_times_exponential"
    assert abs(fit.rate - 1.0) <= 5e-3


# --------------------------------------------------------- computed runs


def test_noncritical_rate_within_two_percent():
    for h in (0.5, 1.0):
        sol = solve_profile(builtin_kpp(h), 2.5)
        fit = fit_decay(sol)
        assert fit.mode == "pure_exponential"
        assert abs(fit.rate - 0.5) <= 0.02 * 0.5


def test_critical_classifier_fires():
    for m, c in [
        (builtin_kpp(0.5), 2.0),
        (builtin_kpp(1.0), 2.0),
        (builtin_nicholson(1.0, 2.0), NICH_C_STAR),
    ]:
        sol = solve_profile(m, c)
        fit = fit_decay(sol)
        assert fit.mode == "critical_t_times_exponential"
        assert abs(fit.rate - sol.lambda1) <= 0.02 * sol.lambda1


def test_near_critical_stays_pure():
    sol = solve_profile(builtin_kpp(0.0), 2.1)
    assert fit_decay(sol).mode == "pure_exponential"


def test_fit_error_drops_deeper_in_tail(kpp_half):
    deep = fit_decay(kpp_half, window=(-70.0, -40.0))
    mid = fit_decay(kpp_half, window=(-40.0, -10.0))
    assert deep.fit_error < mid.fit_error


def test_window_and_amplitude_reported(kpp_half):
    fit = fit_decay(kpp_half)
    t_a, t_b = fit.window
    assert t_a >= kpp_half.t[0]
    # right end is the first grid node at or above the 5% level
    step = kpp_half.step
    assert kpp_half.evaluate(np.array([t_b - step]))[0] < 0.05 * 1.0
    assert kpp_half.evaluate(np.array([t_b]))[0] <= 0.05 * 1.0 * 1.05
    assert fit.amplitude > 0.0


# ------------------------------------------------------------ oscillation


def test_monotone_front_not_oscillatory():
    sol = solve_profile(builtin_kpp(0.0), 2.5)
    oscillatory, count = detect_oscillation(sol)
    assert not oscillatory and count <= 1


def test_large_delay_oscillates():
    sol = solve_profile(builtin_kpp(2.0), 2.5)
    oscillatory, count = detect_oscillation(sol)
    assert oscillatory and count >= 2


def test_synthetic_ringing_detected():
    sol = synthetic_profile(
        lambda t: np.maximum(1e-6, 1.0 + np.exp(-np.abs(t)) * np.sin(t)), 0.5
    )
    oscillatory, count = detect_oscillation(sol)
    assert oscillatory and count >= 2


def test_oscillation_flags_mirrored_in_fit(kpp_half):
    fit = fit_decay(kpp_half)
    assert (fit.oscillatory, fit.crossing_count) == detect_oscillation(kpp_half)


# ------------------------------------------------------------- bad inputs


def test_tiny_window_rejected(kpp_half):
    with pytest.raises(ValueError):
        fit_decay(kpp_half, window=(-10.0, -9.9))


def test_nonpositive_profile_rejected():
    sol = synthetic_profile(lambda t: np.exp(0.5 * t) - 1e-12, 0.5)
    with pytest.raises(ValueError):
        fit_decay(sol)


def test_fit_is_immutable():
    sol = synthetic_profile(lambda t: np.minimum(1.0, np.exp(0.5 * t)), 0.5)
    fit = fit_decay(sol)
    assert isinstance(fit, DecayFit)
    with pytest.raises(AttributeError):
        fit.rate = 1.0
