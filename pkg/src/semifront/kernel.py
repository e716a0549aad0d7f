"""Green's function of y'' - c y' - (1+q) y and exact exponential quadrature.

The profile integral operator convolves sources against

    K(t) = N e^{mu_minus t} (t >= 0),   N e^{mu_plus t} (t <= 0),

where mu_-+ are the real roots of mu^2 - c mu - (1+q) = 0 and
N = 1/(mu_plus - mu_minus).  Sources are grid functions on [T-, T+]
extended by an exponential left tail and a constant right tail.  The
interior convolution is evaluated EXACTLY for piecewise-linear sources:
each cell contributes closed-form integrals of (a + b s) e^{mu s}, chained
into first-order recurrences (one forward scan for the decaying branch,
one backward for the growing branch).  Naive trapezoid quadrature would
poison the e^{lambda1 t} tail that the decay diagnostics must recover;
exactness in the source keeps the only discretization error in the
piecewise-linear representation itself, O(step^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "GreenKernel",
    "LeftTail",
    "make_kernel",
    "tail_response",
    "convolve",
    "convolve_at_offset",
    "exp_integral_right",
    "pl_exp_integral",
]


def _phi1(x: float) -> float:
    """(e^x - 1)/x, the mean of e^{xu} over u in [0,1]."""
    if x == 0.0:
        return 1.0
    return math.expm1(x) / x


def _phi2(x: float) -> float:
    """integral of u e^{xu} over [0,1] = (e^x(x-1)+1)/x^2.

    The closed form cancels catastrophically near 0; the series
    sum x^k/((k+2) k!) converges fast there.
    """
    if abs(x) < 0.15:
        acc, term = 0.0, 1.0  # term = x^k/k!
        for k in range(11):
            acc += term / (k + 2)
            term *= x / (k + 1)
        return acc
    return (math.exp(x) * (x - 1.0) + 1.0) / (x * x)


@dataclass(frozen=True)
class GreenKernel:
    c: float
    q: float
    mu_plus_root: float
    mu_minus_root: float
    norm: float

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        neg = t_arr < 0
        out[neg] = self.norm * np.exp(self.mu_plus_root * t_arr[neg])
        out[~neg] = self.norm * np.exp(self.mu_minus_root * t_arr[~neg])
        return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out

    def deriv(self, t):
        """K'(t) away from the kink at 0 (the t=0 value is the right limit)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        neg = t_arr < 0
        out[neg] = self.norm * self.mu_plus_root * np.exp(self.mu_plus_root * t_arr[neg])
        out[~neg] = self.norm * self.mu_minus_root * np.exp(self.mu_minus_root * t_arr[~neg])
        return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out

    @property
    def mass(self) -> float:
        """Total integral of K; integrating the defining ODE forces 1/(1+q)."""
        return 1.0 / (1.0 + self.q)


def make_kernel(c: float, q: float) -> GreenKernel:
    if c <= 0:
        raise ValueError(f"speed must be positive, got {c}")
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    disc = math.sqrt(c * c + 4.0 * (1.0 + q))
    mu_plus = 0.5 * (c + disc)
    mu_minus = 0.5 * (c - disc)
    norm = 1.0 / disc
    k = GreenKernel(c, q, mu_plus, mu_minus, norm)
    # construction self-check: root property and unit derivative jump
    scale = 1.0 + c * c + q
    for mu in (mu_plus, mu_minus):
        if abs(mu * mu - c * mu - (1.0 + q)) > 1e-10 * scale:
            raise RuntimeError("kernel roots fail the defining quadratic")
    if abs(norm * (mu_plus - mu_minus) - 1.0) > 1e-12:
        raise RuntimeError("kernel normalization does not give a unit derivative jump")
    return k


class LeftTail(NamedTuple):
    """Source extension for s <= T-:  (value + slope*(s-T-)) * e^{rate*(s-T-)}.

    The shifted form keeps every stored number O(value): the tail equals
    ``value`` at T- and decays leftward for rate > 0.  slope != 0 gives the
    linear-times-exponential shape of critical-speed tails.
    """

    value: float
    rate: float
    slope: float = 0.0


def _as_tail(tail) -> LeftTail:
    if isinstance(tail, LeftTail):
        return tail
    return LeftTail(*tail)


def tail_response(k: GreenKernel, tail, t_minus: float, t):
    """integral of K(t-s) * tail(s) over s in (-inf, T-], any evaluation t.

    For t >= T- only the decaying kernel branch e^{mu_minus(t-s)} is active
    and the answer is a single exponential in t.  For t < T- the kernel
    switches branch at s = t; the growing-branch piece degenerates when
    rate = mu_plus (resonance) into the (T- - t) e^{mu_plus(t-T-)} form.
    """
    v, rate, slope = _as_tail(tail)
    if rate < 0:
        raise ValueError("left tail must not grow leftward: rate >= 0 required")
    N, mu_m, mu_p = k.norm, k.mu_minus_root, k.mu_plus_root
    gamma = rate - mu_m  # > 0 always
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    tau = t_arr - t_minus
    out = np.empty_like(tau)

    rgt = tau >= 0
    out[rgt] = N * np.exp(mu_m * tau[rgt]) * (v / gamma - slope / gamma**2)

    lft = ~rgt
    if np.any(lft):
        tl = tau[lft]
        # s < t piece, antiderivatives of (v + slope*u) e^{gamma u} up to u = tau
        p1 = N * np.exp(rate * tl) * (v / gamma + slope * (tl / gamma - 1.0 / gamma**2))
        delta = rate - mu_p
        if abs(delta) <= 1e-8 * max(1.0, mu_p):
            p2 = N * np.exp(mu_p * tl) * (-v * tl - 0.5 * slope * tl * tl)
        else:
            x = delta * tl
            i0 = -np.expm1(x) / delta
            i1 = (np.expm1(x) - x * np.exp(x)) / delta**2
            p2 = N * np.exp(mu_p * tl) * (v * i0 + slope * i1)
        out[lft] = p1 + p2
    return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def _check_uniform(t: np.ndarray) -> float:
    if t.size < 2:
        raise ValueError("grid needs at least two nodes")
    steps = np.diff(t)
    step = float(steps[0])
    if step <= 0 or not np.allclose(steps, step, rtol=1e-9, atol=1e-12):
        raise ValueError("grid must be uniform and increasing")
    return step


def convolve(k: GreenKernel, t, src, left_tail, right_const: float):
    """integral of K(t_i - s) * source(s) over all of R, at every grid node.

    source = piecewise-linear interpolant of ``src`` on the uniform grid
    ``t``, extended by ``left_tail`` below t[0] and by the constant
    ``right_const`` above t[-1].
    """
    t = np.asarray(t, dtype=float)
    src = np.asarray(src, dtype=float)
    if src.shape != t.shape:
        raise ValueError("source values must match the grid")
    step = _check_uniform(t)
    N, mu_m, mu_p = k.norm, k.mu_minus_root, k.mu_plus_root

    # forward scan: decaying branch against cells left of each node
    x_m = mu_m * step
    e1 = step * _phi1(x_m)
    e2 = step * step * _phi2(x_m)
    j_prev, j_cur = e2 / step, e1 - e2 / step
    u = j_prev * src[:-1] + j_cur * src[1:]
    decay = math.exp(x_m)
    i_minus = np.concatenate(([0.0], lfilter([1.0], [1.0, -decay], u)))

    # backward scan: growing branch against cells right of each node
    x_p = -mu_p * step
    e1p = step * _phi1(x_p)
    e2p = step * step * _phi2(x_p)
    g_cur, g_next = e1p - e2p / step, e2p / step
    w = g_cur * src[-2::-1] + g_next * src[:0:-1]
    i_plus = np.concatenate(([0.0], lfilter([1.0], [1.0, -math.exp(x_p)], w)))[::-1]

    out = N * (i_minus + i_plus)
    out += tail_response(k, left_tail, float(t[0]), t)
    out += right_const * (N / mu_p) * np.exp(mu_p * (t - t[-1]))
    return out


def _offset_scans(k: GreenKernel, t, src, left_tail, right_const: float, delta: float):
    """Both kernel-branch accumulators at the shifted nodes t_i + delta.

    Requires 0 < delta < step.  Returns (F, B) with

        F_i = integral of e^{mu_minus(tau_i - s)} src(s) over (-inf, tau_i],
        B_i = integral of e^{mu_plus (tau_i - s)} src(s) over [tau_i, +inf),

    tau_i = t_i + delta, so the convolution value is norm * (F + B).  Each
    recurrence step spans the trailing (step-delta) part of one grid cell
    and the leading delta part of the next, giving three-tap inputs with
    offset-dependent weights; at delta -> 0 they collapse to the two-tap
    weights of :func:`convolve` via e^x phi2(-x) = phi1(x) - phi2(x).
    """
    v, rate, slope = _as_tail(left_tail)
    if rate < 0:
        raise ValueError("left tail must not grow leftward: rate >= 0 required")
    step = _check_uniform(np.asarray(t, dtype=float))
    n = src.size
    mu_m, mu_p = k.mu_minus_root, k.mu_plus_root
    rc = float(right_const)
    theta = delta / step
    lead = step - delta  # trailing part of the lower cell in each span

    # forward (decaying) branch
    e_md = math.exp(mu_m * step)
    e_mdel = math.exp(mu_m * delta)
    a_lo1 = lead * _phi1(-mu_m * lead)
    a_lo2 = lead * lead * _phi2(-mu_m * lead)
    a_hi1 = delta * _phi1(-mu_m * delta)
    a_hi2 = delta * delta * _phi2(-mu_m * delta)
    a0 = e_md * ((1.0 - theta) * a_lo1 - a_lo2 / step)
    a1_lo = e_md * (theta * a_lo1 + a_lo2 / step)
    a1 = a1_lo + e_mdel * (a_hi1 - a_hi2 / step)
    a2 = e_mdel * a_hi2 / step

    gamma = rate - mu_m  # > 0 always
    u = np.empty(n)
    # integral over (-inf, tau_0]: the whole analytic tail discounted over
    # delta, plus the leading part of cell 0
    u[0] = e_mdel * (v / gamma - slope / gamma**2) + e_mdel * (
        src[0] * a_hi1 + (src[1] - src[0]) * a_hi2 / step
    )
    u[1:-1] = a0 * src[:-2] + a1 * src[1:-1] + a2 * src[2:]
    # beyond t[-1] the source is the constant right closure, not a ramp
    u[-1] = a0 * src[-2] + a1_lo * src[-1] + e_mdel * a_hi1 * rc
    fwd = lfilter([1.0], [1.0, -e_md], u)

    # backward (growing) branch
    e_pd = math.exp(-mu_p * step)
    e_plead = math.exp(-mu_p * lead)
    b_lo1 = lead * _phi1(-mu_p * lead)
    b_lo2 = lead * lead * _phi2(-mu_p * lead)
    b_hi1 = delta * _phi1(-mu_p * delta)
    b_hi2 = delta * delta * _phi2(-mu_p * delta)
    b0 = (1.0 - theta) * b_lo1 - b_lo2 / step
    b1_lo = theta * b_lo1 + b_lo2 / step
    b1 = b1_lo + e_plead * (b_hi1 - b_hi2 / step)
    b2 = e_plead * b_hi2 / step

    # scan right-to-left: inputs ordered [B_last, J_{n-2}, J_{n-3}, ..., J_0]
    w = np.empty(n)
    w[0] = rc / mu_p  # constant closure on [tau_{n-1}, +inf)
    w[1] = b0 * src[-2] + b1_lo * src[-1] + e_plead * b_hi1 * rc
    w[2:] = (b0 * src[:-2] + b1 * src[1:-1] + b2 * src[2:])[::-1]
    bwd = lfilter([1.0], [1.0, -e_pd], w)[::-1]
    return fwd, bwd


def convolve_at_offset(k: GreenKernel, t, src, left_tail, right_const: float, delta: float):
    """integral of K(t_i + delta - s) * source(s) over R: :func:`convolve`
    read at the sub-step shifted nodes t + delta, |delta| < step.

    The same piecewise-linear-source model is integrated in closed form
    against both kernel branches, so the values agree with re-running the
    convolution on an exactly translated grid.  Resampling a profile this
    way (instead of interpolating node values) keeps a translation step
    free of interpolation error.
    """
    t = np.asarray(t, dtype=float)
    src = np.asarray(src, dtype=float)
    if src.shape != t.shape:
        raise ValueError("source values must match the grid")
    if src.size < 3:
        raise ValueError("offset evaluation needs at least three nodes")
    step = _check_uniform(t)
    if delta == 0.0:
        return convolve(k, t, src, left_tail, right_const)
    if not abs(delta) < step:
        raise ValueError(f"|delta| must be below one step, got {delta:g}")
    if delta > 0.0:
        fwd, bwd = _offset_scans(k, t, src, left_tail, right_const, delta)
        return k.norm * (fwd + bwd)

    # negative shift: t_i - ell = t_{i-1} + (step - ell), so every node but
    # the first comes from the positive-offset scan one index down
    ell = -delta
    d2 = step - ell
    fwd, bwd = _offset_scans(k, t, src, left_tail, right_const, d2)
    out = np.empty_like(src)
    out[1:] = k.norm * (fwd[:-1] + bwd[:-1])

    # remaining node tau = t_0 - ell sits inside the analytic tail region
    v, rate, slope = _as_tail(left_tail)
    mu_m, mu_p = k.mu_minus_root, k.mu_plus_root
    gamma = rate - mu_m
    eta = rate - mu_p
    damp = math.exp(-rate * ell)
    # decaying branch over (-inf, tau]
    f_pt = damp * ((v - slope * ell) / gamma - slope / gamma**2)
    # growing branch over [tau, t_0]: (value + slope*u)e^{rate u} against
    # e^{mu_plus(tau - s)}; phi1/phi2 absorb the rate = mu_plus resonance
    b_tail = damp * (
        (v - slope * ell) * ell * _phi1(eta * ell) + slope * ell * ell * _phi2(eta * ell)
    )
    # growing branch over [t_0, +inf): leading d2 part of cell 0, then the
    # scan value at t_0 + d2, each discounted back to tau
    j0 = src[0] * d2 * _phi1(-mu_p * d2) + (src[1] - src[0]) * d2 * _phi2(-mu_p * d2) * d2 / step
    b_grid = math.exp(-mu_p * ell) * (j0 + math.exp(-mu_p * d2) * bwd[0])
    out[0] = k.norm * (f_pt + b_tail + b_grid)
    return out


def exp_integral_right(t, src, rate: float, tail_const: float = 0.0):
    """integral of e^{rate (t_i - s)} src(s) over s in [t_i, +inf).

    src is piecewise linear on the uniform grid, constant ``tail_const``
    beyond t[-1]; requires rate > 0 for convergence.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    t = np.asarray(t, dtype=float)
    src = np.asarray(src, dtype=float)
    if src.shape != t.shape:
        raise ValueError("source values must match the grid")
    step = _check_uniform(t)
    x = -rate * step
    e1 = step * _phi1(x)
    e2 = step * step * _phi2(x)
    g_cur, g_next = e1 - e2 / step, e2 / step
    w = g_cur * src[-2::-1] + g_next * src[:0:-1]
    out = np.concatenate(([0.0], lfilter([1.0], [1.0, -math.exp(x)], w)))[::-1]
    out += (tail_const / rate) * np.exp(rate * (t - t[-1]))
    return out


def pl_exp_integral(t, src, rate: float) -> float:
    """Exact integral of e^{rate s} * (piecewise-linear src) over [t[0], t[-1]]."""
    t = np.asarray(t, dtype=float)
    src = np.asarray(src, dtype=float)
    if src.shape != t.shape:
        raise ValueError("source values must match the grid")
    step = _check_uniform(t)
    x = rate * step
    e1 = step * _phi1(x)
    e2 = step * step * _phi2(x)
    w_lo, w_hi = e1 - e2 / step, e2 / step
    cell = w_lo * src[:-1] + w_hi * src[1:]
    return float(np.dot(np.exp(rate * t[:-1]), cell))
