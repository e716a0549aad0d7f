"""Characteristic function of the linearized wave equation and its zeros.

For a linearization -q*phi(0) + sum_j w_j*phi(s_j) the profile ansatz
e^{z t} leads to the exponential polynomial

    chi(z, c) = z^2 - c z - q + sum_j w_j e^{c z s_j},       s_j in [-h, 0].

Restricted to real z, chi is strictly convex (chi_zz >= 2), so it has at
most two real zeros 0 < lambda1 <= lambda2; they exist iff the speed c
reaches the critical speed c*, at which the two collide into a double
root.  The minimum over real z is strictly decreasing in c, which gives
a bisection characterization of c* independent of the Newton solve on
the double-root system chi = chi_z = 0.

Complex zeros are counted with the argument principle on rectangle
boundaries (adaptive phase tracking), which certifies that no zero other
than lambda1 and lambda2 lies in {Re z >= lambda1 - eps}: on the zero
set, z^2 - c z = q - sum w_j e^{czs_j} is bounded by q + p whenever
Re z >= 0, hence |z| <= (c + sqrt(c^2 + 4(q+p)))/2; see README for the
derivation.
"""

from __future__ import annotations

import cmath
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .model import Measure, Model

__all__ = [
    "SpeedAnalysis",
    "RealRoots",
    "ContourError",
    "SubcriticalError",
    "eval_chi",
    "chi_dz",
    "chi_dzz",
    "chi_dc",
    "chi_dzc",
    "char_min",
    "real_roots",
    "critical_speed",
    "critical_speed_newton",
    "critical_speed_bisection",
    "count_zeros_rect",
    "dominance_check",
    "analyze_speed",
    "zero_modulus_bound",
    "default_im_bound",
]

DOUBLE_ROOT_RTOL = 1e-6  # roots merged when |l2-l1| < tol*max(1, l2)


class ContourError(RuntimeError):
    """Rectangle contour could not be certified zero-free."""


class SubcriticalError(ValueError):
    """Operation requires real characteristic roots (c >= c*)."""


def _mu(m) -> Measure:
    return m.lin if isinstance(m, Model) else m


# ------------------------------------------------------------ evaluation
#
# All partials below are plain calculus on chi; each accepts scalar or
# ndarray z (complex allowed) with a fixed scalar c.


def eval_chi(m, z, c: float):
    mu = _mu(m)
    z = np.asarray(z)
    out = z * z - c * z - mu.q
    for s, w in mu.atoms:
        out = out + w * np.exp(c * s * z)
    return out if out.ndim else out[()]


def chi_dz(m, z, c: float):
    mu = _mu(m)
    z = np.asarray(z)
    out = 2.0 * z - c
    for s, w in mu.atoms:
        out = out + w * (c * s) * np.exp(c * s * z)
    return out if out.ndim else out[()]


def chi_dzz(m, z, c: float):
    mu = _mu(m)
    z = np.asarray(z)
    out = np.full_like(z, 2.0, dtype=np.result_type(z, float))
    for s, w in mu.atoms:
        out = out + w * (c * s) ** 2 * np.exp(c * s * z)
    return out if out.ndim else out[()]


def chi_dc(m, z, c: float):
    mu = _mu(m)
    z = np.asarray(z)
    out = -z + 0.0
    for s, w in mu.atoms:
        out = out + w * (s * z) * np.exp(c * s * z)
    return out if out.ndim else out[()]


def chi_dzc(m, z, c: float):
    mu = _mu(m)
    z = np.asarray(z)
    out = np.full_like(z, -1.0, dtype=np.result_type(z, float))
    for s, w in mu.atoms:
        out = out + w * s * (1.0 + c * s * z) * np.exp(c * s * z)
    return out if out.ndim else out[()]


def zero_modulus_bound(m, c: float) -> float:
    """|z| bound for zeros of chi(., c) in the closed right half plane.

    If chi(z,c)=0 and Re z >= 0 then |e^{czs_j}| <= 1, so
    |z^2 - cz| <= q + p and |z| <= (c + sqrt(c^2 + 4(q+p)))/2.
    """
    mu = _mu(m)
    s = mu.q + mu.p
    return 0.5 * (c + math.sqrt(c * c + 4.0 * s))


def default_im_bound(m, c: float) -> float:
    mu = _mu(m)
    return 10.0 * (c + mu.p + mu.q + 1.0)


# ------------------------------------------------------------ real roots


class RealRoots(NamedTuple):
    lambda1: float
    lambda2: float
    critical: bool


def char_min(m, c: float) -> tuple[float, float]:
    """(argmin, min) of chi(., c) over real z.

    chi_z is strictly increasing with chi_z(0) = -c - c*sum w_j|s_j| < 0,
    so the minimizer is the unique positive zero of chi_z.
    """
    if c <= 0:
        raise ValueError("speed must be positive")
    mu = _mu(m)
    b = max(1.0, 0.5 * (c + math.sqrt(c * c + 4.0 * mu.q)))
    for _ in range(80):
        if chi_dz(mu, b, c) > 0:
            break
        b *= 2.0
    else:  # chi_z(z) >= 2z - c - c p h eventually positive; unreachable
        raise RuntimeError("could not bracket the characteristic minimum")
    z_min = brentq(lambda z: chi_dz(mu, z, c), 0.0, b, xtol=1e-14, rtol=4e-15)
    return float(z_min), float(eval_chi(mu, z_min, c))


def real_roots(m, c: float) -> Optional[RealRoots]:
    """The two positive real zeros lambda1 <= lambda2 of chi(., c), or None.

    None means subcritical: the convex minimum of chi stays positive, so
    c < c*.  Roots closer than the double-root tolerance are merged and
    flagged critical.  Near-critical minima within the merge band of zero
    are treated as a double root at the minimizer (either sign).
    """
    mu = _mu(m)
    z_min, chi_min = char_min(mu, c)
    sep_tol = DOUBLE_ROOT_RTOL * max(1.0, z_min)
    # chi ~ chi_min + (z - z_min)^2 chi_zz/2 near the minimum, so a root
    # separation below sep_tol corresponds to |chi_min| below this band:
    band = 0.5 * float(chi_dzz(mu, z_min, c)) * (0.5 * sep_tol) ** 2
    if chi_min > band:
        return None
    if chi_min >= -band:
        return RealRoots(z_min, z_min, True)

    hi = 0.5 * (c + math.sqrt(c * c + 4.0 * mu.q))  # chi > z^2-cz-q ⇒ roots < hi
    f = lambda z: float(eval_chi(mu, z, c))
    if f(hi) <= 0.0:  # exponential tail underflowed; nudge out
        hi = hi * (1.0 + 1e-12) + 1e-12
    l1 = brentq(f, 0.0, z_min, xtol=1e-14, rtol=4e-15)
    l2 = brentq(f, z_min, hi, xtol=1e-14, rtol=4e-15)
    if l2 - l1 < DOUBLE_ROOT_RTOL * max(1.0, l2):
        mid = 0.5 * (l1 + l2)
        return RealRoots(mid, mid, True)
    return RealRoots(float(l1), float(l2), False)


# ------------------------------------------------------- critical speed


def critical_speed_bisection(m, ctol: float = 1e-12) -> tuple[float, float]:
    """(c*, lambda*) by bisection on the sign of min_z chi(z, c).

    The minimum is strictly decreasing in c (chi_c < 0 at positive z), is
    positive as c -> 0+ and nonpositive at the closed-form bound
    2*sqrt(p - q), so the sign change brackets c*.
    """
    mu = _mu(m)
    c_hi = 2.0 * math.sqrt(mu.p - mu.q)
    z_hi, m_hi = char_min(mu, c_hi)
    # min chi(., c_hi) <= 0 always, with equality iff all atoms sit at lag 0;
    # a tiny |min| is that equality up to roundoff, so c_hi IS the answer
    if abs(m_hi) <= 1e-11 * (1.0 + mu.p + mu.q):
        return c_hi, z_hi
    c_lo = 1e-8
    _, m_lo = char_min(mu, c_lo)
    if m_lo <= 0 or m_hi > 0:
        raise RuntimeError("critical-speed bracket failed; degenerate linearization?")
    while c_hi - c_lo > ctol * max(1.0, c_hi):
        c_mid = 0.5 * (c_lo + c_hi)
        _, m_mid = char_min(mu, c_mid)
        if m_mid > 0:
            c_lo = c_mid
        else:
            c_hi = c_mid
    c_star = 0.5 * (c_lo + c_hi)
    z_min, _ = char_min(mu, c_star)
    return float(c_star), float(z_min)


def critical_speed_newton(
    m, guess: tuple[float, float] | None = None, tol: float = 1e-13, max_iter: int = 100
) -> tuple[float, float, int, float]:
    """(c*, lambda*, iterations, residual) from damped Newton on the
    double-root system chi(lam, c) = 0, chi_z(lam, c) = 0.

    The Jacobian at the solution is [[0, chi_c], [chi_zz, chi_zc]] with
    determinant -chi_c*chi_zz > 0, so Newton is locally quadratic.  The
    default start is the zero-delay closed form lam = sqrt(p-q), c = 2 lam.
    """
    mu = _mu(m)
    if guess is None:
        lam0 = math.sqrt(mu.p - mu.q)
        lam, c = lam0, 2.0 * lam0
    else:
        lam, c = guess
    scale = 1.0 + mu.p + mu.q
    fnorm = math.inf
    for it in range(max_iter):
        F0 = float(eval_chi(mu, lam, c))
        F1 = float(chi_dz(mu, lam, c))
        fnorm = math.hypot(F0, F1)
        if fnorm <= tol * scale:
            return float(c), float(lam), it, fnorm
        J00 = float(chi_dz(mu, lam, c))
        J01 = float(chi_dc(mu, lam, c))
        J10 = float(chi_dzz(mu, lam, c))
        J11 = float(chi_dzc(mu, lam, c))
        det = J00 * J11 - J01 * J10
        if det == 0.0:
            break
        dlam = -(F0 * J11 - J01 * F1) / det
        dc = -(J00 * F1 - F0 * J10) / det
        alpha = 1.0
        while alpha > 2.0**-40:
            lam_n, c_n = lam + alpha * dlam, c + alpha * dc
            if lam_n > 0 and c_n > 0:
                fn = math.hypot(
                    float(eval_chi(mu, lam_n, c_n)), float(chi_dz(mu, lam_n, c_n))
                )
                if fn < fnorm * (1.0 - 1e-4 * alpha) or fn <= tol * scale:
                    lam, c = lam_n, c_n
                    break
            alpha *= 0.5
        else:
            break  # no productive step; let caller fall back
    raise RuntimeError(f"Newton failed to converge (residual {fnorm:.3e})")


def critical_speed(m) -> tuple[float, float]:
    """(c*, lambda*) with both routes cross-checked.

    Newton on the double-root system is the primary method; bisection on
    the sign of the characteristic minimum is run as an independent check
    and as the fallback (restarting Newton from the bisection point) when
    the default start does not converge.
    """
    mu = _mu(m)
    c_bis, lam_bis = critical_speed_bisection(mu)
    try:
        c_n, lam_n, _, _ = critical_speed_newton(mu)
    except RuntimeError:
        try:
            c_n, lam_n, _, _ = critical_speed_newton(mu, guess=(lam_bis, c_bis))
        except RuntimeError:
            return c_bis, lam_bis  # bisection alone; already sign-certified
    if abs(c_n - c_bis) > 1e-6 * max(1.0, c_bis):
        raise RuntimeError(
            f"critical-speed methods disagree: newton {c_n!r} vs bisection {c_bis!r}"
        )
    return c_n, lam_n


# --------------------------------------------------- rectangle zero count


class _TooClose(Exception):
    pass


def _arg_walk(f, za: complex, zb: complex, fa: complex, fb: complex, depth: int) -> float:
    """Accumulated argument increment of f along [za, zb].

    Principal increments are trusted only below pi/2; larger jumps split
    the segment.  f raises _TooClose when |f| dips under the contour guard.
    """
    d = cmath.phase(fb / fa)
    if abs(d) < 0.5 * math.pi:
        return d
    if depth <= 0:
        raise ContourError("phase tracking failed to resolve the contour")
    zm = 0.5 * (za + zb)
    fm = f(zm)
    return _arg_walk(f, za, zm, fa, fm, depth - 1) + _arg_walk(f, zm, zb, fm, fb, depth - 1)


def count_zeros_rect(
    m,
    c: float,
    re_range: tuple[float, float],
    im_max: float,
    *,
    guard: float = 1e-12,
    max_attempts: int = 3,
) -> int:
    """Number of zeros of chi(., c), with multiplicity, inside the
    rectangle [a, b] x [-im_max, im_max], by the argument principle.

    The winding number of the boundary image is accumulated with adaptive
    phase tracking.  Points where |chi| < guard*(1 + |z|^2) flag the
    contour as too close to a zero; the rectangle is then dilated by a
    small relative amount, at most ``max_attempts`` times.
    """
    mu = _mu(m)
    a, b = re_range
    if not (a < b) or im_max <= 0:
        raise ValueError("empty rectangle")
    q, atoms = mu.q, mu.atoms

    def chi_scalar(z: complex) -> complex:
        out = z * z - c * z - q
        for s, w in atoms:
            out += w * cmath.exp(c * s * z)
        if abs(out) < guard * (1.0 + abs(z) ** 2):
            raise _TooClose
        return out

    for attempt in range(max_attempts + 1):
        da = attempt * 3e-4 * (1.0 + abs(a))
        db = attempt * 3e-4 * (1.0 + abs(b))
        dy = attempt * 1e-3 * im_max
        corners = [
            complex(a - da, -(im_max + dy)),
            complex(b + db, -(im_max + dy)),
            complex(b + db, im_max + dy),
            complex(a - da, im_max + dy),
        ]
        try:
            total = 0.0
            for k in range(4):
                za, zb = corners[k], corners[(k + 1) % 4]
                n0 = max(16, int(4.0 * abs(zb - za)))
                pts = [za + (zb - za) * j / n0 for j in range(n0 + 1)]
                vals = [chi_scalar(z) for z in pts]
                for j in range(n0):
                    total += _arg_walk(chi_scalar, pts[j], pts[j + 1], vals[j], vals[j + 1], 52)
            winding = total / (2.0 * math.pi)
            n = round(winding)
            if abs(winding - n) > 0.05:
                raise ContourError(f"winding {winding} is not close to an integer")
            if n < 0:
                raise ContourError(f"negative winding {n}: contour orientation bug")
            return int(n)
        except _TooClose:
            continue
    raise ContourError(
        f"a zero sits on (or within {guard} of) every perturbed contour near "
        f"[{a},{b}]x[-{im_max},{im_max}]"
    )


def dominance_check(m, c: float, *, eps: float = 1e-3, im_max: float | None = None) -> bool:
    """True iff lambda1 dominates: the only zeros of chi(., c) with
    Re z >= lambda1 - eps are the real pair {lambda1, lambda2}.

    The scan rectangle extends to R = zero_modulus_bound + 1 on the right
    and +-Y vertically with Y >= the same bound, so it contains every
    zero of the half plane {Re z >= lambda1 - eps}; the count must equal
    2 (a double root counts twice).
    """
    rr = real_roots(m, c)
    if rr is None:
        raise SubcriticalError("dominance check requires c >= c* (no real roots)")
    bound = zero_modulus_bound(m, c)
    R = bound + 1.0
    Y = default_im_bound(m, c) if im_max is None else im_max
    if Y <= bound:
        Y = bound + 1.0
    n = count_zeros_rect(m, c, (rr.lambda1 - eps, R), Y)
    return n == 2


# -------------------------------------------------------------- summary


class SpeedAnalysis(NamedTuple):
    c: float
    lambda1: float
    lambda2: float
    critical: bool
    c_star: float
    dominance_ok: bool


def analyze_speed(m, c: float | None = None, *, check_dominance: bool = True) -> SpeedAnalysis:
    """Full root/speed report at speed c (or at c* when c is None).

    Raises SubcriticalError when c < c* (no real decay rates exist).
    """
    c_star, lam_star = critical_speed(m)
    c_eff = c_star if c is None else float(c)
    rr = real_roots(m, c_eff)
    if rr is None:
        raise SubcriticalError(
            f"speed {c_eff} is below the critical speed {c_star}: no real roots"
        )
    dom = dominance_check(m, c_eff) if check_dominance else False
    return SpeedAnalysis(c_eff, rr.lambda1, rr.lambda2, rr.critical, c_star, dom)
