"""Delay reaction functionals and the built-in model registry.

A model couples a scalar reaction functional f acting on history segments
(continuous functions on [-h, 0]) with the data of its linearization at 0,

    f'(0)[phi] = -q*phi(0) + sum_j w_j*phi(s_j),      q >= 0, w_j > 0,

its positive equilibrium kappa, and the smoothness constants (K, alpha,
delta) controlling the quadratic remainder of f near 0.  Functionals are
declared through a finite list of read points s_j in [-h, 0] and a
vectorized map of the point values; this covers every discrete-delay
nonlinearity handled here and keeps grid evaluation cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Measure",
    "HistorySegment",
    "Model",
    "eval_f",
    "eval_lin",
    "builtin_kpp",
    "builtin_mackey_glass",
    "builtin_nicholson",
    "builtin_may",
    "builtin_square",
    "model_from_config",
    "MODEL_NAMES",
]


@dataclass(frozen=True)
class Measure:
    """Linearization data: the -q*phi(0) point mass plus delayed atoms.

    ``atoms`` is a sequence of (location, weight) pairs with locations in
    [-h, 0] and strictly positive weights.  The total delayed mass
    p = sum of weights must exceed q (non-degeneracy).
    """

    q: float
    atoms: tuple[tuple[float, float], ...]
    h: float

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"q must be nonnegative, got {self.q}")
        if self.h < 0:
            raise ValueError(f"delay horizon must be nonnegative, got {self.h}")
        for s, w in self.atoms:
            if not (-self.h - 1e-12 <= s <= 1e-12):
                raise ValueError(f"atom location {s} outside [-h, 0] = [{-self.h}, 0]")
            if w <= 0:
                raise ValueError(f"atom weight must be positive, got {w}")
        if self.p <= self.q:
            raise ValueError(
                f"degenerate linearization: delayed mass p={self.p} must exceed q={self.q}"
            )

    @property
    def p(self) -> float:
        return float(sum(w for _, w in self.atoms))

    def apply(self, values_at_zero, values_at_atoms) -> float:
        """-q*phi(0) + sum_j w_j*phi(s_j) given precomputed point values."""
        out = -self.q * values_at_zero
        for (_, w), v in zip(self.atoms, values_at_atoms):
            out = out + w * v
        return out


class HistorySegment:
    """A continuous function on [-h, 0] stored as uniform samples.

    Evaluation uses piecewise-linear interpolation between the samples,
    so the segment is defined at every point of [-h, 0] regardless of
    where the samples fall.  For h = 0 the domain is the single point 0.
    """

    __slots__ = ("h", "values", "_ts")

    def __init__(self, h: float, values: Sequence[float]):
        if h < 0:
            raise ValueError("delay horizon must be nonnegative")
        vals = np.atleast_1d(np.asarray(values, dtype=float))
        if h == 0:
            if vals.size != 1:
                raise ValueError("a zero-delay segment is a single sample")
        elif vals.size < 2:
            raise ValueError("need at least two samples on a positive-length domain")
        self.h = float(h)
        self.values = vals
        self._ts = np.linspace(-self.h, 0.0, vals.size) if h > 0 else np.zeros(1)

    @classmethod
    def constant(cls, h: float, value: float, n: int = 2) -> "HistorySegment":
        n = 1 if h == 0 else max(2, n)
        return cls(h, np.full(n, float(value)))

    @classmethod
    def from_callable(cls, h: float, fn: Callable[[float], float], n: int = 33) -> "HistorySegment":
        if h == 0:
            return cls(0.0, [float(fn(0.0))])
        ts = np.linspace(-h, 0.0, max(2, n))
        return cls(h, [float(fn(t)) for t in ts])

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < -self.h - 1e-9) or np.any(s_arr > 1e-9):
            raise ValueError(f"evaluation point {s} outside [-{self.h}, 0]")
        if self.h == 0:
            out = np.full_like(s_arr, self.values[0], dtype=float)
        else:
            out = np.interp(np.clip(s_arr, -self.h, 0.0), self._ts, self.values)
        return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out

    def norm(self) -> float:
        """Max norm over [-h, 0] (attained at a sample node)."""
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class Model:
    """A delay reaction functional together with its linearization data.

    ``eval_points`` lists the history locations the functional reads and
    ``f_pointwise`` maps those point values (scalars or aligned numpy
    arrays) to the reaction value; both built-ins and config-defined
    models are expressed this way.  ``bound`` is an a-priori sup bound
    used by the profile solver's clamp.
    """

    name: str
    h: float
    eval_points: tuple[float, ...]
    f_pointwise: Callable
    lin: Measure
    kappa: float
    smoothness: tuple[float, float, float]  # (K, alpha, delta)
    bound: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("delay horizon must be nonnegative")
        for s in self.eval_points:
            if not (-self.h - 1e-12 <= s <= 1e-12):
                raise ValueError(f"read point {s} outside [-h, 0]")
        if self.kappa <= 0:
            raise ValueError("positive equilibrium kappa required")
        K, alpha, delta = self.smoothness
        if K <= 0 or alpha <= 0 or delta <= 0:
            raise ValueError("smoothness constants (K, alpha, delta) must be positive")
        if abs(self.lin.h - self.h) > 1e-12:
            raise ValueError("linearization horizon differs from model horizon")

    def f(self, seg: HistorySegment) -> float:
        return eval_f(self, seg)

    def f_const(self, x):
        """Reaction on the constant segment x (vectorized in x)."""
        x = np.asarray(x, dtype=float)
        vals = [x for _ in self.eval_points]
        return self.f_pointwise(*vals)


def eval_f(m: Model, seg: HistorySegment) -> float:
    """Value of the reaction functional on a history segment."""
    if abs(seg.h - m.h) > 1e-12:
        raise ValueError(f"segment horizon {seg.h} does not match model horizon {m.h}")
    vals = [seg(s) for s in m.eval_points]
    return float(m.f_pointwise(*vals))


def eval_lin(m: Model, seg: HistorySegment) -> float:
    """Linearization at 0: -q*seg(0) + sum_j w_j*seg(s_j)."""
    if abs(seg.h - m.h) > 1e-12:
        raise ValueError(f"segment horizon {seg.h} does not match model horizon {m.h}")
    return float(m.lin.apply(seg(0.0), [seg(s) for s, _ in m.lin.atoms]))


# ---------------------------------------------------------------------------
# built-in models


def builtin_kpp(h: float) -> Model:
    """Delayed logistic reaction f(phi) = phi(0)*(1 - phi(-h)), kappa = 1."""
    if h < 0:
        raise ValueError("delay must be nonnegative")

    def f(v0, vh):
        return v0 * (1.0 - vh)

    # Between the last crossing of kappa and a local maximum the solution can
    # grow for at most one delay span at logistic rate <= 1, so sup phi stays
    # under e^h times an O(1) factor; 2*e^h reduces to the classical bound 2
    # at h = 0 and covers the oscillatory overshoot of large-delay profiles.
    return Model(
        name="kpp",
        h=h,
        eval_points=(0.0, -h),
        f_pointwise=f,
        lin=Measure(q=0.0, atoms=((0.0, 1.0),), h=h),
        kappa=1.0,
        smoothness=(1.0, 1.0, 1.0),
        bound=2.0 * math.exp(h),
        params={"h": h},
    )


def builtin_mackey_glass(
    h: float,
    g: Callable,
    g_prime_0: float,
    kappa: float,
    name: str = "mackey_glass",
    smoothness: tuple[float, float, float] | None = None,
    bound: float | None = None,
    params: dict | None = None,
) -> Model:
    """Reaction f(phi) = -phi(0) + g(phi(-h)) for a birth function g.

    g must fix 0 and kappa and satisfy g'(0) > 1, which makes the
    linearization -phi(0) + g'(0) phi(-h) non-degenerate (p = g'(0) > q = 1).
    """
    if h < 0:
        raise ValueError("delay must be nonnegative")
    if g_prime_0 <= 1.0:
        raise ValueError(
            f"g'(0) = {g_prime_0} <= 1: delayed mass would not exceed the instantaneous loss"
        )
    if smoothness is None:
        # half the sup of |g''| near 0, probed by central differences
        delta = min(0.5, kappa / 2.0)
        xs = np.linspace(0.0, delta, 101)
        eps = 1e-5
        g2 = np.abs(
            (np.asarray(g(xs + eps)) - 2.0 * np.asarray(g(xs)) + np.asarray(g(np.maximum(xs - eps, 0.0))))
            / eps**2
        )
        smoothness = (max(float(np.max(g2)) / 2.0, 1e-6), 1.0, delta)

    def f(v0, vh):
        return -v0 + g(vh)

    return Model(
        name=name,
        h=h,
        eval_points=(0.0, -h),
        f_pointwise=f,
        lin=Measure(q=1.0, atoms=((-h, g_prime_0),), h=h),
        kappa=kappa,
        smoothness=smoothness,
        bound=bound if bound is not None else 4.0 * kappa,
        params=params or {"h": h},
    )


def builtin_nicholson(h: float, p: float) -> Model:
    """Nicholson blowflies birth g(u) = p*u*e^{-u}; kappa solves g(x) = x."""
    if p <= 1.0:
        raise ValueError("need p > 1 for a positive equilibrium")

    def g(u):
        return p * u * np.exp(-u)

    kappa = brentq(lambda x: g(x) - x, 1e-12, max(10.0, 2.0 * math.log(p) + 10.0))
    # |g''(u)| = p e^{-u} |u - 2|, maximal at the left end of [-delta, delta]
    delta = min(0.5, kappa / 2.0)
    K = p * math.exp(delta) * (2.0 + delta) / 2.0
    return builtin_mackey_glass(
        h,
        g,
        g_prime_0=p,
        kappa=kappa,
        name="nicholson",
        smoothness=(K, 1.0, delta),
        bound=max(kappa, p * math.exp(-1.0)) * 1.5,
        params={"h": h, "p": p},
    )


def builtin_may(h: float, p: float, z: float, k: float) -> Model:
    """Harvest-type birth g(u) = max(p*u*(1 - (u/k)^z), 0), kappa = k*(1-1/p)^(1/z)."""
    if p <= 1.0:
        raise ValueError("need p > 1 for a positive equilibrium")
    if z <= 1.0 or k <= 0:
        raise ValueError("need z > 1 and k > 0")

    def g(u):
        u = np.asarray(u, dtype=float)
        out = p * u * (1.0 - (u / k) ** z)
        return np.maximum(out, 0.0)

    kappa = k * (1.0 - 1.0 / p) ** (1.0 / z)
    # on [0, delta]: |g''| = p z (z+1) u^{z-1} / k^z, increasing in u
    delta = min(0.5 * kappa, 0.5 * k)
    K = p * z * (z + 1.0) * delta ** (z - 1.0) / k**z / 2.0
    return builtin_mackey_glass(
        h,
        g,
        g_prime_0=p,
        kappa=kappa,
        name="may",
        smoothness=(max(K, 1e-6), 1.0, delta),
        bound=k,
        params={"h": h, "p": p, "z": z, "k": k},
    )


def builtin_square(h: float = 0.0) -> Model:
    """Negative control: f(phi) = phi(0)^2 with a deliberately overstated
    linearization phi(0).

    The declared slope at 0 is wrong (the true derivative vanishes), so the
    upper-linearization inequality must fail on segments with values above 1;
    verification is expected to report a counterexample for this model.
    """

    def f(v0):
        return v0 * v0

    return Model(
        name="square",
        h=h,
        eval_points=(0.0,),
        f_pointwise=f,
        lin=Measure(q=0.0, atoms=((0.0, 1.0),), h=h),
        kappa=1.0,
        smoothness=(1.0, 1.0, 1.0),
        bound=4.0,
        params={"h": h},
    )


# ---------------------------------------------------------------------------
# config-defined models

_SAFE_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "abs": np.abs,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "pi": math.pi,
    "e": math.e,
}


def _compile_expr(expr: str, n_points: int) -> Callable:
    """Compile an arithmetic expression in u0..u{n-1} into a vectorized callable.

    Expressions are trusted input (they come from the user's own config);
    only the names u0.., the functions in _SAFE_FUNCS and literals resolve.
    """
    code = compile(expr, "<model-expr>", "eval")
    for name in code.co_names:
        if name not in _SAFE_FUNCS and not (
            name.startswith("u") and name[1:].isdigit() and int(name[1:]) < n_points
        ):
            raise ValueError(f"unknown name {name!r} in model expression")

    def f(*vals):
        env = {f"u{i}": v for i, v in enumerate(vals)}
        env.update(_SAFE_FUNCS)
        return eval(code, {"__builtins__": {}}, env)

    return f


def _custom_model(cfg: dict) -> Model:
    h = float(cfg["h"])
    points = tuple(float(s) for s in cfg["eval_points"])
    f = _compile_expr(cfg["expr"], len(points))
    atoms = tuple((float(s), float(w)) for s, w in cfg["atoms"])
    K, alpha, delta = cfg.get("smoothness", (1.0, 1.0, 1.0))
    kappa = float(cfg["kappa"])
    return Model(
        name=cfg.get("name", "custom"),
        h=h,
        eval_points=points,
        f_pointwise=f,
        lin=Measure(q=float(cfg.get("q", 0.0)), atoms=atoms, h=h),
        kappa=kappa,
        smoothness=(float(K), float(alpha), float(delta)),
        bound=float(cfg.get("bound", 4.0 * kappa)),
        params=dict(cfg),
    )


# names buildable from a plain config mapping (builtin_mackey_glass is
# excluded: it takes an arbitrary callable, which a config cannot carry)
MODEL_NAMES = ("kpp", "nicholson", "may", "square", "custom")


def model_from_config(cfg: dict) -> Model:
    """Build a model from a config mapping; see README for the schema."""
    name = cfg.get("name")
    h = float(cfg.get("h", 0.0))
    if name == "kpp":
        return builtin_kpp(h)
    if name == "nicholson":
        return builtin_nicholson(h, float(cfg["p"]))
    if name == "may":
        return builtin_may(h, float(cfg["p"]), float(cfg["z"]), float(cfg["k"]))
    if name == "square":
        return builtin_square(h)
    if name == "custom":
        return _custom_model(cfg)
    raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
