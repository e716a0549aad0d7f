"""Command-line front end tying the library together.

Subcommands
-----------
``speed``
    Critical speed and real decay rates of the characteristic function.
``zeros``
    Argument-principle zero count over a rectangle in the complex plane.
``profile``
    Wavefront profile solve; writes CSV and JSON reports, optionally SVG.
``verify``
    Hypothesis checks with optional profile diagnostics and uniqueness
    harness.
``evolve``
    Direct time integration of the reaction-diffusion equation with
    front tracking; writes level-set track and final-field CSVs.

Configuration resolves in three layers: built-in defaults, then
command-line flags, then an optional ``--config`` JSON file whose
entries override the flags.  Every JSON report embeds the fully
resolved configuration, so a run is reproducible from its own output,
and all emitters are deterministic: JSON uses sorted keys, CSV cells
carry 17 significant digits, SVG coordinates are fixed-precision.  The
``SEMIFRONT_OUTDIR`` environment variable supplies the default output
directory (overridden by ``--outdir``).

Exit codes: 0 success; 2 invalid configuration (bad flags or files,
unknown models, speeds below critical); 3 numerical failure; 4 profile
non-convergence (reports are still written); 5 hypothesis failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .asymptotics import DecayFit, detect_oscillation, fit_decay
from .chareq import (
    ContourError,
    SubcriticalError,
    analyze_speed,
    count_zeros_rect,
    critical_speed,
)
from .evolution import front_speed, moving_frame_gap, step_init, tail_seed
from .model import MODEL_NAMES, Model, model_from_config
from .profile import ProfileSolution, SolverOptions, solve_profile
from .verify import diagnostics_Q, verify_model

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_NO_CONVERGENCE = 4
EXIT_HYPOTHESIS = 5


class _ConfigError(Exception):
    """Invalid configuration; optionally carries a usage string."""

    def __init__(self, message: str, usage: Optional[str] = None):
        super().__init__(message)
        self.usage = usage


# ----------------------------------------------------------- emitters


def _plain(obj):
    """Recursively convert to strict-JSON-safe built-ins.

    numpy scalars/arrays become Python numbers/lists and non-finite
    floats become None, so reports stay valid JSON everywhere.
    """
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="\n" keeps outputs byte-identical across platforms
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _fmt17(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt17(v) for v in row) for row in zip(*columns))
    _write_text(path, "\n".join(lines) + "\n")


def _emit_json(cfg: dict, payload: dict, stem: str) -> None:
    """Write ``<outdir>/<stem>.json`` and echo the same bytes to stdout."""
    out = dict(payload)
    out["config"] = cfg
    text = json.dumps(_plain(out), indent=2, sort_keys=True, allow_nan=False) + "\n"
    _write_text(Path(cfg["outdir"]) / (stem + ".json"), text)
    sys.stdout.write(text)


# ------------------------------------------------------ configuration


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _model_config(args) -> dict:
    cfg = {"name": args.model, "h": args.h}
    for key in ("p", "z", "k"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return cfg


def _speed_request(args, default):
    """The requested speed: a number, the string "critical", or None."""
    if args.critical and args.c is not None:
        raise _ConfigError("pass either --c or --critical, not both")
    if args.critical:
        return "critical"
    if args.c is not None:
        return args.c
    return default


def _c_value(cfg) -> Optional[float]:
    """Numeric speed from the resolved config; None requests critical."""
    c = cfg.get("c")
    if c is None or c == "critical":
        return None
    return float(c)


def _resolve(args, **extra) -> dict:
    """Defaults + flags, overridden by the --config file when given."""
    cfg: dict = {"command": args.cmd, "model": _model_config(args), "outdir": args.outdir}
    cfg.update(extra)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise _ConfigError("config file must contain a JSON object")
        cfg = _merge(cfg, overrides)
        cfg["config_file"] = args.config
    if not cfg.get("outdir"):
        cfg["outdir"] = os.environ.get("SEMIFRONT_OUTDIR") or "."
    return cfg


def _require_model(cfg: dict, args) -> Model:
    mcfg = cfg.get("model") or {}
    if not mcfg.get("name"):
        raise _ConfigError(
            "a model is required: pass --model or a config file with a model entry",
            usage=args._parser.format_usage(),
        )
    return model_from_config(mcfg)


# ------------------------------------------------------------- figure

_SVG_W = 720.0
_SVG_H = 432.0
_SVG_PAD = 52.0


def _svg_profile(sol: ProfileSolution, fit: DecayFit) -> str:
    """Static single-file profile figure.

    Axes with ticks, the profile polyline, a dashed guide at the
    positive equilibrium, and the exponential factor of the fitted tail
    law overlaid on the left.  All coordinates use fixed two-decimal
    formatting so reruns are byte-identical.
    """
    t, phi, kap = sol.t, sol.phi, sol.model.kappa
    x_lo, x_hi = float(t[0]), float(t[-1])
    y_hi = 1.08 * max(float(phi.max()), kap)
    inner_w = _SVG_W - 2.0 * _SVG_PAD
    inner_h = _SVG_H - 2.0 * _SVG_PAD

    def X(v: float) -> float:
        return _SVG_PAD + (v - x_lo) / (x_hi - x_lo) * inner_w

    def Y(v: float) -> float:
        return _SVG_H - _SVG_PAD - v / y_hi * inner_h

    def pts(xs, ys) -> str:
        return " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xs, ys))

    el = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W:.0f}" '
        f'height="{_SVG_H:.0f}" viewBox="0 0 {_SVG_W:.0f} {_SVG_H:.0f}">',
        f'<rect width="{_SVG_W:.0f}" height="{_SVG_H:.0f}" fill="white"/>',
    ]
    axis = 'stroke="black" stroke-width="1"'
    x_axis_y = _SVG_H - _SVG_PAD
    el.append(f'<line x1="{_SVG_PAD:.2f}" y1="{x_axis_y:.2f}" x2="{_SVG_W - _SVG_PAD:.2f}" y2="{x_axis_y:.2f}" {axis}/>')
    el.append(f'<line x1="{_SVG_PAD:.2f}" y1="{_SVG_PAD:.2f}" x2="{_SVG_PAD:.2f}" y2="{x_axis_y:.2f}" {axis}/>')
    for i in range(5):
        xv = x_lo + i * (x_hi - x_lo) / 4.0
        xp = X(xv)
        el.append(f'<line x1="{xp:.2f}" y1="{x_axis_y:.2f}" x2="{xp:.2f}" y2="{x_axis_y + 5:.2f}" {axis}/>')
        el.append(
            f'<text x="{xp:.2f}" y="{x_axis_y + 18:.2f}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{xv:.4g}</text>'
        )
        yv = i * y_hi / 4.0
        yp = Y(yv)
        el.append(f'<line x1="{_SVG_PAD - 5:.2f}" y1="{yp:.2f}" x2="{_SVG_PAD:.2f}" y2="{yp:.2f}" {axis}/>')
        el.append(
            f'<text x="{_SVG_PAD - 8:.2f}" y="{yp + 4:.2f}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{yv:.4g}</text>'
        )
    el.append(
        f'<text x="{_SVG_W / 2:.2f}" y="{_SVG_H - 14:.2f}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">t</text>'
    )
    el.append(
        f'<text x="{16.0:.2f}" y="{_SVG_H / 2:.2f}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif" '
        f'transform="rotate(-90 16 {_SVG_H / 2:.0f})">phi</text>'
    )

    kap_y = Y(kap)
    el.append(
        f'<line x1="{_SVG_PAD:.2f}" y1="{kap_y:.2f}" x2="{_SVG_W - _SVG_PAD:.2f}" '
        f'y2="{kap_y:.2f}" stroke="#888888" stroke-width="1" stroke-dasharray="6,4"/>'
    )
    el.append(
        f'<text x="{_SVG_W - _SVG_PAD - 4:.2f}" y="{kap_y - 5:.2f}" font-size="11" '
        f'text-anchor="end" font-family="sans-serif" fill="#888888">kappa = {kap:.4g}</text>'
    )

    # exponential factor of the fitted tail law, clipped to the frame
    y_tail = fit.amplitude * np.exp(fit.rate * t)
    show = y_tail <= y_hi
    if np.any(show):
        el.append(
            f'<polyline points="{pts(t[show], y_tail[show])}" fill="none" '
            f'stroke="#d62728" stroke-width="1.5" stroke-dasharray="2,3"/>'
        )
    el.append(
        f'<polyline points="{pts(t, phi)}" fill="none" stroke="#1f77b4" stroke-width="1.8"/>'
    )
    el.append(
        f'<text x="{_SVG_PAD + 8:.2f}" y="{_SVG_PAD - 8:.2f}" font-size="12" '
        f'font-family="sans-serif">{sol.model.name}, c = {sol.c:.6g}; '
        f'tail fit: rate = {fit.rate:.6g} ({fit.mode})</text>'
    )
    el.append("</svg>")
    return "\n".join(el) + "\n"


# --------------------------------------------------------- subcommands


def _cmd_speed(args) -> int:
    cfg = _resolve(args, c=_speed_request(args, "critical"))
    m = _require_model(cfg, args)
    report = analyze_speed(m, _c_value(cfg))
    payload = {
        "c": report.c,
        "c_star": report.c_star,
        "lambda1": report.lambda1,
        "lambda2": report.lambda2,
        "critical": report.critical,
        "dominance_ok": report.dominance_ok,
    }
    _emit_json(cfg, payload, "speed")
    return EXIT_OK


def _cmd_zeros(args) -> int:
    cfg = _resolve(
        args,
        c=_speed_request(args, "critical"),
        re_min=args.re_min,
        re_max=args.re_max,
        im_max=args.im_max,
    )
    m = _require_model(cfg, args)
    sa = analyze_speed(m, _c_value(cfg), check_dominance=False)
    re_min = sa.lambda1 - 1e-3 if cfg.get("re_min") is None else float(cfg["re_min"])
    re_max = sa.lambda2 + 1e-3 if cfg.get("re_max") is None else float(cfg["re_max"])
    im_max = 50.0 if cfg.get("im_max") is None else float(cfg["im_max"])
    count = count_zeros_rect(m, sa.c, (re_min, re_max), im_max)
    payload = {
        "c": sa.c,
        "c_star": sa.c_star,
        "lambda1": sa.lambda1,
        "lambda2": sa.lambda2,
        "critical": sa.critical,
        "count": count,
        "rectangle": {"re_min": re_min, "re_max": re_max, "im_max": im_max},
    }
    _emit_json(cfg, payload, "zeros")
    return EXIT_OK


def _cmd_profile(args) -> int:
    cfg = _resolve(
        args,
        c=_speed_request(args, "critical"),
        t_plus=args.t_plus,
        t_minus=args.t_minus,
        step=args.step,
        tol=args.tol,
        max_iter=args.max_iter,
        accel_iter=args.accel_iter,
        svg=bool(args.svg),
    )
    m = _require_model(cfg, args)
    sa = analyze_speed(m, _c_value(cfg), check_dominance=False)
    opts = SolverOptions(
        t_minus=None if cfg.get("t_minus") is None else float(cfg["t_minus"]),
        t_plus=float(cfg["t_plus"]),
        step=float(cfg["step"]),
        tol=float(cfg["tol"]),
        max_iter=int(cfg["max_iter"]),
        accel_iter=int(cfg["accel_iter"]),
    )
    sol = solve_profile(m, sa.c, opts)
    fit = fit_decay(sol)
    oscillatory, crossings = detect_oscillation(sol)
    q_min = pi_integral = None
    if sol.converged:
        q_min, pi_integral = diagnostics_Q(sol)

    outdir = Path(cfg["outdir"])
    _write_csv(outdir / "profile.csv", ("t", "phi", "dphi"), (sol.t, sol.phi, sol.dphi))
    files = {"csv": "profile.csv", "json": "profile.json", "svg": None}
    if cfg.get("svg"):
        _write_text(outdir / "profile.svg", _svg_profile(sol, fit))
        files["svg"] = "profile.svg"
    payload = {
        "c": sa.c,
        "c_star": sa.c_star,
        "lambda1": sol.lambda1,
        "lambda2": sol.lambda2,
        "critical": sol.critical,
        "residual": sol.residual,
        "drift": sol.drift,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "clamped_low": sol.clamp_low,
        "clamped_high": sol.clamp_high,
        "decay": {
            "rate": fit.rate,
            "mode": fit.mode,
            "window": list(fit.window),
            "fit_error": fit.fit_error,
            "amplitude": fit.amplitude,
        },
        "oscillatory": oscillatory,
        "kappa_crossings": crossings,
        "q_min": q_min,
        "pi_integral": pi_integral,
        "files": files,
    }
    _emit_json(cfg, payload, "profile")
    return EXIT_OK if sol.converged else EXIT_NO_CONVERGENCE


def _cmd_verify(args) -> int:
    cfg = _resolve(
        args,
        c=_speed_request(args, None),
        n_samples=args.n_samples,
        seed=args.seed,
        epsilon=args.epsilon,
        n_seeds=args.n_seeds,
    )
    m = _require_model(cfg, args)
    c_req = cfg.get("c")
    if c_req == "critical":
        c_val: Optional[float] = critical_speed(m)[0]
    elif c_req is not None:
        c_val = float(c_req)
    else:
        c_val = None
    report = verify_model(
        m,
        n_samples=int(cfg["n_samples"]),
        seed=int(cfg["seed"]),
        epsilon=float(cfg["epsilon"]),
        c=c_val,
        n_seeds=int(cfg["n_seeds"]),
    )
    _emit_json(cfg, report.to_dict(), "verify")
    return EXIT_OK if report.all_passed else EXIT_HYPOTHESIS


def _cmd_evolve(args) -> int:
    cfg = _resolve(
        args,
        c=_speed_request(args, "critical"),
        ic=args.ic,
        x0=args.x0,
        x_lo=args.x_lo,
        x_hi=args.x_hi,
        dx=args.dx,
        dt=args.dt,
        t_run=args.t_run,
        compare=bool(args.compare),
    )
    m = _require_model(cfg, args)
    sa = analyze_speed(m, _c_value(cfg), check_dominance=False)
    x0 = float(cfg["x0"])
    ic = cfg.get("ic")
    if ic == "tail":
        u0 = tail_seed(m.kappa, sa.lambda1, x0)
    elif ic == "step":
        u0 = step_init(m.kappa, x0)
    else:
        raise _ConfigError(f"unknown initial data kind {ic!r}; expected tail or step")
    run = front_speed(
        m,
        u0,
        float(cfg["x_lo"]),
        float(cfg["x_hi"]),
        float(cfg["dx"]),
        float(cfg["t_run"]),
        dt=None if cfg.get("dt") is None else float(cfg["dt"]),
    )

    outdir = Path(cfg["outdir"])
    _write_csv(outdir / "track.csv", ("t", "x_half"), (run.times, run.positions))
    _write_csv(outdir / "field.csv", ("x", "u"), (run.x, run.u))
    payload = {
        "speed": run.speed,
        "c": sa.c,
        "c_star": sa.c_star,
        "rel_error": (run.speed - sa.c) / sa.c,
        "t_final": run.t_final,
        "clamped": run.clamped,
        "exited": run.exited,
        "files": {"track": "track.csv", "field": "field.csv", "json": "evolve.json"},
    }
    if cfg.get("compare"):
        sol = solve_profile(m, sa.c)
        shift, gap = moving_frame_gap(run, sol)
        payload["profile_gap"] = {"shift": shift, "sup": gap}
    _emit_json(cfg, payload, "evolve")
    return EXIT_OK if math.isfinite(run.speed) else EXIT_NUMERICS


# -------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semifront",
        description="wavefront tools for delayed monostable reaction-diffusion models",
    )
    sub = parser.add_subparsers(dest="cmd", metavar="command")

    def command(name: str, help_: str, func) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--model", choices=list(MODEL_NAMES), help="model name")
        sp.add_argument("--h", type=float, default=0.0, help="delay span (default 0)")
        sp.add_argument("--p", type=float, help="growth parameter (nicholson, may)")
        sp.add_argument("--z", type=float, help="exponent parameter (may)")
        sp.add_argument("--k", type=float, help="shape parameter (may)")
        sp.add_argument("--config", help="JSON config file; its entries override flags")
        sp.add_argument("--outdir", help="output directory (default $SEMIFRONT_OUTDIR or '.')")
        sp.set_defaults(func=func, cmd=name, _parser=sp)
        return sp

    def speed_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--c", type=float, help="wave speed")
        sp.add_argument("--critical", action="store_true", help="use the critical speed")

    sp = command("speed", "critical speed and real decay rates", _cmd_speed)
    speed_flags(sp)

    sp = command("zeros", "zero count of the characteristic function on a rectangle", _cmd_zeros)
    speed_flags(sp)
    sp.add_argument("--re-min", type=float, help="rectangle left edge (default lambda1 - 1e-3)")
    sp.add_argument("--re-max", type=float, help="rectangle right edge (default lambda2 + 1e-3)")
    sp.add_argument("--im-max", type=float, help="rectangle half-height (default 50)")

    sp = command("profile", "solve the wavefront profile and report its shape", _cmd_profile)
    speed_flags(sp)
    sp.add_argument("--t-plus", type=float, default=40.0, help="right edge of the grid")
    sp.add_argument("--t-minus", type=float, help="left edge of the grid (default auto)")
    sp.add_argument("--step", type=float, default=0.02, help="grid step")
    sp.add_argument("--tol", type=float, default=1e-9, help="relative sup-norm tolerance")
    sp.add_argument("--max-iter", type=int, default=600, help="damped iteration budget")
    sp.add_argument("--accel-iter", type=int, default=400, help="accelerated iteration budget")
    sp.add_argument("--svg", action="store_true", help="also write an SVG figure")

    sp = command("verify", "check the existence/uniqueness hypotheses by sampling", _cmd_verify)
    speed_flags(sp)
    sp.add_argument("--n-samples", type=int, default=10_000, help="samples per hypothesis")
    sp.add_argument("--seed", type=int, default=0, help="base RNG seed")
    sp.add_argument("--epsilon", type=float, default=0.1, help="lower-bound test level")
    sp.add_argument("--n-seeds", type=int, default=0, help="uniqueness harness restarts (0 = skip)")

    sp = command("evolve", "integrate the equation and measure the front speed", _cmd_evolve)
    speed_flags(sp)
    sp.add_argument("--ic", choices=["tail", "step"], default="tail", help="initial data kind")
    sp.add_argument("--x0", type=float, default=0.0, help="initial front location")
    sp.add_argument("--x-lo", type=float, default=-80.0, help="left edge of the domain")
    sp.add_argument("--x-hi", type=float, default=30.0, help="right edge of the domain")
    sp.add_argument("--dx", type=float, default=0.1, help="spatial step")
    sp.add_argument("--dt", type=float, help="time step (default 0.4*dx^2)")
    sp.add_argument("--t-run", type=float, default=18.0, help="integration time")
    sp.add_argument("--compare", action="store_true", help="also align against the profile solver")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags, 0 on --help
        code = exc.code
        return code if isinstance(code, int) else EXIT_CONFIG
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _ConfigError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SubcriticalError, OSError, KeyError, TypeError, ValueError) as exc:
        # bad inputs surface as ValueError subclasses throughout the library
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContourError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
