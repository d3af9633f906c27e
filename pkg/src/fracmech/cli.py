"""Command-line front end: configuration loading, simulation and ensemble
orchestration, convergence and criticality studies, CSV and figure output.

Exit codes: 0 success, 1 failed check or I/O error, 2 configuration error,
3 numeric abort, 4 quadrature failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import action as action_mod
from . import frackernel, sde, systems
from .errors import ConfigError, NumericAbortError, QuadratureError

__all__ = [
    "load_runspec",
    "build_config",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "ensemble_statistics",
    "main",
]


# ---------------------------------------------------------------------------
# configuration

_GAMMA_CHOICES = {
    "half-square": (lambda q: 0.5 * float(np.dot(q, q)), lambda q: np.asarray(q, dtype=float)),
    "sin": (lambda q: float(np.sin(q[0])), lambda q: np.cos(q)),
    "zero": (lambda q: 0.0, lambda q: np.zeros_like(np.asarray(q, dtype=float))),
}

_POTENTIAL_CHOICES = {
    "cos": (lambda q: float(np.cos(q[0])), lambda q: -np.sin(q)),
    "harmonic": (lambda q: 0.5 * float(np.dot(q, q)), lambda q: np.asarray(q, dtype=float)),
    "zero": (lambda q: 0.0, lambda q: np.zeros_like(np.asarray(q, dtype=float))),
}

_METRIC_CHOICES = {}


def _euclidean_metric(n):
    eye = np.eye(n)
    zeros = np.zeros((n, n, n))
    return systems.MetricModel(
        name="euclidean", n=n,
        g=lambda q: eye, dg_dq=lambda q: zeros,
        gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(n),
    )


def _polar_metric():
    def g(q):
        return np.diag([1.0, q[0] ** 2])

    def dg(q):
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = 2.0 * q[0]
        return out

    return systems.MetricModel(
        name="polar", n=2, g=g, dg_dq=dg,
        gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(2),
    )


_METRIC_CHOICES["euclidean"] = _euclidean_metric
_METRIC_CHOICES["polar"] = lambda n=2: _polar_metric()


def _pick(table, key, field):
    if key not in table:
        raise ConfigError(f"{field}: unknown choice {key!r} (one of {sorted(table)})")
    return table[key]


def build_system(spec: dict) -> systems.SystemModel:
    """Instantiate a named builtin from the ``system`` section."""
    name = spec.get("name")
    if name is None:
        raise ConfigError("system.name: missing")
    gamma_key = spec.get("gamma", "half-square" if name == "samuelson" else "zero")
    gam, dgam = _pick(_GAMMA_CHOICES, gamma_key, "system.gamma")
    if name == "samuelson":
        try:
            return systems.builtin_samuelson(
                spec.get("rho", 0.0), spec.get("a", 0.0), gamma=gam, dgamma_dq=dgam
            )
        except ValueError as exc:
            raise ConfigError(f"system: {exc}") from exc
    if name == "natural":
        vkey = spec.get("V", "cos")
        V, dV = _pick(_POTENTIAL_CHOICES, vkey, "system.V")
        return systems.builtin_natural(V, dV, gam, dgam, n=1, name=f"natural-{vkey}")
    if name == "discounted":
        base = spec.get("base", "free")
        if base != "free":
            raise ConfigError(f"system.base: unknown choice {base!r} (one of ['free'])")
        free = systems.builtin_natural(
            V=lambda q: 0.0, dV=lambda q: np.zeros_like(np.asarray(q, dtype=float)),
            gam=gam, dgam=dgam, n=1, name="free",
        )
        return systems.builtin_discounted(free, spec.get("rho", 0.0))
    if name == "metric":
        mkey = spec.get("metric", "euclidean")
        n = int(spec.get("n", 2))
        factory = _pick(_METRIC_CHOICES, mkey, "system.metric")
        model = systems.builtin_metric(factory(n))
        gmodel = replace(model, gamma=gam, dgamma_dq=dgam)
        return gmodel
    raise ConfigError(f"system.name: unknown choice {name!r}")


def build_weight(spec: dict | None) -> frackernel.FracWeight | None:
    if spec is None:
        return None
    try:
        profile = (
            frackernel.AlphaProfile.affine(spec["alpha0"], spec["alpha1"])
            if spec.get("alpha1", 0.0) != 0.0
            else frackernel.AlphaProfile.constant(spec["alpha0"])
        )
    except KeyError as exc:
        raise ConfigError(f"weight.{exc.args[0]}: missing") from exc
    try:
        return frackernel.FracWeight(
            profile=profile,
            rho=spec.get("rho", 0.0),
            t_obs=spec["t_obs"],
            t0=spec.get("t0", 0.0),
            sing_eps=spec.get("sing_eps", 1e-8),
        )
    except KeyError as exc:
        raise ConfigError(f"weight.{exc.args[0]}: missing") from exc
    except ValueError as exc:
        raise ConfigError(f"weight: {exc}") from exc


def load_runspec(path: str | Path) -> dict:
    """Read and structurally check a JSON run specification."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        spec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError("config: top level must be an object")
    for key in ("system", "formulation", "h", "N", "q0"):
        if key not in spec:
            raise ConfigError(f"{key}: missing")
    return spec


def build_config(spec: dict, seed_override: int | None = None, stream: int = 0) -> sde.SimConfig:
    """Assemble a validated SimConfig from a parsed run specification."""
    system = build_system(spec["system"])
    weight = build_weight(spec.get("weight"))

    def _vec(key):
        val = spec.get(key)
        if val is None:
            return None
        arr = np.asarray(val, dtype=float)
        if arr.shape != (system.n,):
            raise ConfigError(f"{key}: expected {system.n} components, got shape {arr.shape}")
        return arr

    config = sde.SimConfig(
        system=system,
        formulation=spec["formulation"],
        t0=float(spec.get("t0", 0.0)),
        h=float(spec["h"]),
        N=int(spec["N"]),
        seed=int(seed_override if seed_override is not None else spec.get("seed", 0)),
        q0=np.asarray(spec["q0"], dtype=float),
        v0=_vec("v0"),
        p0=_vec("p0"),
        weight=weight,
        stream=stream,
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# CSV serialization (17 significant digits round-trips doubles exactly)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: sde.Trajectory, path: str | Path) -> None:
    """One row per grid point: n, s, dW, then q, v, p components.  The dW
    column is empty on the last row."""
    n = traj.q.shape[1]
    header = ["n", "s", "dW"]
    for label in ("q", "v", "p"):
        header.extend(f"{label}_{i}" for i in range(n))
    lines = [",".join(header)]
    for k in range(traj.N + 1):
        row = [str(k), _fmt(traj.times[k]), _fmt(traj.dW[k]) if k < traj.N else ""]
        for arr in (traj.q, traj.v, traj.p):
            row.extend(_fmt(x) for x in arr[k])
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path: str | Path) -> dict:
    """Parse a trajectory CSV back into arrays (times, q, v, p, dW)."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    n = sum(1 for c in header if c.startswith("q_"))
    rows = [line.split(",") for line in lines[1:]]
    times = np.array([float(r[1]) for r in rows])
    dW = np.array([float(r[2]) for r in rows[:-1]])
    data = np.array([[float(x) for x in r[3:]] for r in rows])
    return {
        "times": times,
        "dW": dW,
        "q": data[:, :n],
        "v": data[:, n : 2 * n],
        "p": data[:, 2 * n :],
    }


# ---------------------------------------------------------------------------
# plotting (pure post-processing; numeric outputs never depend on it)


def _emit_plots(traj: sde.Trajectory, outdir: Path, tag: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = np.arange(traj.N + 1)
    panels = [
        (steps, traj.q[:, 0], "step n", "q", f"q_vs_n_{tag}"),
        (steps, traj.p[:, 0], "step n", "p", f"p_vs_n_{tag}"),
        (traj.q[:, 0], traj.p[:, 0], "q", "p", f"phase_{tag}"),
    ]
    for x, y, xl, yl, fname in panels:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(x, y, lw=0.8)
        ax.set_xlabel(xl)
        ax.set_ylabel(yl)
        ax.set_title(f"{traj.system_name} ({traj.formulation}, {tag})")
        fig.tight_layout()
        fig.savefig(outdir / f"{fname}.png", dpi=120)
        plt.close(fig)


# ---------------------------------------------------------------------------
# commands


def _zero_path(config: sde.SimConfig) -> sde.WienerPath:
    dw = np.zeros(config.N)
    dw.flags.writeable = False
    return sde.WienerPath(seed=config.seed, stream=config.stream, h=config.h, N=config.N, increments=dw)


def cmd_simulate(args) -> int:
    spec = load_runspec(args.config)
    config = build_config(spec, args.seed)
    outdir = Path(args.out or spec.get("out_dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)

    path = sde.wiener_path(config.seed, config.h, config.N, config.stream)
    traj = sde.euler_maruyama(config, path)
    det = sde.euler_maruyama(config, _zero_path(config))

    write_trajectory_csv(traj, outdir / "trajectory.csv")
    write_trajectory_csv(det, outdir / "trajectory_deterministic.csv")
    if not args.no_plots and spec.get("plots", True):
        _emit_plots(det, outdir, "deterministic")
        _emit_plots(traj, outdir, "sample")
    print(f"wrote {outdir / 'trajectory.csv'} ({config.N + 1} rows)")
    return 0


def ensemble_statistics(config: sde.SimConfig, size: int):
    """Integrate ``size`` trajectories on streams 0..size-1 and return
    (trajectories, mean_q, var_q, mean_p, var_p) with per-time statistics.

    Streams are independent by construction, so any execution order gives
    identical output; this runs them in index order.
    """
    if size < 1:
        raise ConfigError(f"ensemble.size: must be >= 1, got {size}")
    trajs = []
    for m in range(size):
        cfg = replace(config, stream=m)
        path = sde.wiener_path(cfg.seed, cfg.h, cfg.N, stream=m)
        trajs.append(sde.euler_maruyama(cfg, path))
    qstack = np.stack([t.q for t in trajs])
    pstack = np.stack([t.p for t in trajs])
    return (
        trajs,
        qstack.mean(axis=0), qstack.var(axis=0),
        pstack.mean(axis=0), pstack.var(axis=0),
    )


def cmd_ensemble(args) -> int:
    spec = load_runspec(args.config)
    config = build_config(spec, args.seed)
    size = int(args.paths or spec.get("ensemble", {}).get("size", 1))
    outdir = Path(args.out or spec.get("out_dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)

    trajs, mean_q, var_q, mean_p, var_p = ensemble_statistics(config, size)
    width = max(4, len(str(size - 1)))
    for m, traj in enumerate(trajs):
        write_trajectory_csv(traj, outdir / f"path_{m:0{width}d}.csv")

    n = config.system.n
    header = ["n", "s"]
    for label, _ in (("mean_q", mean_q), ("var_q", var_q), ("mean_p", mean_p), ("var_p", var_p)):
        header.extend(f"{label}_{i}" for i in range(n))
    lines = [",".join(header)]
    times = trajs[0].times
    for k in range(config.N + 1):
        row = [str(k), _fmt(times[k])]
        for arr in (mean_q, var_q, mean_p, var_p):
            row.extend(_fmt(x) for x in arr[k])
        lines.append(",".join(row))
    (outdir / "summary.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {size} paths and {outdir / 'summary.csv'}")
    return 0


def cmd_convergence(args) -> int:
    spec = load_runspec(args.config)
    config = build_config(spec, args.seed)
    conv = spec.get("convergence", {})
    ladder = conv.get("ladder")
    if not ladder:
        raise ConfigError("convergence.ladder: missing or empty")
    ladder = sorted(float(h) for h in ladder)[::-1]
    for a, b in zip(ladder, ladder[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ConfigError(f"convergence.ladder: steps {a} and {b} not related by factor 2")
    seeds = int(conv.get("seeds", 20))
    ref_factor = int(conv.get("reference_factor", 8))
    band = conv.get("order_band", [0.35, 1.3])
    total = config.N * config.h

    h_ref = ladder[-1] / ref_factor
    errors = np.zeros(len(ladder))
    for s in range(seeds):
        n_ref = int(round(total / h_ref))
        fine_path = sde.wiener_path(config.seed, h_ref, n_ref, stream=s)
        ref = sde.euler_maruyama(
            replace(config, h=h_ref, N=n_ref, stream=s), fine_path
        )
        for i, h in enumerate(ladder):
            factor = int(round(h / h_ref))
            path = fine_path.coarsen(factor)
            traj = sde.euler_maruyama(replace(config, h=h, N=path.N, stream=s), path)
            errors[i] += sde.strong_error(ref, traj)
    errors /= seeds

    hs = np.array(ladder)
    order = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    print("h,strong_error,order_between")
    for i, (h, e) in enumerate(zip(ladder, errors)):
        between = (
            ""
            if i == 0
            else _fmt(math.log(errors[i - 1] / e) / math.log(ladder[i - 1] / h))
        )
        print(f"{_fmt(h)},{_fmt(e)},{between}")
    print(f"fitted order: {order:.4f} (band {band})")
    ok = band[0] <= order <= band[1]
    print("convergence: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def cmd_action_check(args) -> int:
    spec = load_runspec(args.config)
    config = build_config(spec, args.seed)
    opts = spec.get("action_check", {})
    report = action_mod.criticality_report(
        config,
        n_variations=int(opts.get("variations", 20)),
        variation_seed=int(opts.get("variation_seed", 0)),
        levels=int(opts.get("levels", 3)),
        negative_control=bool(opts.get("negative_control", False)),
    )
    for line in report.lines():
        print(line)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        summary = {
            "step_sizes": list(report.step_sizes),
            "max_abs_dA": list(report.max_abs_dA),
            "ratios": list(report.ratios),
            "passed": report.passed,
            "n_variations": report.n_variations,
        }
        (outdir / "action_check.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0 if report.passed else 1


_INTEGRAND_CHOICES = {
    "one": lambda s: 1.0,
    "square": lambda s: s * s,
    "sin": math.sin,
}


def cmd_integral(args) -> int:
    profile = (
        frackernel.AlphaProfile.affine(args.alpha0, args.alpha1)
        if args.alpha1 != 0.0
        else frackernel.AlphaProfile.constant(args.alpha0)
    )
    try:
        weight = frackernel.FracWeight(
            profile=profile, rho=args.rho, t_obs=args.t, t0=args.t0
        )
    except ValueError as exc:
        raise ConfigError(f"weight: {exc}") from exc
    f = _pick(_INTEGRAND_CHOICES, args.f, "f")
    value, estimate = frackernel.frl_integral_report(f, weight, args.t, rtol=args.rtol)
    print(f"value = {_fmt(value)}")
    print(f"error estimate = {_fmt(estimate)}")
    return 0


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracmech",
        description="Simulate classical and fractional stochastic Hamiltonian systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def _common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="path to a JSON run spec")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("simulate", help="integrate one sample path plus its noise-off twin")
    _common(p)
    p.add_argument("--no-plots", action="store_true", help="skip figure emission")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="integrate M independent paths and summarize")
    _common(p)
    p.add_argument("--paths", type=int, default=None, help="override ensemble size")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("convergence", help="pathwise error versus step size")
    _common(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("action-check", help="criticality trend of the discrete action")
    _common(p)
    p.set_defaults(func=cmd_action_check)

    p = sub.add_parser("integral", help="evaluate the weighted integral of a named integrand")
    p.add_argument("--alpha0", type=float, required=True)
    p.add_argument("--alpha1", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--f", default="one", help="integrand: one | square | sin")
    p.add_argument("--rtol", type=float, default=1e-6)
    p.set_defaults(func=cmd_integral)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericAbortError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
