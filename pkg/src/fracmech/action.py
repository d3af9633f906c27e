"""Discrete evaluation of the stochastic action and a refinement-trend test
that integrated trajectories are (approximate) critical points of it."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError
from .frackernel import FracWeight
from .sde import SimConfig, Trajectory, WienerPath, euler_maruyama
from .systems import SystemModel

__all__ = [
    "PathVariation",
    "random_variation",
    "discrete_action",
    "action_differential",
    "CriticalityReport",
    "criticality_report",
]


@dataclass(frozen=True, slots=True)
class PathVariation:
    """Perturbation direction (dq, dv, dp) on the grid, each (N+1, n).

    The position component must vanish at both endpoints; violations are
    rejected here rather than projected away.
    """

    dq: np.ndarray
    dv: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        dq = np.asarray(self.dq)
        if dq.ndim != 2:
            raise ValueError("variation arrays must be (N+1, n)")
        if np.any(dq[0] != 0.0) or np.any(dq[-1] != 0.0):
            raise ValueError("position variation must vanish at both endpoints")
        if dq.shape != np.asarray(self.dv).shape or dq.shape != np.asarray(self.dp).shape:
            raise ValueError("dq, dv, dp must share one shape")


def random_variation(times: np.ndarray, n: int, rng: np.random.Generator, modes: int = 5) -> PathVariation:
    """Smooth low-mode variation: dq from a sine basis (endpoint-vanishing),
    dv and dp from a cosine basis; each component normalized to unit
    max-norm.  Coefficients are uniform in [-1, 1] from ``rng``."""
    a, b = float(times[0]), float(times[-1])
    tau = (np.asarray(times) - a) / (b - a)
    npts = tau.shape[0]

    def _combo(basis) -> np.ndarray:
        out = np.zeros((npts, n))
        for j in range(n):
            coeff = rng.uniform(-1.0, 1.0, modes)
            for m in range(1, modes + 1):
                out[:, j] += coeff[m - 1] * basis(m * math.pi * tau)
            peak = np.max(np.abs(out[:, j]))
            if peak > 0.0:
                out[:, j] /= peak
        return out

    dq = _combo(np.sin)
    dq[0] = 0.0  # sine basis vanishes there already; pin against roundoff
    dq[-1] = 0.0
    return PathVariation(dq=dq, dv=_combo(np.cos), dp=_combo(np.cos))


def _action_arrays(
    times, h, q, v, p, model: SystemModel, weight: Optional[FracWeight], dW
) -> float:
    """Left-endpoint sum of [L + <p, dq/h - v>] g h plus the noise sum
    gamma(q) g dW; g is 1 without a weight."""
    N = len(times) - 1
    total = 0.0
    noise = 0.0
    for k in range(N):
        s = times[k]
        g = weight.g(s) if weight is not None else 1.0
        lag = model.L(s, q[k], v[k])
        pairing = float(np.dot(p[k], (q[k + 1] - q[k]) / h - v[k]))
        total += (lag + pairing) * g * h
        noise += model.gamma(q[k]) * g * dW[k]
    return total + noise


def discrete_action(
    path: Trajectory,
    model: SystemModel,
    weight: Optional[FracWeight] = None,
    wiener: Optional[WienerPath] = None,
) -> float:
    """Discrete action of a path; the noise term uses the increments of
    ``wiener`` (defaulting to the ones stored on the trajectory)."""
    dW = path.dW if wiener is None else wiener.increments
    if len(dW) != path.N:
        raise ConfigError(f"wiener path has {len(dW)} increments, trajectory N = {path.N}")
    return _action_arrays(path.times, path.h, path.q, path.v, path.p, model, weight, dW)


def action_differential(
    path: Trajectory,
    variation: PathVariation,
    model: SystemModel,
    weight: Optional[FracWeight] = None,
    wiener: Optional[WienerPath] = None,
    eps: float = 1e-6,
) -> float:
    """Centered difference of the action along a variation direction.

    Both sides consume the identical Wiener increments: the perturbation
    lives in the space of curves, not in the probability space.
    """
    dW = path.dW if wiener is None else wiener.increments
    if len(dW) != path.N:
        raise ConfigError(f"wiener path has {len(dW)} increments, trajectory N = {path.N}")
    plus = _action_arrays(
        path.times, path.h, path.q + eps * variation.dq, path.v + eps * variation.dv,
        path.p + eps * variation.dp, model, weight, dW,
    )
    minus = _action_arrays(
        path.times, path.h, path.q - eps * variation.dq, path.v - eps * variation.dv,
        path.p - eps * variation.dp, model, weight, dW,
    )
    return (plus - minus) / (2.0 * eps)


@dataclass(frozen=True, slots=True)
class CriticalityReport:
    """Max |dA| over random variations at each refinement level, with the
    ratios between consecutive levels.  Passing means every ratio >= 1.5."""

    step_sizes: tuple
    max_abs_dA: tuple
    ratios: tuple
    passed: bool
    n_variations: int

    def lines(self):
        out = []
        for h, m in zip(self.step_sizes, self.max_abs_dA):
            out.append(f"h = {h:.6g}: max|dA| = {m:.6e}")
        for i, r in enumerate(self.ratios):
            out.append(f"ratio level {i}->{i + 1}: {r:.3f}")
        out.append("criticality: " + ("PASS" if self.passed else "FAIL"))
        return out


def _flip_drift(model: SystemModel) -> SystemModel:
    """Negative control: integrate with the configuration drift negated
    while the momentum map (and hence the action) stays untouched."""
    orig = model.dL_dq
    return replace(model, dL_dq=lambda s, q, v: -orig(s, q, v))


def criticality_report(
    config: SimConfig,
    n_variations: int = 20,
    variation_seed: int = 0,
    levels: int = 3,
    negative_control: bool = False,
) -> CriticalityReport:
    """Integrate at steps h, h/2, ... h/2^(levels-1) against one Brownian
    motion (coarser increments are sums of the finest) and report how the
    largest action differential over random variations shrinks.

    An O(h) trend — every ratio >= 1.5 — is the pass condition; a flipped
    drift (``negative_control``) should hold the differential at O(1).
    """
    config.validate()
    if levels < 2:
        raise ConfigError(f"levels: need at least 2, got {levels}")
    finest_factor = 2 ** (levels - 1)
    fine_path = WienerPath.generate(
        config.seed, config.h / finest_factor, config.N * finest_factor, config.stream
    )
    run_model = _flip_drift(config.system) if negative_control else config.system

    # One coefficient draw per variation, reused across levels so every level
    # samples the same smooth perturbation functions on its own grid.
    seeds = np.random.SeedSequence(variation_seed).spawn(n_variations)

    step_sizes = []
    maxima = []
    for lev in range(levels):
        factor = 2 ** (levels - 1 - lev)
        path = fine_path.coarsen(factor) if factor > 1 else fine_path
        cfg = replace(config, system=run_model, h=path.h, N=path.N)
        traj = euler_maruyama(cfg, path)
        weight = config.weight if config.is_fractional() else None
        worst = 0.0
        for ss in seeds:
            rng = np.random.default_rng(ss)
            var = random_variation(traj.times, config.system.n, rng)
            da = action_differential(traj, var, config.system, weight)
            worst = max(worst, abs(da))
        step_sizes.append(path.h)
        maxima.append(worst)

    ratios = tuple(
        maxima[i] / maxima[i + 1] if maxima[i + 1] > 0.0 else math.inf
        for i in range(levels - 1)
    )
    return CriticalityReport(
        step_sizes=tuple(step_sizes),
        max_abs_dA=tuple(maxima),
        ratios=ratios,
        passed=all(r >= 1.5 for r in ratios),
        n_variations=n_variations,
    )
