"""Wiener path generation and explicit stochastic Euler stepping for the
four drift forms (position-momentum and velocity variants, with or without
the power-law drift correction), plus the pathwise error helper used by
convergence studies."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, GridMismatchError, NumericAbortError
from .frackernel import FracWeight
from .systems import MetricModel, State, SystemModel, christoffel, invert_legendre, legendre_p

__all__ = [
    "FORMULATIONS",
    "WienerPath",
    "wiener_path",
    "SimConfig",
    "Trajectory",
    "hp_drift_classical",
    "hp_drift_fractional",
    "ham_drift",
    "metric_velocity_drift",
    "euler_maruyama",
    "strong_error",
]

FORMULATIONS = ("hp-classical", "ham-classical", "hp-fractional", "ham-fractional")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit word (pure-int, wrap-around)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _stream_base(seed: int, stream: int) -> int:
    """Per-(seed, stream) base state; draws are the SplitMix64 outputs
    base + k * golden-ratio-increment, finalized."""
    base = _mix64((int(seed) + _GOLDEN) & _MASK64)
    return _mix64(base ^ ((int(stream) + _GOLDEN) & _MASK64))


def _uniform_words(seed: int, stream: int, count: int) -> np.ndarray:
    base = np.uint64(_stream_base(seed, stream))
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = base + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _gaussians(seed: int, stream: int, count: int) -> np.ndarray:
    """Standard normals via Box-Muller over the counter-based uniforms.

    Draw k consumes the words at counters 2k and 2k+1, so the stream is a
    pure function of (seed, stream, k) and is bit-stable across platforms.
    """
    words = _uniform_words(seed, stream, 2 * count)
    u = (words >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1 = 1.0 - u[0::2]  # in (0, 1]: safe under the log
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True, slots=True)
class WienerPath:
    """Scalar Wiener increments on a uniform grid.

    ``increments[k]`` is w((k+1)h) - w(kh) ~ Normal(0, h).  Regeneration with
    equal (seed, stream, h, N) is bit-identical.
    """

    seed: int
    stream: int
    h: float
    N: int
    increments: np.ndarray

    @classmethod
    def generate(cls, seed: int, h: float, N: int, stream: int = 0) -> "WienerPath":
        if h <= 0.0:
            raise ConfigError(f"h must be > 0, got {h}")
        if N < 1:
            raise ConfigError(f"N must be >= 1, got {N}")
        dw = np.sqrt(h) * _gaussians(seed, stream, N)
        dw.flags.writeable = False
        return cls(seed=int(seed), stream=int(stream), h=float(h), N=int(N), increments=dw)

    def coarsen(self, factor: int) -> "WienerPath":
        """Sum consecutive groups of increments: the same Brownian motion
        sampled on a grid ``factor`` times coarser."""
        if factor < 1 or self.N % factor != 0:
            raise GridMismatchError(f"N = {self.N} not divisible by factor {factor}")
        dw = self.increments.reshape(self.N // factor, factor).sum(axis=1)
        dw.flags.writeable = False
        return WienerPath(self.seed, self.stream, self.h * factor, self.N // factor, dw)


def wiener_path(seed: int, h: float, N: int, stream: int = 0) -> WienerPath:
    """Generate a Wiener path from the deterministic counter-based stream."""
    return WienerPath.generate(seed, h, N, stream)


@dataclass(frozen=True, slots=True)
class SimConfig:
    """A single integration run: system, formulation, grid, seed, state.

    Exactly one of v0/p0 must be given.  Fractional formulations require a
    weight whose observer time lies strictly outside the simulation interval.
    """

    system: SystemModel
    formulation: str
    t0: float
    h: float
    N: int
    seed: int
    q0: np.ndarray
    v0: Optional[np.ndarray] = None
    p0: Optional[np.ndarray] = None
    weight: Optional[FracWeight] = None
    stream: int = 0

    def is_fractional(self) -> bool:
        return self.formulation.endswith("fractional")

    def validate(self) -> None:
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation: unknown {self.formulation!r}")
        if self.h <= 0.0:
            raise ConfigError(f"h: must be > 0, got {self.h}")
        if self.N < 1:
            raise ConfigError(f"N: must be >= 1, got {self.N}")
        n = self.system.n
        for label, vec in (("q0", self.q0), ("v0", self.v0), ("p0", self.p0)):
            if vec is not None and np.asarray(vec).shape != (n,):
                raise ConfigError(f"{label}: expected shape ({n},)")
        if (self.v0 is None) == (self.p0 is None):
            raise ConfigError("v0/p0: exactly one initial velocity or momentum required")
        if self.is_fractional():
            if self.weight is None:
                raise ConfigError("weight: required for fractional formulations")
            try:
                self.weight.validate_interval(self.t0, self.t0 + self.N * self.h)
            except ValueError as exc:
                raise ConfigError(f"weight.t_obs: {exc}") from exc


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Integrated path on the grid t0 + n h, with the driving increments and
    enough metadata to rerun the configuration."""

    times: np.ndarray
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray
    dW: np.ndarray
    formulation: str
    system_name: str
    seed: int
    stream: int
    t0: float
    h: float
    N: int


def _hp_drift(model, s, q, v):
    return v, model.dL_dq(s, q, v), model.dgamma_dq(q)


def hp_drift_classical(model: SystemModel, state: State):
    """Drift of the position-momentum form: dq = v, dp = dL/dq, noise dgamma/dq."""
    return _hp_drift(model, state.s, state.q, state.v)


def hp_drift_fractional(model: SystemModel, weight: FracWeight, state: State):
    """Position-momentum drift with the correction -p h(s,t) on the momentum."""
    dq, dp, noise = _hp_drift(model, state.s, state.q, state.v)
    return dq, dp - state.p * weight.h(state.s), noise


def ham_drift(model: SystemModel, weight: Optional[FracWeight], state: State):
    """Hamiltonian-form drift (dH/dp, -dH/dq), with -p h(s,t) when a weight
    is given.

    The partials are taken through the exact identities of the momentum map,
    dH/dp = v*(s,q,p) and dH/dq = -dL/dq at v*, so the Hamiltonian form
    induces the same drift field as the position-momentum form.
    """
    v_star = invert_legendre(model, state.s, state.q, state.p)
    dq = v_star
    dp = model.dL_dq(state.s, state.q, v_star)
    if weight is not None:
        dp = dp - state.p * weight.h(state.s)
    return dq, dp, model.dgamma_dq(state.q)


def metric_velocity_drift(
    metric: MetricModel,
    weight: Optional[FracWeight],
    state: State,
    eq22_sign: str = "printed",
):
    """Velocity-form drift for metric kinetic systems.

    Classical: dv^i = -Gamma^i_jk v^j v^k.  With a weight, the correction
    enters with the published sign -(Gamma v v - h v); ``eq22_sign`` may be
    set to "momentum-consistent" for the -(Gamma v v) - h v grouping that
    mirrors the momentum form.  Noise coefficient on v is g^{-1} dgamma/dq.
    """
    if eq22_sign not in ("printed", "momentum-consistent"):
        raise ValueError(
            f"eq22_sign must be 'printed' or 'momentum-consistent', got {eq22_sign!r}"
        )
    q, v = state.q, state.v
    gam = christoffel(metric, q)
    quad = np.einsum("ijk,j,k->i", gam, v, v)
    dv = -quad
    if weight is not None:
        hw = weight.h(state.s)
        dv = dv + (hw * v if eq22_sign == "printed" else -hw * v)
    noise = np.linalg.solve(metric.g(q), metric.dgamma_dq(q))
    return v, dv, noise


def euler_maruyama(config: SimConfig, path: WienerPath) -> Trajectory:
    """Explicit left-endpoint stepping of the configured drift form.

    Position-momentum state (q, p) is advanced; the velocity is recovered
    through the inverse momentum map at each new grid point.  A ``v0``
    initial condition is honoured verbatim at the first step of the
    position-momentum ("hp-") forms.  Any non-finite component aborts with
    the offending step index.
    """
    config.validate()
    if path.N != config.N or path.h != config.h:
        raise ConfigError(
            f"path grid (h={path.h}, N={path.N}) does not match config "
            f"(h={config.h}, N={config.N})"
        )
    model = config.system
    n = model.n
    h = config.h
    N = config.N
    times = config.t0 + np.arange(N + 1) * h
    tlist = times.tolist()

    q = np.array(config.q0, dtype=float)
    if config.p0 is not None:
        p = np.array(config.p0, dtype=float)
        v = invert_legendre(model, tlist[0], q, p)
    else:
        v = np.array(config.v0, dtype=float)
        p = np.asarray(legendre_p(model, tlist[0], q, v), dtype=float)
        if config.formulation.startswith("ham"):
            # Hamiltonian form carries no independent velocity state.
            v = invert_legendre(model, tlist[0], q, p)

    weight = config.weight if config.is_fractional() else None
    hw = weight.h if weight is not None else None
    dL_dq = model.dL_dq
    dgamma = model.dgamma_dq
    dW = path.increments

    qs = np.empty((N + 1, n))
    vs = np.empty((N + 1, n))
    ps = np.empty((N + 1, n))

    with np.errstate(all="ignore"):
        for k in range(N):
            s = tlist[k]
            qs[k] = q
            vs[k] = v
            ps[k] = p
            dp = dL_dq(s, q, v)
            if hw is not None:
                dp = dp - p * hw(s)
            noise = dgamma(q)
            q = q + h * v
            p = p + h * dp + noise * dW[k]
            v = invert_legendre(model, tlist[k + 1], q, p)
        qs[N] = q
        vs[N] = v
        ps[N] = p

    finite = np.isfinite(qs).all(axis=1) & np.isfinite(vs).all(axis=1) & np.isfinite(ps).all(axis=1)
    if not finite.all():
        raise NumericAbortError(step=int(np.argmin(finite)))

    return Trajectory(
        times=times, q=qs, v=vs, p=ps, dW=dW,
        formulation=config.formulation, system_name=model.name,
        seed=config.seed, stream=config.stream,
        t0=config.t0, h=h, N=N,
    )


def strong_error(fine: Trajectory, coarse: Trajectory) -> float:
    """Max over shared grid points of the (q, p) distance between two runs
    of the same Brownian path at nested resolutions."""
    if fine.t0 != coarse.t0:
        raise GridMismatchError(f"t0 differs: {fine.t0} vs {coarse.t0}")
    ratio = coarse.h / fine.h
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise GridMismatchError(f"coarse step {coarse.h} is not an integer multiple of {fine.h}")
    if coarse.N * factor != fine.N:
        raise GridMismatchError(
            f"grids do not nest: fine N = {fine.N}, coarse N = {coarse.N}, factor {factor}"
        )
    idx = np.arange(coarse.N + 1) * factor
    dq = coarse.q - fine.q[idx]
    dp = coarse.p - fine.p[idx]
    return float(np.sqrt((dq**2).sum(axis=1) + (dp**2).sum(axis=1)).max())
