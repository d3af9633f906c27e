"""Mechanical system definitions: Lagrangian bundles, noise potentials,
metric models, the momentum (Legendre) map and its inverse, Christoffel
symbols, and the built-in example systems."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import HyperregularityError, SingularMetricError

__all__ = [
    "State",
    "SystemModel",
    "MetricModel",
    "legendre_p",
    "invert_legendre",
    "hamiltonian",
    "christoffel",
    "builtin_samuelson",
    "builtin_natural",
    "builtin_pendulum",
    "builtin_discounted",
    "builtin_metric",
    "finite_diff_partials",
]

Array = np.ndarray


@dataclass(frozen=True, slots=True)
class State:
    """A point (s, q, v, p) along a curve; q, v, p are (n,) arrays."""

    s: float
    q: Array
    v: Array
    p: Array


@dataclass(frozen=True, slots=True)
class SystemModel:
    """A mechanical system: Lagrangian L(s, q, v), its partials, and the
    noise potential.

    Callables take/return numpy arrays of shape (n,); L and gamma return
    scalars.  ``v_of_p`` is the analytic inverse of the momentum map when
    available; otherwise ``hess_L_vv`` enables Newton inversion.  Models are
    immutable and their callables are pure, so evaluation is thread-safe.
    """

    name: str
    n: int
    L: Callable[[float, Array, Array], float]
    dL_dq: Callable[[float, Array, Array], Array]
    dL_dv: Callable[[float, Array, Array], Array]
    gamma: Callable[[Array], float]
    dgamma_dq: Callable[[Array], Array]
    hess_L_vv: Optional[Callable[[float, Array, Array], Array]] = None
    v_of_p: Optional[Callable[[float, Array, Array], Array]] = None
    numeric_partials: bool = False


@dataclass(frozen=True, slots=True)
class MetricModel:
    """A metric g(q) with its configuration partials and a noise potential.

    ``dg_dq(q)`` has shape (n, n, n) with axis 0 the derivative index:
    dg_dq[i, k, l] = d g_kl / d q^i.
    """

    name: str
    n: int
    g: Callable[[Array], Array]
    dg_dq: Callable[[Array], Array]
    gamma: Callable[[Array], float]
    dgamma_dq: Callable[[Array], Array]


def legendre_p(model: SystemModel, s: float, q: Array, v: Array) -> Array:
    """Momentum p = dL/dv at (s, q, v)."""
    return model.dL_dv(s, q, v)


def invert_legendre(model: SystemModel, s: float, q: Array, p: Array) -> Array:
    """Velocity with momentum p: analytic inverse when the model has one,
    otherwise damped Newton on v -> dL/dv - p seeded at v = p."""
    if model.v_of_p is not None:
        return model.v_of_p(s, q, p)
    if model.hess_L_vv is None:
        raise HyperregularityError(
            f"model {model.name!r} has neither v_of_p nor hess_L_vv"
        )
    # Finite-difference partials carry ~1e-10 noise, so the residual target
    # must sit above that floor for numeric models.
    tol = 1e-9 if model.numeric_partials else 1e-12
    v = np.array(p, dtype=float)
    res = model.dL_dv(s, q, v) - p
    norm = float(np.max(np.abs(res)))
    for _ in range(50):
        if norm <= tol:
            return v
        hess = np.atleast_2d(model.hess_L_vv(s, q, v))
        try:
            step = np.linalg.solve(hess, res)
        except np.linalg.LinAlgError as exc:
            raise HyperregularityError(
                f"singular velocity Hessian for model {model.name!r}"
            ) from exc
        # Damped update: halve until the residual does not grow.
        scale = 1.0
        for _ in range(30):
            cand = v - scale * step
            cres = model.dL_dv(s, q, cand) - p
            cnorm = float(np.max(np.abs(cres)))
            if cnorm < norm or not np.isfinite(cnorm):
                break
            scale *= 0.5
        v, res, norm = cand, cres, cnorm
        if not np.isfinite(norm):
            break
    if norm <= tol:
        return v
    raise HyperregularityError(
        f"Newton inversion of the momentum map failed for model {model.name!r} "
        f"(residual {norm})"
    )


def hamiltonian(model: SystemModel, s: float, q: Array, p: Array) -> float:
    """H = <p, v*> - L(s, q, v*) with v* the inverse momentum map."""
    v = invert_legendre(model, s, q, p)
    return float(np.dot(p, v)) - float(model.L(s, q, v))


def christoffel(metric: MetricModel, q: Array) -> Array:
    """Connection coefficients of the metric at q, shape (n, n, n) indexed
    [i, j, k] for the upper index i.  Symmetric in (j, k) by construction."""
    q = np.asarray(q, dtype=float)
    g = np.asarray(metric.g(q), dtype=float)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError(f"metric {metric.name!r} singular at q = {q}") from exc
    dg = np.asarray(metric.dg_dq(q), dtype=float)
    # A[l, j, k] = d_j g_lk + d_k g_jl - d_l g_jk
    a = dg.transpose(1, 0, 2) + dg.transpose(2, 1, 0) - dg
    gam = 0.5 * np.einsum("il,ljk->ijk", ginv, a)
    return 0.5 * (gam + gam.transpose(0, 2, 1))


def _half_square(q: Array) -> float:
    return 0.5 * float(np.dot(q, q))


def _identity_grad(q: Array) -> Array:
    return np.asarray(q, dtype=float)


def builtin_samuelson(
    rho: float,
    a: float,
    gamma: Optional[Callable[[Array], float]] = None,
    dgamma_dq: Optional[Callable[[Array], Array]] = None,
) -> SystemModel:
    """One-dimensional model L = -1/2 e^{-rho s} (v^2 + 2 a v q + q^2).

    Requires rho in [0, 1) and a in (-1, 1).  The default noise potential is
    gamma(q) = q^2/2, i.e. noise coefficient q; both are overridable.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    if not -1.0 < a < 1.0:
        raise ValueError(f"a must be in (-1, 1), got {a}")
    rho = float(rho)
    a = float(a)

    def L(s, q, v):
        return float(-0.5 * np.exp(-rho * s) * (v[0] ** 2 + 2 * a * v[0] * q[0] + q[0] ** 2))

    def dL_dq(s, q, v):
        return -np.exp(-rho * s) * (a * v + q)

    def dL_dv(s, q, v):
        return -np.exp(-rho * s) * (v + a * q)

    def hess(s, q, v):
        return np.array([[-np.exp(-rho * s)]])

    def v_of_p(s, q, p):
        return -np.exp(rho * s) * p - a * q

    return SystemModel(
        name="samuelson",
        n=1,
        L=L,
        dL_dq=dL_dq,
        dL_dv=dL_dv,
        gamma=gamma if gamma is not None else _half_square,
        dgamma_dq=dgamma_dq if dgamma_dq is not None else _identity_grad,
        hess_L_vv=hess,
        v_of_p=v_of_p,
    )


def builtin_natural(
    V: Callable[[Array], float],
    dV: Callable[[Array], Array],
    gam: Callable[[Array], float],
    dgam: Callable[[Array], Array],
    n: int = 1,
    name: str = "natural",
) -> SystemModel:
    """Kinetic-minus-potential model L = 1/2 |v|^2 - V(q), so p = v."""

    def L(s, q, v):
        return 0.5 * float(np.dot(v, v)) - float(V(q))

    def dL_dq(s, q, v):
        return -np.asarray(dV(q), dtype=float)

    def dL_dv(s, q, v):
        return np.asarray(v, dtype=float)

    def hess(s, q, v):
        return np.eye(n)

    def v_of_p(s, q, p):
        return np.asarray(p, dtype=float)

    return SystemModel(
        name=name, n=n, L=L, dL_dq=dL_dq, dL_dv=dL_dv,
        gamma=gam, dgamma_dq=dgam, hess_L_vv=hess, v_of_p=v_of_p,
    )


def builtin_pendulum() -> SystemModel:
    """The 1-D pendulum-type system V(q) = cos(q) with noise potential sin(q)."""
    return builtin_natural(
        V=lambda q: float(np.cos(q[0])),
        dV=lambda q: -np.sin(q),
        gam=lambda q: float(np.sin(q[0])),
        dgam=lambda q: np.cos(q),
        n=1,
        name="pendulum",
    )


def builtin_discounted(L0: SystemModel, rho: float) -> SystemModel:
    """Wrap a time-independent bundle with the discount factor e^{-rho s}.

    L, dL_dq and dL_dv of ``L0`` are each multiplied by e^{-rho s}; its
    callables must ignore their s argument.
    """
    rho = float(rho)

    def L(s, q, v):
        return float(np.exp(-rho * s)) * L0.L(s, q, v)

    def dL_dq(s, q, v):
        return np.exp(-rho * s) * L0.dL_dq(s, q, v)

    def dL_dv(s, q, v):
        return np.exp(-rho * s) * L0.dL_dv(s, q, v)

    def hess(s, q, v):
        return np.exp(-rho * s) * np.atleast_2d(L0.hess_L_vv(s, q, v))

    v_of_p = None
    if L0.v_of_p is not None:

        def v_of_p(s, q, p):
            return L0.v_of_p(s, q, np.exp(rho * s) * p)

    return SystemModel(
        name=f"discounted-{L0.name}",
        n=L0.n,
        L=L,
        dL_dq=dL_dq,
        dL_dv=dL_dv,
        gamma=L0.gamma,
        dgamma_dq=L0.dgamma_dq,
        hess_L_vv=hess if L0.hess_L_vv is not None else None,
        v_of_p=v_of_p,
    )


def builtin_metric(metric: MetricModel) -> SystemModel:
    """Quadratic kinetic model L = 1/2 v^T g(q) v, so p = g(q) v."""

    def L(s, q, v):
        return 0.5 * float(v @ metric.g(q) @ v)

    def dL_dq(s, q, v):
        dg = np.asarray(metric.dg_dq(q), dtype=float)
        return 0.5 * np.einsum("ikl,k,l->i", dg, v, v)

    def dL_dv(s, q, v):
        return metric.g(q) @ v

    def hess(s, q, v):
        return np.asarray(metric.g(q), dtype=float)

    def v_of_p(s, q, p):
        try:
            return np.linalg.solve(metric.g(q), p)
        except np.linalg.LinAlgError as exc:
            raise SingularMetricError(
                f"metric {metric.name!r} singular at q = {q}"
            ) from exc

    return SystemModel(
        name=f"metric-{metric.name}",
        n=metric.n,
        L=L,
        dL_dq=dL_dq,
        dL_dv=dL_dv,
        gamma=metric.gamma,
        dgamma_dq=metric.dgamma_dq,
        hess_L_vv=hess,
        v_of_p=v_of_p,
    )


def finite_diff_partials(
    n: int,
    L: Callable[[float, Array, Array], float],
    gamma: Callable[[Array], float],
    name: str = "numeric",
    step: float = 1e-6,
) -> SystemModel:
    """Build a SystemModel from L and gamma alone, with centered-difference
    partials (step 1e-6 * max(1, |x_i|) per component).  The Hessian uses a
    wider step to keep the second difference out of roundoff.  The model is
    flagged ``numeric_partials`` and has no analytic inverse momentum map.
    """

    def _grad(fun, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(n)
        for i in range(n):
            h = step * max(1.0, abs(x[i]))
            xp = x.copy(); xp[i] += h
            xm = x.copy(); xm[i] -= h
            out[i] = (fun(xp) - fun(xm)) / (2.0 * h)
        return out

    def dL_dq(s, q, v):
        return _grad(lambda x: L(s, x, v), q)

    def dL_dv(s, q, v):
        return _grad(lambda x: L(s, q, x), v)

    def dgamma_dq(q):
        return _grad(gamma, q)

    def hess_L_vv(s, q, v):
        v = np.asarray(v, dtype=float)
        out = np.empty((n, n))
        for i in range(n):
            h = 1e-4 * max(1.0, abs(v[i]))
            vp = v.copy(); vp[i] += h
            vm = v.copy(); vm[i] -= h
            out[i] = (_grad(lambda x: L(s, q, x), vp) - _grad(lambda x: L(s, q, x), vm)) / (2.0 * h)
        return 0.5 * (out + out.T)

    return SystemModel(
        name=name, n=n, L=L, dL_dq=dL_dq, dL_dv=dL_dv,
        gamma=gamma, dgamma_dq=dgamma_dq, hess_L_vv=hess_L_vv,
        v_of_p=None, numeric_partials=True,
    )
