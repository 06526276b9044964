"""Brownian increment streams, Ito integrals of deterministic kernels and
the Gaussian moment identities that serve as analytic oracles.

Every stream is keyed by ``(master_seed, trajectory_index, channel_index)``.
The key is hashed by :class:`numpy.random.SeedSequence` into an independent
Philox generator, so a stream's numbers never depend on how many other
streams exist or on the order in which they are drawn.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .core import InvariantError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0, dt, ..., t_end`` with ``n_steps`` intervals."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


class NoiseKernel:
    """Deterministic real noise amplitude ``v(t)``.

    Use the constructors :meth:`constant`, :meth:`power_law`,
    :meth:`exponential` and :meth:`tabulated`. The instantaneous dephasing
    rate is ``v(t)**2`` and :meth:`lam` is its running integral.
    """

    def __init__(self, form: str, **params):
        self.form = form
        self.params = params

    @classmethod
    def constant(cls, c: float) -> "NoiseKernel":
        return cls("constant", c=float(c))

    @classmethod
    def power_law(cls, c: float, p: float) -> "NoiseKernel":
        if 2 * p + 1 <= 0:
            raise ValueError("power-law exponent must satisfy 2p + 1 > 0")
        return cls("power", c=float(c), p=float(p))

    @classmethod
    def exponential(cls, c: float, r: float) -> "NoiseKernel":
        return cls("exponential", c=float(c), r=float(r))

    @classmethod
    def tabulated(cls, t, v) -> "NoiseKernel":
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
            raise ValueError("tabulated kernel needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("tabulated kernel values must be finite")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (v[1:] ** 2 + v[:-1] ** 2))])
        return cls("tabulated", t=t, v=v, cum=cum)

    @property
    def is_constant(self) -> bool:
        return self.form == "constant"

    @property
    def is_zero(self) -> bool:
        if self.form == "tabulated":
            return bool(np.all(self.params["v"] == 0))
        return self.params["c"] == 0

    def _check_window(self, t):
        if self.form == "tabulated":
            ts = self.params["t"]
            t = np.asarray(t)
            if np.any(t < ts[0]) or np.any(t > ts[-1]):
                raise ValueError(f"time outside tabulated window [{ts[0]}, {ts[-1]}]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        self._check_window(t)
        p = self.params
        if self.form == "constant":
            return np.full_like(t, p["c"])
        if self.form == "power":
            return p["c"] * t ** p["p"]
        if self.form == "exponential":
            return p["c"] * np.exp(-p["r"] * t)
        return np.interp(t, p["t"], p["v"])

    def rate(self, t):
        return self(t) ** 2

    def lam(self, t):
        """``int_0^t v(s)**2 ds``; trapezoidal on the knots for tabulated kernels."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("lambda(t) needs t >= 0")
        self._check_window(t)
        p = self.params
        if self.form == "constant":
            return p["c"] ** 2 * t
        if self.form == "power":
            q = 2 * p["p"] + 1
            return p["c"] ** 2 * t**q / q
        if self.form == "exponential":
            r = p["r"]
            if r == 0:
                return p["c"] ** 2 * t
            return p["c"] ** 2 * (1 - np.exp(-2 * r * t)) / (2 * r)
        ts, vs, cum = p["t"], p["v"], p["cum"]
        if ts[0] != 0:
            raise ValueError("tabulated kernel must start at t = 0 to integrate from 0")
        k = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
        vt = np.interp(t, ts, vs)
        return cum[k] + 0.5 * (t - ts[k]) * (vs[k] ** 2 + vt**2)

    def to_dict(self) -> dict:
        out = {"form": self.form}
        for k, val in self.params.items():
            if k == "cum":
                continue
            out[k] = val.tolist() if isinstance(val, np.ndarray) else val
        return out

    def __repr__(self):
        return f"NoiseKernel({self.to_dict()})"


ZERO_KERNEL = NoiseKernel.constant(0.0)


def stream_generator(master_seed: int, trajectory_index: int, channel_index: int) -> np.random.Generator:
    """Independent Philox generator for one (trajectory, channel) key."""
    if master_seed < 0 or trajectory_index < 0 or channel_index < 0:
        raise ValueError("seed and stream indices must be non-negative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trajectory_index), int(channel_index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class BrownianIncrementStream:
    master_seed: int
    trajectory_index: int
    channel_index: int
    grid: TimeGrid

    def increments(self) -> np.ndarray:
        return sample_increments(self)


def sample_increments(stream: BrownianIncrementStream) -> np.ndarray:
    """``n_steps`` i.i.d. ``N(0, dt)`` increments, reproducible per stream key."""
    g = stream_generator(stream.master_seed, stream.trajectory_index, stream.channel_index)
    return g.standard_normal(stream.grid.n_steps) * np.sqrt(stream.grid.dt)


def increment_block(master_seed: int, trajectories, channels, grid: TimeGrid) -> np.ndarray:
    """Increments for many streams at once, shape ``(n_traj, n_channels, n_steps)``.

    ``channels`` is a channel count or an explicit list of channel indices;
    skipped channels are never drawn and do not shift the others.
    """
    trajectories = list(trajectories)
    channels = range(channels) if np.isscalar(channels) else list(channels)
    out = np.empty((len(trajectories), len(channels), grid.n_steps))
    for b, k in enumerate(trajectories):
        for j, c in enumerate(channels):
            out[b, j] = stream_generator(master_seed, k, c).standard_normal(grid.n_steps)
    out *= np.sqrt(grid.dt)
    return out


def ito_sum(values: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """Left-point partial sums ``X_k = sum_{j<k} v_j dB_j`` along the last axis, with ``X_0 = 0``."""
    terms = values * increments
    out = np.zeros(terms.shape[:-1] + (terms.shape[-1] + 1,))
    np.cumsum(terms, axis=-1, out=out[..., 1:])
    return out


def ito_integral_path(v: NoiseKernel, stream: BrownianIncrementStream) -> np.ndarray:
    """Discrete Ito integral of ``v`` against the stream on its grid."""
    grid = stream.grid
    vals = v(grid.times[:-1])
    return ito_sum(vals, sample_increments(stream))


def lambda_of_t(v: NoiseKernel, t: float) -> float:
    return float(v.lam(t))


def theoretical_moment(v: NoiseKernel, n: int, t: float) -> float:
    """``E[X_t**n]`` for ``X_t = int_0^t v dB``: ``(2k)!/(2^k k!) lam^k`` for ``n = 2k``, zero for odd ``n``."""
    if n < 0:
        raise ValueError("moment order must be non-negative")
    if n % 2:
        return 0.0
    k = n // 2
    return factorial(2 * k) / (2**k * factorial(k)) * lambda_of_t(v, t) ** k


def expected_cos(b: float, lam: float) -> float:
    """``E[cos(b + X)]`` for centred Gaussian ``X`` of variance ``lam``."""
    if lam < 0:
        raise ValueError("variance must be non-negative")
    return float(np.exp(-lam / 2) * np.cos(b))


def expected_cos_squared(b: float, lam: float) -> float:
    if lam < 0:
        raise ValueError("variance must be non-negative")
    return float(0.5 * (1 + np.exp(-2 * lam) * np.cos(2 * b)))


class CorrelationSpec:
    """Correlation matrix ``g`` of a family of standard Brownian motions.

    ``factor`` is a real ``(n, r)`` matrix with ``factor @ factor.T == g``
    and ``r = rank(g)``; it is a Cholesky factor when ``g`` is definite and
    an eigenvalue square root otherwise (fully correlated blocks are
    singular, which plain Cholesky rejects).
    """

    def __init__(self, g, psd_floor: float = -1e-10):
        g = np.asarray(g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(g, g.T, atol=1e-14):
            raise InvariantError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(g), 1.0, atol=1e-14):
            raise InvariantError("correlation matrix must have unit diagonal")
        if np.any(np.abs(g) > 1 + 1e-14):
            raise InvariantError("correlations must lie in [-1, 1]")
        w, vecs = np.linalg.eigh(g)
        if w[0] < psd_floor:
            raise InvariantError(f"correlation matrix is not PSD (min eigenvalue {w[0]:.3e})")
        self.g = g
        try:
            self.factor = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            keep = w > max(1e-12, 1e-12 * w[-1])
            self.factor = vecs[:, keep] * np.sqrt(w[keep])

    @classmethod
    def identity(cls, n: int) -> "CorrelationSpec":
        return cls(np.eye(n))

    @property
    def size(self) -> int:
        return self.g.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]
