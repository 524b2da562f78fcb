"""Seeded scalar stochastic processes.

Every random draw comes from a Philox generator whose key is hashed from
``(master_seed, *stream_key)``, so any stream can be regenerated on its own,
in any order, without touching the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _backend

__all__ = [
    "Diffusion",
    "Drift",
    "IntegrationError",
    "PathMatrix",
    "ProcessSpec",
    "SeedSpec",
    "TimeGrid",
    "brownian_increments",
    "euler_maruyama",
    "fbm_paths",
    "fgn_autocovariance",
    "fgn_samples",
    "ou_moments",
]

_U64 = 2**64


class IntegrationError(FloatingPointError):
    """Raised when a path leaves the finite reals."""

    def __init__(self, step: int, time: float | None = None):
        self.step = step
        self.time = time
        where = f"step {step}" if time is None else f"step {step} (t={time:g})"
        super().__init__(f"non-finite state encountered at {where}")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    steps: int
    t0: float = 0.0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if not (math.isfinite(self.T) and math.isfinite(self.t0)):
            raise ValueError("time bounds must be finite")
        if not self.T > self.t0:
            raise ValueError(f"end time {self.T} must exceed start time {self.t0}")
        if not self.dt > 0:
            raise ValueError("time step is zero")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        t = self.t0 + self.dt * np.arange(self.steps + 1)
        t[-1] = self.T
        return t

    def to_json(self) -> dict:
        return {"t0": self.t0, "T": self.T, "steps": self.steps}


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus the stream-derivation rule.

    ``generator(*key)`` returns a fresh counter-based generator for the
    stream named by ``key`` (non-negative integers).
    """

    master_seed: int

    def __post_init__(self):
        seed = int(self.master_seed)
        if seed != self.master_seed or not 0 <= seed < _U64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.master_seed!r}")
        object.__setattr__(self, "master_seed", seed)

    def generator(self, *key: int) -> np.random.Generator:
        if any(k < 0 for k in key):
            raise ValueError(f"stream key entries must be non-negative: {key}")
        ss = np.random.SeedSequence(self.master_seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.Philox(ss))


def _as_seed(seed) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(seed)


_DRIFT_PARAMS = {"zero": (), "constant": ("c",), "linear": ("a",), "ou": ("rate", "mean")}
_DIFFUSION_PARAMS = {"constant": ("sigma",), "linear": ("s",)}


def _parse_term(doc, table, what):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError(f"{what} must be an object with a 'kind' entry")
    kind = doc["kind"]
    if kind not in table:
        raise ValueError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    extra = set(doc) - {"kind", *table[kind]}
    if extra:
        raise ValueError(f"unexpected {what} parameter(s) {sorted(extra)} for kind {kind!r}")
    try:
        params = {name: float(doc[name]) for name in table[kind]}
    except KeyError as exc:
        raise ValueError(f"{what} kind {kind!r} requires parameter {exc.args[0]!r}") from None
    return kind, params


@dataclass(frozen=True)
class Drift:
    """zero | constant(c) | linear(a): a x | ou(rate, mean): rate (mean - x)."""

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind, params = _parse_term({"kind": self.kind, **self.params}, _DRIFT_PARAMS, "drift")
        if kind == "ou" and not params["rate"] > 0:
            raise ValueError(f"OU rate must be positive, got {params['rate']}")
        object.__setattr__(self, "params", params)

    def affine(self) -> tuple[float, float]:
        """(b0, b1) with drift b(x) = b0 + b1 x."""
        p = self.params
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind == "constant":
            return p["c"], 0.0
        if self.kind == "linear":
            return 0.0, p["a"]
        return p["rate"] * p["mean"], -p["rate"]

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class Diffusion:
    """constant(sigma >= 0) | linear(s): s x."""

    kind: str = "constant"
    params: dict = field(default_factory=lambda: {"sigma": 1.0})

    def __post_init__(self):
        kind, params = _parse_term({"kind": self.kind, **self.params}, _DIFFUSION_PARAMS, "diffusion")
        if kind == "constant" and params["sigma"] < 0:
            raise ValueError(f"sigma must be non-negative, got {params['sigma']}")
        object.__setattr__(self, "params", params)

    def affine(self) -> tuple[float, float]:
        if self.kind == "constant":
            return self.params["sigma"], 0.0
        return 0.0, self.params["s"]

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class ProcessSpec:
    drift: Drift = field(default_factory=Drift)
    diffusion: Diffusion = field(default_factory=Diffusion)
    hurst: float | None = None

    def __post_init__(self):
        if self.hurst is not None and not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.hurst}")

    @classmethod
    def brownian(cls, sigma: float = 1.0) -> ProcessSpec:
        return cls(Drift("zero"), Diffusion("constant", {"sigma": sigma}))

    @classmethod
    def ou(cls, rate: float, mean: float = 0.0, sigma: float = 1.0) -> ProcessSpec:
        return cls(Drift("ou", {"rate": rate, "mean": mean}), Diffusion("constant", {"sigma": sigma}))

    def to_json(self) -> dict:
        return {"drift": self.drift.to_json(), "diffusion": self.diffusion.to_json(), "hurst": self.hurst}

    @classmethod
    def from_json(cls, doc: dict) -> ProcessSpec:
        if not isinstance(doc, dict):
            raise ValueError("process spec must be an object")
        drift = doc.get("drift", {"kind": "zero"})
        diffusion = doc.get("diffusion", {"kind": "constant", "sigma": 1.0})
        for name, term in (("drift", drift), ("diffusion", diffusion)):
            if not isinstance(term, dict) or "kind" not in term:
                raise ValueError(f"{name} must be an object with a 'kind' entry")
        return cls(
            Drift(drift["kind"], {k: v for k, v in drift.items() if k != "kind"}),
            Diffusion(diffusion["kind"], {k: v for k, v in diffusion.items() if k != "kind"}),
            doc.get("hurst"),
        )


@dataclass(frozen=True)
class PathMatrix:
    grid: TimeGrid
    values: np.ndarray  # (n_paths, steps + 1)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def brownian_increments(grid: TimeGrid, n_streams: int, seed, key: tuple = ()) -> np.ndarray:
    """Gaussian increments with variance ``dt``, shape (n_streams, steps).

    Row ``p`` is the same for any ``n_streams > p``.
    """
    if n_streams < 1:
        raise ValueError(f"n_streams must be at least 1, got {n_streams}")
    rng = _as_seed(seed).generator(*key)
    return rng.standard_normal((int(n_streams), grid.steps)) * math.sqrt(grid.dt)


def euler_maruyama(
    spec: ProcessSpec,
    x0,
    grid: TimeGrid,
    seed=None,
    key: tuple = (),
    increments: np.ndarray | None = None,
) -> PathMatrix:
    """Integrate ``dX = b(X) dt + sigma(X) dW`` on ``grid``.

    ``x0`` gives one initial value per path. Increments are drawn from
    ``seed``/``key`` unless passed in directly.
    """
    if spec.hurst is not None:
        raise ValueError("Euler-Maruyama drives Brownian noise; use fbm_paths for fractional noise")
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64)).ravel()
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial values must be finite")
    if increments is None:
        if seed is None:
            raise ValueError("either seed or increments must be given")
        increments = brownian_increments(grid, x0.size, seed, key)
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    if increments.shape != (x0.size, grid.steps):
        raise ValueError(f"increments shape {increments.shape} != {(x0.size, grid.steps)}")
    b0, b1 = spec.drift.affine()
    s0, s1 = spec.diffusion.affine()
    paths, bad = _backend.em_affine(x0, increments, grid.dt, b0, b1, s0, s1)
    if bad >= 0:
        raise IntegrationError(bad, float(grid.times[bad]))
    return PathMatrix(grid, paths)


def ou_moments(theta: float, mu: float, sigma: float, x0: float, t) -> tuple:
    """Mean and variance of the Ornstein-Uhlenbeck process at time ``t``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    t = np.asarray(t, dtype=np.float64)
    decay = np.exp(-theta * t)
    mean = mu + (x0 - mu) * decay
    var = sigma**2 * -np.expm1(-2.0 * theta * t) / (2.0 * theta)
    if t.ndim == 0:
        return float(mean), float(var)
    return mean, var


def fgn_autocovariance(h: float, n: int) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags 0..n-1."""
    k = np.arange(n, dtype=np.float64)
    two_h = 2.0 * h
    return 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k**two_h + np.abs(k - 1) ** two_h)


def _check_hurst(h):
    if not 0.0 < h < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {h}")


def fgn_samples(h: float, n: int, n_streams: int, rng: np.random.Generator, method: str = "auto"):
    """Unit-step fractional Gaussian noise, shape (n_streams, n).

    ``method`` is ``"circulant"`` (Davies-Harte / Wood-Chan embedding),
    ``"cholesky"`` (dense factorisation of the Toeplitz covariance) or
    ``"auto"``: circulant unless the embedding has a negative eigenvalue.
    """
    _check_hurst(h)
    if method not in ("auto", "circulant", "cholesky"):
        raise ValueError(f"unknown fGn method {method!r}")
    gamma = fgn_autocovariance(h, n + 1)
    if method != "cholesky":
        if n == 1:
            row = gamma[:1]
        else:
            row = np.concatenate([gamma[:n], gamma[n:0:-1]])
        eig = np.fft.fft(row).real
        size = row.size
        if eig.min() >= -1e-10 * eig.max():
            z = rng.standard_normal((n_streams, 2, size))
            noise = z[:, 0, :] + 1j * z[:, 1, :]
            y = np.fft.fft(np.sqrt(np.clip(eig, 0.0, None) / size) * noise, axis=1)
            return np.ascontiguousarray(y.real[:, :n])
        if method == "circulant":
            raise ValueError(f"circulant embedding is not non-negative for h={h}, n={n}")
    cov = linalg.toeplitz(gamma[:n])
    chol = linalg.cholesky(cov, lower=True)
    z = rng.standard_normal((n_streams, n))
    return z @ chol.T


def fbm_paths(h: float, grid: TimeGrid, n_streams: int, seed, key: tuple = (), method: str = "auto") -> PathMatrix:
    """Fractional Brownian motion started at zero on ``grid``.

    Covariance ``0.5 (s^{2h} + t^{2h} - |t - s|^{2h})`` with times measured
    from ``grid.t0``.
    """
    _check_hurst(h)
    if n_streams < 1:
        raise ValueError(f"n_streams must be at least 1, got {n_streams}")
    rng = _as_seed(seed).generator(*key)
    fgn = fgn_samples(h, grid.steps, int(n_streams), rng, method) * grid.dt**h
    values = np.zeros((int(n_streams), grid.steps + 1))
    np.cumsum(fgn, axis=1, out=values[:, 1:])
    return PathMatrix(grid, values)
