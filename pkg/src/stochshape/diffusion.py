"""Spectral shape processes.

A shape is three coefficient tables, one per ambient coordinate. Every
coefficient ``(channel, l, m)`` gets its own driving process, drawn from the
stream keyed ``(channel, l, l + m)``, and is scaled by a per-degree weight of
the covariance spectrum. The source shape is kept apart from the noise so
the first frame reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .harmonics import (
    HarmonicCoefficients,
    build_grid,
    coefficients_from_json,
    coefficients_to_json,
    degree_of_index,
    forward_sht,
    n_coeffs,
    real_sh_matrix,
)
from .sde import ProcessSpec, SeedSpec, TimeGrid, brownian_increments, euler_maruyama, fbm_paths
from .spectra import CovarianceSpectrum

__all__ = [
    "MODELS",
    "ShapeCoefficients",
    "ShapeTrajectory",
    "decompose_ellipsoid",
    "decompose_function",
    "decompose_sphere",
    "fractional_shape_process",
    "ito_shape_process",
    "perturbation_ensemble",
    "q_wiener_shape_process",
    "sample_frames",
    "simulate",
]

MODELS = ("q_wiener", "ito", "fractional")


class ShapeCoefficients:
    """Coefficients of the x, y and z coordinate functions."""

    __slots__ = ("band_limit", "values")

    def __init__(self, band_limit: int, values=None):
        self.band_limit = int(band_limit)
        if values is None:
            values = np.zeros((3, n_coeffs(self.band_limit)))
        values = np.array(values, dtype=np.float64)
        if values.shape != (3, n_coeffs(self.band_limit)):
            raise ValueError(
                f"expected shape (3, {n_coeffs(self.band_limit)}), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficients must be finite")
        self.values = values

    @classmethod
    def from_channels(cls, channels) -> ShapeCoefficients:
        channels = list(channels)
        if len(channels) != 3:
            raise ValueError("a shape needs exactly three channels")
        limits = {c.band_limit for c in channels}
        if len(limits) != 1:
            raise ValueError(f"channels disagree on band limit: {sorted(limits)}")
        return cls(limits.pop(), np.stack([c.values for c in channels]))

    def channel(self, i: int) -> HarmonicCoefficients:
        return HarmonicCoefficients(self.band_limit, self.values[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShapeCoefficients):
            return NotImplemented
        return self.band_limit == other.band_limit and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"ShapeCoefficients(band_limit={self.band_limit})"

    def to_json(self) -> dict:
        return coefficients_to_json(self.values, self.band_limit)

    @classmethod
    def from_json(cls, doc: dict) -> ShapeCoefficients:
        band_limit, values = coefficients_from_json(doc)
        if values.shape[0] != 3:
            raise ValueError(f"a shape needs 3 channels, document has {values.shape[0]}")
        return cls(band_limit, values)


@dataclass(frozen=True)
class ShapeTrajectory:
    grid: TimeGrid
    initial: ShapeCoefficients
    perturbations: np.ndarray = field(repr=False)  # (steps + 1, 3, (N+1)^2)
    provenance: dict = field(default_factory=dict)

    @property
    def band_limit(self) -> int:
        return self.initial.band_limit

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self) -> int:
        return self.perturbations.shape[0]

    def frame(self, k: int) -> ShapeCoefficients:
        if k == 0:
            return ShapeCoefficients(self.band_limit, self.initial.values.copy())
        return ShapeCoefficients(self.band_limit, self.initial.values + self.perturbations[k])

    @property
    def frames(self) -> list[ShapeCoefficients]:
        return [self.frame(k) for k in range(len(self))]

    def noise(self, k: int) -> ShapeCoefficients:
        return ShapeCoefficients(self.band_limit, self.perturbations[k])


def _entry_keys(entries):
    return [(int(ch), int(l), int(l + m)) for ch, l, m in entries]


def _driving_paths(entries, grid, seed, n_paths, model, process, hurst):
    """Unscaled driving processes, shape (n_entries, n_paths, steps + 1)."""
    keys = _entry_keys(entries)
    out = np.empty((len(keys), n_paths, grid.steps + 1))
    if model == "q_wiener":
        for i, key in enumerate(keys):
            out[i, :, 0] = 0.0
            np.cumsum(brownian_increments(grid, n_paths, seed, key), axis=1, out=out[i, :, 1:])
    elif model == "ito":
        if process is None:
            raise ValueError("the ito model needs a process spec")
        if not keys:
            return out
        dw = np.concatenate([brownian_increments(grid, n_paths, seed, key) for key in keys])
        paths = euler_maruyama(process, np.zeros(dw.shape[0]), grid, increments=dw)
        out[:] = paths.values.reshape(len(keys), n_paths, grid.steps + 1)
    elif model == "fractional":
        if hurst is None:
            raise ValueError("the fractional model needs a Hurst index")
        for i, key in enumerate(keys):
            out[i] = fbm_paths(hurst, grid, n_paths, seed, key).values
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return out


def _weights_for(entries, spec, scale, model):
    # the Ito generalisation scales by sqrt(lambda) by construction
    w = spec.weights("sqrt" if model == "ito" else scale)
    return np.array([w[l] for _, l, _ in entries])


def perturbation_ensemble(
    spec: CovarianceSpectrum,
    grid: TimeGrid,
    seed,
    n_paths: int,
    entries,
    model: str = "q_wiener",
    process: ProcessSpec | None = None,
    hurst: float | None = None,
    scale: str = "sqrt",
) -> np.ndarray:
    """Independent realisations of selected noise coefficients.

    ``entries`` lists ``(channel, l, m)`` triples. Returns the weighted
    perturbations, shape (n_entries, n_paths, steps + 1). Path 0 is exactly
    what the single-run processes produce for the same seed.
    """
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    entries = [tuple(e) for e in entries]
    for ch, l, m in entries:
        if ch not in (0, 1, 2) or not 0 <= l <= spec.band_limit or abs(m) > l:
            raise ValueError(f"invalid coefficient entry {(ch, l, m)}")
    drive = _driving_paths(entries, grid, seed, int(n_paths), model, process, hurst)
    w = _weights_for(entries, spec, scale, model)
    return w[:, None, None] * drive


def _run(u0, spec, grid, seed, model, process=None, hurst=None, scale="sqrt"):
    if not isinstance(u0, ShapeCoefficients):
        raise TypeError("u0 must be ShapeCoefficients")
    if spec.band_limit != u0.band_limit:
        raise ValueError(
            f"spectrum band limit {spec.band_limit} does not match shape band limit {u0.band_limit}"
        )
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    n = u0.band_limit
    ls, ms = degree_of_index(n)
    entries = [(ch, int(l), int(m)) for ch in range(3) for l, m in zip(ls, ms)]
    pert = perturbation_ensemble(spec, grid, seed, 1, entries, model, process, hurst, scale)
    pert = pert[:, 0, :].reshape(3, n_coeffs(n), grid.steps + 1).transpose(2, 0, 1).copy()
    provenance = {
        "model": model,
        "spectrum": spec.to_json(),
        "seed": seed.master_seed,
        "scale": "sqrt" if model == "ito" else scale,
    }
    if process is not None:
        provenance["process"] = process.to_json()
    if hurst is not None:
        provenance["hurst"] = hurst
    return ShapeTrajectory(grid, u0, pert, provenance)


def q_wiener_shape_process(
    u0: ShapeCoefficients, spec: CovarianceSpectrum, grid: TimeGrid, seed, scale: str = "sqrt"
) -> ShapeTrajectory:
    """Source shape plus a Q-Wiener process diagonal in the harmonic basis.

    ``scale="sqrt"`` weights degree l by sqrt(lambda_l); ``"linear"`` uses
    lambda_l directly.
    """
    return _run(u0, spec, grid, seed, "q_wiener", scale=scale)


def ito_shape_process(
    u0: ShapeCoefficients, spec: CovarianceSpectrum, proc: ProcessSpec, grid: TimeGrid, seed
) -> ShapeTrajectory:
    """Each coefficient perturbation follows ``proc`` from zero, scaled by sqrt(lambda_l)."""
    if proc.hurst is not None:
        raise ValueError("fractional noise goes through fractional_shape_process")
    return _run(u0, spec, grid, seed, "ito", process=proc)


def fractional_shape_process(
    u0: ShapeCoefficients, spec: CovarianceSpectrum, h: float, grid: TimeGrid, seed, scale: str = "sqrt"
) -> ShapeTrajectory:
    """Q-Wiener process with every Brownian motion replaced by an fBm of Hurst index ``h``."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {h}")
    return _run(u0, spec, grid, seed, "fractional", hurst=h, scale=scale)


def simulate(u0, spec, grid, seed, model="q_wiener", process=None, hurst=None, scale="sqrt"):
    """Dispatch on ``model``; the common entry point of the CLI."""
    if model == "q_wiener":
        return q_wiener_shape_process(u0, spec, grid, seed, scale)
    if model == "ito":
        return ito_shape_process(u0, spec, process, grid, seed)
    if model == "fractional":
        return fractional_shape_process(u0, spec, hurst, grid, seed, scale)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def sample_frames(traj: ShapeTrajectory, points, noise_only: bool = False) -> np.ndarray:
    """Evaluate every frame at ``points``; returns (n_frames, n_points, 3).

    ``points`` is a ``(theta, phi)`` tuple of arrays or an (n, 2) array.
    With ``noise_only`` the source shape is left out.
    """
    if isinstance(points, tuple) and len(points) == 2:
        theta, phi = (np.asarray(p, dtype=np.float64).ravel() for p in points)
    else:
        arr = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        theta, phi = arr[:, 0], arr[:, 1]
    basis = real_sh_matrix(traj.band_limit, theta, phi)
    coeffs = traj.perturbations if noise_only else traj.initial.values[None] + traj.perturbations
    if not noise_only:
        coeffs[0] = traj.initial.values
    return np.einsum("pc,kjc->kpj", basis, coeffs)


def decompose_function(fn: Callable, band_limit: int) -> ShapeCoefficients:
    """Quadrature decomposition of ``fn(theta, phi) -> (x, y, z)``."""
    grid = build_grid(band_limit)
    tt, pp = np.meshgrid(grid.thetas, grid.phis, indexing="ij")
    xyz = fn(tt, pp)
    return ShapeCoefficients.from_channels(forward_sht(c, grid, band_limit) for c in xyz)


def decompose_ellipsoid(band_limit: int, axes=(1.0, 1.0, 1.0)) -> ShapeCoefficients:
    if band_limit < 1:
        raise ValueError("an ellipsoid needs band limit >= 1 (its coordinates are degree-1 harmonics)")
    a, b, c = axes

    def embed(theta, phi):
        st = np.sin(theta)
        return a * st * np.cos(phi), b * st * np.sin(phi), c * np.cos(theta)

    return decompose_function(embed, band_limit)


def decompose_sphere(band_limit: int) -> ShapeCoefficients:
    """Coefficients of the unit sphere embedding (all mass in degree 1)."""
    if band_limit < 1:
        raise ValueError("the sphere needs band limit >= 1 (its coordinates are degree-1 harmonics)")
    return decompose_ellipsoid(band_limit)
