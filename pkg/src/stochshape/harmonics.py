"""Real spherical harmonics, Gauss-Legendre grids and transforms.

Conventions
-----------
``theta`` is colatitude in [0, pi], ``phi`` is azimuth in [0, 2 pi). The
real orthonormal basis is built from the complex one with the
Condon-Shortley phase kept inside the Legendre functions::

    Y_{l,m}  = sqrt(2) N_l^m P_l^m(cos theta) cos(m phi)     m > 0
    Y_{l,0}  = N_l^0 P_l^0(cos theta)
    Y_{l,-m} = sqrt(2) N_l^m P_l^m(cos theta) sin(m phi)     m > 0

Coefficients are stored flat, entry ``l*l + l + m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend

__all__ = [
    "HarmonicCoefficients",
    "SphericalGrid",
    "assoc_legendre",
    "build_grid",
    "coefficients_from_json",
    "coefficients_to_json",
    "degree_of_index",
    "eval_real_sh",
    "fit_coefficients",
    "forward_sht",
    "fractional_laplacian_apply",
    "inverse_sht",
    "lm_index",
    "n_coeffs",
    "real_sh_matrix",
]


def n_coeffs(band_limit: int) -> int:
    return (band_limit + 1) ** 2


def lm_index(l: int, m: int) -> int:
    if abs(m) > l:
        raise ValueError(f"invalid harmonic index (l={l}, m={m})")
    return l * l + l + m


def degree_of_index(band_limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree and order arrays aligned with the flat coefficient layout."""
    ls = np.concatenate([np.full(2 * l + 1, l) for l in range(band_limit + 1)])
    ms = np.concatenate([np.arange(-l, l + 1) for l in range(band_limit + 1)])
    return ls, ms


def _check_band_limit(band_limit) -> int:
    if int(band_limit) != band_limit or band_limit < 0:
        raise ValueError(f"band limit must be a non-negative integer, got {band_limit!r}")
    return int(band_limit)


def assoc_legendre(l: int, m: int, x: float) -> float:
    """Associated Legendre function P_l^m(x) with Condon-Shortley phase.

    Evaluated through the normalised three-term recurrence and rescaled, so
    it stays accurate well past the degree where the explicit alternating
    sum loses all digits.
    """
    if not 0 <= m <= l:
        raise ValueError(f"need 0 <= m <= l, got l={l}, m={m}")
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [-1, 1], got {x}")
    table = _backend.legendre_table(l, np.array([float(x)]))
    value = table[0, l * (l + 1) // 2 + m]
    log_ratio = math.lgamma(l - m + 1) - math.lgamma(l + m + 1)
    if log_ratio > -600.0:
        return float(value / math.sqrt((2 * l + 1) / (4 * math.pi) * math.exp(log_ratio)))
    # factorial ratio underflows; rescale in log space
    log_norm = 0.5 * (math.log((2 * l + 1) / (4 * math.pi)) + log_ratio)
    return float(value * math.exp(-log_norm))


def real_sh_matrix(band_limit: int, theta, phi) -> np.ndarray:
    """Real harmonics up to ``band_limit`` at each point, shape (n_points, (N+1)^2)."""
    band_limit = _check_band_limit(band_limit)
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64)).ravel()
    if theta.shape != phi.shape:
        raise ValueError("theta and phi must have the same number of points")
    plm = _backend.legendre_table(band_limit, np.ascontiguousarray(np.cos(theta)))
    out = np.empty((theta.size, n_coeffs(band_limit)))
    root2 = math.sqrt(2.0)
    for m in range(band_limit + 1):
        if m == 0:
            for l in range(band_limit + 1):
                out[:, l * l + l] = plm[:, l * (l + 1) // 2]
            continue
        cos_m = root2 * np.cos(m * phi)
        sin_m = root2 * np.sin(m * phi)
        for l in range(m, band_limit + 1):
            p = plm[:, l * (l + 1) // 2 + m]
            out[:, l * l + l + m] = p * cos_m
            out[:, l * l + l - m] = p * sin_m
    return out


def eval_real_sh(l: int, m: int, theta, phi):
    """Real orthonormal harmonic Y_{l,m} at (theta, phi); scalars in, scalar out."""
    if abs(m) > l or l < 0:
        raise ValueError(f"invalid harmonic index (l={l}, m={m})")
    theta_arr = np.asarray(theta, dtype=np.float64)
    phi_arr = np.broadcast_to(np.asarray(phi, dtype=np.float64), theta_arr.shape)
    plm = _backend.legendre_table(l, np.ascontiguousarray(np.cos(theta_arr).ravel()))
    p = plm[:, l * (l + 1) // 2 + abs(m)]
    if m > 0:
        p = math.sqrt(2.0) * p * np.cos(m * phi_arr.ravel())
    elif m < 0:
        p = math.sqrt(2.0) * p * np.sin(-m * phi_arr.ravel())
    if theta_arr.ndim == 0:
        return float(p[0])
    return p.reshape(theta_arr.shape)


@dataclass(frozen=True)
class SphericalGrid:
    """Gauss-Legendre colatitude nodes times uniform azimuth nodes."""

    thetas: np.ndarray
    phis: np.ndarray
    weights: np.ndarray  # shape (n_theta, n_phi), sums to 4 pi

    @property
    def n_theta(self) -> int:
        return self.thetas.size

    @property
    def n_phi(self) -> int:
        return self.phis.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (theta, phi) node coordinates in row-major grid order."""
        tt, pp = np.meshgrid(self.thetas, self.phis, indexing="ij")
        return tt.ravel(), pp.ravel()


def build_grid(band_limit: int) -> SphericalGrid:
    """Grid with N+1 colatitude and 2N+2 azimuth nodes.

    Exact for band-limited integrands up to degree 2N+1, hence for products
    of two harmonics of degree at most N.
    """
    band_limit = _check_band_limit(band_limit)
    x, w = np.polynomial.legendre.leggauss(band_limit + 1)
    # leggauss returns x ascending, i.e. theta descending
    thetas = np.arccos(x[::-1])
    gl_w = w[::-1]
    n_phi = 2 * band_limit + 2
    phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
    weights = np.outer(gl_w, np.full(n_phi, 2.0 * np.pi / n_phi))
    return SphericalGrid(thetas=thetas, phis=phis, weights=weights)


class HarmonicCoefficients:
    """Band-limited real coefficient table of one scalar field on the sphere."""

    __slots__ = ("band_limit", "values")

    def __init__(self, band_limit: int, values=None):
        self.band_limit = _check_band_limit(band_limit)
        if values is None:
            values = np.zeros(n_coeffs(self.band_limit))
        values = np.array(values, dtype=np.float64)
        if values.shape != (n_coeffs(self.band_limit),):
            raise ValueError(
                f"expected {n_coeffs(self.band_limit)} coefficients for band limit "
                f"{self.band_limit}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficients must be finite")
        self.values = values

    @classmethod
    def indicator(cls, band_limit: int, l: int, m: int) -> HarmonicCoefficients:
        out = cls(band_limit)
        out.values[lm_index(l, m)] = 1.0
        return out

    def __getitem__(self, lm: tuple[int, int]) -> float:
        l, m = lm
        if l > self.band_limit:
            raise IndexError(f"degree {l} exceeds band limit {self.band_limit}")
        return float(self.values[lm_index(l, m)])

    def __setitem__(self, lm: tuple[int, int], value: float) -> None:
        l, m = lm
        if l > self.band_limit:
            raise IndexError(f"degree {l} exceeds band limit {self.band_limit}")
        self.values[lm_index(l, m)] = value

    def __eq__(self, other) -> bool:
        if not isinstance(other, HarmonicCoefficients):
            return NotImplemented
        return self.band_limit == other.band_limit and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"HarmonicCoefficients(band_limit={self.band_limit})"

    def copy(self) -> HarmonicCoefficients:
        return HarmonicCoefficients(self.band_limit, self.values.copy())

    def to_json(self) -> dict:
        return coefficients_to_json(self.values[None, :], self.band_limit)

    @classmethod
    def from_json(cls, doc: dict) -> HarmonicCoefficients:
        band_limit, values = coefficients_from_json(doc)
        if values.shape[0] != 1:
            raise ValueError(f"expected a single-channel table, got {values.shape[0]} channels")
        return cls(band_limit, values[0])


def coefficients_to_json(values: np.ndarray, band_limit: int) -> dict:
    """Serialise a (channels, (N+1)^2) array as ``[l, m, v_0, v_1, ...]`` rows."""
    values = np.atleast_2d(values)
    ls, ms = degree_of_index(band_limit)
    rows = [
        [int(l), int(m), *(float(v) for v in values[:, i])] for i, (l, m) in enumerate(zip(ls, ms))
    ]
    return {"band_limit": int(band_limit), "channels": int(values.shape[0]), "coeffs": rows}


def coefficients_from_json(doc: dict) -> tuple[int, np.ndarray]:
    try:
        band_limit = _check_band_limit(doc["band_limit"])
        channels = int(doc["channels"])
        rows = doc["coeffs"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed coefficient document: {exc}") from exc
    values = np.zeros((channels, n_coeffs(band_limit)))
    for row in rows:
        if len(row) != 2 + channels:
            raise ValueError(f"coefficient row {row!r} does not carry {channels} value(s)")
        l, m = int(row[0]), int(row[1])
        if l > band_limit:
            raise ValueError(f"degree {l} exceeds band limit {band_limit}")
        values[:, lm_index(l, m)] = row[2:]
    if not np.all(np.isfinite(values)):
        raise ValueError("coefficients must be finite")
    return band_limit, values


def forward_sht(samples, grid: SphericalGrid, band_limit: int) -> HarmonicCoefficients:
    """Quadrature projection of grid samples onto the real harmonics."""
    band_limit = _check_band_limit(band_limit)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != grid.shape:
        raise ValueError(f"samples have shape {samples.shape}, grid has shape {grid.shape}")
    theta, phi = grid.nodes()
    basis = real_sh_matrix(band_limit, theta, phi)
    weighted = (grid.weights * samples).ravel()
    return HarmonicCoefficients(band_limit, np.einsum("p,pc->c", weighted, basis))


def _split_points(points) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(points, tuple) and len(points) == 2:
        return np.asarray(points[0], dtype=np.float64), np.asarray(points[1], dtype=np.float64)
    arr = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def inverse_sht(coeffs: HarmonicCoefficients, points) -> np.ndarray:
    """Synthesise the expansion at ``points``.

    ``points`` is either a ``(theta_array, phi_array)`` tuple or an (n, 2)
    array of (theta, phi) rows.
    """
    theta, phi = _split_points(points)
    basis = real_sh_matrix(coeffs.band_limit, theta.ravel(), phi.ravel())
    return np.einsum("pc,c->p", basis, coeffs.values).reshape(theta.shape)


def fit_coefficients(theta, phi, values, band_limit: int) -> np.ndarray:
    """Least-squares coefficients of scattered samples (for meshes, not grids).

    ``values`` may carry several channels along its last axis.
    """
    basis = real_sh_matrix(band_limit, theta, phi)
    if basis.shape[0] < basis.shape[1]:
        raise ValueError(
            f"{basis.shape[0]} samples cannot determine {basis.shape[1]} coefficients"
        )
    sol, *_ = np.linalg.lstsq(basis, np.asarray(values, dtype=np.float64), rcond=None)
    return sol


def fractional_laplacian_apply(coeffs: HarmonicCoefficients, nu: float) -> HarmonicCoefficients:
    """Apply (-Laplacian)^(nu/2): scales degree l by (l(l+1))^(nu/2)."""
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu}")
    if nu == 0:
        return coeffs.copy()
    ls, _ = degree_of_index(coeffs.band_limit)
    factor = (ls * (ls + 1.0)) ** (nu / 2.0)
    return HarmonicCoefficients(coeffs.band_limit, factor * coeffs.values)
