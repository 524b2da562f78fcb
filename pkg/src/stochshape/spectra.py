"""Covariance spectra for diagonal operators Q and Sobolev diagnostics.

A spectrum stores one weight per degree ``l``; each degree carries ``2l+1``
basis functions, so flat-basis sums multiply by that degeneracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .harmonics import HarmonicCoefficients, degree_of_index

__all__ = [
    "KINDS",
    "ConvergenceReport",
    "CovarianceSpectrum",
    "hnu_convergence_margin",
    "make_spectrum",
    "project_hnu",
    "sobolev_norm",
    "spectrum_from_json",
    "truncated_trace",
]

KINDS = ("identity", "inv_linear", "inv_quadratic", "bessel", "custom", "zero")


@dataclass(frozen=True)
class CovarianceSpectrum:
    kind: str
    lambdas: np.ndarray = field(repr=False)
    nu: float | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("lambdas must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("spectrum weights must be finite and non-negative")
        object.__setattr__(self, "lambdas", lam)

    @property
    def band_limit(self) -> int:
        return self.lambdas.size - 1

    def weights(self, scale: str = "sqrt") -> np.ndarray:
        """Per-degree noise amplitude: sqrt(lambda_l), or lambda_l for ``linear``."""
        if scale == "sqrt":
            return np.sqrt(self.lambdas)
        if scale == "linear":
            return self.lambdas.copy()
        raise ValueError(f"scale must be 'sqrt' or 'linear', got {scale!r}")

    def to_json(self) -> dict:
        if self.kind in ("custom", "zero"):
            return {"kind": "custom", "lambdas": [float(v) for v in self.lambdas]}
        doc = {"kind": self.kind, "band_limit": self.band_limit}
        if self.kind == "bessel":
            doc["nu"] = self.nu
        return doc


def make_spectrum(kind: str, band_limit: int, nu: float | None = None) -> CovarianceSpectrum:
    """Build a built-in spectrum.

    identity: 1; inv_linear: 1/(l+1); inv_quadratic: 1/(l+1)^2;
    bessel: (1 + l(l+1))^(-nu), the spectrum of (1 - Laplacian)^(-nu);
    zero: 0.
    """
    if int(band_limit) != band_limit or band_limit < 0:
        raise ValueError(f"band limit must be a non-negative integer, got {band_limit!r}")
    if kind == "bessel":
        if nu is None:
            raise ValueError("bessel spectrum requires nu")
        if nu < 0:
            raise ValueError(f"nu must be non-negative, got {nu}")
    elif nu is not None:
        raise ValueError(f"nu is only meaningful for the bessel spectrum, not {kind!r}")
    l = np.arange(int(band_limit) + 1, dtype=np.float64)
    if kind == "identity":
        lam = np.ones_like(l)
    elif kind == "inv_linear":
        lam = 1.0 / (l + 1.0)
    elif kind == "inv_quadratic":
        lam = 1.0 / (l + 1.0) ** 2
    elif kind == "bessel":
        lam = (1.0 + l * (l + 1.0)) ** (-float(nu))
    elif kind == "zero":
        lam = np.zeros_like(l)
    else:
        raise ValueError(f"unknown spectrum kind {kind!r}")
    return CovarianceSpectrum(kind=kind, lambdas=lam, nu=None if nu is None else float(nu))


def spectrum_from_json(doc: dict, band_limit: int | None = None) -> CovarianceSpectrum:
    """Parse ``{"kind", "nu", "band_limit"}`` or ``{"kind": "custom", "lambdas"}``.

    ``band_limit`` fills in a missing ``band_limit`` entry; a conflicting one
    is an error.
    """
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("spectrum must be an object with a 'kind' entry")
    kind = doc["kind"]
    if kind == "custom":
        if "lambdas" not in doc:
            raise ValueError("custom spectrum requires 'lambdas'")
        spec = CovarianceSpectrum(kind="custom", lambdas=doc["lambdas"])
        if band_limit is not None and spec.band_limit != band_limit:
            raise ValueError(
                f"custom spectrum has {spec.lambdas.size} weights, band limit {band_limit} "
                f"needs {band_limit + 1}"
            )
        return spec
    n = doc.get("band_limit", band_limit)
    if n is None:
        raise ValueError("spectrum band_limit is missing")
    if band_limit is not None and n != band_limit:
        raise ValueError(f"spectrum band_limit {n} conflicts with run band_limit {band_limit}")
    return make_spectrum(kind, n, doc.get("nu"))


def truncated_trace(spec: CovarianceSpectrum) -> float:
    """Sum of (2l+1) lambda_l up to the band limit."""
    l = np.arange(spec.lambdas.size)
    return float(np.sum((2 * l + 1) * spec.lambdas))


@dataclass(frozen=True)
class ConvergenceReport:
    """Truncated H^nu series diagnostics.

    ``classification`` is one of ``"zero"``, ``"decaying"``,
    ``"slowly decaying"`` (terms shrink but slower than 1/l) and
    ``"terms not decaying"``.
    """

    total: float
    partial_sums: np.ndarray = field(repr=False)
    terms: np.ndarray = field(repr=False)
    last_ratio: float
    tail_exponent: float
    classification: str

    @property
    def diverging(self) -> bool:
        return self.classification in ("slowly decaying", "terms not decaying")


def hnu_convergence_margin(spec: CovarianceSpectrum, nu: float) -> ConvergenceReport:
    """Partial sums of sum_l (2l+1) lambda_l (l+1)^(2 nu) with a decay heads-up.

    Only a truncation is available, so convergence is diagnosed from the
    tail: the log-log slope of the terms between degree N/2 and N is compared
    against -1.
    """
    l = np.arange(spec.lambdas.size, dtype=np.float64)
    terms = (2 * l + 1) * spec.lambdas * (l + 1.0) ** (2 * nu)
    partial = np.cumsum(terms)
    total = float(partial[-1])
    last_ratio = float(partial[-1] / partial[-2]) if partial.size > 1 and partial[-2] > 0 else math.nan
    n = terms.size - 1
    exponent = math.nan
    if total == 0.0:
        label = "zero"
    elif n < 2:
        label = "decaying" if n == 1 and terms[1] < terms[0] else "terms not decaying"
    else:
        mid = n // 2
        t_end, t_mid = terms[n], terms[mid]
        if t_end == 0.0:
            label = "decaying"
            exponent = -math.inf
        elif t_mid == 0.0:
            label = "terms not decaying"
            exponent = math.inf
        else:
            exponent = math.log(t_end / t_mid) / math.log((n + 1.0) / (mid + 1.0))
            if exponent >= 0:
                label = "terms not decaying"
            elif exponent >= -1:
                label = "slowly decaying"
            else:
                label = "decaying"
    return ConvergenceReport(
        total=total,
        partial_sums=partial,
        terms=terms,
        last_ratio=last_ratio,
        tail_exponent=exponent,
        classification=label,
    )


def sobolev_norm(coeffs, nu: float) -> float:
    """H^nu norm: sqrt(sum (1 + (l(l+1))^nu) c^2).

    ``nu = 0`` is H^0 = L^2 and returns the plain coefficient norm. Accepts
    a single table or anything exposing ``band_limit`` and a ``values``
    array whose last axis is the coefficient axis.
    """
    values = np.asarray(coeffs.values)
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu}")
    if nu == 0:
        return float(np.sqrt(np.sum(values**2)))
    ls, _ = degree_of_index(coeffs.band_limit)
    factor = 1.0 + (ls * (ls + 1.0)) ** nu
    return float(np.sqrt(np.sum(factor * values**2)))


def project_hnu(coeffs: HarmonicCoefficients, nu: float) -> HarmonicCoefficients:
    """Map an L^2 expansion into H^nu by scaling degree l with (l+1)^(-nu)."""
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu}")
    ls, _ = degree_of_index(coeffs.band_limit)
    return HarmonicCoefficients(coeffs.band_limit, (ls + 1.0) ** (-nu) * coeffs.values)
