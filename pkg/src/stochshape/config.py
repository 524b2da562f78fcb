"""Run configuration: JSON in, validated and fully resolved before any work."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .diffusion import MODELS
from .sde import ProcessSpec, SeedSpec, TimeGrid
from .spectra import CovarianceSpectrum, spectrum_from_json

__all__ = ["ConfigError", "RunConfig", "load_config"]

INPUT_KINDS = ("sphere", "ellipsoid", "mesh", "coefficients")
FORMATS = ("obj", "json")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    input: dict
    band_limit: int
    spectrum: CovarianceSpectrum
    model: str
    process: ProcessSpec
    grid: TimeGrid
    seed: SeedSpec
    scale: str
    out_dir: Path
    format: str
    sphere_subdivisions: int
    center: list | None

    def resolved(self) -> dict:
        """Everything needed to rerun, except the output directory."""
        proc = {"model": self.model}
        if self.model == "ito":
            proc.update(self.process.to_json())
            proc.pop("hurst")
        elif self.model == "fractional":
            proc["hurst"] = self.process.hurst
        return {
            "input": copy.deepcopy(self.input),
            "band_limit": self.band_limit,
            "spectrum": self.spectrum.to_json(),
            "process": proc,
            "time": self.grid.to_json(),
            "seed": self.seed.master_seed,
            "scale": self.scale,
            "output": {
                "format": self.format,
                "sphere_subdivisions": self.sphere_subdivisions,
                "center": self.center,
            },
        }


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _default_band_limit(spectrum_doc) -> int:
    # identity noise is only usable at low truncation
    return 6 if spectrum_doc.get("kind") == "identity" else 25


def parse_config(doc: dict, base_dir: Path | None = None, seed=None, out=None, fmt=None) -> RunConfig:
    """Validate a config document; ``seed``/``out``/``fmt`` are CLI overrides."""
    _require(isinstance(doc, dict), "config must be a JSON object")
    if "config" in doc and "input" not in doc:  # a manifest
        doc = doc["config"]
    known = {"input", "band_limit", "spectrum", "process", "time", "seed", "scale", "output"}
    unknown = set(doc) - known
    _require(not unknown, f"unknown config key(s): {sorted(unknown)}")
    _require("input" in doc, "config requires an 'input' entry")

    inp = doc["input"]
    if isinstance(inp, str):
        inp = {"kind": inp}
    _require(isinstance(inp, dict) and inp.get("kind") in INPUT_KINDS,
             f"input.kind must be one of {INPUT_KINDS}")
    inp = dict(inp)
    if inp["kind"] in ("mesh", "coefficients"):
        _require(isinstance(inp.get("path"), str), f"{inp['kind']} input requires a 'path'")
        p = Path(inp["path"])
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        inp["path"] = str(p.resolve())
    if inp["kind"] == "ellipsoid":
        axes = inp.setdefault("axes", [1.0, 1.0, 1.0])
        _require(isinstance(axes, list) and len(axes) == 3, "ellipsoid axes must be three numbers")
        inp["axes"] = [float(a) for a in axes]

    spectrum_doc = doc.get("spectrum", {"kind": "bessel", "nu": 1.0})
    _require(isinstance(spectrum_doc, dict), "spectrum must be an object")
    band_limit = doc.get("band_limit")
    if band_limit is None:
        if spectrum_doc.get("kind") == "custom" and "lambdas" in spectrum_doc:
            band_limit = len(spectrum_doc["lambdas"]) - 1
        else:
            band_limit = spectrum_doc.get("band_limit", _default_band_limit(spectrum_doc))
    _require(isinstance(band_limit, int) and not isinstance(band_limit, bool) and band_limit >= 0,
             f"band_limit must be a non-negative integer, got {band_limit!r}")
    try:
        spectrum = spectrum_from_json(spectrum_doc, band_limit)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"spectrum: {exc}") from None

    proc_doc = dict(doc.get("process", {"model": "q_wiener"}))
    model = proc_doc.pop("model", "q_wiener")
    _require(model in MODELS, f"process.model must be one of {MODELS}")
    try:
        if model == "ito":
            _require(proc_doc.get("hurst") is None, "the ito model takes no hurst index")
            process = ProcessSpec.from_json(proc_doc)
        elif model == "fractional":
            _require(set(proc_doc) <= {"hurst"}, "the fractional model only takes 'hurst'")
            _require("hurst" in proc_doc, "the fractional model requires 'hurst'")
            process = ProcessSpec(hurst=float(proc_doc["hurst"]))
        else:
            _require(not proc_doc, "the q_wiener model takes no process parameters")
            process = ProcessSpec.brownian()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"process: {exc}") from None

    time_doc = doc.get("time", {})
    _require(isinstance(time_doc, dict), "time must be an object")
    try:
        grid = TimeGrid(T=float(time_doc.get("T", 1.0)), steps=time_doc.get("steps", 100),
                        t0=float(time_doc.get("t0", 0.0)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"time: {exc}") from None

    try:
        seed_spec = SeedSpec(seed if seed is not None else doc.get("seed", 0))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"seed: {exc}") from None

    scale = doc.get("scale", "sqrt")
    _require(scale in ("sqrt", "linear"), "scale must be 'sqrt' or 'linear'")
    _require(not (model == "ito" and scale == "linear"), "the ito model always scales by sqrt(lambda)")

    output = doc.get("output", {})
    _require(isinstance(output, dict), "output must be an object")
    fmt = fmt or output.get("format", "obj")
    _require(fmt in FORMATS, f"output.format must be one of {FORMATS}")
    out_dir = Path(out or output.get("dir", "out"))
    if not out_dir.is_absolute() and base_dir is not None and out is None:
        out_dir = base_dir / out_dir
    subdiv = output.get("sphere_subdivisions", 3)
    _require(isinstance(subdiv, int) and 0 <= subdiv <= 7, "sphere_subdivisions must be an integer in [0, 7]")
    center = output.get("center")
    _require(center is None or (isinstance(center, list) and len(center) == 3),
             "output.center must be null or three numbers")
    if inp["kind"] in ("sphere", "ellipsoid"):
        _require(band_limit >= 1, "sphere and ellipsoid inputs need band_limit >= 1")

    return RunConfig(
        input=inp,
        band_limit=band_limit,
        spectrum=spectrum,
        model=model,
        process=process,
        grid=grid,
        seed=seed_spec,
        scale=scale,
        out_dir=out_dir,
        format=fmt,
        sphere_subdivisions=subdiv,
        center=None if center is None else [float(c) for c in center],
    )


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc, base_dir=path.parent, **overrides)
