"""``stochshape`` command line: simulate, decompose, spectrum-check, info.

Exit codes: 0 ok, 2 invalid configuration or arguments, 3 I/O failure,
4 numerical blow-up.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import warnings
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .diffusion import ShapeCoefficients, ShapeTrajectory, decompose_ellipsoid, decompose_sphere, sample_frames, simulate
from .harmonics import fit_coefficients
from .mesh import MeshFormatError, TriangleMesh, icosphere, load_mesh, mesh_stats, radial_project, save_mesh, transfer_process
from .sde import IntegrationError
from .spectra import hnu_convergence_margin, sobolev_norm, spectrum_from_json, truncated_trace

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

THREADS_ENV = "SHAPE_DIFFUSION_THREADS"


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- simulate ---------------------------------------------------------------


def _initial_shape(cfg: RunConfig):
    """Source coefficients, plus the mesh for mesh inputs."""
    kind = cfg.input["kind"]
    if kind == "sphere":
        return decompose_sphere(cfg.band_limit), None
    if kind == "ellipsoid":
        return decompose_ellipsoid(cfg.band_limit, cfg.input["axes"]), None
    if kind == "coefficients":
        doc = json.loads(Path(cfg.input["path"]).read_text(encoding="utf-8"))
        try:
            u0 = ShapeCoefficients.from_json(doc)
        except ValueError as exc:
            raise ConfigError(f"coefficient input: {exc}") from None
        if u0.band_limit != cfg.band_limit:
            raise ConfigError(f"coefficient file has band limit {u0.band_limit}, config says {cfg.band_limit}")
        return u0, None
    mesh = load_mesh(cfg.input["path"])
    # the mesh itself is the source shape; only noise lives in coefficients
    return ShapeCoefficients(cfg.band_limit), mesh


def _frame_stats(traj: ShapeTrajectory):
    rows = []
    for k, t in enumerate(traj.times):
        frame = traj.frame(k)
        rows.append([k, _fmt(t), _fmt(sobolev_norm(frame, 0)), _fmt(sobolev_norm(frame, 2)),
                     _fmt(np.max(np.abs(frame.values)))])
    return rows


def run_simulation(cfg: RunConfig) -> dict:
    """Run a validated config and write the output tree. Returns the manifest."""
    u0, mesh = _initial_shape(cfg)
    traj = simulate(u0, cfg.spectrum, cfg.grid, cfg.seed, cfg.model, cfg.process,
                    cfg.process.hurst, cfg.scale)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if cfg.format == "json":
        for k in range(len(traj)):
            name = f"frame_{k:04d}.json"
            (out / name).write_text(_dump_json(traj.frame(k).to_json()), encoding="utf-8")
            files.append(name)
    else:
        if mesh is None:
            base = icosphere(cfg.sphere_subdivisions)
            param = radial_project(base, center=[0.0, 0.0, 0.0])
            points = sample_frames(traj, (param.theta, param.phi))
            meshes = [TriangleMesh(p, base.faces) for p in points]
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                param = radial_project(mesh, center=cfg.center)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            meshes = transfer_process(mesh, param, traj)
        for k, m in enumerate(meshes):
            name = f"frame_{k:04d}.obj"
            save_mesh(m, out / name)
            files.append(name)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame", "t", "l2_norm", "h2_norm", "max_coeff"])
    writer.writerows(_frame_stats(traj))
    (out / "stats.csv").write_text(buf.getvalue(), encoding="utf-8")

    manifest = {
        "tool": "stochshape",
        "version": __version__,
        "config": cfg.resolved(),
        "seed": cfg.seed.master_seed,
        "times": [float(t) for t in traj.times],
        "frames": files,
    }
    if cfg.input["kind"] in ("mesh", "coefficients"):
        manifest["input_sha256"] = hashlib.sha256(Path(cfg.input["path"]).read_bytes()).hexdigest()
    (out / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")
    return manifest


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out=args.out, fmt=args.format)
    manifest = run_simulation(cfg)
    print(f"wrote {len(manifest['frames'])} frames to {cfg.out_dir}")
    return 0


# -- decompose ----------------------------------------------------------------


def cmd_decompose(args) -> int:
    n = args.band_limit
    if n < 0:
        raise ConfigError(f"band limit must be non-negative, got {n}")
    if args.mesh is not None:
        mesh = load_mesh(args.mesh)
        param = radial_project(mesh)
        try:
            values = fit_coefficients(param.theta, param.phi, mesh.vertices, n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        coeffs = ShapeCoefficients(n, values.T)
    else:
        if n < 1:
            raise ConfigError(f"the {args.preset} preset needs band limit >= 1")
        if args.preset == "sphere":
            coeffs = decompose_sphere(n)
        else:
            coeffs = decompose_ellipsoid(n, args.axes)
    text = _dump_json(coeffs.to_json())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# -- spectrum-check -------------------------------------------------------


def _load_spectrum_arg(args):
    if args.config:
        return load_config(args.config).spectrum
    raw = args.spectrum
    if raw is None:
        raise ConfigError("spectrum-check needs --spectrum or --config")
    candidate = Path(raw)
    if not raw.lstrip().startswith("{") and candidate.exists():
        raw = candidate.read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--spectrum is neither JSON nor a readable file: {exc}") from None
    try:
        return spectrum_from_json(doc, args.band_limit)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"spectrum: {exc}") from None


def cmd_spectrum_check(args) -> int:
    spec = _load_spectrum_arg(args)
    report = hnu_convergence_margin(spec, args.nu)
    result = {
        "kind": spec.kind,
        "band_limit": spec.band_limit,
        "truncated_trace": truncated_trace(spec),
        "nu": args.nu,
        "hnu_partial_sum": report.total,
        "last_partial_sum_ratio": report.last_ratio,
        "tail_exponent": report.tail_exponent,
        "classification": report.classification,
    }
    if args.json:
        sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
        return 0
    print(f"spectrum         {spec.kind} (band limit {spec.band_limit})")
    print(f"truncated trace  {result['truncated_trace']:.10g}")
    print(f"H^{args.nu:g} partial sum  {report.total:.10g}")
    print(f"last-sum ratio   {report.last_ratio:.10g}")
    print(f"tail exponent    {report.tail_exponent:.6g}")
    print(f"classification   {report.classification}")
    return 0


# -- info -------------------------------------------------------------------------


def cmd_info(args) -> int:
    path = Path(args.path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        if "config" in doc and "frames" in doc:
            print(f"manifest: {len(doc['frames'])} frames, seed {doc['seed']}, version {doc['version']}")
            return 0
        try:
            coeffs = ShapeCoefficients.from_json(doc)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        print(f"band limit   {coeffs.band_limit}")
        print(f"channels     3")
        print(f"L2 norm      {sobolev_norm(coeffs, 0):.10g}")
        print(f"H2 norm      {sobolev_norm(coeffs, 2):.10g}")
        return 0
    try:
        stats = mesh_stats(load_mesh(path))
    except MeshFormatError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"vertices          {stats['n_vertices']}")
    print(f"faces             {stats['n_faces']}")
    print("bbox min          " + " ".join(f"{v:.10g}" for v in stats["bbox_min"]))
    print("bbox max          " + " ".join(f"{v:.10g}" for v in stats["bbox_max"]))
    print(f"mean edge length  {stats['mean_edge_length']:.10g}")
    return 0


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochshape", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a simulation config")
    p.add_argument("--config", required=True, help="run config (or a previous manifest.json)")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--format", choices=["obj", "json"], help="override the frame format")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", help="spherical harmonic coefficients of a preset or mesh")
    p.add_argument("--preset", choices=["sphere", "ellipsoid"], default="sphere")
    p.add_argument("--axes", type=float, nargs=3, default=[1.0, 1.0, 1.0], metavar=("A", "B", "C"))
    p.add_argument("--mesh", help="fit a mesh (radially projected) by least squares instead")
    p.add_argument("--band-limit", "-N", type=int, required=True)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("spectrum-check", help="trace and H^nu convergence diagnostics")
    p.add_argument("--spectrum", help="spectrum JSON, inline or as a file path")
    p.add_argument("--config", help="take the spectrum from a run config")
    p.add_argument("--band-limit", "-N", type=int, help="band limit if the spectrum omits it")
    p.add_argument("--nu", type=float, default=2.0, help="Sobolev order (default 2)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_spectrum_check)

    p = sub.add_parser("info", help="summary of a mesh, coefficient file or manifest")
    p.add_argument("path")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        with _thread_limit():
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
