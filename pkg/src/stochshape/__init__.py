"""Stochastic shape evolution through spherical harmonic coefficient processes."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .diffusion import (
    ShapeCoefficients,
    ShapeTrajectory,
    decompose_ellipsoid,
    decompose_sphere,
    fractional_shape_process,
    ito_shape_process,
    perturbation_ensemble,
    q_wiener_shape_process,
    sample_frames,
)
from .harmonics import (
    HarmonicCoefficients,
    SphericalGrid,
    assoc_legendre,
    build_grid,
    eval_real_sh,
    forward_sht,
    fractional_laplacian_apply,
    inverse_sht,
)
from .mesh import (
    DuplicateAngleWarning,
    TriangleMesh,
    icosahedron,
    icosphere,
    load_mesh,
    mesh_stats,
    radial_project,
    save_mesh,
    torus,
    transfer_process,
)
from .sde import IntegrationError, ProcessSpec, SeedSpec, TimeGrid, brownian_increments, euler_maruyama, fbm_paths, ou_moments
from .spectra import (
    CovarianceSpectrum,
    hnu_convergence_margin,
    make_spectrum,
    project_hnu,
    sobolev_norm,
    truncated_trace,
)
