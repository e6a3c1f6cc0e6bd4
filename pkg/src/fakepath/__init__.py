"""Fake-path injection for location privacy in mmWave MISO-OFDM links."""

from .channel import (
    Path,
    PathSet,
    PilotBlock,
    Provenance,
    Scene,
    SystemConfig,
    channel_matrix,
    channel_vector,
    feasible_scatterer,
    fourier_vector,
    generate_pilots,
    min_separation,
    scene_to_params,
    separation_thresholds,
    sigma_from_snr,
    steering_vector,
)
from .precoder import (
    FakePathDesign,
    SharedInfo,
    design_feasibility,
    effective_pilots,
    eve_effective_paths,
    fake_paths_from_design,
    parameter_deltas,
    precoder_matrix,
)
from .fisher import (
    FimMatrix,
    ParamOrdering,
    crlb_trace,
    exact_fim,
    gaussian_baseline_sigma,
    leaked_fim,
    localization_fim,
    localization_jacobian,
    signal_derivatives,
)
from .bounds import (
    asymptotic_fim,
    bound_psi,
    bound_xi,
    check_assumptions,
    moment_constants,
    moment_functions,
)

__version__ = "0.1.0"
