"""Broadband AC-signal detection with a multi-resonant analog probe.

Simulation engine for a detection protocol that tiles a wide frequency
band with the transition gaps of a randomized two-band control
Hamiltonian, probes all of them at once with an m-register GHZ state, and
stops when a population statistic crosses a threshold.  Includes the
metrological witness layer (Bures angles, integrated-QFI ceilings,
flatness certificates, two-time slope test) and a sweep harness that
reproduces the square-root stopping-time scaling.
"""

__version__ = "0.1.0"

from .control import (
    BandSpec,
    ControlInstance,
    CoverageReport,
    GapSpectrum,
    SSHParams,
    band_to_ssh_params,
    bucket_coverage,
    build_ssh_matrix,
    default_weight_floor,
    gap_spectrum,
    make_commuting_instance,
    make_control_instance,
    sample_haar_unitary,
    transversality_stats,
)
from .floquet import (
    DriveParams,
    FloquetSolution,
    PropagatorSample,
    assemble_floquet,
    propagate,
    propagate_grid,
    trotter_error_scan,
    trotter_propagator,
)
from .ghz import (
    DetectionTrace,
    GhzReadout,
    crowding_sum,
    detection_trace,
    ghz_amplitude_bruteforce,
    ghz_amplitude_fast,
    ghz_diag_populations,
    ghz_readout,
    lorentzian_envelope,
)
from .witness import (
    CeilingParams,
    FlatnessReport,
    SlopeTestResult,
    WitnessPoint,
    bures_angle,
    flatness_report,
    iqfi_ceiling,
    iqfi_quadrature,
    qfi_pure,
    shot_budget,
    slope_test_montecarlo,
    two_time_test,
)
from .harness import (
    CellSpec,
    ScalingDataset,
    StoppingResult,
    SweepConfig,
    TGridPolicy,
    flatness_scan,
    load_dataset,
    persist,
    run_instance,
    run_sweep,
)
from ._kernels import BACKEND as kernel_backend

__all__ = [name for name in dir() if not name.startswith("_")]
