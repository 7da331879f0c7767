"""Cross-validation checks wired into the `validate` CLI subcommand.

Each check pits an implementation against an independent oracle (tensor
brute force, dense-step integration, analytic moments) and returns a
measured figure plus its tolerance, so the CLI can render a PASS/FAIL
table and tests can assert the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import BandSpec, make_control_instance, sample_haar_unitary, transversality_stats
from .floquet import DriveParams, assemble_floquet, propagate
from .ghz import ghz_amplitude_bruteforce, ghz_amplitude_fast, ghz_readout
from .harness import TGridPolicy
from .reference import reference_propagators

__all__ = [
    "CheckResult",
    "check_ghz_oracle",
    "check_floquet_vs_reference",
    "check_transversality",
    "check_unitarity_defect",
    "check_null_calibration",
    "run_validation",
]

OMEGA_MIN_DEFAULT = 2.0 * math.pi * 1e8


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


def _result(name: str, measured: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        measured=measured,
        tolerance=tolerance,
        passed=measured <= tolerance,
        detail=detail,
    )


def check_ghz_oracle(
    dims: tuple[int, ...] = (2, 4, 8),
    ms: tuple[int, ...] = (1, 2, 3),
    n_seeds: int = 50,
    fault_exponent_shift: int = 0,
) -> CheckResult:
    """Fast element-power amplitude against the tensor brute force.

    fault_exponent_shift is a mutation hook: a nonzero shift feeds m +
    shift to the fast path only, which must make the check fail.
    """
    worst = 0.0
    for d in dims:
        for m in ms:
            for seed in range(n_seeds):
                u = sample_haar_unitary(d, seed=1000 * d + 10 * m + seed)
                fast = ghz_amplitude_fast(u, m + fault_exponent_shift, check=False)
                brute = ghz_amplitude_bruteforce(u, m)
                worst = max(worst, abs(fast - brute))
    return _result(
        "ghz fast vs brute force",
        worst,
        1e-10,
        f"dims={dims} ms={ms} seeds={n_seeds}",
    )


def check_floquet_vs_reference(
    d: int = 4,
    drive_ratio: float = 1e-3,
    seed: int = 42,
    n_checkpoints: int = 8,
    t_max_scale: float = 6.0,
    steps_per_period: int = 256,
) -> CheckResult:
    """Interaction-picture propagator against the dense-step integrator.

    Checkpoints are spread geometrically over the stopping grid of the
    matching cell.  The quick default (d=4) keeps the dense integration
    affordable; the acceptance suite runs the full d <= 8 version.
    """
    band = BandSpec.from_ratio(
        omega_min=OMEGA_MIN_DEFAULT, b_min=1e-3 * OMEGA_MIN_DEFAULT, m=1, r=d
    )
    instance = make_control_instance(band, seed)
    omega = band.omega_min * (1.0 + 0.4 * band.delta_omega / band.omega_min)
    drive = DriveParams(b_eff=drive_ratio * omega, omega=omega)
    sol = assemble_floquet(instance, drive)
    grid = TGridPolicy(t_max_scale=t_max_scale).build(band)
    checks = grid[:: max(1, len(grid) // n_checkpoints)]
    refs = reference_propagators(instance, drive, checks, steps_per_period)
    evecs, evals = instance.eigvecs, instance.eigvals
    worst = 0.0
    for t, u_ref in zip(checks, refs):
        u_int = propagate(sol, float(t)).u_int
        u_ref_int = evecs @ (np.exp(1j * evals * t)[:, None] * (evecs.conj().T @ u_ref))
        worst = max(worst, float(np.linalg.norm(u_int - u_ref_int, 2)))
    return _result(
        "floquet vs dense integrator",
        worst,
        1e-3,
        f"d={d} b/omega={drive_ratio:g} checkpoints={len(checks)}",
    )


def check_transversality(d: int = 16, n_eigvecs: int = 2000, seed: int = 7) -> CheckResult:
    """Sample variance of <psi| Z |psi> against the Haar moment n/(d+1)."""
    n = d.bit_length() - 1
    band = BandSpec.from_ratio(
        omega_min=OMEGA_MIN_DEFAULT, b_min=1e-3 * OMEGA_MIN_DEFAULT, m=1, r=d
    )
    stats = transversality_stats(make_control_instance(band, seed), n_eigvecs)
    expected = n / (d + 1)
    # 3 sigma of a sample variance, normal approximation.
    sigma = expected * math.sqrt(2.0 / n_eigvecs)
    return _result(
        f"transversality variance d={d}",
        abs(stats.sample_var - expected),
        3.0 * sigma,
        f"var={stats.sample_var:.5f} expected={expected:.5f} N={n_eigvecs}",
    )


def check_unitarity_defect(drive_ratio: float = 1e-3, seed: int = 42) -> CheckResult:
    """Truncation-limited unitarity of u_int over the stopping grid (d=2)."""
    band = BandSpec.from_ratio(
        omega_min=OMEGA_MIN_DEFAULT, b_min=1e-3 * OMEGA_MIN_DEFAULT, m=1, r=2
    )
    instance = make_control_instance(band, seed)
    omega = band.omega_min + 0.5 * band.delta_omega
    sol = assemble_floquet(instance, DriveParams(b_eff=drive_ratio * omega, omega=omega))
    grid = TGridPolicy().build(band)
    eye = np.eye(instance.d)
    worst = 0.0
    for t in grid[::4]:
        u = propagate(sol, float(t)).u_int
        worst = max(worst, float(np.linalg.norm(u.conj().T @ u - eye, 2)))
    return _result("unitarity defect (d=2 grid)", worst, 1e-4, f"b/omega={drive_ratio:g}")


def check_null_calibration(seed: int = 11) -> CheckResult:
    """B = 0 leaves the probe exactly on the reference: p_det, L1 ~ 0."""
    band = BandSpec.from_ratio(
        omega_min=OMEGA_MIN_DEFAULT, b_min=1e-3 * OMEGA_MIN_DEFAULT, m=2, r=8
    )
    instance = make_control_instance(band, seed)
    omega = band.omega_min + 0.3 * band.delta_omega
    sol = assemble_floquet(instance, DriveParams(b_eff=0.0, omega=omega))
    grid = TGridPolicy().build(band)
    worst = 0.0
    for t in grid[::6]:
        readout = ghz_readout(propagate(sol, float(t)).u_int, band.m)
        worst = max(worst, readout.p_det, readout.l1_statistic)
    return _result("null calibration (B=0)", worst, 1e-10, "p_det and L1 at all times")


def run_validation(fault: str | None = None, fast: bool = True) -> list[CheckResult]:
    """Run the oracle suite; `fault` injects a known mutation for sanity.

    Args:
        fault: None or "ghz-exponent" (fast GHZ path evaluates m + 1).
        fast: use the quick d=4 dense-integrator check; the full d=8 run
            lives in the acceptance suite.
    """
    if fault not in (None, "ghz-exponent"):
        raise ValueError(f"unknown fault hook {fault!r}")
    shift = 1 if fault == "ghz-exponent" else 0
    return [
        check_ghz_oracle(fault_exponent_shift=shift),
        check_floquet_vs_reference(d=4 if fast else 8),
        check_transversality(),
        check_unitarity_defect(),
        check_null_calibration(),
    ]
