"""GHZ-probe readout and the stopping-time detection statistic.

The probe state is (1/sqrt(d)) sum_i |i>^(x m): m identical registers in a
generalized GHZ superposition over the computational basis.  Because the
registers do not interact and evolve under the same single-register
propagator U, the survival amplitude collapses to an element-power sum

    <psi0| U^(x m) |psi0> = (1/d) sum_ij (U_ij)^m,

which costs O(d^2) regardless of m.  A tensor-product brute force over the
full d^m space validates the identity at small sizes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .floquet import FloquetSolution

__all__ = [
    "GhzReadout",
    "DetectionTrace",
    "ghz_amplitude_fast",
    "ghz_amplitude_bruteforce",
    "ghz_diag_populations",
    "ghz_readout",
    "detection_trace",
    "lorentzian_envelope",
    "crowding_sum",
]

logger = logging.getLogger(__name__)

#: Brute-force guard: refuse tensor spaces beyond 2^16 amplitudes.
BRUTEFORCE_MAX_DIM = 1 << 16

#: p_det values outside [0, 1] by more than this get logged before clamping.
CLAMP_WARN = 1e-9


def _check_m(m: int) -> None:
    if m < 1:
        raise ValueError(f"register count m must be >= 1, got {m}")


def _check_unitary(u: np.ndarray, tol: float = 1e-3) -> None:
    d = u.shape[0]
    defect = np.linalg.norm(u.conj().T @ u - np.eye(d))
    if defect > tol:
        raise ValueError(f"matrix is not close to unitary (defect {defect:.3g} > {tol})")


def ghz_amplitude_fast(u_int: np.ndarray, m: int, check: bool = True) -> complex:
    """Probe survival amplitude via the element-power identity, O(d^2)."""
    _check_m(m)
    if check:
        _check_unitary(u_int)
    amp, _ = _kernels.ghz_stats(np.asarray(u_int, dtype=complex), m)
    return amp


def ghz_diag_populations(u_int: np.ndarray, m: int, check: bool = True) -> np.ndarray:
    """Populations of the diagonal strings |i>^(x m), via row-power sums."""
    _check_m(m)
    if check:
        _check_unitary(u_int)
    _, pops = _kernels.ghz_stats(np.asarray(u_int, dtype=complex), m)
    return pops


def _bruteforce_state(u: np.ndarray, m: int) -> np.ndarray:
    """Evolve the GHZ probe in the full d^m space, one register at a time."""
    d = u.shape[0]
    psi = np.zeros((d,) * m, dtype=complex)
    diag = (np.arange(d),) * m
    psi[diag] = 1.0 / np.sqrt(d)
    for axis in range(m):
        psi = np.moveaxis(np.tensordot(u, psi, axes=(1, axis)), 0, axis)
    return psi


def ghz_amplitude_bruteforce(u_int: np.ndarray, m: int) -> complex:
    """Survival amplitude by explicit tensor-product evolution.

    Independent of the element-power identity; guarded to d^m <= 2^16.
    """
    _check_m(m)
    u = np.asarray(u_int, dtype=complex)
    d = u.shape[0]
    if d**m > BRUTEFORCE_MAX_DIM:
        raise ValueError(
            f"tensor space d^m = {d**m} exceeds {BRUTEFORCE_MAX_DIM}; "
            "use ghz_amplitude_fast instead"
        )
    psi = _bruteforce_state(u, m)
    amp = psi[(np.arange(d),) * m].sum() / np.sqrt(d)
    return complex(amp)


def ghz_populations_bruteforce(u_int: np.ndarray, m: int) -> np.ndarray:
    """Diagonal-string populations from the explicit tensor state."""
    _check_m(m)
    u = np.asarray(u_int, dtype=complex)
    d = u.shape[0]
    if d**m > BRUTEFORCE_MAX_DIM:
        raise ValueError(
            f"tensor space d^m = {d**m} exceeds {BRUTEFORCE_MAX_DIM}; "
            "use ghz_diag_populations instead"
        )
    psi = _bruteforce_state(u, m)
    return np.abs(psi[(np.arange(d),) * m]) ** 2


@dataclass(frozen=True)
class GhzReadout:
    """One-shot readout of the evolved probe.

    p_det is the deviation probability 1 - |amplitude|^2 relative to the
    no-signal hypothesis; l1_statistic is the L1 distance of the
    diagonal-string populations from the uniform reference 1/d.
    """

    amplitude: complex
    p_det: float
    diag_populations: np.ndarray
    l1_statistic: float


def ghz_readout(u_int: np.ndarray, m: int, check: bool = False) -> GhzReadout:
    """Evaluate amplitude, detection probability, and L1 statistic."""
    _check_m(m)
    if check:
        _check_unitary(u_int)
    d = u_int.shape[0]
    amp, pops = _kernels.ghz_stats(np.asarray(u_int, dtype=complex), m)
    raw = 1.0 - abs(amp) ** 2
    if raw < -CLAMP_WARN or raw > 1.0 + CLAMP_WARN:
        logger.warning("p_det = %.3e clamped to [0, 1]; truncation error?", raw)
    p_det = min(max(raw, 0.0), 1.0)
    l1 = float(np.abs(pops - 1.0 / d).sum())
    return GhzReadout(amplitude=amp, p_det=p_det, diag_populations=pops, l1_statistic=l1)


@dataclass(frozen=True)
class DetectionTrace:
    """L1 and detection-probability series over a stopping grid.

    stop_time is the first grid time at which the chosen stopping
    statistic reaches the threshold, or None when the grid is exhausted
    without a crossing.
    """

    t_grid: np.ndarray
    p_det_series: np.ndarray
    l1_series: np.ndarray
    threshold: float
    stop_time: float | None
    statistic: str = "l1"

    @property
    def crossed(self) -> bool:
        return self.stop_time is not None


def detection_trace(
    sol: FloquetSolution,
    instance,
    m: int,
    t_grid: np.ndarray,
    threshold: float,
    statistic: str = "l1",
) -> DetectionTrace:
    """Evaluate the stopping statistics at every grid time.

    The interaction-picture propagator is rebuilt per time from the cached
    Floquet decomposition and reduced to readout statistics in one pass.
    Both series are always computed; ``statistic`` ("l1" or "p_det") only
    selects which one defines stop_time.
    """
    _check_m(m)
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if statistic not in ("l1", "p_det"):
        raise ValueError(f"statistic must be 'l1' or 'p_det', got {statistic!r}")
    if instance is not sol.instance:
        raise ValueError("instance does not match the one the solution was built from")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    p_det, l1, _ = _kernels.detection_series(
        sol.eigvals,
        sol.b3,
        sol.w,
        instance.eigvals,
        instance.eigvecs,
        sol.drive.omega,
        m,
        t_grid,
        stop_threshold=None,
    )
    series = l1 if statistic == "l1" else p_det
    crossings = np.nonzero(series >= threshold)[0]
    stop_time = float(t_grid[crossings[0]]) if crossings.size else None
    return DetectionTrace(
        t_grid=t_grid,
        p_det_series=p_det,
        l1_series=l1,
        threshold=threshold,
        stop_time=stop_time,
        statistic=statistic,
    )


def lorentzian_envelope(detuning: float, mb: float) -> float:
    """Resonant response suppression (mB)^2 / ((mB)^2 + detuning^2)."""
    if mb <= 0:
        raise ValueError(f"mb must be positive, got {mb}")
    return mb**2 / (mb**2 + detuning**2)


def crowding_sum(n_terms: int = 1_000_000, start: int = 1) -> float:
    """Direct summation of the off-resonant pileup sum_{n} 1 / (1 + n^2).

    With gaps spaced by one bucket, bucket n away is suppressed by
    1 / (1 + n^2); the sum converging to an O(1) constant is what keeps
    multi-resonant crowding harmless.  ``start`` selects the first bucket
    counted (start=2 measures the pileup beyond the nearest bucket).
    """
    n = np.arange(start, start + n_terms, dtype=float)
    return float(np.sum(1.0 / (1.0 + n * n)))
