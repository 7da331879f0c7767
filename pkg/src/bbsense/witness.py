"""Metrological witnesses: QFI, Bures angles, flatness, and the slope test.

These routines turn detection probabilities into geometry: the Bures angle
theta = arcsin(sqrt(p_det)) measures how far the signal has displaced the
probe state, theta^2 integrated over the band is a finite-displacement
stand-in for the band-integrated QFI, and a ceiling of the form C B T^2 on
that integral is what forces the square-root stopping-time law.

The two-time slope test discriminates linear from quadratic growth of the
integrated information and needs only O(log(1/delta)) shots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .control import BandSpec

__all__ = [
    "WitnessPoint",
    "FlatnessReport",
    "SlopeTestResult",
    "CeilingParams",
    "CeilingResult",
    "QfiEstimate",
    "bures_angle",
    "qfi_pure",
    "iqfi_quadrature",
    "iqfi_ceiling",
    "flatness_report",
    "two_time_test",
    "shot_budget",
    "slope_test_montecarlo",
]

#: Decision threshold on the estimated log-log slope: at or above, the
#: growth is called quadratic (signal present).  Midpoint of 1 and 2.
SLOPE_THRESHOLD = 1.5


def bures_angle(p_det: float) -> float:
    """Geodesic angle arcsin(sqrt(p_det)) between probe and reference."""
    if p_det < -1e-12 or p_det > 1.0 + 1e-12:
        raise ValueError(f"p_det must lie in [0, 1], got {p_det}")
    return float(np.arcsin(np.sqrt(np.clip(p_det, 0.0, 1.0))))


@dataclass(frozen=True)
class WitnessPoint:
    """Detection probability at one carrier frequency, plus its geometry."""

    omega: float
    p_det: float
    theta: float
    s_density: float

    @classmethod
    def from_p_det(cls, omega: float, p_det: float) -> "WitnessPoint":
        theta = bures_angle(p_det)
        return cls(omega=omega, p_det=p_det, theta=theta, s_density=theta**2)


@dataclass(frozen=True)
class QfiEstimate:
    """Finite-difference pure-state QFI with a step-halving check."""

    value: float
    value_coarse: float
    rel_change: float


def qfi_pure(
    states_at: Callable[[float], np.ndarray], b: float, db: float
) -> QfiEstimate:
    """Pure-state QFI 4 (<d psi|d psi> - |<psi|d psi>|^2) at amplitude b.

    The derivative is a central difference with step db; the returned value
    uses db / 2 and reports the relative change from the db estimate as a
    convergence gate.

    Raises:
        ValueError: if any sampled state is not normalized to 1e-8.
    """
    if db <= 0:
        raise ValueError(f"db must be positive, got {db}")

    def _qfi(step: float) -> float:
        psi = np.asarray(states_at(b), dtype=complex)
        psi_p = np.asarray(states_at(b + step), dtype=complex)
        psi_m = np.asarray(states_at(b - step), dtype=complex)
        for v in (psi, psi_p, psi_m):
            norm = np.linalg.norm(v)
            if abs(norm - 1.0) > 1e-8:
                raise ValueError(f"state not normalized: |psi| = {norm!r}")
        dpsi = (psi_p - psi_m) / (2.0 * step)
        return float(
            4.0 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)
        )

    coarse = _qfi(db)
    fine = _qfi(db / 2.0)
    denom = max(abs(fine), 1e-300)
    return QfiEstimate(value=fine, value_coarse=coarse, rel_change=abs(fine - coarse) / denom)


def iqfi_quadrature(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoid integral of QFI samples (omega, J) over the band."""
    if len(points) < 2:
        raise ValueError(f"need at least 2 quadrature points, got {len(points)}")
    omegas = np.array([p[0] for p in points], dtype=float)
    js = np.array([p[1] for p in points], dtype=float)
    if np.any(np.diff(omegas) <= 0):
        raise ValueError("omega grid must be strictly ascending")
    return float(np.sum(np.diff(omegas) * (js[1:] + js[:-1]) / 2.0))


@dataclass(frozen=True)
class CeilingParams:
    """Protocol-dependent constants of the discretization bound."""

    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self) -> None:
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("ceiling constants must be positive")


@dataclass(frozen=True)
class CeilingResult:
    """Integrated-QFI bound pieces: value at dt, optimal dt, and ceiling."""

    k_bound_at_dt: float | None
    dt_star: float
    k_ceiling: float
    c_effective: float


def iqfi_ceiling(
    params: CeilingParams, b: float, t_total: float, dt: float | None = None
) -> CeilingResult:
    """Evaluate the control-discretization bound on integrated QFI.

    The bound C1 T^2 / dt + C2 B^2 T^2 dt is minimized at
    dt* = sqrt(C1 / C2) / B, giving the ceiling 2 sqrt(C1 C2) B T^2.
    """
    if b <= 0 or t_total <= 0:
        raise ValueError("b and t_total must be positive")

    def bound(step: float) -> float:
        return params.c1 * t_total**2 / step + params.c2 * b**2 * t_total**2 * step

    dt_star = math.sqrt(params.c1 / params.c2) / b
    c_eff = 2.0 * math.sqrt(params.c1 * params.c2)
    return CeilingResult(
        k_bound_at_dt=bound(dt) if dt is not None else None,
        dt_star=dt_star,
        k_ceiling=c_eff * b * t_total**2,
        c_effective=c_eff,
    )


@dataclass(frozen=True)
class FlatnessReport:
    """Flatness certificate of the displacement density over the band.

    epsilon_t bounds the relative deviation of s_omega from its band mean;
    when epsilon_t < 1, a single-frequency observation pins the band
    integral within [1/(1+eps), 1/(1-eps)] times |band| s_omega
    (transfer_valid).  kfd is the finite-displacement witness
    (4 / B^2) * band integral of theta^2.
    """

    band_integral_s: float
    mean_s: float
    epsilon_t: float
    min_ratio: float
    kfd: float
    degenerate: bool
    transfer_valid: bool
    kfd_floor: float | None = None
    floor_satisfied: bool | None = None


def flatness_report(
    points: Sequence[WitnessPoint],
    band: BandSpec,
    b: float,
    p_floor: float | None = None,
) -> FlatnessReport:
    """Certify spectral flatness from witness points across the band.

    Args:
        points: at least 8 points with ascending omega spanning the band.
        band: the band the points were sampled over.
        b: displacement amplitude used when collecting the points.
        p_floor: optional detection-probability floor; when given, the
            report also checks kfd >= (4 theta_0^2 / b^2) |band|.
    """
    if len(points) < 8:
        raise ValueError(f"need at least 8 grid points, got {len(points)}")
    if b <= 0:
        raise ValueError(f"b must be positive, got {b}")
    omegas = np.array([p.omega for p in points])
    s = np.array([p.s_density for p in points])
    if np.any(np.diff(omegas) <= 0):
        raise ValueError("witness points must be sorted by omega")
    integral = float(np.sum(np.diff(omegas) * (s[1:] + s[:-1]) / 2.0))
    mean_s = integral / band.delta_omega
    kfd = 4.0 / b**2 * integral
    if mean_s == 0.0:
        return FlatnessReport(
            band_integral_s=0.0,
            mean_s=0.0,
            epsilon_t=np.inf,
            min_ratio=np.nan,
            kfd=0.0,
            degenerate=True,
            transfer_valid=False,
        )
    ratios = s / mean_s
    epsilon_t = float(np.max(np.abs(ratios - 1.0)))
    kfd_floor = None
    floor_ok = None
    if p_floor is not None:
        theta0 = bures_angle(p_floor)
        kfd_floor = 4.0 * theta0**2 / b**2 * band.delta_omega
        floor_ok = kfd >= kfd_floor
    return FlatnessReport(
        band_integral_s=integral,
        mean_s=mean_s,
        epsilon_t=epsilon_t,
        min_ratio=float(np.min(ratios)),
        kfd=kfd,
        degenerate=False,
        transfer_valid=epsilon_t < 1.0,
        kfd_floor=kfd_floor,
        floor_satisfied=floor_ok,
    )


@dataclass(frozen=True)
class SlopeTestResult:
    """Outcome of the two-time growth-exponent test."""

    alpha_hat: float
    decision: str  # "H0" or "H1"
    q: float
    n_shots: int | None
    error_bound: float | None


def two_time_test(
    k_hat_t: float,
    k_hat_qt: float,
    q: float,
    n_shots: int | None = None,
    c_test: float = 1.0,
) -> SlopeTestResult:
    """Threshold the estimated log-log slope between times T and qT.

    alpha_hat = log(K(qT) / K(T)) / log(q); at or above 3/2 the growth is
    called quadratic (H1).  The threshold comparison is inclusive.  When
    n_shots is given, the Hoeffding-style bound 2 exp(-c n log^2 q) is
    reported alongside.
    """
    if q <= 1.0:
        raise ValueError(f"time ratio q must exceed 1, got {q}")
    if k_hat_t <= 0 or k_hat_qt <= 0:
        raise ValueError("information estimates must be positive")
    alpha = math.log(k_hat_qt / k_hat_t) / math.log(q)
    bound = None
    if n_shots is not None:
        bound = 2.0 * math.exp(-c_test * n_shots * math.log(q) ** 2)
    return SlopeTestResult(
        alpha_hat=alpha,
        decision="H1" if alpha >= SLOPE_THRESHOLD else "H0",
        q=q,
        n_shots=n_shots,
        error_bound=bound,
    )


def shot_budget(q: float, delta_err: float, c_test: float = 1.0) -> int:
    """Shots per time point for error probability delta_err, at least 1."""
    if q <= 1.0:
        raise ValueError(f"time ratio q must exceed 1, got {q}")
    if not 0.0 < delta_err < 1.0:
        raise ValueError(f"delta_err must lie in (0, 1), got {delta_err}")
    if c_test <= 0:
        raise ValueError(f"c_test must be positive, got {c_test}")
    return max(1, math.ceil(math.log(1.0 / delta_err) / (c_test * math.log(q) ** 2)))


def slope_test_montecarlo(
    truth: str,
    n_shots: int,
    q: float,
    trials: int,
    noise: float = 0.2,
    t_base: float = 1.0,
    seed: int = 0,
) -> float:
    """Empirical error rate of the two-time test under bounded shot noise.

    Each trial draws n_shots per time point of K_true (1 + u) with u
    uniform in [-noise, +noise], averages them, and runs the slope test.
    Truth "H0" grows linearly in time, "H1" quadratically.

    Returns:
        Fraction of trials whose decision disagrees with the truth.
    """
    if truth not in ("H0", "H1"):
        raise ValueError(f"truth must be 'H0' or 'H1', got {truth!r}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    if not 0.0 <= noise < 1.0:
        raise ValueError(f"noise half-width must lie in [0, 1), got {noise}")
    power = 1.0 if truth == "H0" else 2.0
    k_t = t_base**power
    k_qt = (q * t_base) ** power
    rng = np.random.default_rng(seed)
    factors = 1.0 + noise * rng.uniform(-1.0, 1.0, size=(trials, 2, n_shots))
    k_hat = factors.mean(axis=2) * np.array([k_t, k_qt])
    errors = 0
    for i in range(trials):
        result = two_time_test(k_hat[i, 0], k_hat[i, 1], q, n_shots=n_shots)
        errors += result.decision != truth
    return errors / trials
