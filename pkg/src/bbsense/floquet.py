"""Propagators for a register driven by a single cosine tone.

The workhorse is a three-harmonic Floquet truncation: the time-periodic
Hamiltonian G + b cos(omega t) Z is lifted to a static (3d) x (3d) block
matrix over Fourier modes k in {+1, 0, -1}, diagonalized once, and the
physical propagator is reconstructed at any time from the evolved k = 0
block column.  Valid for weak drives (b << omega); the truncation error
scales as (b / omega)^2.

A first-order product-formula propagator is included for step-size error
studies; it is deliberately independent of the Floquet machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import ControlInstance

__all__ = [
    "DriveParams",
    "FloquetSolution",
    "PropagatorSample",
    "TrotterScan",
    "assemble_floquet",
    "propagate",
    "propagate_grid",
    "trotter_propagator",
    "trotter_error_scan",
]

#: Reject drives beyond this fraction of the carrier by default; the
#: three-harmonic truncation degrades as (b_eff / omega)^2.
DEFAULT_MAX_DRIVE_RATIO = 0.05


@dataclass(frozen=True)
class DriveParams:
    """Single-tone drive seen by one register (phase fixed to zero)."""

    b_eff: float
    omega: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.b_eff < 0:
            raise ValueError(f"b_eff must be >= 0, got {self.b_eff}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


@dataclass(frozen=True)
class FloquetSolution:
    """Eigendecomposition of the truncated Floquet matrix, plus caches.

    The caches (w, b3) let the propagator at any time be assembled from
    phase factors and two small matrix products:

        u_phys(t) = sum_k exp(i k omega t) V_k diag(exp(-i lam t)) w
        u_int(t)  = exp(+i G t) u_phys(t)

    where V_k is the k-sector row block of the eigenvector matrix, w is
    the adjoint eigenvector matrix applied to the k = 0 injector, and
    b3[k] = E+ V_k folds in the eigenbasis of G.
    """

    instance: ControlInstance
    drive: DriveParams
    d: int
    f_matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    w: np.ndarray = field(repr=False)
    b3: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PropagatorSample:
    """Propagator blocks at one time.

    u_phys = exp(+i omega t) y_plus + y_zero + exp(-i omega t) y_minus and
    u_int = exp(+i G t) u_phys, so that u_int is the identity whenever the
    drive is off.
    """

    t: float
    y_plus: np.ndarray
    y_zero: np.ndarray
    y_minus: np.ndarray
    u_phys: np.ndarray
    u_int: np.ndarray


def assemble_floquet(
    instance: ControlInstance,
    drive: DriveParams,
    max_drive_ratio: float = DEFAULT_MAX_DRIVE_RATIO,
) -> FloquetSolution:
    """Build and diagonalize the three-harmonic Floquet matrix.

    Block layout (modes +1, 0, -1 top to bottom): diagonal blocks
    G + omega, G, G - omega; first off-diagonals (b_eff / 2) Z; corners 0.

    Args:
        instance: control Hamiltonian register.
        drive: tone parameters; b_eff / omega must not exceed
            max_drive_ratio.
        max_drive_ratio: override for the weak-drive guard.
    """
    if drive.b_eff / drive.omega > max_drive_ratio:
        raise ValueError(
            f"drive too strong for the three-harmonic truncation: "
            f"b_eff/omega = {drive.b_eff / drive.omega:.3g} > {max_drive_ratio}"
        )
    d = instance.d
    g = instance.g_single
    half_z = np.diag(drive.b_eff / 2.0 * instance.z_diag).astype(complex)
    eye = np.eye(d)
    f = np.zeros((3 * d, 3 * d), dtype=complex)
    f[:d, :d] = g + drive.omega * eye
    f[d : 2 * d, d : 2 * d] = g
    f[2 * d :, 2 * d :] = g - drive.omega * eye
    f[:d, d : 2 * d] = half_z
    f[d : 2 * d, :d] = half_z
    f[d : 2 * d, 2 * d :] = half_z
    f[2 * d :, d : 2 * d] = half_z
    try:
        eigvals, eigvecs = np.linalg.eigh(f)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "Floquet eigensolver failed; "
            f"||F|| = {np.linalg.norm(f):.3e}, "
            f"hermiticity defect = {np.linalg.norm(f - f.conj().T):.3e}"
        ) from exc
    # w = V+ applied to the k = 0 block injector [0; I; 0].
    w = eigvecs[d : 2 * d, :].conj().T.copy()
    e_dag = instance.eigvecs.conj().T
    b3 = np.stack(
        [
            e_dag @ eigvecs[:d, :],
            e_dag @ eigvecs[d : 2 * d, :],
            e_dag @ eigvecs[2 * d :, :],
        ]
    )
    return FloquetSolution(
        instance=instance,
        drive=drive,
        d=d,
        f_matrix=f,
        eigvals=eigvals,
        eigvecs=eigvecs,
        w=w,
        b3=b3,
    )


def propagate(sol: FloquetSolution, t: float) -> PropagatorSample:
    """Reconstruct the physical and interaction-picture propagators at t."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    d = sol.d
    y = sol.eigvecs @ (np.exp(-1j * sol.eigvals * t)[:, None] * sol.w)
    y_plus, y_zero, y_minus = y[:d], y[d : 2 * d], y[2 * d :]
    phase = np.exp(1j * sol.drive.omega * t)
    u_phys = phase * y_plus + y_zero + y_minus / phase
    inst = sol.instance
    u_int = inst.eigvecs @ (
        np.exp(1j * inst.eigvals * t)[:, None] * (inst.eigvecs.conj().T @ u_phys)
    )
    return PropagatorSample(
        t=t, y_plus=y_plus, y_zero=y_zero, y_minus=y_minus, u_phys=u_phys, u_int=u_int
    )


def propagate_grid(sol: FloquetSolution, t_grid: np.ndarray) -> list[PropagatorSample]:
    """Propagator samples over an ascending time grid, one decomposition."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        return []
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    if t_grid[0] < 0:
        raise ValueError("times must be >= 0")
    return [propagate(sol, float(t)) for t in t_grid]


def _expm_from_eigh(eigvals: np.ndarray, eigvecs: np.ndarray, scale: complex) -> np.ndarray:
    """exp(scale * H) for Hermitian H given its eigendecomposition."""
    return eigvecs @ (np.exp(scale * eigvals)[:, None] * eigvecs.conj().T)


def trotter_propagator(
    instance: ControlInstance, drive: DriveParams, t_final: float, dt: float
) -> np.ndarray:
    """First-order product-formula propagator with step size dt.

    Each step applies exp(-i G dt) exp(-i b cos(omega t_k) Z dt) with
    t_k = k dt, both factors exact (G through its eigensystem, Z
    diagonal).  A non-integer t_final / dt is handled by shrinking the
    final step so t_final is hit exactly.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_final < dt:
        raise ValueError(f"t_final must be >= dt, got t_final={t_final}, dt={dt}")
    d = instance.d
    n_full = int(t_final / dt)
    remainder = t_final - n_full * dt
    if remainder < 1e-12 * dt:
        remainder = 0.0
    exp_g = _expm_from_eigh(instance.eigvals, instance.eigvecs, -1j * dt)
    u = np.eye(d, dtype=complex)
    for k in range(n_full):
        c = drive.b_eff * np.cos(drive.omega * (k * dt))
        u = exp_g @ (np.exp(-1j * c * dt * instance.z_diag)[:, None] * u)
    if remainder > 0.0:
        c = drive.b_eff * np.cos(drive.omega * (n_full * dt))
        exp_g_last = _expm_from_eigh(instance.eigvals, instance.eigvecs, -1j * remainder)
        u = exp_g_last @ (np.exp(-1j * c * remainder * instance.z_diag)[:, None] * u)
    return u


@dataclass(frozen=True)
class TrotterScan:
    """Product-formula error versus step size, with a log-log slope fit."""

    entries: list[tuple[float, float]]
    slope: float | None
    degenerate: bool
    reference_dt: float


def trotter_error_scan(
    instance: ControlInstance,
    drive: DriveParams,
    t_final: float,
    dt_list: list[float],
    refine: int = 32,
) -> TrotterScan:
    """Operator-norm error of the product formula across a dt ladder.

    The reference is the same product formula at min(dt_list) / refine.
    When every error sits at roundoff (commuting generators), the slope
    is undefined and the scan is flagged degenerate.
    """
    dts = [float(x) for x in dt_list]
    if len(dts) < 3:
        raise ValueError(f"need at least 3 step sizes to fit a slope, got {len(dts)}")
    if any(b <= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dt_list must be strictly ascending")
    ref_dt = dts[0] / refine
    u_ref = trotter_propagator(instance, drive, t_final, ref_dt)
    entries = []
    for dt in dts:
        u = trotter_propagator(instance, drive, t_final, dt)
        entries.append((dt, float(np.linalg.norm(u - u_ref, ord=2))))
    errs = np.array([e for _, e in entries])
    degenerate = bool(np.all(errs <= 1e-10))
    slope = None
    if not degenerate:
        slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return TrotterScan(entries=entries, slope=slope, degenerate=degenerate, reference_dt=ref_dt)
