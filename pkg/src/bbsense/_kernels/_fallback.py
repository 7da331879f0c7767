"""Pure-numpy implementations of the hot kernels.

Mirrors bbsense._kernels._core exactly; used when the compiled extension
is unavailable or when BBSENSE_PURE_PYTHON=1.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ghz_stats", "detection_series"]


def ghz_stats(u: np.ndarray, m: int) -> tuple[complex, np.ndarray]:
    """Survival amplitude and diagonal-string populations of the probe.

    amplitude = (1/d) sum_ij u[i, j]^m and populations[i] =
    (1/d) |sum_j u[i, j]^m|^2.
    """
    d = u.shape[0]
    zm = u ** m
    rows = zm.sum(axis=1)
    amplitude = rows.sum() / d
    populations = np.abs(rows) ** 2 / d
    return complex(amplitude), populations


def detection_series(
    lam: np.ndarray,
    b3: np.ndarray,
    w: np.ndarray,
    e: np.ndarray,
    evecs: np.ndarray,
    omega: float,
    m: int,
    t_grid: np.ndarray,
    stop_threshold: float | None = None,
    stop_on_l1: bool = False,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Detection probability and L1 statistic along a time grid.

    Rebuilds the interaction-picture propagator at each time from the
    cached Floquet eigendecomposition pieces (see FloquetSolution) and
    reduces it to GHZ readout statistics.  With a stop_threshold, the scan
    ends at the first grid point where the stopping statistic (p_det, or
    the L1 statistic when stop_on_l1 is set) reaches it.

    Returns:
        (p_det, l1, n_evaluated); the arrays have length n_evaluated.
    """
    d = evecs.shape[0]
    nt = len(t_grid)
    p_det = np.empty(nt)
    l1 = np.empty(nt)
    n_eval = 0
    for idx in range(nt):
        t = t_grid[idx]
        xi = np.exp(-1j * lam * t)
        phase = np.exp(1j * omega * t)
        a = phase * b3[0] + b3[1] + b3[2] / phase
        m1 = a @ (xi[:, None] * w)
        m1 *= np.exp(1j * e * t)[:, None]
        u = evecs @ m1
        amp, pops = ghz_stats(u, m)
        p = 1.0 - abs(amp) ** 2
        p_det[idx] = min(max(p, 0.0), 1.0)
        l1[idx] = np.abs(pops - 1.0 / d).sum()
        n_eval = idx + 1
        if stop_threshold is not None:
            stat = l1[idx] if stop_on_l1 else p_det[idx]
            if stat >= stop_threshold:
                break
    return p_det[:n_eval], l1[:n_eval], n_eval
