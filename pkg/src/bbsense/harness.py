"""Stopping-time experiments over (m, b_min, r) grids.

Each sample of a cell draws a carrier frequency uniformly from the band
and a fresh control instance, then records the first time the GHZ L1
statistic crosses the detection threshold.  Cell means are fitted against
the predicted scale X = sqrt(delta_omega) / (m b_min)^(3/2) |on a log-log
axis; the protocol working means unit slope.

Every sample is a pure function of (config, cell, sample_index): seeds are
derived from the cell's parameter values, never from its position, so
results are independent of cell order and of the parallelism degree.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels, __version__
from .control import BandSpec, make_control_instance
from .floquet import DEFAULT_MAX_DRIVE_RATIO, DriveParams, assemble_floquet, propagate
from .ghz import ghz_readout
from .witness import FlatnessReport, WitnessPoint, flatness_report

__all__ = [
    "TGridPolicy",
    "CellSpec",
    "SweepConfig",
    "StoppingResult",
    "ScalingPoint",
    "ScalingFit",
    "ScalingDataset",
    "run_instance",
    "run_sweep",
    "flatness_scan",
    "persist",
    "load_dataset",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["cell_id", "m", "b_min", "delta_omega", "x_value", "t_mean", "t_std", "n_valid"]


@dataclass(frozen=True)
class TGridPolicy:
    """Geometric stopping grid relative to the Rabi scale sqrt(N)/(m b).

    The grid runs from t_min_scale to t_max_scale times the reference
    scale, with successive points separated by the growth factor.
    Crossings empirically land below 1.5x the reference scale, so the 6x
    ceiling leaves headroom for slow outliers while staying inside the
    weak-drive validity window of the propagator.
    """

    t_min_scale: float = 0.02
    growth: float = 1.05
    t_max_scale: float = 6.0

    def __post_init__(self) -> None:
        if not 0 < self.t_min_scale < self.t_max_scale:
            raise ValueError("need 0 < t_min_scale < t_max_scale")
        if self.growth <= 1.0:
            raise ValueError(f"growth factor must exceed 1, got {self.growth}")

    def build(self, band: BandSpec) -> np.ndarray:
        t_ref = math.sqrt(math.ceil(band.r)) / (band.m * band.b_min)
        t_min = self.t_min_scale * t_ref
        t_max = self.t_max_scale * t_ref
        n = int(math.ceil(math.log(t_max / t_min) / math.log(self.growth))) + 1
        grid = t_min * self.growth ** np.arange(n)
        return grid[grid <= t_max * (1 + 1e-12)]


@dataclass(frozen=True)
class CellSpec:
    """One sweep cell: register count, amplitude floor, bucket ratio."""

    m: int
    b_min: float
    r: float

    @property
    def cell_id(self) -> str:
        return f"m{self.m}-r{self.r:g}-b{self.b_min:.6g}"

    def band(self, omega_min: float) -> BandSpec:
        return BandSpec.from_ratio(omega_min=omega_min, b_min=self.b_min, m=self.m, r=self.r)


@dataclass(frozen=True)
class SweepConfig:
    """Full description of a stopping-time sweep.

    The stopping statistic defaults to the projective deviation
    probability p_det: its onset is quadratic in time for every register
    count, whereas the population L1 statistic has a first-order
    interference term at m = 1 that stops far too early and flattens the
    scaling.  "l1" remains available for comparison runs.
    """

    omega_min: float
    cells: tuple[CellSpec, ...]
    n_samples: int = 8
    threshold: float = 0.1
    statistic: str = "p_det"
    t_grid: TGridPolicy = TGridPolicy()
    seed_root: int = 20260811
    unit_convention: str = "rad"
    max_drive_ratio: float = DEFAULT_MAX_DRIVE_RATIO

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if self.statistic not in ("p_det", "l1"):
            raise ValueError(f"statistic must be 'p_det' or 'l1', got {self.statistic!r}")
        if not self.cells:
            raise ValueError("sweep needs at least one cell")
        for cell in self.cells:
            if cell.r < 4:
                raise ValueError(
                    f"cell {cell.cell_id}: r must be >= 4 to stay in the broadband "
                    "regime delta_omega >> m b_min"
                )
            cell.band(self.omega_min)  # validates BandSpec invariants

    @classmethod
    def default(cls, seed_root: int = 20260811) -> "SweepConfig":
        """Desk-scale grid spanning over a decade of the predicted scale.

        The amplitude levels span a full decade; the upper one stays at
        3e-3 of the band edge so the weak-drive truncation error remains
        well below the stopping threshold.
        """
        omega_min = 2.0 * math.pi * 1e8
        cells = tuple(
            CellSpec(m=m, b_min=rel * omega_min, r=r)
            for m in (1, 2)
            for r in (8, 16, 32, 64)
            for rel in (3e-4, 3e-3)
        )
        return cls(omega_min=omega_min, cells=cells, seed_root=seed_root)

    def to_dict(self) -> dict:
        return {
            "omega_min": float(self.omega_min),
            "cells": [
                {"m": c.m, "b_min": float(c.b_min), "r": float(c.r)} for c in self.cells
            ],
            "n_samples": self.n_samples,
            "threshold": float(self.threshold),
            "statistic": self.statistic,
            "t_grid": asdict(self.t_grid),
            "seed_root": int(self.seed_root),
            "unit_convention": self.unit_convention,
            "max_drive_ratio": float(self.max_drive_ratio),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        cells = tuple(
            CellSpec(m=int(c["m"]), b_min=float(c["b_min"]), r=float(c["r"]))
            for c in data["cells"]
        )
        return cls(
            omega_min=float(data["omega_min"]),
            cells=cells,
            n_samples=int(data.get("n_samples", 8)),
            threshold=float(data.get("threshold", 0.1)),
            statistic=data.get("statistic", "p_det"),
            t_grid=TGridPolicy(**data.get("t_grid", {})),
            seed_root=int(data.get("seed_root", 20260811)),
            unit_convention=data.get("unit_convention", "rad"),
            max_drive_ratio=float(data.get("max_drive_ratio", DEFAULT_MAX_DRIVE_RATIO)),
        )


def _cell_entropy(seed_root: int, cell: CellSpec, sample_index: int) -> tuple[int, ...]:
    # Keyed on parameter values (not grid position) so permuting cells
    # cannot change any sample's result.
    b_bits = int(np.float64(cell.b_min).view(np.uint64))
    r_bits = int(np.float64(cell.r).view(np.uint64))
    return (int(seed_root), cell.m, b_bits, r_bits, int(sample_index))


@dataclass(frozen=True)
class StoppingResult:
    """Outcome of one sensing instance."""

    cell_id: str
    sample_index: int
    omega: float
    seed: int
    stop_time: float | None
    final_l1: float
    grid_exhausted: bool

    def to_dict(self) -> dict:
        return {
            "cell_id": self.cell_id,
            "sample_index": self.sample_index,
            "omega": float(self.omega),
            "seed": int(self.seed),
            "stop_time": None if self.stop_time is None else float(self.stop_time),
            "final_l1": float(self.final_l1),
            "grid_exhausted": self.grid_exhausted,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StoppingResult":
        return cls(
            cell_id=data["cell_id"],
            sample_index=int(data["sample_index"]),
            omega=float(data["omega"]),
            seed=int(data["seed"]),
            stop_time=None if data["stop_time"] is None else float(data["stop_time"]),
            final_l1=float(data["final_l1"]),
            grid_exhausted=bool(data["grid_exhausted"]),
        )


def run_instance(
    config: SweepConfig, cell: CellSpec, sample_index: int, b_signal: float | None = None
) -> StoppingResult:
    """Run one stopping-time instance; deterministic in its arguments.

    Args:
        config: sweep-level settings (omega_min, threshold, grid policy).
        cell: which (m, b_min, r) cell to sample.
        sample_index: index within the cell; seeds derive from it.
        b_signal: test hook for the injected amplitude; defaults to the
            cell's b_min, and 0 simulates the no-signal hypothesis.
    """
    band = cell.band(config.omega_min)
    ss = np.random.SeedSequence(entropy=_cell_entropy(config.seed_root, cell, sample_index))
    state = ss.generate_state(2, dtype=np.uint64)
    seed = int(state[0])
    omega = float(
        np.random.default_rng(int(state[1])).uniform(band.omega_min, band.omega_max)
    )
    b = cell.b_min if b_signal is None else b_signal
    instance = make_control_instance(band, seed)
    sol = assemble_floquet(
        instance, DriveParams(b_eff=b, omega=omega), max_drive_ratio=config.max_drive_ratio
    )
    t_grid = config.t_grid.build(band)
    p_det, l1, n_eval = _kernels.detection_series(
        sol.eigvals,
        sol.b3,
        sol.w,
        instance.eigvals,
        instance.eigvecs,
        omega,
        cell.m,
        t_grid,
        stop_threshold=config.threshold,
        stop_on_l1=config.statistic == "l1",
    )
    final_stat = l1[n_eval - 1] if config.statistic == "l1" else p_det[n_eval - 1]
    crossed = final_stat >= config.threshold
    return StoppingResult(
        cell_id=cell.cell_id,
        sample_index=sample_index,
        omega=omega,
        seed=seed,
        stop_time=float(t_grid[n_eval - 1]) if crossed else None,
        final_l1=float(l1[n_eval - 1]),
        grid_exhausted=not crossed,
    )


@dataclass(frozen=True)
class ScalingPoint:
    """Aggregated stopping-time statistics for one cell."""

    cell_id: str
    m: int
    b_min: float
    delta_omega: float
    r: float
    x_value: float
    t_mean: float | None
    t_std: float | None
    n_valid: int
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "cell_id": self.cell_id,
            "m": self.m,
            "b_min": float(self.b_min),
            "delta_omega": float(self.delta_omega),
            "r": float(self.r),
            "x_value": float(self.x_value),
            "t_mean": None if self.t_mean is None else float(self.t_mean),
            "t_std": None if self.t_std is None else float(self.t_std),
            "n_valid": self.n_valid,
            "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingPoint":
        return cls(
            cell_id=data["cell_id"],
            m=int(data["m"]),
            b_min=float(data["b_min"]),
            delta_omega=float(data["delta_omega"]),
            r=float(data["r"]),
            x_value=float(data["x_value"]),
            t_mean=None if data["t_mean"] is None else float(data["t_mean"]),
            t_std=None if data["t_std"] is None else float(data["t_std"]),
            n_valid=int(data["n_valid"]),
            n_samples=int(data["n_samples"]),
        )


@dataclass(frozen=True)
class ScalingFit:
    """OLS fit of log t_mean against log x_value."""

    slope: float
    intercept: float
    residual_rms: float
    n_points: int
    slope_stderr: float

    def to_dict(self) -> dict:
        return {
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "residual_rms": float(self.residual_rms),
            "n_points": self.n_points,
            "slope_stderr": float(self.slope_stderr),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingFit":
        return cls(
            slope=float(data["slope"]),
            intercept=float(data["intercept"]),
            residual_rms=float(data["residual_rms"]),
            n_points=int(data["n_points"]),
            slope_stderr=float(data["slope_stderr"]),
        )


@dataclass(frozen=True)
class ScalingDataset:
    """Sweep output: per-cell points, raw samples, fit, and metadata."""

    config: SweepConfig
    points: tuple[ScalingPoint, ...]
    samples: tuple[StoppingResult, ...]
    fit: ScalingFit | None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "config": self.config.to_dict(),
            "points": [p.to_dict() for p in self.points],
            "samples": [s.to_dict() for s in self.samples],
            "fit": None if self.fit is None else self.fit.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingDataset":
        return cls(
            config=SweepConfig.from_dict(data["config"]),
            points=tuple(ScalingPoint.from_dict(p) for p in data["points"]),
            samples=tuple(StoppingResult.from_dict(s) for s in data["samples"]),
            fit=None if data["fit"] is None else ScalingFit.from_dict(data["fit"]),
            metadata=data["metadata"],
        )


def _x_value(cell: CellSpec, omega_min: float) -> float:
    band = cell.band(omega_min)
    return math.sqrt(band.delta_omega) / (cell.m * cell.b_min) ** 1.5


def _run_sample_task(args: tuple[SweepConfig, CellSpec, int]) -> StoppingResult:
    config, cell, idx = args
    return run_instance(config, cell, idx)


def _canonical_cells(config: SweepConfig) -> list[CellSpec]:
    return sorted(config.cells, key=lambda c: (c.m, c.b_min, c.r))


def run_sweep(config: SweepConfig, jobs: int = 1) -> ScalingDataset:
    """Evaluate every (cell, sample), aggregate, and fit the scaling law.

    Samples are independent tasks; with jobs > 1 they run in worker
    processes.  Aggregation happens in canonical (cell, sample) order, so
    the dataset is identical for any jobs value.
    """
    cells = _canonical_cells(config)
    tasks = [(config, cell, idx) for cell in cells for idx in range(config.n_samples)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_sample_task, tasks, chunksize=4))
    else:
        results = [_run_sample_task(t) for t in tasks]

    points = []
    for k, cell in enumerate(cells):
        cell_results = results[k * config.n_samples : (k + 1) * config.n_samples]
        stops = [r.stop_time for r in cell_results if r.stop_time is not None]
        n_valid = len(stops)
        if n_valid == 0:
            logger.warning("cell %s: no sample crossed the threshold", cell.cell_id)
            t_mean = t_std = None
        else:
            t_mean = float(np.mean(stops))
            t_std = float(np.std(stops, ddof=1)) if n_valid > 1 else 0.0
        band = cell.band(config.omega_min)
        points.append(
            ScalingPoint(
                cell_id=cell.cell_id,
                m=cell.m,
                b_min=cell.b_min,
                delta_omega=band.delta_omega,
                r=cell.r,
                x_value=_x_value(cell, config.omega_min),
                t_mean=t_mean,
                t_std=t_std,
                n_valid=n_valid,
                n_samples=config.n_samples,
            )
        )

    fit = fit_scaling(points)
    metadata = {
        "version": __version__,
        "seed_root": int(config.seed_root),
        "unit_convention": config.unit_convention,
        "threshold": float(config.threshold),
        "statistic": config.statistic,
        "kernel_backend": _kernels.BACKEND,
    }
    return ScalingDataset(
        config=config,
        points=tuple(points),
        samples=tuple(results),
        fit=fit,
        metadata=metadata,
    )


def fit_scaling(points: list[ScalingPoint]) -> ScalingFit | None:
    """OLS on (log x, log t_mean) over cells with at least 3 valid samples."""
    usable = [p for p in points if p.n_valid >= 3 and p.t_mean is not None]
    if len(usable) < 2:
        return None
    logx = np.log([p.x_value for p in usable])
    logt = np.log([p.t_mean for p in usable])
    slope, intercept = np.polyfit(logx, logt, 1)
    resid = logt - (slope * logx + intercept)
    n = len(usable)
    if n > 2:
        stderr = math.sqrt(
            float(resid @ resid) / (n - 2) / float(np.sum((logx - logx.mean()) ** 2))
        )
    else:
        stderr = 0.0
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n_points=n,
        slope_stderr=stderr,
    )


def flatness_scan(
    band: BandSpec,
    seed: int,
    b: float,
    t_eval: float | None = None,
    n_omega: int = 64,
    max_drive_ratio: float = DEFAULT_MAX_DRIVE_RATIO,
) -> tuple[FlatnessReport, list[WitnessPoint]]:
    """Probe p_det on a uniform frequency grid and certify flatness.

    Args:
        band: cell to scan (defines the instance and the grid span).
        seed: control-instance seed.
        b: injected amplitude; 0 produces the degenerate all-zero report.
        t_eval: evaluation time; defaults to the Rabi scale
            sqrt(N) / (m b).
        n_omega: grid size, at least 8.
    """
    if n_omega < 8:
        raise ValueError(f"need at least 8 frequency points, got {n_omega}")
    instance = make_control_instance(band, seed)
    if t_eval is None:
        if b <= 0:
            raise ValueError("t_eval must be given explicitly when b = 0")
        t_eval = math.sqrt(math.ceil(band.r)) / (band.m * b)
    points = []
    for omega in np.linspace(band.omega_min, band.omega_max, n_omega):
        sol = assemble_floquet(
            instance, DriveParams(b_eff=b, omega=float(omega)), max_drive_ratio
        )
        readout = ghz_readout(propagate(sol, t_eval).u_int, band.m)
        points.append(WitnessPoint.from_p_det(float(omega), readout.p_det))
    # b = 0 gives mean_s = 0; flatness_report flags it rather than divide.
    report = flatness_report(points, band, b if b > 0 else 1.0)
    if b <= 0:
        report = replace(report, degenerate=True, transfer_valid=False)
    return report, points


def persist(obj, path: str | Path, format: str = "json") -> Path:
    """Write a dataset (or report rows) to disk; returns the path written.

    JSON keeps the full record and round-trips exactly; CSV is the
    plot-ready per-cell table with the documented column order.
    """
    path = Path(path)
    try:
        if format == "json":
            if not isinstance(obj, ScalingDataset):
                raise TypeError(f"cannot persist {type(obj).__name__} as JSON")
            path.write_text(json.dumps(obj.to_dict(), indent=2) + "\n")
        elif format == "csv":
            if not isinstance(obj, ScalingDataset):
                raise TypeError(f"cannot persist {type(obj).__name__} as CSV")
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_COLUMNS)
                for p in obj.points:
                    writer.writerow(
                        [
                            p.cell_id,
                            p.m,
                            repr(p.b_min),
                            repr(p.delta_omega),
                            repr(p.x_value),
                            "" if p.t_mean is None else repr(p.t_mean),
                            "" if p.t_std is None else repr(p.t_std),
                            p.n_valid,
                        ]
                    )
        else:
            raise ValueError(f"unknown format {format!r} (expected 'json' or 'csv')")
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
    return path


def load_dataset(path: str | Path) -> ScalingDataset:
    """Reload a dataset persisted as JSON."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"failed reading {path}: {exc}") from exc
    return ScalingDataset.from_dict(data)
