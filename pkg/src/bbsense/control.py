"""Randomized multi-resonant control Hamiltonians.

A single register of dimension d = 2^n carries a two-band hopping
Hamiltonian (an SSH chain) whose interband transition frequencies tile a
target search band.  Conjugating by a Haar-random unitary scrambles the
eigenbasis so that the signal generator (the collective Z operator in the
computational basis) couples generically to every transition.

All frequencies and amplitudes are angular frequencies (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BandSpec",
    "SSHParams",
    "ControlInstance",
    "GapSpectrum",
    "CoverageReport",
    "TransversalityStats",
    "band_to_ssh_params",
    "build_ssh_matrix",
    "sample_haar_unitary",
    "make_control_instance",
    "make_commuting_instance",
    "transversality_stats",
    "gap_spectrum",
    "bucket_coverage",
    "default_weight_floor",
]


@dataclass(frozen=True)
class BandSpec:
    """Search band and problem parameters for one detection instance.

    Attributes:
        omega_min: lower band edge (rad/s).
        delta_omega: band width (rad/s).
        b_min: minimum detectable signal amplitude (rad/s).
        m: number of probe registers.
        r: dimensionless band-to-bucket ratio delta_omega / (m * b_min),
            computed on construction.
        bucket_width: m * b_min (rad/s), computed on construction.
    """

    omega_min: float
    delta_omega: float
    b_min: float
    m: int = 1
    r: float = field(init=False)
    bucket_width: float = field(init=False)

    def __post_init__(self) -> None:
        if self.omega_min <= 0:
            raise ValueError(f"omega_min must be positive, got {self.omega_min}")
        if self.delta_omega <= 0:
            raise ValueError(f"delta_omega must be positive, got {self.delta_omega}")
        if self.b_min <= 0:
            raise ValueError(f"b_min must be positive, got {self.b_min}")
        if self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if self.omega_min < self.b_min:
            raise ValueError(
                "outside the high-frequency regime: requires omega_min >= b_min, "
                f"got omega_min={self.omega_min}, b_min={self.b_min}"
            )
        object.__setattr__(self, "bucket_width", self.m * self.b_min)
        object.__setattr__(self, "r", self.delta_omega / self.bucket_width)

    @property
    def omega_max(self) -> float:
        return self.omega_min + self.delta_omega

    @classmethod
    def from_ratio(cls, omega_min: float, b_min: float, m: int, r: float) -> "BandSpec":
        """Build a band of width r * m * b_min."""
        return cls(omega_min=omega_min, delta_omega=r * m * b_min, b_min=b_min, m=m)


@dataclass(frozen=True)
class SSHParams:
    """Hopping parameters of the two-band control chain.

    The alternating hoppings are fixed by the band edges: with the lower
    (upper) half-edge a_half (b_half), t1 = (a_half + b_half) / 2 and
    t2 = (b_half - a_half) / 2, which places the two single-particle bands
    at +-[a_half, b_half] up to finite-size corrections.
    """

    L: int
    t1: float
    t2: float
    a_half: float
    b_half: float
    periodic: bool = True

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.a_half > 0 and not self.t1 > self.t2 > 0:
            raise ValueError(
                f"expected t1 > t2 > 0 for a_half > 0, got t1={self.t1}, t2={self.t2}"
            )

    @property
    def d(self) -> int:
        return 2 * self.L


def _nearest_power_of_two(x: float, minimum: int = 2) -> int:
    """Nearest power of two to x (linear distance, ties rounded up)."""
    if x <= minimum:
        return minimum
    lo = 1 << int(math.floor(math.log2(x)))
    hi = lo * 2
    d = hi if (hi - x) <= (x - lo) else lo
    return max(d, minimum)


def band_to_ssh_params(band: BandSpec) -> SSHParams:
    """Choose chain length and hoppings so the interband gaps span the band.

    The register dimension d = 2L is the nearest power of two to the
    bucket ratio r (ties up, minimum 2), making the gap count grow with
    the number of buckets.  Rejects bands narrower than one bucket, where
    the protocol degenerates to a single-resonance Rabi experiment.
    """
    if band.r < 1.0:
        raise ValueError(
            f"band narrower than one bucket (r={band.r:.3g} < 1); "
            "use a plain resonant protocol instead"
        )
    a_half = band.omega_min / 2.0
    b_half = (band.omega_min + band.delta_omega) / 2.0
    d = _nearest_power_of_two(band.r)
    return SSHParams(
        L=d // 2,
        t1=(a_half + b_half) / 2.0,
        t2=(b_half - a_half) / 2.0,
        a_half=a_half,
        b_half=b_half,
    )


def build_ssh_matrix(params: SSHParams) -> np.ndarray:
    """Single-particle hopping matrix of the alternating chain.

    Site ordering is (cell 0, A), (cell 0, B), (cell 1, A), ...  Bond t1
    couples the two sublattices within a cell, bond t2 couples cell n's B
    site to cell n+1's A site (wrapping around when periodic).  Bonds
    accumulate, so for L = 1 with periodic boundaries both couplings land
    on the same pair.
    """
    d = params.d
    g = np.zeros((d, d))
    for cell in range(params.L):
        a, b = 2 * cell, 2 * cell + 1
        g[a, b] += params.t1
        g[b, a] += params.t1
        nxt = (2 * cell + 2) % d
        if cell < params.L - 1 or params.periodic:
            g[b, nxt] += params.t2
            g[nxt, b] += params.t2
    return g


def sample_haar_unitary(d: int, seed: int) -> np.ndarray:
    """Draw a Haar-distributed d x d unitary, deterministic in the seed.

    Uses the standard construction: complex Ginibre sample, QR
    decomposition, then absorb the phases of R's diagonal into Q so the
    result is Haar rather than merely unitary.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def _collective_z_diagonal(n: int) -> np.ndarray:
    """Diagonal of sum-of-Z over n qubits: entry i is n - 2 * popcount(i)."""
    return np.array([n - 2 * bin(i).count("1") for i in range(1 << n)], dtype=float)


@dataclass(frozen=True)
class ControlInstance:
    """One register's engineered control Hamiltonian and signal generator.

    Attributes:
        band: the band this instance was built for.
        ssh: hopping parameters.
        d: register dimension (power of two).
        n: qubit count, log2(d).
        g_ssh: d x d real symmetric hopping matrix.
        u_conj: d x d conjugating unitary.
        g_single: u_conj @ g_ssh @ u_conj+, Hermitian.
        eigvals: eigenvalues of g_single, ascending.
        eigvecs: columns are the matching eigenvectors.
        z_diag: diagonal of the signal generator in the computational
            basis (the full operator is diag(z_diag)).
        seed: seed used for the unitary draw.
    """

    band: BandSpec
    ssh: SSHParams
    d: int
    n: int
    g_ssh: np.ndarray
    u_conj: np.ndarray
    g_single: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    z_diag: np.ndarray
    seed: int

    @property
    def z_single(self) -> np.ndarray:
        """Signal generator as a dense d x d matrix."""
        return np.diag(self.z_diag)

    def z_in_eigenbasis(self) -> np.ndarray:
        """Matrix elements <psi_i| Z |psi_j> of the signal generator."""
        return self.eigvecs.conj().T @ (self.z_diag[:, None] * self.eigvecs)


def make_control_instance(
    band: BandSpec, seed: int, u_override: np.ndarray | None = None
) -> ControlInstance:
    """Construct the conjugated control Hamiltonian for one register.

    Args:
        band: search band parameters.
        seed: 64-bit seed for the Haar draw.
        u_override: test hook; when given, used in place of the Haar
            sample (e.g. the identity to keep the bare chain basis).
    """
    ssh = band_to_ssh_params(band)
    g_ssh = build_ssh_matrix(ssh)
    d = ssh.d
    u = sample_haar_unitary(d, seed) if u_override is None else np.asarray(u_override)
    if u.shape != (d, d):
        raise ValueError(f"u_override must be {d} x {d}, got {u.shape}")
    g_single = u @ g_ssh @ u.conj().T
    g_single = (g_single + g_single.conj().T) / 2.0  # scrub roundoff asymmetry
    eigvals, eigvecs = np.linalg.eigh(g_single)
    n = d.bit_length() - 1
    return ControlInstance(
        band=band,
        ssh=ssh,
        d=d,
        n=n,
        g_ssh=g_ssh,
        u_conj=u,
        g_single=g_single,
        eigvals=eigvals,
        eigvecs=eigvecs,
        z_diag=_collective_z_diagonal(n),
        seed=seed,
    )


def make_commuting_instance(band: BandSpec, seed: int) -> ControlInstance:
    """Test hook: control diagonal in the computational basis.

    The control then commutes with the signal generator, which kills all
    product-formula error and all transitions; useful as a degenerate
    reference in error scans.
    """
    base = make_control_instance(band, seed, u_override=np.eye(band_to_ssh_params(band).d))
    g = np.diag(np.sort(np.linalg.eigvalsh(base.g_ssh)))
    eigvals, eigvecs = np.linalg.eigh(g)
    return ControlInstance(
        band=base.band,
        ssh=base.ssh,
        d=base.d,
        n=base.n,
        g_ssh=base.g_ssh,
        u_conj=base.u_conj,
        g_single=g,
        eigvals=eigvals,
        eigvecs=eigvecs,
        z_diag=base.z_diag,
        seed=seed,
    )


@dataclass
class TransversalityStats:
    """Sample statistics of eigenvector diagonals of the signal generator."""

    samples: np.ndarray
    sample_mean: float
    sample_var: float
    n_samples: int

    def tail_fraction(self, t: float) -> float:
        """Empirical fraction of samples with |X_i| >= t."""
        return float(np.mean(np.abs(self.samples) >= t))


def transversality_stats(
    instance: ControlInstance, n_eigvecs: int, z_override: np.ndarray | None = None
) -> TransversalityStats:
    """Diagonal matrix elements X_i = <psi_i| Z |psi_i> over fresh draws.

    Each Haar draw contributes d eigenvectors; enough instances are
    generated (seeds derived from the given instance's seed) to collect at
    least ``n_eigvecs`` samples.  For a Haar-random eigenbasis the X_i have
    mean 0 and variance n / (d + 1).

    Args:
        instance: defines the band, dimension, and base seed.
        n_eigvecs: number of eigenvector samples; at least 30.
        z_override: test hook; diagonal (length-d) replacing the collective
            Z diagonal, e.g. all ones to pin X_i = 1.
    """
    if n_eigvecs < 30:
        raise ValueError(f"need at least 30 eigenvectors, got {n_eigvecs}")
    d = instance.d
    z = instance.z_diag if z_override is None else np.asarray(z_override, dtype=float)
    n_draws = -(-n_eigvecs // d)
    root = np.random.SeedSequence(entropy=(int(instance.seed), 0x7261))
    seeds = root.generate_state(n_draws, dtype=np.uint64)
    samples = np.empty(n_draws * d)
    for k, s in enumerate(seeds):
        inst = make_control_instance(instance.band, int(s))
        # X_i = sum_b z_b |psi_i[b]|^2 for each eigenvector column.
        samples[k * d : (k + 1) * d] = z @ (np.abs(inst.eigvecs) ** 2)
    samples = samples[:n_eigvecs]
    return TransversalityStats(
        samples=samples,
        sample_mean=float(np.mean(samples)),
        sample_var=float(np.var(samples, ddof=1)),
        n_samples=n_eigvecs,
    )


@dataclass(frozen=True)
class GapSpectrum:
    """Transition frequencies and their drive weights, sorted ascending."""

    frequencies: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.frequencies)

    def qualifying(self, weight_floor: float) -> np.ndarray:
        """Frequencies of gaps with weight >= weight_floor."""
        return self.frequencies[self.weights >= weight_floor]


def gap_spectrum(instance: ControlInstance) -> GapSpectrum:
    """All positive eigenvalue gaps E_j - E_i with weights |<j| Z |i>|^2."""
    e = instance.eigvals
    zmat = instance.z_in_eigenbasis()
    i, j = np.triu_indices(instance.d, k=1)
    freqs = e[j] - e[i]
    weights = np.abs(zmat[j, i]) ** 2
    keep = freqs > 0
    freqs, weights = freqs[keep], weights[keep]
    order = np.argsort(freqs, kind="stable")
    return GapSpectrum(frequencies=freqs[order], weights=weights[order])


def default_weight_floor(spectrum: GapSpectrum, band: BandSpec) -> float:
    """One tenth of the median weight of in-band gaps (0 if none)."""
    in_band = (spectrum.frequencies >= band.omega_min) & (
        spectrum.frequencies <= band.omega_max
    )
    if not np.any(in_band):
        return 0.0
    return 0.1 * float(np.median(spectrum.weights[in_band]))


@dataclass(frozen=True)
class CoverageReport:
    """How well qualifying gaps tile the search band.

    max_detuning is the worst-case distance from any in-band frequency to
    the nearest gap above the weight floor.
    """

    n_buckets: int
    covered_fraction: float
    max_detuning: float
    weight_floor: float


def bucket_coverage(
    spectrum: GapSpectrum, band: BandSpec, weight_floor: float = 0.0
) -> CoverageReport:
    """Tile the band into ceil(r) buckets and check each holds a gap.

    A bucket counts as covered when at least one gap with weight >=
    weight_floor falls inside it.  With no qualifying gaps at all the
    report degenerates to zero coverage and max_detuning = delta_omega.
    """
    if weight_floor < 0:
        raise ValueError(f"weight_floor must be >= 0, got {weight_floor}")
    n_buckets = math.ceil(band.r)
    freqs = spectrum.qualifying(weight_floor)
    if len(freqs) == 0:
        return CoverageReport(
            n_buckets=n_buckets,
            covered_fraction=0.0,
            max_detuning=band.delta_omega,
            weight_floor=weight_floor,
        )
    lo, hi = band.omega_min, band.omega_max
    edges = np.linspace(lo, hi, n_buckets + 1)
    idx = np.searchsorted(edges, freqs, side="right") - 1
    idx = idx[(idx >= 0) & (idx < n_buckets)]
    covered = len(np.unique(idx)) / n_buckets

    # sup over omega in band of the distance to the nearest qualifying gap:
    # attained at a band edge or midway between adjacent gaps.
    fs = np.sort(freqs)
    candidates = [lo, hi]
    mids = (fs[1:] + fs[:-1]) / 2.0
    candidates.extend(mids[(mids > lo) & (mids < hi)])
    cand = np.array(candidates)
    pos = np.searchsorted(fs, cand)
    left = np.where(pos > 0, np.abs(cand - fs[np.maximum(pos - 1, 0)]), np.inf)
    right = np.where(pos < len(fs), np.abs(fs[np.minimum(pos, len(fs) - 1)] - cand), np.inf)
    max_det = float(np.max(np.minimum(left, right)))
    return CoverageReport(
        n_buckets=n_buckets,
        covered_fraction=float(covered),
        max_detuning=max_det,
        weight_floor=weight_floor,
    )
