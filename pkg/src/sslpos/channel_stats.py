"""Channel statistics: path detection, delay/angle spreads, lognormal fits.

Works on per-BS CIR matrices of shape (n_port, n_delay). The port axis is
moved to the angle domain with a unitary DFT; with n_port bins the bin
angles are arcsin(2 k_signed / n_port) degrees, where k_signed is the
usual wrapped DFT frequency index (so a 4-port array resolves 0, +30,
-90, -30 degrees). The delay axis of a measured matrix is already in the
tap domain and is kept as is.

The azimuth spread is the power-weighted root mean SQUARE angle, with no
mean subtraction: sqrt(sum(theta^2 P) / sum(P)). A mean-centered variant
is available behind a toggle but is off by default, so the spread of a
link whose paths all sit at +30 degrees is 30, not 0. The delay spread is
the conventional RMS spread about the power-weighted mean delay.

Per-link sigma_DS / sigma_AS values are pooled over every (sample, BS)
link of a dataset and fitted with a base-10 lognormal law; those four
numbers are what the simulator consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel_sim import SimulatorParams
from .dataset import Dataset


class StatisticsError(ValueError):
    """Raised when a statistic is requested of degenerate input."""


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix F with F[k, p] = exp(-2j pi k p / n) / sqrt(n)."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dft_steering_vector(k: int, n: int) -> np.ndarray:
    """Port-domain basis vector concentrating all energy in angle bin k."""
    p = np.arange(n)
    return np.exp(2j * np.pi * k * p / n) / np.sqrt(n)


def bin_angles_deg(n_port: int) -> np.ndarray:
    """Azimuth (degrees) represented by each DFT bin of an n_port ULA at
    half-wavelength spacing; the Nyquist bin maps to -90."""
    k = np.arange(n_port)
    k_signed = np.where(k < (n_port + 1) // 2, k, k - n_port)
    if n_port % 2 == 0:
        k_signed[n_port // 2] = -n_port // 2
    return np.degrees(np.arcsin(2.0 * k_signed / n_port))


def to_angle_domain(cir_matrix: np.ndarray) -> np.ndarray:
    """Unitary DFT along the port axis of an (n_port, n_delay) matrix."""
    if cir_matrix.ndim != 2:
        raise ValueError("expected an (n_port, n_delay) matrix")
    return dft_matrix(cir_matrix.shape[0]) @ cir_matrix


@dataclass(frozen=True)
class PathEstimate:
    """One detected tap: index, absolute delay (s), linear power summed
    over ports, and the power-weighted angle-bin centroid (degrees)."""

    tap_index: int
    delay: float
    power: float
    angle_deg: float


def detect_multipaths(
    cir_matrix: np.ndarray, bandwidth: float, threshold_db: float = 25.0
) -> list[PathEstimate]:
    """Threshold detection of per-tap power.

    A tap is a path when its port-summed power is within threshold_db of
    the strongest tap. The per-path angle is the power centroid of the
    angle-domain bins at that tap. An all-zero matrix yields [].
    """
    power = np.sum(np.abs(cir_matrix) ** 2, axis=0)
    peak = power.max()
    if peak <= 0.0:
        return []
    ang = to_angle_domain(cir_matrix)
    ang_power = np.abs(ang) ** 2
    angles = bin_angles_deg(cir_matrix.shape[0])
    floor = peak * 10.0 ** (-threshold_db / 10.0)
    out = []
    for t in np.nonzero(power >= floor)[0]:
        w = ang_power[:, t]
        centroid = float((angles * w).sum() / w.sum())
        out.append(
            PathEstimate(
                tap_index=int(t),
                delay=float(t / bandwidth),
                power=float(power[t]),
                angle_deg=centroid,
            )
        )
    return out


def delay_spread(powers: np.ndarray, delays: np.ndarray) -> float:
    """RMS delay spread about the power-weighted mean delay, seconds."""
    powers = np.asarray(powers, dtype=np.float64)
    delays = np.asarray(delays, dtype=np.float64)
    if powers.size == 0:
        raise StatisticsError("delay spread of an empty path set")
    if np.any(powers < 0) or powers.sum() <= 0:
        raise StatisticsError("path powers must be non-negative with positive sum")
    total = powers.sum()
    mean = (delays * powers).sum() / total
    return float(np.sqrt((powers * (delays - mean) ** 2).sum() / total))


def angle_spread(
    powers: np.ndarray, angles_deg: np.ndarray, mean_centered: bool = False
) -> float:
    """Power-weighted RMS angle in degrees, second moment about zero.

    mean_centered subtracts the power-weighted mean angle first; it is
    off by default and exists only for comparison studies.
    """
    powers = np.asarray(powers, dtype=np.float64)
    angles = np.asarray(angles_deg, dtype=np.float64)
    if powers.size == 0:
        raise StatisticsError("angle spread of an empty path set")
    if np.any(powers < 0) or powers.sum() <= 0:
        raise StatisticsError("path powers must be non-negative with positive sum")
    total = powers.sum()
    if mean_centered:
        angles = angles - (angles * powers).sum() / total
    return float(np.sqrt((powers * angles ** 2).sum() / total))


def fit_lognormal(values: np.ndarray) -> tuple[float, float]:
    """Mean and population std of log10(values)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise StatisticsError("lognormal fit needs at least 2 values")
    if np.any(values <= 0):
        raise StatisticsError("lognormal fit needs strictly positive values")
    logs = np.log10(values)
    return float(logs.mean()), float(logs.std())


@dataclass(frozen=True)
class ChannelStatistics:
    """Fitted base-10 lognormal laws of the per-link spreads."""

    ds_log_mean: float
    ds_log_std: float
    as_log_mean: float
    as_log_std: float
    n_samples_used: int

    def to_dict(self) -> dict:
        return {
            "ds_log_mean": self.ds_log_mean,
            "ds_log_std": self.ds_log_std,
            "as_log_mean": self.as_log_mean,
            "as_log_std": self.as_log_std,
            "n_samples_used": self.n_samples_used,
        }


def extract_statistics(
    ds: Dataset, bandwidth: float, threshold_db: float = 25.0,
    mean_centered_as: bool = False,
) -> ChannelStatistics:
    """Pool per-link spreads over every (sample, BS) link and fit.

    Links with fewer than two detected paths are skipped, as are links
    whose spread comes out exactly zero (a single effective tap or bin);
    both are degenerate under a log-domain fit.
    """
    ds_values: list[float] = []
    as_values: list[float] = []
    for i in range(len(ds)):
        sample = np.asarray(ds.cirs[i], dtype=np.complex128)
        for b in range(sample.shape[0]):
            paths = detect_multipaths(sample[b], bandwidth, threshold_db)
            if len(paths) < 2:
                continue
            p = np.array([pe.power for pe in paths])
            tau = np.array([pe.delay for pe in paths])
            theta = np.array([pe.angle_deg for pe in paths])
            sigma_ds = delay_spread(p, tau)
            sigma_as = angle_spread(p, theta, mean_centered=mean_centered_as)
            if sigma_ds > 0.0:
                ds_values.append(sigma_ds)
            if sigma_as > 0.0:
                as_values.append(sigma_as)
    if len(ds_values) < 2 or len(as_values) < 2:
        raise StatisticsError(
            "not enough non-degenerate links to fit spread statistics"
        )
    ds_mean, ds_std = fit_lognormal(np.array(ds_values))
    as_mean, as_std = fit_lognormal(np.array(as_values))
    return ChannelStatistics(
        ds_log_mean=ds_mean,
        ds_log_std=ds_std,
        as_log_mean=as_mean,
        as_log_std=as_std,
        n_samples_used=len(ds),
    )


def update_simulator_params(
    base: SimulatorParams, stats: ChannelStatistics
) -> SimulatorParams:
    """Inject fitted spread laws into a parameter set, all else unchanged."""
    return replace(
        base,
        ds_log_mean=stats.ds_log_mean,
        ds_log_std=stats.ds_log_std,
        as_log_mean=stats.as_log_mean,
        as_log_std=stats.as_log_std,
    )
