"""Stochastic cluster-based channel simulator for an indoor factory hall.

The scenario is a rectangular hall with ceiling-mounted base stations (BSs)
on a regular grid. Each BS carries a small half-wavelength uniform linear
array whose broadside points along +x. A user terminal at a fixed height
measures one channel impulse response (CIR) per BS, stored as a complex
tensor of shape (n_bs, n_port, n_delay).

Per-link channels are drawn from a stochastic cluster model:

* a per-link RMS delay spread sigma_DS and azimuth spread sigma_AS are
  drawn from lognormal (base-10) distributions,
* cluster delays are exponential with scale r_tau * sigma_DS, shifted so
  the earliest cluster sits at zero excess delay and sorted ascending,
* cluster powers follow an exponential delay decay with per-cluster
  lognormal shadowing, normalized to unit total power,
* cluster departure angles are Gaussian around the geometric LOS azimuth,
  wrapped to (-180, 180] degrees,
* a line-of-sight link prepends a deterministic direct path whose power
  fraction is set by a Ricean K-factor.

LOS/NLOS is Bernoulli with P_LOS = exp(-d_2D / k) where k follows from the
clutter description (density, size, heights). Delays are excess delays
relative to the first arrival; the tap axis therefore always starts near
the strongest early paths, and absolute propagation delay is not encoded.
Cluster delays beyond the representable tap range carry exponentially
small power and are dropped (powers renormalized).

Fractional delays are mapped onto the tap grid with a truncated sinc
interpolation kernel. Pathloss is log-distance with a configurable
exponent, applied as an amplitude scale per link.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
import math

import numpy as np

from .dataset import Dataset

SPEED_OF_LIGHT = 299_792_458.0

# Leading tags keep the position stream and per-sample streams disjoint.
_POSITION_STREAM = 1
_SAMPLE_STREAM = 0


class ConfigurationError(ValueError):
    """Raised when a scenario or simulator configuration is inconsistent."""


class GenerationError(RuntimeError):
    """Raised when channel synthesis is asked for something unrepresentable."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Static deployment geometry and radio dimensioning.

    Defaults describe a 60 m x 120 m hall with 18 ceiling BSs on a 20 m
    grid at 8 m height, 4-port arrays, 3.5 GHz carrier, 100 MHz bandwidth
    (10 ns taps) and 64 delay taps.
    """

    hall_width: float = 60.0
    hall_length: float = 120.0
    bs_spacing: float = 20.0
    bs_height: float = 8.0
    ue_height: float = 1.5
    carrier_freq: float = 3.5e9
    bandwidth: float = 1.0e8
    n_bs: int = 18
    n_port: int = 4
    n_delay: int = 64
    clutter_density: float = 0.4
    clutter_height: float = 2.0
    clutter_size: float = 2.0

    @property
    def tap_spacing(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    def grid_shape(self) -> tuple[int, int]:
        """(columns along x, rows along y) implied by hall size and spacing."""
        cols = self.hall_width / self.bs_spacing
        rows = self.hall_length / self.bs_spacing
        if abs(cols - round(cols)) > 1e-9 or abs(rows - round(rows)) > 1e-9:
            raise ConfigurationError(
                f"bs_spacing {self.bs_spacing} does not tile hall "
                f"{self.hall_width} x {self.hall_length}"
            )
        return int(round(cols)), int(round(rows))

    def validate(self) -> None:
        if min(self.hall_width, self.hall_length, self.bs_spacing) <= 0:
            raise ConfigurationError("hall dimensions and bs_spacing must be positive")
        if self.bandwidth <= 0 or self.carrier_freq <= 0:
            raise ConfigurationError("carrier_freq and bandwidth must be positive")
        if self.n_port < 1 or self.n_delay < 1 or self.n_bs < 1:
            raise ConfigurationError("n_bs, n_port, n_delay must be at least 1")
        if not (0.0 < self.clutter_density < 1.0):
            raise ConfigurationError("clutter_density must lie strictly in (0, 1)")
        if not (self.ue_height < self.clutter_height < self.bs_height):
            raise ConfigurationError(
                "heights must satisfy ue_height < clutter_height < bs_height"
            )
        cols, rows = self.grid_shape()
        if cols * rows != self.n_bs:
            raise ConfigurationError(
                f"n_bs = {self.n_bs} but the {cols} x {rows} grid holds {cols * rows} BSs"
            )


@dataclass(frozen=True)
class Scenario:
    """Validated geometry: BS coordinates plus the per-BS port array."""

    config: ScenarioConfig
    bs_positions: np.ndarray      # (n_bs, 3) float64, meters
    port_offsets: np.ndarray      # (n_port,) float64, meters along the array (y) axis


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Validate the config and lay out the BS grid and port array.

    BSs sit at grid cell centers: x in {s/2, 3s/2, ...}, y likewise, at
    bs_height. Ports form a half-wavelength ULA along y (broadside +x),
    centered on the BS position.
    """
    config.validate()
    cols, rows = config.grid_shape()
    s = config.bs_spacing
    xs = s / 2.0 + s * np.arange(cols)
    ys = s / 2.0 + s * np.arange(rows)
    positions = np.array(
        [(x, y, config.bs_height) for x in xs for y in ys], dtype=np.float64
    )
    half = config.wavelength / 2.0
    offsets = (np.arange(config.n_port) - (config.n_port - 1) / 2.0) * half
    return Scenario(config=config, bs_positions=positions, port_offsets=offsets)


@dataclass(frozen=True)
class SimulatorParams:
    """Stochastic channel parameters around a scenario.

    ds_* and as_* give the base-10 lognormal law of the per-link RMS delay
    spread (seconds) and azimuth spread (degrees). los_k_override replaces
    the clutter-derived LOS decay length (meters) when set.
    """

    scenario: ScenarioConfig
    ds_log_mean: float
    ds_log_std: float
    as_log_mean: float
    as_log_std: float
    n_clusters: int = 25
    delay_scale_r_tau: float = 3.0
    per_cluster_shadow_std: float = 3.0   # dB
    los_k_override: float | None = None
    ricean_k_db: float = 7.0
    pathloss_exponent: float = 2.2
    sinc_half_width: int = 4

    def validate(self) -> None:
        self.scenario.validate()
        if self.ds_log_std < 0 or self.as_log_std < 0:
            raise ConfigurationError("lognormal stds must be non-negative")
        if self.n_clusters < 1:
            raise ConfigurationError("n_clusters must be at least 1")
        if self.delay_scale_r_tau <= 1.0:
            raise ConfigurationError("delay_scale_r_tau must exceed 1")
        if self.per_cluster_shadow_std < 0:
            raise ConfigurationError("per_cluster_shadow_std must be non-negative")
        if self.los_k_override is not None and self.los_k_override <= 0:
            raise ConfigurationError("los_k_override must be positive")
        if self.sinc_half_width < 1:
            raise ConfigurationError("sinc_half_width must be at least 1")


def default_simulator_params(scenario: ScenarioConfig | None = None) -> SimulatorParams:
    """Documented assumption set: 100 ns median delay spread, 30 deg median
    azimuth spread, moderate dispersion of both."""
    return SimulatorParams(
        scenario=scenario if scenario is not None else ScenarioConfig(),
        ds_log_mean=-7.0,
        ds_log_std=0.2,
        as_log_mean=math.log10(30.0),
        as_log_std=0.15,
    )


@dataclass(frozen=True)
class MultipathSet:
    """One link's paths: excess delays (s), unit-sum powers, departure
    azimuths (degrees, relative to array broadside), phases (rad)."""

    delays: np.ndarray
    powers: np.ndarray
    aods_deg: np.ndarray
    phases: np.ndarray
    los: bool

    def validate(self) -> None:
        n = self.delays.size
        if not (self.powers.size == self.aods_deg.size == self.phases.size == n):
            raise ValueError("path arrays must share one length")
        if n == 0:
            return
        if np.any(np.diff(self.delays) < 0):
            raise ValueError("delays must be sorted ascending")
        if np.any(self.powers <= 0):
            raise ValueError("path powers must be positive")
        if abs(self.powers.sum() - 1.0) > 1e-9:
            raise ValueError("path powers must sum to 1")


@dataclass(frozen=True)
class LinkGeometry:
    """Derived BS-to-UE geometry for one link."""

    d_2d: float
    d_3d: float
    aod_los_deg: float


def link_geometry(bs_position: np.ndarray, ue_position: np.ndarray) -> LinkGeometry:
    dx = float(ue_position[0] - bs_position[0])
    dy = float(ue_position[1] - bs_position[1])
    dz = float(ue_position[2] - bs_position[2])
    d2 = math.hypot(dx, dy)
    return LinkGeometry(
        d_2d=d2,
        d_3d=math.sqrt(d2 * d2 + dz * dz),
        aod_los_deg=math.degrees(math.atan2(dy, dx)),
    )


def los_decay_length(config: ScenarioConfig) -> float:
    """Clutter-derived decay length k of P_LOS = exp(-d_2D / k), meters."""
    return (
        -config.clutter_size
        / math.log(1.0 - config.clutter_density)
        * (config.bs_height - config.ue_height)
        / (config.clutter_height - config.ue_height)
    )


def draw_los_state(
    distance_2d: float,
    config: ScenarioConfig,
    rng: np.random.Generator,
    k_override: float | None = None,
) -> bool:
    """Bernoulli LOS draw with P_LOS = exp(-d_2D / k)."""
    if distance_2d < 0:
        raise ValueError("distance must be non-negative")
    k = k_override if k_override is not None else los_decay_length(config)
    p_los = math.exp(-distance_2d / k)
    return bool(rng.random() < p_los)


def _wrap_angle_deg(angle: np.ndarray) -> np.ndarray:
    """Wrap to (-180, 180]."""
    wrapped = np.remainder(angle + 180.0, 360.0) - 180.0
    return np.where(wrapped == -180.0, 180.0, wrapped)


def generate_link_channel(
    link: LinkGeometry, params: SimulatorParams, rng: np.random.Generator
) -> MultipathSet:
    """Draw one link's MultipathSet from the cluster model.

    Cluster delays beyond the representable tap span are dropped and the
    remaining powers renormalized; the earliest cluster is always at zero
    excess delay, so at least one path survives.
    """
    cfg = params.scenario
    los = draw_los_state(link.d_2d, cfg, rng, params.los_k_override)

    sigma_ds = 10.0 ** (params.ds_log_mean + params.ds_log_std * rng.standard_normal())
    sigma_as = 10.0 ** (params.as_log_mean + params.as_log_std * rng.standard_normal())

    r_tau = params.delay_scale_r_tau
    raw = rng.exponential(scale=r_tau * sigma_ds, size=params.n_clusters)
    delays = np.sort(raw - raw.min())

    shadow = 10.0 ** (-rng.normal(0.0, params.per_cluster_shadow_std, delays.size) / 10.0)
    powers = np.exp(-delays * (r_tau - 1.0) / (r_tau * sigma_ds)) * shadow

    angles = _wrap_angle_deg(link.aod_los_deg + sigma_as * rng.standard_normal(delays.size))
    phases = rng.uniform(0.0, 2.0 * math.pi, delays.size)

    tau_max = (cfg.n_delay - 1) * cfg.tap_spacing
    keep = delays <= tau_max
    delays, powers, angles, phases = delays[keep], powers[keep], angles[keep], phases[keep]
    powers = powers / powers.sum()

    if los:
        k_lin = 10.0 ** (params.ricean_k_db / 10.0)
        direct_power = k_lin / (1.0 + k_lin)
        powers = np.concatenate(([direct_power], powers * (1.0 - direct_power)))
        delays = np.concatenate(([0.0], delays))
        angles = np.concatenate(([link.aod_los_deg], angles))
        # Direct-path phase is set by the propagation length, not a draw.
        direct_phase = (-2.0 * math.pi * link.d_3d / cfg.wavelength) % (2.0 * math.pi)
        phases = np.concatenate(([direct_phase], phases))

    paths = MultipathSet(delays=delays, powers=powers, aods_deg=angles, phases=phases, los=los)
    paths.validate()
    return paths


def synthesize_cir(
    paths: MultipathSet, port_offsets: np.ndarray, config: ScenarioConfig,
    sinc_half_width: int = 4,
) -> np.ndarray:
    """Map a MultipathSet onto the (n_port, n_delay) tap grid.

    Each path contributes sqrt(power) * exp(j phase) times the array
    steering vector, spread over +/- sinc_half_width taps around its
    fractional tap position by a truncated sinc kernel. The kernel window
    is clipped at the array edges.
    """
    h = np.zeros((config.n_port, config.n_delay), dtype=np.complex128)
    if paths.delays.size == 0:
        return h
    tap_pos = paths.delays * config.bandwidth
    bad = (paths.delays < 0) | (tap_pos >= config.n_delay)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise GenerationError(
            f"path {i} delay {paths.delays[i]:.3e} s is outside the "
            f"{config.n_delay}-tap range at {config.bandwidth:.3e} Hz"
        )
    amp = np.sqrt(paths.powers) * np.exp(1j * paths.phases)       # (M,)
    sin_theta = np.sin(np.radians(paths.aods_deg))                 # (M,)
    steer = np.exp(
        1j * 2.0 * math.pi / config.wavelength
        * np.outer(port_offsets, sin_theta)
    )                                                              # (n_port, M)
    taps = np.arange(config.n_delay)[None, :] - tap_pos[:, None]   # (M, n_delay)
    kernel = np.where(np.abs(taps) <= sinc_half_width, np.sinc(taps), 0.0)
    h += steer @ (amp[:, None] * kernel)
    return h


def pathloss(distance_3d: float, exponent: float) -> float:
    """Log-distance power pathloss, unit gain at or below 1 m."""
    return max(distance_3d, 1.0) ** (-exponent)


def generate_sample(
    scenario: Scenario,
    params: SimulatorParams,
    ue_position: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """One CIR tensor (n_bs, n_port, n_delay) for a UE at ue_position.

    Links are drawn in BS index order from the supplied generator, so a
    fresh per-sample generator reproduces the tensor bit for bit.
    """
    cfg = scenario.config
    out = np.empty((cfg.n_bs, cfg.n_port, cfg.n_delay), dtype=np.complex128)
    for b in range(cfg.n_bs):
        geom = link_geometry(scenario.bs_positions[b], ue_position)
        paths = generate_link_channel(geom, params, rng)
        h = synthesize_cir(paths, scenario.port_offsets, cfg, params.sinc_half_width)
        out[b] = h * math.sqrt(pathloss(geom.d_3d, params.pathloss_exponent))
    return out


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-sample stream keyed by (seed, sample index)."""
    return np.random.default_rng([_SAMPLE_STREAM, seed, index])


def sample_ue_positions(scenario: Scenario, n: int, rng_seed: int) -> np.ndarray:
    """(n, 3) uniform positions over the hall rectangle at z = ue_height."""
    cfg = scenario.config
    rng = np.random.default_rng([_POSITION_STREAM, rng_seed])
    pos = np.empty((n, 3), dtype=np.float64)
    pos[:, 0] = rng.uniform(0.0, cfg.hall_width, n)
    pos[:, 1] = rng.uniform(0.0, cfg.hall_length, n)
    pos[:, 2] = cfg.ue_height
    return pos


def generate_dataset(
    scenario: Scenario,
    params: SimulatorParams,
    n_samples: int,
    labeled: bool,
    seed: int,
) -> Dataset:
    """Draw n_samples UE positions and their CIR tensors.

    Sample i is generated from an independent stream keyed by (seed, i),
    so datasets are reproducible regardless of how generation is batched.
    Position labels (x, y) are kept only when labeled is True.
    """
    params.validate()
    positions = sample_ue_positions(scenario, n_samples, seed)
    cfg = scenario.config
    cirs = np.empty((n_samples, cfg.n_bs, cfg.n_port, cfg.n_delay), dtype=np.complex64)
    for i in range(n_samples):
        cirs[i] = generate_sample(scenario, params, positions[i], sample_rng(seed, i))
    manifest = {
        "generator": "sslpos.channel_sim",
        "format_version": 1,
        "seed": seed,
        "n_samples": n_samples,
        "labeled": labeled,
        "simulator": simulator_params_to_dict(params),
    }
    return Dataset(
        cirs=cirs,
        positions=positions[:, :2].copy() if labeled else None,
        manifest=manifest,
    )


def simulator_params_to_dict(params: SimulatorParams) -> dict:
    d = dataclasses.asdict(params)
    d["scenario"] = dataclasses.asdict(params.scenario)
    return d


def simulator_params_from_dict(d: dict) -> SimulatorParams:
    d = dict(d)
    scenario = ScenarioConfig(**d.pop("scenario"))
    return SimulatorParams(scenario=scenario, **d)
