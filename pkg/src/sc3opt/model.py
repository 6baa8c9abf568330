"""Domain types and the channel layer (path loss -> SNR -> spectral efficiency)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

from .control import ControlMatrices, ControlSummary, summarize
from .errors import ScenarioError

PATHLOSS_CONSTANT_DB = 32.4
REFERENCE_DISTANCE_KM = 1.0


class LogBase(str, enum.Enum):
    LOG10 = "log10"
    LOG2 = "log2"

    def log(self, x: float) -> float:
        return math.log10(x) if self is LogBase.LOG10 else math.log2(x)


@dataclass(frozen=True)
class ChannelGeometry:
    """Large-scale link geometry.

    ``target_snr_db`` is the received SNR that power control holds at the
    reference distance (1 km); farther links keep the path-loss difference.
    """

    distance_km: float
    carrier_freq_mhz: float
    noise_power_dbm: float = -107.0
    target_snr_db: float = 30.0
    pathloss_log_base: LogBase = LogBase.LOG10

    def __post_init__(self):
        if not self.distance_km > 0:
            raise ScenarioError(f"distance_km must be > 0, got {self.distance_km}")
        if not self.carrier_freq_mhz > 0:
            raise ScenarioError(f"carrier_freq_mhz must be > 0, got {self.carrier_freq_mhz}")
        object.__setattr__(self, "pathloss_log_base", LogBase(self.pathloss_log_base))


def pathloss_db(geometry: ChannelGeometry) -> float:
    log = geometry.pathloss_log_base.log
    return PATHLOSS_CONSTANT_DB + 20.0 * log(geometry.distance_km) + 20.0 * log(geometry.carrier_freq_mhz)


def spectral_efficiency(snr_linear: float) -> float:
    if snr_linear < 0:
        raise ValueError(f"SNR must be >= 0, got {snr_linear}")
    return math.log2(1.0 + snr_linear)


def link_bits(bandwidth_hz: float, time_s: float, se_bits_per_s_per_hz: float) -> float:
    return bandwidth_hz * time_s * se_bits_per_s_per_hz


def received_snr_db(geometry: ChannelGeometry) -> float:
    ref = ChannelGeometry(
        REFERENCE_DISTANCE_KM,
        geometry.carrier_freq_mhz,
        geometry.noise_power_dbm,
        geometry.target_snr_db,
        geometry.pathloss_log_base,
    )
    return geometry.target_snr_db - (pathloss_db(geometry) - pathloss_db(ref))


def transmit_power_dbm(geometry: ChannelGeometry) -> float:
    """Transmit power implied by the target-SNR convention."""
    return geometry.target_snr_db + geometry.noise_power_dbm + pathloss_db(
        ChannelGeometry(REFERENCE_DISTANCE_KM, geometry.carrier_freq_mhz, pathloss_log_base=geometry.pathloss_log_base)
    )


def se_from_geometry(geometry: ChannelGeometry) -> float:
    return spectral_efficiency(10.0 ** (received_snr_db(geometry) / 10.0))


@dataclass(frozen=True)
class LinkSpec:
    spectral_efficiency: float
    channel: Optional[ChannelGeometry] = None

    def __post_init__(self):
        se = float(self.spectral_efficiency)
        if not (se > 0 and math.isfinite(se)):
            raise ScenarioError(f"spectral efficiency must be > 0, got {se}")
        object.__setattr__(self, "spectral_efficiency", se)

    @classmethod
    def from_geometry(cls, geometry: ChannelGeometry) -> "LinkSpec":
        return cls(se_from_geometry(geometry), geometry)


@dataclass(frozen=True)
class LoopSpec:
    cycle_time_s: float
    extraction_ratio: float
    processing_difficulty: float
    ul: LinkSpec
    dl: LinkSpec
    control: Union[ControlSummary, ControlMatrices]

    def __post_init__(self):
        if not self.cycle_time_s > 0:
            raise ScenarioError(f"cycle time must be > 0, got {self.cycle_time_s}")
        if not 0 < self.extraction_ratio <= 1:
            raise ScenarioError(f"extraction ratio must be in (0, 1], got {self.extraction_ratio}")
        if not self.processing_difficulty > 0:
            raise ScenarioError(f"processing difficulty must be > 0, got {self.processing_difficulty}")

    @property
    def summary(self) -> ControlSummary:
        if isinstance(self.control, ControlSummary):
            return self.control
        cached = self.__dict__.get("_summary")
        if cached is None:
            cached = summarize(self.control)
            object.__setattr__(self, "_summary", cached)
        return cached

    @property
    def rho(self) -> float:
        return self.extraction_ratio

    @property
    def alpha(self) -> float:
        return self.processing_difficulty

    @property
    def r_ul(self) -> float:
        return self.ul.spectral_efficiency

    @property
    def r_dl(self) -> float:
        return self.dl.spectral_efficiency


@dataclass(frozen=True)
class Budget:
    total_bandwidth_hz: float
    total_cpu_hz: float

    def __post_init__(self):
        if not self.total_bandwidth_hz > 0:
            raise ScenarioError(f"total bandwidth must be > 0, got {self.total_bandwidth_hz}")
        if not self.total_cpu_hz > 0:
            raise ScenarioError(f"total CPU frequency must be > 0, got {self.total_cpu_hz}")
