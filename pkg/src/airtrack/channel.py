"""Air-to-ground link model: LoS probability, path loss, link admission.

The link between an aircraft and a ground receiver is either line-of-sight
or not, drawn per transmission from an elevation-dependent probability;
each branch adds its own mean excess loss on top of free-space path loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .constants import SPEED_OF_LIGHT


class LinkKind(Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class ChannelParams:
    """Environment constants for the air-to-ground link budget.

    ``a0``/``b0`` shape the elevation-angle dependence of the LoS
    probability; ``mu_los_db``/``mu_nlos_db`` are mean excess path losses.
    Defaults are the commonly used urban-environment values at the 1090 MHz
    ADS-B carrier.
    """

    carrier_frequency_hz: float = 1090e6
    a0: float = 9.61
    b0: float = 0.16
    mu_los_db: float = 1.0
    mu_nlos_db: float = 20.0
    tx_power_dbm: float = 51.0
    rx_sensitivity_dbm: float = -84.0

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.b0 < 0:
            raise ValueError("b0 must be nonnegative")
        if self.mu_nlos_db < self.mu_los_db:
            raise ValueError("NLoS mean excess loss must be >= LoS")


def los_probability(theta_deg: float, a0: float, b0: float) -> float:
    """Probability of a line-of-sight link at elevation ``theta_deg``."""
    if not 0.0 <= theta_deg <= 90.0:
        raise ValueError(f"elevation angle {theta_deg} outside [0, 90]")
    return 1.0 / (1.0 + a0 * math.exp(-b0 * theta_deg))


def path_loss_db(frequency_hz: float, distance_m: float, link: LinkKind,
                 params: ChannelParams) -> float:
    """Free-space path loss plus the mean excess loss of the link branch."""
    if distance_m <= 0.0:
        raise ValueError("path loss undefined for non-positive distance")
    if frequency_hz <= 0.0:
        raise ValueError("frequency must be positive")
    fspl = 20.0 * math.log10(4.0 * math.pi * frequency_hz * distance_m / SPEED_OF_LIGHT)
    mu = params.mu_los_db if link is LinkKind.LOS else params.mu_nlos_db
    return fspl + mu


def link_received(distance_m: float, theta_deg: float, params: ChannelParams,
                  los_draw: float) -> bool:
    """Link budget admission for one (receiver, transmission) pair.

    ``los_draw`` is a uniform [0, 1) sample deciding the LoS/NLoS branch;
    the broadcast is received iff received power clears the sensitivity.
    """
    link = LinkKind.LOS if los_draw < los_probability(theta_deg, params.a0, params.b0) \
        else LinkKind.NLOS
    rx_dbm = params.tx_power_dbm - path_loss_db(
        params.carrier_frequency_hz, distance_m, link, params)
    return rx_dbm >= params.rx_sensitivity_dbm
