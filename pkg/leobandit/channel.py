"""
Link-level mathematics: aperture beam gain, the pathloss surrogate, inter-beam,
inter-satellite and Doppler-induced interference, SINR and throughput.

Array conventions: power P[n, m, u, s] (W), beam indicators phi[n, m, u], channel
indicators rho[n, m, s], transmit gains G[n, m, u] (beam (n, m) toward user u) and channel
gains H[n, u, s] (the pathloss does not depend on the beam).
"""
import dataclasses
import logging
import math
import typing as th

import numpy as np
from scipy import special

from . import geometry, streams
from .config import ScenarioConfig
from .core import SPEED_OF_LIGHT
from .errors import DomainError

logger = logging.getLogger(__name__)

FIRST_J1_ZERO = float(special.jn_zeros(1, 1)[0])  # 3.8317...


def theta_max(config: ScenarioConfig) -> float:
    """Largest off-boresight angle with non-zero gain (rad)."""
    if config.theta_max_rad is not None:
        return float(config.theta_max_rad)
    sine = config.theta_max_factor * FIRST_J1_ZERO / (config.wave_number * config.aperture_radius_m)
    return math.asin(min(1.0, sine))


def beam_gain(theta, psi_bs, config: ScenarioConfig):
    """
    Aperture beam pattern: G_t on boresight, G_t * 4 |J1(x) / x|^2 with x = k a sin(theta - psi)
    inside theta_max, and 0 beyond.

    Args:
        theta (float or numpy.ndarray): Angle toward the receiver (rad).
        psi_bs (float or numpy.ndarray): Boresight angle (rad).
        config (ScenarioConfig): Provides G_t, k, a and theta_max.

    Returns:
        float or numpy.ndarray: The linear gain (same shape as the broadcast inputs).
    """
    delta = np.abs(np.asarray(theta, dtype=float) - np.asarray(psi_bs, dtype=float))
    x = config.wave_number * config.aperture_radius_m * np.sin(delta)
    safe_x = np.where(x == 0.0, 1.0, x)
    pattern = np.where(x == 0.0, 1.0, 4.0 * (special.j1(safe_x) / safe_x) ** 2)
    gain = np.where(delta <= theta_max(config), config.tx_gain * pattern, 0.0)
    gain = np.where(delta == 0.0, config.tx_gain, gain)
    return float(gain) if gain.ndim == 0 else gain


def pathloss_db(distance, frequency, config: ScenarioConfig, shadow_db=0.0):
    """
    Pathloss surrogate: free-space loss plus additive shadowing, clutter, atmospheric and
    scintillation terms (dB).

    Args:
        distance (float or numpy.ndarray): Link distance (m), must be positive.
        frequency (float or numpy.ndarray): Carrier of the sub-channel (Hz).
        config (ScenarioConfig): Provides the surrogate terms.
        shadow_db (float or numpy.ndarray): Shadowing realisation to add (dB).

    Returns:
        float or numpy.ndarray: PL in dB.

    Raises:
        DomainError: If any distance is not positive.
    """
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0.0):
        raise DomainError("pathloss needs a positive distance")
    free_space = 20.0 * np.log10(4.0 * math.pi * distance * np.asarray(frequency, dtype=float) / SPEED_OF_LIGHT)
    loss = free_space + shadow_db + config.clutter_db + config.atmospheric_db + config.scintillation_db
    return float(loss) if np.ndim(loss) == 0 else loss


def shadowing_db(config: ScenarioConfig, n_satellites: int, n_users: int) -> np.ndarray:
    """Log-normal shadowing (dB) per satellite/user pair, fixed for the whole run."""
    if config.shadow_sigma_db == 0.0:
        return np.zeros((n_satellites, n_users))
    rng = streams.make_rng(config.seed, streams.SHADOWING)
    return rng.normal(0.0, config.shadow_sigma_db, size=(n_satellites, n_users))


def subchannel_frequencies(config: ScenarioConfig) -> np.ndarray:
    """Centre frequency of every sub-channel: a uniform grid of width W_s across [f_c - W/2, f_c + W/2]."""
    s = np.arange(1, config.n_subchannels + 1)
    return config.carrier_frequency_hz - config.bandwidth_hz / 2.0 + (s - 0.5) * config.subchannel_bandwidth_hz


def doppler_weights(n_subchannels: int) -> np.ndarray:
    """w[s'] = sum over s != s' of 1 / (s' - s)^2."""
    s = np.arange(n_subchannels)
    gaps = (s[:, None] - s[None, :]).astype(float)
    with np.errstate(divide="ignore"):
        inverse = np.where(gaps == 0.0, 0.0, 1.0 / np.where(gaps == 0.0, 1.0, gaps) ** 2)
    return inverse.sum(axis=0)


@dataclasses.dataclass(frozen=True)
class AllocationPolicy:
    """
    The decoded allocation: power P[n, m, u, s] in W, illuminated-beam indicators phi[n, m, u]
    and channel-to-beam indicators rho[n, m, s].
    """

    power: np.ndarray
    phi: np.ndarray
    rho: np.ndarray

    @classmethod
    def empty(cls, n_satellites: int, n_cells: int, n_users: int, n_subchannels: int) -> "AllocationPolicy":
        return cls(
            power=np.zeros((n_satellites, n_cells, n_users, n_subchannels)),
            phi=np.zeros((n_satellites, n_cells, n_users), dtype=bool),
            rho=np.zeros((n_satellites, n_cells, n_subchannels), dtype=bool),
        )

    @property
    def shape(self) -> th.Tuple[int, int, int, int]:
        return self.power.shape


@dataclasses.dataclass(frozen=True)
class LinkEnvironment:
    """
    Everything link-level that depends on the geometry only, computed once per snapshot.
    """

    snapshot: geometry.NetworkSnapshot
    config: ScenarioConfig
    tx_gains: np.ndarray  # G[n, m, u]
    channel_gains: np.ndarray  # H[n, u, s]
    frequencies: np.ndarray  # f[s]
    velocities: np.ndarray  # v[n, u]

    @classmethod
    def build(
        cls,
        snapshot: geometry.NetworkSnapshot,
        config: ScenarioConfig,
        shadow_db: th.Optional[np.ndarray] = None,
    ) -> "LinkEnvironment":
        """
        Args:
            snapshot (NetworkSnapshot): The geometry.
            config (ScenarioConfig): The scenario.
            shadow_db (numpy.ndarray): Optional (N, U) shadowing realisation in dB.
        """
        frequencies = subchannel_frequencies(config)
        distances = geometry.slant_distances(snapshot)
        shadow = np.zeros_like(distances) if shadow_db is None else shadow_db
        loss = pathloss_db(distances[:, :, None], frequencies[None, None, :], config, shadow[:, :, None])
        return cls(
            snapshot=snapshot,
            config=config,
            tx_gains=beam_gain(geometry.off_boresight_angles(snapshot), 0.0, config),
            channel_gains=10.0 ** (-np.asarray(loss) / 10.0),
            frequencies=frequencies,
            velocities=geometry.relative_velocities(snapshot),
        )

    def doppler_prefactor(self, n: int, u: int, s: int) -> float:
        n_sub = self.config.n_subchannels
        shift = self.frequencies[s] * self.velocities[n, u] * n_sub ** 2 / (SPEED_OF_LIGHT * self.config.bandwidth_hz)
        return float(shift ** 2 / (2.0 * n_sub))


def interference_ibi(env: LinkEnvironment, policy: AllocationPolicy, n: int, m: int, u: int, s: int) -> float:
    """
    Inter-beam interference (W) at link (n, m, u, s): the other beams of satellite n on
    sub-channel s, each weighted by its pattern toward user u.
    """
    other_cells = np.arange(policy.phi.shape[1]) != m
    other_users = np.arange(policy.phi.shape[2]) != u
    served = policy.power[n, :, :, s] * policy.phi[n] * policy.rho[n, :, s][:, None]  # (M, U)
    per_beam = served[:, other_users].sum(axis=1) * env.tx_gains[n, :, u]
    return float(per_beam[other_cells].sum() * env.config.rx_gain * env.channel_gains[n, u, s])


def interference_isi(env: LinkEnvironment, policy: AllocationPolicy, n: int, m: int, u: int, s: int) -> float:
    """
    Inter-satellite interference (W) at link (n, m, u, s): beams m' != m of the other
    satellites on sub-channel s, each weighted by its pattern toward user u.
    """
    n_sat, n_cells, n_users = policy.phi.shape
    total = 0.0
    for other in range(n_sat):
        if other == n:
            continue
        served = policy.power[other, :, :, s] * policy.phi[other] * policy.rho[other, :, s][:, None]
        per_beam = served[:, np.arange(n_users) != u].sum(axis=1) * env.tx_gains[other, :, u]
        total += per_beam[np.arange(n_cells) != m].sum()
    return float(total * env.config.rx_gain * env.channel_gains[n, u, s])


def interference_doppler(env: LinkEnvironment, policy: AllocationPolicy, n: int, m: int, u: int, s: int) -> float:
    """Doppler-induced inter-carrier interference (W) at link (n, m, u, s), before compensation."""
    weights = doppler_weights(env.config.n_subchannels)
    return env.doppler_prefactor(n, u, s) * float(policy.power[n, m, u, :] @ weights)


def sinr(env: LinkEnvironment, policy: AllocationPolicy, n: int, m: int, u: int, s: int) -> float:
    """SINR of link (n, m, u, s); 0 unless the user is served by beam m on sub-channel s."""
    if not (policy.phi[n, m, u] and policy.rho[n, m, s]):
        return 0.0
    config = env.config
    signal = policy.power[n, m, u, s] * env.tx_gains[n, m, u] * config.rx_gain * env.channel_gains[n, u, s]
    denominator = (
        interference_ibi(env, policy, n, m, u, s)
        + interference_isi(env, policy, n, m, u, s)
        + config.doppler_compensation * interference_doppler(env, policy, n, m, u, s)
        + config.noise_power_w
    )
    return float(signal / denominator)


@dataclasses.dataclass(frozen=True)
class InterferenceTerms:
    """All interference terms and SINRs of a policy, (N, M, U, S) each."""

    ibi: np.ndarray
    isi: np.ndarray
    doppler: np.ndarray
    sinr: np.ndarray


def evaluate(env: LinkEnvironment, policy: AllocationPolicy) -> InterferenceTerms:
    """Vectorised interference and SINR of every link; equals the per-link functions above."""
    config = env.config
    n_sat, n_cells = policy.phi.shape[:2]
    gate = policy.phi[:, :, :, None] & policy.rho[:, :, None, :]
    served = policy.power * gate
    # interferer beam power excluding the victim user, weighted by its pattern toward the victim
    weighted = (served.sum(axis=2, keepdims=True) - served) * env.tx_gains[:, :, :, None]
    other_cells = 1.0 - np.eye(n_cells)
    other_sats = 1.0 - np.eye(n_sat)
    received = config.rx_gain * env.channel_gains[:, None, :, :]
    per_sat = np.einsum("cd,bdus->bcus", other_cells, weighted)
    ibi = per_sat * received
    isi = np.einsum("ab,bcus->acus", other_sats, per_sat) * received

    n_sub = config.n_subchannels
    shift = env.frequencies[None, None, :] * env.velocities[:, :, None] * n_sub ** 2 / (
        SPEED_OF_LIGHT * config.bandwidth_hz
    )
    prefactor = shift ** 2 / (2.0 * n_sub)  # (N, U, S)
    doppler = prefactor[:, None, :, :] * (policy.power @ doppler_weights(n_sub))[:, :, :, None]

    signal = policy.power * env.tx_gains[:, :, :, None] * received
    denominator = ibi + isi + config.doppler_compensation * doppler + config.noise_power_w
    ratio = np.where(gate, signal / denominator, 0.0)
    return InterferenceTerms(ibi=ibi, isi=isi, doppler=doppler, sinr=ratio)


@dataclasses.dataclass(frozen=True)
class RateReport:
    per_leo: np.ndarray  # R_n, bit/s
    total: float  # R_tot, bit/s
    per_user: np.ndarray  # bit/s


def rates(env: LinkEnvironment, policy: AllocationPolicy) -> RateReport:
    """
    Throughput per satellite, in total and per user:
    R_n = sum over (m, u, s) of W_s * rho[n, m, s] * log2(1 + SINR[n, m, u, s]).
    """
    terms = evaluate(env, policy)
    link_rates = env.config.subchannel_bandwidth_hz * policy.rho[:, :, None, :] * np.log2(1.0 + terms.sinr)
    per_leo = link_rates.sum(axis=(1, 2, 3))
    return RateReport(per_leo=per_leo, total=float(per_leo.sum()), per_user=link_rates.sum(axis=(0, 1, 3)))
