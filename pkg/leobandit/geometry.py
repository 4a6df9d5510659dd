"""
Constellation and user field construction, motion, and the geometric quantities consumed
by the channel model (distances, off-boresight angles, cell membership, range rates).

Two earth models are supported: a planar local-tangent model (x east, y north, z up, ground
at z = 0) and a spherical model (earth-centred coordinates, ground at radius EARTH_RADIUS).
Snapshots are immutable and a pure function of (config, seed, t).
"""
import dataclasses
import logging
import math
import typing as th

import numpy as np

from . import streams
from .config import ScenarioConfig
from .errors import ConfigurationError, GeometryError

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371e3  # m
_X, _Z = np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def _unit(vectors: np.ndarray) -> np.ndarray:
    return vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)


@dataclasses.dataclass(frozen=True)
class SatelliteState:
    position: np.ndarray
    velocity: np.ndarray
    orbit_plane_id: int


@dataclasses.dataclass(frozen=True)
class UserState:
    position: np.ndarray
    velocity: np.ndarray


@dataclasses.dataclass(frozen=True)
class Deployment:
    """
    Initial layout in local tangent coordinates (m); every snapshot is evaluated from it.
    """

    mode: str
    altitude: float
    sat_ground: np.ndarray  # (N, 2)
    sat_heading: np.ndarray  # (N, 2) unit
    sat_speed: float
    plane_ids: np.ndarray  # (N,)
    cell_offsets: np.ndarray  # (M, 2)
    user_ground: np.ndarray  # (U, 2)
    user_heading: np.ndarray  # (U, 2) unit
    user_speed: float
    serving_radius: float
    time_step: float


@dataclasses.dataclass(frozen=True)
class NetworkSnapshot:
    """
    Positions and velocities of satellites and users at iteration `t`, with the derived cell
    centres, beam boresights and the cell membership map kappa[n, m, u].
    """

    t: int
    mode: str
    sat_positions: np.ndarray  # (N, 3) m
    sat_velocities: np.ndarray  # (N, 3) m/s
    plane_ids: np.ndarray  # (N,)
    user_positions: np.ndarray  # (U, 3) m
    user_velocities: np.ndarray  # (U, 3) m/s
    cell_centers: np.ndarray  # (N, M, 3) m
    boresights: np.ndarray  # (N, M, 3) unit
    kappa: np.ndarray  # (N, M, U) bool
    deployment: th.Optional[Deployment] = None

    @property
    def n_satellites(self) -> int:
        return self.sat_positions.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cell_centers.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def sat_states(self) -> th.List[SatelliteState]:
        return [
            SatelliteState(p, v, int(plane)) for p, v, plane in zip(self.sat_positions, self.sat_velocities, self.plane_ids)
        ]

    @property
    def user_states(self) -> th.List[UserState]:
        return [UserState(p, v) for p, v in zip(self.user_positions, self.user_velocities)]

    def nadirs(self) -> np.ndarray:
        """Sub-satellite ground points, (N, 3)."""
        if self.mode == "planar":
            nadir = np.array(self.sat_positions, dtype=float)
            nadir[:, 2] = 0.0
            return nadir
        return EARTH_RADIUS * _unit(self.sat_positions)


def ground_distances(snapshot_mode: str, points_a: np.ndarray, points_b: np.ndarray) -> np.ndarray:
    """
    Pairwise ground distances between two sets of ground points, (len(a), len(b)).
    Horizontal distance in planar mode, great-circle arc in spherical mode.
    """
    if snapshot_mode == "planar":
        diff = points_a[:, None, :2] - points_b[None, :, :2]
        return np.linalg.norm(diff, axis=-1)
    cos = np.clip(_unit(points_a) @ _unit(points_b).T, -1.0, 1.0)
    return EARTH_RADIUS * np.arccos(cos)


def cell_membership(
    mode: str,
    sat_positions: np.ndarray,
    cell_centers: np.ndarray,
    user_positions: np.ndarray,
    serving_radius: float,
) -> np.ndarray:
    """
    kappa[n, m, u]: each user belongs to the nearest cell centre among the satellites whose
    serving radius covers it; ties go to the lowest (n, m) index. Uncovered users belong nowhere.
    """
    n_sat, n_cells = cell_centers.shape[:2]
    n_users = user_positions.shape[0]
    kappa = np.zeros((n_sat, n_cells, n_users), dtype=bool)
    if n_users == 0 or n_sat == 0:
        return kappa
    if mode == "planar":
        nadirs = np.array(sat_positions, dtype=float)
        nadirs[:, 2] = 0.0
    else:
        nadirs = EARTH_RADIUS * _unit(sat_positions)
    covered = ground_distances(mode, nadirs, user_positions) <= serving_radius  # (N, U)
    distances = np.linalg.norm(cell_centers[:, :, None, :] - user_positions[None, None, :, :], axis=-1)
    distances = np.where(covered[:, None, :], distances, np.inf).reshape(n_sat * n_cells, n_users)
    nearest = np.argmin(distances, axis=0)  # first minimum, i.e. lowest (n, m)
    assigned = np.isfinite(distances[nearest, np.arange(n_users)])
    users = np.arange(n_users)[assigned]
    kappa[nearest[assigned] // n_cells, nearest[assigned] % n_cells, users] = True
    return kappa


def make_snapshot(
    sat_positions: np.ndarray,
    sat_velocities: np.ndarray,
    user_positions: np.ndarray,
    user_velocities: np.ndarray,
    cell_centers: np.ndarray,
    plane_ids: th.Optional[np.ndarray] = None,
    serving_radius: float = math.inf,
    mode: str = "planar",
    t: int = 0,
    deployment: th.Optional[Deployment] = None,
) -> NetworkSnapshot:
    """
    Assemble a snapshot from raw positions, deriving boresights and cell membership.

    Args:
        sat_positions (numpy.ndarray): (N, 3) satellite positions in m.
        sat_velocities (numpy.ndarray): (N, 3) satellite velocities in m/s.
        user_positions (numpy.ndarray): (U, 3) user positions in m.
        user_velocities (numpy.ndarray): (U, 3) user velocities in m/s.
        cell_centers (numpy.ndarray): (N, M, 3) ground cell centres in m.
        plane_ids (numpy.ndarray): (N,) orbital plane of every satellite (default: all 0).
        serving_radius (float): Ground radius (m) a satellite serves users in.
        mode (str): "planar" or "spherical".
        t (int): Iteration index.

    Returns:
        NetworkSnapshot: The snapshot.
    """
    sat_positions = np.asarray(sat_positions, dtype=float).reshape(-1, 3)
    user_positions = np.asarray(user_positions, dtype=float).reshape(-1, 3)
    cell_centers = np.asarray(cell_centers, dtype=float).reshape(sat_positions.shape[0], -1, 3)
    if plane_ids is None:
        plane_ids = np.zeros(sat_positions.shape[0], dtype=int)
    boresights = _unit(cell_centers - sat_positions[:, None, :])
    kappa = cell_membership(mode, sat_positions, cell_centers, user_positions, serving_radius)
    return NetworkSnapshot(
        t=int(t),
        mode=mode,
        sat_positions=_frozen(sat_positions),
        sat_velocities=_frozen(np.asarray(sat_velocities, dtype=float).reshape(-1, 3)),
        plane_ids=_frozen(np.asarray(plane_ids, dtype=int)),
        user_positions=_frozen(user_positions),
        user_velocities=_frozen(np.asarray(user_velocities, dtype=float).reshape(-1, 3)),
        cell_centers=_frozen(cell_centers),
        boresights=_frozen(boresights),
        kappa=_frozen(kappa),
        deployment=deployment,
    )


def hexagonal_offsets(n_cells: int, beam_radius: float) -> np.ndarray:
    """
    Ground offsets (m) of `n_cells` hexagonal cells: a centre cell, then complete rings
    outwards with pitch 2 * beam_radius * sqrt(3) / 2. 19 cells fill two rings.
    """
    pitch = math.sqrt(3.0) * beam_radius
    # axial hex directions, walked around each ring
    directions = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    axial = [(0, 0)]
    ring = 1
    while len(axial) < n_cells:
        q, r = directions[4][0] * ring, directions[4][1] * ring  # start corner of the ring
        for direction in range(6):
            for _ in range(ring):
                axial.append((q, r))
                q, r = q + directions[direction][0], r + directions[direction][1]
        ring += 1
    axial = np.array(axial[:n_cells], dtype=float)
    x = pitch * (axial[:, 0] + axial[:, 1] / 2.0)
    y = pitch * (axial[:, 1] * math.sqrt(3.0) / 2.0)
    return np.stack([x, y], axis=1)


def _tangent_basis(points: np.ndarray) -> th.Tuple[np.ndarray, np.ndarray]:
    """Local east/north unit vectors at earth-centred points, (K, 3) each."""
    east = np.cross(_Z, points)
    degenerate = np.linalg.norm(east, axis=-1) < 1e-9
    east[degenerate] = np.array([0.0, 1.0, 0.0])
    east = _unit(east)
    north = _unit(np.cross(_unit(points), east))
    return east, north


def _exp_map(origins: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """
    Map tangent-plane offsets (..., 2) at earth-centred unit `origins` (..., 3) onto the
    sphere, walking the great circle along the offset direction. Returns unit vectors.
    """
    east, north = _tangent_basis(origins.reshape(-1, 3))
    east, north = east.reshape(origins.shape), north.reshape(origins.shape)
    rho = np.linalg.norm(offsets, axis=-1, keepdims=True)
    direction = offsets[..., :1] * east + offsets[..., 1:2] * north
    safe_rho = np.where(rho > 0, rho, 1.0)
    angle = rho / EARTH_RADIUS
    return np.cos(angle) * origins + np.sin(angle) * direction / safe_rho


def _sample_users(config: ScenarioConfig, sat_ground: np.ndarray, radius: float) -> th.Tuple[np.ndarray, np.ndarray]:
    rng = streams.make_rng(config.seed, streams.USERS)
    n_users = config.n_users
    lower, upper = sat_ground.min(axis=0) - radius, sat_ground.max(axis=0) + radius
    accepted = np.empty((0, 2))
    while accepted.shape[0] < n_users:
        candidates = rng.uniform(lower, upper, size=(max(64, 4 * n_users), 2))
        inside = (np.linalg.norm(candidates[:, None, :] - sat_ground[None, :, :], axis=-1) <= radius).any(axis=1)
        accepted = np.concatenate([accepted, candidates[inside]])
    headings = rng.uniform(0.0, 2.0 * math.pi, size=n_users)
    return accepted[:n_users], np.stack([np.cos(headings), np.sin(headings)], axis=1)


def build_constellation(config: ScenarioConfig) -> NetworkSnapshot:
    """
    Place the constellation, its beam cells and the user field, and return the snapshot at t = 0.

    Homogeneous topology puts every satellite on one orbital plane, spaced by the inter-satellite
    distance along-track. Heterogeneous topology spreads satellites over ceil(N / 2) planes, and a
    pair over two, with at most two satellites per plane; neighbouring planes are offset cross-track
    by the inter-satellite distance and their tracks cross at `plane_crossing_deg`. Users are drawn
    uniformly over the union of the satellites' serving disks.

    Args:
        config (ScenarioConfig): The scenario.

    Returns:
        NetworkSnapshot: The snapshot at iteration 0.

    Raises:
        ConfigurationError: If the cell layout does not fit the serving radius.
    """
    spacing = config.inter_sat_distance_km * 1e3
    serving_radius = config.serving_radius_km * 1e3
    beam_radius = config.beam_radius_km * 1e3
    n_sat = config.n_satellites

    cell_offsets = hexagonal_offsets(config.cells_per_satellite, beam_radius)
    ring_radius = float(np.linalg.norm(cell_offsets, axis=1).max())
    if ring_radius > serving_radius + beam_radius:
        raise ConfigurationError(
            f"outermost beam cell centre at {ring_radius / 1e3:.1f} km exceeds the serving radius "
            f"({config.serving_radius_km} km) plus one beam radius ({config.beam_radius_km} km)",
            field="beam_radius_km",
        )

    if config.orbit_topology == "homogeneous":
        plane_ids = np.zeros(n_sat, dtype=int)
        along = (np.arange(n_sat) - (n_sat - 1) / 2.0) * spacing
        sat_ground = np.stack([along, np.zeros(n_sat)], axis=1)
        sat_heading = np.tile([1.0, 0.0], (n_sat, 1))
    else:
        # a pair of satellites still flies on two crossing planes
        n_planes = max(math.ceil(n_sat / 2), min(n_sat, 2))
        plane_ids = np.arange(n_sat) * n_planes // n_sat
        sat_ground, sat_heading = np.zeros((n_sat, 2)), np.zeros((n_sat, 2))
        for n in range(n_sat):
            plane = int(plane_ids[n])
            slot = int(np.count_nonzero(plane_ids[:n] == plane))
            members = int(np.count_nonzero(plane_ids == plane))
            angle = math.radians(plane * config.plane_crossing_deg)
            heading = np.array([math.cos(angle), math.sin(angle)])
            origin = np.array([0.0, (plane - (n_planes - 1) / 2.0) * spacing])
            sat_ground[n] = origin + (slot - (members - 1) / 2.0) * spacing * heading
            sat_heading[n] = heading

    user_ground, user_heading = _sample_users(config, sat_ground, serving_radius)
    deployment = Deployment(
        mode=config.geometry_mode,
        altitude=config.altitude_km * 1e3,
        sat_ground=_frozen(sat_ground),
        sat_heading=_frozen(sat_heading),
        sat_speed=config.sat_speed_kms * 1e3,
        plane_ids=_frozen(plane_ids),
        cell_offsets=_frozen(cell_offsets),
        user_ground=_frozen(user_ground),
        user_heading=_frozen(user_heading),
        user_speed=config.user_speed_ms,
        serving_radius=serving_radius,
        time_step=config.time_step_s,
    )
    logger.debug(
        "built %s constellation: %d satellites on %d planes, %d cells each, %d users",
        config.orbit_topology,
        n_sat,
        len(set(plane_ids.tolist())),
        config.cells_per_satellite,
        config.n_users,
    )
    return evaluate_deployment(deployment, 0)


def evaluate_deployment(deployment: Deployment, t: int) -> NetworkSnapshot:
    """Positions of everything in `deployment` after t iterations."""
    elapsed = t * deployment.time_step
    h = deployment.altitude
    n_sat, n_users = deployment.sat_ground.shape[0], deployment.user_ground.shape[0]
    if deployment.mode == "planar":
        sat_xy = deployment.sat_ground + deployment.sat_speed * elapsed * deployment.sat_heading
        sat_positions = np.column_stack([sat_xy, np.full(n_sat, h)])
        sat_velocities = np.column_stack([deployment.sat_speed * deployment.sat_heading, np.zeros(n_sat)])
        user_xy = deployment.user_ground + deployment.user_speed * elapsed * deployment.user_heading
        user_positions = np.column_stack([user_xy, np.zeros(n_users)])
        user_velocities = np.column_stack([deployment.user_speed * deployment.user_heading, np.zeros(n_users)])
        offsets = np.concatenate([deployment.cell_offsets, np.zeros((len(deployment.cell_offsets), 1))], axis=1)
        cell_centers = np.column_stack([sat_xy, np.zeros(n_sat)])[:, None, :] + offsets[None, :, :]
    else:
        sat_positions, sat_velocities = _great_circle(
            deployment.sat_ground, deployment.sat_heading, EARTH_RADIUS + h, deployment.sat_speed, elapsed
        )
        user_positions, user_velocities = _great_circle(
            deployment.user_ground, deployment.user_heading, EARTH_RADIUS, deployment.user_speed, elapsed
        )
        nadirs = _unit(sat_positions)
        origins = np.repeat(nadirs[:, None, :], len(deployment.cell_offsets), axis=1)
        offsets = np.broadcast_to(deployment.cell_offsets, origins.shape[:2] + (2,))
        cell_centers = EARTH_RADIUS * _exp_map(origins, offsets)
    return make_snapshot(
        sat_positions,
        sat_velocities,
        user_positions,
        user_velocities,
        cell_centers,
        plane_ids=deployment.plane_ids,
        serving_radius=deployment.serving_radius,
        mode=deployment.mode,
        t=t,
        deployment=deployment,
    )


def _great_circle(
    ground: np.ndarray, heading: np.ndarray, radius: float, speed: float, elapsed: float
) -> th.Tuple[np.ndarray, np.ndarray]:
    """Uniform great-circle motion from tangent-plane start points and headings."""
    if len(ground) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    origins = np.tile(_X, (len(ground), 1))
    start = _exp_map(origins, ground)
    east, north = _tangent_basis(start)
    direction = _unit(heading[:, :1] * east + heading[:, 1:2] * north)
    angle = speed * elapsed / radius
    position = radius * (math.cos(angle) * start + math.sin(angle) * direction)
    velocity = speed * (-math.sin(angle) * start + math.cos(angle) * direction)
    return position, velocity


def propagate(snapshot: NetworkSnapshot, config: ScenarioConfig, t: int) -> NetworkSnapshot:
    """
    Advance the network to iteration `t`.

    Snapshots built by `build_constellation` are re-evaluated from their deployment, so the result
    only depends on (config, seed, t). Hand-assembled snapshots move in straight lines with their
    current velocities for (t - snapshot.t) * time_step seconds, cells travelling with their satellite.

    Args:
        snapshot (NetworkSnapshot): The current snapshot.
        config (ScenarioConfig): The scenario (provides the time step).
        t (int): Target iteration, t >= 0.

    Returns:
        NetworkSnapshot: The snapshot at iteration t.
    """
    if t < 0:
        raise ValueError("iteration index must be non-negative")
    if snapshot.deployment is not None:
        deployment = snapshot.deployment
        if deployment.time_step != config.time_step_s:
            deployment = dataclasses.replace(deployment, time_step=config.time_step_s)
        return evaluate_deployment(deployment, t)
    elapsed = (t - snapshot.t) * config.time_step_s
    sat_shift = snapshot.sat_velocities * elapsed
    serving_radius = config.serving_radius_km * 1e3
    return make_snapshot(
        snapshot.sat_positions + sat_shift,
        snapshot.sat_velocities,
        snapshot.user_positions + snapshot.user_velocities * elapsed,
        snapshot.user_velocities,
        snapshot.cell_centers + sat_shift[:, None, :],
        plane_ids=snapshot.plane_ids,
        serving_radius=serving_radius,
        mode=snapshot.mode,
        t=t,
    )


def off_boresight_angles(snapshot: NetworkSnapshot) -> np.ndarray:
    """theta[n, m, u]: angle between beam (n, m)'s boresight and the direction from satellite n to user u."""
    directions = snapshot.user_positions[None, :, :] - snapshot.sat_positions[:, None, :]  # (N, U, 3)
    boresights = snapshot.boresights[:, :, None, :]  # (N, M, 1, 3)
    directions = directions[:, None, :, :]
    cross = np.linalg.norm(np.cross(boresights, directions), axis=-1)
    dot = np.sum(boresights * directions, axis=-1)
    return np.arctan2(cross, dot)


def off_boresight_angle(snapshot: NetworkSnapshot, n: int, m: int, u: int) -> float:
    """Angle (rad, in [0, pi]) between beam (n, m)'s boresight and the direction to user u."""
    direction = snapshot.user_positions[u] - snapshot.sat_positions[n]
    boresight = snapshot.boresights[n, m]
    return float(math.atan2(np.linalg.norm(np.cross(boresight, direction)), float(boresight @ direction)))


def slant_distances(snapshot: NetworkSnapshot) -> np.ndarray:
    """d[n, u]: satellite-to-user distance in m."""
    return np.linalg.norm(snapshot.user_positions[None, :, :] - snapshot.sat_positions[:, None, :], axis=-1)


def slant_distance(snapshot: NetworkSnapshot, n: int, m: int, u: int) -> float:
    """Distance (m) from satellite n to user u; the beam index does not change it."""
    return float(np.linalg.norm(snapshot.user_positions[u] - snapshot.sat_positions[n]))


def relative_velocities(snapshot: NetworkSnapshot) -> np.ndarray:
    """v[n, u]: magnitude of the range rate between satellite n and user u, m/s."""
    offsets = snapshot.user_positions[None, :, :] - snapshot.sat_positions[:, None, :]
    velocities = snapshot.user_velocities[None, :, :] - snapshot.sat_velocities[:, None, :]
    distances = np.linalg.norm(offsets, axis=-1)
    if np.any(distances == 0.0):
        n, u = np.argwhere(distances == 0.0)[0]
        raise GeometryError(f"satellite {n} and user {u} are co-located")
    return np.abs(np.sum(offsets * velocities, axis=-1)) / distances


def relative_velocity(snapshot: NetworkSnapshot, n: int, u: int) -> float:
    """Magnitude of the radial (range-rate) component of the relative velocity, m/s."""
    offset = snapshot.user_positions[u] - snapshot.sat_positions[n]
    distance = float(np.linalg.norm(offset))
    if distance == 0.0:
        raise GeometryError(f"satellite {n} and user {u} are co-located")
    return abs(float(offset @ (snapshot.user_velocities[u] - snapshot.sat_velocities[n]))) / distance
