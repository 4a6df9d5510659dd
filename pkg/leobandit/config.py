"""
Scenario configuration: reference defaults, validation, expression-valued overrides and
INI-style configuration files.
"""
import configparser
import dataclasses
import logging
import math
import os
import re
import typing as th

from .core import SPEED_OF_LIGHT, assign, evaluate, flatten
from .core.types import NestedMapping
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "LEOBANDIT_"
TOPOLOGIES = ("homogeneous", "heterogeneous")
GEOMETRY_MODES = ("planar", "spherical")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """
    All physical, constellation and learning parameters of a scenario.

    Defaults describe the full-size reference scenario; see
    `SCALES["desk"]` for the reduced scenario used by the experiment presets.
    """

    # constellation
    n_satellites: int = 3
    altitude_km: float = 1000.0
    cells_per_satellite: int = 19
    max_illuminated: int = 15
    beam_radius_km: float = 50.0
    serving_radius_km: float = 500.0
    inter_sat_distance_km: float = 500.0
    orbit_topology: str = "heterogeneous"
    plane_crossing_deg: float = 30.0
    geometry_mode: str = "planar"
    n_users: int = 100
    sat_speed_kms: float = 8.0
    user_speed_ms: float = 20.0
    time_step_s: float = 1e-3
    # radio
    n_subchannels: int = 30
    carrier_frequency_hz: float = 28e9
    bandwidth_hz: float = 240e6
    p_leo_dbm: float = 60.0
    p_beam_dbm: float = 40.0
    noise_psd_dbm_hz: float = -174.0
    doppler_compensation: float = 1e-12
    tx_gain_dbi: float = 50.0
    rx_gain_dbi: float = 15.0
    aperture_radius_m: th.Optional[float] = None  # 10 wavelengths when unset
    theta_max_factor: float = 3.0
    theta_max_rad: th.Optional[float] = None
    # channel surrogate (dB)
    shadow_sigma_db: float = 0.0
    clutter_db: float = 0.0
    atmospheric_db: float = 0.5
    scintillation_db: float = 0.0
    # action space
    power_offsets_db: th.Tuple[float, ...] = (0.0, 3.0, 6.0, 10.0)
    power_off_level: bool = True
    power_pool: int = 512
    beam_pool: int = 512
    channel_pool: int = 512
    joint_pool: int = 4096
    beam_allocation: bool = True
    # learning
    allocator: str = "mmral"
    epsilon: float = 0.2
    gamma_macro: float = 0.15
    gamma_micro: float = 0.15
    reward_scale: float = 1e-9
    iterations: int = 20000
    seed: int = 0
    outage_threshold_bps: float = 50e6
    log_every: int = 1000

    def __post_init__(self):
        if self.aperture_radius_m is None:
            object.__setattr__(self, "aperture_radius_m", 10.0 * SPEED_OF_LIGHT / self.carrier_frequency_hz)
        self.validate()

    def validate(self):
        """Checks the configuration invariants, raising ConfigurationError naming the field."""

        def check(condition: bool, field: str, message: str):
            if not condition:
                raise ConfigurationError(message, field=field)

        check(self.n_satellites >= 1, "n_satellites", "n_satellites must be at least 1")
        check(self.cells_per_satellite >= 1, "cells_per_satellite", "cells_per_satellite must be at least 1")
        check(
            0 < self.max_illuminated <= self.cells_per_satellite,
            "max_illuminated",
            "max_illuminated out of (0, cells_per_satellite]",
        )
        check(
            self.n_subchannels >= self.beam_slots,
            "n_subchannels",
            f"n_subchannels ({self.n_subchannels}) must cover every illuminated beam ({self.beam_slots})",
        )
        check(self.bandwidth_hz > 0, "bandwidth_hz", "bandwidth_hz must be positive")
        check(self.carrier_frequency_hz > 0, "carrier_frequency_hz", "carrier_frequency_hz must be positive")
        check(0.0 <= self.doppler_compensation < 1.0, "doppler_compensation", "doppler_compensation out of [0,1)")
        check(0.0 <= self.epsilon <= 1.0, "epsilon", "epsilon out of [0,1]")
        check(self.gamma_macro >= 0.0, "gamma_macro", "gamma_macro must be non-negative")
        check(self.gamma_micro >= 0.0, "gamma_micro", "gamma_micro must be non-negative")
        check(self.altitude_km > 0, "altitude_km", "altitude_km must be positive")
        check(self.beam_radius_km > 0, "beam_radius_km", "beam_radius_km must be positive")
        check(self.serving_radius_km > 0, "serving_radius_km", "serving_radius_km must be positive")
        check(self.inter_sat_distance_km >= 0, "inter_sat_distance_km", "inter_sat_distance_km must be non-negative")
        check(self.orbit_topology in TOPOLOGIES, "orbit_topology", f"orbit_topology must be one of {TOPOLOGIES}")
        check(self.geometry_mode in GEOMETRY_MODES, "geometry_mode", f"geometry_mode must be one of {GEOMETRY_MODES}")
        check(self.n_users >= 0, "n_users", "n_users must be non-negative")
        check(self.time_step_s >= 0, "time_step_s", "time_step_s must be non-negative")
        check(self.aperture_radius_m > 0, "aperture_radius_m", "aperture_radius_m must be positive")
        check(self.theta_max_factor > 0, "theta_max_factor", "theta_max_factor must be positive")
        check(self.shadow_sigma_db >= 0, "shadow_sigma_db", "shadow_sigma_db must be non-negative")
        check(self.iterations >= 0, "iterations", "iterations must be non-negative")
        check(self.reward_scale > 0, "reward_scale", "reward_scale must be positive")
        check(self.outage_threshold_bps >= 0, "outage_threshold_bps", "outage_threshold_bps must be non-negative")
        check(
            all(offset >= 0 for offset in self.power_offsets_db) and len(self.power_offsets_db) > 0,
            "power_offsets_db",
            "power_offsets_db must be a non-empty list of non-negative offsets",
        )
        for pool in ("power_pool", "beam_pool", "channel_pool", "joint_pool"):
            check(getattr(self, pool) >= 1, pool, f"{pool} must be at least 1")
        check(self.log_every >= 1, "log_every", "log_every must be at least 1")

    # derived quantities
    @property
    def beam_slots(self) -> int:
        """Number of illuminated cells per satellite: L_illum with beam allocation, M without."""
        return self.max_illuminated if self.beam_allocation else self.cells_per_satellite

    @property
    def subchannel_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / self.n_subchannels

    @property
    def p_leo_w(self) -> float:
        return dbm_to_watt(self.p_leo_dbm)

    @property
    def p_beam_w(self) -> float:
        return dbm_to_watt(self.p_beam_dbm)

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watt(self.noise_psd_dbm_hz) * self.subchannel_bandwidth_hz

    @property
    def wave_number(self) -> float:
        return 2.0 * math.pi * self.carrier_frequency_hz / SPEED_OF_LIGHT

    @property
    def tx_gain(self) -> float:
        return db_to_linear(self.tx_gain_dbi)

    @property
    def rx_gain(self) -> float:
        return db_to_linear(self.rx_gain_dbi)

    @property
    def window(self) -> int:
        """Length of the trailing window the summary statistics are computed over."""
        return min(self.iterations, max(500, self.iterations // 10))

    def replace(self, **changes) -> "ScenarioConfig":
        return build_config(changes, base=self)

    def as_dict(self) -> th.Dict[str, th.Any]:
        return dataclasses.asdict(self)


FIELDS = {field.name: field for field in dataclasses.fields(ScenarioConfig)}

# named scenario scales, applied before configuration files and flags
SCALES: th.Dict[str, th.Dict[str, th.Any]] = {
    "full": {},
    "desk": {
        "n_satellites": 3,
        "n_users": 30,
        "cells_per_satellite": 7,
        "max_illuminated": 5,
        "n_subchannels": 8,
        "iterations": 5000,
        "serving_radius_km": "sqrt(3) * beam_radius_km + beam_radius_km",
        "bandwidth_hz": "8e6 * n_subchannels",
    },
}
DESK_CAPS = {"n_satellites": 4, "n_users": 60, "iterations": 5000}


def _parse_bool(value: th.Any, field: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return bool(value)
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on", "ba"):
        return True
    if lowered in ("0", "false", "no", "off", "nba"):
        return False
    raise ConfigurationError(f"{field} expects a boolean, got {value!r}", field=field)


def _coerce(name: str, value: th.Any) -> th.Any:
    """Casts an evaluated value to the declared type of field `name`."""
    kind = FIELDS[name].type
    if value is None:
        if kind in (th.Optional[float], th.Optional[int]):
            return None
        raise ConfigurationError(f"{name} cannot be empty", field=name)
    if kind is bool:
        return _parse_bool(value, name)
    if kind is str:
        return str(value).strip()
    if kind == th.Tuple[float, ...]:
        values = value if isinstance(value, (list, tuple)) else (value,)
        try:
            return tuple(float(v) for v in values)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"{name} expects numbers, got {value!r}", field=name) from e
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"{name} expects a number, got {value!r}", field=name) from e
    if kind is int:
        if not number.is_integer():
            raise ConfigurationError(f"{name} expects an integer, got {value!r}", field=name)
        return int(number)
    return number


def build_config(
    overrides: th.Optional[th.Mapping[str, th.Any]] = None,
    base: th.Optional[ScenarioConfig] = None,
    lines: th.Optional[th.Mapping[str, int]] = None,
) -> ScenarioConfig:
    """
    Merges `overrides` into `base` (the reference defaults when omitted) and validates the result.

    String values of non-string fields are expressions evaluated with the constant registry
    and the other fields in scope, e.g. {"aperture_radius_m": "10 * c / carrier_frequency_hz"}.
    Expressions may reference each other; they are resolved in dependency order.

    Args:
        overrides (dict): Field values (raw or expressions). Unknown keys are rejected.
        base (ScenarioConfig): Configuration to start from.
        lines (dict): Optional key -> line number map, used in error messages.

    Returns:
        ScenarioConfig: The validated configuration.

    Raises:
        ConfigurationError: On unknown keys, unresolvable expressions or invariant violations.
    """
    overrides = dict(overrides or {})
    lines = lines or {}
    for key in overrides:
        if key not in FIELDS:
            raise ConfigurationError(f"unknown configuration key {key!r}", field=key, line=lines.get(key))

    values = dataclasses.asdict(base) if base is not None else {
        name: field.default for name, field in FIELDS.items()
    }
    if base is not None and "aperture_radius_m" not in overrides and "carrier_frequency_hz" in overrides:
        # the aperture default tracks the carrier unless it was set explicitly
        values["aperture_radius_m"] = None

    pending = {}
    for key, raw in overrides.items():
        if isinstance(raw, str) and FIELDS[key].type is not str and FIELDS[key].type is not bool:
            pending[key] = raw
        else:
            values[key] = _coerce(key, raw)

    # resolve expressions in dependency order
    while pending:
        progress = False
        errors = {}
        for key, raw in list(pending.items()):
            context = {name: value for name, value in values.items() if name not in pending}
            try:
                if FIELDS[key].type == th.Tuple[float, ...] and "," in raw and "(" not in raw:
                    value = tuple(evaluate(part, context) for part in raw.split(","))
                else:
                    value = evaluate(raw, context)
            except ValueError as e:
                errors[key] = e
                continue
            values[key] = _coerce(key, value)
            del pending[key]
            progress = True
        if not progress:
            key, error = next(iter(errors.items()))
            raise ConfigurationError(f"cannot evaluate {key}: {error}", field=key, line=lines.get(key))

    try:
        return ScenarioConfig(**values)
    except ConfigurationError as e:
        if e.line is None and e.field in lines:
            raise ConfigurationError(str(e), field=e.field, line=lines[e.field]) from None
        raise


def read_config_file(path: str) -> th.Tuple[NestedMapping, th.Dict[str, int]]:
    """
    Reads an INI-style configuration file (`[section]` headers, `key = value` lines).

    Args:
        path (str): Path of the file.

    Returns:
        (dict, dict): The sectioned raw values and a key -> line number map.

    Raises:
        ConfigurationError: On syntax errors (with the offending line number).
    """
    with open(path, encoding="utf-8") as f:
        text = f.read()
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str  # keys are case sensitive field names
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        if line is None and getattr(e, "errors", None):
            line = e.errors[0][0]
        raise ConfigurationError(f"cannot parse {path}: {e.message.splitlines()[0]}", line=line) from None

    raw: NestedMapping = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            assign(f"{section}.{key}", value, raw)
    line_numbers = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]", line)
        if match:
            line_numbers[match.group(1)] = number
    return raw, line_numbers


def environment_overrides(environ: th.Optional[th.Mapping[str, str]] = None) -> th.Dict[str, str]:
    """Collects `LEOBANDIT_<FIELD>` environment variables that name configuration fields."""
    environ = os.environ if environ is None else environ
    overrides = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX) and key[len(ENV_PREFIX):].lower() in FIELDS:
            overrides[key[len(ENV_PREFIX):].lower()] = value
    return overrides


def parse_config(
    path: th.Optional[str] = None,
    overrides: th.Optional[th.Mapping[str, th.Any]] = None,
    environ: th.Optional[th.Mapping[str, str]] = None,
    scale: str = "full",
    base: th.Optional[th.Mapping[str, th.Any]] = None,
) -> ScenarioConfig:
    """
    Builds a configuration from (in increasing precedence) the reference defaults, a named scale,
    a preset base, a configuration file, environment variables and explicit overrides.

    Args:
        path (str): Optional INI-style configuration file.
        overrides (dict): Explicit overrides (CLI flags); dotted "section.key" names are accepted.
        environ (dict): Environment to read `LEOBANDIT_*` overrides from (default: os.environ).
        scale (str): "full" or "desk".
        base (dict): Preset-level values applied on top of the scale.

    Returns:
        ScenarioConfig: The validated configuration.
    """
    if scale not in SCALES:
        raise ConfigurationError(f"unknown scale {scale!r}", field="scale")
    merged: th.Dict[str, th.Any] = dict(SCALES[scale])
    merged.update(base or {})
    lines: th.Dict[str, int] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigurationError(f"configuration file {path} does not exist")
        raw, lines = read_config_file(path)
        merged.update(flatten(raw))
    merged.update(environment_overrides(environ))
    nested: NestedMapping = {}
    for key, value in (overrides or {}).items():
        assign(key, value, nested)
    merged.update(flatten(nested))
    config = build_config(merged, lines=lines)
    if scale == "desk":
        for key, cap in DESK_CAPS.items():
            if getattr(config, key) > cap:
                raise ConfigurationError(f"{key} exceeds the desk scale cap of {cap}", field=key)
    logger.debug("configuration: %s", config)
    return config
