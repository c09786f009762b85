"""Agent configuration: presets, config files, environment and flag overrides."""

import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

# Ensure UTF-8 output on Windows; see output.py.
if sys.platform == "win32":
    from .output import _ensure_utf8_streams

    _ensure_utf8_streams()

DEFAULT_CONFIG_FILE = Path.home() / ".env.web-agent"
ENV_PREFIX = "AGENT_"
API_KEY_VAR = "AGENT_LLM_API_KEY"

DEFAULT_MODEL = "gpt-4-turbo"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"

TRUE_VALUES = frozenset({"true", "1", "yes", "on"})
FALSE_VALUES = frozenset({"false", "0", "no", "off"})


class ConfigError(ValueError):
    """Raised when configuration sources hold unknown keys or invalid values."""

    def __init__(self, errors: list[str]):
        super().__init__("Configuration errors:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class LLMSettings:
    model: str = DEFAULT_MODEL
    endpoint: str = DEFAULT_ENDPOINT
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    backoff_factor: float = 1.0
    max_in_flight: int = 4


@dataclass(frozen=True)
class AgentConfig:
    reduce_actions: bool = True
    disable_scroll: bool = True
    condense_obs: bool = True
    history_replay: bool = True
    planning: bool = True
    judge: bool = False
    multisite: bool = False
    max_steps: int = 20
    history_window: int = 3
    llm: LLMSettings = field(default_factory=LLMSettings)
    template_path: str | None = None
    output_spec_path: str | None = None
    judge_template_path: str | None = None


# ═══════════════════════════════════════════════════════════════════════════════
# Presets: each step of the ladder adds one alignment component
# ═══════════════════════════════════════════════════════════════════════════════

_LADDER = ("reduce_actions", "disable_scroll", "condense_obs", "history_replay", "planning")


def _ladder(steps: int, judge: bool = False) -> dict[str, bool]:
    flags = {name: index < steps for index, name in enumerate(_LADDER)}
    flags["judge"] = judge
    return flags


PRESETS: dict[str, dict[str, bool]] = {
    "vanilla": _ladder(0),
    "reduced-actions": _ladder(1),
    "no-scroll": _ladder(2),
    "obs-opt": _ladder(3),
    "history": _ladder(4),
    "full": _ladder(5),
    "judge": _ladder(5, judge=True),
}
DEFAULT_PRESET = "full"


# ═══════════════════════════════════════════════════════════════════════════════
# Flat keys: top-level fields plus llm_* for LLMSettings
# ═══════════════════════════════════════════════════════════════════════════════


def _field_types() -> dict[str, type]:
    types: dict[str, type] = {}
    for f in fields(AgentConfig):
        if f.name == "llm":
            continue
        types[f.name] = f.type
    for f in fields(LLMSettings):
        types[f"llm_{f.name}"] = f.type
    return types


FIELD_TYPES = _field_types()
CONFIG_KEYS = tuple(FIELD_TYPES)


def _coerce(key: str, raw: Any) -> Any:
    kind = FIELD_TYPES[key]
    if not isinstance(raw, str):
        return raw
    value = raw.strip()
    if kind is bool:
        lowered = value.lower()
        if lowered in TRUE_VALUES:
            return True
        if lowered in FALSE_VALUES:
            return False
        raise ValueError(f"{key} must be a boolean (true/false), got {raw!r}")
    if kind is int:
        try:
            return int(value)
        except ValueError:
            raise ValueError(f"{key} must be an integer, got {raw!r}") from None
    if kind is float:
        try:
            return float(value)
        except ValueError:
            raise ValueError(f"{key} must be a number, got {raw!r}") from None
    # Optional paths: empty means unset.
    if "None" in str(kind):
        return value or None
    return value


def load_env_file(config_file: str | None = None) -> dict[str, str]:
    """Read ``key=value`` lines from a config file.

    Priority order:
    1. Explicit config_file parameter (must exist if specified)
    2. ~/.env.web-agent (if exists)

    Lines may carry an ``export`` prefix and quoted values; ``#`` starts a
    comment line.

    Raises:
        FileNotFoundError: If explicit config_file doesn't exist
    """
    values: dict[str, str] = {}
    path = Path(config_file) if config_file else DEFAULT_CONFIG_FILE

    if path.exists():
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith("#") and "=" in line:
                    key, _, value = line.partition("=")
                    key = key.strip()
                    # Strip optional 'export' prefix (bash compatibility)
                    if key.startswith("export "):
                        key = key[7:].strip()
                    values[key] = value.strip().strip('"').strip("'")
    elif config_file:
        raise FileNotFoundError(f"Config file not found: {path}")

    return values


def env_values(environ: dict | None = None) -> dict[str, str]:
    """``AGENT_<FIELD>`` variables for every known key (never the API key)."""
    environ = os.environ if environ is None else environ
    return {key: environ[ENV_PREFIX + key.upper()] for key in CONFIG_KEYS if ENV_PREFIX + key.upper() in environ}


def build_config(values: dict[str, Any]) -> AgentConfig:
    top = {key: value for key, value in values.items() if not key.startswith("llm_")}
    llm = {key[4:]: value for key, value in values.items() if key.startswith("llm_")}
    return AgentConfig(**top, llm=LLMSettings(**llm))


def validate_config(config: AgentConfig) -> list[str]:
    """Validate a configuration.

    Returns:
        List of validation errors (empty if valid)
    """
    errors = []
    if config.max_steps < 1:
        errors.append(f"max_steps must be at least 1, got {config.max_steps}")
    if config.history_window < 1:
        errors.append(f"history_window must be at least 1, got {config.history_window}")
    if config.planning and not config.history_replay:
        errors.append("planning requires history_replay (plans scope the replayed history)")
    if config.llm.temperature < 0:
        errors.append(f"llm_temperature must not be negative, got {config.llm.temperature}")
    if config.llm.max_retries < 0:
        errors.append(f"llm_max_retries must not be negative, got {config.llm.max_retries}")
    if config.llm.max_in_flight < 1:
        errors.append(f"llm_max_in_flight must be at least 1, got {config.llm.max_in_flight}")
    if config.llm.timeout <= 0:
        errors.append(f"llm_timeout must be positive, got {config.llm.timeout}")
    if not config.llm.endpoint.startswith(("http://", "https://")):
        errors.append(f"llm_endpoint must start with http:// or https://: {config.llm.endpoint}")
    return errors


def load_config(
    config_file: str | None = None,
    preset: str | None = None,
    overrides: dict[str, Any] | None = None,
    environ: dict | None = None,
) -> AgentConfig:
    """Resolve an AgentConfig from every source.

    Priority (highest first):
    1. ``overrides`` (CLI flags; None values are ignored)
    2. Config file values
    3. ``AGENT_<FIELD>`` environment variables
    4. Preset flags
    5. Built-in defaults

    Raises:
        FileNotFoundError: If an explicit config_file doesn't exist
        ConfigError: On unknown preset or keys, unparsable values, or a
            configuration that fails :func:`validate_config`
    """
    preset = preset or DEFAULT_PRESET
    if preset not in PRESETS:
        raise ConfigError([f"Unknown preset '{preset}'. Available: {', '.join(PRESETS)}"])

    errors: list[str] = []
    resolved: dict[str, Any] = {}
    layers = [
        ("preset", PRESETS[preset]),
        ("environment", env_values(environ)),
        ("config file", load_env_file(config_file)),
        ("flags", {key: value for key, value in (overrides or {}).items() if value is not None}),
    ]
    for source, layer in layers:
        for key, raw in layer.items():
            if key not in FIELD_TYPES:
                errors.append(f"Unknown key '{key}' in {source}")
                continue
            try:
                resolved[key] = _coerce(key, raw)
            except ValueError as e:
                errors.append(str(e))
    if errors:
        raise ConfigError(errors)

    config = build_config(resolved)
    errors = validate_config(config)
    if errors:
        raise ConfigError(errors)
    return config


def config_snapshot(config: AgentConfig) -> dict[str, Any]:
    """Plain-dict form of a config for trajectory logs. Holds no secrets."""
    return asdict(config)


def with_overrides(config: AgentConfig, **changes) -> AgentConfig:
    """Copy of ``config`` with top-level fields replaced."""
    return replace(config, **changes)
