"""
Run Configuration Loader

Parses flat ``key = value`` config files and merges profile defaults, file
entries, command-line overrides and the ``DABFORMER_SEED`` environment variable
into a validated ``RunConfig``.

Grammar::

    line  := ws* (comment | entry)? ws*
    comment := '#' any*
    entry := key ws* '=' ws* value ws* comment?
    key   := dotted identifier (model.base_channels, optimizer.lr, seed)
    value := int | float | true | false | a-b (pair) | comma-separated list | bare string

A trailing comma makes a one-element list (``model.blocks = 2,``).
"""

import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from pydantic import ValidationError

from dabformer.config import config as profiles
from dabformer.schemas.run_schema import RunConfig
from dabformer.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")


def parse_scalar(raw: str) -> Any:
    text = raw.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "-" in text[1:]:
        low, _, high = text.partition("-")
        try:
            return (float(low), float(high))
        except ValueError:
            pass
    return text


def parse_value(raw: str) -> Any:
    if "," in raw:
        return [parse_scalar(item) for item in raw.split(",") if item.strip()]
    return parse_scalar(raw)


def parse_config_text(text: str) -> Dict[str, Tuple[Any, int]]:
    """
    Parse config text into ``{key: (value, line_number)}``.

    Raises:
        ConfigError: Malformed line, bad key or duplicate key, with its line number
    """
    entries: Dict[str, Tuple[Any, int]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", line=number)
        key, _, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r}", line=number)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", line=number)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key][1]})", line=number)
        entries[key] = (parse_value(raw), number)
    return entries


def set_dotted(tree: Dict[str, Any], key: str, value: Any) -> None:
    node = tree
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{'.'.join(parts[:-1])} is not a section")
        node = child
    node[parts[-1]] = value


def _line_for(loc: Tuple, lines: Mapping[str, int]) -> Optional[int]:
    dotted = ".".join(str(p) for p in loc if not isinstance(p, int))
    while dotted:
        if dotted in lines:
            return lines[dotted]
        matches = [n for k, n in lines.items() if k.startswith(dotted + ".")]
        if matches:
            return min(matches)
        dotted = dotted.rpartition(".")[0]
    return None


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    profile: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Build a validated run configuration.

    Precedence: profile defaults < config file < ``overrides`` < ``DABFORMER_SEED``.

    Args:
        path: Optional config file
        overrides: Dotted-key values, typically from command-line flags
        profile: Profile name (desk, full, testing); defaults to ``DABFORMER_ENV``
        environ: Environment mapping, ``os.environ`` by default

    Raises:
        ConfigError: Parse or validation failure, with a line number when it
            traces back to the config file
    """
    environ = os.environ if environ is None else environ
    profile = profile or environ.get("DABFORMER_ENV", "default")
    if profile not in profiles:
        raise ConfigError(f"unknown profile {profile!r}", details=f"choose from {', '.join(profiles)}")

    tree: Dict[str, Any] = {}
    for key, value in profiles[profile].run_defaults().items():
        set_dotted(tree, key, value)

    lines: Dict[str, int] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for key, (value, number) in parse_config_text(path.read_text()).items():
            try:
                set_dotted(tree, key, value)
            except ConfigError as e:
                raise ConfigError(e.message, line=number) from e
            lines[key] = number

    for key, value in (overrides or {}).items():
        if value is not None:
            set_dotted(tree, key, value)

    seed = environ.get("DABFORMER_SEED")
    if seed is not None:
        try:
            tree["seed"] = int(seed)
        except ValueError as e:
            raise ConfigError(f"DABFORMER_SEED must be an integer, got {seed!r}") from e

    try:
        run = RunConfig.model_validate(tree)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"{where}: {first['msg']}", line=_line_for(first["loc"], lines)) from e
    logger.debug(f"Run config loaded (profile={profile}, file={path}, seed={run.seed})")
    return run
