"""Flat ``key = value`` config files with ``[section]`` headers.

Recognised sections: ``[selection]``, ``[encode]``, ``[codec.external]`` and
``[generator]``. Command-line flags override file values.
"""

from __future__ import annotations

import configparser

from .errors import InputError


def load_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    if path:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise InputError(f"bad config {path}: {exc}") from None
    return parser


def pick(cli_value, parser: configparser.ConfigParser, section: str, key: str, default=None, cast=str):
    """CLI value if given, else the config entry, else ``default``."""
    if cli_value is not None:
        return cli_value
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            if cast is bool:
                return parser.getboolean(section, key)
            return cast(raw)
        except ValueError:
            raise InputError(f"config [{section}] {key} = {raw!r} is not a valid {cast.__name__}") from None
    return default
