"""
Layered configuration loader.

Values come from, in order of preference: an explicit override (set from a
command-line flag), a ``COUGHNET_*`` environment variable, the flat
``key = value`` file given with ``--config``, and finally the defaults of
the typed dataclasses that consume them.
"""

import dataclasses
import logging
import os
import typing as ty

from coughnet import exceptions

LOG = logging.getLogger(__name__)

ENV_PREFIX = 'COUGHNET_'
SECTIONS = ('audio', 'features', 'training', 'augment', 'synth')

T = ty.TypeVar('T')


def parse_boolean(value: str) -> bool:
    """Parse a boolean config value.

    Accepts the same spellings as git-config.
    """
    value = value.strip().lower()

    if value in ('yes', 'on', 'true', '1', ''):
        return True

    if value in ('no', 'off', 'false', '0'):
        return False

    raise ValueError("'{}' is not a valid boolean value".format(value))


def parse_range(value: str) -> ty.Tuple[float, float]:
    """Parse a closed interval written ``lo,hi``."""
    parts = [p.strip() for p in value.split(',')]
    if len(parts) != 2:
        raise ValueError("'{}' is not a 'lo,hi' range".format(value))

    lo, hi = float(parts[0]), float(parts[1])
    if lo > hi:
        raise ValueError('range {} is empty'.format(value))

    return (lo, hi)


def env_name(key: str) -> str:
    return ENV_PREFIX + key.replace('.', '_').replace('-', '_').upper()


def read_config_file(path: str) -> ty.Dict[str, str]:
    """Read a flat ``key = value`` file, ignoring blanks and ``#`` lines."""
    values: ty.Dict[str, str] = {}

    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue

            if '=' not in line:
                raise exceptions.ConfigError(
                    '{}:{}'.format(path, lineno),
                    "expected 'key = value'",
                )

            key, _, value = line.partition('=')
            key = key.strip()
            section = key.split('.', 1)[0]
            if '.' not in key or section not in SECTIONS:
                raise exceptions.ConfigError(key, 'unknown configuration key')

            values[key] = value.strip()

    LOG.debug('Read %d settings from %s', len(values), path)

    return values


class Config(object):
    def __init__(self) -> None:
        self.debug = False
        self.seed: ty.Optional[int] = None
        self.jobs = 1
        self.out = '.'
        self._overrides: ty.Dict[str, str] = {}
        self._file_values: ty.Dict[str, str] = {}
        self._path: ty.Optional[str] = None

    def load(self, path: ty.Optional[str]) -> None:
        self._path = path
        self._file_values = read_config_file(path) if path else {}

    def set(self, key: str, value: ty.Any) -> None:
        """Record an explicit override, typically from a CLI flag."""
        if value is None:
            return
        self._overrides[key] = str(value)

    def reset(self) -> None:
        self.debug = False
        self.seed = None
        self.jobs = 1
        self.out = '.'
        self._overrides = {}
        self._file_values = {}
        self._path = None

    def get(self, key: str) -> ty.Optional[str]:
        if key in self._overrides:
            LOG.debug("Retrieved '%s' setting from override", key)
            return self._overrides[key]

        value = os.environ.get(env_name(key))
        if value is not None:
            LOG.debug("Retrieved '%s' setting from environment", key)
            return value

        if key in self._file_values:
            LOG.debug("Retrieved '%s' setting from %s", key, self._path)
            return self._file_values[key]

        return None

    def keys(self, section: str) -> ty.List[str]:
        """Keys set in the file or overrides for the given section."""
        prefix = section + '.'
        found = set(self._file_values) | set(self._overrides)
        return sorted(k for k in found if k.startswith(prefix))

    def echo(self) -> ty.Dict[str, str]:
        """All non-default settings, for run metadata."""
        values = dict(self._file_values)
        values.update(self._overrides)
        return dict(sorted(values.items()))


def _convert(key: str, raw: str, default: ty.Any) -> ty.Any:
    try:
        if isinstance(default, bool):
            return parse_boolean(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return parse_range(raw)
        return raw
    except ValueError as exc:
        raise exceptions.ConfigError(key, str(exc))


def populate(
    cls: ty.Type[T],
    section: str,
    conf: ty.Optional[Config] = None,
    **extra: ty.Any,
) -> T:
    """Build dataclass ``cls`` from the ``section.*`` keys of ``conf``.

    Fields with a plain default (bool, int, float, str or a 2-tuple range)
    are looked up; anything else must be passed through ``extra``.
    """
    conf = conf or CONF
    kwargs: ty.Dict[str, ty.Any] = {}
    names = set()

    for field in dataclasses.fields(cls):  # type: ignore
        names.add(field.name)
        if field.name in extra:
            continue
        if field.default is dataclasses.MISSING:
            continue

        key = '{}.{}'.format(section, field.name)
        raw = conf.get(key)
        if raw is not None:
            kwargs[field.name] = _convert(key, raw, field.default)

    for key in conf.keys(section):
        name = key.split('.', 1)[1]
        if name not in names and not name.startswith('p_'):
            raise exceptions.ConfigError(key, 'unknown configuration key')

    kwargs.update(extra)

    return cls(**kwargs)  # type: ignore


CONF = Config()
