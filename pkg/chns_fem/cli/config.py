"""
File: config.py
Description:
    Run configuration: a TOML file (sections = key groups) with command-line overrides layered on top. Every
    rejection names the dotted key path it concerns.
"""
# Standard library imports
import tomllib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

# Package imports
from chns_fem.errors import ConfigError, InvalidParameterError, UnknownSolutionError
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import UNIT_SQUARE, Rect
from chns_fem.mms import StudyKind, registered_solutions
from chns_fem.scheme import NewtonSettings, PhysParams, TimeGrid


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('cli.config')


class RunMode(Enum):
    SIMULATE          = 'simulate'
    MMS_STUDY         = 'mms-study'
    STABILITY_SWEEP   = 'stability-sweep'
    GRONWALL_SELFTEST = 'gronwall-selftest'


class InitKind(Enum):
    EXACT_MMS   = 'exact-mms'
    RANDOM_SEED = 'random-seed'
    CONSTANT    = 'constant'


OUTPUT_FORMATS = ('csv', 'vtk')


@dataclass(frozen=True)
class InitSpec:
    """
    How the first level is produced.

    Attributes:
        kind (InitKind):
            exact-mms, random-seed or constant.

        value (Union[str, int, float]):
            The solution name, the seed or the constant, respectively.
    """
    kind:  InitKind
    value: Union[str, int, float]

    def __str__(self):
        return f'{self.kind.value}:{self.value}'


@dataclass(frozen=True)
class MeshConfig:
    nx:   int = 16
    ny:   int = 16
    rect: Rect = UNIT_SQUARE


@dataclass(frozen=True)
class OutputConfig:
    directory:      Path = Path('chns-output')
    snapshot_every: int = 10
    formats:        Tuple[str, ...] = OUTPUT_FORMATS


@dataclass(frozen=True)
class StudyConfig:
    kind:       StudyKind = StudyKind.TEMPORAL
    h_levels:   Tuple[float, ...] = (1 / 64,)
    tau_levels: Tuple[float, ...] = (1 / 10, 1 / 20, 1 / 40)
    final_time: float = 0.5
    solution:   str = 'default'

    def levels(self):
        """
        (h, τ) pairs: the full product of both ladders when one of them has a single entry, otherwise paired.
        """
        if len(self.h_levels) == 1:
            return [(self.h_levels[0], tau) for tau in self.tau_levels]

        if len(self.tau_levels) == 1:
            return [(h, self.tau_levels[0]) for h in self.h_levels]

        return list(zip(self.h_levels, self.tau_levels))


@dataclass(frozen=True)
class RunConfig:
    """
    A validated run configuration.
    """
    mode:   RunMode = RunMode.SIMULATE
    mesh:   MeshConfig = field(default_factory=MeshConfig)
    grid:   TimeGrid = field(default_factory=lambda: TimeGrid(tau=0.01, steps=100))
    params: PhysParams = field(default_factory=PhysParams)
    init:   InitSpec = field(default_factory=lambda: InitSpec(InitKind.RANDOM_SEED, 0))
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    output: OutputConfig = field(default_factory=OutputConfig)
    study:  StudyConfig = field(default_factory=StudyConfig)
    seed:   int = 0


# Section -> key -> default, in the order they are documented.
DEFAULTS: Dict[str, Dict[str, Any]] = {
    'run':    {'mode': 'simulate', 'seed': 0},
    'mesh':   {'nx': 16, 'ny': 16, 'rect': list(UNIT_SQUARE)},
    'grid':   {'tau': 0.01, 'steps': 100},
    'params': {'epsilon': 0.1, 'eta': 1.0, 'gamma': 1.0},
    'init':   {'spec': 'random-seed:0'},
    'newton': {'tol': 1e-11, 'max_iters': 30},
    'output': {'directory': 'chns-output', 'snapshot_every': 10, 'formats': list(OUTPUT_FORMATS)},
    'study':  {'kind': 'temporal', 'h_levels': [1 / 64], 'tau_levels': [1 / 10, 1 / 20, 1 / 40],
               'final_time': 0.5, 'solution': 'default'},
}

REQUIRED_KEYS = ('run.mode',)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _integer(key: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f'expected an integer, got {value!r}', key_path=key)

    if value < minimum:
        raise ConfigError(f'must be at least {minimum}, got {value!r}', key_path=key)

    return value


def _positive(key: str, value) -> float:
    if not _is_real(value):
        raise ConfigError(f'expected a real number, got {value!r}', key_path=key)

    if not value > 0:
        raise ConfigError(f'must be strictly positive, got {value!r}', key_path=key)

    return float(value)


def _string(key: str, value) -> str:
    if not isinstance(value, str):
        raise ConfigError(f'expected a string, got {value!r}', key_path=key)

    return value


def _positive_list(key: str, value) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f'expected a non-empty list, got {value!r}', key_path=key)

    return tuple(_positive(f'{key}[{i}]', v) for i, v in enumerate(value))


def _rect(key: str, value) -> Rect:
    if not isinstance(value, (list, tuple)) or len(value) != 4 or not all(_is_real(v) for v in value):
        raise ConfigError(f'expected [x0, y0, x1, y1], got {value!r}', key_path=key)

    x0, y0, x1, y1 = (float(v) for v in value)
    if x1 <= x0 or y1 <= y0:
        raise ConfigError(f'rectangle has no interior: {value!r}', key_path=key)

    return x0, y0, x1, y1


def _choice(key: str, value, enum_cls):
    try:
        return enum_cls(_string(key, value))
    except ValueError:
        allowed = ', '.join(member.value for member in enum_cls)
        raise ConfigError(f'{value!r} is not one of {allowed}', key_path=key) from None


def parse_init_spec(text: str, key: str = 'init.spec') -> InitSpec:
    """
    Parse `exact-mms:<name>`, `random-seed:<int>` or `constant:<value>`.

    Raises:
        ConfigError:
            On an unknown kind, a malformed value or an unregistered solution name.

    Examples:
        >>> parse_init_spec('random-seed:7')
        InitSpec(kind=<InitKind.RANDOM_SEED: 'random-seed'>, value=7)
    """
    kind_text, sep, raw = _string(key, text).partition(':')
    if not sep or not raw:
        raise ConfigError(f'expected <kind>:<value>, got {text!r}', key_path=key)

    kind = _choice(key, kind_text, InitKind)

    if kind is InitKind.RANDOM_SEED:
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(f'seed must be an integer, got {raw!r}', key_path=key) from None
        if seed < 0:
            raise ConfigError(f'seed must be non-negative, got {seed}', key_path=key)
        return InitSpec(kind, seed)

    if kind is InitKind.CONSTANT:
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f'constant must be a real number, got {raw!r}', key_path=key) from None
        return InitSpec(kind, value)

    if raw not in registered_solutions():
        raise ConfigError(f'unknown manufactured solution {raw!r}', key_path=key)

    return InitSpec(kind, raw)


def _merge(file_data: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Dict[str, Any]]:
    merged = {section: dict(keys) for section, keys in DEFAULTS.items()}

    for section, keys in file_data.items():
        if section not in DEFAULTS:
            raise ConfigError('unknown section', key_path=section)
        if not isinstance(keys, Mapping):
            raise ConfigError(f'expected a table, got {keys!r}', key_path=section)
        for key, value in keys.items():
            if key not in DEFAULTS[section]:
                raise ConfigError('unknown key', key_path=f'{section}.{key}')
            merged[section][key] = value

    for path, value in overrides.items():
        section, _, key = path.partition('.')
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError('unknown key', key_path=path)
        merged[section][key] = value

    return merged


def _build(data: Dict[str, Dict[str, Any]]) -> RunConfig:
    mode = _choice('run.mode', data['run']['mode'], RunMode)
    seed = _integer('run.seed', data['run']['seed'], minimum=0)

    mesh = MeshConfig(
        nx=_integer('mesh.nx', data['mesh']['nx']),
        ny=_integer('mesh.ny', data['mesh']['ny']),
        rect=_rect('mesh.rect', data['mesh']['rect']),
    )

    grid = TimeGrid(
        tau=_positive('grid.tau', data['grid']['tau']),
        steps=_integer('grid.steps', data['grid']['steps']),
    )

    params = PhysParams(**{name: _positive(f'params.{name}', data['params'][name])
                           for name in ('epsilon', 'eta', 'gamma')})

    init = parse_init_spec(data['init']['spec'])

    newton = NewtonSettings(
        tol=_positive('newton.tol', data['newton']['tol']),
        max_iters=_integer('newton.max_iters', data['newton']['max_iters']),
    )

    formats = data['output']['formats']
    if not isinstance(formats, (list, tuple)) or not all(f in OUTPUT_FORMATS for f in formats):
        raise ConfigError(f'expected a list drawn from {", ".join(OUTPUT_FORMATS)}, got {formats!r}',
                          key_path='output.formats')

    output = OutputConfig(
        directory=Path(_string('output.directory', data['output']['directory'])),
        snapshot_every=_integer('output.snapshot_every', data['output']['snapshot_every']),
        formats=tuple(dict.fromkeys(formats)),
    )

    solution = _string('study.solution', data['study']['solution'])
    if solution not in registered_solutions():
        raise ConfigError(f'unknown manufactured solution {solution!r}', key_path='study.solution')

    study = StudyConfig(
        kind=_choice('study.kind', data['study']['kind'], StudyKind),
        h_levels=_positive_list('study.h_levels', data['study']['h_levels']),
        tau_levels=_positive_list('study.tau_levels', data['study']['tau_levels']),
        final_time=_positive('study.final_time', data['study']['final_time']),
        solution=solution,
    )

    return RunConfig(mode=mode, mesh=mesh, grid=grid, params=params, init=init, newton=newton,
                     output=output, study=study, seed=seed)


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a TOML file into nested dictionaries.

    Raises:
        ConfigError:
            If the file cannot be read or parsed.
    """
    path = Path(path)
    try:
        with path.open('rb') as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f'cannot read {path}: {exc}') from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f'{path} is not valid TOML: {exc}') from exc


def parse_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
                 ) -> RunConfig:
    """
    Build a validated `RunConfig`.

    Parameters:
        path (Optional[Union[str, Path]]):
            TOML file. When given, `run.mode` must be present in it.

        overrides (Optional[Mapping[str, Any]]):
            Dotted key paths (e.g. `'grid.tau'`) that take precedence over the file.

    Returns:
        RunConfig:
            The configuration with every unspecified key at its documented default.

    Raises:
        ConfigError:
            On unknown keys, missing required keys, type errors and positivity violations; the message names the
            dotted key path.
    """
    log       = MOD_LOGGER.get_child('parse_config')
    overrides = dict(overrides or {})
    file_data = {}

    if path is not None:
        file_data = load_config_file(path)
        for required in REQUIRED_KEYS:
            section, _, key = required.partition('.')
            if key not in file_data.get(section, {}) and required not in overrides:
                raise ConfigError('missing required key', key_path=required)
        log.debug(f'Loaded configuration file {path}')

    merged = _merge(file_data, overrides)

    # A seed given on its own steers the random initial field too.
    if 'run.seed' in overrides and str(merged['init']['spec']).startswith(InitKind.RANDOM_SEED.value):
        merged['init']['spec'] = f'{InitKind.RANDOM_SEED.value}:{overrides["run.seed"]}'
    elif 'run.seed' not in overrides and 'seed' not in file_data.get('run', {}):
        spec = merged['init']['spec']
        if isinstance(spec, str) and spec.startswith(f'{InitKind.RANDOM_SEED.value}:'):
            try:
                merged['run']['seed'] = int(spec.partition(':')[2])
            except ValueError:
                pass

    try:
        config = _build(merged)
    except (InvalidParameterError, UnknownSolutionError) as exc:
        raise ConfigError(str(exc)) from exc

    log.debug(f'Configuration: mode = {config.mode.value}, init = {config.init}')

    return config


__all__ = [
    'DEFAULTS',
    'InitKind',
    'InitSpec',
    'MeshConfig',
    'OUTPUT_FORMATS',
    'OutputConfig',
    'RunConfig',
    'RunMode',
    'StudyConfig',
    'load_config_file',
    'parse_config',
    'parse_init_spec',
]
