"""
Experiment Configuration

Strict, versioned schema for Monte Carlo experiment configs and the JSON
loader behind `--config`. Unknown fields are rejected; range errors name
the offending field path.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from exceptions import ConfigParseError, ConfigValidationError, SchemaViolation

logger = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = '1.0'

MAX_SEED = 2 ** 64 - 1

PresetName = Literal['fig1', 'fig2', 'fig3', 'fluct_lemma', 'consensus']

# Fields each preset fills in unless the config overrides them.
PRESET_DEFAULTS: Dict[str, Dict[str, Any]] = {
    'fig1': {'faction_sizes': [5, 7], 'horizon': 200_000, 'trials': 100},
    'fig2': {'faction_sizes': [3, 4, 5], 'horizon': 200_000, 'trials': 100},
    'fig3': {'faction_sizes': [5, 7], 'horizon': 200_000, 'trials': 100, 'flip_count': 3},
    'fluct_lemma': {
        'faction_sizes': [3, 4, 5],
        'horizon': 1_000_000,
        'trials': 20,
        'initial_condition': 'pinned',
    },
    'consensus': {'faction_sizes': [8], 'horizon': 100_000, 'trials': 100},
}

_PRESET_FACTIONS = {
    'fig1': lambda k: k == 2,
    'fig2': lambda k: k >= 3,
    'fig3': lambda k: k == 2,
    'fluct_lemma': lambda k: k == 3,
    'consensus': lambda k: k == 1,
}


def _invalid(field_path: str, message: str) -> ConfigValidationError:
    return ConfigValidationError(f"{field_path}: {message}", field_path=field_path)


class ExperimentConfig(BaseModel):
    """
    One Monte Carlo experiment.

    The graph comes from a preset, a graph file, or `faction_sizes` alone
    (complete clustered graph). Self-weights are given either as one shared
    `self_weight` or as a per-agent `self_weights` list.
    """

    model_config = ConfigDict(extra='forbid', frozen=True)

    schema_version: Literal['1.0'] = CONFIG_SCHEMA_VERSION
    preset: Optional[PresetName] = None
    graph_file: Optional[str] = None
    faction_sizes: Optional[List[int]] = None

    o_min: float = 0.0
    o_max: float = 1.0
    self_weight: Optional[float] = None
    self_weights: Optional[List[float]] = None

    horizon: int = Field(default=200_000, ge=1)
    trials: int = Field(default=100, ge=1)
    master_seed: Optional[int] = Field(default=None, ge=0, le=MAX_SEED)

    tol: float = Field(default=1e-3, gt=0)
    consensus_tol: float = Field(default=1e-6, gt=0)
    epsilon: float = Field(default=0.1, gt=0)

    flip_count: int = Field(default=0, ge=0)
    initial_condition: Literal['uniform', 'pinned', 'fixed'] = 'uniform'
    initial_opinions: Optional[List[float]] = None

    record_stride: int = Field(default=1, ge=1)
    stop_on_verdict: bool = True
    workers: int = Field(default=1, ge=1)

    @field_validator('faction_sizes')
    @classmethod
    def _positive_sizes(cls, sizes):
        if sizes is not None:
            if not sizes:
                raise ValueError('faction_sizes must be nonempty')
            if any(size < 1 for size in sizes):
                raise ValueError('faction sizes must be positive')
        return sizes

    @field_validator('self_weight')
    @classmethod
    def _open_unit_weight(cls, a):
        if a is not None and not 0.0 < a < 1.0:
            raise ValueError(f"self-weight must lie in the open interval (0, 1), got {a}")
        return a

    @field_validator('self_weights')
    @classmethod
    def _open_unit_weights(cls, weights):
        if weights is not None:
            for index, a in enumerate(weights):
                if not 0.0 < a < 1.0:
                    raise _invalid(f"self_weights.{index}", f"self-weight must lie in (0, 1), got {a}")
        return weights

    @model_validator(mode='after')
    def _consistent(self):
        if not self.o_min < self.o_max:
            raise _invalid('o_max', f"o_min < o_max required, got [{self.o_min}, {self.o_max}]")
        if not self.epsilon < self.span / 2:
            raise _invalid('epsilon', f"epsilon must be below (o_max - o_min) / 2 = {self.span / 2}")

        if (self.self_weight is None) == (self.self_weights is None):
            raise _invalid('self_weight', 'give exactly one of self_weight and self_weights')

        if self.graph_file is not None and (self.preset is not None or self.faction_sizes is not None):
            raise _invalid('graph_file', 'graph_file cannot be combined with preset or faction_sizes')
        if self.graph_file is None and self.faction_sizes is None:
            raise _invalid('faction_sizes', 'name a preset, a graph_file or faction_sizes')

        if self.preset is not None and not _PRESET_FACTIONS[self.preset](len(self.faction_sizes)):
            raise _invalid('faction_sizes', f"{self.faction_sizes} does not fit preset {self.preset}")
        if self.preset == 'fig3' and self.flip_count < 1:
            raise _invalid('flip_count', 'fig3 perturbs at least one edge')
        if self.preset is not None and self.preset != 'fig3' and self.flip_count:
            raise _invalid('flip_count', f"preset {self.preset} has no sign perturbation")

        if self.initial_condition == 'pinned':
            if self.faction_sizes is not None and len(self.faction_sizes) < 2:
                raise _invalid('initial_condition', 'pinned initial opinions need at least two factions')
        if self.initial_condition == 'fixed':
            if self.initial_opinions is None:
                raise _invalid('initial_opinions', "required when initial_condition is 'fixed'")
            for index, value in enumerate(self.initial_opinions):
                if not self.o_min <= value <= self.o_max:
                    raise _invalid(f"initial_opinions.{index}", f"{value} is outside [o_min, o_max]")
        elif self.initial_opinions is not None:
            raise _invalid('initial_opinions', "only allowed when initial_condition is 'fixed'")

        n = self.n
        if n is not None:
            if self.self_weights is not None and len(self.self_weights) != n:
                raise _invalid('self_weights', f"expected {n} weights, got {len(self.self_weights)}")
            if self.initial_opinions is not None and len(self.initial_opinions) != n:
                raise _invalid('initial_opinions', f"expected {n} values, got {len(self.initial_opinions)}")
        return self

    @property
    def span(self) -> float:
        return self.o_max - self.o_min

    @property
    def n(self) -> Optional[int]:
        """Agent count when known without reading the graph file."""
        return sum(self.faction_sizes) if self.faction_sizes is not None else None

    def override(self, **changes) -> 'ExperimentConfig':
        """Validated copy with some fields replaced; None values are ignored."""
        fields = self.model_dump()
        fields.update({key: value for key, value in changes.items() if value is not None})
        return build_config(fields)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


def _translate(error: ValidationError) -> Exception:
    details = error.errors()
    for detail in details:
        if detail['type'] == 'extra_forbidden':
            path = '.'.join(str(part) for part in detail['loc'])
            return SchemaViolation(f"Unknown config field '{path}'")
    first = details[0]
    original = first.get('ctx', {}).get('error')
    if isinstance(original, ConfigValidationError):
        return original
    path = '.'.join(str(part) for part in first['loc'])
    return ConfigValidationError(f"{path}: {first['msg']}", field_path=path)


def build_config(fields: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a config mapping, filling preset defaults underneath given fields.

    Raises:
        SchemaViolation: unknown field
        ConfigValidationError: value out of range (carries the field path)
    """
    data = dict(fields)
    preset_name = data.get('preset')
    if isinstance(preset_name, str) and preset_name in PRESET_DEFAULTS:
        data = {**PRESET_DEFAULTS[preset_name], **{k: v for k, v in data.items() if v is not None}}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as error:
        raise _translate(error) from None


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load and validate an experiment config JSON file.

    Raises:
        OSError: file cannot be read
        ConfigParseError: file is not valid UTF-8 JSON
        SchemaViolation: unknown field or non-object document
        ConfigValidationError: value out of range
    """
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except UnicodeDecodeError as error:
        raise ConfigParseError(f"{path}: not UTF-8 text ({error.reason} at byte {error.start})") from None
    except json.JSONDecodeError as error:
        raise ConfigParseError(f"{path}: invalid JSON ({error})") from None
    if not isinstance(data, dict):
        raise SchemaViolation(f"{path}: config must be a JSON object")
    config = build_config(data)
    logger.info("Loaded config %s (preset=%s)", path, config.preset)
    return config
