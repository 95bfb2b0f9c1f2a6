"""Analysis configuration: defaults, a flat ``key = value`` file, and environment overrides.

Precedence is defaults < config file < ``GAITVAL_<KEY>`` environment variables.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass

from src.exceptions import InvalidInput
from src.models.events import EventConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = 'GAITVAL_'

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')

_CHOICES = {
    'first_foot': ('right', 'left', 'auto'),
    'preprocess_order': ('mask_first', 'filter_first'),
    'double_support': ('total', 'terminal'),
    'pooling': ('steps', 'subjects'),
}


@dataclass(frozen=True)
class AnalysisConfig:
    confidence_threshold: float = 0.5
    kin_filter_order: int = 4
    kin_cutoff_hz: float = 5.0
    grf_filter_order: int = 2
    grf_cutoff_hz: float = 20.0
    grf_threshold_n: float = 10.0
    min_stance_s: float = 0.2
    min_event_separation_s: float = 0.25
    peak_prominence_px: float = 10.0
    pass_persistence_s: float = 0.5
    pass_min_displacement_frac: float = 0.25
    force_pass_gap_s: float = 1.0
    first_foot: str = 'right'
    preprocess_order: str = 'mask_first'
    double_support: str = 'total'
    pooling: str = 'steps'
    image_width: int = 640
    image_height: int = 480
    camera_fps: float = 25.0
    person_index: int = None
    plots: bool = False

    def __post_init__(self):
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise InvalidInput(f'{key} must be one of {", ".join(allowed)}, got {getattr(self, key)!r}')
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise InvalidInput(f'confidence_threshold must be in [0, 1], got {self.confidence_threshold!r}')
        if self.image_width <= 0 or self.image_height <= 0 or self.camera_fps <= 0:
            raise InvalidInput('image size and camera_fps must be positive')
        if self.person_index is not None and self.person_index < 0:
            raise InvalidInput(f'person_index must be >= 0, got {self.person_index!r}')
        # EventConfig validates the detector thresholds
        self.event_config()

    def event_config(self):
        return EventConfig(
            grf_threshold_n=self.grf_threshold_n,
            min_stance_s=self.min_stance_s,
            min_event_separation_s=self.min_event_separation_s,
            peak_prominence_px=self.peak_prominence_px,
        )

    def kinematic_filter(self, fps):
        from src.dsp import design_butterworth
        return design_butterworth(self.kin_filter_order, self.kin_cutoff_hz, fps)

    def force_filter(self, fs):
        from src.dsp import design_butterworth
        return design_butterworth(self.grf_filter_order, self.grf_cutoff_hz, fs)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(AnalysisConfig)}


def _coerce(key, raw, where):
    """Convert the text of one setting to the field's type."""
    text = raw.strip()
    default = _FIELDS[key].default
    if key == 'person_index':
        if text.lower() in ('', 'none', 'auto'):
            return None
        kind = int
    elif isinstance(default, bool):
        lowered = text.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise InvalidInput(f'{key}: expected a boolean, got {raw!r}', location=where)
    else:
        kind = type(default)
    if kind is str:
        return text.lower()
    try:
        return kind(text)
    except ValueError:
        raise InvalidInput(f'{key}: expected {kind.__name__}, got {raw!r}', location=where)


def parse_config_text(text, source='<config>'):
    """Parse ``key = value`` lines into a dict of typed overrides."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        where = f'{source}, line {lineno}'
        if '=' not in stripped:
            raise InvalidInput(f'expected "key = value", got {line.strip()!r}', location=where)
        key, value = (part.strip() for part in stripped.split('=', 1))
        key = key.lower()
        if key not in _FIELDS:
            raise InvalidInput(f'unknown configuration key {key!r}', location=where)
        overrides[key] = _coerce(key, value, where)
    return overrides


def load_config(path=None, environ=None):
    """Build an AnalysisConfig from defaults, an optional file and ``GAITVAL_*`` variables.

    Args:
        path: optional path to a flat ``key = value`` file.
        environ: mapping to read overrides from; defaults to ``os.environ``.

    Raises:
        InvalidInput: unknown key, unparsable value or out-of-range setting.
    """
    environ = os.environ if environ is None else environ
    settings = {}
    if path is not None:
        with open(path, encoding='utf-8') as handle:
            settings.update(parse_config_text(handle.read(), source=str(path)))
        logger.debug('Loaded %d settings from %s', len(settings), path)
    for key in _FIELDS:
        env_name = ENV_PREFIX + key.upper()
        if env_name in environ:
            settings[key] = _coerce(key, environ[env_name], env_name)
    return AnalysisConfig(**settings)
