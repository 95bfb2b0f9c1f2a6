"""Agreement-analysis results, the study report and the trial manifest."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from src.exceptions import InvalidInput
from src.models.params import PARAMETERS

REFERENCE_SYSTEM = 'Platforms'


@dataclass(frozen=True, eq=False)
class PairedSeries:
    """Per-video values of one parameter from an estimating system and the reference."""

    est: np.ndarray
    ref: np.ndarray
    video_ids: tuple = None

    def __post_init__(self):
        est = np.array(self.est, dtype=float).ravel()
        ref = np.array(self.ref, dtype=float).ravel()
        if est.shape != ref.shape:
            raise InvalidInput(f'paired series lengths differ: {est.size} vs {ref.size}')
        if est.size < 1:
            raise InvalidInput('paired series is empty')
        if not (np.all(np.isfinite(est)) and np.all(np.isfinite(ref))):
            raise InvalidInput('paired series values must be finite')
        ids = self.video_ids
        if ids is None:
            ids = tuple(str(i) for i in range(est.size))
        ids = tuple(str(i) for i in ids)
        if len(ids) != est.size:
            raise InvalidInput(f'{len(ids)} video ids for {est.size} pairs')
        if len(set(ids)) != len(ids):
            raise InvalidInput('video ids must be unique')
        est.setflags(write=False)
        ref.setflags(write=False)
        object.__setattr__(self, 'est', est)
        object.__setattr__(self, 'ref', ref)
        object.__setattr__(self, 'video_ids', ids)

    def __len__(self):
        return self.est.size

    def __repr__(self):
        return f'<PairedSeries n={len(self)}>'

    def swapped(self):
        return PairedSeries(self.ref, self.est, self.video_ids)


@dataclass(frozen=True)
class BlandAltmanResult:
    bias: float
    sd_diff: float
    loa_lower: float
    loa_upper: float
    n: int
    # (pair mean, pair difference, video id) per pair
    points: tuple = field(default=(), repr=False)

    @property
    def half_width(self):
        return self.loa_upper - self.bias

    def to_dict(self):
        return {'bias': self.bias, 'sd_diff': self.sd_diff,
                'loa_lower': self.loa_lower, 'loa_upper': self.loa_upper, 'n': self.n}


@dataclass(frozen=True)
class AbsErrorSummary:
    """Accuracy (mean) and precision (SD) of the per-video absolute errors."""

    accuracy_mu: float
    precision_sigma: float
    errors: tuple = field(default=(), repr=False)
    video_ids: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {'accuracy_mu': self.accuracy_mu, 'precision_sigma': self.precision_sigma,
                'n': len(self.errors)}


@dataclass(frozen=True)
class NormalityResult:
    w_statistic: float
    p_value: float
    n: int

    @property
    def normal_at_5_percent(self):
        return self.p_value > 0.05

    def to_dict(self):
        return {'w_statistic': self.w_statistic, 'p_value': self.p_value, 'n': self.n}


class CorrelationStrength(str, Enum):
    STRONG = 'strong'
    MODERATE = 'moderate'
    LOW = 'low'

    @classmethod
    def classify(cls, r):
        """Annotation band for a correlation coefficient: >0.7 strong, <0.5 low."""
        if r > 0.7:
            return cls.STRONG
        if r < 0.5:
            return cls.LOW
        return cls.MODERATE


@dataclass
class StudyReport:
    """Everything the report emitters write, keyed by system and parameter.

    ``table_a`` holds one TrialAggregate per system (reference included);
    ``table_b``, ``table_c`` and ``pearson`` are keyed by (system, parameter)
    for the estimating systems; ``normality`` by (dataset, parameter).
    ``per_video`` keeps the paired values: system -> parameter -> {video: value}.
    """

    systems: list = field(default_factory=list)
    reference: str = REFERENCE_SYSTEM
    parameters: tuple = PARAMETERS
    table_a: dict = field(default_factory=dict)
    table_b: dict = field(default_factory=dict)
    table_c: dict = field(default_factory=dict)
    pearson: dict = field(default_factory=dict)
    normality: dict = field(default_factory=dict)
    per_video: dict = field(default_factory=dict)
    subjects: dict = field(default_factory=dict)
    # (system, parameter) -> analyzed videos left out of that pairing for lack of a value
    unpaired: dict = field(default_factory=dict)

    def __repr__(self):
        return f'<StudyReport systems={self.systems} reference={self.reference}>'

    @property
    def is_empty(self):
        return not self.systems or not self.table_a

    @property
    def all_datasets(self):
        """Descriptive table row order: reference first, then the estimating systems."""
        return [self.reference] + [s for s in self.systems if s != self.reference]

    def paired(self, system, parameter):
        """PairedSeries of one system against the reference, ordered by video id."""
        est = self.per_video[system][parameter]
        ref = self.per_video[self.reference][parameter]
        ids = sorted(set(est) & set(ref))
        return PairedSeries([est[i] for i in ids], [ref[i] for i in ids], ids)


class InputFormat(str, Enum):
    GRF = 'grf'
    DLC = 'dlc'
    OPENPOSE = 'openpose'


@dataclass(frozen=True)
class ManifestEntry:
    trial_id: str
    system_tag: str
    format: InputFormat
    path: Path
    subject_id: str = ''
    fps: float = None
    fs: float = None
    # platform index -> Foot, or None for the alternation default
    platform_feet: dict = None

    @property
    def is_reference(self):
        return self.system_tag == REFERENCE_SYSTEM

    def __repr__(self):
        return f'<ManifestEntry {self.system_tag}/{self.trial_id} {self.format.value}>'


@dataclass(frozen=True)
class Manifest:
    entries: tuple = ()
    base_dir: Path = None

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            key = (entry.system_tag, entry.trial_id)
            if key in seen:
                raise InvalidInput(f'duplicate trial_id {entry.trial_id!r} for system {entry.system_tag!r}')
            seen.add(key)

    def __len__(self):
        return len(self.entries)

    @property
    def systems(self):
        return sorted({entry.system_tag for entry in self.entries})

    def for_system(self, system_tag):
        return sorted((e for e in self.entries if e.system_tag == system_tag), key=lambda e: e.trial_id)
