"""Gait events, event sequences, pass windows and event-detection tuning."""

from dataclasses import dataclass
from enum import Enum

import pandas as pd

from src.exceptions import AlternationError, InvalidInput

EVENT_COLUMNS = ['time_s', 'foot', 'kind', 'source', 'pass_id']


class Foot(str, Enum):
    LEFT = 'L'
    RIGHT = 'R'

    @property
    def other(self):
        return Foot.RIGHT if self is Foot.LEFT else Foot.LEFT

    @classmethod
    def parse(cls, value):
        """Accept 'L'/'R', 'left'/'right' or a Foot, case-insensitive."""
        if isinstance(value, Foot):
            return value
        text = str(value).strip().lower()
        if text in ('l', 'left'):
            return cls.LEFT
        if text in ('r', 'right'):
            return cls.RIGHT
        raise InvalidInput(f'Unknown foot: {value!r}')


class EventKind(str, Enum):
    HC = 'HC'
    TO = 'TO'


class EventSource(str, Enum):
    FORCE = 'Force'
    KINEMATIC = 'Kinematic'


class Direction(int, Enum):
    POSITIVE_X = 1
    NEGATIVE_X = -1

    @property
    def label(self):
        return '+x' if self is Direction.POSITIVE_X else '-x'


@dataclass(frozen=True)
class GaitEvent:
    """A heel contact or toe off of one foot, in seconds from the trial origin."""

    time_s: float
    foot: Foot
    kind: EventKind
    source: EventSource
    pass_id: int = 0

    def __post_init__(self):
        if not self.time_s >= 0:
            raise InvalidInput(f'event time must be non-negative, got {self.time_s!r}')
        if self.pass_id < 0:
            raise InvalidInput(f'pass_id must be non-negative, got {self.pass_id!r}')

    def __repr__(self):
        return f'<GaitEvent {self.foot.value}-{self.kind.value}@{self.time_s:.3f}s pass {self.pass_id}>'

    def to_dict(self):
        return {
            'time_s': self.time_s,
            'foot': self.foot.value,
            'kind': self.kind.value,
            'source': self.source.value,
            'pass_id': self.pass_id,
        }


def _sort_key(event):
    return (event.time_s, event.pass_id, event.foot.value, event.kind.value)


@dataclass(frozen=True)
class EventSequence:
    """Time-ordered gait events of one trial.

    Construction sorts the events and checks that, per foot within a pass,
    heel contacts and toe offs strictly alternate; a violation raises
    AlternationError. ``ankle_substituted`` records that heel and toe events
    were derived from the ankle keypoint.
    """

    events: tuple = ()
    meta: object = None
    ankle_substituted: bool = False

    def __post_init__(self):
        events = tuple(sorted(self.events, key=_sort_key))
        object.__setattr__(self, 'events', events)
        self._check_alternation()

    def _check_alternation(self):
        last_kind = {}
        for event in self.events:
            key = (event.pass_id, event.foot)
            if last_kind.get(key) is event.kind:
                raise AlternationError(
                    f'{event.foot.value} {event.kind.value} at {event.time_s:.3f}s follows another '
                    f'{event.kind.value} in pass {event.pass_id}',
                    context=getattr(self.meta, 'trial_id', None))
            last_kind[key] = event.kind

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __repr__(self):
        trial = getattr(self.meta, 'trial_id', '?')
        return f'<EventSequence {trial}: {len(self.events)} events, {len(self.pass_ids)} passes>'

    @property
    def pass_ids(self):
        return sorted({event.pass_id for event in self.events})

    def select(self, foot=None, kind=None, pass_id=None):
        """Events matching every given filter, in time order."""
        return [event for event in self.events
                if (foot is None or event.foot is foot)
                and (kind is None or event.kind is kind)
                and (pass_id is None or event.pass_id == pass_id)]

    def with_meta(self, meta):
        return EventSequence(self.events, meta, self.ankle_substituted)

    def to_frame(self):
        """DataFrame with columns ``time_s,foot,kind,source,pass_id``."""
        return pd.DataFrame([event.to_dict() for event in self.events], columns=EVENT_COLUMNS)


@dataclass(frozen=True)
class PassWindow:
    """Half-open frame range [start_frame, end_frame) of one walkway traversal."""

    start_frame: int
    end_frame: int
    direction: Direction
    pass_id: int = 0

    def __post_init__(self):
        if not 0 <= self.start_frame < self.end_frame:
            raise InvalidInput(f'pass window needs 0 <= start < end, got [{self.start_frame}, {self.end_frame})')

    def __repr__(self):
        return f'<PassWindow {self.pass_id}: [{self.start_frame}, {self.end_frame}) {self.direction.label}>'

    @property
    def n_frames(self):
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class EventConfig:
    grf_threshold_n: float = 10.0
    min_stance_s: float = 0.2
    min_event_separation_s: float = 0.25
    peak_prominence_px: float = 10.0

    def __post_init__(self):
        # a zero threshold is the literal "above the zero line" rule
        if not self.grf_threshold_n >= 0:
            raise InvalidInput(f'grf_threshold_n must be >= 0, got {self.grf_threshold_n!r}')
        for name in ('min_stance_s', 'min_event_separation_s', 'peak_prominence_px'):
            value = getattr(self, name)
            if not value > 0:
                raise InvalidInput(f'{name} must be positive, got {value!r}')
