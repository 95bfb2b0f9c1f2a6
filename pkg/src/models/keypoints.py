"""Skeleton layouts, keypoint time series and trial metadata."""

import re
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import NamedTuple

import numpy as np

from src.exceptions import InvalidInput

ROLES = (
    'left_heel', 'right_heel',
    'left_toe', 'right_toe',
    'left_ankle', 'right_ankle',
    'left_hip', 'right_hip',
    'mid_hip',
)

_SEPARATORS = re.compile(r'[\s_\-.]+')


def normalize_part_name(name):
    """Case-fold a part name and strip separators: ' Right_Heel ' -> 'rightheel'."""
    return _SEPARATORS.sub('', str(name)).lower()


class LayoutName(str, Enum):
    BODY_25 = 'BODY_25'
    DLCPT_14 = 'DLCPT_14'
    DLCCT_16 = 'DLCCT_16'


class Part(NamedTuple):
    index: int
    name: str   # anatomical name as printed in the keypoint legend
    key: str    # token the producing tool writes in its own output files
    extra_aliases: tuple = ()

    @property
    def aliases(self):
        """Normalized names that resolve to this part."""
        found = {normalize_part_name(self.name), normalize_part_name(self.key)}
        for side, letter in (('right', 'r'), ('left', 'l')):
            norm = normalize_part_name(self.name)
            if norm.startswith(side):
                found.add(letter + norm[len(side):])
        found.update(normalize_part_name(alias) for alias in self.extra_aliases)
        return found


@dataclass(frozen=True, eq=False)
class SkeletonLayout:
    """Ordered keypoint set produced by one pose-estimation model.

    ``roles`` maps each semantic role in ROLES to a part index, or None when the
    model does not track that landmark.
    """

    name: LayoutName
    parts: tuple
    roles: MappingProxyType = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, SkeletonLayout) and self.name == other.name

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f'<SkeletonLayout {self.name.value}: {self.part_count} parts>'

    @property
    def part_count(self):
        return len(self.parts)

    @property
    def part_names(self):
        return [part.name for part in self.parts]

    @property
    def part_keys(self):
        return [part.key for part in self.parts]

    def role_index(self, role):
        """Part index for a role, or None when the layout lacks it."""
        if role not in self.roles:
            raise InvalidInput(f'Unknown role: {role!r}')
        return self.roles[role]

    def part_index(self, name):
        """Resolve an anatomical name, tool token or alias to a part index."""
        norm = normalize_part_name(name)
        for part in self.parts:
            if norm in part.aliases:
                return part.index
        raise InvalidInput(f'{self.name.value} has no part named {name!r}')


def _layout(name, parts, role_names):
    parts = tuple(Part(i, *spec) for i, spec in enumerate(parts))
    lookup = {normalize_part_name(part.name): part.index for part in parts}
    roles = {role: None for role in ROLES}
    for role, anatomical in role_names.items():
        roles[role] = lookup[normalize_part_name(anatomical)]
    return SkeletonLayout(name, parts, MappingProxyType(roles))


BODY_25 = _layout(LayoutName.BODY_25, [
    ('Nose', 'Nose'),
    ('Neck', 'Neck'),
    ('Right Shoulder', 'RShoulder'),
    ('Right Elbow', 'RElbow'),
    ('Right Wrist', 'RWrist'),
    ('Left Shoulder', 'LShoulder'),
    ('Left Elbow', 'LElbow'),
    ('Left Wrist', 'LWrist'),
    ('Mid Hip', 'MidHip'),
    ('Right Hip', 'RHip'),
    ('Right Knee', 'RKnee'),
    ('Right Ankle', 'RAnkle'),
    ('Left Hip', 'LHip'),
    ('Left Knee', 'LKnee'),
    ('Left Ankle', 'LAnkle'),
    ('Right Eye', 'REye'),
    ('Left Eye', 'LEye'),
    ('Right Ear', 'REar'),
    ('Left Ear', 'LEar'),
    ('Left Big Toe', 'LBigToe'),
    ('Left Small Toe', 'LSmallToe'),
    ('Left Heel', 'LHeel'),
    ('Right Big Toe', 'RBigToe'),
    ('Right Small Toe', 'RSmallToe'),
    ('Right Heel', 'RHeel'),
], {
    'left_heel': 'Left Heel', 'right_heel': 'Right Heel',
    'left_toe': 'Left Big Toe', 'right_toe': 'Right Big Toe',
    'left_ankle': 'Left Ankle', 'right_ankle': 'Right Ankle',
    'left_hip': 'Left Hip', 'right_hip': 'Right Hip',
    'mid_hip': 'Mid Hip',
})

# DeepLabCut model-zoo full_human: numbered tokens, 1 = right side, 2 = left side.
DLCPT_14 = _layout(LayoutName.DLCPT_14, [
    ('Right Ankle', 'ankle1'),
    ('Right Knee', 'knee1'),
    ('Right Hip', 'hip1'),
    ('Left Hip', 'hip2'),
    ('Left Knee', 'knee2'),
    ('Left Ankle', 'ankle2'),
    ('Right Wrist', 'wrist1'),
    ('Right Elbow', 'elbow1'),
    ('Right Shoulder', 'shoulder1'),
    ('Left Shoulder', 'shoulder2'),
    ('Left Elbow', 'elbow2'),
    ('Left Wrist', 'wrist2'),
    ('Chin', 'chin'),
    ('Forehead', 'forehead'),
], {
    'left_ankle': 'Left Ankle', 'right_ankle': 'Right Ankle',
    'left_hip': 'Left Hip', 'right_hip': 'Right Hip',
})

DLCCT_16 = _layout(LayoutName.DLCCT_16, [
    ('Right Shoulder', 'right_shoulder'),
    ('Right Elbow', 'right_elbow'),
    ('Right Wrist', 'right_wrist'),
    ('Right Hip', 'right_hip'),
    ('Right Knee', 'right_knee'),
    ('Right Ankle', 'right_ankle'),
    ('Right Heel', 'right_heel'),
    ('Right Toe', 'right_toe', ('Right Big Toe',)),
    ('Left Shoulder', 'left_shoulder'),
    ('Left Elbow', 'left_elbow'),
    ('Left Wrist', 'left_wrist'),
    ('Left Hip', 'left_hip'),
    ('Left Knee', 'left_knee'),
    ('Left Ankle', 'left_ankle'),
    ('Left Heel', 'left_heel'),
    ('Left Toe', 'left_toe', ('Left Big Toe',)),
], {
    'left_heel': 'Left Heel', 'right_heel': 'Right Heel',
    'left_toe': 'Left Toe', 'right_toe': 'Right Toe',
    'left_ankle': 'Left Ankle', 'right_ankle': 'Right Ankle',
    'left_hip': 'Left Hip', 'right_hip': 'Right Hip',
})

LAYOUTS = {layout.name: layout for layout in (BODY_25, DLCPT_14, DLCCT_16)}


def get_layout(name):
    """Look up a layout by enum or string name."""
    try:
        return LAYOUTS[LayoutName(name)]
    except ValueError:
        raise InvalidInput(f'Unknown layout name: {name!r}')


@dataclass(frozen=True, eq=False)
class KeypointSeries:
    """Per-frame 2D keypoints of one video.

    ``data`` has shape (frames, parts, 3) holding x and y in pixels and the
    model's confidence. A sample whose confidence is not a finite value in
    [0, 1] is treated as invalid by every consumer.
    """

    ORIGIN_NOTE = 'image coordinates: origin top-left, y grows downward'

    layout: SkeletonLayout
    fps: float
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.fps > 0:
            raise InvalidInput(f'fps must be positive, got {self.fps!r}')
        data = np.array(self.data, dtype=float)
        if data.ndim != 3 or data.shape[1:] != (self.layout.part_count, 3):
            raise InvalidInput(
                f'{self.layout.name.value} frames need shape (n, {self.layout.part_count}, 3), '
                f'got {data.shape}')
        data.setflags(write=False)
        object.__setattr__(self, 'fps', float(self.fps))
        object.__setattr__(self, 'data', data)

    def __eq__(self, other):
        if not isinstance(other, KeypointSeries):
            return NotImplemented
        return (self.layout == other.layout and self.fps == other.fps
                and np.array_equal(self.data, other.data, equal_nan=True))

    def __repr__(self):
        return f'<KeypointSeries {self.layout.name.value}: {self.n_frames} frames @ {self.fps:g} fps>'

    @property
    def n_frames(self):
        return self.data.shape[0]

    @property
    def x(self):
        return self.data[:, :, 0]

    @property
    def y(self):
        return self.data[:, :, 1]

    @property
    def confidence(self):
        return self.data[:, :, 2]

    @property
    def times(self):
        return np.arange(self.n_frames) / self.fps

    @property
    def sample_valid(self):
        """Structural validity of each (frame, part) sample, before any threshold."""
        conf = self.confidence
        with np.errstate(invalid='ignore'):
            return np.isfinite(conf) & (conf >= 0.0) & (conf <= 1.0) \
                & np.isfinite(self.x) & np.isfinite(self.y)

    def shifted(self, frames):
        """Copy with ``frames`` copies of the first frame prepended (time shift)."""
        if frames < 0:
            raise InvalidInput('shift must be non-negative')
        head = np.repeat(self.data[:1], frames, axis=0)
        return KeypointSeries(self.layout, self.fps, np.concatenate([head, self.data]))

    def to_dict(self):
        return {
            'layout': self.layout.name.value,
            'fps': self.fps,
            'n_frames': self.n_frames,
            'parts': self.layout.part_names,
        }


@dataclass(frozen=True)
class TrialMeta:
    """Identifying and acquisition metadata for one recorded trial (one video)."""

    trial_id: str
    subject_id: str = ''
    camera_fps: float = 25.0
    resolution: tuple = (640, 480)

    def __post_init__(self):
        if not self.camera_fps > 0:
            raise InvalidInput(f'camera_fps must be positive, got {self.camera_fps!r}')
        if len(self.resolution) != 2 or min(self.resolution) <= 0:
            raise InvalidInput(f'resolution must be two positive sizes, got {self.resolution!r}')

    @property
    def image_width(self):
        return self.resolution[0]

    def to_dict(self):
        return {
            'trial_id': self.trial_id,
            'subject_id': self.subject_id,
            'camera_fps': self.camera_fps,
            'resolution': list(self.resolution),
        }
