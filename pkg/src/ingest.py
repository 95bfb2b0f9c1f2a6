"""Parsers and writers for force-platform CSV, OpenPose frame JSON and DeepLabCut CSV.

Every parser takes a byte stream, a text stream, raw bytes or a path. Writers
emit floats with their shortest round-trip representation, so a written
series re-parses to an identical one.
"""

import io
import json
import logging
import os
import re

import numpy as np
import pandas as pd

from src.exceptions import FormatError, InvalidInput, UnknownLayout
from src.models.grf import GrfSignal
from src.models.keypoints import BODY_25, DLCCT_16, DLCPT_14, KeypointSeries

logger = logging.getLogger(__name__)

MAX_PLATFORMS = 8
SAMPLING_TOLERANCE = 1e-4
OPENPOSE_VALUES = BODY_25.part_count * 3
DLC_COORDS = ('x', 'y', 'likelihood')

_LAYOUTS_BY_SIZE = {layout.part_count: layout for layout in (BODY_25, DLCPT_14, DLCCT_16)}


def read_text(source):
    if hasattr(source, 'read'):
        data = source.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        with open(source, 'rb') as handle:
            data = handle.read()
    if isinstance(data, bytes):
        try:
            data = data.decode('utf-8-sig')
        except UnicodeDecodeError as err:
            raise FormatError(f'input is not UTF-8 text: {err}')
    return data


def read_string_table(text, header):
    try:
        return pd.read_csv(io.StringIO(text), header=header, dtype=str, keep_default_na=False,
                           skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise FormatError('input is empty')
    except pd.errors.ParserError as err:
        raise FormatError(f'ragged rows: {err}')


def _to_float(table, row_offset, column_names):
    """Convert a string table to floats, reporting the first bad cell."""
    cells = table.to_numpy(dtype=object)
    missing = pd.isna(cells)
    if missing.any():
        row, col = np.argwhere(missing)[0]
        raise FormatError('ragged row: missing cell', location=f'row {row + row_offset}, column {column_names[col]}')
    try:
        return cells.astype(str).astype(float)
    except ValueError:
        coerced = table.apply(lambda column: pd.to_numeric(column.str.strip(), errors='coerce'))
        row, col = np.argwhere(coerced.isna().to_numpy())[0]
        raise FormatError(f'non-numeric cell {cells[row, col]!r}',
                          location=f'row {row + row_offset}, column {column_names[col]}')


def _float_text(value):
    return repr(float(value))


def parse_grf_csv(stream):
    """Parse a ``time_s,fz1_n[,fz2_n,...]`` table into a GrfSignal.

    The sampling rate is the reciprocal of the median time step, rounded to
    1e-6 Hz. Every step must be within 1 part in 10^4 of the median.

    Raises:
        FormatError: malformed header, empty body, non-numeric cell,
            non-increasing or non-uniform time.
    """
    table = read_string_table(read_text(stream), header=0)
    columns = [str(c).strip() for c in table.columns]
    n_platforms = len(columns) - 1
    expected = ['time_s'] + [f'fz{i}_n' for i in range(1, n_platforms + 1)]
    if not 1 <= n_platforms <= MAX_PLATFORMS or columns != expected:
        raise FormatError(f'expected header time_s,fz1_n..fzK_n with 1 <= K <= {MAX_PLATFORMS}, '
                          f'got {",".join(columns)}')
    if table.empty:
        raise FormatError('force table has no data rows')
    if len(table) < 2:
        raise FormatError('force table needs at least 2 rows to infer the sampling rate')

    # header is row 1 of the file
    values = _to_float(table, row_offset=2, column_names=columns)
    time = values[:, 0]
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise FormatError('non-finite value', location=f'row {row + 2}, column {columns[col]}')
    steps = np.diff(time)
    if np.any(steps <= 0):
        row = int(np.argmax(steps <= 0)) + 3
        raise FormatError('time must increase monotonically', location=f'row {row}, column time_s')
    median_step = float(np.median(steps))
    deviation = np.abs(steps - median_step) / median_step
    if np.any(deviation > SAMPLING_TOLERANCE):
        row = int(np.argmax(deviation > SAMPLING_TOLERANCE)) + 3
        raise FormatError(f'non-uniform sampling: step {steps[row - 3]:.6g} s vs median {median_step:.6g} s',
                          location=f'row {row}, column time_s')
    fs = round(1.0 / median_step, 6)
    logger.debug('Parsed force table: %d platforms, %d samples at %g Hz', n_platforms, len(time), fs)
    return GrfSignal(fs=fs, forces=values[:, 1:].T, t0=float(time[0]))


def write_grf_csv(grf, destination):
    """Write a GrfSignal as ``time_s,fz1_n,...`` CSV to a path or text stream."""
    columns = ['time_s'] + [f'fz{i}_n' for i in range(1, grf.n_platforms + 1)]
    body = np.column_stack([grf.times, grf.forces.T])
    frame = pd.DataFrame([[_float_text(v) for v in row] for row in body], columns=columns)
    frame.to_csv(destination, index=False, lineterminator='\n')


def _person_area(keypoints):
    points = keypoints.reshape(-1, 3)
    seen = points[points[:, 2] > 0]
    if seen.shape[0] == 0:
        return 0.0
    width = seen[:, 0].max() - seen[:, 0].min()
    height = seen[:, 1].max() - seen[:, 1].min()
    return float(width * height)


def _frame_people(document, frame_index):
    where = f'frame {frame_index}'
    if not isinstance(document, dict) or not isinstance(document.get('people'), list):
        raise FormatError('OpenPose frame lacks a "people" array', location=where)
    people = []
    for i, person in enumerate(document['people']):
        if not isinstance(person, dict) or 'pose_keypoints_2d' not in person:
            raise FormatError(f'person {i} lacks "pose_keypoints_2d"', location=where)
        try:
            values = np.asarray(person['pose_keypoints_2d'], dtype=float)
        except (TypeError, ValueError):
            raise FormatError(f'person {i} has non-numeric keypoints', location=where)
        if values.ndim != 1 or values.size % 3 != 0:
            raise FormatError(f'person {i} has {values.size} keypoint values, not a multiple of 3', location=where)
        people.append(values)
    return people


def parse_openpose_frames(frame_streams, fps, person_index=None):
    """Parse per-frame OpenPose JSON outputs into a BODY_25 KeypointSeries.

    A frame with no detected person becomes an all-zero frame (confidence 0).
    With several people the one whose valid keypoints span the largest
    bounding box is kept, unless ``person_index`` forces a choice.

    Raises:
        FormatError: invalid JSON, missing fields, or a selected person
            without exactly 75 values.
    """
    frames = []
    for frame_index, stream in enumerate(frame_streams):
        try:
            document = json.loads(read_text(stream))
        except json.JSONDecodeError as err:
            raise FormatError(f'invalid JSON: {err}', location=f'frame {frame_index}')
        people = _frame_people(document, frame_index)
        if person_index is not None:
            chosen = people[person_index] if person_index < len(people) else None
        elif people:
            areas = [_person_area(p) for p in people]
            # max() keeps the first of equal areas
            chosen = people[max(range(len(people)), key=areas.__getitem__)]
        else:
            chosen = None
        if chosen is None:
            frames.append(np.zeros((BODY_25.part_count, 3)))
            continue
        if chosen.size != OPENPOSE_VALUES:
            raise FormatError(f'selected person has {chosen.size} keypoint values, expected {OPENPOSE_VALUES}',
                              location=f'frame {frame_index}')
        frames.append(chosen.reshape(BODY_25.part_count, 3))
    data = np.stack(frames) if frames else np.zeros((0, BODY_25.part_count, 3))
    return KeypointSeries(BODY_25, fps, data)


_DIGITS = re.compile(r'(\d+)')


def natural_sort_key(name):
    """Sort key that orders embedded numbers numerically: f2 < f10."""
    return [int(token) if token.isdigit() else token for token in _DIGITS.split(str(name))]


def list_openpose_frames(directory):
    """Paths of ``*_keypoints.json`` files in a directory, in frame order."""
    names = [n for n in os.listdir(directory) if n.endswith('.json')]
    if not names:
        raise FormatError(f'no OpenPose frame files in {directory}')
    return [os.path.join(directory, n) for n in sorted(names, key=natural_sort_key)]


def write_openpose_frames(series, directory, video_name='video'):
    """Write one OpenPose JSON file per frame; all-zero frames are written with no people."""
    if series.layout != BODY_25:
        raise InvalidInput(f'OpenPose output holds BODY_25 keypoints, not {series.layout.name.value}')
    os.makedirs(directory, exist_ok=True)
    paths = []
    for index in range(series.n_frames):
        frame = series.data[index]
        people = []
        if np.any(frame != 0):
            people.append({
                'person_id': [-1],
                'pose_keypoints_2d': [float(v) for v in frame.ravel()],
            })
        path = os.path.join(directory, f'{video_name}_{index:012d}_keypoints.json')
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump({'version': 1.3, 'people': people}, handle)
        paths.append(path)
    return paths


def resolve_part_order(layout, part_names):
    """Map source part names onto layout indices.

    Every name that resolves through the layout's aliases takes that slot.
    Names that match no alias fill the remaining slots in source order, which
    is allowed only when every role the layout defines resolved by name.

    Returns:
        list where entry i is the layout index of ``part_names[i]``.
    """
    order = []
    unresolved = []
    for position, name in enumerate(part_names):
        try:
            index = layout.part_index(name)
        except InvalidInput:
            unresolved.append(position)
            order.append(None)
            continue
        if index in order:
            raise UnknownLayout(f'part {name!r} maps to {layout.parts[index].name!r} twice')
        order.append(index)
    for role, index in layout.roles.items():
        if index is not None and index not in order:
            raise UnknownLayout(f'{layout.name.value} role {role} ({layout.parts[index].name}) not found in names')
    free = [i for i in range(layout.part_count) if i not in order]
    for position, index in zip(unresolved, free):
        order[position] = index
    if unresolved:
        logger.debug('%s: %d unrecognized part names assigned by position', layout.name.value, len(unresolved))
    return order


def detect_layout(part_names):
    """Identify the skeleton layout from an ordered list of part names.

    Raises:
        InvalidInput: empty list.
        UnknownLayout: unsupported part count or missing role names.
    """
    names = list(part_names)
    if not names:
        raise InvalidInput('part name list is empty')
    layout = _LAYOUTS_BY_SIZE.get(len(names))
    if layout is None:
        raise UnknownLayout(f'{len(names)} parts match no known layout (14, 16 or 25)')
    resolve_part_order(layout, names)
    return layout


def parse_dlc_csv(stream, fps=25.0):
    """Parse DeepLabCut tabular output into a KeypointSeries.

    Expects ``scorer``, ``bodyparts`` and ``coords`` header rows followed by
    one row per frame whose first cell is the frame index. Columns are
    reordered into layout order.

    Raises:
        FormatError: missing or misaligned header rows, coords not cycling
            x,y,likelihood, ragged rows or non-numeric cells.
        UnknownLayout: body part names match no layout.
    """
    table = read_string_table(read_text(stream), header=None)
    if len(table) < 3:
        raise FormatError('DeepLabCut table needs scorer, bodyparts and coords header rows')
    labels = [str(v).strip().lower() for v in table.iloc[:3, 0]]
    if labels != ['scorer', 'bodyparts', 'coords']:
        raise FormatError(f'header rows must start with scorer, bodyparts, coords; got {labels}')
    n_columns = table.shape[1] - 1
    if n_columns < 3 or n_columns % 3 != 0:
        raise FormatError(f'{n_columns} data columns is not a multiple of 3')

    bodyparts = table.iloc[1, 1:].tolist()
    coords = [str(c).strip().lower() for c in table.iloc[2, 1:]]
    part_names = []
    for start in range(0, n_columns, 3):
        triple = bodyparts[start:start + 3]
        if pd.isna(triple).any() or len(set(triple)) != 1:
            raise FormatError(f'bodyparts row misaligned at column {start + 2}: {triple}')
        if tuple(coords[start:start + 3]) != DLC_COORDS:
            raise FormatError(f'coords must cycle x,y,likelihood, got {",".join(coords[start:start + 3])}',
                              location=f'column {start + 2}')
        part_names.append(str(triple[0]).strip())

    layout = detect_layout(part_names)
    order = resolve_part_order(layout, part_names)
    column_names = ['frame'] + [f'{name}.{c}' for name in part_names for c in DLC_COORDS]
    body = table.iloc[3:].reset_index(drop=True)
    values = _to_float(body, row_offset=4, column_names=column_names)[:, 1:]

    data = np.empty((values.shape[0], layout.part_count, 3))
    for position, index in enumerate(order):
        data[:, index, :] = values[:, 3 * position:3 * position + 3]
    logger.debug('Parsed DeepLabCut table: %s, %d frames', layout.name.value, data.shape[0])
    return KeypointSeries(layout, fps, data)


def write_dlc_csv(series, destination, scorer='gaitval'):
    """Write a KeypointSeries as a DeepLabCut CSV (three header rows, frame index column)."""
    keys = series.layout.part_keys
    rows = [
        ['scorer'] + [scorer] * (3 * len(keys)),
        ['bodyparts'] + [key for key in keys for _ in DLC_COORDS],
        ['coords'] + list(DLC_COORDS) * len(keys),
    ]
    for index in range(series.n_frames):
        rows.append([str(index)] + [_float_text(v) for v in series.data[index].ravel()])
    pd.DataFrame(rows).to_csv(destination, header=False, index=False, lineterminator='\n')
