"""Agreement statistics between an estimating system and the reference, and label-set MAE."""

import logging
import math

import numpy as np
from scipy import stats as scipy_stats

from src.exceptions import FormatError, InsufficientData, InvalidInput
from src.ingest import read_string_table, read_text, natural_sort_key
from src.models.report import AbsErrorSummary, BlandAltmanResult, NormalityResult, PairedSeries

logger = logging.getLogger(__name__)

LOA_MULTIPLIER = 1.96
SHAPIRO_MIN_N = 3
SHAPIRO_MAX_N = 5000


def _series(values, name):
    values = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise InvalidInput(f'{name} contains non-finite values')
    return values


def pearson(x, y):
    """Product-moment correlation coefficient of two equal-length series (n >= 3)."""
    x, y = _series(x, 'x'), _series(y, 'y')
    if x.size != y.size:
        raise InvalidInput(f'series lengths differ: {x.size} vs {y.size}')
    if x.size < 3:
        raise InsufficientData(f'pearson needs at least 3 pairs, got {x.size}')
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise InvalidInput('pearson is undefined for a zero-variance series')
    return float(scipy_stats.pearsonr(x, y).statistic)


def bland_altman(p):
    """Bias and 95% limits of agreement of ``est - ref``.

    LoA are ``bias -/+ 1.96 * sd`` with the sample SD of the differences.
    """
    if len(p) < 2:
        raise InsufficientData(f'Bland-Altman needs at least 2 pairs, got {len(p)}')
    diffs = p.est - p.ref
    means = (p.est + p.ref) / 2.0
    bias = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    half_width = LOA_MULTIPLIER * sd
    points = tuple((float(m), float(d), vid) for m, d, vid in zip(means, diffs, p.video_ids))
    return BlandAltmanResult(bias=bias, sd_diff=sd, loa_lower=bias - half_width,
                             loa_upper=bias + half_width, n=len(p), points=points)


def loa_asymmetry(bias, lower, upper):
    """|(upper - bias) - (bias - lower)|, zero for a symmetric interval."""
    return abs((upper - bias) - (bias - lower))


def absolute_errors(p):
    """Per-video |est - ref| with its mean (accuracy) and sample SD (precision)."""
    errors = np.abs(p.est - p.ref)
    sigma = float(errors.std(ddof=1)) if errors.size > 1 else 0.0
    return AbsErrorSummary(accuracy_mu=float(errors.mean()), precision_sigma=sigma,
                           errors=tuple(float(e) for e in errors), video_ids=p.video_ids)


def shapiro_wilk(x):
    """Shapiro-Wilk W and p-value (Royston's AS R94 approximation, 3 <= n <= 5000)."""
    x = _series(x, 'sample')
    if not SHAPIRO_MIN_N <= x.size <= SHAPIRO_MAX_N:
        raise InvalidInput(f'Shapiro-Wilk needs {SHAPIRO_MIN_N} <= n <= {SHAPIRO_MAX_N}, got {x.size}')
    if np.ptp(x) == 0:
        raise InvalidInput('Shapiro-Wilk is undefined for a constant sample')
    result = scipy_stats.shapiro(x)
    w = min(float(result.statistic), 1.0)
    p = min(max(float(result.pvalue), 0.0), 1.0)
    return NormalityResult(w_statistic=w, p_value=p, n=int(x.size))


def mae_euclidean(a, b):
    """Mean Euclidean distance between two label sets.

    Args:
        a, b: mappings ``(image, keypoint) -> (x, y)`` in pixels. Pairs where
            either side is unlabeled (NaN) are left out.

    Raises:
        InvalidInput: the two sets cover different (image, keypoint) pairs.
        InsufficientData: no pair is labeled on both sides.
    """
    if set(a) != set(b):
        only_a, only_b = len(set(a) - set(b)), len(set(b) - set(a))
        raise InvalidInput(f'label sets differ: {only_a} pairs only in the first, {only_b} only in the second')
    keys = sorted(a)
    first = np.array([a[k] for k in keys], dtype=float).reshape(-1, 2)
    second = np.array([b[k] for k in keys], dtype=float).reshape(-1, 2)
    labeled = np.all(np.isfinite(first), axis=1) & np.all(np.isfinite(second), axis=1)
    if not labeled.any():
        raise InsufficientData('no keypoint is labeled in both sets')
    distances = np.hypot(*(first[labeled] - second[labeled]).T)
    return float(distances.mean())


def load_label_set(stream):
    """Read a DeepLabCut labeled-data CSV into ``{(image, bodypart): (x, y)}``.

    Leading columns with an empty coords cell form the image path and are
    joined with '/'. A ``likelihood`` column, when present, is ignored.
    """
    table = read_string_table(read_text(stream), header=None)
    if len(table) < 4:
        raise FormatError('labeled-data table needs three header rows and at least one image')
    labels = [str(v).strip().lower() for v in table.iloc[:3, 0]]
    if labels != ['scorer', 'bodyparts', 'coords']:
        raise FormatError(f'header rows must start with scorer, bodyparts, coords; got {labels}')
    coords = [str(v).strip().lower() for v in table.iloc[2]]
    index_columns = 1
    while index_columns < len(coords) and coords[index_columns] in ('', 'nan'):
        index_columns += 1

    columns = {}
    for j in range(index_columns, table.shape[1]):
        part = str(table.iat[1, j]).strip()
        if coords[j] not in ('x', 'y', 'likelihood'):
            raise FormatError(f'unexpected coords entry {coords[j]!r}', location=f'column {j + 1}')
        columns.setdefault(part, {})[coords[j]] = j
    for part, found in columns.items():
        if 'x' not in found or 'y' not in found:
            raise FormatError(f'body part {part!r} lacks an x or y column')

    labels = {}
    for row in range(3, len(table)):
        image = '/'.join(str(table.iat[row, j]).strip() for j in range(index_columns))
        for part, found in columns.items():
            point = []
            for axis in ('x', 'y'):
                cell = str(table.iat[row, found[axis]]).strip()
                try:
                    point.append(float(cell) if cell not in ('', 'nan', 'NaN') else math.nan)
                except ValueError:
                    raise FormatError(f'non-numeric cell {cell!r}', location=f'row {row + 1}, column {found[axis] + 1}')
            labels[image, part] = tuple(point)
    return labels


def mae_curve(reference, snapshots):
    """Test MAE of every stored snapshot against the reference labels.

    Args:
        reference: ground-truth label set.
        snapshots: mapping snapshot name -> predicted label set.

    Returns:
        list of (snapshot, mae) in natural snapshot order.
    """
    if not snapshots:
        raise InvalidInput('no snapshots to evaluate')
    curve = [(name, mae_euclidean(reference, labels))
             for name, labels in sorted(snapshots.items(), key=lambda item: natural_sort_key(item[0]))]
    for name, value in curve:
        logger.debug('Snapshot %s: MAE %.3f px', name, value)
    return curve


def best_snapshot(curve):
    """The (snapshot, mae) with the lowest error; the earliest wins ties."""
    if not curve:
        raise InvalidInput('empty MAE curve')
    return min(curve, key=lambda item: item[1])


def load_paired_csv(stream):
    """Read a paired-values CSV with columns ``video_id,est,ref`` into a PairedSeries."""
    table = read_string_table(read_text(stream), header=0)
    table.columns = [str(c).strip().lower() for c in table.columns]
    missing = [c for c in ('video_id', 'est', 'ref') if c not in table.columns]
    if missing:
        raise FormatError(f'paired table lacks columns {missing}')
    est, ref = [], []
    for row, (est_cell, ref_cell) in enumerate(zip(table['est'], table['ref']), start=2):
        try:
            est.append(float(est_cell))
            ref.append(float(ref_cell))
        except ValueError:
            raise FormatError(f'non-numeric value in {est_cell!r}, {ref_cell!r}', location=f'row {row}')
    return PairedSeries(est, ref, [str(v).strip() for v in table['video_id']])
