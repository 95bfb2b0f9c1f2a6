"""Report emitters: descriptive and agreement tables, plot data, optional SVG plots.

Tables use three decimals; plot data and ``report_raw.json`` keep full
precision. Every emitter stages its files in a hidden directory next to the
destination and moves them in only after all of them were written, so a
failure never leaves a partial set behind.
"""

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager

import numpy as np
import pandas as pd

from src.exceptions import InsufficientData
from src.models.params import PARAMETER_LABELS
from src.models.report import CorrelationStrength

logger = logging.getLogger(__name__)

TABLE_B_COLUMNS = ['system', 'parameter', 'bias', 'loa_lower', 'loa_upper']
TABLE_C_COLUMNS = ['system', 'parameter', 'accuracy_mu', 'precision_sigma']
PEARSON_COLUMNS = ['system', 'parameter', 'r', 'strength']
NORMALITY_COLUMNS = ['dataset', 'parameter', 'w_statistic', 'p_value', 'n']
SCATTER_COLUMNS = ['pair_mean', 'pair_diff', 'video_id']
VIOLIN_COLUMNS = ['video_id', 'abs_error', 'q1', 'median', 'q3', 'mean', 'sd']
MAE_COLUMNS = ['snapshot', 'mae_px']


def _fmt(value):
    if value is None:
        return ''
    # negative zero prints as 0.000
    text = f'{value:.3f}'
    return '0.000' if text == '-0.000' else text


def _full(value):
    return '%.17g' % value


@contextmanager
def _staged(directory):
    """Yield a staging directory; its files move into ``directory`` on success."""
    os.makedirs(directory, exist_ok=True)
    staging = tempfile.mkdtemp(prefix='.staging-', dir=directory)
    try:
        yield staging
        names = sorted(os.listdir(staging))
        for name in names:
            os.replace(os.path.join(staging, name), os.path.join(directory, name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _write_csv(path, columns, rows, comments=()):
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        for line in comments:
            handle.write(f'# {line}\n')
        pd.DataFrame(rows, columns=columns).to_csv(handle, index=False, lineterminator='\n')


def _require(r):
    if r.is_empty:
        raise InsufficientData('report is empty: no system produced a descriptive row')


def table_a_rows(r):
    """Descriptive table rows: system, then mean, sd and cv_percent per parameter."""
    columns = ['system'] + [f'{p}_{stat}' for p in r.parameters for stat in ('mean', 'sd', 'cv_percent')]
    rows = []
    for system in r.all_datasets:
        if system not in r.table_a:
            continue
        values = r.table_a[system].to_row()
        rows.append([system] + [_fmt(values.get(c)) for c in columns[1:]])
    return columns, rows


def _cells(r):
    for system in r.systems:
        for parameter in r.parameters:
            yield system, parameter


def table_b_rows(r):
    rows = []
    for system, parameter in _cells(r):
        ba = r.table_b.get((system, parameter))
        values = (ba.bias, ba.loa_lower, ba.loa_upper) if ba else (None, None, None)
        rows.append([system, parameter] + [_fmt(v) for v in values])
    return rows


def table_c_rows(r):
    rows = []
    for system, parameter in _cells(r):
        summary = r.table_c.get((system, parameter))
        values = (summary.accuracy_mu, summary.precision_sigma) if summary else (None, None)
        rows.append([system, parameter] + [_fmt(v) for v in values])
    return rows


def pearson_rows(r):
    rows = []
    for system, parameter in _cells(r):
        value = r.pearson.get((system, parameter))
        strength = CorrelationStrength.classify(value).value if value is not None else ''
        rows.append([system, parameter, _fmt(value), strength])
    return rows


def normality_rows(r):
    rows = []
    for dataset in r.all_datasets:
        for parameter in r.parameters:
            result = r.normality.get((dataset, parameter))
            if result is None:
                continue
            rows.append([dataset, parameter, _fmt(result.w_statistic), _fmt(result.p_value), result.n])
    return rows


def render_text(r):
    """Human-readable version of every table."""
    lines = [f'Gait validation report (reference: {r.reference})', '']
    lines.append('Descriptive statistics: mean ± SD (CV%)')
    for system in r.all_datasets:
        if system not in r.table_a:
            continue
        lines.append(f'  [{system}]')
        summaries = r.table_a[system].summaries
        for parameter in r.parameters:
            s = summaries.get(parameter)
            cell = f'{_fmt(s.mean)} ± {_fmt(s.sd)} ({_fmt(s.cv_percent)}%)' if s else 'n/a'
            lines.append(f'    {PARAMETER_LABELS[parameter]:<22} {cell}')

    lines += ['', f'Agreement with {r.reference}']
    for system in r.systems:
        lines.append(f'  [{system}]')
        for parameter in r.parameters:
            ba = r.table_b.get((system, parameter))
            err = r.table_c.get((system, parameter))
            rho = r.pearson.get((system, parameter))
            parts = []
            if ba:
                parts.append(f'bias {_fmt(ba.bias)}, LoA [{_fmt(ba.loa_lower)}, {_fmt(ba.loa_upper)}]')
            if err:
                parts.append(f'accuracy {_fmt(err.accuracy_mu)}, precision {_fmt(err.precision_sigma)}')
            if rho is not None:
                parts.append(f'r {_fmt(rho)} ({CorrelationStrength.classify(rho).value})')
            lines.append(f'    {PARAMETER_LABELS[parameter]:<22} {"; ".join(parts) or "n/a"}')

    if r.unpaired:
        lines += ['', 'Videos left out of a pairing (no value on one side)']
        for (system, parameter), videos in sorted(r.unpaired.items()):
            lines.append(f'  {system:<10} {PARAMETER_LABELS[parameter]:<22} {", ".join(videos)}')

    if r.normality:
        lines += ['', 'Shapiro-Wilk normality of per-video values']
        for dataset in r.all_datasets:
            for parameter in r.parameters:
                result = r.normality.get((dataset, parameter))
                if result is None:
                    continue
                verdict = 'normal' if result.normal_at_5_percent else 'not normal'
                lines.append(f'  {dataset:<10} {PARAMETER_LABELS[parameter]:<22} W {_fmt(result.w_statistic)}, '
                             f'p {_fmt(result.p_value)}, n {result.n} ({verdict})')
    return '\n'.join(lines) + '\n'


def raw_record(r):
    """Full-precision values of every table cell, for tooling."""
    def keyed(table):
        nested = {}
        for (outer, parameter), value in sorted(table.items()):
            nested.setdefault(outer, {})[parameter] = value.to_dict() if hasattr(value, 'to_dict') else value
        return nested

    return {
        'reference': r.reference,
        'systems': list(r.systems),
        'parameters': list(r.parameters),
        'table_a': {system: agg.to_dict() for system, agg in sorted(r.table_a.items())},
        'table_b': keyed(r.table_b),
        'table_c': keyed(r.table_c),
        'pearson': keyed(r.pearson),
        'normality': keyed(r.normality),
        'unpaired': keyed(r.unpaired),
        'per_video': r.per_video,
        'subjects': dict(sorted(r.subjects.items())),
    }


def emit_tables(r, directory):
    """Write table_a/b/c.csv, pearson.csv, normality.csv, report.txt and report_raw.json.

    Raises:
        InsufficientData: the report is empty; nothing is written.
        OSError: the destination is not writable.
    """
    _require(r)
    with _staged(directory) as staging:
        columns, rows = table_a_rows(r)
        _write_csv(os.path.join(staging, 'table_a.csv'), columns, rows)
        _write_csv(os.path.join(staging, 'table_b.csv'), TABLE_B_COLUMNS, table_b_rows(r))
        _write_csv(os.path.join(staging, 'table_c.csv'), TABLE_C_COLUMNS, table_c_rows(r))
        _write_csv(os.path.join(staging, 'pearson.csv'), PEARSON_COLUMNS, pearson_rows(r))
        _write_csv(os.path.join(staging, 'normality.csv'), NORMALITY_COLUMNS, normality_rows(r))
        with open(os.path.join(staging, 'report.txt'), 'w', encoding='utf-8', newline='') as handle:
            handle.write(render_text(r))
        with open(os.path.join(staging, 'report_raw.json'), 'w', encoding='utf-8', newline='') as handle:
            json.dump(raw_record(r), handle, indent=2, sort_keys=True)
            handle.write('\n')
        written = sorted(os.listdir(staging))
    logger.info('Wrote %d table files to %s', len(written), directory)
    return [os.path.join(directory, name) for name in written]


def violin_summary(errors):
    """Quartiles, mean and sample SD of the absolute errors of one cell."""
    errors = np.asarray(errors, dtype=float)
    q1, median, q3 = np.percentile(errors, [25, 50, 75])
    sd = float(errors.std(ddof=1)) if errors.size > 1 else 0.0
    return {'q1': float(q1), 'median': float(median), 'q3': float(q3), 'mean': float(errors.mean()), 'sd': sd}


def _scatter_file(directory, system, parameter, ba):
    rows = [[_full(mean), _full(diff), video] for mean, diff, video in ba.points]
    comments = [f'bias={_full(ba.bias)}', f'loa_lower={_full(ba.loa_lower)}', f'loa_upper={_full(ba.loa_upper)}']
    _write_csv(os.path.join(directory, f'bland_altman_{system}_{parameter}.csv'), SCATTER_COLUMNS, rows, comments)


def _violin_file(directory, system, parameter, summary):
    stats = violin_summary(summary.errors)
    tail = [_full(stats[k]) for k in ('q1', 'median', 'q3')] + [_full(summary.accuracy_mu),
                                                                _full(summary.precision_sigma)]
    rows = [[video, _full(error)] + tail for video, error in zip(summary.video_ids, summary.errors)]
    _write_csv(os.path.join(directory, f'abs_error_{system}_{parameter}.csv'), VIOLIN_COLUMNS, rows)


def _figure():
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    # fixed element ids and no date: identical inputs give identical SVG bytes
    plt.rcParams['svg.hashsalt'] = 'gaitval'
    fig, ax = plt.subplots(figsize=(5, 3.5), constrained_layout=True)
    return plt, fig, ax


def _plot_bland_altman(path, system, parameter, ba):
    plt, fig, ax = _figure()
    means = [point[0] for point in ba.points]
    diffs = [point[1] for point in ba.points]
    ax.axhspan(ba.loa_lower, ba.loa_upper, color='0.9')
    ax.axhline(ba.bias, color='k', lw=1)
    for limit in (ba.loa_lower, ba.loa_upper):
        ax.axhline(limit, color='k', lw=1, ls=':')
    ax.scatter(means, diffs, s=14, color='tab:blue', zorder=3)
    ax.set_xlabel(f'Mean of {system} and reference')
    ax.set_ylabel(f'{system} - reference')
    ax.set_title(PARAMETER_LABELS[parameter])
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)


def _plot_violin(path, system, parameter, summary):
    plt, fig, ax = _figure()
    errors = np.asarray(summary.errors)
    if errors.size > 1 and np.ptp(errors) > 0:
        ax.violinplot(errors, showextrema=False)
    ax.vlines(1, summary.accuracy_mu - summary.precision_sigma, summary.accuracy_mu + summary.precision_sigma,
              color='gold', lw=3)
    ax.scatter([1], [summary.accuracy_mu], color='white', edgecolor='k', zorder=3)
    ax.set_xticks([1], [system])
    ax.set_ylabel(f'|error| {PARAMETER_LABELS[parameter]}')
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)


def emit_plot_data(r, directory, plots=False):
    """Per system and parameter: Bland-Altman scatter CSV and absolute-error violin CSV.

    With ``plots`` both are also rendered as SVG. Cells that have no
    agreement result are skipped.
    """
    _require(r)
    with _staged(directory) as staging:
        for system, parameter in _cells(r):
            ba = r.table_b.get((system, parameter))
            summary = r.table_c.get((system, parameter))
            if ba is not None:
                _scatter_file(staging, system, parameter, ba)
                if plots:
                    _plot_bland_altman(os.path.join(staging, f'bland_altman_{system}_{parameter}.svg'),
                                       system, parameter, ba)
            if summary is not None:
                _violin_file(staging, system, parameter, summary)
                if plots:
                    _plot_violin(os.path.join(staging, f'abs_error_{system}_{parameter}.svg'),
                                 system, parameter, summary)
        written = sorted(os.listdir(staging))
    logger.info('Wrote %d plot files to %s', len(written), directory)
    return [os.path.join(directory, name) for name in written]


def emit_mae_curve(curve, directory):
    """Write mae_curve.csv (snapshot, mae_px) in curve order."""
    if not curve:
        raise InsufficientData('MAE curve is empty')
    with _staged(directory) as staging:
        _write_csv(os.path.join(staging, 'mae_curve.csv'), MAE_COLUMNS,
                   [[name, _fmt(value)] for name, value in curve])
    return os.path.join(directory, 'mae_curve.csv')
