"""Zero-phase Butterworth filtering, confidence masking and gap interpolation.

Kinematic trajectories go through mask -> interpolate -> filtfilt by default;
``preprocess_order='filter_first'`` runs the filter on the raw trajectory
before masking instead.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from src.exceptions import InsufficientData, InvalidInput

logger = logging.getLogger(__name__)

SUPPORTED_ORDERS = (2, 4, 6, 8)
PREPROCESS_ORDERS = ('mask_first', 'filter_first')


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """Low-pass Butterworth filter as a cascade of second-order sections.

    ``sos`` rows are ``[b0, b1, b2, 1, a1, a2]`` as scipy.signal uses them.
    """

    order: int
    cutoff_hz: float
    fs_hz: float
    sos: np.ndarray = field(repr=False)

    @property
    def sections(self):
        """List of ((b0, b1, b2), (1, a1, a2)) coefficient pairs."""
        return [(tuple(row[:3]), tuple(row[3:])) for row in self.sos]

    @property
    def padlen(self):
        """Odd-extension length used on each end by filtfilt."""
        return 3 * (2 * self.order)

    @property
    def dc_gain(self):
        return float(np.prod(self.sos[:, :3].sum(axis=1) / self.sos[:, 3:].sum(axis=1)))

    def gain_at(self, freq_hz):
        """Single-pass magnitude response |H| at ``freq_hz``."""
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(float(freq_hz)), fs=self.fs_hz)
        return float(np.abs(h[0]))

    def describe(self):
        lines = [f'Butterworth low-pass order={self.order} cutoff={self.cutoff_hz:g} Hz fs={self.fs_hz:g} Hz']
        for i, (b, a) in enumerate(self.sections):
            lines.append(f'  section {i}: b=({b[0]:.10g}, {b[1]:.10g}, {b[2]:.10g}) '
                         f'a=({a[0]:.10g}, {a[1]:.10g}, {a[2]:.10g})')
        return '\n'.join(lines)

    def __repr__(self):
        return f'<FilterSpec order={self.order} cutoff={self.cutoff_hz:g}Hz fs={self.fs_hz:g}Hz>'


def design_butterworth(order, cutoff_hz, fs_hz):
    """Design a digital low-pass Butterworth filter.

    scipy maps the analog prototype through the bilinear transform with the
    cutoff prewarped, so |H(cutoff_hz)| is 1/sqrt(2).

    Args:
        order: one of 2, 4, 6, 8.
        cutoff_hz: -3 dB frequency, strictly between 0 and fs_hz / 2.
        fs_hz: sampling rate of the signals the filter will be applied to.

    Raises:
        InvalidInput: unsupported order or cutoff outside (0, Nyquist).
    """
    if isinstance(order, bool) or order not in SUPPORTED_ORDERS:
        raise InvalidInput(f'filter order must be one of {SUPPORTED_ORDERS}, got {order!r}')
    if not fs_hz > 0:
        raise InvalidInput(f'sampling rate must be positive, got {fs_hz!r}')
    if not 0 < cutoff_hz < fs_hz / 2:
        raise InvalidInput(f'cutoff {cutoff_hz!r} Hz must lie in (0, {fs_hz / 2:g}) Hz')

    sos = signal.butter(order, cutoff_hz, btype='low', output='sos', fs=fs_hz)
    for row in sos:
        if np.any(np.abs(np.roots(row[3:])) >= 1.0):
            raise InvalidInput(f'unstable section for order={order} cutoff={cutoff_hz} fs={fs_hz}')
    gain = np.prod(sos[:, :3].sum(axis=1) / sos[:, 3:].sum(axis=1))
    sos[0, :3] /= gain
    spec = FilterSpec(order, float(cutoff_hz), float(fs_hz), sos)
    logger.debug('%s', spec.describe())
    return spec


def filtfilt(x, spec):
    """Zero-phase filtering: forward pass then a reversed backward pass.

    Ends are extended by odd reflection of ``spec.padlen`` samples, and each
    pass starts from the steady-state response to its first padded sample.

    Raises:
        InvalidInput: non-finite samples.
        InsufficientData: series not longer than the padding.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInput(f'filtfilt expects a 1-D series, got shape {x.shape}')
    if not np.all(np.isfinite(x)):
        raise InvalidInput('filtfilt input contains non-finite samples')
    if x.size <= spec.padlen:
        raise InsufficientData(f'series of {x.size} samples is too short for edge padding of {spec.padlen}')
    return signal.sosfiltfilt(spec.sos, x, padtype='odd', padlen=spec.padlen)


@dataclass(frozen=True, eq=False)
class MaskedSeries:
    values: np.ndarray
    valid: np.ndarray
    fs: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        valid = np.array(self.valid, dtype=bool)
        if values.shape != valid.shape or values.ndim != 1:
            raise InvalidInput(f'values {values.shape} and mask {valid.shape} must be equal-length 1-D')
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'valid', valid)

    def __len__(self):
        return self.values.size

    @property
    def valid_count(self):
        return int(self.valid.sum())


def mask_low_confidence(series, threshold):
    """Per-part (x, y) MaskedSeries; a sample is valid iff its confidence >= threshold.

    Returns:
        dict mapping part index to an (x, y) pair of MaskedSeries.
    """
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInput(f'confidence threshold must be in [0, 1], got {threshold!r}')
    with np.errstate(invalid='ignore'):
        valid = series.sample_valid & (series.confidence >= threshold)
    masked = {}
    for index in range(series.layout.part_count):
        masked[index] = (
            MaskedSeries(series.x[:, index], valid[:, index], series.fps),
            MaskedSeries(series.y[:, index], valid[:, index], series.fps),
        )
    return masked


def interpolate_gaps(m):
    """Fill invalid samples linearly between valid neighbours, holding the nearest value at the ends."""
    if m.valid_count < 2:
        raise InsufficientData(f'need at least 2 valid samples to interpolate, got {m.valid_count}')
    index = np.arange(len(m))
    filled = np.interp(index, index[m.valid], m.values[m.valid])
    filled[m.valid] = m.values[m.valid]
    return filled


def preprocess_trajectory(m, spec, order='mask_first'):
    """Gap-free, filtered trajectory of one coordinate.

    ``mask_first`` interpolates the gaps then filters. ``filter_first`` filters
    the raw trajectory (non-finite samples bridged first), then discards the
    low-confidence samples and interpolates over them.
    """
    if order == 'mask_first':
        return filtfilt(interpolate_gaps(m), spec)
    if order != 'filter_first':
        raise InvalidInput(f'preprocess order must be one of {PREPROCESS_ORDERS}, got {order!r}')
    finite = np.isfinite(m.values)
    raw = interpolate_gaps(MaskedSeries(m.values, finite, m.fs))
    return interpolate_gaps(MaskedSeries(filtfilt(raw, spec), m.valid, m.fs))


def preprocess_part(series, part_index, threshold, spec, order='mask_first'):
    """Mask, interpolate and filter the x and y trajectories of one keypoint."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInput(f'confidence threshold must be in [0, 1], got {threshold!r}')
    with np.errstate(invalid='ignore'):
        valid = series.sample_valid[:, part_index] & (series.confidence[:, part_index] >= threshold)
    x = MaskedSeries(series.x[:, part_index], valid, series.fps)
    y = MaskedSeries(series.y[:, part_index], valid, series.fps)
    if x.valid_count < 2:
        raise InsufficientData(
            f'{series.layout.parts[part_index].name}: {x.valid_count} valid samples '
            f'at confidence >= {threshold}')
    return preprocess_trajectory(x, spec, order), preprocess_trajectory(y, spec, order)
