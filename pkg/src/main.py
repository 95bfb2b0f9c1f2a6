"""
gaitval - command-line entry point.

Verbs:
    analyze   manifest -> report directory (tables, plot data, optional SVGs)
    events    one trial file -> heel-contact / toe-off table
    synth     synthetic study (trial files plus a ready-to-run manifest)
    stats     paired values CSV -> agreement record
    mae       labeled snapshots -> test MAE curve

Exit codes: 0 success, 1 input error, 2 pipeline error.
"""

import argparse
import logging
import os
import sys

# Path setup for proper module imports
# DON'T CHANGE THIS - Required for running both as a module and as a script
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd

from src.config import load_config
from src.error_handlers import EXIT_INPUT_ERROR, EXIT_OK, HandlerRegistry, register_error_handlers
from src.exceptions import InvalidInput
from src.models.params import PARAMETER_LABELS, PARAMETERS
from src.models.report import REFERENCE_SYSTEM, InputFormat, ManifestEntry
from src.report import emit_mae_curve, emit_plot_data, emit_tables, render_text
from src.services.analysis_service import (
    agreement_record, analyze_trial, load_manifest, parse_platform_feet, run_analyze,
)
from src.stats import best_snapshot, load_label_set, load_paired_csv, mae_curve
from src.synth import SynthParams, study_params, write_study

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = 'GAITVAL_LOG_LEVEL'


def log_with_flush(message):
    """Print a message and flush stdout immediately (progress stays visible in pipes and containers)."""
    print(message)
    sys.stdout.flush()


def _configure_logging(verbose):
    name = 'INFO' if verbose else os.environ.get(LOG_LEVEL_ENV, 'WARNING').strip().upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(level)


def cmd_analyze(args, config):
    manifest = load_manifest(args.manifest)
    log_with_flush(f"🚀 Analyzing {len(manifest)} trials ({', '.join(manifest.systems)})...")
    report = run_analyze(manifest, config, threads=args.threads)
    emit_tables(report, args.out)
    emit_plot_data(report, os.path.join(args.out, 'plots'), plots=args.plots or config.plots)
    if args.format == 'text':
        log_with_flush(render_text(report))
    log_with_flush(f"✅ Report written to {args.out}")
    return EXIT_OK


def cmd_events(args, config):
    kind = InputFormat(args.kind)
    entry = ManifestEntry(
        trial_id=os.path.splitext(os.path.basename(os.path.normpath(args.input)))[0],
        system_tag=REFERENCE_SYSTEM if kind is InputFormat.GRF else 'keypoints',
        format=kind,
        path=args.input,
        fps=args.fps,
        fs=args.fs,
        platform_feet=parse_platform_feet(args.platform_feet),
    )
    result = analyze_trial(entry, config)
    frame = result.events.to_frame()
    if args.format == 'csv':
        text = frame.to_csv(index=False, lineterminator='\n', float_format='%.4f')
    else:
        lines = [f'{entry.trial_id}: {len(result.events)} events']
        if result.events.ankle_substituted:
            lines.append('(heel and toe events derived from the ankle)')
        lines.append(frame.to_string(index=False, float_format=lambda v: f'{v:.3f}'))
        for parameter in PARAMETERS:
            values = result.params.values(parameter, config.double_support)
            mean = f'{np.mean(values):.3f}' if values else 'n/a'
            lines.append(f'{PARAMETER_LABELS[parameter]:<22} {mean} (n={len(values)})')
        text = '\n'.join(lines) + '\n'
    if args.out:
        with open(args.out, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        log_with_flush(f"✅ {len(result.events)} events written to {args.out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return EXIT_OK


def cmd_synth(args, config):
    base = SynthParams(
        step_time_s=args.step_time,
        grf_sigma_n=args.grf_noise,
        kp_sigma_px=args.kp_noise,
        confidence_dropout_rate=args.dropout,
        seed=args.seed,
        cam_fps=config.camera_fps,
    )
    log_with_flush(f"🚀 Generating {args.trials} synthetic trials...")
    manifest = write_study(study_params(base, args.trials, seed=args.seed), args.out,
                           system_tag=args.system_tag, openpose=args.openpose)
    log_with_flush(f"✅ Manifest written to {manifest}")
    return EXIT_OK


def _value_text(value):
    if value is None:
        return 'n/a'
    if isinstance(value, float):
        return f'{value:.3f}'
    return str(value)


def cmd_stats(args, config):
    record = agreement_record(load_paired_csv(args.paired))
    if args.format == 'csv':
        text = pd.DataFrame([record]).to_csv(index=False, lineterminator='\n', float_format='%.3f')
    else:
        text = ''.join(f'{key:<16} {_value_text(value)}\n' for key, value in record.items())
    if args.out:
        with open(args.out, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        log_with_flush(f"✅ Agreement record written to {args.out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return EXIT_OK


def cmd_mae(args, config):
    if not os.path.isdir(args.snapshots):
        raise InvalidInput(f'snapshot directory {args.snapshots!r} does not exist')
    names = sorted(name for name in os.listdir(args.snapshots) if name.endswith('.csv'))
    if not names:
        raise InvalidInput(f'no snapshot CSV files in {args.snapshots}')
    reference = load_label_set(args.reference)
    snapshots = {os.path.splitext(name)[0]: load_label_set(os.path.join(args.snapshots, name)) for name in names}
    curve = mae_curve(reference, snapshots)
    path = emit_mae_curve(curve, args.out)
    name, value = best_snapshot(curve)
    log_with_flush(f"🏁 Lowest test MAE: {name} ({value:.3f} px), curve in {path}")
    return EXIT_OK


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f'expected a positive integer, got {text}')
    return value


class GaitvalParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f'{self.prog}: error: {message}\n')


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='flat key = value configuration file')
    common.add_argument('--format', choices=('csv', 'text'), default='csv', help='console output format')
    common.add_argument('--verbose', action='store_true', help='log progress at INFO level')

    parser = GaitvalParser(prog='gaitval', description='Markerless gait validation toolkit.')
    verbs = parser.add_subparsers(dest='verb', required=True)

    analyze = verbs.add_parser('analyze', parents=[common], help='analyze a manifest into a report directory')
    analyze.add_argument('--manifest', required=True)
    analyze.add_argument('--out', required=True)
    analyze.add_argument('--threads', type=_positive_int, default=1)
    analyze.add_argument('--plots', action='store_true', help='also render SVG plots')
    analyze.set_defaults(handler=cmd_analyze)

    events = verbs.add_parser('events', parents=[common], help='detect gait events in one trial')
    events.add_argument('--input', required=True, help='GRF CSV, DeepLabCut CSV or OpenPose frame directory')
    events.add_argument('--kind', required=True, choices=[f.value for f in InputFormat])
    events.add_argument('--fps', type=float)
    events.add_argument('--fs', type=float)
    events.add_argument('--platform-feet', help='platform map such as 0:R;1:L')
    events.add_argument('--out', help='output file (default: stdout)')
    events.set_defaults(handler=cmd_events)

    synth = verbs.add_parser('synth', parents=[common], help='write a synthetic study with a manifest')
    synth.add_argument('--out', required=True)
    synth.add_argument('--trials', type=_positive_int, default=1)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--step-time', type=float, default=0.557)
    synth.add_argument('--grf-noise', type=float, default=0.0, help='force noise SD (N)')
    synth.add_argument('--kp-noise', type=float, default=0.0, help='keypoint noise SD (px)')
    synth.add_argument('--dropout', type=float, default=0.0, help='low-confidence keypoint rate')
    synth.add_argument('--system-tag', default='DLCCT')
    synth.add_argument('--openpose', action='store_true', help='also write OpenPose frames (OPPT entries)')
    synth.set_defaults(handler=cmd_synth)

    stats = verbs.add_parser('stats', parents=[common], help='agreement record of a paired CSV')
    stats.add_argument('--paired', required=True, help='CSV with video_id,est,ref columns')
    stats.add_argument('--out', help='output file (default: stdout)')
    stats.set_defaults(handler=cmd_stats)

    mae = verbs.add_parser('mae', parents=[common], help='test MAE curve over labeled snapshots')
    mae.add_argument('--reference', required=True, help='ground-truth labeled-data CSV')
    mae.add_argument('--snapshots', required=True, help='directory of one labeled CSV per snapshot')
    mae.add_argument('--out', required=True)
    mae.set_defaults(handler=cmd_mae)
    return parser


def main(argv=None):
    """Run one verb and return its exit code; errors go through the registered handlers."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    registry = register_error_handlers(HandlerRegistry())
    try:
        config = load_config(args.config)
        return args.handler(args, config)
    except Exception as err:
        return registry.handle(err)


if __name__ == '__main__':
    sys.exit(main())
