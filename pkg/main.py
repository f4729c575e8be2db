#!/usr/bin/env python3

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import utils
from beam_runtime import extract_svectors, write_svectors
from config_loader import PipelineConfig, load_config
from dmsnet import detect_overlap, load_checkpoint, save_checkpoint, train
from errors import DiarizationError
from languages import load_language
from models import RunMode
from pipeline import run_pipeline
from rttm_handler import parse_rttm, write_overlap_rttm, write_rttm
from scoring import score_der, score_osd
from sdb_designer import build_bank, read_bank, write_bank
from sim import load_script, make_osd_dataset, random_script, render
from utils import atomic_write
from wav_handler import read_wav, write_wav

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

# Global language variable
app_lang = None


def parse_args(argv=None):
    # Use the global language for argument parsing
    global app_lang
    get = lambda key: app_lang.get('argparse', key)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help=get('config'))
    common.add_argument('--seed', type=int, help=get('seed'))
    common.add_argument('--out', help=get('out'))
    common.add_argument('--debug', action='store_true', help=get('debug'))
    common.add_argument('--app-lang', type=str, help=get('app_lang'))

    parser = argparse.ArgumentParser(description=get('description'))
    sub = parser.add_subparsers(dest='command', required=True)

    design = sub.add_parser('design', parents=[common], help=get('design'))
    design.add_argument('--directions', type=int, help=get('directions'))
    design.add_argument('--taps', type=int, help=get('taps'))

    simulate = sub.add_parser('simulate', parents=[common], help=get('simulate'))
    simulate.add_argument('--script', help=get('script'))
    simulate.add_argument('--speakers', type=int, default=2, help=get('speakers'))
    simulate.add_argument('--duration', type=float, default=20.0, help=get('duration'))
    simulate.add_argument('--overlap', type=float, default=0.3, help=get('overlap'))
    simulate.add_argument('--snr', type=float, default=20.0, help=get('snr'))

    svector = sub.add_parser('svector', parents=[common], help=get('svector'))
    svector.add_argument('wav', help=get('wav'))
    svector.add_argument('--bank', help=get('bank'))

    osd_train = sub.add_parser('osd-train', parents=[common], help=get('osd_train'))
    osd_train.add_argument('--variant', help=get('variant'))
    osd_train.add_argument('--meetings', type=int, help=get('meetings'))
    osd_train.add_argument('--epochs', type=int, help=get('epochs'))

    osd_detect = sub.add_parser('osd-detect', parents=[common], help=get('osd_detect'))
    osd_detect.add_argument('wav', help=get('wav'))
    osd_detect.add_argument('--model', help=get('model'))
    osd_detect.add_argument('--reference', help=get('reference'))

    diarize = sub.add_parser('diarize', parents=[common], help=get('diarize'))
    diarize.add_argument('wav', help=get('wav'))
    diarize.add_argument('--vad', required=True, help=get('vad'))
    diarize.add_argument('--embeddings', help=get('embeddings'))
    diarize.add_argument('--bank', help=get('bank'))
    diarize.add_argument('--embedding-kind', choices=['sx', 'x', 's'], help=get('embedding_kind'))
    osd_source = diarize.add_mutually_exclusive_group()
    osd_source.add_argument('--osd', metavar='MODEL', help=get('osd'))
    osd_source.add_argument('--oracle-osd', metavar='RTTM', help=get('oracle_osd'))

    der = sub.add_parser('score-der', parents=[common], help=get('score_der'))
    der.add_argument('reference', help=get('reference'))
    der.add_argument('hypothesis', help=get('hypothesis'))
    der.add_argument('--collar', type=float, default=0.25, help=get('collar'))
    der.add_argument('--ignore-overlap', action='store_true', help=get('ignore_overlap'))

    osd = sub.add_parser('score-osd', parents=[common], help=get('score_osd'))
    osd.add_argument('reference', help=get('reference'))
    osd.add_argument('hypothesis', help=get('hypothesis_overlap'))

    return parser.parse_args(argv)


def _anchor(args) -> str:
    """File the debug logs are written next to"""
    for name in ('out', 'wav', 'hypothesis', 'script'):
        value = getattr(args, name, None)
        if value:
            return value
    return os.path.join(os.getcwd(), args.command)


def _apply_overrides(config: PipelineConfig, args) -> PipelineConfig:
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if getattr(args, 'embedding_kind', None):
        config = dataclasses.replace(config, fusion=dataclasses.replace(config.fusion,
                                                                        embedding_kind=args.embedding_kind))
    if getattr(args, 'variant', None):
        config = dataclasses.replace(config, osd=dataclasses.replace(config.osd, variant=args.variant))
    if getattr(args, 'directions', None) or getattr(args, 'taps', None):
        config = dataclasses.replace(config, bank=dataclasses.replace(
            config.bank, n_directions=args.directions or config.bank.n_directions,
            n_taps=args.taps or config.bank.n_taps))
    return config.validate()


def _bank(config: PipelineConfig, path=None):
    if path:
        return read_bank(path, sound_speed=config.geometry.sound_speed)
    return build_bank(config.geometry.build(), config.bank.n_directions, config.bank.n_taps, config.bank.loading)


def _emit(lines, out=None) -> None:
    text = "\n".join(lines) + "\n"
    print(text, end='')
    if out:
        atomic_write(out, text)


def cmd_design(args, config: PipelineConfig) -> int:
    out = args.out or 'bank.sdbk'
    bank = _bank(config)
    write_bank(bank, out)
    print(app_lang.get('info', 'bank_written').format(bank.n_directions, bank.channels, bank.n_taps, out))
    return EXIT_OK


def cmd_simulate(args, config: PipelineConfig) -> int:
    out_dir = Path(args.out or 'sim_out')
    if args.script:
        script = load_script(args.script)
        if args.seed is not None:
            script = dataclasses.replace(script, seed=args.seed)
    else:
        script = random_script(args.seed or 0, n_speakers=args.speakers, duration=args.duration,
                               overlap_ratio=args.overlap, snr_db=args.snr,
                               n_directions=config.bank.n_directions)
    rendering = render(script, config.geometry.build())
    stem = out_dir / script.file_id
    write_wav(f"{stem}.wav", rendering.audio)
    write_rttm(rendering.annotation, f"{stem}.rttm")
    write_overlap_rttm(rendering.annotation.overlap_timeline(), script.file_id, f"{stem}_overlap.rttm")
    print(app_lang.get('info', 'simulated').format(len(script.speakers), rendering.audio.duration, out_dir))
    return EXIT_OK


def cmd_svector(args, config: PipelineConfig) -> int:
    audio = read_wav(args.wav)
    svectors = extract_svectors(_bank(config, args.bank), audio, config.windows.length, config.windows.shift)
    out = args.out or str(Path(args.wav).with_suffix('.svec'))
    write_svectors(svectors, out)
    print(app_lang.get('info', 'svectors_written').format(len(svectors), out))
    return EXIT_OK


def cmd_osd_train(args, config: PipelineConfig) -> int:
    model_config = config.model_config()
    meetings = args.meetings or config.osd.train_meetings
    print(app_lang.get('info', 'building_dataset').format(meetings))
    dataset = make_osd_dataset(meetings, config.geometry.build(), model_config, seed=model_config.seed,
                               meeting_duration=config.osd.meeting_duration)
    print(app_lang.get('info', 'dataset').format(dataset.report.chunks, dataset.report.positive_chunk_ratio))
    epochs = config.osd.epochs if args.epochs is None else args.epochs
    params = train(model_config, dataset, epochs, config.osd.lr, batch_size=config.osd.batch_size)
    out = args.out or f"dmsnet_{model_config.variant}.ckpt"
    save_checkpoint(params, model_config, out)
    final = params.loss_trace[-1] if params.loss_trace else float('nan')
    print(app_lang.get('info', 'model_written').format(model_config.variant, final, out))
    return EXIT_OK


def cmd_osd_detect(args, config: PipelineConfig) -> int:
    model = args.model or config.osd.model
    if not model:
        print(app_lang.get('errors', 'no_model'))
        return EXIT_USAGE
    params, model_config = load_checkpoint(model)
    audio = read_wav(args.wav)
    overlaps = detect_overlap(params, model_config, audio, config.osd.threshold)
    out = args.out or str(Path(args.wav).with_name(f"{Path(args.wav).stem}_overlap.rttm"))
    write_overlap_rttm(overlaps, Path(args.wav).stem, out)
    print(app_lang.get('info', 'overlap_written').format(len(overlaps), overlaps.duration, out))
    if args.reference:
        reference = parse_rttm(args.reference).overlap_timeline()
        _emit(score_osd(reference, overlaps, audio.duration).as_lines())
    return EXIT_OK


def cmd_diarize(args, config: PipelineConfig) -> int:
    if args.osd:
        mode = RunMode.WITH_OSD
    elif args.oracle_osd:
        mode = RunMode.ORACLE_OSD
    elif config.osd.model:
        mode = RunMode.WITH_OSD
    else:
        mode = RunMode.CLUSTER_ONLY
    out = args.out or str(Path(args.wav).with_suffix('.rttm'))
    report = str(Path(out).with_name(f"{Path(out).stem}_report.json"))
    result = run_pipeline(config, args.wav, args.vad, mode, out, report,
                          embeddings=args.embeddings, bank=args.bank,
                          osd_model=args.osd or config.osd.model, oracle_reference=args.oracle_osd)
    print(app_lang.get('info', 'diarized').format(result.clusters.k, result.report['windows'],
                                                  result.overlaps.duration, mode.value))
    print(f"{app_lang.get('info', 'rttm_written')}: {out}")
    print(f"{app_lang.get('info', 'report_written')}: {report}")
    return EXIT_OK


def cmd_score_der(args, config: PipelineConfig) -> int:
    report = score_der(parse_rttm(args.reference), parse_rttm(args.hypothesis),
                       collar=args.collar, score_overlap=not args.ignore_overlap)
    _emit(report.as_lines(), args.out)
    return EXIT_OK


def cmd_score_osd(args, config: PipelineConfig) -> int:
    reference = parse_rttm(args.reference)
    hypothesis = parse_rttm(args.hypothesis)
    duration = max(reference.end, hypothesis.end)
    report = score_osd(reference.overlap_timeline(), hypothesis.timeline(), duration)
    _emit(report.as_lines(), args.out)
    return EXIT_OK


COMMANDS = {
    'design': cmd_design,
    'simulate': cmd_simulate,
    'svector': cmd_svector,
    'osd-train': cmd_osd_train,
    'osd-detect': cmd_osd_detect,
    'diarize': cmd_diarize,
    'score-der': cmd_score_der,
    'score-osd': cmd_score_osd,
}


def main(argv=None):
    global app_lang

    # Load config first to get default language settings
    try:
        config = load_config()
    except DiarizationError as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    app_lang = load_language(config.language.application)

    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE

    if args.app_lang:
        app_lang = load_language(args.app_lang)

    # read app version number from file 'version'
    with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'version'), 'r') as f:
        version = f.read().strip()

    print(f"Spatial speaker diarization, v{version}")
    print('==================================')

    debug_enabled = False
    if args.debug:
        debug_enabled = True
        print(app_lang.get('debug', 'enabled'))
        utils.DEBUG = True
        utils.init_debug_file(_anchor(args))

    try:
        config = _apply_overrides(load_config(args.config), args)
        utils.debug_print(f"\n\n=== {args.command} ===\n", component="main")
        return COMMANDS[args.command](args, config)
    except KeyboardInterrupt:
        print(app_lang.get('errors', 'interrupted'))
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(app_lang.get('errors', 'file_not_found').format(e.filename or str(e)))
        return EXIT_DATA
    except (DiarizationError, OSError) as e:
        if debug_enabled:
            import traceback
            traceback.print_exc()
        print(app_lang.get('errors', 'data').format(str(e)))
        return EXIT_DATA
    finally:
        if debug_enabled:
            utils.close_debug_file()


if __name__ == '__main__':
    sys.exit(main())
