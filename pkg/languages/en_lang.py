#!/usr/bin/env python3

"""English language strings"""

LANG_STRINGS = {
    'argparse': {
        'description': 'Multi-channel speaker diarization with spatial embeddings and overlap detection',
        'config': 'Configuration file overlaid on config.json (.json or [section] key = value)',
        'seed': 'Seed for clustering, simulation and training',
        'out': 'Output file or directory',
        'debug': 'Enable debug output',
        'app_lang': 'Application language (e.g. en, de)',
        'design': 'Design the superdirective beamformer bank and write it to a file',
        'directions': 'Number of look directions',
        'taps': 'FIR length per channel',
        'simulate': 'Render a simulated meeting (WAV, reference RTTM, overlap RTTM)',
        'script': 'Meeting script file; a random meeting is rendered when omitted',
        'speakers': 'Number of speakers of a random meeting',
        'duration': 'Duration of a random meeting in seconds',
        'overlap': 'Overlap ratio of a random meeting',
        'snr': 'Signal to noise ratio in dB',
        'svector': 'Extract s-vectors from a multi-channel recording',
        'wav': 'Multi-channel WAV recording',
        'bank': 'Beamformer bank file written by design',
        'osd_train': 'Train the overlapped speech detector on simulated meetings',
        'variant': 'Detector variant M1, M2, M3 or M4',
        'meetings': 'Number of simulated training meetings',
        'epochs': 'Number of training epochs',
        'osd_detect': 'Detect overlapped speech in a recording',
        'model': 'Detector checkpoint',
        'reference': 'Reference RTTM',
        'diarize': 'Diarize a recording',
        'vad': 'Speech regions (RTTM or "start end" lines)',
        'embeddings': 'Speaker embedding file ("start end v_1 ... v_D" lines)',
        'embedding_kind': 'Similarity used for clustering: fused (sx), speaker embedding (x) or s-vector (s)',
        'osd': 'Detector checkpoint; enables secondary speaker assignment',
        'oracle_osd': 'Take the overlap regions from this reference RTTM',
        'score_der': 'Score a hypothesis RTTM against a reference (DER)',
        'hypothesis': 'Hypothesis RTTM',
        'hypothesis_overlap': 'Detected overlap RTTM',
        'collar': 'Forgiveness collar in seconds around reference boundaries',
        'ignore_overlap': 'Exclude overlapped reference regions from scoring',
        'score_osd': 'Score detected overlap against a reference (DetER)',
    },
    'info': {
        'bank_written': 'Beamformer bank ({} directions, {} channels, {} taps) written to {}',
        'simulated': 'Simulated meeting with {} speakers, {:.1f} s, written to {}',
        'svectors_written': '{} s-vectors written to {}',
        'building_dataset': 'Simulating {} training meetings',
        'dataset': 'Training set: {} chunks, {:.0%} with overlap',
        'model_written': 'Detector {} trained (final loss {:.4f}), written to {}',
        'overlap_written': '{} overlap regions ({:.2f} s) written to {}',
        'diarized': 'Found {} speakers in {} windows, {:.2f} s overlap ({})',
        'rttm_written': 'RTTM written',
        'report_written': 'Run report written',
    },
    'debug': {
        'enabled': 'Debug mode enabled',
    },
    'errors': {
        'file_not_found': 'File not found: {}',
        'data': 'Error: {}',
        'no_model': 'No detector checkpoint given (--model or osd.model in the config)',
        'interrupted': 'Operation cancelled by user',
    },
}
