#!/usr/bin/env python3
"""
Export the features of one corpus split (raw and enhanced) as a feature
archive, plus the analytic and oracle uncertainty tracks
"""

import sys
import os
import argparse
import logging

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import load_experiment_config
from uwdecode.archive import (
    FeatureRecord,
    feature_matrix,
    write_feature_binary,
    write_feature_csv,
    write_uncertainty_csv,
)
from uwdecode.corpus import Corpus
from uwdecode.errors import UwdError
from uwdecode.experiments import SYSTEM_MODEL, SYSTEM_ORACLE, analyze_records, model_uv, oracle_uv
from uwdecode.uncertainty import UncertaintyTrack


def export(run_dir, split, fmt, out_dir):
    cfg = load_experiment_config(os.path.join(run_dir, 'config.ini'), out_dir=run_dir)
    corpus = Corpus.load(os.path.join(run_dir, 'corpus'))
    analyses = analyze_records(corpus.split(split), cfg)

    records = []
    for a in analyses:
        records.append(FeatureRecord(a.record_id, feature_matrix(a.raw)))
        records.append(FeatureRecord(a.record_id, feature_matrix(a.enhanced), enhanced=True))

    os.makedirs(out_dir, exist_ok=True)
    if fmt == 'binary':
        path = os.path.join(out_dir, f'{split}.uwfa')
        write_feature_binary(path, records)
    else:
        path = os.path.join(out_dir, f'{split}.csv')
        write_feature_csv(path, records)
    print(f"✓ {len(records)} feature records written to {path}")

    model_tracks = [(a.record_id, UncertaintyTrack.from_uv(model_uv(a, cfg), cfg.uv_half_width,
                                                          cfg.weighting(SYSTEM_MODEL)))
                    for a in analyses]
    write_uncertainty_csv(os.path.join(out_dir, f'{split}-uv-model.csv'), model_tracks)
    oracle_tracks = [(a.record_id, UncertaintyTrack.from_uv(oracle_uv(a), cfg.uv_half_width,
                                                           cfg.weighting(SYSTEM_ORACLE)))
                     for a in analyses]
    write_uncertainty_csv(os.path.join(out_dir, f'{split}-uv-oracle.csv'), oracle_tracks)
    print(f"✓ Uncertainty tracks for {len(analyses)} utterance(s)")
    return True


if __name__ == '__main__':
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument('run_dir', help='Run directory holding corpus/ and config.ini')
    parser.add_argument('--split', default='test-white')
    parser.add_argument('--format', choices=['csv', 'binary'], default='csv')
    parser.add_argument('--out', default=None, help='Output directory (default: <run_dir>/features)')
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO)

    try:
        success = export(args.run_dir, args.split, args.format, args.out or os.path.join(args.run_dir, 'features'))
    except UwdError as e:
        print(f"❌ {e.__class__.__name__}: {e}")
        success = False
    sys.exit(0 if success else 1)
