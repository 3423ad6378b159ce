#!/usr/bin/env python3
"""
Desk-scale oracle run: build the corpus, train the clean-condition
classifiers, sweep the oracle (Th, K) grid and render the surface
"""

import sys
import os
import argparse
import logging

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import load_experiment_config, save_experiment_config
from uwdecode.corpus import CONDITION_CLEAN, build_corpus
from uwdecode.errors import UwdError
from uwdecode.experiments import (
    FRONTEND_SS,
    ModelBundle,
    ModelStore,
    analyze_records,
    run_oracle_grid,
    train_acoustic,
)
from uwdecode.report import AVG_GROUP, emit_report


def run(out_dir=None, seed=None, jobs=None):
    cfg = load_experiment_config(profile='desk', seed=seed, out_dir=out_dir, jobs=jobs)
    save_experiment_config(cfg, os.path.join(cfg.out_dir, 'config.ini'))

    corpus = build_corpus(cfg.corpus, cfg.frontend, show_progress=True)
    corpus.save(os.path.join(cfg.out_dir, 'corpus'))
    print(f"✓ Corpus: {corpus.counts()}")

    analyses = analyze_records(corpus.training_split(CONDITION_CLEAN), cfg)
    am = train_acoustic(cfg, analyses, corpus.lexicon.n_states, CONDITION_CLEAN, FRONTEND_SS)
    ModelStore(os.path.join(cfg.out_dir, 'models')).save_acoustic(am)
    print(f"✓ Acoustic model trained ({am.model.history.epochs_run} epochs)")

    result = run_oracle_grid(cfg, corpus, ModelBundle(acoustic={(CONDITION_CLEAN, FRONTEND_SS): am}),
                             CONDITION_CLEAN)
    written = emit_report({'oracle_grid': result.table}, ['text', 'gnuplot', 'png'],
                          os.path.join(cfg.out_dir, 'reports'))

    th, k, best = result.argmin[AVG_GROUP]
    print(f"✓ baseline+SS {result.baseline_ss[AVG_GROUP]:.2f}%, best Th={th:g} K={k:g} at {best:.2f}%")
    if result.surface_is_constant():
        print("❌ Surface is constant; weighting never changed a hypothesis")
    for path in written:
        print(f"  {path}")
    return True


if __name__ == '__main__':
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument('--out', help='Run directory (default: runs/desk)')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--jobs', type=int)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        success = run(args.out, args.seed, args.jobs)
    except UwdError as e:
        print(f"❌ {e.__class__.__name__}: {e}")
        success = False
    sys.exit(0 if success else 1)
