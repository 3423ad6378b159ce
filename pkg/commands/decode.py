"""decode: WER comparison of the configured systems"""
import logging
import os

from commands import load_corpus, model_store, ok, run_paths
from uwdecode.archive import write_uncertainty_csv
from uwdecode.decoder import SILENCE, alignment_report
from uwdecode.errors import IoError
from uwdecode.experiments import SYSTEMS, outcomes_frame, run_systems
from uwdecode.report import AVG_GROUP, KIND_MSE, ResultTable, emit_report

logger = logging.getLogger(__name__)

REGRESSOR_GRID_CSV = 'regressor_grid.csv'


def best_regressor_cell(results_dir: str):
    """Lowest-MSE cell of a previous regressor grid run, if there is one"""
    path = os.path.join(results_dir, REGRESSOR_GRID_CSV)
    if not os.path.exists(path):
        return None
    frame = ResultTable.read_csv(path, KIND_MSE).frame
    best = frame[frame['best'].astype(bool)]
    if best.empty:
        return None
    return best.iloc[0]['topology'], best.iloc[0]['feature']


def decode(args, cfg):
    systems = args.system or list(cfg.systems)
    paths = run_paths(cfg)
    corpus = load_corpus(cfg)
    best = best_regressor_cell(paths.results)
    if best is not None:
        logger.info(f"Using regressor {best[0]}/{best[1]} from the regressor grid")
    models = model_store(cfg).load_bundle(cfg, cfg.corpus.training_conditions, systems, best)

    table, outcomes = run_systems(cfg, corpus, models, systems)
    emit_report({'wer_table': table}, [], paths.results)
    outcomes_frame(outcomes).to_csv(os.path.join(paths.results, 'decodes.csv'), index=False, float_format='%.6f')

    align_path = os.path.join(paths.results, 'alignments.txt')
    try:
        with open(align_path, 'w') as f:
            for out in outcomes:
                f.write(f"{out.record_id} [{out.training}/{out.system}]\n")
                f.write(alignment_report(out.reference, out.hypothesis, ignore=(SILENCE,)) + '\n\n')
    except OSError as e:
        raise IoError(f"Could not write {align_path}: {e}") from e

    if args.export_tracks:
        for system in systems:
            tracks = [(f'{out.training}/{out.record_id}', out.track) for out in outcomes
                      if out.system == system and out.track is not None]
            if tracks:
                write_uncertainty_csv(os.path.join(paths.results, f'tracks-{system}.csv'), tracks)

    for row in table.frame[table.frame['test_group'] == AVG_GROUP].itertuples():
        print(f"  {row.training:12s} {row.system:14s} {row.wer:6.2f}%")
    ok(f"Decoded {len(outcomes)} utterance(s); results in {paths.results}")


def register(subparsers):
    cmd = subparsers.add_parser('decode', help='Decode the test groups with one or more systems')
    cmd.add_argument('--system', action='append', choices=SYSTEMS,
                     help='System to run (repeatable; default: all configured systems)')
    cmd.add_argument('--export-tracks', action='store_true',
                     help='Also write per-frame uncertainty tracks of the weighted systems')
    cmd.set_defaults(handler=decode)
