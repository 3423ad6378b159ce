"""report: render the emitted result CSVs"""
import logging
import os

from commands import ok, run_paths
from uwdecode.errors import EmptyDataset
from uwdecode.report import FORMATS, KIND_MSE, KIND_ORACLE, KIND_WER, ResultTable, emit_report

logger = logging.getLogger(__name__)

RESULT_FILES = {
    'wer_table': KIND_WER,
    'oracle_grid': KIND_ORACLE,
    'regressor_grid': KIND_MSE,
}


def report(args, cfg):
    formats = [f.strip() for f in args.format.split(',') if f.strip()]
    paths = run_paths(cfg)
    tables = {}
    for name, kind in RESULT_FILES.items():
        path = os.path.join(paths.results, f'{name}.csv')
        if os.path.exists(path):
            tables[name] = ResultTable.read_csv(path, kind)
    if not tables:
        raise EmptyDataset(f"No result tables under {paths.results}; run decode or a grid first")
    written = emit_report(tables, formats, paths.reports)
    for path in written:
        print(f"  {path}")
    ok(f"Report written to {paths.reports}")


def register(subparsers):
    cmd = subparsers.add_parser('report', help='Render result tables')
    cmd.add_argument('--format', default='text', help=f"Comma-separated subset of {','.join(FORMATS)}")
    cmd.set_defaults(handler=report)
