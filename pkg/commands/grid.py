"""grid oracle / grid regressor"""
import logging
from dataclasses import replace
from typing import Tuple

import numpy as np

from commands import load_corpus, model_store, ok, run_paths
from uwdecode.errors import ConfigError
from uwdecode.experiments import FRONTEND_SS, ModelBundle, run_oracle_grid, run_regressor_grid
from uwdecode.report import AVG_GROUP, emit_report

logger = logging.getLogger(__name__)


def parse_grid(text: str) -> Tuple[float, ...]:
    """'1:18' (inclusive, step 1), '1:18:2', or a comma list '1,2,4.5'"""
    try:
        if ':' in text:
            parts = [float(p) for p in text.split(':')]
            if len(parts) not in (2, 3):
                raise ValueError(text)
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1.0
            if step <= 0 or stop < start:
                raise ValueError(text)
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + i * step) for i in range(count))
        values = tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise ConfigError(f"Invalid grid '{text}'") from None
    if not values:
        raise ConfigError(f"Invalid grid '{text}'")
    return values


def oracle(args, cfg):
    if args.th_grid:
        cfg = replace(cfg, th_grid=parse_grid(args.th_grid))
    if args.k_grid:
        cfg = replace(cfg, k_grid=parse_grid(args.k_grid))
    condition = args.condition or cfg.grid_condition
    cfg = replace(cfg, grid_condition=condition).validate()

    corpus = load_corpus(cfg)
    models = ModelBundle(acoustic={(condition, FRONTEND_SS): model_store(cfg).load_acoustic(condition, FRONTEND_SS)})
    result = run_oracle_grid(cfg, corpus, models, condition)
    emit_report({'oracle_grid': result.table}, [], run_paths(cfg).results)

    th, k, best = result.argmin[AVG_GROUP]
    reference = result.baseline_ss[AVG_GROUP]
    print(f"  baseline+SS: {reference:.2f}%  argmin Th={th:g} K={k:g}: {best:.2f}%")
    if result.surface_is_constant():
        logger.warning("Oracle surface is constant: weighting never changed a hypothesis")
    ok(f"Oracle grid over {len(cfg.th_grid)} x {len(cfg.k_grid)} cells ({condition} training)")


def regressor(args, cfg):
    corpus = load_corpus(cfg)
    result = run_regressor_grid(cfg, corpus)
    store = model_store(cfg)
    for reg in result.regressors.values():
        store.save_regressor(reg)
    emit_report({'regressor_grid': result.table}, [], run_paths(cfg).results)
    topology, feature = result.best_cell
    ok(f"Regressor grid: {len(result.table)} cells, lowest MSE {topology}/{feature}")


def register(subparsers):
    group = subparsers.add_parser('grid', help='Parameter grids')
    commands = group.add_subparsers(dest='command', required=True)

    cmd = commands.add_parser('oracle', help='Oracle WER surface over (Th, K)')
    cmd.add_argument('--th-grid', help="Th values, e.g. '1:18' or '1,4,8'")
    cmd.add_argument('--k-grid', help="K values, e.g. '1,2,4,5,8,12,16'")
    cmd.add_argument('--condition', choices=['clean', 'multi-noise'], help='Acoustic training condition')
    cmd.set_defaults(handler=oracle)

    cmd = commands.add_parser('regressor', help='Topology x feature regressor MSE table')
    cmd.set_defaults(handler=regressor)
