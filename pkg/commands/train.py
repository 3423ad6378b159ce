"""train acoustic / train regressor"""
import logging

from commands import load_corpus, model_store, ok
from uwdecode.corpus import CONDITION_MULTI
from uwdecode.experiments import FRONTEND_KINDS, analyze_records, train_acoustic, train_regressor
from uwdecode.neuralnet import FEATURE_VARIANTS, TOPOLOGIES

logger = logging.getLogger(__name__)


def acoustic(args, cfg):
    corpus = load_corpus(cfg)
    store = model_store(cfg)
    conditions = args.condition or list(cfg.corpus.training_conditions)
    for condition in conditions:
        analyses = analyze_records(corpus.training_split(condition), cfg)
        for kind in FRONTEND_KINDS:
            am = train_acoustic(cfg, analyses, corpus.lexicon.n_states, condition, kind)
            store.save_acoustic(am)
            train_ce, val_ce, _ = am.model.history.final()
            ok(f"Acoustic model {condition}/{kind}: train CE {train_ce:.4f}, val CE {val_ce:.4f}")


def regressor(args, cfg):
    topology = args.topology or cfg.regressor.topology
    feature = args.feature or cfg.regressor.feature
    corpus = load_corpus(cfg)
    analyses = analyze_records(corpus.training_split(CONDITION_MULTI), cfg)
    reg = train_regressor(cfg, analyses, topology, feature)
    model_store(cfg).save_regressor(reg)
    train_mse, val_mse, test_mse = reg.model.history.final()
    ok(f"Regressor {topology}/{feature}: train {train_mse:.4f}, val {val_mse:.4f}, test {test_mse:.4f}")


def register(subparsers):
    group = subparsers.add_parser('train', help='Train networks')
    commands = group.add_subparsers(dest='command', required=True)

    cmd = commands.add_parser('acoustic', help='Senone classifiers per training condition and front end')
    cmd.add_argument('--condition', action='append', choices=['clean', CONDITION_MULTI],
                     help='Training condition (repeatable; default: all built conditions)')
    cmd.set_defaults(handler=acoustic)

    cmd = commands.add_parser('regressor', help='One uncertainty regressor on the multi-noise split')
    cmd.add_argument('--topology', choices=sorted(TOPOLOGIES))
    cmd.add_argument('--feature', choices=FEATURE_VARIANTS)
    cmd.set_defaults(handler=regressor)
