"""corpus build"""
import logging

from commands import ok, run_paths
from uwdecode.corpus import build_corpus

logger = logging.getLogger(__name__)


def build(args, cfg):
    corpus = build_corpus(cfg.corpus, cfg.frontend, show_progress=cfg.show_progress)
    out = run_paths(cfg).corpus
    corpus.save(out)
    for name, count in sorted(corpus.counts().items()):
        print(f"  {name}: {count}")
    ok(f"Corpus written to {out}")


def register(subparsers):
    group = subparsers.add_parser('corpus', help='Synthetic corpus')
    commands = group.add_subparsers(dest='command', required=True)
    cmd = commands.add_parser('build', help='Synthesize and save every split')
    cmd.set_defaults(handler=build)
