"""Command-line entry point for uwdecode"""
import argparse
import logging
import os
import sys

from config import config, load_experiment_config, save_experiment_config
from uwdecode.errors import UwdError

logger = logging.getLogger('uwdecode')


def create_app():
    """Create the argument parser with every command group registered"""
    parser = argparse.ArgumentParser(
        prog='uwdecode',
        description='Uncertainty-weighted Viterbi decoding experiments on a synthetic corpus')
    parser.add_argument('--config', help='INI run config applied on top of the profile')
    parser.add_argument('--profile', choices=sorted(k for k in config if k != 'default'),
                        help='Configuration profile (default: desk)')
    parser.add_argument('--seed', type=int, help='Master seed for corpus and network initialization')
    parser.add_argument('--out', help='Run output directory')
    parser.add_argument('--jobs', type=int, help='Worker processes for utterance and grid jobs')
    parser.add_argument('--log-level', default=os.environ.get('UWD_LOG_LEVEL') or 'INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--quiet', action='store_true', help='Disable progress bars')

    subparsers = parser.add_subparsers(dest='group', required=True)

    # Register command groups
    from commands.corpus import register as register_corpus
    from commands.train import register as register_train
    from commands.decode import register as register_decode
    from commands.grid import register as register_grid
    from commands.report import register as register_report

    register_corpus(subparsers)
    register_train(subparsers)
    register_decode(subparsers)
    register_grid(subparsers)
    register_report(subparsers)
    return parser


def main(argv=None) -> int:
    parser = create_app()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        cfg = load_experiment_config(args.config, args.profile, seed=args.seed, out_dir=args.out,
                                     jobs=args.jobs, show_progress=not args.quiet)
        save_experiment_config(cfg, os.path.join(cfg.out_dir, 'config.ini'))
        args.handler(args, cfg)
        return 0
    except UwdError as e:
        print(f"✗ {e.__class__.__name__}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        print(f"✗ Unexpected error: {e}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
