"""CLI command groups and the run-directory layout they share"""
import os
from dataclasses import dataclass

from uwdecode.corpus import Corpus
from uwdecode.experiments import ExperimentConfig, ModelStore


@dataclass(frozen=True)
class RunPaths:
    root: str

    @property
    def corpus(self) -> str:
        return os.path.join(self.root, 'corpus')

    @property
    def models(self) -> str:
        return os.path.join(self.root, 'models')

    @property
    def results(self) -> str:
        return os.path.join(self.root, 'results')

    @property
    def reports(self) -> str:
        return os.path.join(self.root, 'reports')

    @property
    def config(self) -> str:
        return os.path.join(self.root, 'config.ini')


def run_paths(cfg: ExperimentConfig) -> RunPaths:
    return RunPaths(cfg.out_dir)


def load_corpus(cfg: ExperimentConfig) -> Corpus:
    return Corpus.load(run_paths(cfg).corpus)


def model_store(cfg: ExperimentConfig) -> ModelStore:
    return ModelStore(run_paths(cfg).models)


def ok(message: str):
    print(f"✓ {message}")
