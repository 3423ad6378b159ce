"""Configuration profiles and run-config files for uwdecode"""
import configparser
import dataclasses
import math
import os
from typing import Optional

from dotenv import load_dotenv

from uwdecode.corpus import CorpusConfig
from uwdecode.enhancement import SSConfig
from uwdecode.errors import ConfigError, IoError
from uwdecode.experiments import (
    AcousticConfig,
    DecoderConfig,
    ExperimentConfig,
    RegressorConfig,
)
from uwdecode.frontend import FrontendConfig
from uwdecode.uncertainty import ModelUncertaintyConfig

load_dotenv()


class Config:
    """Base configuration"""
    OUT_DIR = os.environ.get('UWD_OUT_DIR') or 'runs/default'
    SEED = int(os.environ.get('UWD_SEED') or 0)
    JOBS = int(os.environ.get('UWD_JOBS') or 1)
    LOG_LEVEL = os.environ.get('UWD_LOG_LEVEL') or 'INFO'
    NOISE_MODE = os.environ.get('UWD_NOISE_MODE') or 'leading-frames'

    # Corpus
    N_TRAIN = 100
    N_DEV = 20
    N_TEST = 50
    TRAIN_SNR = (10.0, 20.0)
    TEST_SNR = (5.0, 15.0)

    # Acoustic classifier
    ACOUSTIC_HIDDEN = (64, 64)
    ACOUSTIC_CONTEXT = 2
    ACOUSTIC_EPOCHS = 20
    ACOUSTIC_LEARNING_RATE = 0.05

    # Uncertainty regressor (one "iteration" is one epoch)
    REGRESSOR_EPOCHS = 20
    REGRESSOR_LEARNING_RATE = 0.01

    @classmethod
    def experiment(cls) -> ExperimentConfig:
        cfg = ExperimentConfig(
            corpus=CorpusConfig(n_train=cls.N_TRAIN, n_dev=cls.N_DEV, n_test=cls.N_TEST,
                                train_snr=cls.TRAIN_SNR, test_snr=cls.TEST_SNR),
            acoustic=AcousticConfig(hidden=cls.ACOUSTIC_HIDDEN, context=cls.ACOUSTIC_CONTEXT,
                                    epochs=cls.ACOUSTIC_EPOCHS, learning_rate=cls.ACOUSTIC_LEARNING_RATE),
            regressor=RegressorConfig(epochs=cls.REGRESSOR_EPOCHS, learning_rate=cls.REGRESSOR_LEARNING_RATE),
            noise_mode=cls.NOISE_MODE,
            out_dir=cls.OUT_DIR,
            jobs=cls.JOBS,
        )
        return cfg.with_seed(cls.SEED)


class DeskConfig(Config):
    """Laptop-scale corpus; noisy test at 5-10 dB for the oracle grid run"""
    OUT_DIR = os.environ.get('UWD_OUT_DIR') or 'runs/desk'
    TEST_SNR = (5.0, 10.0)


class FullConfig(Config):
    """Larger corpus, 11-frame classifier context, wider classifier"""
    OUT_DIR = os.environ.get('UWD_OUT_DIR') or 'runs/full'
    N_TRAIN = 400
    N_DEV = 50
    N_TEST = 100
    ACOUSTIC_HIDDEN = (256, 256)
    ACOUSTIC_CONTEXT = 5
    ACOUSTIC_LEARNING_RATE = 0.02


config = {
    'desk': DeskConfig,
    'full': FullConfig,
    'default': DeskConfig
}

# INI section -> ExperimentConfig field holding that section's dataclass
SECTIONS = {
    'frontend': 'frontend',
    'enhancement': 'enhancement',
    'uncertainty': 'uncertainty',
    'decoder': 'decoder',
    'corpus': 'corpus',
    'acoustic': 'acoustic',
    'regressor': 'regressor',
}
EXPERIMENT_SECTION = 'experiment'
_NON_FILE_FIELDS = {'show_progress'}


def _parse_value(text: str, current, name: str):
    """Parse an INI value using the type of the field's current value"""
    text = text.strip()
    try:
        if isinstance(current, bool):
            if text.lower() in ('true', '1', 'yes', 'on'):
                return True
            if text.lower() in ('false', '0', 'no', 'off'):
                return False
            raise ValueError(text)
        if isinstance(current, tuple):
            items = [item.strip() for item in text.split(',') if item.strip()]
            sample = current[0] if current else ''
            return tuple(_parse_value(item, sample, name) for item in items)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if current is None:
            return None if text.lower() in ('', 'none') else float(text)
        return text
    except ValueError:
        raise ConfigError(f"Invalid value '{text}' for '{name}'") from None


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ', '.join(_format_value(v) for v in value)
    if isinstance(value, float) and math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return str(value)


def _apply(obj, values: dict, section: str):
    known = {f.name: f for f in dataclasses.fields(obj) if f.name not in _NON_FILE_FIELDS}
    changes = {}
    for key, text in values.items():
        if key not in known:
            raise ConfigError(f"Unknown key '{key}' in [{section}]")
        if key in SECTIONS.values() and section == EXPERIMENT_SECTION:
            raise ConfigError(f"'{key}' has its own [{key}] section")
        changes[key] = _parse_value(text, getattr(obj, key), f'{section}.{key}')
    return dataclasses.replace(obj, **changes)


def load_experiment_config(path: Optional[str] = None, profile: Optional[str] = None,
                           **overrides) -> ExperimentConfig:
    """
    Build the effective experiment configuration.

    Args:
        path: Optional INI run config applied on top of the profile
        profile: Profile name from `config` (default 'default')
        **overrides: Final top-level overrides (seed, out_dir, jobs, ...); None values are ignored

    Returns:
        Validated ExperimentConfig
    """
    profile = profile or 'default'
    if profile not in config:
        raise ConfigError(f"Unknown profile '{profile}', expected one of {sorted(config)}")
    cfg = config[profile].experiment()

    if path:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as f:
                parser.read_file(f)
        except (OSError, configparser.Error) as e:
            raise IoError(f"Could not read config {path}: {e}") from e
        for section in parser.sections():
            values = dict(parser.items(section))
            if section in SECTIONS:
                attr = SECTIONS[section]
                cfg = dataclasses.replace(cfg, **{attr: _apply(getattr(cfg, attr), values, section)})
            elif section == EXPERIMENT_SECTION:
                cfg = _apply(cfg, values, section)
            else:
                raise ConfigError(f"Unknown section [{section}] in {path}")

    seed = overrides.pop('seed', None)
    if seed is not None:
        cfg = cfg.with_seed(int(seed))
    changes = {key: value for key, value in overrides.items() if value is not None}
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return cfg.validate()


def save_experiment_config(cfg: ExperimentConfig, path: str):
    """Write the effective configuration as INI for provenance"""
    parser = configparser.ConfigParser(interpolation=None)
    for section, attr in SECTIONS.items():
        obj = getattr(cfg, attr)
        parser[section] = {f.name: _format_value(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    parser[EXPERIMENT_SECTION] = {
        f.name: _format_value(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)
        if f.name not in SECTIONS.values() and f.name not in _NON_FILE_FIELDS
    }
    try:
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w') as f:
            parser.write(f)
    except OSError as e:
        raise IoError(f"Could not write config {path}: {e}") from e
