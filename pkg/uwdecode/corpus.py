"""
Synthetic paired clean/noisy corpus.

Utterances are generated state by state as spectrally shaped noise, so the
frame alignment, the clean signal and the injected noise are all known
exactly.
"""
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.signal as sps
from scipy.fft import irfft, rfft
from tqdm import tqdm

from uwdecode.archive import read_alignment_csv, write_alignment_csv
from uwdecode.audio_io import read_wav, write_wav
from uwdecode.decoder import SILENCE, Lexicon
from uwdecode.errors import AllSilent, ConfigError, IoError, MissingDependency, UnknownWord
from uwdecode.frontend import AudioSignal, FrontendConfig, mel_filterbank

logger = logging.getLogger(__name__)

NOISE_WHITE = 'white'
NOISE_PINK = 'pink'
NOISE_BAND = 'band'
NOISE_TYPES = (NOISE_WHITE, NOISE_PINK, NOISE_BAND)

CONDITION_CLEAN = 'clean'
CONDITION_MULTI = 'multi-noise'
CONDITIONS = (CONDITION_CLEAN, CONDITION_MULTI)

SPLIT_DEV = 'dev'
SPLIT_TEST_CLEAN = 'test-clean'

WORD_NAMES = ('alpha', 'bravo', 'charlie', 'delta', 'echo', 'foxtrot', 'golf', 'hotel',
              'india', 'juliett', 'kilo', 'lima', 'mike', 'november', 'oscar', 'papa',
              'quebec', 'romeo', 'sierra', 'tango')

MANIFEST_NAME = 'manifest.jsonl'
INVENTORY_NAME = 'inventory.json'


def training_split(condition: str) -> str:
    return f'train-{condition}'


def noisy_split(noise_type: str) -> str:
    return f'test-{noise_type}'


def derive_seed(master_seed: int, key: str) -> int:
    """Stable 64-bit seed for one utterance, independent of generation order"""
    digest = hashlib.blake2b(f'{master_seed}:{key}'.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


@dataclass
class StateTemplate:
    """Target Mel envelope (power domain) and duration range in frames"""
    envelope: np.ndarray
    dur_min: int
    dur_max: int

    def __post_init__(self):
        self.envelope = np.asarray(self.envelope, dtype=np.float64)
        if np.any(self.envelope <= 0) or not np.all(np.isfinite(self.envelope)):
            raise ConfigError("Template envelope entries must be finite and > 0")
        if self.dur_min < 1 or self.dur_max < self.dur_min:
            raise ConfigError(f"Invalid duration range [{self.dur_min}, {self.dur_max}]")


@dataclass(frozen=True)
class CorpusConfig:
    vocab_size: int = 10
    states_per_word: Tuple[int, int] = (2, 4)
    words_per_utt: Tuple[int, int] = (3, 8)
    state_duration: Tuple[int, int] = (3, 6)
    silence_duration: Tuple[int, int] = (12, 16)
    successors: int = 3
    grammar_adherence: float = 0.85
    training_conditions: Tuple[str, ...] = CONDITIONS
    noise_types: Tuple[str, ...] = NOISE_TYPES
    train_snr: Tuple[float, float] = (10.0, 20.0)
    test_snr: Tuple[float, float] = (5.0, 15.0)
    clean_fraction: float = 0.25
    n_train: int = 100
    n_dev: int = 20
    n_test: int = 50
    peak_amplitude: float = 0.25
    silence_level: float = 1e-3
    seed: int = 0

    def validate(self) -> 'CorpusConfig':
        if not 1 <= self.vocab_size <= len(WORD_NAMES):
            raise ConfigError(f"vocab_size must be in [1, {len(WORD_NAMES)}]")
        for name in ('states_per_word', 'words_per_utt', 'state_duration', 'silence_duration'):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} must be a range with 1 <= min <= max, got {(lo, hi)}")
        for name in ('train_snr', 'test_snr'):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ConfigError(f"{name} must be a finite range, got {(lo, hi)}")
        unknown = set(self.noise_types) - set(NOISE_TYPES)
        if unknown or not self.noise_types:
            raise ConfigError(f"noise_types must be a non-empty subset of {NOISE_TYPES}")
        bad = set(self.training_conditions) - set(CONDITIONS)
        if bad or not self.training_conditions:
            raise ConfigError(f"training_conditions must be a non-empty subset of {CONDITIONS}")
        if min(self.n_train, self.n_dev, self.n_test) < 1:
            raise ConfigError("Every split count must be >= 1")
        if not 0.0 <= self.clean_fraction <= 1.0:
            raise ConfigError("clean_fraction must be in [0, 1]")
        if not 0.0 <= self.grammar_adherence <= 1.0:
            raise ConfigError("grammar_adherence must be in [0, 1]")
        if not 0.0 < self.peak_amplitude <= 1.0:
            raise ConfigError("peak_amplitude must be in (0, 1]")
        if not 1 <= self.successors <= self.vocab_size:
            raise ConfigError("successors must be in [1, vocab_size]")
        return self


@dataclass
class UtteranceRecord:
    """
    One utterance and everything known about it.

    Clean records have noisy=None and noise=None with snr_db=inf.
    """
    id: str
    split: str
    transcript: Tuple[str, ...]
    alignment: np.ndarray
    clean: AudioSignal
    noisy: Optional[AudioSignal] = None
    noise: Optional[AudioSignal] = None
    snr_db: float = math.inf
    noise_type: str = 'none'
    clean_id: str = ''

    @property
    def degraded(self) -> bool:
        return self.noisy is not None

    @property
    def observed(self) -> AudioSignal:
        return self.noisy if self.noisy is not None else self.clean

    def manifest_entry(self, wav_paths: Dict[str, str]) -> dict:
        return {
            'id': self.id,
            'split': self.split,
            'transcript': ' '.join(self.transcript),
            'clean_id': self.clean_id or self.id,
            'wav': wav_paths,
            'snr_db': None if math.isinf(self.snr_db) else self.snr_db,
            'noise_type': self.noise_type,
            'n_frames': int(len(self.alignment)),
        }


@dataclass
class Inventory:
    """Lexicon, per-state templates and the word grammar the corpus is drawn from"""
    lexicon: Lexicon
    templates: Dict[int, StateTemplate]
    successors: Dict[str, Tuple[str, ...]] = field(default_factory=dict)


def _envelope(rng: np.random.Generator, n_mel: int) -> np.ndarray:
    """Floor plus two Gaussian bumps across the filter index axis"""
    idx = np.arange(n_mel, dtype=np.float64)
    env = np.full(n_mel, 0.02)
    for _ in range(2):
        center = rng.uniform(2, max(n_mel - 3, 2))
        width = rng.uniform(1.5, 4.0)
        env += rng.uniform(0.5, 1.0) * np.exp(-0.5 * ((idx - center) / width) ** 2)
    return env


def make_inventory(cfg: CorpusConfig, frontend: FrontendConfig) -> Inventory:
    """Draw word lengths, state envelopes and the successor grammar from cfg.seed"""
    cfg.validate()
    rng = np.random.default_rng(derive_seed(cfg.seed, 'inventory'))
    words = WORD_NAMES[:cfg.vocab_size]
    lo, hi = cfg.states_per_word
    state_counts = {word: int(rng.integers(lo, hi + 1)) for word in words}
    state_counts[SILENCE] = 1
    lexicon = Lexicon.from_words(state_counts)

    templates = {}
    for word in lexicon.words:
        for s in lexicon.states_of(word):
            if word == SILENCE:
                templates[s] = StateTemplate(np.full(frontend.n_mel, cfg.silence_level), *cfg.silence_duration)
            else:
                templates[s] = StateTemplate(_envelope(rng, frontend.n_mel), *cfg.state_duration)

    successors = {}
    for context in (SILENCE,) + words:
        picks = rng.choice(len(words), size=cfg.successors, replace=False)
        successors[context] = tuple(words[i] for i in sorted(picks))
    return Inventory(lexicon=lexicon, templates=templates, successors=successors)


def draw_transcript(inventory: Inventory, cfg: CorpusConfig, rng: np.random.Generator) -> Tuple[str, ...]:
    """sil w1 .. wn sil, each word preferring its context's successors"""
    words = [w for w in inventory.lexicon.words if w != SILENCE]
    n_words = int(rng.integers(cfg.words_per_utt[0], cfg.words_per_utt[1] + 1))
    out = [SILENCE]
    for _ in range(n_words):
        preferred = inventory.successors[out[-1]]
        if rng.random() < cfg.grammar_adherence:
            out.append(preferred[int(rng.integers(len(preferred)))])
        else:
            out.append(words[int(rng.integers(len(words)))])
    out.append(SILENCE)
    return tuple(out)


def _preemphasis_gain(frontend: FrontendConfig) -> np.ndarray:
    """|1 - a e^{-jw}|^2 per FFT bin"""
    omega = 2 * np.pi * np.arange(frontend.fft_size // 2 + 1) / frontend.fft_size
    a = frontend.preemphasis
    gain = (1 - a * np.cos(omega)) ** 2 + (a * np.sin(omega)) ** 2
    return np.maximum(gain, 1e-3)


def _bin_gains(envelopes: np.ndarray, frontend: FrontendConfig) -> np.ndarray:
    """
    Spread Mel envelopes onto FFT bins.

    Bin power is the filter-weighted average of the envelopes covering it,
    divided by the preemphasis response so the analyzed energies follow the
    envelope.
    """
    fb = mel_filterbank(frontend)
    coverage = fb.sum(axis=0)
    gains = (envelopes @ fb) / np.maximum(coverage, 1e-12)
    gains[:, coverage <= 0] = 0.0
    return gains / _preemphasis_gain(frontend)


def shaped_noise(alignment: np.ndarray, templates: Dict[int, StateTemplate], frontend: FrontendConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Overlap-add of per-frame white noise filtered to each frame's state envelope"""
    n_frames = len(alignment)
    n, hop, nfft = frontend.frame_len, frontend.frame_shift, frontend.fft_size
    states = sorted(templates)
    gains = _bin_gains(np.stack([templates[s].envelope for s in states]), frontend)
    row_of = {s: i for i, s in enumerate(states)}

    window = sps.get_window('hann', n)
    out = np.zeros(frontend.n_samples_for(n_frames))
    norm = np.zeros_like(out)
    spectra = rfft(rng.standard_normal((n_frames, nfft)), axis=1)
    for t, state in enumerate(alignment):
        chunk = irfft(spectra[t] * np.sqrt(gains[row_of[int(state)]]), n=nfft)[:n]
        out[t * hop:t * hop + n] += chunk * window
        norm[t * hop:t * hop + n] += window ** 2
    return out / np.sqrt(np.maximum(norm, 1e-8))


def synth_utterance(transcript: Sequence[str], lexicon: Lexicon, templates: Dict[int, StateTemplate],
                    frontend: FrontendConfig, seed: int, utterance_id: str = 'utt',
                    split: str = '', peak_amplitude: float = 0.25) -> UtteranceRecord:
    """Clean utterance whose drawn state durations define its exact frame alignment"""
    for word in transcript:
        if word not in lexicon.word_states:
            raise UnknownWord(f"'{word}' is not in the lexicon")
    rng = np.random.default_rng(seed)
    alignment = []
    for word in transcript:
        for s in lexicon.states_of(word):
            tpl = templates[s]
            alignment.extend([s] * int(rng.integers(tpl.dur_min, tpl.dur_max + 1)))
    alignment = np.array(alignment, dtype=np.int64)

    samples = shaped_noise(alignment, templates, frontend, rng)
    peak = np.max(np.abs(samples))
    if peak > 0:
        samples = samples * (peak_amplitude / peak)
    clean = AudioSignal(samples=samples, sample_rate=frontend.sample_rate)
    return UtteranceRecord(id=utterance_id, split=split, transcript=tuple(transcript),
                           alignment=alignment, clean=clean, clean_id=utterance_id)


def make_noise(noise_type: str, n_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Unscaled white, pink (1/f power) or band-limited (300-3000 Hz) noise"""
    white = rng.standard_normal(n_samples)
    if noise_type == NOISE_WHITE:
        return white
    if noise_type == NOISE_PINK:
        spectrum = rfft(white)
        freqs = np.arange(len(spectrum), dtype=np.float64)
        freqs[0] = 1.0
        return irfft(spectrum / np.sqrt(freqs), n=n_samples)
    if noise_type == NOISE_BAND:
        sos = sps.butter(4, [300.0, 3000.0], btype='bandpass', fs=sample_rate, output='sos')
        return sps.sosfilt(sos, white)
    raise ConfigError(f"Unknown noise type '{noise_type}', expected one of {NOISE_TYPES}")


def add_noise(clean: AudioSignal, noise_type: str, snr_db: float, seed: int) -> Tuple[AudioSignal, AudioSignal]:
    """
    Mix noise at snr_db over the whole utterance.

    snr_db = +inf is the clean-condition sentinel: noisy is a copy of clean
    and the noise is all zeros. The returned noise is noisy - clean, so the
    decomposition is exact in memory.
    """
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ConfigError(f"SNR must be finite or +inf, got {snr_db}")
    if snr_db == math.inf:
        return (AudioSignal(clean.samples.copy(), clean.sample_rate),
                AudioSignal(np.zeros_like(clean.samples), clean.sample_rate))
    p_clean = clean.power
    if p_clean == 0:
        raise AllSilent("Cannot mix noise at an SNR into a silent signal")
    raw = make_noise(noise_type, len(clean), clean.sample_rate, np.random.default_rng(seed))
    scale = math.sqrt(p_clean / (10.0 ** (snr_db / 10.0) * np.mean(raw ** 2)))
    noisy = clean.samples + raw * scale
    noise = noisy - clean.samples
    return AudioSignal(noisy, clean.sample_rate), AudioSignal(noise, clean.sample_rate)


def realized_snr(clean: AudioSignal, noise: AudioSignal) -> float:
    p_noise = noise.power
    return math.inf if p_noise == 0 else 10.0 * math.log10(clean.power / p_noise)


def _degrade(base: UtteranceRecord, record_id: str, split: str, noise_type: str,
             snr_range: Tuple[float, float], master_seed: int) -> UtteranceRecord:
    snr_rng = np.random.default_rng(derive_seed(master_seed, f'{record_id}:snr'))
    snr = float(snr_rng.uniform(*snr_range))
    noisy, noise = add_noise(base.clean, noise_type, snr, derive_seed(master_seed, f'{record_id}:noise'))
    return UtteranceRecord(id=record_id, split=split, transcript=base.transcript, alignment=base.alignment,
                           clean=base.clean, noisy=noisy, noise=noise, snr_db=snr,
                           noise_type=noise_type, clean_id=base.id)


def _clean_copy(base: UtteranceRecord, record_id: str, split: str) -> UtteranceRecord:
    return UtteranceRecord(id=record_id, split=split, transcript=base.transcript, alignment=base.alignment,
                           clean=base.clean, clean_id=base.id)


class Corpus:
    """Named splits of UtteranceRecords plus the inventory they were drawn from"""

    def __init__(self, config: CorpusConfig, frontend: FrontendConfig, inventory: Inventory,
                 splits: Dict[str, List[UtteranceRecord]]):
        self.config = config
        self.frontend = frontend
        self.inventory = inventory
        self.splits = splits

    @property
    def lexicon(self) -> Lexicon:
        return self.inventory.lexicon

    def split(self, name: str) -> List[UtteranceRecord]:
        if name not in self.splits:
            raise MissingDependency(f"Corpus has no split '{name}' (have {sorted(self.splits)})")
        return self.splits[name]

    def training_split(self, condition: str) -> List[UtteranceRecord]:
        return self.split(training_split(condition))

    @property
    def noisy_test_groups(self) -> List[str]:
        return [noisy_split(nt) for nt in self.config.noise_types if noisy_split(nt) in self.splits]

    @property
    def test_groups(self) -> List[str]:
        return [SPLIT_TEST_CLEAN] + self.noisy_test_groups

    def counts(self) -> Dict[str, int]:
        return {name: len(records) for name, records in self.splits.items()}

    def save(self, out_dir: str):
        """WAVs and alignment CSVs per record, plus the JSON-lines manifest and the inventory"""
        wav_dir = os.path.join(out_dir, 'wav')
        align_dir = os.path.join(out_dir, 'align')
        try:
            os.makedirs(wav_dir, exist_ok=True)
            os.makedirs(align_dir, exist_ok=True)
        except OSError as e:
            raise IoError(f"Could not create {out_dir}: {e}") from e

        written_clean = set()
        lines = []
        for name in sorted(self.splits):
            for rec in self.splits[name]:
                paths = {'clean': os.path.join('wav', f'{rec.clean_id}-clean.wav')}
                if rec.clean_id not in written_clean:
                    write_wav(os.path.join(out_dir, paths['clean']), rec.clean)
                    write_alignment_csv(os.path.join(align_dir, f'{rec.clean_id}.csv'), rec.alignment)
                    written_clean.add(rec.clean_id)
                if rec.degraded:
                    paths['noisy'] = os.path.join('wav', f'{rec.id}-noisy.wav')
                    paths['noise'] = os.path.join('wav', f'{rec.id}-noise.wav')
                    write_wav(os.path.join(out_dir, paths['noisy']), rec.noisy)
                    write_wav(os.path.join(out_dir, paths['noise']), rec.noise)
                lines.append(json.dumps(rec.manifest_entry(paths), sort_keys=True))

        with open(os.path.join(out_dir, MANIFEST_NAME), 'w') as f:
            f.write('\n'.join(lines) + '\n')

        inventory = {
            'corpus': asdict(self.config),
            'frontend': asdict(self.frontend),
            'word_states': {w: list(s) for w, s in self.lexicon.word_states.items()},
            'templates': {str(s): {'envelope': t.envelope.tolist(), 'dur_min': t.dur_min, 'dur_max': t.dur_max}
                          for s, t in self.inventory.templates.items()},
            'successors': {w: list(s) for w, s in self.inventory.successors.items()},
        }
        with open(os.path.join(out_dir, INVENTORY_NAME), 'w') as f:
            json.dump(inventory, f, indent=2, sort_keys=True)
        logger.info(f"Saved corpus to {out_dir}: {self.counts()}")

    @classmethod
    def load(cls, out_dir: str) -> 'Corpus':
        try:
            with open(os.path.join(out_dir, INVENTORY_NAME)) as f:
                inv = json.load(f)
            with open(os.path.join(out_dir, MANIFEST_NAME)) as f:
                entries = [json.loads(line) for line in f if line.strip()]
        except (OSError, ValueError) as e:
            raise IoError(f"Could not load corpus from {out_dir}: {e}") from e

        corpus_cfg = _tuples(CorpusConfig, inv['corpus'])
        frontend = FrontendConfig(**inv['frontend'])
        lexicon = Lexicon({w: tuple(s) for w, s in inv['word_states'].items()})
        templates = {int(s): StateTemplate(np.array(t['envelope']), t['dur_min'], t['dur_max'])
                     for s, t in inv['templates'].items()}
        inventory = Inventory(lexicon, templates, {w: tuple(s) for w, s in inv['successors'].items()})

        splits: Dict[str, List[UtteranceRecord]] = {}
        cache: Dict[str, Tuple[AudioSignal, np.ndarray]] = {}
        for entry in entries:
            cid = entry['clean_id']
            if cid not in cache:
                cache[cid] = (read_wav(os.path.join(out_dir, entry['wav']['clean'])),
                              read_alignment_csv(os.path.join(out_dir, 'align', f'{cid}.csv')))
            clean, alignment = cache[cid]
            noisy = noise = None
            if 'noisy' in entry['wav']:
                noisy = read_wav(os.path.join(out_dir, entry['wav']['noisy']))
                noise = read_wav(os.path.join(out_dir, entry['wav']['noise']))
            snr = math.inf if entry['snr_db'] is None else float(entry['snr_db'])
            rec = UtteranceRecord(id=entry['id'], split=entry['split'], transcript=tuple(entry['transcript'].split()),
                                  alignment=alignment, clean=clean, noisy=noisy, noise=noise, snr_db=snr,
                                  noise_type=entry['noise_type'], clean_id=cid)
            splits.setdefault(entry['split'], []).append(rec)
        logger.info(f"Loaded corpus from {out_dir}: {sum(len(v) for v in splits.values())} records")
        return cls(corpus_cfg, frontend, inventory, splits)


def _tuples(cls, values: dict):
    """Rebuild a frozen config whose tuple fields came back from JSON as lists"""
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in values.items()})


def build_corpus(cfg: CorpusConfig, frontend: FrontendConfig, show_progress: bool = False) -> Corpus:
    """
    Synthesize every split.

    train-clean and train-multi-noise share the same clean utterances; the
    multi-noise split keeps clean_fraction of them clean. test-clean and the
    test-<noise> groups likewise share one set of clean test utterances.
    """
    cfg.validate()
    frontend.validate()
    inventory = make_inventory(cfg, frontend)
    lexicon = inventory.lexicon

    def synth_pool(prefix: str, count: int) -> List[UtteranceRecord]:
        pool = []
        for i in tqdm(range(count), desc=f'synth {prefix}', disable=not show_progress):
            uid = f'{prefix}{i:04d}'
            rng = np.random.default_rng(derive_seed(cfg.seed, f'{uid}:transcript'))
            transcript = draw_transcript(inventory, cfg, rng)
            pool.append(synth_utterance(transcript, lexicon, inventory.templates, frontend,
                                        derive_seed(cfg.seed, uid), utterance_id=uid,
                                        peak_amplitude=cfg.peak_amplitude))
        return pool

    splits: Dict[str, List[UtteranceRecord]] = {}
    train_pool = synth_pool('trn', cfg.n_train)
    if CONDITION_CLEAN in cfg.training_conditions:
        name = training_split(CONDITION_CLEAN)
        splits[name] = [_clean_copy(base, base.id, name) for base in train_pool]
    if CONDITION_MULTI in cfg.training_conditions:
        name = training_split(CONDITION_MULTI)
        n_clean = int(round(cfg.clean_fraction * cfg.n_train))
        records = []
        for i, base in enumerate(train_pool):
            rid = f'{base.id}-mn'
            if i < n_clean:
                records.append(_clean_copy(base, rid, name))
            else:
                noise_type = cfg.noise_types[(i - n_clean) % len(cfg.noise_types)]
                records.append(_degrade(base, rid, name, noise_type, cfg.train_snr, cfg.seed))
        splits[name] = records

    dev_pool = synth_pool('dev', cfg.n_dev)
    splits[SPLIT_DEV] = [
        _degrade(base, f'{base.id}-dv', SPLIT_DEV, cfg.noise_types[i % len(cfg.noise_types)],
                 cfg.train_snr, cfg.seed)
        for i, base in enumerate(dev_pool)
    ]

    test_pool = synth_pool('tst', cfg.n_test)
    splits[SPLIT_TEST_CLEAN] = [_clean_copy(base, base.id, SPLIT_TEST_CLEAN) for base in test_pool]
    for noise_type in cfg.noise_types:
        name = noisy_split(noise_type)
        splits[name] = [_degrade(base, f'{base.id}-{noise_type}', name, noise_type, cfg.test_snr, cfg.seed)
                        for base in test_pool]

    corpus = Corpus(cfg, frontend, inventory, splits)
    logger.info(f"Built corpus: {corpus.counts()}")
    return corpus
