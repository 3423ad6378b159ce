"""
End-to-end experiment harness.

Wires front end, spectral subtraction, uncertainty estimation and weighted
decoding into the three experiment protocols: the five-system WER
comparison, the oracle (Th, K) grid and the regressor topology x feature
grid.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from uwdecode.corpus import (
    CONDITION_CLEAN,
    CONDITION_MULTI,
    Corpus,
    CorpusConfig,
    UtteranceRecord,
    training_split,
)
from uwdecode.decoder import (
    LOG_HALF,
    SILENCE,
    DecodeTask,
    LanguageModel,
    Lexicon,
    WerResult,
    pseudo_log_likelihood,
    viterbi_decode,
    wer,
)
from uwdecode.enhancement import SSConfig, enhance_utterance
from uwdecode.errors import ConfigError, DimMismatch, IoError, MissingDependency
from uwdecode.frontend import (
    NOISE_LEADING,
    NOISE_ORACLE,
    Features,
    FrontendConfig,
    NoiseEstimate,
    analyze,
    context_window,
    estimate_noise,
    estimate_noise_oracle,
    extract_features,
)
from uwdecode.neuralnet import (
    FEATURE_VARIANTS,
    TOPOLOGIES,
    FeatureAssembly,
    FrameData,
    MLPModel,
    TrainConfig,
    acoustic_posteriors,
    assemble_input,
    classifier_spec,
    load_model,
    one_hot,
    predict_uncertainty,
    regressor_spec,
    save_model,
    state_priors,
    train,
    write_training_curve,
)
from uwdecode.report import AVG_GROUP, KIND_MSE, KIND_ORACLE, KIND_WER, ResultTable
from uwdecode.uncertainty import (
    ModelUncertaintyConfig,
    UncertaintyTrack,
    WeightingParams,
    delta_uncertainty,
    model_uncertainty,
    model_uv_scalar,
    mse_uncertainty,
    uncertainty_weight,
)

logger = logging.getLogger(__name__)

SYSTEM_BASELINE = 'baseline'
SYSTEM_SS = 'baseline+SS'
SYSTEM_MODEL = 'UW+UV_model'
SYSTEM_DNN = 'UW+UV_DNN'
SYSTEM_ORACLE = 'UW+UV_oracle'
SYSTEMS = (SYSTEM_BASELINE, SYSTEM_SS, SYSTEM_MODEL, SYSTEM_DNN, SYSTEM_ORACLE)
WEIGHTED_SYSTEMS = (SYSTEM_MODEL, SYSTEM_DNN, SYSTEM_ORACLE)

FRONTEND_RAW = 'raw'
FRONTEND_SS = 'ss'
FRONTEND_KINDS = (FRONTEND_RAW, FRONTEND_SS)

UV_STATIC = 'static'
UV_ALL_STREAMS = 'all'


def frontend_kind(system: str) -> str:
    return FRONTEND_RAW if system == SYSTEM_BASELINE else FRONTEND_SS


@dataclass(frozen=True)
class DecoderConfig:
    lm_scale: float = 1.0
    lm_add_k: float = 0.5
    self_loop_logp: float = LOG_HALF
    forward_logp: float = LOG_HALF

    def validate(self) -> 'DecoderConfig':
        if not self.lm_scale > 0:
            raise ConfigError(f"lm_scale must be > 0, got {self.lm_scale}")
        if not self.lm_add_k > 0:
            raise ConfigError(f"lm_add_k must be > 0, got {self.lm_add_k}")
        if not math.isclose(math.exp(self.self_loop_logp) + math.exp(self.forward_logp), 1.0, abs_tol=1e-9):
            raise ConfigError("Self-loop and forward probabilities must sum to 1")
        return self


@dataclass(frozen=True)
class AcousticConfig:
    """Senone classifier: hidden sizes, +-context frames and its optimizer"""
    hidden: Tuple[int, ...] = (64, 64)
    context: int = 2
    epochs: int = 20
    learning_rate: float = 0.05
    batch_size: int = 64
    seed: int = 0

    def train_config(self, show_progress: bool = False) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, batch_size=self.batch_size,
                           seed=self.seed, show_progress=show_progress).validate()


@dataclass(frozen=True)
class RegressorConfig:
    topology: str = 'C1'
    feature: str = 'f2'
    epochs: int = 20
    learning_rate: float = 0.01
    batch_size: int = 32
    seed: int = 0

    def train_config(self, show_progress: bool = False) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, batch_size=self.batch_size,
                           seed=self.seed, show_progress=show_progress).validate()

    def validate(self) -> 'RegressorConfig':
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"Unknown topology '{self.topology}'")
        if self.feature not in FEATURE_VARIANTS:
            raise ConfigError(f"Unknown feature variant '{self.feature}'")
        return self


@dataclass(frozen=True)
class ExperimentConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    enhancement: SSConfig = field(default_factory=SSConfig)
    uncertainty: ModelUncertaintyConfig = field(default_factory=ModelUncertaintyConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    regressor: RegressorConfig = field(default_factory=RegressorConfig)
    systems: Tuple[str, ...] = SYSTEMS
    noise_mode: str = NOISE_LEADING
    n_lead: int = 10
    uv_half_width: int = 5
    model_uv_streams: str = UV_STATIC
    th_model: float = 0.2
    k_model: float = 8.0
    th_dnn: float = 4.0
    k_dnn: float = 5.0
    th_oracle: float = 8.0
    k_oracle: float = 5.0
    th_grid: Tuple[float, ...] = tuple(float(th) for th in range(1, 19))
    k_grid: Tuple[float, ...] = (1.0, 2.0, 4.0, 5.0, 8.0, 12.0, 16.0)
    grid_condition: str = CONDITION_CLEAN
    topology_grid: Tuple[str, ...] = tuple(TOPOLOGIES)
    feature_grid: Tuple[str, ...] = FEATURE_VARIANTS
    out_dir: str = 'runs/desk'
    jobs: int = 1
    show_progress: bool = False

    def weighting(self, system: str) -> WeightingParams:
        params = {
            SYSTEM_MODEL: (self.th_model, self.k_model),
            SYSTEM_DNN: (self.th_dnn, self.k_dnn),
            SYSTEM_ORACLE: (self.th_oracle, self.k_oracle),
        }
        if system not in params:
            raise ConfigError(f"System '{system}' does not weight its acoustic scores")
        return WeightingParams(*params[system]).validate()

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        return replace(self, corpus=replace(self.corpus, seed=seed),
                       acoustic=replace(self.acoustic, seed=seed),
                       regressor=replace(self.regressor, seed=seed))

    def validate(self) -> 'ExperimentConfig':
        self.frontend.validate()
        self.enhancement.validate()
        self.uncertainty.validate()
        self.decoder.validate()
        self.corpus.validate()
        self.regressor.validate()
        unknown = set(self.systems) - set(SYSTEMS)
        if unknown or not self.systems:
            raise ConfigError(f"systems must be a non-empty subset of {SYSTEMS}, got {self.systems}")
        if self.noise_mode not in (NOISE_LEADING, NOISE_ORACLE):
            raise ConfigError(f"noise_mode must be '{NOISE_LEADING}' or '{NOISE_ORACLE}'")
        if self.uv_half_width < 0:
            raise ConfigError("uv_half_width must be >= 0")
        if self.model_uv_streams not in (UV_STATIC, UV_ALL_STREAMS):
            raise ConfigError(f"model_uv_streams must be '{UV_STATIC}' or '{UV_ALL_STREAMS}'")
        for system in WEIGHTED_SYSTEMS:
            self.weighting(system)
        if not self.th_grid or not self.k_grid:
            raise ConfigError("Th and K grids must be non-empty")
        for th in self.th_grid:
            WeightingParams(th, 1.0).validate()
        for k in self.k_grid:
            WeightingParams(1.0, k).validate()
        if not set(self.topology_grid) <= set(TOPOLOGIES) or not self.topology_grid:
            raise ConfigError(f"topology_grid must be a non-empty subset of {sorted(TOPOLOGIES)}")
        if not set(self.feature_grid) <= set(FEATURE_VARIANTS) or not self.feature_grid:
            raise ConfigError(f"feature_grid must be a non-empty subset of {FEATURE_VARIANTS}")
        if self.grid_condition not in self.corpus.training_conditions:
            raise ConfigError(f"grid_condition '{self.grid_condition}' is not a training condition")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self


# --- per-utterance analysis -------------------------------------------------

@dataclass
class UtteranceAnalysis:
    """Front-end products of one record, computed once and shared by every system"""
    record_id: str
    split: str
    transcript: Tuple[str, ...]
    alignment: np.ndarray
    noise: NoiseEstimate
    noisy_mel: np.ndarray
    enhanced_mel: np.ndarray
    raw: Features
    enhanced: Features
    clean: Optional[Features] = None

    def features(self, kind: str) -> Features:
        return self.raw if kind == FRONTEND_RAW else self.enhanced


def analyze_record(record: UtteranceRecord, cfg: ExperimentConfig) -> UtteranceAnalysis:
    fe = cfg.frontend
    noisy_mel = analyze(record.observed, fe)
    if len(record.alignment) != noisy_mel.shape[0]:
        raise DimMismatch(f"{record.id}: {len(record.alignment)} aligned frames, {noisy_mel.shape[0]} analyzed")

    if cfg.noise_mode == NOISE_ORACLE:
        if record.noise is not None:
            noise = estimate_noise_oracle(analyze(record.noise, fe))
        else:
            noise = NoiseEstimate(np.zeros(fe.n_mel), NOISE_ORACLE)
    else:
        noise = estimate_noise(noisy_mel, cfg.n_lead)

    enhanced_mel = enhance_utterance(noisy_mel, noise, cfg.enhancement, fe.energy_floor)
    clean = extract_features(analyze(record.clean, fe), fe) if record.clean is not None else None
    return UtteranceAnalysis(
        record_id=record.id,
        split=record.split,
        transcript=record.transcript,
        alignment=record.alignment,
        noise=noise,
        noisy_mel=noisy_mel,
        enhanced_mel=enhanced_mel,
        raw=extract_features(noisy_mel, fe),
        enhanced=extract_features(enhanced_mel, fe),
        clean=clean,
    )


def acoustic_input(features: Features, context: int) -> np.ndarray:
    return context_window(features.stacked(), context)


def model_uv(analysis: UtteranceAnalysis, cfg: ExperimentConfig) -> np.ndarray:
    """Per-frame analytic UV: filter variances averaged over the static (or all) streams"""
    var = model_uncertainty(analysis.noisy_mel, analysis.noise, cfg.uncertainty)
    if cfg.model_uv_streams == UV_ALL_STREAMS:
        dvar, ddvar = delta_uncertainty(var, cfg.frontend.delta_order)
        var = np.hstack([var, dvar, ddvar])
    return model_uv_scalar(var)


def regressor_frame_data(analysis: UtteranceAnalysis, assembly: FeatureAssembly,
                         cfg: ExperimentConfig) -> FrameData:
    """Energy comes from the same stream as the statics (noisy for f1, enhanced otherwise)"""
    if assembly.variant == 'f1':
        return FrameData(log_norm_energy=analysis.raw.log_norm_energy, noisy_static=analysis.raw.static)
    data = FrameData(log_norm_energy=analysis.enhanced.log_norm_energy,
                     enhanced_static=analysis.enhanced.static)
    if assembly.variant == 'f2':
        data.model_uv = model_uv(analysis, cfg)
    return data


def oracle_uv(analysis: UtteranceAnalysis) -> np.ndarray:
    if analysis.clean is None:
        raise MissingDependency(f"{analysis.record_id} has no clean twin for the oracle uncertainty")
    return mse_uncertainty(analysis.clean.static, analysis.enhanced.static)


# --- models -----------------------------------------------------------------

@dataclass
class AcousticModel:
    condition: str
    kind: str
    model: MLPModel
    priors: np.ndarray

    def pseudo_loglik(self, analysis: UtteranceAnalysis, context: int) -> np.ndarray:
        posteriors = acoustic_posteriors(self.model, acoustic_input(analysis.features(self.kind), context))
        return pseudo_log_likelihood(posteriors, self.priors)


@dataclass
class Regressor:
    model: MLPModel
    assembly: FeatureAssembly
    topology: str = ''

    def predict(self, analysis: UtteranceAnalysis, cfg: ExperimentConfig) -> np.ndarray:
        inputs = assemble_input(self.assembly, regressor_frame_data(analysis, self.assembly, cfg))
        return np.atleast_1d(predict_uncertainty(self.model, inputs))


@dataclass
class ModelBundle:
    acoustic: Dict[Tuple[str, str], AcousticModel] = field(default_factory=dict)
    regressor: Optional[Regressor] = None

    def acoustic_for(self, condition: str, kind: str) -> AcousticModel:
        if (condition, kind) not in self.acoustic:
            raise MissingDependency(f"No acoustic model for condition '{condition}', front end '{kind}'")
        return self.acoustic[(condition, kind)]


def train_acoustic(cfg: ExperimentConfig, analyses: Sequence[UtteranceAnalysis], n_states: int,
                   condition: str, kind: str) -> AcousticModel:
    """Senone classifier on the given front end's features, priors from the same alignments"""
    ctx = cfg.acoustic.context
    inputs = np.vstack([acoustic_input(a.features(kind), ctx) for a in analyses])
    labels = np.concatenate([a.alignment for a in analyses])
    spec = classifier_spec(inputs.shape[1], cfg.acoustic.hidden, n_states, seed=cfg.acoustic.seed)
    logger.info(f"Training acoustic model ({condition}, {kind}) on {inputs.shape[0]} frames")
    model = train(spec, inputs, one_hot(labels, n_states), cfg.acoustic.train_config(cfg.show_progress))
    priors = state_priors([a.alignment for a in analyses], n_states)
    return AcousticModel(condition=condition, kind=kind, model=model, priors=priors)


def regressor_dataset(analyses: Sequence[UtteranceAnalysis], assembly: FeatureAssembly,
                      cfg: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Assembled inputs and MSE-uncertainty targets against each record's clean twin"""
    inputs = [assemble_input(assembly, regressor_frame_data(a, assembly, cfg)) for a in analyses]
    targets = [oracle_uv(a) for a in analyses]
    return np.vstack(inputs), np.concatenate(targets)


def train_regressor(cfg: ExperimentConfig, analyses: Sequence[UtteranceAnalysis],
                    topology: str, feature: str) -> Regressor:
    assembly = FeatureAssembly(feature, cfg.frontend.n_mel)
    inputs, targets = regressor_dataset(analyses, assembly, cfg)
    spec = regressor_spec(topology, assembly.input_dim, seed=cfg.regressor.seed)
    logger.info(f"Training regressor {topology}/{feature} on {inputs.shape[0]} frames")
    model = train(spec, inputs, targets, cfg.regressor.train_config(cfg.show_progress))
    return Regressor(model=model, assembly=assembly, topology=topology)


class ModelStore:
    """Model files under <out>/models: classifiers with their priors, regressors with training curves"""

    def __init__(self, root: str):
        self.root = root

    def _path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def _ensure(self):
        try:
            os.makedirs(self.root, exist_ok=True)
        except OSError as e:
            raise IoError(f"Could not create {self.root}: {e}") from e

    def save_acoustic(self, am: AcousticModel):
        self._ensure()
        save_model(am.model, self._path(f'acoustic-{am.condition}-{am.kind}.mlp'))
        write_training_curve(am.model, self._path(f'acoustic-{am.condition}-{am.kind}-curve.csv'))
        pd.DataFrame({'state': np.arange(len(am.priors)), 'prior': am.priors}).to_csv(
            self._path(f'priors-{am.condition}-{am.kind}.csv'), index=False, float_format='%.17g')

    def load_acoustic(self, condition: str, kind: str) -> AcousticModel:
        model_path = self._path(f'acoustic-{condition}-{kind}.mlp')
        priors_path = self._path(f'priors-{condition}-{kind}.csv')
        if not (os.path.exists(model_path) and os.path.exists(priors_path)):
            raise MissingDependency(f"No trained acoustic model for ({condition}, {kind}); run 'train acoustic'")
        priors = pd.read_csv(priors_path).sort_values('state')['prior'].to_numpy(dtype=np.float64)
        return AcousticModel(condition=condition, kind=kind, model=load_model(model_path), priors=priors)

    def save_regressor(self, reg: Regressor):
        self._ensure()
        stem = f'regressor-{reg.topology}-{reg.assembly.variant}'
        save_model(reg.model, self._path(f'{stem}.mlp'))
        write_training_curve(reg.model, self._path(f'{stem}-curve.csv'))

    def load_regressor(self, topology: str, feature: str, n_mel: int) -> Regressor:
        path = self._path(f'regressor-{topology}-{feature}.mlp')
        if not os.path.exists(path):
            raise MissingDependency(f"No trained regressor {topology}/{feature}; run 'train regressor'")
        return Regressor(model=load_model(path), assembly=FeatureAssembly(feature, n_mel), topology=topology)

    def load_bundle(self, cfg: ExperimentConfig, conditions: Iterable[str], systems: Iterable[str],
                    best_cell: Optional[Tuple[str, str]] = None) -> ModelBundle:
        systems = list(systems)
        bundle = ModelBundle()
        kinds = sorted({frontend_kind(system) for system in systems})
        for condition in conditions:
            for kind in kinds:
                bundle.acoustic[(condition, kind)] = self.load_acoustic(condition, kind)
        if SYSTEM_DNN in systems:
            topology, feature = best_cell or (cfg.regressor.topology, cfg.regressor.feature)
            bundle.regressor = self.load_regressor(topology, feature, cfg.frontend.n_mel)
        return bundle


def estimate_lm(corpus: Corpus, condition: str, cfg: ExperimentConfig) -> LanguageModel:
    transcripts = [rec.transcript for rec in corpus.training_split(condition)]
    return LanguageModel.estimate(transcripts, corpus.lexicon.words, add_k=cfg.decoder.lm_add_k,
                                  scale=cfg.decoder.lm_scale)


def decoding_lexicon(corpus: Corpus, cfg: ExperimentConfig) -> Lexicon:
    return Lexicon(corpus.lexicon.word_states, self_loop_logp=cfg.decoder.self_loop_logp,
                   forward_logp=cfg.decoder.forward_logp)


# --- job pool ---------------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker(state: dict):
    _WORKER_STATE.clear()
    _WORKER_STATE.update(state)


def run_jobs(fn: Callable, items: Sequence[Tuple[Hashable, object]], state: dict, jobs: int = 1,
             desc: str = 'jobs', show_progress: bool = False) -> Dict[Hashable, object]:
    """
    Apply fn to every (key, item) and return {key: result}.

    fn must be a module-level function; it sees `state` through the worker
    globals. Results are keyed, so they do not depend on completion order.
    """
    results = {}
    if jobs <= 1:
        _init_worker(state)
        for key, item in tqdm(items, desc=desc, leave=False, disable=not show_progress):
            results[key] = fn(item)
        return results

    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(state,)) as pool:
        futures = {pool.submit(fn, item): key for key, item in items}
        for future in tqdm(as_completed(futures), total=len(futures), desc=desc, leave=False,
                           disable=not show_progress):
            results[futures[future]] = future.result()
    return results


def _analyze_job(record: UtteranceRecord) -> UtteranceAnalysis:
    return analyze_record(record, _WORKER_STATE['cfg'])


def analyze_records(records: Sequence[UtteranceRecord], cfg: ExperimentConfig) -> List[UtteranceAnalysis]:
    results = run_jobs(_analyze_job, [(rec.id, rec) for rec in records], {'cfg': cfg}, cfg.jobs,
                       desc='analyze', show_progress=cfg.show_progress)
    return [results[rec.id] for rec in records]


# --- decoding ---------------------------------------------------------------

@dataclass
class DecodeOutcome:
    record_id: str
    test_group: str
    training: str
    system: str
    reference: Tuple[str, ...]
    hypothesis: Tuple[str, ...]
    score: float
    result: WerResult
    track: Optional[UncertaintyTrack] = None


def uncertainty_track(system: str, analysis: UtteranceAnalysis, cfg: ExperimentConfig,
                      regressor: Optional[Regressor] = None) -> Optional[UncertaintyTrack]:
    """UV source per system, windowed and mapped to weights; None for unweighted systems"""
    if system not in WEIGHTED_SYSTEMS:
        return None
    if system == SYSTEM_MODEL:
        uv = model_uv(analysis, cfg)
    elif system == SYSTEM_DNN:
        if regressor is None:
            raise MissingDependency("UW+UV_DNN needs a trained regressor")
        uv = regressor.predict(analysis, cfg)
    else:
        uv = oracle_uv(analysis)
    return UncertaintyTrack.from_uv(uv, cfg.uv_half_width, cfg.weighting(system))


def decode_utterance(analysis: UtteranceAnalysis, system: str, training: str, cfg: ExperimentConfig,
                     acoustic: AcousticModel, lexicon: Lexicon, lm: LanguageModel,
                     regressor: Optional[Regressor] = None) -> DecodeOutcome:
    track = uncertainty_track(system, analysis, cfg, regressor)
    loglik = acoustic.pseudo_loglik(analysis, cfg.acoustic.context)
    task = DecodeTask(loglik, lexicon, lm, weights=track.uw if track is not None else None)
    hyp = viterbi_decode(task)
    result = wer(analysis.transcript, hyp.words, ignore=(SILENCE,))
    logger.debug(f"{analysis.record_id} [{training}/{system}] {hyp.text} ({result.wer_percent:.1f}%)")
    return DecodeOutcome(record_id=analysis.record_id, test_group=analysis.split, training=training,
                         system=system, reference=analysis.transcript, hypothesis=hyp.words,
                         score=hyp.score, result=result, track=track)


def _decode_job(item: Tuple[UtteranceAnalysis, str, str]) -> DecodeOutcome:
    analysis, system, training = item
    state = _WORKER_STATE
    acoustic = state['models'].acoustic_for(training, frontend_kind(system))
    return decode_utterance(analysis, system, training, state['cfg'], acoustic, state['lexicon'],
                            state['lms'][training], state['models'].regressor)


def wer_rows(outcomes: Iterable[DecodeOutcome]) -> List[dict]:
    """Per (training, test group, system) corpus-level WER, plus an AVG group averaging the group WERs"""
    totals: Dict[Tuple[str, str, str], List[int]] = {}
    for out in outcomes:
        key = (out.training, out.test_group, out.system)
        errors, words = totals.setdefault(key, [0, 0])
        totals[key] = [errors + out.result.errors, words + out.result.ref_len]

    rows = []
    per_system: Dict[Tuple[str, str], List[float]] = {}
    for (training, group, system), (errors, words) in sorted(totals.items()):
        value = 100.0 * errors / words
        rows.append({'training': training, 'test_group': group, 'system': system, 'wer': value})
        per_system.setdefault((training, system), []).append(value)
    for (training, system), values in sorted(per_system.items()):
        rows.append({'training': training, 'test_group': AVG_GROUP, 'system': system,
                     'wer': float(np.mean(values))})
    return rows


def run_system(cfg: ExperimentConfig, system: str, corpus: Corpus, models: ModelBundle,
               conditions: Optional[Sequence[str]] = None,
               analyses: Optional[Sequence[UtteranceAnalysis]] = None) -> Tuple[List[dict], List[DecodeOutcome]]:
    """
    Decode every test group with one system under each training condition.

    Returns:
        (rows, outcomes) - comparison rows keyed by (training, test_group, system)
        and the per-utterance decode outcomes
    """
    if system not in SYSTEMS:
        raise ConfigError(f"Unknown system '{system}', expected one of {SYSTEMS}")
    if system == SYSTEM_DNN and models.regressor is None:
        raise MissingDependency("UW+UV_DNN needs a trained regressor")
    conditions = list(conditions or cfg.corpus.training_conditions)
    if analyses is None:
        records = [rec for group in corpus.test_groups for rec in corpus.split(group)]
        analyses = analyze_records(records, cfg)

    lexicon = decoding_lexicon(corpus, cfg)
    state = {'cfg': cfg, 'models': models, 'lexicon': lexicon,
             'lms': {c: estimate_lm(corpus, c, cfg) for c in conditions}}
    items = [((training, system, a.record_id), (a, system, training)) for training in conditions for a in analyses]
    results = run_jobs(_decode_job, items, state, cfg.jobs, desc=f'decode {system}',
                       show_progress=cfg.show_progress)
    outcomes = [results[key] for key, _ in items]
    rows = wer_rows(outcomes)
    for row in rows:
        if row['test_group'] == AVG_GROUP:
            logger.info(f"{row['training']}/{system}: average WER {row['wer']:.2f}%")
    return rows, outcomes


def run_systems(cfg: ExperimentConfig, corpus: Corpus, models: ModelBundle,
                systems: Optional[Sequence[str]] = None) -> Tuple[ResultTable, List[DecodeOutcome]]:
    """WER comparison over the requested systems, sharing one front-end pass"""
    systems = list(systems or cfg.systems)
    records = [rec for group in corpus.test_groups for rec in corpus.split(group)]
    analyses = analyze_records(records, cfg)
    outcomes = []
    for system in systems:
        _, system_outcomes = run_system(cfg, system, corpus, models, analyses=analyses)
        outcomes.extend(system_outcomes)
    return ResultTable.from_rows(KIND_WER, wer_rows(outcomes)), outcomes


def outcomes_frame(outcomes: Iterable[DecodeOutcome]) -> pd.DataFrame:
    """One row per decoded utterance: ids, strings, score and S/D/I counts"""
    frame = pd.DataFrame([{
        'utterance_id': out.record_id,
        'training': out.training,
        'test_group': out.test_group,
        'system': out.system,
        'reference': ' '.join(out.reference),
        'hypothesis': ' '.join(out.hypothesis),
        'score': out.score,
        'substitutions': out.result.substitutions,
        'deletions': out.result.deletions,
        'insertions': out.result.insertions,
        'wer': out.result.wer_percent,
    } for out in outcomes])
    return frame.sort_values(['training', 'system', 'test_group', 'utterance_id'],
                             kind='mergesort').reset_index(drop=True)


# --- oracle grid ------------------------------------------------------------

@dataclass
class OracleGridResult:
    table: ResultTable
    argmin: Dict[str, Tuple[float, float, float]]
    baseline_ss: Dict[str, float]

    def surface_is_constant(self, group: str = AVG_GROUP) -> bool:
        frame = self.table.frame
        values = frame.loc[frame['group'] == group, 'wer']
        return bool(values.nunique() <= 1)


@dataclass
class _GridItem:
    group: str
    loglik: np.ndarray
    uv_window: np.ndarray
    reference: Tuple[str, ...]


def _grid_cell_job(cell: Tuple[float, float]) -> Dict[str, Tuple[int, int]]:
    """Decode every grid item at one (Th, K); returns {group: (errors, words)}"""
    th, k = cell
    state = _WORKER_STATE
    params = WeightingParams(th, k)
    totals: Dict[str, Tuple[int, int]] = {}
    for item in state['items']:
        weights = uncertainty_weight(item.uv_window, params)
        hyp = viterbi_decode(DecodeTask(item.loglik, state['lexicon'], state['lm'], weights=weights))
        result = wer(item.reference, hyp.words, ignore=(SILENCE,))
        errors, words = totals.get(item.group, (0, 0))
        totals[item.group] = (errors + result.errors, words + result.ref_len)
    return totals


def run_oracle_grid(cfg: ExperimentConfig, corpus: Corpus, models: ModelBundle,
                    condition: Optional[str] = None,
                    analyses: Optional[Sequence[UtteranceAnalysis]] = None) -> OracleGridResult:
    """
    UW+UV_oracle WER over every (Th, K) of the grids on the noisy test groups.

    A Th=inf cell (UW = 1 everywhere) is always evaluated; it reproduces
    baseline+SS exactly, so the argmin can never be worse than baseline+SS.
    """
    condition = condition or cfg.grid_condition
    acoustic = models.acoustic_for(condition, FRONTEND_SS)
    groups = corpus.noisy_test_groups
    if not groups:
        raise MissingDependency("Oracle grid needs at least one noisy test group")
    if analyses is None:
        analyses = analyze_records([rec for g in groups for rec in corpus.split(g)], cfg)

    items = [_GridItem(group=a.split, loglik=acoustic.pseudo_loglik(a, cfg.acoustic.context),
                       uv_window=UncertaintyTrack.from_uv(oracle_uv(a), cfg.uv_half_width).uv_window,
                       reference=a.transcript)
             for a in analyses if a.split in groups]
    state = {'items': items, 'lexicon': decoding_lexicon(corpus, cfg), 'lm': estimate_lm(corpus, condition, cfg)}

    cells = [(float(th), float(k)) for th in cfg.th_grid for k in cfg.k_grid]
    cells.append((math.inf, 1.0))
    results = run_jobs(_grid_cell_job, [(cell, cell) for cell in cells], state, cfg.jobs,
                       desc='oracle grid', show_progress=cfg.show_progress)

    rows = []
    for (th, k), totals in results.items():
        group_wers = {g: 100.0 * e / w for g, (e, w) in totals.items()}
        for g, value in group_wers.items():
            rows.append({'th': th, 'k': k, 'group': g, 'wer': value})
        rows.append({'th': th, 'k': k, 'group': AVG_GROUP, 'wer': float(np.mean(list(group_wers.values())))})
    table = ResultTable.from_rows(KIND_ORACLE, rows)

    frame = table.frame
    argmin, baseline = {}, {}
    for g in groups + [AVG_GROUP]:
        sub = frame[frame['group'] == g]
        best = sub.loc[sub['wer'].idxmin()]
        argmin[g] = (float(best['th']), float(best['k']), float(best['wer']))
        baseline[g] = float(sub.loc[sub['th'] == math.inf, 'wer'].iloc[0])
        logger.info(f"Oracle grid {g}: argmin Th={best['th']:g} K={best['k']:g} "
                    f"WER {best['wer']:.2f}% (baseline+SS {baseline[g]:.2f}%)")
    return OracleGridResult(table=table, argmin=argmin, baseline_ss=baseline)


# --- regressor grid ---------------------------------------------------------

@dataclass
class RegressorGridResult:
    table: ResultTable
    regressors: Dict[Tuple[str, str], Regressor]

    @property
    def best_cell(self) -> Tuple[str, str]:
        row = self.table.frame[self.table.frame['best']].iloc[0]
        return row['topology'], row['feature']


def _regressor_cell_job(cell: Tuple[str, str]) -> Regressor:
    topology, feature = cell
    state = _WORKER_STATE
    cfg = state['cfg']
    inputs, targets = state['datasets'][feature]
    spec = regressor_spec(topology, inputs.shape[1], seed=cfg.regressor.seed)
    model = train(spec, inputs, targets, cfg.regressor.train_config())
    return Regressor(model=model, assembly=FeatureAssembly(feature, cfg.frontend.n_mel), topology=topology)


def run_regressor_grid(cfg: ExperimentConfig, corpus: Corpus,
                       analyses: Optional[Sequence[UtteranceAnalysis]] = None) -> RegressorGridResult:
    """Train one regressor per (topology, feature) on the multi-noise split and mark the lowest held-out MSE"""
    if analyses is None:
        analyses = analyze_records(corpus.split(training_split(CONDITION_MULTI)), cfg)
    datasets = {feature: regressor_dataset(analyses, FeatureAssembly(feature, cfg.frontend.n_mel), cfg)
                for feature in cfg.feature_grid}
    cells = [(topology, feature) for topology in cfg.topology_grid for feature in cfg.feature_grid]
    regressors = run_jobs(_regressor_cell_job, [(cell, cell) for cell in cells],
                          {'cfg': cfg, 'datasets': datasets}, cfg.jobs, desc='regressor grid',
                          show_progress=cfg.show_progress)

    rows = []
    for (topology, feature), reg in regressors.items():
        train_l, val_l, test_l = reg.model.history.final()
        rows.append({'topology': topology, 'feature': feature, 'train_mse': train_l,
                     'val_mse': val_l, 'test_mse': test_l, 'best': False})
    table = ResultTable.from_rows(KIND_MSE, rows)
    best_idx = table.frame['test_mse'].idxmin()
    table.frame['best'] = table.frame.index == best_idx
    best = table.frame.loc[best_idx]
    logger.info(f"Lowest held-out MSE: {best['topology']}/{best['feature']} = {best['test_mse']:.4f}")
    return RegressorGridResult(table=table, regressors=regressors)
