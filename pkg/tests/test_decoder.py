"""Tests for Viterbi decoding, the brute-force oracle and WER scoring"""
import math

import numpy as np
import pytest

from uwdecode.decoder import (
    DecodeTask,
    LanguageModel,
    Lexicon,
    alignment_report,
    brute_force_decode,
    count_paths,
    path_score,
    pseudo_log_likelihood,
    viterbi_decode,
    wer,
)
from uwdecode.errors import (
    ConfigError,
    DimMismatch,
    EmptyInput,
    EmptyReference,
    NoValidPath,
    TooLarge,
    UnknownWord,
)


def _random_lm(vocabulary, rng):
    n = len(vocabulary)
    probs = rng.dirichlet(np.ones(n + 1), size=n + 1)
    probs[0, n] = 0.0
    probs[0] /= probs[0].sum()
    return LanguageModel.from_probs(vocabulary, probs, scale=float(rng.uniform(0.5, 2.0)))


def _random_task(rng, integer_scores=False):
    n_words = int(rng.integers(1, 5))
    names = ['w%d' % i for i in range(n_words)]
    lexicon = Lexicon.from_words({w: int(rng.integers(1, 4)) for w in names})
    n_frames = int(rng.integers(1, 16))
    if integer_scores:
        loglik = rng.integers(-2, 1, size=(n_frames, lexicon.n_states)).astype(float)
        weights = rng.choice([0.5, 1.0], n_frames) if rng.random() < 0.5 else None
        return DecodeTask(loglik, lexicon, LanguageModel.uniform(lexicon.words), weights)
    loglik = rng.normal(scale=2.0, size=(n_frames, lexicon.n_states))
    weights = rng.uniform(0, 1, n_frames) if rng.random() < 0.7 else None
    return DecodeTask(loglik, lexicon, _random_lm(lexicon.words, rng), weights)


def _compare_with_brute_force(rng, n_tasks, integer_scores=False, max_paths=20000):
    """Decode tasks within the path guard both ways; returns the frame counts compared"""
    compared = []
    while len(compared) < n_tasks:
        task = _random_task(rng, integer_scores)
        if count_paths(task) > max_paths:
            continue
        try:
            expected = brute_force_decode(task, max_paths=max_paths)
        except NoValidPath:
            with pytest.raises(NoValidPath):
                viterbi_decode(task)
            continue
        got = viterbi_decode(task)
        assert got.words == expected.words
        if integer_scores:
            assert got.score == expected.score
        else:
            assert got.score == pytest.approx(expected.score, abs=1e-9)
        compared.append(task.n_frames)
    return compared


class TestViterbiAgainstBruteForce:

    @pytest.mark.parametrize('seed', range(4))
    def test_random_tasks(self, seed):
        frames = _compare_with_brute_force(np.random.default_rng(seed), 60)
        assert len(frames) == 60
        assert max(frames) >= 10

    @pytest.mark.parametrize('seed', range(4))
    def test_tied_integer_tasks(self, seed):
        frames = _compare_with_brute_force(np.random.default_rng(50 + seed), 60, integer_scores=True)
        assert len(frames) == 60

    def test_tie_between_word_strings_takes_smallest(self):
        lexicon = Lexicon.from_words({'a': 1, 'b': 1})
        probs = np.array([[0.5, 0.5, 0.0],
                          [1 / 3, 1 / 3, 1 / 3],
                          [1 / 3, 1 / 3, 1 / 3]])
        task = DecodeTask(np.array([[0.0, math.log(3.0)], [0.0, -50.0]]), lexicon,
                          LanguageModel.from_probs(lexicon.words, probs))
        single = path_score(task, [('a', [2])])
        assert path_score(task, [('b', [1]), ('a', [1])]) == pytest.approx(single, abs=1e-12)
        expected = brute_force_decode(task)
        got = viterbi_decode(task)
        assert expected.words == ('a',)
        assert got.words == ('a',)
        assert got.score == expected.score == pytest.approx(single, abs=1e-12)
        assert got.segments == [('a', 0, 2)]

    def test_segments_cover_all_frames(self, tiny_lexicon, tiny_lm, rng):
        task = DecodeTask(rng.normal(size=(9, tiny_lexicon.n_states)), tiny_lexicon, tiny_lm)
        hyp = viterbi_decode(task)
        assert hyp.segments[0][1] == 0
        assert hyp.segments[-1][2] == 9
        for (_, _, end), (_, start, _) in zip(hyp.segments, hyp.segments[1:]):
            assert end == start
        assert tuple(w for w, _, _ in hyp.segments) == hyp.words

    def test_exact_tie_prefers_first_word(self):
        lexicon = Lexicon.from_words({'a': 1, 'b': 1})
        task = DecodeTask(np.zeros((1, 2)), lexicon, LanguageModel.uniform(lexicon.words))
        assert viterbi_decode(task).words == ('a',)
        assert brute_force_decode(task).words == ('a',)


class TestWeighting:

    def test_unit_weights_match_unweighted_rule(self, tiny_lexicon, tiny_lm, rng):
        loglik = rng.normal(size=(12, tiny_lexicon.n_states))
        plain = viterbi_decode(DecodeTask(loglik, tiny_lexicon, tiny_lm))
        weighted = viterbi_decode(DecodeTask(loglik, tiny_lexicon, tiny_lm, np.ones(12)))
        assert weighted.words == plain.words
        assert weighted.score == plain.score
        assert weighted.segments == plain.segments

    def test_weighted_false_ignores_weights(self, tiny_lexicon, tiny_lm, rng):
        loglik = rng.normal(size=(6, tiny_lexicon.n_states))
        task = DecodeTask(loglik, tiny_lexicon, tiny_lm, rng.uniform(size=6))
        assert viterbi_decode(task, weighted=False).score == viterbi_decode(DecodeTask(loglik, tiny_lexicon, tiny_lm)).score

    def test_tiny_weights_leave_the_language_model_in_charge(self):
        lexicon = Lexicon.from_words({'a': 1, 'b': 1})
        probs = np.array([[0.1, 0.9, 0.0],
                          [0.1, 0.1, 0.8],
                          [0.1, 0.1, 0.8]])
        lm = LanguageModel.from_probs(lexicon.words, probs)
        loglik = np.tile([5.0, -5.0], (3, 1))
        assert viterbi_decode(DecodeTask(loglik, lexicon, lm)).words[0] == 'a'
        hyp = viterbi_decode(DecodeTask(loglik, lexicon, lm, np.full(3, 1e-6)))
        assert hyp.words == ('b',)
        assert brute_force_decode(DecodeTask(loglik, lexicon, lm, np.full(3, 1e-6))).words == ('b',)

    @pytest.mark.parametrize('gain', [0.5, 0.25])
    def test_joint_scaling_scales_scores(self, gain):
        rng = np.random.default_rng(11)
        names = {'a': 2, 'b': 1, 'c': 3}
        lexicon = Lexicon.from_words(names)
        scaled_lexicon = Lexicon.from_words(names, self_loop_logp=gain * math.log(0.5),
                                            forward_logp=gain * math.log(0.5))
        lm = _random_lm(lexicon.words, rng)
        scaled_lm = LanguageModel(lm.vocabulary, lm.logprobs, scale=gain * lm.scale)
        loglik = rng.normal(scale=2.0, size=(10, lexicon.n_states))
        weights = rng.uniform(0.2, 1.0, 10)
        task = DecodeTask(loglik, lexicon, lm, weights)
        scaled = DecodeTask(loglik, scaled_lexicon, scaled_lm, gain * weights)

        path = [('a', [2, 3]), ('c', [1, 2, 2])]
        assert path_score(scaled, path) == pytest.approx(gain * path_score(task, path), rel=1e-9)
        plain, shrunk = viterbi_decode(task), viterbi_decode(scaled)
        assert shrunk.words == plain.words
        assert shrunk.score == pytest.approx(gain * plain.score, rel=1e-9)

    def test_weights_outside_unit_interval(self, tiny_lexicon, tiny_lm):
        with pytest.raises(ConfigError):
            viterbi_decode(DecodeTask(np.zeros((2, 4)), tiny_lexicon, tiny_lm, np.array([0.5, 1.5])))

    def test_weight_track_length(self, tiny_lexicon, tiny_lm):
        with pytest.raises(DimMismatch):
            viterbi_decode(DecodeTask(np.zeros((2, 4)), tiny_lexicon, tiny_lm, np.ones(3)))


class TestPathScore:

    def _task(self):
        lexicon = Lexicon.from_words({'a': 1})
        lm = LanguageModel.from_probs(lexicon.words, np.array([[1.0, 0.0], [0.5, 0.5]]))
        return DecodeTask(np.array([[1.0], [2.0]]), lexicon, lm)

    def test_hand_value(self):
        assert path_score(self._task(), [('a', [2])]) == pytest.approx(3.0 + 3 * math.log(0.5))

    def test_viterbi_picks_single_word(self):
        hyp = viterbi_decode(self._task())
        assert hyp.words == ('a',)
        assert hyp.score == pytest.approx(path_score(self._task(), [('a', [2])]))
        assert path_score(self._task(), [('a', [1]), ('a', [1])]) < hyp.score

    def test_path_must_cover_all_frames(self):
        with pytest.raises(DimMismatch):
            path_score(self._task(), [('a', [1])])

    def test_unknown_word(self):
        with pytest.raises(UnknownWord):
            path_score(self._task(), [('z', [2])])


class TestTaskValidation:

    def test_empty(self, tiny_lexicon, tiny_lm):
        with pytest.raises(EmptyInput):
            viterbi_decode(DecodeTask(np.zeros((0, 4)), tiny_lexicon, tiny_lm))

    def test_state_count(self, tiny_lexicon, tiny_lm):
        with pytest.raises(DimMismatch):
            viterbi_decode(DecodeTask(np.zeros((3, 5)), tiny_lexicon, tiny_lm))

    def test_too_few_frames_for_any_word(self):
        lexicon = Lexicon.from_words({'long': 3})
        task = DecodeTask(np.zeros((2, 3)), lexicon, LanguageModel.uniform(lexicon.words))
        with pytest.raises(NoValidPath):
            viterbi_decode(task)

    def test_lexicon_ids_must_be_contiguous(self):
        with pytest.raises(ConfigError):
            Lexicon({'a': (0,), 'b': (2,)})

    def test_lm_rows_must_normalize(self):
        with pytest.raises(ConfigError):
            LanguageModel(('a',), np.log(np.array([[0.5, 0.0], [0.5, 0.4]])))


class TestCountPaths:

    def test_single_state_word(self):
        lexicon = Lexicon.from_words({'a': 1})
        task = DecodeTask(np.zeros((5, 1)), lexicon, LanguageModel.uniform(lexicon.words))
        assert count_paths(task) == 16

    def test_guard(self):
        lexicon = Lexicon.from_words({'a': 1})
        task = DecodeTask(np.zeros((5, 1)), lexicon, LanguageModel.uniform(lexicon.words))
        with pytest.raises(TooLarge):
            brute_force_decode(task, max_paths=10)


class TestLanguageModel:

    def test_estimate_with_smoothing(self):
        lm = LanguageModel.estimate([['a', 'b'], ['a']], ['a', 'b'], add_k=1.0)
        assert math.exp(lm.logp('<s>', 'a')) == pytest.approx(3.0 / 4.0)
        assert math.exp(lm.logp('a', '</s>')) == pytest.approx(2.0 / 5.0)
        assert lm.logp('<s>', '</s>') == -math.inf

    def test_estimate_unknown_word(self):
        with pytest.raises(UnknownWord):
            LanguageModel.estimate([['z']], ['a'])

    def test_sentence_logp(self, tiny_lm):
        assert tiny_lm.sentence_logp(['a']) == pytest.approx(math.log(1 / 3) + math.log(1 / 4))


class TestPseudoLogLikelihood:

    def test_value(self):
        assert pseudo_log_likelihood(0.5, 0.25) == pytest.approx(math.log(2.0))

    def test_zero_posterior_stays_finite(self):
        assert np.isfinite(pseudo_log_likelihood(0.0, 0.5))

    def test_zero_prior_rejected(self):
        with pytest.raises(ConfigError):
            pseudo_log_likelihood(np.array([0.5]), np.array([0.0]))


class TestWer:

    def test_identical(self):
        assert wer('a b c', 'a b c').as_tuple() == (0, 0, 0, 0.0)

    def test_substitution_and_insertion(self):
        result = wer('a b c', 'a x c d')
        assert (result.substitutions, result.deletions, result.insertions) == (1, 0, 1)
        assert result.wer_percent == pytest.approx(200.0 / 3.0)

    def test_deletions(self):
        assert wer(['a', 'b', 'c', 'd'], ['a', 'd']).as_tuple() == (0, 2, 0, 50.0)

    def test_empty_hypothesis(self):
        assert wer('a b', '').wer_percent == 100.0

    def test_silence_ignored(self):
        assert wer('sil a b sil', 'a b', ignore=('sil',)).errors == 0

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            wer('sil', 'a', ignore=('sil',))

    def test_alignment_report(self):
        report = alignment_report('a b c', 'a x c')
        lines = report.splitlines()
        assert lines[0].startswith('REF:')
        assert 'S' in lines[2]

    def test_substitution_direction_is_symmetric(self):
        forward, backward = wer('a b c d', 'a x c y'), wer('a x c y', 'a b c d')
        assert forward.as_tuple() == backward.as_tuple() == (2, 0, 0, 50.0)

    def test_self_comparison_is_zero(self, rng):
        words = ['w%d' % i for i in rng.integers(0, 5, size=12)]
        assert wer(words, words).errors == 0
