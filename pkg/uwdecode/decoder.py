"""
HMM word decoding over DNN pseudo-log-likelihoods.

Standard and uncertainty-weighted Viterbi share one trellis: the weighted rule
multiplies each frame's emission scores by its weight UW[x_t] before the
search, transitions and language-model scores stay unweighted.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from uwdecode.errors import (
    ConfigError,
    DimMismatch,
    EmptyInput,
    EmptyReference,
    NoValidPath,
    TooLarge,
    UnknownWord,
)

logger = logging.getLogger(__name__)

BOS = '<s>'
EOS = '</s>'
SILENCE = 'sil'
LOG_HALF = math.log(0.5)
TIE_TOLERANCE = 1e-9

WordSeq = Union[str, Sequence[str]]


@dataclass
class Lexicon:
    """
    Left-to-right word HMMs.

    Every word owns an ordered tuple of globally unique state ids; together the
    ids cover 0..S-1. Each state has a self-loop and a forward arc; the forward
    arc of a word's final state is the word exit.
    """
    word_states: Dict[str, Tuple[int, ...]]
    self_loop_logp: float = LOG_HALF
    forward_logp: float = LOG_HALF

    def __post_init__(self):
        self.word_states = {w: tuple(int(s) for s in states) for w, states in self.word_states.items()}
        if not self.word_states:
            raise ConfigError("Lexicon has no words")
        ids = [s for states in self.word_states.values() for s in states]
        if any(len(states) == 0 for states in self.word_states.values()):
            raise ConfigError("Every word needs at least one state")
        if sorted(ids) != list(range(len(ids))):
            raise ConfigError("State ids must be unique and cover 0..S-1")

    @classmethod
    def from_words(cls, state_counts: Dict[str, int], **kwargs) -> 'Lexicon':
        """Assign consecutive state ids in sorted word order"""
        word_states, next_id = {}, 0
        for word in sorted(state_counts):
            word_states[word] = tuple(range(next_id, next_id + state_counts[word]))
            next_id += state_counts[word]
        return cls(word_states, **kwargs)

    @cached_property
    def words(self) -> Tuple[str, ...]:
        return tuple(sorted(self.word_states))

    @property
    def n_states(self) -> int:
        return sum(len(states) for states in self.word_states.values())

    def index(self, word: str) -> int:
        try:
            return self.words.index(word)
        except ValueError:
            raise UnknownWord(f"'{word}' is not in the lexicon") from None

    def states_of(self, word: str) -> Tuple[int, ...]:
        if word not in self.word_states:
            raise UnknownWord(f"'{word}' is not in the lexicon")
        return self.word_states[word]

    @cached_property
    def graph(self) -> Dict[str, np.ndarray]:
        """Flat arrays describing the composite state graph"""
        n = self.n_states
        prev = np.full(n, -1, dtype=np.int64)
        word_of = np.zeros(n, dtype=np.int64)
        first = np.zeros(len(self.words), dtype=np.int64)
        last = np.zeros(len(self.words), dtype=np.int64)
        for w, word in enumerate(self.words):
            states = self.word_states[word]
            first[w], last[w] = states[0], states[-1]
            for pos, s in enumerate(states):
                word_of[s] = w
                if pos > 0:
                    prev[s] = states[pos - 1]
        is_last = np.zeros(n, dtype=bool)
        is_last[last] = True
        nxt = np.full(n, -1, dtype=np.int64)
        nxt[prev[prev >= 0]] = np.nonzero(prev >= 0)[0]
        return {'prev': prev, 'next': nxt, 'word_of': word_of, 'first': first,
                'last': last, 'is_last': is_last}


@dataclass
class LanguageModel:
    """
    Bigram log-probabilities with an LM scale.

    logprobs rows are contexts [<s>, words...], columns are [words..., </s>].
    """
    vocabulary: Tuple[str, ...]
    logprobs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        self.vocabulary = tuple(self.vocabulary)
        self.logprobs = np.asarray(self.logprobs, dtype=np.float64)
        n = len(self.vocabulary)
        if self.logprobs.shape != (n + 1, n + 1):
            raise DimMismatch(f"Bigram table must be ({n + 1}, {n + 1}), got {self.logprobs.shape}")
        if not self.scale > 0:
            raise ConfigError(f"LM scale must be > 0, got {self.scale}")
        with np.errstate(over='ignore'):
            sums = np.exp(self.logprobs).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ConfigError("Outgoing bigram probabilities must sum to 1 for every context")

    @classmethod
    def from_probs(cls, vocabulary: Sequence[str], probs: np.ndarray, scale: float = 1.0) -> 'LanguageModel':
        with np.errstate(divide='ignore'):
            return cls(tuple(vocabulary), np.log(np.asarray(probs, dtype=np.float64)), scale)

    @classmethod
    def uniform(cls, vocabulary: Sequence[str], scale: float = 1.0) -> 'LanguageModel':
        n = len(vocabulary)
        probs = np.full((n + 1, n + 1), 1.0 / (n + 1))
        probs[0, :n] = 1.0 / n
        probs[0, n] = 0.0
        return cls.from_probs(vocabulary, probs, scale)

    @classmethod
    def estimate(cls, transcripts: Iterable[Sequence[str]], vocabulary: Sequence[str],
                 add_k: float = 1.0, scale: float = 1.0) -> 'LanguageModel':
        """Add-k smoothed bigram counts; <s> never goes straight to </s>"""
        vocabulary = tuple(sorted(vocabulary))
        index = {w: i for i, w in enumerate(vocabulary)}
        n = len(vocabulary)
        counts = np.zeros((n + 1, n + 1))
        for words in transcripts:
            prev_row = 0
            for word in words:
                if word not in index:
                    raise UnknownWord(f"'{word}' is not in the LM vocabulary")
                counts[prev_row, index[word]] += 1
                prev_row = index[word] + 1
            if words:
                counts[prev_row, n] += 1
        counts += add_k
        counts[0, n] = 0.0
        return cls.from_probs(vocabulary, counts / counts.sum(axis=1, keepdims=True), scale)

    def logp(self, prev: str, word: str) -> float:
        row = 0 if prev == BOS else self.vocabulary.index(prev) + 1
        col = len(self.vocabulary) if word == EOS else self.vocabulary.index(word)
        return float(self.logprobs[row, col])

    def sentence_logp(self, words: Sequence[str]) -> float:
        total, prev = 0.0, BOS
        for word in list(words) + [EOS]:
            total += self.logp(prev, word)
            prev = word
        return total

    @property
    def start_logp(self) -> np.ndarray:
        return self.logprobs[0, :-1]

    @property
    def transition_logp(self) -> np.ndarray:
        return self.logprobs[1:, :-1]

    @property
    def end_logp(self) -> np.ndarray:
        return self.logprobs[1:, -1]


@dataclass
class DecodeTask:
    """Pseudo-log-likelihoods (T, S), optional per-frame weights, lexicon and LM"""
    loglik: np.ndarray
    lexicon: Lexicon
    lm: LanguageModel
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.loglik = np.asarray(self.loglik, dtype=np.float64)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)

    @property
    def n_frames(self) -> int:
        return self.loglik.shape[0] if self.loglik.ndim == 2 else 0

    def validate(self) -> 'DecodeTask':
        if self.loglik.ndim != 2 or self.loglik.shape[0] == 0:
            raise EmptyInput("Decode task has no frames")
        if self.loglik.shape[1] != self.lexicon.n_states:
            raise DimMismatch(f"Likelihoods have {self.loglik.shape[1]} states, lexicon {self.lexicon.n_states}")
        if not np.all(np.isfinite(self.loglik)):
            raise ConfigError("Pseudo-log-likelihoods must be finite")
        if self.lm.vocabulary != self.lexicon.words:
            raise DimMismatch("LM vocabulary does not match the lexicon")
        if self.weights is not None:
            if self.weights.shape != (self.loglik.shape[0],):
                raise DimMismatch(f"Weight track has {self.weights.shape} entries for {self.loglik.shape[0]} frames")
            if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0) or np.any(self.weights > 1):
                raise ConfigError("Weights must lie in [0, 1]")
        return self

    def emissions(self, weighted: bool = True) -> np.ndarray:
        if weighted and self.weights is not None:
            return self.loglik * self.weights[:, None]
        return self.loglik


@dataclass
class Hypothesis:
    words: Tuple[str, ...]
    score: float
    segments: List[Tuple[str, int, int]] = field(default_factory=list)

    @property
    def text(self) -> str:
        return ' '.join(self.words)


def pseudo_log_likelihood(posterior, prior):
    """log p(s|x) - log p(s); posteriors underflowing to 0 are floored at the smallest double"""
    post = np.asarray(posterior, dtype=np.float64)
    pri = np.asarray(prior, dtype=np.float64)
    if np.any(pri <= 0):
        raise ConfigError("Priors must be positive; floor them with state_priors")
    value = np.log(np.maximum(post, np.finfo(np.float64).tiny)) - np.log(pri)
    return float(value) if value.ndim == 0 else value


def _scaled_lm(task: DecodeTask) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lam, fwd = task.lm.scale, task.lexicon.forward_logp
    start = lam * task.lm.start_logp
    trans = lam * task.lm.transition_logp + fwd
    end = lam * task.lm.end_logp + fwd
    return start, trans, end


def _segments(words: Sequence[int], starts: Sequence[int], n_frames: int,
              lexicon: Lexicon) -> List[Tuple[str, int, int]]:
    ends = list(starts[1:]) + [n_frames]
    return [(lexicon.words[w], s, e) for w, s, e in zip(words, starts, ends)]


def _near(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Finite pairs equal up to accumulated rounding"""
    with np.errstate(invalid='ignore'):
        close = np.abs(a - b) <= TIE_TOLERANCE * np.maximum(1.0, np.abs(a))
    return np.isfinite(a) & np.isfinite(b) & close


def _has_tie(scores: np.ndarray, axis: int = 0) -> bool:
    top = scores.max(axis=axis, keepdims=True)
    return bool(np.any(np.sum(_near(scores, top), axis=axis) > 1))


def viterbi_decode(task: DecodeTask, weighted: bool = True) -> Hypothesis:
    """
    Best word string under the (weighted) decoding objective.

    Maximizes sum_t UW_t * loglik[t, q_t] + transition log-probs
    + lambda * log p(W). With weighted=False (or no weights) this is the
    unweighted rule. Exact ties go to the lexicographically smallest word
    string: a pass that meets any near-tie is settled by an exact search
    over word-string prefixes.

    Args:
        task: Likelihoods, weights, lexicon and language model
        weighted: Apply the per-frame weights when present

    Returns:
        Hypothesis with words, total score and frame segmentation
    """
    task.validate()
    em = task.emissions(weighted)
    lex = task.lexicon
    g = lex.graph
    n_frames, n_states = em.shape
    n_words = len(lex.words)
    start, trans, end = _scaled_lm(task)
    self_lp, fwd_lp = lex.self_loop_logp, lex.forward_logp

    has_prev = g['prev'] >= 0
    prev_src = g['prev'][has_prev]
    word_cols = np.arange(n_words)
    stay_src = np.arange(n_states)

    delta = np.full(n_states, -np.inf)
    delta[g['first']] = start + em[0, g['first']]
    back = np.zeros((n_frames, n_states), dtype=np.int64)
    entered = np.zeros((n_frames, n_states), dtype=bool)
    entered[0, g['first']] = True
    tied = False

    for t in range(1, n_frames):
        stay = delta + self_lp
        move = np.full(n_states, -np.inf)
        move_src = stay_src.copy()
        move[has_prev] = delta[prev_src] + fwd_lp
        move_src[has_prev] = prev_src

        cand = delta[g['last']][:, None] + trans
        best_prev = np.argmax(cand, axis=0)
        move[g['first']] = cand[best_prev, word_cols]
        move_src[g['first']] = g['last'][best_prev]
        tied = tied or _has_tie(cand) or bool(np.any(_near(move, stay)))

        take_move = move > stay
        back[t] = np.where(take_move, move_src, stay_src)
        entered[t] = take_move & ~has_prev
        delta = np.where(take_move, move, stay) + em[t]

    final = delta[g['last']] + end
    best_word = int(np.argmax(final))
    score = float(final[best_word])
    if not np.isfinite(score):
        raise NoValidPath(f"No word sequence fits {n_frames} frame(s)")
    if tied or _has_tie(final):
        logger.debug(f"Tied trellis over {n_frames} frames, resolving word strings exactly")
        return _lexicographic_decode(task, em)

    state = int(g['last'][best_word])
    words, starts = [], []
    for t in range(n_frames - 1, -1, -1):
        if entered[t, state]:
            words.append(int(g['word_of'][state]))
            starts.append(t)
        if t > 0:
            state = int(back[t, state])
    words.reverse()
    starts.reverse()
    return Hypothesis(words=tuple(lex.words[w] for w in words), score=score,
                      segments=_segments(words, starts, n_frames, lex))


def _prefix_search(task: DecodeTask, em: np.ndarray, prefix: Tuple[int, ...],
                   open_tail: bool) -> Tuple[float, List[int], List[int]]:
    """
    Best path whose word string is exactly `prefix` or, with open_tail,
    starts with it. Returns (score, words, start frames).

    The trellis unrolls the prefix words into a chain of private states
    followed by a copy of the full lexicon graph. Every path score is summed
    in the same order as in viterbi_decode and brute_force_decode, so scores
    of the same path agree to the last bit.
    """
    lex = task.lexicon
    g = lex.graph
    start, trans, end = _scaled_lm(task)
    self_lp, fwd_lp = lex.self_loop_logp, lex.forward_logp

    cols: List[int] = []
    node_word: List[int] = []
    incoming: List[List[Tuple[int, float, bool]]] = []
    final: List[float] = []

    def _add(col: int, word: int) -> int:
        node = len(cols)
        cols.append(col)
        node_word.append(word)
        incoming.append([(node, self_lp, False)])
        final.append(-np.inf)
        return node

    last_node = -1
    for k, w in enumerate(prefix):
        for j, s in enumerate(lex.word_states[lex.words[w]]):
            node = _add(s, w)
            if j > 0:
                incoming[node].append((node - 1, fwd_lp, False))
            elif k > 0:
                incoming[node].append((last_node, trans[prefix[k - 1], w], True))
            last_node = node
    final[last_node] = end[prefix[-1]]

    if open_tail:
        offset = len(cols)
        for s in range(lex.n_states):
            _add(s, int(g['word_of'][s]))
        for s in np.flatnonzero(g['prev'] >= 0):
            incoming[offset + s].append((offset + int(g['prev'][s]), fwd_lp, False))
        for w, f in enumerate(g['first']):
            node = offset + int(f)
            incoming[node].append((last_node, trans[prefix[-1], w], True))
            for v, l in enumerate(g['last']):
                incoming[node].append((offset + int(l), trans[v, w], True))
        for v, l in enumerate(g['last']):
            final[offset + int(l)] = end[v]

    n_nodes = len(cols)
    width = max(len(edges) for edges in incoming)
    src = np.zeros((n_nodes, width), dtype=np.int64)
    arc_lp = np.full((n_nodes, width), -np.inf)
    arc_entry = np.zeros((n_nodes, width), dtype=bool)
    for node, edges in enumerate(incoming):
        for e, (from_node, lp, enters) in enumerate(edges):
            src[node, e], arc_lp[node, e], arc_entry[node, e] = from_node, lp, enters

    col_idx = np.asarray(cols)
    rows = np.arange(n_nodes)
    n_frames = em.shape[0]
    delta = np.full(n_nodes, -np.inf)
    delta[0] = start[prefix[0]] + em[0, col_idx[0]]
    back = np.zeros((n_frames, n_nodes), dtype=np.int64)
    entered = np.zeros((n_frames, n_nodes), dtype=bool)
    entered[0, 0] = True
    for t in range(1, n_frames):
        cand = delta[src] + arc_lp
        pick = np.argmax(cand, axis=1)
        back[t] = src[rows, pick]
        entered[t] = arc_entry[rows, pick]
        delta = cand[rows, pick] + em[t, col_idx]

    total = delta + np.asarray(final)
    node = int(np.argmax(total))
    score = float(total[node])
    if not np.isfinite(score):
        return score, [], []
    words, starts = [], []
    for t in range(n_frames - 1, -1, -1):
        if entered[t, node]:
            words.append(node_word[node])
            starts.append(t)
        if t > 0:
            node = int(back[t, node])
    return score, words[::-1], starts[::-1]


def _lexicographic_decode(task: DecodeTask, em: np.ndarray) -> Hypothesis:
    """Grow the answer one word at a time, keeping the smallest word that still reaches the best score"""
    lex = task.lexicon
    n_words = len(lex.words)
    n_frames = em.shape[0]
    first_scores = [_prefix_search(task, em, (w,), True)[0] for w in range(n_words)]
    target = max(first_scores)
    if not np.isfinite(target):
        raise NoValidPath(f"No word sequence fits {n_frames} frame(s)")
    prefix = (first_scores.index(target),)
    while True:
        score, words, starts = _prefix_search(task, em, prefix, False)
        if score == target:
            return Hypothesis(words=tuple(lex.words[w] for w in words), score=score,
                              segments=_segments(words, starts, n_frames, lex))
        prefix += (next(w for w in range(n_words)
                        if _prefix_search(task, em, prefix + (w,), True)[0] == target),)


def count_paths(task: DecodeTask) -> int:
    """Number of complete state paths through T frames (exact integer)"""
    task.validate()
    g = task.lexicon.graph
    n_frames, n_states = task.loglik.shape
    counts = [0] * n_states
    for s in g['first']:
        counts[int(s)] = 1
    for _ in range(1, n_frames):
        exits = sum(counts[int(s)] for s in g['last'])
        new = list(counts)
        for s in range(n_states):
            p = int(g['prev'][s])
            if p >= 0:
                new[s] += counts[p]
        for s in g['first']:
            new[int(s)] += exits
        counts = new
    return sum(counts[int(s)] for s in g['last'])


def brute_force_decode(task: DecodeTask, max_paths: int = 10 ** 7, weighted: bool = True) -> Hypothesis:
    """
    Exhaustive search over every word string and segmentation.

    Same objective as viterbi_decode; exact ties go to the lexicographically
    smallest word string. Raises TooLarge above max_paths paths.
    """
    n_paths = count_paths(task)
    if n_paths > max_paths:
        raise TooLarge(f"{n_paths} paths exceed the guard of {max_paths}")

    em = task.emissions(weighted).tolist()
    lex = task.lexicon
    g = lex.graph
    n_frames = task.n_frames
    start, trans, end = (a.tolist() for a in _scaled_lm(task))
    self_lp, fwd_lp = lex.self_loop_logp, lex.forward_logp
    word_of = g['word_of'].tolist()
    nxt = g['next'].tolist()
    is_last = g['is_last'].tolist()
    first = g['first'].tolist()
    best: List = [None]

    def _consider(total: float, words: Tuple[int, ...], starts: Tuple[int, ...]):
        current = best[0]
        if current is None or total > current[0] or (total == current[0] and words < current[1]):
            best[0] = (total, words, starts)

    def _visit(t: int, s: int, score: float, words: Tuple[int, ...], starts: Tuple[int, ...]):
        if t == n_frames - 1:
            if is_last[s]:
                _consider(score + end[word_of[s]], words, starts)
            return
        _visit(t + 1, s, score + self_lp + em[t + 1][s], words, starts)
        if not is_last[s]:
            _visit(t + 1, nxt[s], score + fwd_lp + em[t + 1][nxt[s]], words, starts)
        else:
            row = trans[word_of[s]]
            for w, f in enumerate(first):
                _visit(t + 1, f, score + row[w] + em[t + 1][f], words + (w,), starts + (t + 1,))

    for w, f in enumerate(first):
        _visit(0, f, start[w] + em[0][f], (w,), (0,))

    if best[0] is None:
        raise NoValidPath(f"No word sequence fits {n_frames} frame(s)")
    score, words, starts = best[0]
    return Hypothesis(words=tuple(lex.words[w] for w in words), score=score,
                      segments=_segments(words, starts, n_frames, lex))


def path_score(task: DecodeTask, word_durations: Sequence[Tuple[str, Sequence[int]]],
               weighted: bool = True) -> float:
    """Objective value of one explicit path given as (word, frames per state) pairs"""
    task.validate()
    em = task.emissions(weighted)
    lex = task.lexicon
    start, trans, end = _scaled_lm(task)
    t, score, prev_word = 0, 0.0, None
    for word, durations in word_durations:
        w = lex.index(word)
        states = lex.states_of(word)
        if len(durations) != len(states) or any(d < 1 for d in durations):
            raise ConfigError(f"'{word}' needs one positive duration per state")
        score += start[w] if prev_word is None else trans[prev_word, w]
        for k, (s, d) in enumerate(zip(states, durations)):
            if k > 0:
                score += lex.forward_logp
            for i in range(d):
                if i > 0:
                    score += lex.self_loop_logp
                if t >= task.n_frames:
                    raise DimMismatch("Path is longer than the task")
                score += em[t, s]
                t += 1
        prev_word = w
    if prev_word is None or t != task.n_frames:
        raise DimMismatch(f"Path covers {t} of {task.n_frames} frames")
    return float(score + end[prev_word])


@dataclass
class WerResult:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer_percent(self) -> float:
        return 100.0 * self.errors / self.ref_len

    def as_tuple(self) -> Tuple[int, int, int, float]:
        return self.substitutions, self.deletions, self.insertions, self.wer_percent


def _tokens(words: WordSeq, ignore: Sequence[str]) -> List[str]:
    tokens = words.split() if isinstance(words, str) else list(words)
    return [w for w in tokens if w not in ignore]


def _align(ref: List[str], hyp: List[str]) -> List[Tuple[str, Optional[str], Optional[str]]]:
    """Levenshtein trellis with backtrace; ops are C(orrect), S, D, I"""
    n, m = len(ref), len(hyp)
    trellis = np.zeros((n + 1, m + 1), dtype=np.int64)
    trellis[:, 0] = np.arange(n + 1)
    trellis[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = trellis[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            trellis[i, j] = min(diag, trellis[i - 1, j] + 1, trellis[i, j - 1] + 1)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and trellis[i, j] == trellis[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops.append(('C' if ref[i - 1] == hyp[j - 1] else 'S', ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and trellis[i, j] == trellis[i - 1, j] + 1:
            ops.append(('D', ref[i - 1], None))
            i -= 1
        else:
            ops.append(('I', None, hyp[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def wer(reference: WordSeq, hypothesis: WordSeq, ignore: Sequence[str] = ()) -> WerResult:
    """
    Word error rate from a unit-cost Levenshtein alignment.

    Args:
        reference: Reference words (string or sequence)
        hypothesis: Hypothesis words
        ignore: Tokens dropped from both sides first (e.g. the silence word)

    Returns:
        WerResult with S, D, I counts and wer_percent = 100 (S+D+I) / len(reference)
    """
    ref = _tokens(reference, ignore)
    hyp = _tokens(hypothesis, ignore)
    if not ref:
        raise EmptyReference("Reference has no words")
    ops = _align(ref, hyp)
    return WerResult(
        substitutions=sum(1 for op in ops if op[0] == 'S'),
        deletions=sum(1 for op in ops if op[0] == 'D'),
        insertions=sum(1 for op in ops if op[0] == 'I'),
        ref_len=len(ref),
    )


def alignment_report(reference: WordSeq, hypothesis: WordSeq, ignore: Sequence[str] = ()) -> str:
    """REF / HYP / EVAL lines with one aligned column per edit operation"""
    ops = _align(_tokens(reference, ignore), _tokens(hypothesis, ignore))
    ref_cells, hyp_cells, eval_cells = [], [], []
    for op, r, h in ops:
        r_txt = r if r is not None else '*' * len(h)
        h_txt = h if h is not None else '*' * len(r)
        width = max(len(r_txt), len(h_txt))
        ref_cells.append(r_txt.ljust(width))
        hyp_cells.append(h_txt.ljust(width))
        eval_cells.append(('' if op == 'C' else op).ljust(width))
    return '\n'.join([
        'REF:  ' + ' '.join(ref_cells),
        'HYP:  ' + ' '.join(hyp_cells),
        'EVAL: ' + ' '.join(eval_cells),
    ])
