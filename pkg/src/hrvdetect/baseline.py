"""Keyword baseline: single-document statistical keyword extraction over the
positive training sentences, and a keyword-match classifier.

The extractor scores unigram candidates by casing, first position, normalized
frequency, left/right context relatedness, and sentence dispersion; lower
scores mean more important terms.  Everything is deterministic: same corpus
bytes, same ordered profile.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Sequence


class BaselineError(Exception):
    pass


@dataclass(frozen=True)
class KeywordFeatures:
    casing: float
    position: float
    frequency_norm: float
    relatedness: float
    dispersion: float


@dataclass(frozen=True)
class KeywordScore:
    term: str
    score: float
    features: KeywordFeatures


@dataclass
class KeywordProfile:
    keywords: list[str]
    k: int = 30
    scores: list[KeywordScore] = field(default_factory=list)
    normalization: str = "casefold"

    def __post_init__(self):
        normalized = [t.casefold() for t in self.keywords]
        if len(set(normalized)) != len(normalized):
            raise BaselineError("duplicate keywords after normalization")

    @property
    def terms(self) -> set[str]:
        return {t.casefold() for t in self.keywords}


def load_stopwords() -> set[str]:
    text = (
        resources.files("hrvdetect.assets")
        .joinpath("stopwords_ru_uk.txt")
        .read_text(encoding="utf-8")
    )
    return {
        line.strip().casefold()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    }


_TOKEN = re.compile(r"[^\W\d_]+(?:[-'’][^\W\d_]+)*", re.UNICODE)
_SENT_BREAK = re.compile(r"[.!?…\n]+")


def tokenize(text: str) -> list[str]:
    """Word tokens: letter runs, keeping internal hyphens/apostrophes."""
    return _TOKEN.findall(text)


def _sentences(text: str) -> list[list[str]]:
    out = []
    for chunk in _SENT_BREAK.split(text):
        tokens = tokenize(chunk)
        if tokens:
            out.append(tokens)
    return out


def extract_keywords(
    training_text: str,
    k: int = 30,
    stopwords: set[str] | None = None,
    min_term_len: int = 2,
) -> KeywordProfile:
    """Top-k unigram keywords of a document by the combined statistical score.

    Candidates are casefolded for counting; the reported surface form is the
    most frequent one seen.  Fewer than k candidates returns them all with a
    warning.
    """
    if k < 1:
        raise BaselineError("k must be >= 1")
    if not training_text.strip():
        raise BaselineError("empty training text")
    if stopwords is None:
        stopwords = load_stopwords()

    sentences = _sentences(training_text)
    n_sents = len(sentences)

    tf: Counter[str] = Counter()
    surface: dict[str, Counter[str]] = defaultdict(Counter)
    upper_count: Counter[str] = Counter()
    acronym_count: Counter[str] = Counter()
    sent_occurrence: dict[str, set[int]] = defaultdict(set)
    first_sent: dict[str, int] = {}
    left_ctx: dict[str, Counter[str]] = defaultdict(Counter)
    right_ctx: dict[str, Counter[str]] = defaultdict(Counter)

    for si, tokens in enumerate(sentences):
        folded = [t.casefold() for t in tokens]
        for ti, (tok, low) in enumerate(zip(tokens, folded)):
            tf[low] += 1
            surface[low][tok] += 1
            sent_occurrence[low].add(si)
            first_sent.setdefault(low, si)
            if tok.isupper() and len(tok) > 1:
                acronym_count[low] += 1
            elif ti > 0 and tok[:1].isupper():
                upper_count[low] += 1
            if ti > 0:
                left_ctx[low][folded[ti - 1]] += 1
            if ti + 1 < len(tokens):
                right_ctx[low][folded[ti + 1]] += 1

    candidates = [
        t
        for t in tf
        if t not in stopwords and len(t) >= min_term_len
    ]
    if not candidates:
        raise BaselineError("no keyword candidates after stopword filtering")

    freqs = [tf[t] for t in candidates]
    mean_tf = sum(freqs) / len(freqs)
    std_tf = math.sqrt(sum((f - mean_tf) ** 2 for f in freqs) / len(freqs))
    max_tf = max(tf.values())

    scored: list[KeywordScore] = []
    for term in candidates:
        f = tf[term]
        w_case = max(upper_count[term], acronym_count[term]) / (1.0 + math.log(f))
        w_pos = math.log(math.log(3.0 + first_sent[term]))
        w_freq = f / (mean_tf + std_tf) if (mean_tf + std_tf) > 0 else 0.0
        lc, rc = left_ctx[term], right_ctx[term]
        dl = len(lc) / sum(lc.values()) if lc else 0.0
        dr = len(rc) / sum(rc.values()) if rc else 0.0
        w_rel = 1.0 + (dl + dr) * (f / max_tf)
        w_dif = len(sent_occurrence[term]) / n_sents
        score = (w_rel * w_pos) / (w_case + w_freq / w_rel + w_dif / w_rel)
        best_surface = surface[term].most_common(1)[0][0]
        scored.append(
            KeywordScore(
                term=best_surface,
                score=score,
                features=KeywordFeatures(w_case, w_pos, w_freq, w_rel, w_dif),
            )
        )

    scored.sort(key=lambda s: (s.score, s.term.casefold()))
    if len(scored) < k:
        warnings.warn(
            f"only {len(scored)} candidate terms for k={k}; returning all"
        )
    top = scored[:k]
    return KeywordProfile(
        keywords=[s.term for s in top], k=k, scores=top
    )


def keyword_classify(sentence: str, profile: KeywordProfile) -> int:
    """1 iff any casefolded token of the sentence is a profile term."""
    if not profile.keywords:
        raise BaselineError("empty keyword profile")
    if not sentence.strip():
        return 0
    terms = profile.terms
    return int(any(tok.casefold() in terms for tok in tokenize(sentence)))


def keyword_classify_substring(sentence: str, profile: KeywordProfile) -> int:
    """Substring-match alternative, for comparison with token matching."""
    if not profile.keywords:
        raise BaselineError("empty keyword profile")
    folded = sentence.casefold()
    return int(any(t.casefold() in folded for t in profile.keywords))


# ---------------------------------------------------------------------------
# Profile file: one "term<TAB>score" line per keyword, UTF-8

def write_profile(profile: KeywordProfile, stream: IO[str]) -> None:
    by_term = {s.term: s.score for s in profile.scores}
    for term in profile.keywords:
        stream.write(f"{term}\t{by_term.get(term, 0.0):.6g}\n")


def read_profile(lines: Iterable[str]) -> KeywordProfile:
    keywords: list[str] = []
    scores: list[KeywordScore] = []
    zero = KeywordFeatures(0, 0, 0, 0, 0)
    for line in lines:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        term, _, score = line.partition("\t")
        keywords.append(term)
        scores.append(KeywordScore(term, float(score or 0.0), zero))
    return KeywordProfile(keywords=keywords, k=len(keywords), scores=scores)
