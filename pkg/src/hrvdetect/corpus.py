"""Corpus ingestion, sentence segmentation, and corpus statistics.

A corpus is built from channel-export files (one JSON record per line, see
`ingest_export`).  Posts are segmented into sentences with a rule-based
splitter driven by an abbreviation lexicon, so segmentation is deterministic
and needs no model files.
"""

from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import IO, Iterable, Iterator

AFFILIATIONS = ("russia", "ukraine", "unclear")

# Default corpus window; records outside it are kept but flagged.
WINDOW_START = datetime(2022, 2, 24, tzinfo=timezone.utc)
WINDOW_END = datetime(2022, 9, 11, 23, 59, 59, tzinfo=timezone.utc)


class CorpusError(Exception):
    pass


class EmptyInputError(CorpusError):
    pass


@dataclass(frozen=True)
class Channel:
    channel_id: str
    affiliation: str
    post_count: int

    def __post_init__(self):
        if self.affiliation not in AFFILIATIONS:
            raise CorpusError(f"unknown affiliation: {self.affiliation!r}")
        if self.post_count < 0:
            raise CorpusError("post_count must be non-negative")


@dataclass(frozen=True)
class Post:
    post_id: int
    channel_id: str
    date: datetime
    text: str
    affiliation: str = "unclear"
    in_window: bool = True

    @property
    def key(self) -> tuple[str, int]:
        return (self.channel_id, self.post_id)


@dataclass(frozen=True)
class Sentence:
    post_id: int
    channel_id: str
    sent_index: int
    text: str
    source: str = "original"

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.channel_id, self.post_id, self.sent_index)

    @property
    def post_key(self) -> tuple[str, int]:
        return (self.channel_id, self.post_id)


@dataclass
class CorpusStats:
    n_channels: int
    n_posts: int
    affiliation_counts: dict[str, int]
    mean_posts_per_channel: float
    mean_sentence_len_words: float
    mode_sentence_len_words: int


@dataclass
class Corpus:
    posts: dict[tuple[str, int], Post] = field(default_factory=dict)
    rejected: int = 0
    duplicates: int = 0

    def __len__(self) -> int:
        return len(self.posts)

    def channels(self) -> list[Channel]:
        counts: Counter[str] = Counter()
        affil: dict[str, str] = {}
        for post in self.posts.values():
            counts[post.channel_id] += 1
            affil.setdefault(post.channel_id, post.affiliation)
        return [
            Channel(cid, affil[cid], counts[cid]) for cid in sorted(counts)
        ]

    def by_channel(self) -> dict[str, list[Post]]:
        out: dict[str, list[Post]] = {}
        for post in self.posts.values():
            out.setdefault(post.channel_id, []).append(post)
        for posts in out.values():
            posts.sort(key=lambda p: p.post_id)
        return out


def parse_date(value: str) -> tuple[datetime, bool]:
    """Parse an ISO-8601 date, normalize to UTC, and flag the corpus window."""
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    else:
        dt = dt.astimezone(timezone.utc)
    return dt, WINDOW_START <= dt <= WINDOW_END


def _parse_record(line: str) -> Post:
    obj = json.loads(line)
    text = str(obj["text"])
    if not text.strip():
        raise ValueError("empty text")
    affiliation = obj.get("affiliation", "unclear")
    if affiliation not in AFFILIATIONS:
        raise ValueError(f"bad affiliation {affiliation!r}")
    date, in_window = parse_date(str(obj["date"]))
    return Post(
        post_id=int(obj["post_id"]),
        channel_id=str(obj["channel_id"]),
        date=date,
        text=text,
        affiliation=affiliation,
        in_window=in_window,
    )


def ingest_export(stream: Iterable[str] | IO[str]) -> Corpus:
    """Ingest a line-delimited channel export into a corpus.

    Duplicate (channel_id, post_id) pairs collapse to the first occurrence;
    malformed lines are counted and skipped, never fatal.
    """
    corpus = Corpus()
    try:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            try:
                post = _parse_record(line)
            except (ValueError, KeyError, TypeError):
                corpus.rejected += 1
                continue
            if post.key in corpus.posts:
                corpus.duplicates += 1
                continue
            corpus.posts[post.key] = post
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"unreadable export stream: {exc}") from exc
    return corpus


def load_abbreviations() -> set[str]:
    text = (
        resources.files("hrvdetect.assets")
        .joinpath("abbreviations_ru_uk.txt")
        .read_text(encoding="utf-8")
    )
    return {
        line.strip().casefold()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    }


_TERMINAL = re.compile(r"[.!?…]+")


def segment_post(text: str, abbrev_lexicon: set[str] | None = None) -> list[Sentence]:
    """Split text at sentence-final punctuation, skipping abbreviation periods.

    Returns at least one sentence for any non-empty text; sentence indices are
    contiguous and their concatenation covers every non-whitespace character.
    """
    if not text or not text.strip():
        raise EmptyInputError("cannot segment empty text")
    if abbrev_lexicon is None:
        abbrev_lexicon = load_abbreviations()
    lexicon = {a.casefold() for a in abbrev_lexicon}

    boundaries: list[int] = []
    for match in _TERMINAL.finditer(text):
        end = match.end()
        if end < len(text) and not text[end].isspace():
            continue  # mid-token punctuation, e.g. "12.5"
        # token ending at this punctuation, inclusive
        start = end
        while start > 0 and not text[start - 1].isspace():
            start -= 1
        token = text[start:end].casefold()
        if match.group().endswith(".") and (
            token in lexicon or token.lstrip("([«\"'") in lexicon
        ):
            continue
        boundaries.append(end)

    pieces: list[str] = []
    prev = 0
    for b in boundaries:
        piece = text[prev:b]
        if piece.strip():
            pieces.append(piece)
        prev = b
    if text[prev:].strip():
        pieces.append(text[prev:])
    if not pieces:
        pieces = [text]
    return [
        Sentence(post_id=0, channel_id="", sent_index=i, text=p.strip())
        for i, p in enumerate(pieces)
    ]


def segment_corpus(corpus: Corpus, abbrev_lexicon: set[str] | None = None) -> list[Sentence]:
    """Segment every post, stamping sentence keys from the post key."""
    if abbrev_lexicon is None:
        abbrev_lexicon = load_abbreviations()
    out: list[Sentence] = []
    for key in sorted(corpus.posts):
        post = corpus.posts[key]
        for sent in segment_post(post.text, abbrev_lexicon):
            out.append(
                Sentence(
                    post_id=post.post_id,
                    channel_id=post.channel_id,
                    sent_index=sent.sent_index,
                    text=sent.text,
                )
            )
    return out


def sample_posts(corpus: Corpus, n_per_channel: int, seed: int) -> list[Post]:
    """Draw up to n_per_channel posts uniformly without replacement per channel."""
    if n_per_channel < 1:
        raise ValueError("n_per_channel must be >= 1")
    if not corpus.posts:
        raise EmptyInputError("empty corpus")
    rng = random.Random(seed)
    sampled: list[Post] = []
    by_channel = corpus.by_channel()
    for cid in sorted(by_channel):
        posts = by_channel[cid]
        if len(posts) <= n_per_channel:
            sampled.extend(posts)
        else:
            sampled.extend(rng.sample(posts, n_per_channel))
    return sampled


def word_count(text: str) -> int:
    return len(text.split())


def corpus_stats(corpus: Corpus, sentences: list[Sentence] | None = None) -> CorpusStats:
    """Exact channel/post counts plus sentence-length statistics.

    Word length is whitespace-delimited token count, punctuation attached.
    If `sentences` is None, posts are segmented with the default lexicon.
    """
    if not corpus.posts:
        raise EmptyInputError("empty corpus")
    channels = corpus.channels()
    affiliation_counts = {a: 0 for a in AFFILIATIONS}
    for ch in channels:
        affiliation_counts[ch.affiliation] += 1
    if sentences is None:
        sentences = segment_corpus(corpus)
    lengths = [word_count(s.text) for s in sentences]
    mean_len = sum(lengths) / len(lengths) if lengths else 0.0
    mode_len = Counter(lengths).most_common(1)[0][0] if lengths else 0
    return CorpusStats(
        n_channels=len(channels),
        n_posts=len(corpus.posts),
        affiliation_counts=affiliation_counts,
        mean_posts_per_channel=len(corpus.posts) / len(channels),
        mean_sentence_len_words=mean_len,
        mode_sentence_len_words=mode_len,
    )


# ---------------------------------------------------------------------------
# Sentence-file serialization (shared with datasets/augmentation modules)

def write_sentences(
    sentences: Iterable[Sentence],
    stream: IO[str],
    labels: dict[tuple[str, int, int], int] | None = None,
) -> None:
    for s in sentences:
        rec = {
            "channel_id": s.channel_id,
            "post_id": s.post_id,
            "sent_index": s.sent_index,
            "text": s.text,
            "source": s.source,
        }
        if labels is not None and s.key in labels:
            rec["label"] = labels[s.key]
        stream.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_sentences(stream: Iterable[str]) -> Iterator[tuple[Sentence, int | None]]:
    for line in stream:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        sent = Sentence(
            post_id=int(obj["post_id"]),
            channel_id=str(obj["channel_id"]),
            sent_index=int(obj["sent_index"]),
            text=str(obj["text"]),
            source=str(obj.get("source", "original")),
        )
        label = obj.get("label")
        yield sent, (int(label) if label is not None else None)
