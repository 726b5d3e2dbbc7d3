"""Positive-class augmentation: back-translation chains and LLM generation,
through pluggable backends with a recorded-fixture implementation for tests."""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol, Sequence

from .corpus import Sentence

SentenceKey = tuple[str, int, int]


class AugmentationError(Exception):
    pass


class ChainError(AugmentationError):
    def __init__(self, hop_index: int, message: str):
        self.hop_index = hop_index
        super().__init__(f"hop {hop_index}: {message}")


@dataclass(frozen=True)
class TranslationChain:
    chain_id: int
    languages: tuple[str, str, str, str]

    def __post_init__(self):
        if not 1 <= self.chain_id <= 5:
            raise AugmentationError("chain_id must be in 1..5")
        if self.languages[0] != self.languages[-1]:
            raise AugmentationError("chain must start and end in the source language")
        if len(self.languages) != 4:
            raise AugmentationError("chain needs exactly two intermediate hops")

    @property
    def hops(self) -> list[tuple[str, str]]:
        return list(zip(self.languages, self.languages[1:]))


DEFAULT_CHAINS = (
    TranslationChain(1, ("ru", "ar", "ja", "ru")),
    TranslationChain(2, ("ru", "tr", "fa", "ru")),
    TranslationChain(3, ("ru", "zh", "pl", "ru")),
    TranslationChain(4, ("ru", "he", "de", "ru")),
    TranslationChain(5, ("ru", "th", "el", "ru")),
)


@dataclass(frozen=True)
class GenerationPrompt:
    prompt_id: str
    template: str
    target_count_per_call: int = 10

    def __post_init__(self):
        if not self.template.strip():
            raise AugmentationError("empty prompt template")


PROMPT_P1 = GenerationPrompt(
    "P1",
    "Составь предложения на русском языке, описывающие нарушения прав "
    "человека в ходе российско-украинской войны. "
    "Follow-up if one-sided: Why are all the violations presented as being "
    "committed by Russia only?",
)
PROMPT_P2 = GenerationPrompt(
    "P2",
    "Представь, что ты Telegram-канал. Напиши десять постов, каждый из "
    "одного предложения, с историями о нарушениях прав человека в ходе "
    "российско-украинской войны 2022 года.",
    target_count_per_call=10,
)
DEFAULT_PROMPTS = {"P1": PROMPT_P1, "P2": PROMPT_P2}


@dataclass
class AugmentationRecord:
    text: str
    source: str  # "bt:<chain_id>" or "llm:<prompt_id>"
    origin_key: SentenceKey | None = None
    accepted: bool = False

    def __post_init__(self):
        if self.source.startswith("bt:") and self.origin_key is None:
            raise AugmentationError("back-translation records need an origin key")
        if self.source.startswith("llm:") and self.origin_key is not None:
            raise AugmentationError("generated records carry no origin key")
        if self.accepted and not self.text.strip():
            raise AugmentationError("accepted record with empty text")


@dataclass
class CampaignFailure:
    origin_key: SentenceKey
    chain_id: int
    hop_index: int
    reason: str


class TranslationBackend(Protocol):
    def translate(self, src_lang: str, dst_lang: str, text: str) -> str: ...


class GenerationBackend(Protocol):
    def generate(self, prompt: str) -> list[str]: ...


class IdentityBackend:
    """Translation backend that returns its input unchanged."""

    def translate(self, src_lang: str, dst_lang: str, text: str) -> str:
        return text


class BackendRefusal(AugmentationError):
    pass


class FixtureBackend:
    """Replayable backend: serves responses from a recorded request log.

    Fixture lines are JSON objects {request: {kind, src, dst, text | prompt},
    response: string}.  A missing entry raises, so tests fail loudly instead
    of silently diverging from the recording.
    """

    def __init__(self, lines: Iterable[str]):
        self._translations: dict[tuple[str, str, str], str] = {}
        self._generations: dict[str, list[list[str]]] = {}
        for line in lines:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            req = obj["request"]
            if req["kind"] == "translate":
                key = (req["src"], req["dst"], req["text"])
                self._translations[key] = obj["response"]
            elif req["kind"] == "generate":
                self._generations.setdefault(req["prompt"], []).append(
                    obj["response"].splitlines()
                )
            else:
                raise AugmentationError(f"unknown fixture kind {req['kind']!r}")

    def translate(self, src_lang: str, dst_lang: str, text: str) -> str:
        try:
            return self._translations[(src_lang, dst_lang, text)]
        except KeyError:
            raise AugmentationError(
                f"no recorded translation {src_lang}->{dst_lang} for {text!r}"
            ) from None

    def generate(self, prompt: str) -> list[str]:
        calls = self._generations.get(prompt)
        if not calls:
            raise BackendRefusal(f"no recorded generation left for prompt {prompt!r}")
        return calls.pop(0)


def back_translate(
    sentence: str, chain: TranslationChain, backend: TranslationBackend
) -> str:
    """Run one sentence through the chain's hops and back to the source."""
    text = sentence
    for i, (src, dst) in enumerate(chain.hops):
        try:
            text = backend.translate(src, dst, text)
        except Exception as exc:
            raise ChainError(i, str(exc)) from exc
        if not text or not text.strip():
            raise ChainError(i, "backend returned empty text")
    return text.strip()


def run_bt_campaign(
    positives: Sequence[Sentence],
    chains: Sequence[TranslationChain],
    backend: TranslationBackend,
) -> tuple[list[AugmentationRecord], list[CampaignFailure]]:
    """Back-translate every positive through every chain.

    Per-item hop failures are recorded and never abort the campaign; output
    order is (origin key, chain_id) regardless of execution order.
    """
    if not positives:
        raise AugmentationError("no positive sentences to augment")
    records: list[AugmentationRecord] = []
    failures: list[CampaignFailure] = []
    for sent in sorted(positives, key=lambda s: s.key):
        for chain in sorted(chains, key=lambda c: c.chain_id):
            try:
                text = back_translate(sent.text, chain, backend)
            except ChainError as exc:
                failures.append(
                    CampaignFailure(sent.key, chain.chain_id, exc.hop_index, str(exc))
                )
                continue
            records.append(
                AugmentationRecord(
                    text=text,
                    source=f"bt:{chain.chain_id}",
                    origin_key=sent.key,
                    accepted=True,
                )
            )
    return records, failures


def generate_llm_examples(
    prompt: GenerationPrompt,
    backend: GenerationBackend,
    n_total: int,
    max_retries: int = 5,
) -> list[AugmentationRecord]:
    """Collect up to n_total generated candidates, pending human review.

    Refusals are retried up to max_retries consecutive times; exhaustion
    yields a partial result with a warning rather than an error.
    """
    if n_total < 1:
        raise AugmentationError("n_total must be >= 1")
    candidates: list[AugmentationRecord] = []
    refusals = 0
    while len(candidates) < n_total:
        try:
            lines = backend.generate(prompt.template)
        except BackendRefusal:
            refusals += 1
            if refusals > max_retries:
                warnings.warn(
                    f"generation backend exhausted after {refusals} refusals; "
                    f"returning {len(candidates)} of {n_total} candidates"
                )
                break
            continue
        refusals = 0
        for line in lines:
            line = line.strip()
            if not line:
                continue
            candidates.append(
                AugmentationRecord(
                    text=line, source=f"llm:{prompt.prompt_id}", accepted=False
                )
            )
            if len(candidates) == n_total:
                break
    return candidates


def review_filter(
    candidates: Sequence[AugmentationRecord], rejections: set[int]
) -> list[AugmentationRecord]:
    """Apply a human review pass: drop rejected indices, accept the rest."""
    for idx in rejections:
        if not 0 <= idx < len(candidates):
            raise AugmentationError(f"rejection index {idx} out of range")
    accepted = []
    for i, rec in enumerate(candidates):
        if i in rejections:
            continue
        accepted.append(
            AugmentationRecord(rec.text, rec.source, rec.origin_key, accepted=True)
        )
    return accepted


_WS = re.compile(r"\s+")


def _normalize(text: str) -> str:
    return _WS.sub(" ", text.casefold()).strip()


def dedup(
    records: Sequence[AugmentationRecord], originals: Iterable[str]
) -> list[AugmentationRecord]:
    """Drop records whose normalized text repeats an original sentence or an
    earlier record.  Conservative plumbing beyond the core protocol."""
    seen = {_normalize(t) for t in originals}
    out = []
    for rec in records:
        key = _normalize(rec.text)
        if key in seen:
            continue
        seen.add(key)
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# Fixture-file helpers

def write_fixture_line(stream: IO[str], request: dict, response: str) -> None:
    stream.write(
        json.dumps({"request": request, "response": response}, ensure_ascii=False)
        + "\n"
    )
