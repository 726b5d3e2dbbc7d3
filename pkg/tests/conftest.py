import json
import random

import pytest

from hrvdetect.corpus import Sentence

POSITIVE_VOCAB = [
    "пытки", "расстрел", "казнены", "пленных", "обстрела", "разрушен",
    "погибли", "мирных", "жителей", "издевательства", "казнь", "убиты",
]
NEGATIVE_VOCAB = [
    "сегодня", "солнечно", "рынок", "открылся", "поезд", "прибыл",
    "концерт", "вечером", "погода", "дождь", "магазин", "работает",
    "новости", "спорт", "команда", "выиграла", "цены", "выросли",
    "дорога", "закрыта", "школа", "праздник", "музей", "выставка",
]


def make_positive_sentence(rng: random.Random) -> str:
    words = rng.sample(POSITIVE_VOCAB, rng.randint(4, 6))
    return " ".join(words).capitalize() + "."


def make_negative_sentence(rng: random.Random) -> str:
    words = rng.sample(NEGATIVE_VOCAB, rng.randint(4, 7))
    return " ".join(words).capitalize() + "."


def make_synthetic_corpus(
    n_posts: int = 40,
    sentences_per_post: tuple[int, int] = (4, 6),
    positive_fraction: float = 0.1,
    n_channels: int = 4,
    seed: int = 13,
):
    """Synthetic labeled corpus: (export_jsonl_text, labels keyed by
    (channel_id, post_id, sent_index)).

    Sentences are single-period so segmentation reproduces the generator's
    sentence boundaries exactly.
    """
    rng = random.Random(seed)
    lines = []
    labels: dict[tuple[str, int, int], int] = {}
    affiliations = ["russia", "ukraine", "unclear"]
    for pid in range(n_posts):
        channel = f"ch{pid % n_channels}"
        n_sents = rng.randint(*sentences_per_post)
        sents, sent_labels = [], []
        for _ in range(n_sents):
            if rng.random() < positive_fraction:
                sents.append(make_positive_sentence(rng))
                sent_labels.append(1)
            else:
                sents.append(make_negative_sentence(rng))
                sent_labels.append(0)
        for idx, lab in enumerate(sent_labels):
            labels[(channel, pid, idx)] = lab
        lines.append(
            json.dumps(
                {
                    "channel_id": channel,
                    "affiliation": affiliations[pid % 3],
                    "post_id": pid,
                    "date": "2022-05-01T12:00:00+00:00",
                    "text": " ".join(sents),
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n", labels


def make_sentences(n: int, positive_idx: set[int], channel: str = "c", seed: int = 5):
    """n labeled sentences spread over posts of ~4 sentences each."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        text = (
            make_positive_sentence(rng) if i in positive_idx else make_negative_sentence(rng)
        )
        out.append(
            (Sentence(post_id=i // 4, channel_id=channel, sent_index=i % 4, text=text), int(i in positive_idx))
        )
    return out


@pytest.fixture
def synthetic_corpus():
    return make_synthetic_corpus()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
        report.outcome, report.outcome.upper()
    )
    print(f"\nACCEPTANCE {item.name}: {status} ({report.duration:.2f}s)")
