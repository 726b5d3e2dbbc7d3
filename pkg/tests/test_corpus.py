import io
import json

import pytest
from hypothesis import given, strategies as st

from hrvdetect import corpus


def record(channel="a", post_id=1, text="Привет мир.", affiliation="russia",
           date="2022-03-01T00:00:00+00:00"):
    return json.dumps(
        {"channel_id": channel, "affiliation": affiliation, "post_id": post_id,
         "date": date, "text": text},
        ensure_ascii=False,
    )


class TestIngest:
    def test_three_valid_lines(self):
        lines = [record(post_id=i) for i in range(3)]
        corp = corpus.ingest_export(lines)
        assert len(corp) == 3
        assert corp.rejected == 0
        assert corp.duplicates == 0

    def test_duplicates_collapse_to_first(self):
        lines = [record(post_id=1, text="Первый."), record(post_id=2),
                 record(post_id=1, text="Второй.")]
        corp = corpus.ingest_export(lines)
        assert len(corp) == 2
        assert corp.duplicates == 1
        assert corp.posts[("a", 1)].text == "Первый."

    def test_malformed_line_skipped_not_fatal(self):
        lines = [record(post_id=1), "{not json", record(post_id=2),
                 json.dumps({"channel_id": "a"})]
        corp = corpus.ingest_export(lines)
        assert len(corp) == 2
        assert corp.rejected == 2

    def test_empty_text_rejected(self):
        corp = corpus.ingest_export([record(text="   ")])
        assert len(corp) == 0
        assert corp.rejected == 1

    def test_unreadable_stream_is_fatal(self):
        class Broken:
            def __iter__(self):
                raise OSError("disk gone")

        with pytest.raises(corpus.CorpusError):
            corpus.ingest_export(Broken())

    def test_idempotent_over_same_file(self):
        lines = [record(post_id=i) for i in range(5)]
        once = corpus.ingest_export(lines)
        twice = corpus.ingest_export(lines + lines)
        assert once.posts.keys() == twice.posts.keys()

    def test_95_channel_fixture_stats(self):
        lines = [
            record(channel=f"ch{c}", post_id=p)
            for c in range(95)
            for p in range(3)
        ]
        corp = corpus.ingest_export(lines)
        stats = corpus.corpus_stats(corp)
        assert stats.n_channels == 95

    def test_out_of_window_kept_but_flagged(self):
        corp = corpus.ingest_export([record(date="2021-01-01T00:00:00+00:00")])
        post = next(iter(corp.posts.values()))
        assert not post.in_window


class TestSegment:
    def test_two_terminal_periods(self):
        sents = corpus.segment_post("Он ушел. Она осталась.")
        assert [s.text for s in sents] == ["Он ушел.", "Она осталась."]

    def test_abbreviation_period_is_not_boundary(self):
        sents = corpus.segment_post("г. Киев обстрелян.", {"г."})
        assert len(sents) == 1

    def test_no_terminal_punctuation(self):
        text = "просто текст без точки"
        sents = corpus.segment_post(text)
        assert len(sents) == 1
        assert sents[0].text == text

    def test_empty_input_error(self):
        with pytest.raises(corpus.EmptyInputError):
            corpus.segment_post("   ")

    def test_indices_contiguous(self):
        sents = corpus.segment_post("Раз. Два! Три? Четыре…")
        assert [s.sent_index for s in sents] == list(range(len(sents)))

    def test_exclamation_question_ellipsis(self):
        sents = corpus.segment_post("Ужас! Правда? Да…")
        assert len(sents) == 3

    def test_decimal_number_not_split(self):
        sents = corpus.segment_post("Цена 12.5 рубля сегодня.")
        assert len(sents) == 1

    @given(st.text(alphabet="абвг .!?…", min_size=1).filter(lambda t: t.strip()))
    def test_segmentation_total_and_covering(self, text):
        sents = corpus.segment_post(text, set())
        assert len(sents) >= 1
        joined = "".join(s.text for s in sents)
        assert sorted(joined.replace(" ", "")) == sorted(text.replace(" ", ""))


class TestSample:
    def _corpus(self, channels=3, posts=40):
        lines = [
            record(channel=f"ch{c}", post_id=p)
            for c in range(channels)
            for p in range(posts)
        ]
        return corpus.ingest_export(lines)

    def test_full_scale_arithmetic(self):
        corp = self._corpus(channels=95, posts=31)
        assert len(corpus.sample_posts(corp, 30, seed=1)) == 95 * 30

    def test_exhaustion_returns_all(self):
        corp = self._corpus(channels=1, posts=5)
        assert len(corpus.sample_posts(corp, 30, seed=1)) == 5

    def test_same_seed_same_selection(self):
        corp = self._corpus()
        a = corpus.sample_posts(corp, 10, seed=42)
        b = corpus.sample_posts(corp, 10, seed=42)
        assert [p.key for p in a] == [p.key for p in b]

    def test_different_seed_differs(self):
        corp = self._corpus()
        a = corpus.sample_posts(corp, 10, seed=1)
        b = corpus.sample_posts(corp, 10, seed=2)
        assert {p.key for p in a} != {p.key for p in b}

    def test_empty_corpus_error(self):
        with pytest.raises(corpus.EmptyInputError):
            corpus.sample_posts(corpus.Corpus(), 5, seed=0)


class TestStats:
    def test_mean_posts_per_channel(self):
        lines = [record(channel="a", post_id=p) for p in range(4)]
        lines += [record(channel="b", post_id=p, affiliation="ukraine") for p in range(6)]
        stats = corpus.corpus_stats(corpus.ingest_export(lines))
        assert stats.mean_posts_per_channel == 5.0

    def test_single_short_post(self):
        stats = corpus.corpus_stats(corpus.ingest_export([record(text="а б в")]))
        assert stats.mean_sentence_len_words == 3.0
        assert stats.mode_sentence_len_words == 3

    def test_affiliation_counts_partition(self):
        lines = [record(channel="a", affiliation="russia"),
                 record(channel="b", affiliation="ukraine"),
                 record(channel="c", affiliation="unclear"),
                 record(channel="d", affiliation="unclear")]
        stats = corpus.corpus_stats(corpus.ingest_export(lines))
        assert sum(stats.affiliation_counts.values()) == stats.n_channels == 4

    def test_empty_corpus_error(self):
        with pytest.raises(corpus.EmptyInputError):
            corpus.corpus_stats(corpus.Corpus())


class TestSentenceFile:
    def test_round_trip(self):
        sents = corpus.segment_post("Раз. Два.")
        sents = [corpus.Sentence(7, "ch", s.sent_index, s.text) for s in sents]
        buf = io.StringIO()
        corpus.write_sentences(sents, buf, labels={("ch", 7, 0): 1})
        buf.seek(0)
        back = list(corpus.read_sentences(buf))
        assert [s.text for s, _ in back] == [s.text for s in sents]
        assert back[0][1] == 1
        assert back[1][1] is None
