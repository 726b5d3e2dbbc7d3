"""Acceptance suite: one test per gating criterion, each printing a
PASS/FAIL line.  Criterion 10 (full-scale score reproduction) needs the
real annotated dataset plus pretrained encoder weights and is opt-in via
environment variables; it never gates."""

import io
import json
import os
import random
import time

import numpy as np
import pytest

from hrvdetect import annotation, augmentation, corpus, datasets, evaluation, model
from hrvdetect.cli import main as cli_main
from hrvdetect.corpus import Sentence
from hrvdetect.datasets import LabeledExample

from conftest import make_synthetic_corpus
from test_annotation import brute_force_kappa
from test_evaluation import PUBLISHED_ROWS


def test_01_metric_formula_oracle():
    start = time.time()
    for _, _, p, r, f1, f2 in PUBLISHED_ROWS:
        assert abs(evaluation.f_beta_from_pr(p, r, 1.0) - f1) <= 0.015
        assert abs(evaluation.f_beta_from_pr(p, r, 2.0) - f2) <= 0.015
    assert evaluation.f_beta_from_pr(0.47, 0.82, 2.0) == pytest.approx(0.71, abs=0.005)
    assert time.time() - start < 1.0


def test_02_dataset_arithmetic_oracle():
    start = time.time()
    base = [
        LabeledExample(Sentence(i // 5, "c", i % 5, "т."), int(i < 228))
        for i in range(12554)
    ]
    positives = [ex for ex in base if ex.label == 1]
    bt = [
        LabeledExample(
            Sentence(ex.sentence.post_id, "c", ex.sentence.sent_index, "т.",
                     source=f"bt:{c}"),
            1,
            f"bt:{c}",
        )
        for ex in positives
        for c in range(1, 6)
    ]
    llm = [
        LabeledExample(Sentence(i, "llm", 0, "т.", source="llm:P2"), 1, "llm:P2")
        for i in range(510)
    ]
    assert len(bt) == 1140
    assert len(datasets.build_variant(base, bt, llm, "D2")) == 13694
    assert len(datasets.build_variant(base, bt, llm, "D3")) == 13064
    d4 = datasets.build_variant(base, bt, llm, "D4")
    assert len(d4) == 14204
    assert d4.notes, "combined-size discrepancy must be surfaced"
    assert time.time() - start < 1.0


def test_03_augmentation_campaign_property():
    start = time.time()
    positives = [
        Sentence(i, "c", 0, f"Мирных жителей расстреляли {i}.") for i in range(228)
    ]
    records, failures = augmentation.run_bt_campaign(
        positives, augmentation.DEFAULT_CHAINS, augmentation.IdentityBackend()
    )
    assert len(records) == 1140
    assert not failures
    by_key = {(r.origin_key, r.source): r.text for r in records}
    for sent in positives:
        for chain in augmentation.DEFAULT_CHAINS:
            assert by_key[(sent.key, f"bt:{chain.chain_id}")] == sent.text
    assert time.time() - start < 5.0


def test_04_partition_properties():
    rng = random.Random(0)
    for _ in range(1000):
        n = rng.randint(2, 60)
        ratio = rng.uniform(0.1, 0.9)
        seed = rng.randint(0, 2**31)
        keys = [("c", i) for i in range(n)]
        sp = datasets.split_posts(keys, ratio, seed)
        assert sp.train_post_keys.isdisjoint(sp.test_post_keys)
        assert sp.train_post_keys | sp.test_post_keys == set(keys)
        assert abs(len(sp.train_post_keys) - ratio * n) <= 1
        again = datasets.split_posts(keys, ratio, seed)
        assert again.train_post_keys == sp.train_post_keys

    # 5-fold CV partitions at post granularity
    for trial in range(50):
        n_posts = rng.randint(5, 40)
        examples = [
            LabeledExample(Sentence(pid, "c", si, "т."), 0)
            for pid in range(n_posts)
            for si in range(rng.randint(1, 4))
        ]
        folds = model.make_folds(examples, 5, seed=trial)
        all_idx = sorted(i for fold in folds for i in fold)
        assert all_idx == list(range(len(examples)))
        post_sets = [{examples[i].sentence.post_key for i in fold} for fold in folds]
        for i in range(5):
            for j in range(i + 1, 5):
                assert post_sets[i].isdisjoint(post_sets[j])
        sizes = [len(s) for s in post_sets]
        assert max(sizes) - min(sizes) <= 1
        assert model.make_folds(examples, 5, seed=trial) == folds


def test_05_gradient_check():
    start = time.time()
    rng = np.random.default_rng(123)
    weight_sets = [(0.17, 0.83), (0.2, 0.8), (0.5, 0.5)]
    eps = 1e-6
    for batch in range(100):
        weights = weight_sets[batch % 3]
        n = rng.integers(2, 9)
        logits = rng.normal(size=(n, 2)) * 4
        labels = rng.integers(0, 2, size=n)
        _, grad = model.weighted_ce_loss(logits, labels, weights, return_grad=True)
        fd = np.zeros_like(grad)
        for i in range(n):
            for j in range(2):
                lp, lm = logits.copy(), logits.copy()
                lp[i, j] += eps
                lm[i, j] -= eps
                fd[i, j] = (
                    model.weighted_ce_loss(lp, labels, weights)
                    - model.weighted_ce_loss(lm, labels, weights)
                ) / (2 * eps)
        rel = np.linalg.norm(fd - grad) / max(
            np.linalg.norm(fd), np.linalg.norm(grad)
        )
        assert rel < 1e-4
    assert time.time() - start < 10.0


def test_06_freeze_contract():
    import torch

    config = model.TrainingConfig(
        learning_rate=1e-3, epochs=1, n_freeze=1, batch_size=2, seed=0
    )
    clf = model.build_classifier(model.TINY_SPEC, config)
    before = {
        name: [p.detach().clone() for p in ps]
        for name, ps in clf.parameter_groups().items()
    }
    optimizer = torch.optim.AdamW(clf.trainable_parameters(), lr=1e-3)
    texts = ["пытки расстрел мирных", "солнечно сегодня рынок"]
    labels = torch.tensor([1, 0])
    for _ in range(10):
        logits, _ = clf.logits(texts)
        loss = model._torch_weighted_ce(logits, labels, (0.17, 0.83))
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    after = clf.parameter_groups()
    for name in clf.frozen_groups:
        for b, a in zip(before[name], after[name]):
            assert torch.equal(b, a), f"frozen group {name} changed"
    assert any(
        not torch.equal(b, a)
        for name in after
        if name not in clf.frozen_groups
        for b, a in zip(before[name], after[name])
    )


def test_07_desk_scale_end_to_end(tmp_path):
    from click.testing import CliRunner

    start = time.time()
    export_text, labels = make_synthetic_corpus(
        n_posts=40, positive_fraction=0.1, seed=13
    )
    runner = CliRunner()
    export = tmp_path / "export.jsonl"
    export.write_text(export_text, encoding="utf-8")

    r = runner.invoke(cli_main, ["ingest", "--input", str(export),
                                 "--output", str(tmp_path / "corpus.jsonl")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(cli_main, ["segment", "--corpus", str(tmp_path / "corpus.jsonl"),
                                 "--output", str(tmp_path / "sentences.jsonl")])
    assert r.exit_code == 0

    labeled = tmp_path / "labeled.jsonl"
    with open(tmp_path / "sentences.jsonl", encoding="utf-8") as fh:
        pairs = list(corpus.read_sentences(fh))
    assert 150 <= len(pairs) <= 260
    with open(labeled, "w", encoding="utf-8") as fh:
        corpus.write_sentences([s for s, _ in pairs], fh, labels=labels)

    r = runner.invoke(cli_main, ["split", "--sentences", str(labeled),
                                 "--ratio", "0.8", "--seed", "7",
                                 "--output", str(tmp_path / "split.json")])
    assert r.exit_code == 0
    r = runner.invoke(cli_main, ["train", "--sentences", str(labeled),
                                 "--split", str(tmp_path / "split.json"),
                                 "--variant", "D1", "--encoder", "tiny",
                                 "--lr", "1e-3", "--epochs", "50", "--freeze", "1",
                                 "--model-dir", str(tmp_path / "model")])
    assert r.exit_code == 0, r.output

    # training-set F2 >= 0.95 for the overfit tiny model
    clf = model.load_model(tmp_path / "model")
    with open(tmp_path / "split.json", encoding="utf-8") as fh:
        sp = datasets.read_split(fh)
    train_pairs = [(s, labels[s.key]) for s, _ in pairs if s.post_key in sp.train_post_keys]
    preds = model.predict(clf, [s for s, _ in train_pairs])
    counts = evaluation.confusion([p.label for p in preds], [l for _, l in train_pairs])
    f2_train = evaluation.f_beta(counts, 2.0)
    assert f2_train >= 0.95, f"training-set F2 {f2_train:.3f} below 0.95"

    r = runner.invoke(cli_main, ["predict", "--model-dir", str(tmp_path / "model"),
                                 "--sentences", str(labeled),
                                 "--split", str(tmp_path / "split.json"),
                                 "--output", str(tmp_path / "preds.jsonl")])
    assert r.exit_code == 0
    r = runner.invoke(cli_main, ["evaluate", "--predictions", str(tmp_path / "preds.jsonl"),
                                 "--sentences", str(labeled),
                                 "--split", str(tmp_path / "split.json"),
                                 "--level", "sentence", "--model-name", "tiny",
                                 "--variant", "D1",
                                 "--output", str(tmp_path / "metrics.json")])
    assert r.exit_code == 0
    r = runner.invoke(cli_main, ["report", "--metrics", str(tmp_path / "metrics.json"),
                                 "--output", str(tmp_path / "report.csv")])
    assert r.exit_code == 0
    assert (tmp_path / "report.csv").exists()
    assert time.time() - start < 300.0


def test_08_kappa_oracle():
    rng = random.Random(99)
    for _ in range(1000):
        n = rng.randint(1, 40)
        a = [rng.randint(0, 1) for _ in range(n)]
        b = [rng.randint(0, 1) for _ in range(n)]
        assert abs(annotation.cohens_kappa(a, b).kappa - brute_force_kappa(a, b)) < 1e-12
    a = [rng.randint(0, 1) for _ in range(20)]
    if len(set(a)) == 1:
        a[0] = 1 - a[0]
    assert annotation.cohens_kappa(a, a).kappa == 1.0
    assert annotation.cohens_kappa([1, 1, 0, 0], [1, 0, 1, 0]).kappa == 0.0


def test_09_rollup_oracle():
    rng = random.Random(7)
    for _ in range(1000):
        n_posts = rng.randint(1, 15)
        golds, preds = {}, {}
        expected_g, expected_p = {}, {}
        for pid in range(n_posts):
            n_sents = rng.randint(1, 5)
            g = [rng.randint(0, 1) for _ in range(n_sents)]
            p = [rng.randint(0, 1) for _ in range(n_sents)]
            for i in range(n_sents):
                golds[("c", pid, i)] = g[i]
                preds[("c", pid, i)] = p[i]
            expected_g[("c", pid)] = int(any(g))
            expected_p[("c", pid)] = int(any(p))
        post_preds, post_golds = evaluation.rollup_posts(preds, golds)
        assert post_golds == expected_g
        assert post_preds == expected_p

    # 45 positive test sentences distributed into 25 posts
    golds = {}
    remaining = 45
    for pid in range(25):
        take = min(remaining - (24 - pid), 2) if pid < 20 else 1
        take = max(take, 1)
        for i in range(take):
            golds[("c", pid, i)] = 1
        golds[("c", pid, take)] = 0
        remaining -= take
    assert sum(golds.values()) == 45
    _, post_golds = evaluation.rollup_posts(golds, golds)
    assert sum(post_golds.values()) == 25


@pytest.mark.skipif(
    not (os.environ.get("HRV_ANNOTATED_DATASET") and os.environ.get("HRV_ENCODER_WEIGHTS")),
    reason="optional full-scale criterion: requires the released annotated "
    "dataset (HRV_ANNOTATED_DATASET) and pretrained encoder weights "
    "(HRV_ENCODER_WEIGHTS); non-gating",
)
def test_10_full_scale_reproduction_optional():
    raise NotImplementedError(
        "full-scale pretrained-encoder adapter is an optional external "
        "integration; target test-set F2 within +/-0.05 of 0.71"
    )
