"""Command-line entry point wiring the pipeline stages.

Config precedence: built-in defaults < config file (--config / HRVDETECT_CONFIG)
< command-line flags.  The effective parameters of every command that writes
an output are snapshotted next to that output for provenance.  Outputs are
written atomically (temp file + rename); logs go to stderr as line-delimited
JSON records.
"""

from __future__ import annotations

import io
import json
import os
import sys
import tempfile
from pathlib import Path

import click

from . import annotation, augmentation, baseline, corpus, datasets, evaluation, model


def log(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}, ensure_ascii=False), file=sys.stderr)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def snapshot_config(output: Path, command: str, params: dict) -> None:
    atomic_write_text(
        output.with_suffix(output.suffix + ".config.json"),
        json.dumps({"command": command, "params": params}, indent=2, default=str),
    )


def fail(message: str, **fields) -> None:
    log("error", message=message, **fields)
    sys.exit(1)


def _load_config_file(ctx: click.Context, path: str | None) -> None:
    path = path or os.environ.get("HRVDETECT_CONFIG")
    if not path:
        return
    try:
        defaults = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config file {path}: {exc}")
    ctx.default_map = defaults


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file with per-command default options.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Sentence-level detection of human-rights-violation mentions."""
    _load_config_file(ctx, config_path)


def _read_labeled(path: str):
    with open(path, encoding="utf-8") as fh:
        return list(corpus.read_sentences(fh))


def _sentences_text(pairs) -> str:
    lines = []
    for sent, _ in pairs:
        rec = {
            "channel_id": sent.channel_id,
            "post_id": sent.post_id,
            "sent_index": sent.sent_index,
            "text": sent.text,
            "source": sent.source,
        }
        lines.append(rec)
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in lines)


def _labeled_text(pairs) -> str:
    out = []
    for sent, label in pairs:
        rec = {
            "channel_id": sent.channel_id,
            "post_id": sent.post_id,
            "sent_index": sent.sent_index,
            "text": sent.text,
            "source": sent.source,
        }
        if label is not None:
            rec["label"] = label
        out.append(json.dumps(rec, ensure_ascii=False) + "\n")
    return "".join(out)


# ---------------------------------------------------------------------------
# corpus stages


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
def ingest(input_path: str, output_path: str) -> None:
    """Ingest a channel export into a canonical corpus file."""
    try:
        with open(input_path, encoding="utf-8") as fh:
            corp = corpus.ingest_export(fh)
    except corpus.CorpusError as exc:
        fail(str(exc), stage="ingest")
    lines = []
    for key in sorted(corp.posts):
        post = corp.posts[key]
        lines.append(
            json.dumps(
                {
                    "channel_id": post.channel_id,
                    "affiliation": post.affiliation,
                    "post_id": post.post_id,
                    "date": post.date.isoformat(),
                    "text": post.text,
                },
                ensure_ascii=False,
            )
            + "\n"
        )
    out = Path(output_path)
    atomic_write_text(out, "".join(lines))
    snapshot_config(out, "ingest", {"input": input_path})
    log("ingest", posts=len(corp), rejected=corp.rejected, duplicates=corp.duplicates)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--abbreviations", type=click.Path(exists=True), default=None,
              help="Override the shipped abbreviation lexicon.")
def segment(corpus_path: str, output_path: str, abbreviations: str | None) -> None:
    """Segment corpus posts into sentences."""
    with open(corpus_path, encoding="utf-8") as fh:
        corp = corpus.ingest_export(fh)
    lexicon = None
    if abbreviations:
        lexicon = {
            line.strip().casefold()
            for line in Path(abbreviations).read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        }
    sentences = corpus.segment_corpus(corp, lexicon)
    out = Path(output_path)
    atomic_write_text(out, _sentences_text((s, None) for s in sentences))
    snapshot_config(out, "segment", {"corpus": corpus_path, "abbreviations": abbreviations})
    log("segment", posts=len(corp), sentences=len(sentences))


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--n", "n_per_channel", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
def sample(corpus_path: str, n_per_channel: int, seed: int, output_path: str) -> None:
    """Sample posts uniformly per channel."""
    with open(corpus_path, encoding="utf-8") as fh:
        corp = corpus.ingest_export(fh)
    try:
        posts = corpus.sample_posts(corp, n_per_channel, seed)
    except (corpus.CorpusError, ValueError) as exc:
        fail(str(exc), stage="sample")
    lines = [
        json.dumps(
            {
                "channel_id": p.channel_id,
                "affiliation": p.affiliation,
                "post_id": p.post_id,
                "date": p.date.isoformat(),
                "text": p.text,
            },
            ensure_ascii=False,
        )
        + "\n"
        for p in posts
    ]
    out = Path(output_path)
    atomic_write_text(out, "".join(lines))
    snapshot_config(out, "sample", {"corpus": corpus_path, "n": n_per_channel, "seed": seed})
    log("sample", sampled=len(posts))


# ---------------------------------------------------------------------------
# annotation stages


@main.command()
@click.option("--annotations", "ann_path", required=True, type=click.Path(exists=True))
@click.option("--a", "annotator_a", required=True)
@click.option("--b", "annotator_b", required=True)
def kappa(ann_path: str, annotator_a: str, annotator_b: str) -> None:
    """Inter-annotator agreement between two annotators."""
    with open(ann_path, encoding="utf-8") as fh:
        records = annotation.import_annotations(fh)
    pairs = [
        (r.labels[annotator_a], r.labels[annotator_b])
        for r in records
        if annotator_a in r.labels and annotator_b in r.labels
    ]
    if not pairs:
        fail("no items annotated by both annotators", stage="kappa")
    report = annotation.cohens_kappa([a for a, _ in pairs], [b for _, b in pairs])
    click.echo(
        json.dumps(
            {
                "n_items": report.n_items,
                "observed_agreement": report.observed_agreement,
                "chance_agreement": report.chance_agreement,
                "kappa": report.kappa,
                "degenerate": report.degenerate,
            },
            indent=2,
        )
    )


@main.command()
@click.option("--annotations", "ann_path", required=True, type=click.Path(exists=True))
@click.option("--adjudicator", required=True)
@click.option("--output", "output_path", required=True, type=click.Path())
def adjudicate(ann_path: str, adjudicator: str, output_path: str) -> None:
    """Resolve disagreements and write gold labels."""
    with open(ann_path, encoding="utf-8") as fh:
        records = annotation.import_annotations(fh)
    try:
        resolved = annotation.adjudicate(records, adjudicator)
    except annotation.AnnotationError as exc:
        fail(str(exc), stage="adjudicate")

    buf = io.StringIO()
    annotation.export_annotations(resolved, buf)
    out = Path(output_path)
    atomic_write_text(out, buf.getvalue())
    snapshot_config(out, "adjudicate", {"annotations": ann_path, "adjudicator": adjudicator})
    positives = sum(1 for r in resolved if r.gold == 1)
    log("adjudicate", records=len(resolved), positives=positives)


# ---------------------------------------------------------------------------
# dataset stages


@main.command()
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--ratio", default=0.8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
def split(sent_path: str, ratio: float, seed: int, output_path: str) -> None:
    """Post-level train/test split over a labeled sentence file."""
    pairs = _read_labeled(sent_path)
    post_keys = sorted({s.post_key for s, _ in pairs})
    try:
        result = datasets.split_posts(post_keys, ratio, seed)
    except datasets.DatasetError as exc:
        fail(str(exc), stage="split")

    buf = io.StringIO()
    datasets.write_split(result, buf)
    out = Path(output_path)
    atomic_write_text(out, buf.getvalue())
    snapshot_config(out, "split", {"sentences": sent_path, "ratio": ratio, "seed": seed})
    log("split", train=len(result.train_post_keys), test=len(result.test_post_keys))


# ---------------------------------------------------------------------------
# augmentation stages


@main.group()
def augment() -> None:
    """Back-translation and LLM augmentation of positive examples."""


def _backend_from_options(fixture: str | None):
    if fixture:
        with open(fixture, encoding="utf-8") as fh:
            return augmentation.FixtureBackend(fh)
    return augmentation.IdentityBackend()


@augment.command("bt")
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--chains", default="1,2,3,4,5", show_default=True)
@click.option("--fixture", type=click.Path(exists=True), default=None,
              help="Recorded translation fixture; identity backend if omitted.")
@click.option("--output", "output_path", required=True, type=click.Path())
def augment_bt(sent_path: str, chains: str, fixture: str | None, output_path: str) -> None:
    """Back-translate the positive sentences through the configured chains."""
    pairs = _read_labeled(sent_path)
    positives = [s for s, label in pairs if label == 1]
    if not positives:
        fail("no positive sentences in input", stage="augment-bt")
    wanted = {int(c) for c in chains.split(",") if c.strip()}
    selected = [c for c in augmentation.DEFAULT_CHAINS if c.chain_id in wanted]
    backend = _backend_from_options(fixture)
    records, failures = augmentation.run_bt_campaign(positives, selected, backend)
    lines = []
    for rec in records:
        cid, pid, sidx = rec.origin_key
        lines.append(
            json.dumps(
                {
                    "channel_id": cid,
                    "post_id": pid,
                    "sent_index": sidx,
                    "text": rec.text,
                    "source": rec.source,
                    "label": 1,
                },
                ensure_ascii=False,
            )
            + "\n"
        )
    out = Path(output_path)
    atomic_write_text(out, "".join(lines))
    snapshot_config(out, "augment bt", {"sentences": sent_path, "chains": chains, "fixture": fixture})
    log("augment-bt", records=len(records), failures=len(failures))


@augment.command("llm")
@click.option("--prompt", "prompt_id", default="P2", show_default=True,
              type=click.Choice(sorted(augmentation.DEFAULT_PROMPTS)))
@click.option("--n", "n_total", default=510, show_default=True)
@click.option("--fixture", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
def augment_llm(prompt_id: str, n_total: int, fixture: str, output_path: str) -> None:
    """Generate candidate positive sentences from a recorded LLM fixture."""
    with open(fixture, encoding="utf-8") as fh:
        backend = augmentation.FixtureBackend(fh)
    prompt = augmentation.DEFAULT_PROMPTS[prompt_id]
    candidates = augmentation.generate_llm_examples(prompt, backend, n_total)
    lines = [
        json.dumps(
            {
                "channel_id": "llm",
                "post_id": i,
                "sent_index": 0,
                "text": rec.text,
                "source": rec.source,
                "label": 1,
            },
            ensure_ascii=False,
        )
        + "\n"
        for i, rec in enumerate(candidates)
    ]
    out = Path(output_path)
    atomic_write_text(out, "".join(lines))
    snapshot_config(out, "augment llm", {"prompt": prompt_id, "n": n_total, "fixture": fixture})
    log("augment-llm", candidates=len(candidates))


@augment.command("review")
@click.option("--candidates", "cand_path", required=True, type=click.Path(exists=True))
@click.option("--reject", default="", help="Comma-separated candidate indices to drop.")
@click.option("--output", "output_path", required=True, type=click.Path())
def augment_review(cand_path: str, reject: str, output_path: str) -> None:
    """Apply a manual review pass to generated candidates."""
    pairs = _read_labeled(cand_path)
    rejections = {int(i) for i in reject.split(",") if i.strip()}
    for idx in rejections:
        if not 0 <= idx < len(pairs):
            fail(f"rejection index {idx} out of range", stage="augment-review")
    kept = [(s, label) for i, (s, label) in enumerate(pairs) if i not in rejections]
    out = Path(output_path)
    atomic_write_text(out, _labeled_text(kept))
    snapshot_config(out, "augment review", {"candidates": cand_path, "reject": reject})
    log("augment-review", accepted=len(kept), rejected=len(rejections))


# ---------------------------------------------------------------------------
# baseline stages


@main.command("extract-keywords")
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", type=click.Path(exists=True), default=None,
              help="Restrict to train-side posts of this split manifest.")
@click.option("--k", default=30, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
def extract_keywords_cmd(sent_path: str, split_path: str | None, k: int, output_path: str) -> None:
    """Extract top-k keywords from positive-class training sentences."""
    pairs = _read_labeled(sent_path)
    if split_path:
        with open(split_path, encoding="utf-8") as fh:
            sp = datasets.read_split(fh)
        pairs = [(s, l) for s, l in pairs if s.post_key in sp.train_post_keys]
    text = "\n".join(s.text for s, label in pairs if label == 1)
    try:
        profile = baseline.extract_keywords(text, k)
    except baseline.BaselineError as exc:
        fail(str(exc), stage="extract-keywords")

    buf = io.StringIO()
    baseline.write_profile(profile, buf)
    out = Path(output_path)
    atomic_write_text(out, buf.getvalue())
    snapshot_config(out, "extract-keywords", {"sentences": sent_path, "split": split_path, "k": k})
    log("extract-keywords", keywords=len(profile.keywords))


@main.command("baseline-eval")
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--level", type=click.Choice(["sentence", "post"]), default="sentence",
              show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
def baseline_eval(sent_path: str, split_path: str, profile_path: str, level: str,
                  output_path: str) -> None:
    """Evaluate the keyword classifier on the test side of a split."""
    pairs = _read_labeled(sent_path)
    with open(split_path, encoding="utf-8") as fh:
        sp = datasets.read_split(fh)
    with open(profile_path, encoding="utf-8") as fh:
        profile = baseline.read_profile(fh)
    test_pairs = [(s, l) for s, l in pairs if s.post_key in sp.test_post_keys]
    preds = {s.key: baseline.keyword_classify(s.text, profile) for s, _ in test_pairs}
    golds = {s.key: (l or 0) for s, l in test_pairs}
    if level == "post":
        preds, golds = evaluation.rollup_posts(preds, golds)
    counts = evaluation.confusion(preds, golds)
    report = evaluation.metrics_report(counts, level, "keywords-baseline", "D1")
    out = Path(output_path)
    atomic_write_text(out, json.dumps(_report_dict(report), indent=2))
    snapshot_config(out, "baseline-eval", {"sentences": sent_path, "split": split_path,
                                           "profile": profile_path, "level": level})
    log("baseline-eval", f2=report.f2)


def _report_dict(report: evaluation.MetricsReport) -> dict:
    return {
        "model": report.model_name,
        "variant": report.variant_id,
        "level": report.level,
        "counts": {
            "tp": report.counts.tp,
            "fp": report.counts.fp,
            "fn": report.counts.fn,
            "tn": report.counts.tn,
        },
        "P": report.precision,
        "R": report.recall,
        "F1": report.f1,
        "F2": report.f2,
        "flags": report.flags,
    }


# ---------------------------------------------------------------------------
# model stages


def _variant_examples(sent_path: str, split_path: str, variant_id: str,
                      bt_path: str | None, llm_path: str | None) -> datasets.DatasetVariant:
    pairs = _read_labeled(sent_path)
    with open(split_path, encoding="utf-8") as fh:
        sp = datasets.read_split(fh)
    train_pairs = [(s, l) for s, l in pairs if s.post_key in sp.train_post_keys]
    test_keys = {s.key for s, _ in pairs if s.post_key in sp.test_post_keys}
    base = datasets.examples_from_records(train_pairs)
    bt_ex = datasets.examples_from_records(_read_labeled(bt_path)) if bt_path else []
    llm_ex = datasets.examples_from_records(_read_labeled(llm_path)) if llm_path else []
    return datasets.build_variant(base, bt_ex, llm_ex, variant_id, test_keys)


def _parse_weights(text: str) -> tuple[float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 2:
        raise click.UsageError("--weights expects two comma-separated values")
    return (parts[0], parts[1])


@main.command()
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--variant", default="D1", show_default=True,
              type=click.Choice(list(datasets.VARIANT_IDS)))
@click.option("--bt", "bt_path", type=click.Path(exists=True), default=None)
@click.option("--llm", "llm_path", type=click.Path(exists=True), default=None)
@click.option("--encoder", "encoder_name", default="tiny", show_default=True)
@click.option("--lr", default=5e-5, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--freeze", "n_freeze", default=None, type=int,
              help="Blocks to freeze; defaults to half the encoder blocks.")
@click.option("--weights", default="0.17,0.83", show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--model-dir", required=True, type=click.Path())
def train(sent_path: str, split_path: str, variant: str, bt_path: str | None,
          llm_path: str | None, encoder_name: str, lr: float, epochs: int,
          n_freeze: int | None, weights: str, batch_size: int, seed: int,
          model_dir: str) -> None:
    """Fine-tune the classifier on a training variant."""
    spec = model.TINY_SPEC if encoder_name == "tiny" else model.REFERENCE_SPEC
    if n_freeze is None:
        n_freeze = spec.n_blocks // 2
    try:
        config = model.TrainingConfig(
            learning_rate=lr, epochs=epochs, class_weights=_parse_weights(weights),
            n_freeze=n_freeze, batch_size=batch_size, seed=seed,
        )
        var = _variant_examples(sent_path, split_path, variant, bt_path, llm_path)
        clf = model.build_classifier(spec, config)
        model.train(clf, var.examples, config)
    except (model.ModelError, datasets.DatasetError) as exc:
        fail(str(exc), stage="train")
    model.save_model(clf, model_dir)
    snapshot_config(Path(model_dir) / "model.json", "train", {
        "sentences": sent_path, "split": split_path, "variant": variant,
        "encoder": encoder_name, "lr": lr, "epochs": epochs, "freeze": n_freeze,
        "weights": weights, "batch_size": batch_size, "seed": seed,
    })
    log("train", examples=len(var.examples), final_loss=clf.history[-1])


@main.command("cross-validate")
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--variant", default="D1", show_default=True,
              type=click.Choice(list(datasets.VARIANT_IDS)))
@click.option("--bt", "bt_path", type=click.Path(exists=True), default=None)
@click.option("--llm", "llm_path", type=click.Path(exists=True), default=None)
@click.option("--k", default=5, show_default=True)
@click.option("--grid-weights", default="0.5,0.5;0.2,0.8;0.17,0.83", show_default=True,
              help="Semicolon-separated class-weight pairs to try.")
@click.option("--lr", default=5e-5, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
def cross_validate_cmd(sent_path: str, split_path: str, variant: str,
                       bt_path: str | None, llm_path: str | None, k: int,
                       grid_weights: str, lr: float, epochs: int, seed: int,
                       output_path: str) -> None:
    """k-fold tuning over a class-weight grid on the tiny encoder."""
    grid = [
        model.TrainingConfig(learning_rate=lr, epochs=epochs, seed=seed,
                             class_weights=_parse_weights(chunk), n_freeze=1,
                             k_folds=k)
        for chunk in grid_weights.split(";")
    ]
    try:
        var = _variant_examples(sent_path, split_path, variant, bt_path, llm_path)
        result = model.cross_validate(var.examples, model.TINY_SPEC, grid, k)
    except (model.ModelError, datasets.DatasetError) as exc:
        fail(str(exc), stage="cross-validate")
    out = Path(output_path)
    atomic_write_text(out, json.dumps({
        "best": {"class_weights": result.best_config.class_weights,
                 "learning_rate": result.best_config.learning_rate,
                 "epochs": result.best_config.epochs},
        "mean_f2": result.mean_scores,
        "fold_f2": {str(k_): v for k_, v in result.fold_scores.items()},
    }, indent=2))
    snapshot_config(out, "cross-validate", {
        "sentences": sent_path, "split": split_path, "variant": variant,
        "k": k, "grid_weights": grid_weights, "lr": lr, "epochs": epochs, "seed": seed,
    })
    log("cross-validate", best_weights=result.best_config.class_weights)


@main.command()
@click.option("--model-dir", required=True, type=click.Path(exists=True))
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", type=click.Path(exists=True), default=None,
              help="Restrict to the test side of this split manifest.")
@click.option("--output", "output_path", required=True, type=click.Path())
def predict(model_dir: str, sent_path: str, split_path: str | None, output_path: str) -> None:
    """Classify sentences with a trained model."""
    clf = model.load_model(model_dir)
    pairs = _read_labeled(sent_path)
    if split_path:
        with open(split_path, encoding="utf-8") as fh:
            sp = datasets.read_split(fh)
        pairs = [(s, l) for s, l in pairs if s.post_key in sp.test_post_keys]
    records = model.predict(clf, [s for s, _ in pairs])
    lines = [
        json.dumps(
            {
                "channel_id": rec.key[0],
                "post_id": rec.key[1],
                "sent_index": rec.key[2],
                "prob_hrv": rec.prob_hrv,
                "label": rec.label,
                "truncated": rec.truncated,
            },
            ensure_ascii=False,
        )
        + "\n"
        for rec in records
    ]
    out = Path(output_path)
    atomic_write_text(out, "".join(lines))
    snapshot_config(out, "predict", {"model_dir": model_dir, "sentences": sent_path,
                                     "split": split_path})
    log("predict", sentences=len(records), positive=sum(r.label for r in records))


@main.command()
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--sentences", "sent_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", type=click.Path(exists=True), default=None)
@click.option("--level", type=click.Choice(["sentence", "post"]), default="sentence",
              show_default=True)
@click.option("--model-name", default="model")
@click.option("--variant", default="D1")
@click.option("--output", "output_path", required=True, type=click.Path())
def evaluate(pred_path: str, sent_path: str, split_path: str | None, level: str,
             model_name: str, variant: str, output_path: str) -> None:
    """Score predictions against gold labels at sentence or post level."""
    preds: dict[tuple[str, int, int], int] = {}
    with open(pred_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            preds[(obj["channel_id"], obj["post_id"], obj["sent_index"])] = int(obj["label"])
    pairs = _read_labeled(sent_path)
    if split_path:
        with open(split_path, encoding="utf-8") as fh:
            sp = datasets.read_split(fh)
        pairs = [(s, l) for s, l in pairs if s.post_key in sp.test_post_keys]
    golds = {s.key: (l or 0) for s, l in pairs}
    try:
        if level == "post":
            p, g = evaluation.rollup_posts(preds, golds)
        else:
            p, g = preds, golds
        counts = evaluation.confusion(p, g)
    except evaluation.EvaluationError as exc:
        fail(str(exc), stage="evaluate")
    report = evaluation.metrics_report(counts, level, model_name, variant)
    out = Path(output_path)
    atomic_write_text(out, json.dumps(_report_dict(report), indent=2))
    snapshot_config(out, "evaluate", {"predictions": pred_path, "sentences": sent_path,
                                      "split": split_path, "level": level})
    log("evaluate", level=level, f2=report.f2)


@main.command()
@click.option("--metrics", "metric_paths", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path(),
              help="CSV output path; an aligned .txt is written alongside.")
def report(metric_paths: tuple[str, ...], output_path: str) -> None:
    """Combine evaluation outputs into a performance table."""
    runs = []
    for path in metric_paths:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        counts = evaluation.ConfusionCounts(**obj["counts"])
        rep = evaluation.metrics_report(counts, obj["level"], obj["model"], obj["variant"])
        runs.append((obj["model"], obj["variant"], rep))
    try:
        csv_text, table_text = evaluation.performance_report(
            runs, footnotes=[datasets.D4_DISCREPANCY_NOTE]
        )
    except evaluation.EvaluationError as exc:
        fail(str(exc), stage="report")
    out = Path(output_path)
    atomic_write_text(out, csv_text)
    atomic_write_text(out.with_suffix(".txt"), table_text)
    snapshot_config(out, "report", {"metrics": list(metric_paths)})
    log("report", runs=len(runs))

if __name__ == "__main__":
    main()
