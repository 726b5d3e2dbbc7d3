"""Sentence-level detection of human-rights-violation mentions in
Russian/Ukrainian social-media posts: corpus tooling, annotation workflow,
augmentation, keyword baseline, fine-tuning harness, and evaluation."""

__version__ = "0.1.0"
