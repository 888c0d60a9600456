"""Multimodal fake-news detection: knowledge-enriched text, contrastively
aligned text/image features, cross-modal interaction, adaptive fusion."""

__version__ = "0.1.0"
