"""Desk-scale quality assessment for AI-generated images.

Scores a generated image against its text prompt by combining a semantic
consistency branch (cross-attention between prompt embeddings) with a
frequency-aware visual quality branch (toy ViT features pooled under
contrast-sensitivity weights), regressed through a small mixture of experts.
"""

__version__ = "0.1.0"
