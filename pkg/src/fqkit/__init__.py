"""Desk-scale toolkit for knowledge-driven follow-up question generation.

Subpackages cover the full pipeline: a knowledge-graph triple store with
entity linking (`fqkit.kg`), a dialogue corpus model (`fqkit.corpus`),
differentiable building blocks with exact analytic gradients (`fqkit.nn`),
translation-based KG embedding training (`fqkit.embeddings`), knowledge
selection models (`fqkit.selection`), prompt construction and a rule-based
question realizer (`fqkit.generation`), reference-free quality scores
(`fqkit.gricean`), reference metrics (`fqkit.metrics`), and a deterministic
command-line orchestrator (`fqkit.cli`).
"""

__version__ = "0.1.0"
