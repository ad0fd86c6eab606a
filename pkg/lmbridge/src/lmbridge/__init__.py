"""Language-model bridge for the follow-up question toolkit.

Communicates with the toolkit purely through files: reads its questions
and fine-tune export formats, writes its external clarity/coherence
score formats. Ships two desk-scale backbones, a small trainable causal
LM (`lmbridge.causal`) and a fixed next-sentence scorer
(`lmbridge.nsp`); any stronger model can fill the same files through
the same schemas.
"""

__version__ = "0.1.0"
