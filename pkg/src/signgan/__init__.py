"""Pose-guided sign language frame synthesis.

A frozen semantic parser labels the signer's input frame, a parsing
predictor moves that layout into the target pose, and a dual-encoder
generator renders the signer in the new pose. Training weights the
generator's L1 term with a periodic cosine schedule.
"""

__version__ = "0.1.0"
