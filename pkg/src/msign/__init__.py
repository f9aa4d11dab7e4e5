"""Ownership verification for federated learning at desk scale.

Watermark embedding across training rounds, hash-tree evidence
broadcasting, independent and recovered ownership proof, traitor tracing,
and an adversary suite, all on a small natively implemented classifier.
"""

__version__ = "0.1.0"
