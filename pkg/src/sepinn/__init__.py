"""Singularity enriched physics-informed neural networks.

Solves elliptic boundary value problems whose solutions have corner or edge
singularities by splitting u = w + (enrichment): a small tanh network learns
the smooth remainder w while the known singular behaviour is carried by
explicit functions r^lambda * trig(lambda*theta), localised by a cutoff and
weighted by trainable coefficients.
"""

__version__ = "0.1.0"
