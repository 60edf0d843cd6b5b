"""Desk-scale visuo-tactile manipulation stack.

Slow-fast control built from a tactile codec, a latent world model, a gated
diffusion policy, and a 60 Hz reflexive corrector, all validated inside a
deterministic 2-D contact simulator with a synthetic marker-grid sensor.
"""

__version__ = "0.1.0"
