"""Hierarchical temporal pruning for diffusion-based 3-D pose lifting.

Deterministic, double-precision reference implementation: temporal mask
construction, mask-restricted attention, mask-guided frame pruning, DDIM
multi-hypothesis sampling, and an analytic MACs profiler.
"""

__version__ = "0.1.0"
