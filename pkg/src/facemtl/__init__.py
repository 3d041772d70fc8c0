"""facemtl: a desk-scale multi-task face analysis stack.

From-scratch autodiff tensors, a toy multi-scale encoder with MLP
fusion, a token-based bi-directional cross-attention decoder, ten task
heads, joint multi-task training on synthetic data, and an analytic
FLOPs / wall-clock latency profiler. Served over FastAPI with a thin
CLI client.
"""

__version__ = "0.1.0"
