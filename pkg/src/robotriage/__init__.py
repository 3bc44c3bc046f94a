"""Simulated robot pub/sub graph with fault injection, proactive stream
diagnostics, a retrieval-backed debugging agent, and an evaluation harness."""

__version__ = "0.1.0"
