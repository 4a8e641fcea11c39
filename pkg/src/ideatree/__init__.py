"""Inference-time search orchestration and evaluation for LLM code generation."""

__version__ = "0.1.0"
