"""powpos_lab package.

Hybrid PoW/PoS consensus laboratory. The CLI lives in `powpos_lab.cli:app`.
Run via: `uv run powpos ...` or `python -m powpos_lab.cli ...`.
"""

__all__ = []
