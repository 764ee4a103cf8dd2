"""Deterministic mini-game engines with explicit world state, plus the
spatial/numeric consistency toolkit built around them."""

__version__ = "0.1.0"
