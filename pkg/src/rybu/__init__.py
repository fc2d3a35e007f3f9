"""Rybu: an imperative client-server modeling language, a compiler to
message-passing state machines, and an explicit-state deadlock verifier."""

__version__ = "0.1.0"
