"""Nonlocal isoperimetric energy and first-variation quantities."""
