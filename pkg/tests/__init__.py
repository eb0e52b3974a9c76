"""Tests for the nonlocal isoperimetric toolkit."""
