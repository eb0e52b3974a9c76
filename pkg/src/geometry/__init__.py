"""Discrete boundaries, tessellation and differential-geometric operators."""
