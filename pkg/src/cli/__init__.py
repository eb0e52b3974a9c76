"""Batch driver: configuration, experiment dispatch and artifact export."""
