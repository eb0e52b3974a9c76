"""Newtonian potential, nonlocal energy and boundary kernel matrices."""
