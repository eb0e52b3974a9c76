"""Excess, monotonicity, Topping, Willmore and shape census checks."""
