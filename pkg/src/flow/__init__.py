"""Volume-constrained gradient flow, remeshing and radial annulus solutions."""
