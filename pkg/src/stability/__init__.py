"""Second variation assembly, constrained spectra and analytic mode oracles."""
