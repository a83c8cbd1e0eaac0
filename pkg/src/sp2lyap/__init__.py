"""Transfer matrices, sp_2(R) span certificates and Lyapunov spectra for a
two-channel continuous Anderson-Bernoulli model."""

__version__ = "0.1.0"
