"""cone-kernel - asymptotics of the conical singular kernel K_a on the Fourier side."""

__version__ = "0.1.0"
