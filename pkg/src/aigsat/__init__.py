"""And-inverter graph tooling and a learned conditional-probability SAT sampler."""

__version__ = "0.1.0"
