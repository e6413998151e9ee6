"""Free-will arbitrary time (FwAT) consensus protocols: laws, simulation and checks."""

__version__ = "0.1.0"
