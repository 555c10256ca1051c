"""Neural feedback controller training and verification for discrete-time
signal temporal logic tasks."""

__version__ = "0.1.0"
