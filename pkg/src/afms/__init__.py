"""Amplitude-and-frequency-modulated sinusoid (AFMS) modelling of EEG-like signals."""

__version__ = "0.1.0"
