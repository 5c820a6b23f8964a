"""Burst-mode CPM synchronization simulator.

Modules:
    cpm        CPM schemes, pulses, modulator, preamble, autocorrelation
    channel    offset + AWGN burst channel, deterministic seeding
    estimator  joint ML frequency/timing/phase estimator + exact-LLF oracle
    framesync  SoS detection (sliding GLRT) and SoS estimation
    demod      CPM trellis, Viterbi demodulator, phase tracker, UW alignment
    analysis   phase-approximation error and pulse-lag verification
    harness    Monte Carlo experiment driver and CSV emission
"""

from . import analysis, channel, cpm, demod, estimator, framesync, harness

__all__ = ["analysis", "channel", "cpm", "demod", "estimator", "framesync", "harness"]
__version__ = "0.1.0"
