"""Multimode resonator frequency noise from TLS baths, and the tools to measure it."""
__version__ = "0.1.0"

from .bath import BathConfig, TlsEnsemble, quiet_analog_config, sample_ensemble
from .bursts import BurstEvent, sample_burst_schedule
from .resonator import (ComplexSweep, FitResult, ResonatorParams, extract_frequency, extract_shift, fit_resonance,
                        s11_response)
from .simulate import TimeTraceSet, simulate_trace_set

__all__ = [
    "BathConfig", "BurstEvent", "ComplexSweep", "FitResult", "ResonatorParams", "TimeTraceSet", "TlsEnsemble",
    "extract_frequency", "extract_shift", "fit_resonance", "quiet_analog_config", "s11_response", "sample_burst_schedule",
    "sample_ensemble", "simulate_trace_set",
]
