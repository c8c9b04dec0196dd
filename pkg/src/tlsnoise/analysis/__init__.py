from .allan import AdevCurve, allan_deviation, default_taus
from .correlation import CorrelationMatrix, DetuningCurve, correlation_matrix, correlation_vs_detuning
from .detect import DetectedBurst, detect_bursts, quiet_window
from .noisefit import (NoiseModelFit, adev_model, fit_adev_model, fit_noise_model, fit_power_law,
                       psd_model)
from .spectral import NoisePsd, welch_psd
from .synth import synthesize_trace
