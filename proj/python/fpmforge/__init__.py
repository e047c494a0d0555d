"""Fourier ptychography simulation, preprocessing and reconstruction."""

from ._fpmforge import (
    FpmError,
    aligned_amplitude_rmse,
    amplitude_update,
    apply_threshold,
    check_sampling,
    detect_stray_mask,
    fft2c,
    ifft2c,
    otsu_threshold,
    reconstruct,
    run_command,
    simulate,
    threshold_bound,
    uniformity_alpha,
    weighted_subtract,
)

__all__ = [
    "FpmError",
    "aligned_amplitude_rmse",
    "amplitude_update",
    "apply_threshold",
    "check_sampling",
    "detect_stray_mask",
    "fft2c",
    "ifft2c",
    "otsu_threshold",
    "reconstruct",
    "run_command",
    "simulate",
    "threshold_bound",
    "uniformity_alpha",
    "weighted_subtract",
]
