#!/usr/bin/env python3
"""Reference SSIM values from scikit-image for the frozen test images.

Settings: Gaussian weights (sigma 1.5, 11x11), population covariance,
data range 1, mean over fully-contained windows only."""
import numpy as np
from skimage.metrics import structural_similarity


def checkerboard(size, block):
    idx = np.arange(size) // block
    return ((idx[:, None] + idx[None, :]) % 2).astype(np.float64)


def ref(a, b):
    return structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                 use_sample_covariance=False, win_size=11)


if __name__ == "__main__":
    a = checkerboard(32, 4)
    print(f"checker32_b4_inverted {ref(a, 1 - a):.12f}")
    a = checkerboard(40, 3)
    b = np.clip(0.8 * a + 0.1 + 0.05 * np.sin(np.arange(40))[None, :], 0, 1)
    print(f"checker40_b3_affine {ref(a, b):.12f}")
