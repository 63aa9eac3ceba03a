from typing import Optional

import numpy as np

from ..errors import DimensionMismatch, NoValidPixels

PSNR_CAP = 99.0
_MIN_MSE = 1e-10


def psnr(a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """10 log10(1 / MSE) over [0, 1] channels, capped at 99 dB"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare images of shape {a.shape} and {b.shape}")
    squared = np.square(a - b)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise NoValidPixels("empty PSNR mask")
        squared = squared[mask]
    mse = float(squared.mean())
    if mse < _MIN_MSE:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(1.0 / mse)))


def mean_depth_error(depth: np.ndarray, reference: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Mean |depth - reference| over pixels where both are finite (and inside ``mask``)"""
    if depth.shape != reference.shape:
        raise DimensionMismatch(f"depth {depth.shape} vs reference {reference.shape}")
    valid = np.isfinite(depth) & np.isfinite(reference)
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    if not valid.any():
        raise NoValidPixels("no pixel has both depths")
    return float(np.abs(depth[valid] - reference[valid]).mean())


def depth_accuracy(depth: np.ndarray, reference: np.ndarray, mask: np.ndarray, rel_tol: float = 0.01) -> float:
    """Fraction of masked pixels with finite depth within ``rel_tol`` relative error"""
    valid = np.asarray(mask, dtype=bool) & np.isfinite(depth) & np.isfinite(reference) & (reference > 0)
    if not valid.any():
        raise NoValidPixels("no pixel to score")
    return float(np.mean(np.abs(depth[valid] - reference[valid]) <= rel_tol * reference[valid]))


def normal_accuracy(normals: np.ndarray, reference: np.ndarray, mask: np.ndarray, max_degrees: float = 5.0) -> float:
    """Fraction of masked pixels whose normal is within ``max_degrees`` of the reference"""
    norm_a = np.linalg.norm(normals, axis=-1)
    norm_b = np.linalg.norm(reference, axis=-1)
    valid = np.asarray(mask, dtype=bool) & (norm_a > 0) & (norm_b > 0)
    if not valid.any():
        raise NoValidPixels("no pixel to score")
    cosine = np.einsum("nc,nc->n", normals[valid], reference[valid]) / (norm_a[valid] * norm_b[valid])
    return float(np.mean(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))) <= max_degrees))
