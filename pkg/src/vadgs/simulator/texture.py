"""Seeded, octave-summed value noise used as surface texture."""
import numpy as np

_LATTICE = 256
_OCTAVES = 4


def _lattice(seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, _LATTICE])))
    return rng.random((_OCTAVES, _LATTICE, _LATTICE))


def _smoothstep(x: np.ndarray) -> np.ndarray:
    return x * x * (3.0 - 2.0 * x)


def value_noise(u: np.ndarray, v: np.ndarray, seed: int) -> np.ndarray:
    """Noise in [0, 1] at continuous texture coordinates (one lattice cell per unit)"""
    lattice = _lattice(seed)
    total = np.zeros(np.shape(u))
    weight_sum = 0.0
    for octave in range(_OCTAVES):
        frequency = 2.0 ** octave
        weight = 0.5 ** octave
        x, y = np.asarray(u) * frequency, np.asarray(v) * frequency
        x0, y0 = np.floor(x), np.floor(y)
        fx, fy = _smoothstep(x - x0), _smoothstep(y - y0)
        i0 = x0.astype(np.int64) % _LATTICE
        j0 = y0.astype(np.int64) % _LATTICE
        i1, j1 = (i0 + 1) % _LATTICE, (j0 + 1) % _LATTICE
        grid = lattice[octave]
        top = grid[j0, i0] * (1 - fx) + grid[j0, i1] * fx
        bottom = grid[j1, i0] * (1 - fx) + grid[j1, i1] * fx
        total += weight * (top * (1 - fy) + bottom * fy)
        weight_sum += weight
    return total / weight_sum


def surface_color(u: np.ndarray, v: np.ndarray, seed: int, scale: float, base_color, contrast: float) -> np.ndarray:
    """Texture color (..., 3) at surface coordinates in meters"""
    noise = value_noise(np.asarray(u) / scale, np.asarray(v) / scale, seed)
    shade = 1.0 + contrast * (noise - 0.5) * 2.0
    return np.clip(shade[..., None] * np.asarray(base_color, dtype=np.float64), 0.0, 1.0)
