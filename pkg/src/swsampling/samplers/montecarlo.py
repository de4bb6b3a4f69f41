"""I.i.d. uniform directions and random orthonormal frames."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidDimension, SizeError
from ..sphere import DirectionSet, Kind, SamplerSpec, gaussian_directions


def _check(m: int, d: int) -> None:
    if m < 1:
        raise SizeError(f"need at least one direction, got M={m}")
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")


def sample_uniform(m: int, d: int, rng: np.random.Generator) -> DirectionSet:
    """``m`` i.i.d. uniform directions on ``S^{d-1}``."""
    _check(m, d)
    return DirectionSet(gaussian_directions(m, d, rng), SamplerSpec(Kind.UNIFORM))


def haar_orthogonal(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed orthogonal matrix (or a stack of ``size`` of them).

    QR of a Gaussian matrix, with the columns of Q flipped so that R has a
    positive diagonal; without the flip plain QR is not Haar.
    """
    shape = (d, d) if size is None else (size, d, d)
    z = rng.standard_normal(shape)
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return q * signs[..., None, :]


def sample_orthonormal(m: int, d: int, rng: np.random.Generator) -> DirectionSet:
    """Columns of ``ceil(m/d)`` independent Haar frames, truncated to ``m``.

    Each direction is marginally uniform; directions inside one frame are
    mutually orthogonal. No standard error is attached because there is no
    variance estimate that accounts for the within-frame dependence.
    """
    _check(m, d)
    blocks = -(-m // d)
    frames = haar_orthogonal(d, rng, size=blocks)
    # columns of each frame become consecutive rows
    dirs = np.swapaxes(frames, 1, 2).reshape(blocks * d, d)[:m]
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return DirectionSet(dirs, SamplerSpec(Kind.ORTHONORMAL))
