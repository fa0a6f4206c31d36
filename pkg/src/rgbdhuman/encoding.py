"""Three-channel depth encodings: DG, CE, CD and CECD.

DG replicates the normalized gray image, CE equalizes it first. CD maps
the gray level through a reversed jet colormap (near = red, far = blue),
and CECD equalizes before the colormap. Invalid pixels are black in every
scheme.
"""
from __future__ import annotations

import enum

import numpy as np

from .depthimage import as_depth, equalize, normalize, round_half_away


class EncodingScheme(str, enum.Enum):
    DG = "dg"
    CE = "ce"
    CD = "cd"
    CECD = "cecd"

    @classmethod
    def parse(cls, name) -> "EncodingScheme":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown encoding {name!r}; choose one of {choices}") from None


# jet(u) per channel: clamp(1.5 - |4u - a|, 0, 1)
_JET_CENTRES = np.array([3.0, 2.0, 1.0])


def _reversed_jet_float(t) -> np.ndarray:
    u = 1.0 - np.asarray(t, dtype=float)[..., None]
    return np.clip(1.5 - np.abs(4.0 * u - _JET_CENTRES), 0.0, 1.0)


def reversed_jet(t: float) -> tuple[int, int, int]:
    """RGB triple (0-255) of the reversed jet colormap at ``t`` in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"colormap input must lie in [0, 1], got {t}")
    rgb = round_half_away(255.0 * _reversed_jet_float(t))
    return tuple(int(c) for c in rgb)


# lookup table indexed by 8-bit gray level, t = level / 255
JET_LUT = round_half_away(255.0 * _reversed_jet_float(np.arange(256) / 255.0)).astype(np.uint8)


def replicate(gray: np.ndarray) -> np.ndarray:
    return np.repeat(np.asarray(gray, dtype=np.uint8)[..., None], 3, axis=-1)


def colorize(gray: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Reversed-jet colouring of a gray image; invalid pixels stay black."""
    out = JET_LUT[np.asarray(gray, dtype=np.uint8)]
    out[~np.asarray(valid, dtype=bool)] = 0
    return out


def gray_channel(img, scheme, depth_range=None) -> np.ndarray:
    """The 8-bit gray image that the scheme replicates or colours."""
    scheme = EncodingScheme.parse(scheme)
    gray = normalize(img, depth_range)
    if scheme in (EncodingScheme.CE, EncodingScheme.CECD):
        gray = equalize(gray, np.asarray(img) > 0)
    return gray


def encode(img, scheme, depth_range=None) -> np.ndarray:
    """Encode a depth image into a (height, width, 3) ``uint8`` RGB image."""
    scheme = EncodingScheme.parse(scheme)
    d = as_depth(img)
    gray = gray_channel(d, scheme, depth_range)
    if scheme in (EncodingScheme.DG, EncodingScheme.CE):
        return replicate(gray)
    return colorize(gray, d > 0)
