"""Analysis windows shared by the spectral estimator and the Doppler stage."""

from __future__ import annotations

from enum import Enum

import numpy as np


class WindowKind(Enum):
    RECTANGLE = "rectangle"
    HAMMING = "hamming"
    BLACKMAN = "blackman"


WINDOW_TAGS = {WindowKind.RECTANGLE: 0, WindowKind.HAMMING: 1,
               WindowKind.BLACKMAN: 2}


def window(kind: WindowKind, length: int) -> np.ndarray:
    if kind is WindowKind.RECTANGLE:
        return np.ones(length)
    if kind is WindowKind.HAMMING:
        return np.hamming(length)
    if kind is WindowKind.BLACKMAN:
        return np.blackman(length)
    raise ValueError(f"unknown window kind {kind}")
