"""Even-lag product function of a single centered record.

For a block indexed n = -K..K the product function is

    p[k] = x[-k] * x[k],   k = -K..K,

i.e. the lag-2k product evaluated at the single time point n = -k.  It is
even in k by construction and, for an AFMS input, carries line clusters at
2 wc + {-2, -1, 0, 1, 2} wa (each split by wf) plus low-frequency lines at
0, wa and 2 wa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .model import SignalBlock


@dataclass(frozen=True)
class PFSequence:
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def half_width(self) -> int:
        return (self.values.size - 1) // 2

    @property
    def k(self) -> np.ndarray:
        K = self.half_width
        return np.arange(-K, K + 1)


def product_function(block: SignalBlock, taper: str | None = None) -> PFSequence:
    """Compute p[k] = x[-k] x[k] about the block midpoint.

    ``taper`` names a symmetric ``scipy.signal`` window applied to p[k]
    afterwards (off by default).
    """
    x = block.samples
    L = x.size
    if L % 2 == 0:
        raise ValueError(f"product function needs an odd-length block, got {L}")
    p = x * x[::-1]
    if taper is not None:
        p = p * get_window(taper, L, fftbins=False)
    return PFSequence(p)
