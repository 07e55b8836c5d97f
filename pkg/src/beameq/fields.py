"""Sampled planar fields on a uniform Cartesian grid with a disk mask."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import distance_transform_edt

__all__ = ["PlanarField"]


@dataclass(frozen=True)
class PlanarField:
    """Node values on the square [-L, L]^2 sampled with ``n`` points per side.

    ``mask`` marks the nodes that belong to the domain (the closed disk of
    radius ``radius`` for disk problems, everything otherwise). Arrays are
    indexed ``[iy, ix]``.
    """

    values: np.ndarray
    half_width: float
    mask: np.ndarray
    radius: float

    @classmethod
    def disk(cls, radius, n, values=None, half_width=None):
        half_width = radius if half_width is None else half_width
        x = np.linspace(-half_width, half_width, n)
        xx, yy = np.meshgrid(x, x)
        mask = xx ** 2 + yy ** 2 <= radius ** 2 * (1 + 1e-12)
        if values is None:
            values = np.zeros((n, n))
        elif callable(values):
            values = np.asarray(values(xx, yy), dtype=float)
        return cls(np.asarray(values, dtype=float), float(half_width), mask, float(radius))

    @classmethod
    def square(cls, half_width, n, values=None):
        f = cls.disk(np.inf, n, values, half_width=half_width)
        return replace(f, mask=np.ones((n, n), dtype=bool))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def h(self):
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def axis(self):
        return np.linspace(-self.half_width, self.half_width, self.n)

    @property
    def coords(self):
        x = self.axis
        return np.meshgrid(x, x)

    def radii(self, center=(0.0, 0.0)):
        xx, yy = self.coords
        return np.hypot(xx - center[0], yy - center[1])

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=float))

    def masked(self):
        return self.values[self.mask]

    def extended_values(self):
        """Node values with every off-mask node replaced by its nearest mask node."""
        if np.all(self.mask):
            return self.values
        _, (iy, ix) = distance_transform_edt(~self.mask, return_indices=True)
        return self.values[iy, ix]

    def integral(self):
        """Node-sum quadrature over the mask (h^2 per node)."""
        return float(np.sum(self.values[self.mask])) * self.h ** 2

    def area(self):
        return float(np.count_nonzero(self.mask)) * self.h ** 2
