"""Binary inclusion vectors with an incrementally maintained support list."""

import bisect

import numpy as np

__all__ = ["SparsityVector"]


class SparsityVector:
    """Inclusion vector in {0,1}^p with a cached, sorted support.

    Every likelihood evaluation iterates the active coordinates, so the
    support is kept as a sorted list and updated in place on single-bit
    writes instead of being rescanned from the bit array.
    """

    __slots__ = ("bits", "_support", "_support_arr")

    def __init__(self, bits):
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValueError("bits must be a one-dimensional 0/1 sequence")
        if bits.size and bits.max() > 1:
            raise ValueError("bits must contain only 0 and 1")
        self.bits = bits
        self._support = [int(j) for j in np.flatnonzero(bits)]
        self._support_arr = None

    @classmethod
    def zeros(cls, p):
        return cls(np.zeros(int(p), dtype=np.uint8))

    @classmethod
    def ones(cls, p):
        return cls(np.ones(int(p), dtype=np.uint8))

    @classmethod
    def from_support(cls, p, support):
        bits = np.zeros(int(p), dtype=np.uint8)
        bits[np.asarray(list(support), dtype=np.int64)] = 1
        return cls(bits)

    @property
    def p(self):
        return self.bits.size

    @property
    def count(self):
        return len(self._support)

    @property
    def support(self):
        """Sorted active indices as an int64 array (cached until a write)."""
        if self._support_arr is None:
            self._support_arr = np.asarray(self._support, dtype=np.int64)
        return self._support_arr

    def get(self, j):
        return int(self.bits[j])

    def set(self, j, value):
        """Write bit j, updating the support list incrementally."""
        j = int(j)
        value = int(value)
        if value not in (0, 1):
            raise ValueError("bit value must be 0 or 1")
        old = int(self.bits[j])
        if old == value:
            return
        self.bits[j] = value
        if value:
            bisect.insort(self._support, j)
        else:
            del self._support[bisect.bisect_left(self._support, j)]
        self._support_arr = None

    def with_bit(self, j, value):
        """Copy with bit j forced to `value` (the rest unchanged)."""
        out = self.copy()
        out.set(j, value)
        return out

    def copy(self):
        out = SparsityVector.__new__(SparsityVector)
        out.bits = self.bits.copy()
        out._support = list(self._support)
        out._support_arr = self._support_arr
        return out

    def key(self):
        """Hashable identity of the bit pattern (column-cache key)."""
        return self.bits.tobytes()

    def mask(self, theta):
        """Component-wise product theta * bits (zeros off the support)."""
        out = np.zeros_like(theta)
        sup = self.support
        out[sup] = theta[sup]
        return out

    def __eq__(self, other):
        if not isinstance(other, SparsityVector):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"SparsityVector(p={self.p}, support={self._support})"
