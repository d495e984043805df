"""Scalar quantizers with saturation and sub-interval correction coding.

A quantizer is a sorted boundary vector T_0 < ... < T_M defining M = 2^b
intervals on [T_0, T_M]. Interval m is [T_m, T_{m+1}); the last interval is
closed on both ends. Out-of-range inputs saturate to the outermost
intervals.

The correction code splits the sender's interval into K = 2^B equal
sub-intervals and transmits the 1-based index of the sub-interval holding
the sender's offset from the interval's lower edge. Receivers reconstruct
the offset as the midpoint of that sub-interval, scaled by the length of
their *own* interval at their raw measurement.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import BitsOutOfRange, InvalidCorrectionBits, InvalidRange

DEFAULT_T_MIN = -6.0
DEFAULT_T_MAX = 6.0


class CorrectionIndex(NamedTuple):
    """Transmitted sub-interval index, 1-based within [1, 2^bits]."""

    xi: int
    bits: int

    @property
    def k(self) -> int:
        """Sub-interval alphabet size K = 2^bits."""
        return 1 << self.bits


class Quantizer:
    """Immutable M-interval scalar quantizer; all operations are pure."""

    def __init__(self, boundaries):
        bounds = np.asarray(boundaries, dtype=np.float64)
        if bounds.ndim != 1 or len(bounds) < 2:
            raise InvalidRange("need at least two boundaries")
        if not np.all(np.diff(bounds) > 0):
            raise InvalidRange("boundaries must be strictly increasing")
        m = len(bounds) - 1
        b = m.bit_length() - 1
        if m != 1 << b:
            raise BitsOutOfRange(f"{m} intervals is not a power of two")
        if not 1 <= b <= 16:
            raise BitsOutOfRange(f"bits_per_symbol {b} outside [1, 16]")
        bounds.setflags(write=False)
        self.boundaries = bounds
        self.bits = b
        self.n_intervals = m

    @property
    def t_min(self) -> float:
        return float(self.boundaries[0])

    @property
    def t_max(self) -> float:
        return float(self.boundaries[-1])

    def __eq__(self, other) -> bool:
        return isinstance(other, Quantizer) and np.array_equal(
            self.boundaries, other.boundaries
        )

    def __repr__(self) -> str:
        return f"Quantizer(b={self.bits}, boundaries={self.boundaries.tolist()})"

    def indices(self, a):
        """Interval index for scalar or array input (saturating)."""
        idx = np.searchsorted(self.boundaries, a, side="right") - 1
        return np.clip(idx, 0, self.n_intervals - 1)

    def lower_edges(self, idx):
        return self.boundaries[idx]

    def lengths(self, idx):
        return self.boundaries[np.asarray(idx) + 1] - self.boundaries[idx]


def uniform(b: int, t_min: float = DEFAULT_T_MIN, t_max: float = DEFAULT_T_MAX) -> Quantizer:
    """Quantizer with M = 2^b equal-length intervals spanning [t_min, t_max]."""
    if not 1 <= b <= 16:
        raise BitsOutOfRange(f"bits_per_symbol {b} outside [1, 16]")
    if not t_min < t_max:
        raise InvalidRange(f"empty range [{t_min}, {t_max}]")
    return Quantizer(np.linspace(t_min, t_max, (1 << b) + 1))


def quantize(q: Quantizer, a):
    """Symbol index in [0, M) of ``a`` (scalar in, int out; array in, array out)."""
    idx = q.indices(a)
    return int(idx) if np.isscalar(a) else idx


def interval_of(q: Quantizer, a) -> tuple[float, float]:
    """(lower_edge, length) of the interval that ``a`` quantizes into."""
    idx = q.indices(a)
    return float(q.lower_edges(idx)), float(q.lengths(idx))


def encode_correction(q: Quantizer, x: float, bits: int) -> CorrectionIndex:
    """Sub-interval index of the sender's quantization offset.

    The offset eta = x - lower_edge is measured from the lower edge of the
    selected interval (saturated x is clamped into range first), so
    eta in [0, L] and ceil(eta * K / L) lands in {0, ..., K}; the 0 raw
    index (eta exactly 0) is clamped up to 1.
    """
    if bits < 1:
        raise InvalidCorrectionBits(f"correction bits must be >= 1, got {bits}")
    xi = encode_corrections(q, np.asarray([x], dtype=np.float64), bits)
    return CorrectionIndex(int(xi[0]), bits)


def encode_corrections(q: Quantizer, x: np.ndarray, bits: int) -> np.ndarray:
    """Vectorised :func:`encode_correction`; returns int64 indices in [1, K]."""
    if bits < 1:
        raise InvalidCorrectionBits(f"correction bits must be >= 1, got {bits}")
    k = 1 << bits
    idx = q.indices(x)
    eta = np.clip(x, q.t_min, q.t_max) - q.lower_edges(idx)
    raw = np.ceil(eta * (k / q.lengths(idx)))
    return np.clip(raw, 1, k).astype(np.int64)


def decode_correction(q: Quantizer, v: float, xi: CorrectionIndex) -> float:
    """Receiver-side offset estimate from the transmitted index.

    Maps xi to the midpoint of its sub-interval, scaled by the length of
    the receiver's own interval at the raw measurement ``v``:
    eta_hat = (xi - 1/2) * L(v) / K.
    """
    eta = decode_corrections(q, np.asarray([v], dtype=np.float64),
                             np.asarray([xi.xi]), xi.bits)
    return float(eta[0])


def decode_corrections(q: Quantizer, v: np.ndarray, xi: np.ndarray, bits: int) -> np.ndarray:
    """Vectorised :func:`decode_correction`."""
    k = 1 << bits
    lengths = q.lengths(q.indices(v))
    return (np.asarray(xi) - 0.5) * lengths / k


def to_text(q: Quantizer) -> str:
    """Serialise as a JSON record with boundaries at 17 significant digits."""
    return json.dumps(
        {
            "bits_per_symbol": q.bits,
            "boundaries": [format(t, ".17g") for t in q.boundaries],
        }
    )


def from_text(text: str) -> Quantizer:
    rec = json.loads(text)
    q = Quantizer([float(t) for t in rec["boundaries"]])
    if q.bits != rec["bits_per_symbol"]:
        raise BitsOutOfRange(
            f"boundary count implies b={q.bits}, record says {rec['bits_per_symbol']}"
        )
    return q


def save(q: Quantizer, path: str | Path) -> None:
    Path(path).write_text(to_text(q) + "\n")


def load(path: str | Path) -> Quantizer:
    return from_text(Path(path).read_text())
