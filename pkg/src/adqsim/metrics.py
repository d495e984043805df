"""Symbol-level information metrics and public-channel cost.

Mutual informations are plug-in (maximum-likelihood) estimates on the
empirical joint pmf, in bits. The secret-key figure of merit is

    c_sk_low = I(s_A; s_B) - min(I(s_A; s_E), I(s_B; s_E)),

reported signed (negative values are meaningful to the optimizer; plots may
clamp at zero for display). The public-channel cost of the
correction-exchanging scheme relative to the no-exchange baseline is

    gamma = (1 + beta - c_ab_adqc) / (1 - c_ab_nec),    beta = B / b.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateDenominator,
    EmptyInput,
    NoRetainedSamples,
    SymbolOutOfRange,
)

CSV_HEADER = (
    "scheme,b,B,rho_ab,i_ab,i_ae,i_be,c_sk_low,c_ab,beta,gamma,retention,n,seed"
)


@dataclass(frozen=True)
class JointPMF:
    """Empirical joint distribution of a symbol pair as raw counts."""

    counts: np.ndarray
    total: int

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total


def joint_pmf(pairs, m: int) -> JointPMF:
    """Count matrix of (symbol, symbol) pairs over an M x M alphabet.

    ``pairs`` may be a sequence of 2-tuples or a pair of equal-length
    integer arrays.
    """
    if (
        isinstance(pairs, tuple)
        and len(pairs) == 2
        and all(isinstance(p, np.ndarray) for p in pairs)
    ):
        a, b = (np.asarray(p, dtype=np.int64) for p in pairs)
    else:
        arr = np.asarray(list(pairs), dtype=np.int64)
        if arr.size == 0:
            raise EmptyInput("no symbol pairs")
        a, b = arr[:, 0], arr[:, 1]
    if a.size == 0:
        raise EmptyInput("no symbol pairs")
    if a.min() < 0 or b.min() < 0 or a.max() >= m or b.max() >= m:
        raise SymbolOutOfRange(f"symbols must lie in [0, {m})")
    counts = np.bincount(a * m + b, minlength=m * m).reshape(m, m)
    return JointPMF(counts, int(a.size))


def mutual_information(p: JointPMF) -> float:
    """Plug-in mutual information of a joint pmf, in bits (>= 0)."""
    return _mi_from_counts(p.counts)


def _mi_from_counts(counts: np.ndarray) -> float:
    joint = counts.astype(np.float64)
    total = joint.sum()
    if total <= 0:
        raise EmptyInput("empty pmf")
    joint /= total
    row = joint.sum(axis=1, keepdims=True)
    col = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    terms = np.zeros_like(joint)
    terms[mask] = joint[mask] * np.log2(joint[mask] / (row @ col)[mask])
    # tiny negatives are rounding artefacts of the 0 log 0 convention
    return max(0.0, float(terms.sum()))


@dataclass
class MetricsReport:
    """Estimated informations and figures of merit for one experiment point.

    ``c_sk_low_scaled`` multiplies by the retention fraction (identical to
    ``c_sk_low`` for schemes that never discard). ``gamma`` is filled only
    when a no-exchange reference is available. Coordinate fields (scheme,
    b, B, rho_ab, n, seed) identify the row in CSV output.
    """

    i_ab: float
    i_ae: float
    i_be: float
    c_sk_low: float
    c_ab: float
    beta: float
    retention: float
    c_sk_low_scaled: float
    gamma: Optional[float] = None
    scheme: str = ""
    b: int = 0
    correction_bits: Optional[int] = None
    rho_ab: float = float("nan")
    n: int = 0
    seed: int = 0

    def csv_row(self) -> str:
        corr = "" if self.correction_bits is None else str(self.correction_bits)
        gam = "" if self.gamma is None else format(self.gamma, ".10g")
        cells = [
            self.scheme,
            str(self.b),
            corr,
            format(self.rho_ab, ".10g"),
            format(self.i_ab, ".10g"),
            format(self.i_ae, ".10g"),
            format(self.i_be, ".10g"),
            format(self.c_sk_low, ".10g"),
            format(self.c_ab, ".10g"),
            format(self.beta, ".10g"),
            gam,
            format(self.retention, ".10g"),
            str(self.n),
            str(self.seed),
        ]
        return ",".join(cells)


def csk_lower(outcomes, b: int, correction_bits: int = 0) -> MetricsReport:
    """Metrics over the retained outcomes of one protocol run.

    ``outcomes`` is any object exposing integer arrays ``sym_a``, ``sym_b``,
    ``sym_e`` and a boolean array ``retained`` (see protocols.OutcomeBatch).
    """
    retained = np.asarray(outcomes.retained, dtype=bool)
    total = retained.size
    kept = int(retained.sum())
    if kept == 0:
        raise NoRetainedSamples("every sample was discarded")
    m = 1 << b
    sym_a = np.asarray(outcomes.sym_a)[retained]
    sym_b = np.asarray(outcomes.sym_b)[retained]
    sym_e = np.asarray(outcomes.sym_e)[retained]
    i_ab = mutual_information(joint_pmf((sym_a, sym_b), m))
    i_ae = mutual_information(joint_pmf((sym_a, sym_e), m))
    i_be = mutual_information(joint_pmf((sym_b, sym_e), m))
    c_sk = i_ab - min(i_ae, i_be)
    retention = kept / total
    return MetricsReport(
        i_ab=i_ab,
        i_ae=i_ae,
        i_be=i_be,
        c_sk_low=c_sk,
        c_ab=i_ab / b,
        beta=correction_bits / b,
        retention=retention,
        c_sk_low_scaled=c_sk * retention,
    )


def gamma_cost(c_ab_adqc: float, c_ab_nec: float, beta: float) -> float:
    """Public-channel bits of the correction scheme per bit of the baseline."""
    if c_ab_nec >= 1.0 - 1e-9:
        raise DegenerateDenominator(
            f"baseline agreement c_ab={c_ab_nec} leaves no reconciliation cost"
        )
    return (1.0 + beta - c_ab_adqc) / (1.0 - c_ab_nec)
