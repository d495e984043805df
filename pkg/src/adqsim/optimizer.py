"""Alternating adversarial design of the three quantizers.

Eve minimizes the secret-key objective over her thresholds, then Alice and
Bob jointly maximize it over theirs; the two half-steps repeat until the
objective stops moving or an iteration cap is hit. All evaluations run on
one fixed design dataset (common random numbers), so the objective is a
deterministic function of the thresholds and every run is reproducible.

Searches are derivative-free (Powell direction-set) over an unconstrained
reparameterization theta = (first threshold, log of consecutive gaps), with
seeded restarts around uniform quantizers of several spans: the objective
has distinct basins per effective span, and purely local restarts stall in
the starting basin. Range and minimum-gap violations are handled by
penalty, and each half-step is clamped to "never worse than its start".

The inner loop evaluates candidates on a fixed fine grid (samples are
pre-binned once; a candidate's symbol map is a small lookup table), which
snaps thresholds to ~1e-4 resolution. Reported metrics are always
recomputed exactly through the protocols module, so the approximation only
steers the search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .metrics import _mi_from_counts
from .protocols import SchemeSpec
from .quantizer import Quantizer
from .source import Dataset

DEFAULT_G_MIN = 1e-4
# interior thresholds of the starting quantizer span +/- 3 std of the
# unit-variance features; the boundary thresholds stay at the saturation
# range so the outer intervals absorb the ~2.7e-3 tail
DEFAULT_UNIFORM_SPAN = 3.0

_PENALTY = 1e3
_FINE_BINS = 1 << 18
_FINE_LO, _FINE_HI = -12.0, 12.0
# spans of the uniform-quantizer restart points, jittered per restart
_RESTART_SPANS = (2.5, 2.0, 3.0, 1.5)
# rescored values within this margin count as ties (resolved toward the
# design that leaks least to Eve)
_TIE_TOLERANCE = 2e-3


@dataclass(frozen=True)
class ThresholdVector:
    """Strictly increasing interior thresholds between fixed endpoints."""

    interior: tuple[float, ...]
    t_min: float = -6.0
    t_max: float = 6.0
    g_min: float = DEFAULT_G_MIN

    def __post_init__(self):
        t = np.asarray(self.interior, dtype=np.float64)
        m = t.size + 1
        if m & (m - 1):
            raise ValueError(f"{t.size} interior thresholds do not give 2^b intervals")
        lo, hi = self.t_min + self.g_min, self.t_max - self.g_min
        if t.size and (t[0] < lo or t[-1] > hi):
            raise ValueError(f"interior thresholds must lie in [{lo}, {hi}]")
        if t.size > 1 and np.min(np.diff(t)) < self.g_min:
            raise ValueError(f"threshold gaps must be >= {self.g_min}")

    @classmethod
    def uniform(
        cls,
        b: int,
        span: float = DEFAULT_UNIFORM_SPAN,
        t_min: float = -6.0,
        t_max: float = 6.0,
        g_min: float = DEFAULT_G_MIN,
    ) -> "ThresholdVector":
        """Interior thresholds of M equal cells spanning [-span, span]."""
        inner = np.linspace(-span, span, (1 << b) + 1)[1:-1]
        return cls(tuple(inner), t_min, t_max, g_min)

    @property
    def bits(self) -> int:
        return (len(self.interior) + 1).bit_length() - 1

    def to_quantizer(self) -> Quantizer:
        return Quantizer(np.concatenate([[self.t_min], self.interior, [self.t_max]]))

    def theta(self) -> np.ndarray:
        """(first threshold, log-gaps) coordinates; see :func:`decode_theta`."""
        t = np.asarray(self.interior)
        out = np.empty(t.size)
        out[0] = t[0]
        out[1:] = np.log(np.diff(t))
        return out


def decode_theta(theta: np.ndarray) -> np.ndarray:
    """Inverse of :meth:`ThresholdVector.theta` (returns raw thresholds)."""
    t = np.empty(len(theta))
    t[0] = theta[0]
    t[1:] = np.exp(theta[1:])
    return np.cumsum(t)


def _violation(t: np.ndarray, t_min: float, t_max: float, g_min: float) -> float:
    """Total distance by which decoded thresholds break the constraints."""
    v = max(0.0, (t_min + g_min) - t[0]) + max(0.0, t[-1] - (t_max - g_min))
    if t.size > 1:
        v += float(np.sum(np.maximum(0.0, g_min - np.diff(t))))
    return v


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one alternation run; the design dataset is fixed."""

    scheme: SchemeSpec
    design_dataset: Dataset
    max_outer_iters: int = 10
    objective_tolerance: float = 1e-3
    restarts: int = 3
    evaluation_budget: int = 2000
    seed: int = 0
    t_min: float = -6.0
    t_max: float = 6.0
    g_min: float = DEFAULT_G_MIN
    uniform_span: float = DEFAULT_UNIFORM_SPAN
    restart_scale: float = 0.1
    recenter: bool = True

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.scheme.kind == "GB":
            raise ValueError("guard-band scheme has no per-party thresholds to design")


@dataclass(frozen=True)
class OptimizeResult:
    """Best value found by one half-step search."""

    objective: float
    evaluations: int
    budget_exhausted: bool


@dataclass(frozen=True)
class EveResult(OptimizeResult):
    t_e: ThresholdVector = None


@dataclass(frozen=True)
class AliceBobResult(OptimizeResult):
    t_a: ThresholdVector = None
    t_b: ThresholdVector = None


@dataclass(frozen=True)
class HalfStepRecord:
    outer_iter: int
    half_step: str  # "eve" or "alice_bob"
    objective: float
    t_a: ThresholdVector
    t_b: ThresholdVector
    t_e: ThresholdVector


@dataclass(frozen=True)
class AlternationResult:
    t_a: ThresholdVector
    t_b: ThresholdVector
    t_e: ThresholdVector
    history: tuple[HalfStepRecord, ...]


class FastEvaluator:
    """Objective evaluation on a fixed dataset, tuned for the search loop.

    Samples are binned once onto a fine uniform grid; a candidate threshold
    vector then maps to symbols through a per-candidate lookup table
    instead of per-sample binary search. Alice's offset/index path uses the
    exact measurement values, so only interval membership is snapped to the
    grid resolution.
    """

    def __init__(self, ds: Dataset, scheme: SchemeSpec, recenter: bool = True):
        self.m = 1 << scheme.b
        self.is_adqc = scheme.kind == "ADQC"
        self.k = (1 << scheme.correction_bits) if self.is_adqc else None
        self.recenter = recenter
        self.inv_delta = _FINE_BINS / (_FINE_HI - _FINE_LO)
        self.x = ds.x
        self.fy = (ds.y - _FINE_LO) * self.inv_delta
        self.fz = (ds.z - _FINE_LO) * self.inv_delta
        self.gx = self._bin(ds.x)
        self.gy = np.clip(self.fy.astype(np.int32), 0, _FINE_BINS - 1)
        self.gz = np.clip(self.fz.astype(np.int32), 0, _FINE_BINS - 1)

    def _bin(self, v: np.ndarray) -> np.ndarray:
        return np.clip(
            ((v - _FINE_LO) * self.inv_delta).astype(np.int32), 0, _FINE_BINS - 1
        )

    def _lut(self, bounds: np.ndarray) -> np.ndarray:
        """Fine-bin -> symbol index table for one boundary vector."""
        cuts = np.ceil((bounds[1:-1] - _FINE_LO) * self.inv_delta).astype(np.int64)
        cuts = np.clip(cuts, 0, _FINE_BINS)
        counts = np.diff(np.concatenate([[0], cuts, [_FINE_BINS]]))
        return np.repeat(np.arange(self.m, dtype=np.int16), counts)

    def _mi(self, code: np.ndarray) -> float:
        counts = np.bincount(code, minlength=self.m * self.m)
        return _mi_from_counts(counts.reshape(self.m, self.m))

    def _alice(self, bounds: np.ndarray):
        """Alice symbols and (for ADQC) float correction indices."""
        lut = self._lut(bounds)
        sym_a = lut[self.gx]
        if not self.is_adqc:
            return sym_a, None
        eta = np.clip(self.x, bounds[0], bounds[-1]) - bounds[sym_a]
        lengths = bounds[sym_a + 1] - bounds[sym_a]
        xi = np.clip(np.ceil(eta * (self.k / lengths)), 1, self.k)
        return sym_a, xi

    def _receiver(self, bounds, lut, raw_sym, fine, xi) -> np.ndarray:
        """Symbols after offset correction (shared by Bob and corrected Eve)."""
        lengths = bounds[raw_sym + 1] - bounds[raw_sym]
        scale = (xi - 0.5) / self.k - (0.5 if self.recenter else 0.0)
        shifted = fine - scale * lengths * self.inv_delta
        g = np.clip(shifted.astype(np.int32), 0, _FINE_BINS - 1)
        return lut[g]

    def legit_paths(self, bounds_a: np.ndarray, bounds_b: np.ndarray):
        """(sym_a, xi, sym_b) for one legitimate-side candidate."""
        sym_a, xi = self._alice(bounds_a)
        lut_b = self._lut(bounds_b)
        raw_b = lut_b[self.gy]
        if xi is None:
            return sym_a, None, raw_b
        return sym_a, xi, self._receiver(bounds_b, lut_b, raw_b, self.fy, xi)

    def eve_info(self, sym_a, sym_b, bounds_e: np.ndarray, xi) -> float:
        """Worse-for-legitimates of Eve's corrected and xi-ignoring modes."""
        lut_e = self._lut(bounds_e)
        raw = lut_e[self.gz]
        a16 = sym_a.astype(np.int16)
        b16 = sym_b.astype(np.int16)
        info = min(self._mi(a16 * self.m + raw), self._mi(b16 * self.m + raw))
        if xi is not None:
            corr = self._receiver(bounds_e, lut_e, raw, self.fz, xi)
            info = max(
                info,
                min(self._mi(a16 * self.m + corr), self._mi(b16 * self.m + corr)),
            )
        return info

    def objective(self, bounds_a, bounds_b, bounds_e) -> float:
        sym_a, xi, sym_b = self.legit_paths(bounds_a, bounds_b)
        i_ab = self._mi(sym_a.astype(np.int16) * self.m + sym_b)
        return i_ab - self.eve_info(sym_a, sym_b, bounds_e, xi)

    def eve_closure(self, bounds_a, bounds_b) -> Callable[[np.ndarray], float]:
        """objective(bounds_e) with the legitimate side precomputed."""
        sym_a, xi, sym_b = self.legit_paths(bounds_a, bounds_b)
        i_ab = self._mi(sym_a.astype(np.int16) * self.m + sym_b)

        def value(bounds_e: np.ndarray) -> float:
            return i_ab - self.eve_info(sym_a, sym_b, bounds_e, xi)

        return value


def _bounds(t: np.ndarray, t_min: float, t_max: float) -> np.ndarray:
    return np.concatenate([[t_min], t, [t_max]])


def objective(
    t_a: ThresholdVector,
    t_b: ThresholdVector,
    t_e: ThresholdVector,
    scheme: SchemeSpec,
    ds: Dataset,
    recenter: bool = True,
) -> float:
    """Signed secret-key objective of one threshold triple on ``ds``.

    Exact evaluation through the protocol path; use this for reported
    numbers and FastEvaluator only inside searches.
    """
    from . import protocols
    from .metrics import csk_lower

    qa, qb, qe = (t.to_quantizer() for t in (t_a, t_b, t_e))
    if scheme.kind == "NEC":
        run = protocols.run_nec(qa, qb, qe, ds)
        return csk_lower(run, scheme.b).c_sk_low
    if scheme.kind == "ADQC":
        corrected = protocols.run_adqc(
            qa, qb, qe, ds, scheme.correction_bits, "correct", recenter
        )
        ignoring = protocols.run_adqc(
            qa, qb, qe, ds, scheme.correction_bits, "ignore", recenter
        )
        reports = [
            csk_lower(r, scheme.b, scheme.correction_bits)
            for r in (corrected, ignoring)
        ]
        return min(r.c_sk_low for r in reports)
    raise ValueError(f"objective is undefined for scheme kind {scheme.kind!r}")


def _search(
    f: Callable[[np.ndarray], float],
    theta0: np.ndarray,
    span_start: Callable[[float], np.ndarray],
    cfg: OptimizerConfig,
    rng: np.random.Generator,
    rescore: Optional[Callable[[np.ndarray, int], float]] = None,
    leakage: Optional[Callable[[np.ndarray], float]] = None,
) -> tuple[np.ndarray, float, int, bool]:
    """Powell minimisation from the current point plus seeded restarts.

    Restart r starts from a uniform quantizer of span _RESTART_SPANS[r]
    (jittered), mapped to theta by ``span_start``. When ``rescore`` is
    given, each start's winner is re-scored with it (budget-capped) and
    the final pick minimises the re-scored value; re-scored ties are
    broken toward the smallest ``leakage``. The plain objective at the
    picked point is still what gets reported. Returns (best theta, best
    value, evaluations used, budget exhausted). The start point is always
    evaluated, so the result is never worse than the start.
    """
    evals = 0

    def counted(theta):
        nonlocal evals
        evals += 1
        return f(theta)

    candidates: list[tuple[np.ndarray, float]] = [(theta0.copy(), counted(theta0))]
    n_starts = 1 + max(0, cfg.restarts)
    # budget shares: descent from the current point counts double, and one
    # share is held back for re-scoring
    shares = n_starts + 1 + (1 if rescore is not None else 0)
    unit = cfg.evaluation_budget // shares
    for restart in range(n_starts):
        if evals >= cfg.evaluation_budget:
            break
        if restart == 0:
            start, allowance = theta0, 2 * unit
        else:
            span = _RESTART_SPANS[(restart - 1) % len(_RESTART_SPANS)]
            start = span_start(span) + rng.normal(0.0, cfg.restart_scale, theta0.size)
            allowance = unit
        allowance = max(50, min(allowance, cfg.evaluation_budget - evals))
        res = minimize(
            counted,
            start,
            method="Powell",
            options=dict(maxfev=allowance, xtol=1e-4, ftol=1e-6),
        )
        candidates.append((np.asarray(res.x).copy(), float(res.fun)))

    plain_best = min(v for _, v in candidates)
    if rescore is None:
        best_theta, best_val = min(candidates, key=lambda c: c[1])
        return best_theta, best_val, evals, evals >= cfg.evaluation_budget

    # re-score each start's winner; skip clearly dominated candidates
    per_candidate = max(40, unit // max(1, len(candidates)))
    start_value = candidates[0][1]
    scored = []
    for theta, value in candidates:
        if value > plain_best + 0.25:
            continue
        scored.append((rescore(theta, per_candidate), theta, value))
        evals += per_candidate
    best_rescored = min(s[0] for s in scored)
    tied = [s for s in scored if s[0] <= best_rescored + _TIE_TOLERANCE]
    # the never-worse-than-start contract is on the plain objective
    eligible = [s for s in tied if s[2] <= start_value + 1e-12]
    if eligible:
        if leakage is not None and len(eligible) > 1:
            _, best_theta, best_val = min(eligible, key=lambda s: leakage(s[1]))
        else:
            _, best_theta, best_val = min(eligible, key=lambda s: s[0])
    else:
        fallback = [s for s in scored if s[2] <= start_value + 1e-12]
        _, best_theta, best_val = min(fallback, key=lambda s: s[0])
    return best_theta, best_val, evals, evals >= cfg.evaluation_budget


def _restart_rng(cfg: OptimizerConfig, salt: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[cfg.seed, salt]))


def optimize_eve(
    t_a: ThresholdVector,
    t_b: ThresholdVector,
    t_e_start: ThresholdVector,
    scheme: SchemeSpec,
    ds: Dataset,
    cfg: OptimizerConfig,
    salt: int = 0,
    evaluator: Optional[FastEvaluator] = None,
) -> EveResult:
    """Eve's best response: minimize the objective over her thresholds."""
    ev = evaluator or FastEvaluator(ds, scheme, cfg.recenter)
    value = ev.eve_closure(
        t_a.to_quantizer().boundaries, t_b.to_quantizer().boundaries
    )

    def f(theta):
        t = decode_theta(theta)
        pen = _violation(t, cfg.t_min, cfg.t_max, cfg.g_min)
        if pen > 0:
            return _PENALTY * (1.0 + pen)
        return value(_bounds(t, cfg.t_min, cfg.t_max))

    def span_start(span: float) -> np.ndarray:
        return ThresholdVector.uniform(
            scheme.b, span, cfg.t_min, cfg.t_max, cfg.g_min
        ).theta()

    theta, val, evals, exhausted = _search(
        f, t_e_start.theta(), span_start, cfg, _restart_rng(cfg, salt)
    )
    t_e = ThresholdVector(tuple(decode_theta(theta)), cfg.t_min, cfg.t_max, cfg.g_min)
    return EveResult(
        objective=val, evaluations=evals, budget_exhausted=exhausted, t_e=t_e
    )


def optimize_alice_bob(
    t_a_start: ThresholdVector,
    t_b_start: ThresholdVector,
    t_e: ThresholdVector,
    scheme: SchemeSpec,
    ds: Dataset,
    cfg: OptimizerConfig,
    salt: int = 0,
    evaluator: Optional[FastEvaluator] = None,
) -> AliceBobResult:
    """Joint legitimate step: maximize the objective over (t_a, t_b).

    Restart winners are ranked by their value after a short Eve
    best-response rather than against the current (stale) Eve: the
    objective is nearly flat across solutions that differ mainly in how
    exploitable they leave Eve, and the reported pipeline always grants
    Eve the last move.
    """
    ev = evaluator or FastEvaluator(ds, scheme, cfg.recenter)
    bounds_e = t_e.to_quantizer().boundaries
    theta_e = t_e.theta()
    half = len(t_a_start.interior)

    def decode_pair(theta):
        ta, tb = decode_theta(theta[:half]), decode_theta(theta[half:])
        pen = _violation(ta, cfg.t_min, cfg.t_max, cfg.g_min) + _violation(
            tb, cfg.t_min, cfg.t_max, cfg.g_min
        )
        return ta, tb, pen

    def f(theta):
        ta, tb, pen = decode_pair(theta)
        if pen > 0:
            return _PENALTY * (1.0 + pen)
        return -ev.objective(
            _bounds(ta, cfg.t_min, cfg.t_max),
            _bounds(tb, cfg.t_min, cfg.t_max),
            bounds_e,
        )

    def rescore(theta, budget):
        ta, tb, pen = decode_pair(theta)
        if pen > 0:
            return _PENALTY * (1.0 + pen)
        value = ev.eve_closure(
            _bounds(ta, cfg.t_min, cfg.t_max), _bounds(tb, cfg.t_min, cfg.t_max)
        )

        def eve_objective(th_e):
            t = decode_theta(th_e)
            eve_pen = _violation(t, cfg.t_min, cfg.t_max, cfg.g_min)
            if eve_pen > 0:
                return _PENALTY * (1.0 + eve_pen)
            return value(_bounds(t, cfg.t_min, cfg.t_max))

        res = minimize(
            eve_objective,
            theta_e,
            method="Powell",
            options=dict(maxfev=budget, xtol=1e-3, ftol=1e-5),
        )
        return -min(float(res.fun), eve_objective(theta_e))

    def leakage(theta):
        # at (re-scored) equal objective, prefer the design whose raw
        # agreement, and hence Eve's share of it, is smallest
        ta, tb, pen = decode_pair(theta)
        if pen > 0:
            return float("inf")
        sym_a, _, sym_b = ev.legit_paths(
            _bounds(ta, cfg.t_min, cfg.t_max), _bounds(tb, cfg.t_min, cfg.t_max)
        )
        return ev._mi(sym_a.astype(np.int16) * ev.m + sym_b)

    def span_start(span: float) -> np.ndarray:
        one = ThresholdVector.uniform(
            scheme.b, span, cfg.t_min, cfg.t_max, cfg.g_min
        ).theta()
        return np.concatenate([one, one])

    theta0 = np.concatenate([t_a_start.theta(), t_b_start.theta()])
    theta, val, evals, exhausted = _search(
        f, theta0, span_start, cfg, _restart_rng(cfg, salt),
        rescore=rescore, leakage=leakage,
    )
    t_a = ThresholdVector(
        tuple(decode_theta(theta[:half])), cfg.t_min, cfg.t_max, cfg.g_min
    )
    t_b = ThresholdVector(
        tuple(decode_theta(theta[half:])), cfg.t_min, cfg.t_max, cfg.g_min
    )
    return AliceBobResult(
        objective=-val, evaluations=evals, budget_exhausted=exhausted, t_a=t_a, t_b=t_b
    )


def alternate(
    cfg: OptimizerConfig,
    log: Optional[Callable[[HalfStepRecord], None]] = None,
) -> AlternationResult:
    """Run Eve / Alice-Bob half-steps until convergence or the iteration cap.

    Convergence is declared when the post-legitimate-step objective moves by
    less than ``objective_tolerance`` across one full outer iteration.
    """
    scheme, ds = cfg.scheme, cfg.design_dataset
    start = ThresholdVector.uniform(
        scheme.b, cfg.uniform_span, cfg.t_min, cfg.t_max, cfg.g_min
    )
    evaluator = FastEvaluator(ds, scheme, cfg.recenter)
    t_a = t_b = t_e = start
    history: list[HalfStepRecord] = []
    previous = None
    for outer in range(1, cfg.max_outer_iters + 1):
        eve = optimize_eve(
            t_a, t_b, t_e, scheme, ds, cfg, salt=2 * outer, evaluator=evaluator
        )
        t_e = eve.t_e
        history.append(HalfStepRecord(outer, "eve", eve.objective, t_a, t_b, t_e))
        ab = optimize_alice_bob(
            t_a, t_b, t_e, scheme, ds, cfg, salt=2 * outer + 1, evaluator=evaluator
        )
        t_a, t_b = ab.t_a, ab.t_b
        history.append(HalfStepRecord(outer, "alice_bob", ab.objective, t_a, t_b, t_e))
        if log is not None:
            log(history[-2])
            log(history[-1])
        if previous is not None and abs(ab.objective - previous) < cfg.objective_tolerance:
            break
        previous = ab.objective
    return AlternationResult(t_a, t_b, t_e, tuple(history))
