"""Acceptance suite: full-scale reproduction of the reference experiments.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see
them live). Criteria 2-5 share session-scoped optimizer sweeps and take a
few hours single-core at the default solver budget; criteria 1 and 6 run
in about a minute. Deselect the slow ones with ``-m "not slow"``.

Monte-Carlo comparisons between curves estimated on the shared evaluation
datasets use an allowance of 0.005 bit where the criterion states no
explicit slack.
"""

from __future__ import annotations

import numpy as np
import pytest

from adqsim.experiments import (
    DEFAULT_RHO_GRID,
    ExperimentPlan,
    SeriesSpec,
    evaluate_point,
    run_gamma,
    run_sweep,
)
from adqsim.metrics import JointPMF, gamma_cost, mutual_information
from adqsim.optimizer import OptimizerConfig, ThresholdVector, alternate
from adqsim.protocols import SchemeSpec, run_adqc
from adqsim.quantizer import (
    decode_correction,
    encode_correction,
    interval_of,
    uniform,
)
from adqsim.source import CorrelationConfig, sample_dataset

from .oracles import mi_bits_bruteforce, nec_uniform_csk_oracle

MC_ALLOWANCE = 5e-3

# Fig. 2 reference series, "NEC unif. quant." at b=3
NEC_UNIFORM_REFERENCE = {0.9: 0.335, 0.96: 0.699, 0.99: 1.112}

# Table I: optimized ADQC at B=2 (rows b=2,3,4; the acceptance grid)
TABLE_REFERENCE = {
    2: {0.8: 0.084, 0.9: 0.377, 0.96: 0.764, 0.99: 1.199},
    3: {0.8: 0.086, 0.9: 0.436, 0.96: 0.949, 0.99: 1.731},
    4: {0.8: 0.095, 0.9: 0.414, 0.96: 1.039, 0.99: 1.867},
}


def announce(criterion: int, ok: bool, detail: str) -> None:
    state = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {state} - {detail}")


def clamp(v: float) -> float:
    return max(0.0, v)


@pytest.fixture(scope="session")
def plan():
    return ExperimentPlan()


def _series_map(plan, series):
    rows, failures = run_sweep(plan, [series])
    assert not failures, failures
    return {round(r.rho_ab, 6): r for r in rows}


@pytest.fixture(scope="session")
def fig2_nec_uniform(plan):
    return _series_map(plan, SeriesSpec(SchemeSpec("NEC", 3), optimized=False))


@pytest.fixture(scope="session")
def fig2_nec_opt(plan):
    return _series_map(plan, SeriesSpec(SchemeSpec("NEC", 3), optimized=True))


@pytest.fixture(scope="session")
def fig2_adqc_b1(plan):
    return _series_map(plan, SeriesSpec(SchemeSpec("ADQC", 3, 1), optimized=True))


@pytest.fixture(scope="session")
def fig2_adqc_b2(plan):
    return _series_map(plan, SeriesSpec(SchemeSpec("ADQC", 3, 2), optimized=True))


@pytest.fixture(scope="session")
def fig2_gb(plan):
    return _series_map(
        plan, SeriesSpec(SchemeSpec("GB", 3, guard_width=plan.guard_width), optimized=False)
    )


def test_criterion_1_nec_uniform_baseline(plan, fig2_nec_uniform):
    """Strongest anchor: no optimizer in the loop."""
    failures = []
    details = []
    for rho, reference in NEC_UNIFORM_REFERENCE.items():
        measured = fig2_nec_uniform[rho].c_sk_low
        oracle = nec_uniform_csk_oracle(
            3, rho, plan.rho_ae, plan.uniform_span, plan.t_min, plan.t_max
        )
        details.append(f"rho={rho}: {measured:.4f} (ref {reference}, oracle {oracle:.4f})")
        if abs(measured - reference) > 0.02:
            failures.append(f"rho={rho}: {measured:.4f} vs reference {reference}")
        if abs(measured - oracle) > 0.01:
            failures.append(f"rho={rho}: {measured:.4f} vs oracle {oracle:.4f}")
    announce(1, not failures, "NEC uniform baseline: " + "; ".join(details))
    assert not failures, failures


@pytest.mark.slow
def test_criterion_2_table_reproduction(plan, fig2_adqc_b2):
    failures = []
    for b, row in TABLE_REFERENCE.items():
        for rho, reference in row.items():
            if b == 3:
                measured = fig2_adqc_b2[rho].c_sk_low
            else:
                measured = evaluate_point(
                    SeriesSpec(SchemeSpec("ADQC", b, 2), optimized=True), rho, plan
                ).c_sk_low
            tolerance = max(0.10, 0.10 * reference)
            if abs(measured - reference) > tolerance:
                failures.append(
                    f"b={b} rho={rho}: {measured:.3f} vs {reference} (tol {tolerance:.3f})"
                )
    announce(2, not failures, f"Table grid ADQC B=2: {len(failures)} deviations")
    assert not failures, failures


@pytest.mark.slow
def test_criterion_3_orderings(
    fig2_nec_uniform, fig2_nec_opt, fig2_adqc_b1, fig2_adqc_b2, fig2_gb
):
    """Plotted-curve orderings at every grid point (values clamped at 0,
    as in the reference figure; the guard-band series enters in its
    rate-scaled accounting)."""
    failures = []
    for rho in DEFAULT_RHO_GRID:
        unif = clamp(fig2_nec_uniform[rho].c_sk_low)
        opt = clamp(fig2_nec_opt[rho].c_sk_low)
        b1 = clamp(fig2_adqc_b1[rho].c_sk_low)
        b2 = clamp(fig2_adqc_b2[rho].c_sk_low)
        gb = clamp(fig2_gb[rho].c_sk_low_scaled)
        checks = [
            (b2 >= b1 - 0.03, f"ADQC B2 {b2:.3f} < B1 {b1:.3f} - 0.03"),
            (b1 >= opt - MC_ALLOWANCE, f"ADQC B1 {b1:.3f} < NEC opt {opt:.3f}"),
            (opt >= unif - MC_ALLOWANCE, f"NEC opt {opt:.3f} < NEC unif {unif:.3f}"),
            (unif >= 0.0, f"NEC unif {unif:.3f} < 0"),
            (opt >= gb - MC_ALLOWANCE, f"NEC opt {opt:.3f} < GB {gb:.3f}"),
        ]
        for ok, message in checks:
            if not ok:
                failures.append(f"rho={rho}: {message}")
    announce(3, not failures, f"Fig-2 orderings: {len(failures)} violations")
    assert not failures, failures


@pytest.mark.slow
def test_criterion_4_headline_improvement(fig2_nec_uniform, fig2_adqc_b2):
    ratios = []
    for rho in DEFAULT_RHO_GRID:
        unif = fig2_nec_uniform[rho].c_sk_low
        if unif >= 0.01:  # exclude the exchangeable corner where the
            ratios.append(fig2_adqc_b2[rho].c_sk_low / unif)  # ratio diverges
    mean_ratio = float(np.mean(ratios))
    at_08 = fig2_adqc_b2[0.8].c_sk_low >= 2.0 * fig2_nec_uniform[0.8].c_sk_low
    ok = mean_ratio >= 1.5 and at_08
    announce(
        4,
        ok,
        f"mean ADQC(B2)/NEC-uniform ratio {mean_ratio:.3f} (need >= 1.5); "
        f"2x dominance at rho=0.8: {at_08}",
    )
    assert mean_ratio >= 1.5
    assert at_08


@pytest.fixture(scope="session")
def gamma_b1_rows(plan, fig2_nec_opt, fig2_adqc_b1):
    """gamma for B=1 across b in {2,3,4}; b=3 from the shared sweep."""
    rows, failures = run_gamma(plan, bs=(2, 4), correction_bits=(1,))
    assert not failures, failures
    table = {}
    for row in rows:
        if row.scheme == "adqc_opt":
            table[(row.b, round(row.rho_ab, 6))] = row.gamma
    for rho in DEFAULT_RHO_GRID:
        table[(3, rho)] = gamma_cost(
            fig2_adqc_b1[rho].c_ab, fig2_nec_opt[rho].c_ab, 1.0 / 3.0
        )
    return table


@pytest.mark.slow
def test_criterion_5_gamma_curves(plan, gamma_b1_rows):
    failures = []
    for (b, rho), gamma in sorted(gamma_b1_rows.items()):
        if not 0.8 <= gamma <= 1.6:
            failures.append(f"B=1 b={b} rho={rho}: gamma {gamma:.3f} outside [0.8, 1.6]")
    dip = min(gamma_b1_rows[(3, rho)] for rho in (0.99, 0.995, 0.999))
    if dip >= 1.05:
        failures.append(f"B=1 b=3 never dips below 1.05 at rho>=0.99 (min {dip:.3f})")
    nec = evaluate_point(
        SeriesSpec(SchemeSpec("NEC", 2), optimized=True), 0.999, plan
    )
    adqc = evaluate_point(
        SeriesSpec(SchemeSpec("ADQC", 2, 2), optimized=True), 0.999, plan
    )
    endpoint = gamma_cost(adqc.c_ab, nec.c_ab, 1.0)
    if abs(endpoint - 2.96) > 0.3:
        failures.append(f"B=2 b=2 rho=0.999: gamma {endpoint:.3f} vs 2.96 +/- 0.3")
    announce(
        5,
        not failures,
        f"gamma corridor, b=3 dip {dip:.3f}, B=2 endpoint {endpoint:.3f}; "
        f"{len(failures)} violations",
    )
    assert not failures, failures


def test_criterion_6_property_suite(plan):
    failures = []

    # plug-in MI vs brute-force oracle on hand-built 4x4 pmfs
    pmfs = [
        np.eye(4) * 0.25,
        np.full((4, 4), 1 / 16),
        np.array([[4, 1, 0, 0], [1, 4, 1, 0], [0, 1, 4, 1], [0, 0, 1, 4]]) / 18,
        np.arange(1, 17).reshape(4, 4) / np.arange(1, 17).sum(),
    ]
    for k, pmf in enumerate(pmfs):
        counts = np.round(pmf * 1_000_000).astype(int)
        plug_in = mutual_information(JointPMF(counts, int(counts.sum())))
        oracle = mi_bits_bruteforce(counts / counts.sum())
        if abs(plug_in - oracle) > 1e-12:
            failures.append(f"MI oracle mismatch on pmf {k}")

    # perfect-correlation limit: disagreement < 1e-4 at B=8
    ds = sample_dataset(CorrelationConfig(1.0, 0.8, 0.8), 100_000, seed=61)
    q = ThresholdVector.uniform(3, plan.uniform_span).to_quantizer()
    run = run_adqc(q, q, q, ds, correction_bits=8)
    disagreement = float(np.mean(run.sym_a != run.sym_b))
    if disagreement >= 1e-4:
        failures.append(f"rho=1 disagreement {disagreement}")

    # encode/decode round-trip bound over 1e5 random inputs
    rng = np.random.Generator(np.random.Philox(62))
    xs = rng.uniform(-6, 6, 100_000)
    for bits in (1, 3):
        k = 1 << bits
        from adqsim.quantizer import decode_corrections, encode_corrections

        lengths = q.lengths(q.indices(xs))
        eta = xs - q.lower_edges(q.indices(xs))
        eta_hat = decode_corrections(q, xs, encode_corrections(q, xs, bits), bits)
        if not np.all(np.abs(eta - eta_hat) <= lengths / (2 * k) + 1e-12):
            failures.append(f"round-trip bound violated at B={bits}")

    # monotone half-steps over 5 seeded runs
    ds_small = sample_dataset(CorrelationConfig(0.95, 0.8, 0.8), 30_000, seed=63)
    for seed in range(5):
        cfg = OptimizerConfig(
            scheme=SchemeSpec("NEC", 2),
            design_dataset=ds_small,
            max_outer_iters=2,
            restarts=2,
            evaluation_budget=300,
            seed=seed,
        )
        history = alternate(cfg).history
        previous = None
        for record in history:
            if previous is not None:
                drop = record.half_step == "eve" and record.objective > previous + 1e-12
                rise = record.half_step == "alice_bob" and record.objective < previous - 1e-12
                if drop or rise:
                    failures.append(f"non-monotone half-step, seed {seed}")
            previous = record.objective

    # bit-identical CSV reruns
    import tempfile
    from pathlib import Path

    from adqsim.cli import main

    with tempfile.TemporaryDirectory() as tmp:
        args = [
            "sweep", "--b", "2", "--scheme", "nec_uniform", "--rho-ab",
            "0.9,0.95", "--n-eval", "50000",
        ]
        paths = [Path(tmp) / "a.csv", Path(tmp) / "b.csv"]
        for path in paths:
            assert main(args + ["--out", str(path)]) == 0
        strip = lambda p: [
            line for line in p.read_text().splitlines()
            if not line.startswith("# created")
        ]
        if strip(paths[0]) != strip(paths[1]):
            failures.append("CSV rerun not bit-identical")

    announce(6, not failures, "property suite (oracle MI, rho=1 limit, "
             "round-trip bound, monotone half-steps, CSV determinism)")
    assert not failures, failures
