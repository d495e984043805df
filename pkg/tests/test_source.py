import numpy as np
import pytest

from adqsim.errors import CorrelationOutOfRange, NotPositiveSemidefinite
from adqsim.source import (
    CorrelationConfig,
    Dataset,
    TriSample,
    export_csv,
    import_csv,
    sample_dataset,
    validate_config,
)


def test_validate_accepts_reference_config():
    validate_config(CorrelationConfig(0.9, 0.8, 0.8))


def test_validate_accepts_rank_deficient_boundary():
    validate_config(CorrelationConfig(1.0, 0.8, 0.8))


def test_validate_rejects_non_psd():
    # det = 0.36 - 0.64 = -0.28 by direct expansion
    with pytest.raises(NotPositiveSemidefinite) as err:
        validate_config(CorrelationConfig(0.0, 0.8, 0.8))
    assert err.value.eigenvalue < 0


def test_validate_rejects_out_of_range():
    with pytest.raises(CorrelationOutOfRange):
        validate_config(CorrelationConfig(1.2, 0.0, 0.0))


def test_perfect_correlation_gives_identical_xy():
    ds = sample_dataset(CorrelationConfig(1.0, 0.8, 0.8), 100, seed=5)
    assert np.max(np.abs(ds.x - ds.y)) <= 1e-12


def test_sample_covariance_converges():
    cfg = CorrelationConfig(0.9, 0.8, 0.8)
    ds = sample_dataset(cfg, 1_000_000, seed=11)
    samples = np.column_stack([ds.x, ds.y, ds.z])
    # independent covariance computation, biased normalisation
    centered = samples - samples.mean(axis=0)
    cov = centered.T @ centered / len(ds)
    assert np.max(np.abs(cov - cfg.matrix())) < 0.01


def test_determinism_bit_identical():
    cfg = CorrelationConfig(0.9, 0.8, 0.8)
    a = sample_dataset(cfg, 1000, seed=7)
    b = sample_dataset(cfg, 1000, seed=7)
    assert np.array_equal(np.asarray(a.x), np.asarray(b.x))
    assert np.array_equal(np.asarray(a.z), np.asarray(b.z))
    c = sample_dataset(cfg, 1000, seed=8)
    assert not np.array_equal(np.asarray(a.x), np.asarray(c.x))


def test_marginals_standard_normal():
    n = 200_000
    bound = 5.0 / np.sqrt(n)
    ds = sample_dataset(CorrelationConfig(0.95, 0.8, 0.8), n, seed=3)
    for column in (ds.x, ds.y, ds.z):
        assert abs(column.mean()) < bound
        assert abs(column.var() - 1.0) < bound


@pytest.mark.parametrize("seed", range(20))
def test_sample_correlation_close(seed):
    n = 100_000
    ds = sample_dataset(CorrelationConfig(0.9, 0.8, 0.8), n, seed=seed)
    r = np.corrcoef(ds.x, ds.y)[0, 1]
    assert abs(r - 0.9) <= 5.0 / np.sqrt(n)


def test_role_swap_is_exchangeable():
    n = 400_000
    swapped_cfg = CorrelationConfig(0.8, 0.9, 0.8)  # y <-> z of (0.9, 0.8, 0.8)
    ds = sample_dataset(CorrelationConfig(0.9, 0.8, 0.8), n, seed=2)
    sw = sample_dataset(swapped_cfg, n, seed=2)
    tol = 5.0 / np.sqrt(n)
    assert abs(np.corrcoef(ds.x, ds.y)[0, 1] - np.corrcoef(sw.x, sw.z)[0, 1]) < tol
    assert abs(np.corrcoef(ds.x, ds.z)[0, 1] - np.corrcoef(sw.x, sw.y)[0, 1]) < tol


def test_dataset_sequence_protocol():
    ds = sample_dataset(CorrelationConfig(0.9, 0.8, 0.8), 10, seed=1)
    assert len(ds) == 10
    first = ds[0]
    assert isinstance(first, TriSample)
    assert first.x == ds.x[0]
    assert len(list(iter(ds))) == 10


def test_dataset_immutable():
    ds = sample_dataset(CorrelationConfig(0.9, 0.8, 0.8), 10, seed=1)
    with pytest.raises(ValueError):
        ds.x[0] = 99.0


def test_csv_round_trip(tmp_path):
    ds = sample_dataset(CorrelationConfig(0.9, 0.8, 0.8), 50, seed=9)
    path = tmp_path / "data.csv"
    export_csv(ds, path)
    assert path.read_text().splitlines()[0] == "x,y,z"
    back = import_csv(path)
    assert back.seed == ds.seed
    assert back.config == ds.config
    assert np.array_equal(np.asarray(back.x), np.asarray(ds.x))
