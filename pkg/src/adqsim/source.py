"""Correlated Gaussian feature source for Alice, Bob, and Eve.

The three parties observe one scalar feature each per measurement. A batch
of measurements is modelled as i.i.d. draws of a zero-mean trivariate
Gaussian vector (x, y, z) with unit variances and pairwise correlations
(rho_ab, rho_ae, rho_be).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import CorrelationOutOfRange, NotPositiveSemidefinite

# Counter-based generator; recorded in every output file so datasets can be
# regenerated bit-identically from (config, n, seed).
GENERATOR_NAME = "numpy-philox4x64"

# Eigenvalues above this (negative) floor are clamped to zero so that
# boundary configs such as rho_ab = 1 (singular covariance) still sample.
EIG_TOLERANCE = 1e-10


class TriSample(NamedTuple):
    """One draw of the (Alice, Bob, Eve) features."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class CorrelationConfig:
    """Pairwise correlations of the unit-variance Gaussian triple."""

    rho_ab: float
    rho_ae: float
    rho_be: float

    def matrix(self) -> np.ndarray:
        """The implied 3x3 correlation matrix (rows/cols: x, y, z)."""
        return np.array(
            [
                [1.0, self.rho_ab, self.rho_ae],
                [self.rho_ab, 1.0, self.rho_be],
                [self.rho_ae, self.rho_be, 1.0],
            ]
        )


def validate_config(cfg: CorrelationConfig) -> None:
    """Check that ``cfg`` describes a valid Gaussian source.

    Raises
    ------
    CorrelationOutOfRange
        If any correlation lies outside [-1, 1].
    NotPositiveSemidefinite
        If the implied correlation matrix has an eigenvalue below
        ``-EIG_TOLERANCE``. The offending eigenvalue is carried on the
        exception.
    """
    for name in ("rho_ab", "rho_ae", "rho_be"):
        value = getattr(cfg, name)
        if not -1.0 <= value <= 1.0:
            raise CorrelationOutOfRange(f"{name}={value} is outside [-1, 1]")
    smallest = float(np.linalg.eigvalsh(cfg.matrix())[0])
    if smallest < -EIG_TOLERANCE:
        raise NotPositiveSemidefinite(smallest)


class Dataset:
    """Immutable batch of TriSamples plus the recipe that produced it.

    Samples are stored as an (n, 3) float array; the ``x``/``y``/``z``
    properties expose read-only per-party columns for vectorised use.
    """

    def __init__(self, samples: np.ndarray, seed: int, config: CorrelationConfig):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise ValueError("samples must have shape (n, 3)")
        samples.setflags(write=False)
        self._samples = samples
        self.seed = int(seed)
        self.config = config

    @property
    def x(self) -> np.ndarray:
        return self._samples[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self._samples[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self._samples[:, 2]

    def __len__(self) -> int:
        return self._samples.shape[0]

    def __getitem__(self, i: int) -> TriSample:
        return TriSample(*self._samples[i])

    def __iter__(self) -> Iterator[TriSample]:
        for row in self._samples:
            yield TriSample(*row)


def _sqrt_factor(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition.

    Negative eigenvalues within EIG_TOLERANCE of zero are clamped so that
    rank-deficient configs (e.g. rho_ab = 1) factor cleanly.
    """
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals[0] < -EIG_TOLERANCE:
        raise NotPositiveSemidefinite(float(eigvals[0]))
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def sample_dataset(cfg: CorrelationConfig, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. feature triples, deterministically in ``seed``.

    The generator is counter-based (Philox), so re-generating with the same
    (cfg, n, seed) yields a bit-identical dataset.
    """
    validate_config(cfg)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    factor = _sqrt_factor(cfg.matrix())
    rng = np.random.Generator(np.random.Philox(key=seed))
    normals = rng.standard_normal((n, 3))
    return Dataset(normals @ factor.T, seed, cfg)


def export_csv(ds: Dataset, path: str | Path) -> None:
    """Write samples as ``x,y,z`` CSV with a JSON metadata sidecar."""
    path = Path(path)
    with path.open("w") as f:
        f.write("x,y,z\n")
        for row in ds._samples:
            f.write(f"{float(row[0])!r},{float(row[1])!r},{float(row[2])!r}\n")
    meta = {
        "generator": GENERATOR_NAME,
        "seed": ds.seed,
        "n": len(ds),
        "rho_ab": ds.config.rho_ab,
        "rho_ae": ds.config.rho_ae,
        "rho_be": ds.config.rho_be,
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(meta, indent=2) + "\n"
    )


def import_csv(path: str | Path) -> Dataset:
    """Load a dataset written by :func:`export_csv`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    samples = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cfg = CorrelationConfig(meta["rho_ab"], meta["rho_ae"], meta["rho_be"])
    return Dataset(samples, meta["seed"], cfg)
