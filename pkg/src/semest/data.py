"""Multisample datasets: grouped observations, sample weights, CSV ingestion.

A dataset holds ``S`` independent samples indexed ``s = 1..S``.  Rows are
stored grouped (with integer multiplicities); expansion to unit rows is a
view, never the canonical representation.  The covariate support
``v_1..v_K`` is the set of distinct observed covariate vectors, compared
bit-exactly, ordered lexicographically for determinism.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Observation:
    """One grouped data row: ``multiplicity`` identical units from sample
    ``sample`` with covariates ``x`` and (optional) response ``y``."""

    sample: int
    x: np.ndarray
    y: float | None = None
    multiplicity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        if self.multiplicity < 1:
            raise DataError(f"multiplicity must be >= 1, got {self.multiplicity}")
        if self.sample < 1:
            raise DataError(f"sample index must be >= 1, got {self.sample}")


class MultisampleDataset:
    """Immutable container for grouped multisample data.

    Attributes
    ----------
    observations : tuple of Observation
    n_samples : int
        Number of samples S (the largest sample index present).
    sample_sizes : ndarray, shape (S,)
        n_s, the sum of multiplicities per sample.
    n : int
        Total size, sum of all multiplicities.
    support : ndarray, shape (K, p)
        Distinct covariate vectors, lexicographically sorted.
    pooled_freq : ndarray, shape (K,)
        Pooled empirical frequency of each support point (sums to 1).
    support_index : ndarray, shape (len(observations),)
        Index into ``support`` of each observation's covariate vector.
    """

    def __init__(self, observations, n_samples=None):
        obs = tuple(observations)
        if not obs:
            raise DataError("no observations")
        p = obs[0].x.shape[0]
        for o in obs:
            if o.x.shape[0] != p:
                raise DataError(
                    f"covariate dimension mismatch: expected {p}, got {o.x.shape[0]}"
                )
        S = max(o.sample for o in obs) if n_samples is None else int(n_samples)
        sizes = np.zeros(S, dtype=int)
        for o in obs:
            if o.sample > S:
                raise DataError(f"sample index {o.sample} exceeds S={S}")
            sizes[o.sample - 1] += o.multiplicity
        for s in range(S):
            if sizes[s] == 0:
                raise DataError(f"empty sample {s + 1}")

        keys = {}
        for o in obs:
            keys.setdefault(o.x.tobytes(), o.x)
        support = np.array(sorted(keys.values(), key=lambda v: tuple(v)))
        lookup = {v.tobytes(): k for k, v in enumerate(support)}
        idx = np.array([lookup[o.x.tobytes()] for o in obs], dtype=int)

        n = int(sizes.sum())
        freq = np.zeros(len(support))
        for o, k in zip(obs, idx):
            freq[k] += o.multiplicity / n

        self.observations = obs
        self.n_samples = S
        self.sample_sizes = sizes
        self.n = n
        self.p = p
        self.support = support
        self.pooled_freq = freq
        self.support_index = idx

    def expanded(self):
        """View of the data as unit-multiplicity observations."""
        out = []
        for o in self.observations:
            out.extend(
                Observation(o.sample, o.x, o.y, 1) for _ in range(o.multiplicity)
            )
        return MultisampleDataset(out, n_samples=self.n_samples)

    def restricted_to_sample(self, s):
        return MultisampleDataset(
            [o for o in self.observations if o.sample == s], n_samples=None
        )


@dataclass(frozen=True)
class Weights:
    """Sample weights w_s = n_s / n."""

    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if np.any(self.w <= 0):
            raise DataError("all weights must be positive")
        if abs(self.w.sum() - 1.0) > 1e-12:
            raise DataError("weights must sum to 1")

    def __len__(self):
        return len(self.w)


def compute_weights(dataset: MultisampleDataset) -> Weights:
    """Exact plug-in sample weights w_s = n_s / n."""
    return Weights(dataset.sample_sizes / dataset.n)


@dataclass(frozen=True)
class Params:
    """Flat parameter vector partitioned into an interest block and a
    nuisance block via index arrays.  ``labels`` names every coordinate."""

    values: np.ndarray
    interest_idx: tuple[int, ...]
    labels: tuple[str, ...]
    nuisance_idx: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.nuisance_idx is None:
            nuis = tuple(
                i for i in range(len(self.values)) if i not in set(self.interest_idx)
            )
            object.__setattr__(self, "nuisance_idx", nuis)
        if len(self.labels) != len(self.values):
            raise DataError("labels must match parameter dimension")

    @property
    def interest(self):
        return self.values[list(self.interest_idx)]

    @property
    def nuisance(self):
        return self.values[list(self.nuisance_idx)]


def as_vector(params):
    """Accept either a Params or a plain array."""
    if isinstance(params, Params):
        return params.values
    return np.asarray(params, dtype=float)


def load_long_csv(path, sample_base=1):
    """Load the long schema ``sample,y,x1,...,xp``.

    ``sample_base`` is 0 or 1 depending on how the file indexes samples;
    internally samples are always 1-based.
    """
    if sample_base not in (0, 1):
        raise DataError(f"sample_base must be 0 or 1, got {sample_base}")
    obs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("no observations: empty file")
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "sample" or header[1] != "y":
            raise DataError(
                "expected header 'sample,y,x1,...,xp', got " + ",".join(header)
            )
        p = len(header) - 2
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != p + 2:
                raise DataError(f"line {lineno}: expected {p + 2} fields, got {len(row)}")
            try:
                s = int(row[0]) + (1 - sample_base)
                y = float(row[1])
                x = [float(c) for c in row[2:]]
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
            obs.append(Observation(s, np.array(x), y))
    if not obs:
        raise DataError("no observations")
    return MultisampleDataset(obs)


def load_casecontrol_csv(path, transform=None):
    """Load the grouped case-control schema ``age,scar,cases,controls``.

    Controls become sample 1 (y=0), cases sample 2 (y=1).  ``transform``
    maps raw age to the covariate actually used (identity if None); the
    stored covariate order is (scar, transformed age).
    """
    obs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("no observations: empty file")
        header = [h.strip() for h in header]
        if header != ["age", "scar", "cases", "controls"]:
            raise DataError(
                "expected header 'age,scar,cases,controls', got " + ",".join(header)
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DataError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                age = float(row[0])
                scar = float(row[1])
                cases = int(row[2])
                controls = int(row[3])
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
            x2 = transform(age) if transform is not None else age
            x = np.array([scar, x2])
            if controls > 0:
                obs.append(Observation(1, x, 0.0, controls))
            if cases > 0:
                obs.append(Observation(2, x, 1.0, cases))
    if not obs:
        raise DataError("no observations")
    return MultisampleDataset(obs)
