"""Shared domain types: time grids, replicated functional datasets, scalar
covariates, segmentations of [0,1], and run configuration.

All containers are frozen dataclasses holding read-only numpy arrays, so they
are safe to share across concurrent workers. Validation that is cheap runs at
construction; expensive data checks live in :func:`validate_dataset`, which
returns machine-readable violation records instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class ZifqrError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(ZifqrError):
    """An argument violates a documented precondition."""


class DegenerateInputError(ZifqrError):
    """Input is structurally valid but too degenerate to process."""


class IllConditionedBasisError(ZifqrError):
    """Basis Gram matrix is singular or not positive definite."""


class RankDeficientError(ZifqrError):
    """A regression design matrix does not have full column rank."""


class NumericalFailureError(ZifqrError):
    """An optimizer or solver failed to produce a usable solution."""


class DataFormatError(ZifqrError):
    """An external data file violates its schema."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Time grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing observation points in [0,1], L >= 2."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidArgumentError("grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("grid points must be finite")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise InvalidArgumentError("grid points must lie in [0,1]")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgumentError("grid points must be strictly increasing")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def L(self) -> int:
        return self.points.size

    @property
    def spacing(self) -> np.ndarray:
        """Per-interval widths, length L-1."""
        return np.diff(self.points)

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights w with sum(w * f) = trapezoid integral of f."""
        d = self.spacing
        w = np.zeros(self.L)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return w


def build_grid(L: int) -> TimeGrid:
    """L equally spaced points spanning [0,1], endpoints included."""
    if L < 2:
        raise InvalidArgumentError(f"L must be >= 2, got {L}")
    return TimeGrid(np.linspace(0.0, 1.0, L))


# ---------------------------------------------------------------------------
# Replicated functional dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicatedFunctionalDataset:
    """n x J x L replicated measurements on a common grid.

    ``values`` holds non-negative counts (or generic non-negative reals);
    ``observed`` masks missing (i, j, t) cells. Unobserved cells carry an
    arbitrary value and are never read by downstream operations.
    """

    grid: TimeGrid
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3:
            raise InvalidArgumentError("values must be n x J x L")
        if self.observed is None:
            obs = np.ones(vals.shape, dtype=bool)
        else:
            obs = np.asarray(self.observed, dtype=bool)
        if obs.shape != vals.shape:
            raise InvalidArgumentError("observed mask must match values shape")
        if vals.shape[2] != self.grid.L:
            raise InvalidArgumentError("third axis must match grid length")
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "observed", _readonly(obs))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]

    @property
    def L(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class NegativeValue:
    i: int
    j: int
    l: int
    value: float


@dataclass(frozen=True)
class NonFiniteValue:
    i: int
    j: int
    l: int


@dataclass(frozen=True)
class EmptySubject:
    i: int


def validate_dataset(d: ReplicatedFunctionalDataset) -> list:
    """Check dataset invariants; violations are data, not errors.

    Returns an empty list iff all invariants hold: observed values are finite
    and non-negative, and every subject has at least one observed point.
    """
    out: list = []
    obs = d.observed
    vals = d.values
    bad = obs & ~np.isfinite(vals)
    for i, j, l in zip(*np.nonzero(bad)):
        out.append(NonFiniteValue(int(i), int(j), int(l)))
    neg = obs & np.isfinite(vals) & (vals < 0)
    for i, j, l in zip(*np.nonzero(neg)):
        out.append(NegativeValue(int(i), int(j), int(l), float(vals[i, j, l])))
    per_subject = obs.reshape(d.n, -1).any(axis=1)
    for i in np.nonzero(~per_subject)[0]:
        out.append(EmptySubject(int(i)))
    return out


# ---------------------------------------------------------------------------
# Scalar covariates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarCovariates:
    """n x p error-free covariates whose first column is an intercept."""

    Z: np.ndarray
    names: tuple

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] < 1:
            raise InvalidArgumentError("Z must be n x p with p >= 1")
        if not np.all(np.isfinite(Z)):
            raise InvalidArgumentError("Z contains non-finite entries")
        if not np.all(Z[:, 0] == 1.0):
            raise InvalidArgumentError("first column of Z must be identically 1")
        names = tuple(self.names)
        if len(names) != Z.shape[1]:
            raise InvalidArgumentError("one name per covariate column required")
        object.__setattr__(self, "Z", _readonly(Z))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]


# ---------------------------------------------------------------------------
# Segmentation of [0,1]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segmentation:
    """Partition 0 = t_0 < ... < t_M = 1 into half-open segments (t_{m-1}, t_m].

    By convention t = 0 belongs to the first segment.
    """

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise InvalidArgumentError("need at least two boundaries")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise InvalidArgumentError("segmentation must cover [0,1] exactly")
        if np.any(np.diff(b) <= 0):
            raise InvalidArgumentError("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", _readonly(b))

    @classmethod
    def equal(cls, M: int) -> "Segmentation":
        if M < 1:
            raise InvalidArgumentError("segment count must be >= 1")
        return cls(np.linspace(0.0, 1.0, M + 1))

    @property
    def M(self) -> int:
        return self.boundaries.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def segment_of(self, t):
        """0-based segment index for t in [0,1]; scalar or array."""
        idx = np.searchsorted(self.boundaries, t, side="left") - 1
        return np.clip(idx, 0, self.M - 1)

    def point_indices(self, grid: TimeGrid) -> list:
        """Grid-point index arrays per segment."""
        seg = self.segment_of(grid.points)
        return [np.nonzero(seg == m)[0] for m in range(self.M)]

    def validate_against(self, grid: TimeGrid) -> None:
        for m, idx in enumerate(self.point_indices(grid)):
            if idx.size == 0:
                raise InvalidArgumentError(
                    f"segment {m} contains no grid points"
                )


# ---------------------------------------------------------------------------
# Run configuration and RNG streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Estimation controls shared across the pipeline."""

    seed: int = 0
    convergence_tol: float = 1e-3
    max_iter: int = 50
    pi_cap: float = 0.99
    K_candidates: tuple = (4, 6, 8, 10, 12)
    tau_levels: tuple = (0.25, 0.5, 0.75)

    def __post_init__(self):
        if self.convergence_tol <= 0:
            raise InvalidArgumentError("convergence_tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        if not 0.0 < self.pi_cap < 1.0:
            raise InvalidArgumentError("pi_cap must lie in (0,1)")
        taus = tuple(float(t) for t in self.tau_levels)
        if any(not 0.0 < t < 1.0 for t in taus):
            raise InvalidArgumentError("tau levels must lie in (0,1)")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise InvalidArgumentError("tau levels must be strictly increasing")
        object.__setattr__(self, "tau_levels", taus)
        object.__setattr__(self, "K_candidates", tuple(int(k) for k in self.K_candidates))


def substream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic child generator for a (seed, path...) address.

    Identical (seed, path) always yields the same stream, independent of how
    many other streams were drawn; this is the package-wide RNG contract.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path)))
