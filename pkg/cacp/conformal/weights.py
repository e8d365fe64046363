# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`weights`
====================================================

Weight functions over a calibration set. A scheme compares the test covariates with
every calibration entry and returns unnormalized, non-negative weights; normalization
is left to the quantile.

"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

try:
    from typing import ClassVar, Dict, Iterator, Optional, Tuple, Type, TYPE_CHECKING

    if TYPE_CHECKING:
        from . import CalibrationSet
        from ..features import CovariateVector
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

UNDERFLOW_THRESHOLD = 1e-300
"""Weights below this everywhere are treated as a kernel underflow."""

SQUARED = "sqeuclidean"
MANHATTAN = "cityblock"


@dataclass(frozen=True)
class WeightVector:
    """Weights aligned with the entries of a `CalibrationSet`."""

    weights: np.ndarray
    normalized: bool = False
    fallback: bool = False

    def __len__(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def uniform(cls, size: int, *, fallback: bool = False) -> "WeightVector":
        """All ones."""
        return cls(np.ones(size), normalized=False, fallback=fallback)

    def normalize(self) -> "WeightVector":
        """Weights scaled to sum to one."""
        total = float(self.weights.sum())
        if not total > 0.0:
            raise ValueError("degenerate weights")
        return WeightVector(self.weights / total, normalized=True, fallback=self.fallback)


def _subclasses(cls: Type) -> Iterator[Type]:
    for subclass in cls.__subclasses__():
        yield subclass
        yield from _subclasses(subclass)


class WeightScheme:
    """
    Top level weight scheme. Subclasses set ``kind`` and implement
    `cached_weight_matrix`.

    Use `WeightScheme.from_kind` to build a scheme from its name and parameters.
    """

    kind: ClassVar[str] = ""
    aliases: ClassVar[Tuple[str, ...]] = ()
    uses_covariates: ClassVar[bool] = True

    @classmethod
    def matches(cls, kind: str) -> bool:
        """True if ``kind`` names this scheme."""
        return bool(cls.kind) and (kind == cls.kind or kind in cls.aliases)

    @classmethod
    def from_kind(cls, kind: str, **params) -> "WeightScheme":
        """Instantiate the scheme named ``kind`` with ``params``."""
        for possible_type in _subclasses(WeightScheme):
            if possible_type.matches(kind):
                return possible_type(**params)
        raise KeyError("unknown weight scheme {!r}".format(kind))

    def raw_weights(self, x_test: np.ndarray, cal: CalibrationSet) -> np.ndarray:
        """Unnormalized weights of every calibration entry."""
        return self.raw_weight_matrix(x_test[None, :], cal)[0]

    def raw_weight_matrix(self, x_tests: np.ndarray, cal: CalibrationSet) -> np.ndarray:
        """Weights for several test instances at once, shape ``(m, len(cal))``."""
        return self.cached_weight_matrix(PairwiseCache(x_tests, cal))

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        """`raw_weight_matrix` reusing the distances held by ``pairs``."""
        raise NotImplementedError

    def test_weight(self) -> float:
        """Weight the test point would give itself, used for the +inf point mass."""
        return 1.0


class PairwiseCache:
    """
    Distances between fixed test rows and a calibration set, each computed once.

    Shared by every candidate scored on the same rows, so a grid over ``gamma`` or
    ``K`` pays for the distances a single time.

    :param x_tests: standardized test covariates, shape ``(m, d)``
    :param CalibrationSet cal: the calibration set
    """

    def __init__(self, x_tests: np.ndarray, cal: CalibrationSet) -> None:
        self.x_tests = np.asarray(x_tests, dtype=float)
        self.cal = cal
        self._distances: Dict[str, np.ndarray] = {}
        self._order: Optional[np.ndarray] = None

    def distances(self, metric: str) -> np.ndarray:
        """``cdist`` of the test rows and the calibration covariates under ``metric``."""
        if metric not in self._distances:
            if 0 in self.x_tests.shape or len(self.cal) == 0:
                values = np.zeros((self.x_tests.shape[0], len(self.cal)))
            else:
                values = cdist(self.x_tests, self.cal.covariates, metric=metric)
            values.setflags(write=False)
            self._distances[metric] = values
        return self._distances[metric]

    def neighbour_order(self) -> np.ndarray:
        """Calibration indices of every test row, nearest first, ties earliest first."""
        if self._order is None:
            # A stable sort keeps time order among equal distances.
            self._order = np.argsort(self.distances(SQUARED), axis=1, kind="stable")
        return self._order


def squared_distances(x_tests: np.ndarray, cal: CalibrationSet) -> np.ndarray:
    """``||x_t - x_tau||^2`` for every test row and calibration entry."""
    return PairwiseCache(x_tests, cal).distances(SQUARED)


def manhattan_distances(x_tests: np.ndarray, cal: CalibrationSet) -> np.ndarray:
    """``||x_t - x_tau||_1`` for every test row and calibration entry."""
    return PairwiseCache(x_tests, cal).distances(MANHATTAN)


@dataclass(frozen=True)
class UniformScheme(WeightScheme):
    """Every entry weighs 1: plain CQR."""

    kind: ClassVar[str] = "uniform"
    aliases: ClassVar[Tuple[str, ...]] = ("cqr",)
    uses_covariates: ClassVar[bool] = False

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        return np.ones((pairs.x_tests.shape[0], len(pairs.cal)))


@dataclass(frozen=True)
class RBFKernel(WeightScheme):
    """``exp(-gamma * ||x_t - x_tau||^2)``."""

    gamma: float = 1.0
    kind: ClassVar[str] = "rbf"

    def __post_init__(self) -> None:
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        return np.exp(-self.gamma * pairs.distances(SQUARED))


@dataclass(frozen=True)
class LaplacianKernel(WeightScheme):
    """``exp(-gamma * ||x_t - x_tau||_1)``."""

    gamma: float = 1.0
    kind: ClassVar[str] = "laplacian"

    def __post_init__(self) -> None:
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        return np.exp(-self.gamma * pairs.distances(MANHATTAN))


@dataclass(frozen=True)
class KMeansScheme(WeightScheme):
    """Weight 1 for entries in the test point's cluster, else 0."""

    K: int = 3
    seed: int = 0
    kind: ClassVar[str] = "kmeans"

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be positive")

    def assign(self, x_tests: np.ndarray, cal: CalibrationSet) -> np.ndarray:
        """Cluster of each test row under the model fitted on ``cal``."""
        model = cal.kmeans_model(self.K, self.seed)
        return np.asarray([model.predict(x) for x in x_tests], dtype=int)

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        if len(pairs.cal) < self.K:
            raise ValueError("too few points")
        model = pairs.cal.kmeans_model(self.K, self.seed)
        assigned = self.assign(pairs.x_tests, pairs.cal)
        for label in np.unique(assigned):
            if model.cluster_size(int(label)) == 0:
                logger.warning("k-means cluster %d is empty; using uniform weights", label)
        return (model.labels[None, :] == assigned[:, None]).astype(float)


@dataclass(frozen=True)
class KNNScheme(WeightScheme):
    """
    Weight 1 for the ``K`` nearest entries by Euclidean distance, else 0.

    Entries at the same distance as the K-th neighbour are taken earliest first.
    """

    K: int = 100
    kind: ClassVar[str] = "knn"

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be positive")

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        size = len(pairs.cal)
        if self.K >= size:
            return np.ones((pairs.x_tests.shape[0], size))
        chosen = pairs.neighbour_order()[:, : self.K]
        weights = np.zeros((chosen.shape[0], size))
        np.put_along_axis(weights, chosen, 1.0, axis=1)
        return weights


@dataclass(frozen=True)
class NexCPScheme(WeightScheme):
    """
    ``rho ** rank`` where rank 1 is the most recent calibration entry.

    Ranks count entries, not wall-clock hours, so gaps in the data do not
    change the decay.
    """

    rho_decay: float = 0.98
    kind: ClassVar[str] = "nexcp"
    uses_covariates: ClassVar[bool] = False

    def __post_init__(self) -> None:
        if not 0.0 < self.rho_decay <= 1.0:
            raise ValueError("rho_decay must be in (0, 1]")

    def cached_weight_matrix(self, pairs: PairwiseCache) -> np.ndarray:
        size = len(pairs.cal)
        rank = np.arange(size, 0, -1, dtype=float)
        row = np.exp(rank * math.log(self.rho_decay))
        return np.broadcast_to(row, (pairs.x_tests.shape[0], size)).copy()


def _test_matrix(scheme: WeightScheme, x_tests, cal: CalibrationSet) -> np.ndarray:
    if not scheme.uses_covariates:
        x_tests = np.asarray(x_tests, dtype=float)
        return x_tests if x_tests.ndim == 2 else np.atleast_1d(x_tests).reshape(-1, 1)
    x_tests = np.asarray(x_tests, dtype=float)
    if x_tests.ndim != 2 or x_tests.shape[1] != cal.dimension:
        raise ValueError(
            "covariate dimension {} does not match calibration set {}".format(
                x_tests.shape[1:], cal.dimension
            )
        )
    return x_tests


def _underflowed(weights: np.ndarray) -> np.ndarray:
    return ~np.any(weights >= UNDERFLOW_THRESHOLD, axis=-1)


def compute_weights(
    scheme: WeightScheme, x_test, cal: CalibrationSet
) -> WeightVector:
    """
    Unnormalized weights of ``cal`` for one test instance.

    :param WeightScheme scheme: the weight function
    :param x_test: `CovariateVector` or array of the test instance; ignored by
        schemes that do not use covariates
    :param CalibrationSet cal: the calibration set
    :return: weights, uniform (with ``fallback`` set) if every weight underflowed
    :rtype: WeightVector
    """
    x_test = np.asarray(getattr(x_test, "components", x_test), dtype=float).ravel()
    weights = scheme.raw_weights(_test_matrix(scheme, x_test[None, :], cal)[0], cal)
    if _underflowed(weights):
        logger.warning(
            "%s weights vanished over %d calibration entries; using uniform weights",
            scheme.kind,
            len(cal),
        )
        return WeightVector.uniform(len(cal), fallback=True)
    return WeightVector(weights)


def compute_weight_matrix(
    scheme: WeightScheme,
    x_tests,
    cal: CalibrationSet,
    *,
    pairs: Optional[PairwiseCache] = None,
) -> np.ndarray:
    """
    `compute_weights` for every row of ``x_tests``, shape ``(m, len(cal))``.

    Rows whose weights all underflowed are replaced by ones; one warning reports
    how many.

    :param PairwiseCache pairs: distances of the same rows and ``cal`` to reuse
    """
    if pairs is None:
        pairs = PairwiseCache(_test_matrix(scheme, x_tests, cal), cal)
    elif pairs.cal is not cal:
        raise ValueError("pairwise cache belongs to another calibration set")
    weights = np.array(scheme.cached_weight_matrix(pairs), dtype=float)
    vanished = _underflowed(weights)
    if vanished.any():
        logger.warning(
            "%s weights vanished for %d of %d test rows; using uniform weights",
            scheme.kind,
            int(vanished.sum()),
            weights.shape[0],
        )
        weights[vanished] = 1.0
    return weights


def scheme_label(scheme: Optional[WeightScheme]) -> str:
    """Short human readable description, e.g. ``knn(K=100)``."""
    if scheme is None:
        return "none"
    params = ", ".join(
        "{}={}".format(name, getattr(scheme, name))
        for name in getattr(scheme, "__dataclass_fields__", {})
    )
    return "{}({})".format(scheme.kind, params)
