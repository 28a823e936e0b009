"""State spaces, categorical series containers and shared counting primitives.

Categories are coded 1..k internally, whatever their text labels are.
Missing observations are coded with the sentinel ``MISSING`` (-1).  All
containers are immutable after construction and safe to share across
threads; every operation here is a pure function.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

MISSING = -1

__all__ = [
    "MISSING",
    "DarcatError",
    "UnknownLabel",
    "MalformedRow",
    "TooShort",
    "MissingValuePresent",
    "StateSpace",
    "CatSeries",
    "TransitionCounts",
    "EmpiricalTransitionMatrix",
    "parse_series",
    "serialize_series",
    "transition_counts",
    "empirical_transition_matrix",
]


class DarcatError(ValueError):
    """Base class for all errors raised by this package."""


class UnknownLabel(DarcatError):
    """A value cell matched no label of the state space."""


class MalformedRow(DarcatError):
    """A CSV row did not have exactly two columns."""


class TooShort(DarcatError):
    """Fewer than two usable data rows / observations."""


class MissingValuePresent(DarcatError):
    """Operation requires a complete series but missing values are present."""


@dataclass(frozen=True)
class StateSpace:
    """Ordered finite category set with text labels.

    Internal codes are exactly 1..k in label order.  ``ordinal`` records
    whether the category order is meaningful (it changes nothing here but
    drives which regression family is appropriate downstream).
    """

    labels: tuple[str, ...]
    ordinal: bool = False

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise DarcatError(f"state space needs at least 2 categories, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise DarcatError("state space labels must be pairwise distinct")

    @property
    def k(self) -> int:
        return len(self.labels)

    @classmethod
    def from_k(cls, k: int, ordinal: bool = False) -> "StateSpace":
        """Numeric state space with labels '1'..'k'."""
        return cls(tuple(str(j) for j in range(1, k + 1)), ordinal=ordinal)

    def code_of(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise UnknownLabel(f"label {label!r} not in state space {list(self.labels)}") from None

    def label_of(self, code: int) -> str:
        if not 1 <= code <= self.k:
            raise DarcatError(f"code {code} outside 1..{self.k}")
        return self.labels[code - 1]


@dataclass(frozen=True)
class CatSeries:
    """A time-indexed sequence of category codes, possibly with missing values.

    ``obs`` holds codes in 1..k or ``MISSING``; its length is n+1 for a
    series observed at times 0..n.  ``time_labels``, when present, carries
    one opaque stamp per index (no date parsing is attempted).
    """

    space: StateSpace
    obs: tuple[int, ...]
    time_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        obs = tuple(int(v) for v in self.obs)
        object.__setattr__(self, "obs", obs)
        if len(obs) < 2:
            raise TooShort(f"series needs at least 2 observations, got {len(obs)}")
        k = self.space.k
        for i, v in enumerate(obs):
            if v != MISSING and not 1 <= v <= k:
                raise DarcatError(f"observation {v} at index {i} outside {{-1}} U 1..{k}")
        if self.time_labels is not None:
            tl = tuple(str(x) for x in self.time_labels)
            if len(tl) != len(obs):
                raise DarcatError("time_labels length must match obs length")
            object.__setattr__(self, "time_labels", tl)

    def __len__(self) -> int:
        return len(self.obs)

    @property
    def n(self) -> int:
        """Largest time index (observations run 0..n)."""
        return len(self.obs) - 1

    @property
    def has_missing(self) -> bool:
        return MISSING in self.obs

    @property
    def n_missing(self) -> int:
        return sum(1 for v in self.obs if v == MISSING)

    def values(self) -> np.ndarray:
        """Observations as an int array (missing kept as -1)."""
        return np.asarray(self.obs, dtype=np.int64)

    def observed_values(self) -> np.ndarray:
        v = self.values()
        return v[v != MISSING]

    def drop_missing(self) -> "CatSeries":
        """Remove missing entries, closing the gaps (changes adjacency)."""
        keep = [i for i, v in enumerate(self.obs) if v != MISSING]
        if len(keep) < 2:
            raise TooShort("fewer than 2 observed values after dropping missing")
        tl = tuple(self.time_labels[i] for i in keep) if self.time_labels else None
        return CatSeries(self.space, tuple(self.obs[i] for i in keep), tl)

    def longest_complete_segment(self) -> "CatSeries":
        """Longest run of consecutive non-missing observations, ties to the earliest."""
        best_start, best_len, start = 0, 0, None
        for i, v in enumerate(self.obs + (MISSING,)):
            if v != MISSING:
                if start is None:
                    start = i
            elif start is not None:
                if i - start > best_len:
                    best_start, best_len = start, i - start
                start = None
        if best_len < 2:
            raise TooShort("no complete segment of length >= 2")
        sl = slice(best_start, best_start + best_len)
        tl = self.time_labels[sl] if self.time_labels else None
        return CatSeries(self.space, self.obs[sl], tl)

    def observed_pairs(self) -> list[tuple[int, int, int]]:
        """Consecutive observed pairs ``(x, y, h)`` where h >= 1 is the time gap."""
        pairs = []
        prev_idx = None
        for i, v in enumerate(self.obs):
            if v == MISSING:
                continue
            if prev_idx is not None:
                pairs.append((self.obs[prev_idx], v, i - prev_idx))
            prev_idx = i
        return pairs


def parse_series(csv_text: str, space: StateSpace) -> CatSeries:
    """Parse a two-column ``t,value`` CSV into a CatSeries.

    Value cells must be labels of ``space`` or the literal ``NA`` for a
    missing observation.  Rows are kept in file order; the ``t`` column is
    stored verbatim as time labels.
    """
    lines = [ln for ln in csv_text.splitlines() if ln.strip() != ""]
    if not lines:
        raise TooShort("empty input")
    header = [c.strip() for c in lines[0].split(",")]
    if len(header) != 2:
        raise MalformedRow(f"expected 2 header columns, got {len(header)}")
    obs: list[int] = []
    times: list[str] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != 2:
            raise MalformedRow(f"line {lineno}: expected 2 columns, got {len(cells)}")
        t, value = cells
        times.append(t)
        obs.append(MISSING if value == "NA" else space.code_of(value))
    if len(obs) < 2:
        raise TooShort(f"need at least 2 data rows, got {len(obs)}")
    return CatSeries(space, tuple(obs), tuple(times))


def serialize_series(series: CatSeries) -> str:
    """Inverse of :func:`parse_series` (parse -> serialize -> parse round-trips)."""
    out = io.StringIO()
    out.write("t,value\n")
    times = series.time_labels or tuple(str(i) for i in range(len(series)))
    for t, v in zip(times, series.obs):
        cell = "NA" if v == MISSING else series.space.label_of(v)
        out.write(f"{t},{cell}\n")
    return out.getvalue()


@dataclass(frozen=True)
class TransitionCounts:
    """One-step jump counts N[j][j'] with their margins."""

    matrix: np.ndarray  # (k, k) int, [j-1, j'-1]
    row_sums: np.ndarray  # visits of j as a jump origin
    col_sums: np.ndarray  # visits of j' as a jump target
    n_transitions: int

    def __post_init__(self) -> None:
        self.matrix.setflags(write=False)
        self.row_sums.setflags(write=False)
        self.col_sums.setflags(write=False)


def transition_counts(series: CatSeries) -> TransitionCounts:
    """Count jumps j -> j' over all adjacent index pairs.

    The series must be complete; totals equal len(series) - 1.
    """
    if series.has_missing:
        raise MissingValuePresent("transition_counts requires a complete series")
    x = series.values() - 1
    k = series.space.k
    idx = x[:-1] * k + x[1:]
    mat = np.bincount(idx, minlength=k * k).reshape(k, k)
    return TransitionCounts(
        matrix=mat,
        row_sums=mat.sum(axis=1),
        col_sums=mat.sum(axis=0),
        n_transitions=int(mat.sum()),
    )


@dataclass(frozen=True)
class EmpiricalTransitionMatrix:
    """Row-normalised jump frequencies with a per-row validity flag.

    Rows of states never seen as a jump origin are NaN and flagged
    undefined so downstream tests can refuse cleanly instead of working
    with silently zero-filled probabilities.
    """

    probs: np.ndarray  # (k, k) float, NaN on undefined rows
    defined: np.ndarray  # (k,) bool
    counts: TransitionCounts = field(repr=False)

    def __post_init__(self) -> None:
        self.probs.setflags(write=False)
        self.defined.setflags(write=False)


def empirical_transition_matrix(series: CatSeries) -> EmpiricalTransitionMatrix:
    """Estimate the transition matrix by row-normalised jump counts."""
    counts = transition_counts(series)
    rows = counts.row_sums.astype(float)
    defined = rows > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = counts.matrix / rows[:, None]
    probs[~defined] = np.nan
    return EmpiricalTransitionMatrix(probs=probs, defined=defined, counts=counts)
