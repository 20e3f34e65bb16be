"""Point patterns and samples of point patterns.

A point pattern is one realization of a finite point process on R^d: a
nonempty list of points.  A sample is n independent patterns together with
the cached totals S_n = sum_i L_i and S_{n,2} = sum_i L_i^2, where L_i is
the number of points in pattern i.  Both containers are immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PointPattern", "Sample", "load_sample", "save_sample"]


@dataclass(frozen=True)
class PointPattern:
    """A finite, nonempty set of points in R^d, stored as an (L, d) array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            # convenience: a flat vector is a list of 1-d points
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError(f"pattern must be a (L, d) array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("pattern needs at least one point of dimension >= 1")
        if not np.isfinite(pts).all():
            raise ValueError("pattern coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Sample:
    """n point patterns with eagerly cached totals s_n and s_n2."""

    patterns: tuple[PointPattern, ...]
    s_n: int = field(init=False)
    s_n2: int = field(init=False)

    def __post_init__(self):
        pats = tuple(
            p if isinstance(p, PointPattern) else PointPattern(p) for p in self.patterns
        )
        if len(pats) < 1:
            raise ValueError("sample needs at least one pattern")
        dims = {p.dim for p in pats}
        if len(dims) != 1:
            raise ValueError(f"patterns have mixed dimensions {sorted(dims)}")
        sizes = [p.size for p in pats]
        object.__setattr__(self, "patterns", pats)
        object.__setattr__(self, "s_n", int(sum(sizes)))
        object.__setattr__(self, "s_n2", int(sum(s * s for s in sizes)))

    @property
    def n(self) -> int:
        return len(self.patterns)

    @property
    def dim(self) -> int:
        return self.patterns[0].dim

    @property
    def ratio(self) -> float:
        """S_n / n, the average number of points per pattern (always >= 1)."""
        return self.s_n / self.n

    def sizes(self) -> np.ndarray:
        return np.array([p.size for p in self.patterns], dtype=np.int64)

    def all_points(self) -> np.ndarray:
        """All S_n points stacked pattern by pattern into an (S_n, d) array."""
        return np.concatenate([p.points for p in self.patterns], axis=0)


def save_sample(sample: Sample, path) -> None:
    """Write a sample as newline-delimited JSON, one pattern per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for pat in sample.patterns:
            fh.write(json.dumps({"points": pat.points.tolist()}) + "\n")


def load_sample(path) -> Sample:
    """Load a newline-delimited JSON sample, validating size and dimensions."""
    patterns = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                pts = record["points"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed pattern record") from exc
            if not isinstance(pts, list) or len(pts) < 1:
                raise ValueError(f"{path}:{lineno}: pattern must have L >= 1 points")
            patterns.append(PointPattern(np.asarray(pts, dtype=float)))
    if not patterns:
        raise ValueError(f"{path}: no patterns found")
    return Sample(tuple(patterns))
