"""Instance clustering into local groups.

Groups are produced by seeded k-means (k-means++ initialization, Lloyd
iterations, Euclidean distance) or read from a partition file.  Group
indices are 1-based to match the file format; instance indices are
0-based in memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of every instance to one of g nonempty groups."""

    g: int
    assignment: np.ndarray  # length n, values in 1..g
    sizes: np.ndarray  # length g, all >= 1
    centroids: np.ndarray  # g x d group means

    def __post_init__(self):
        assign = np.array(self.assignment, dtype=np.int64, copy=True)
        assign.setflags(write=False)
        object.__setattr__(self, "assignment", assign)
        sizes = np.array(self.sizes, dtype=np.int64, copy=True)
        sizes.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        cent = np.array(self.centroids, dtype=np.float64, copy=True)
        cent.setflags(write=False)
        object.__setattr__(self, "centroids", cent)
        if self.g < 1:
            raise ValueError("need at least one group")
        if assign.min(initial=1) < 1 or assign.max(initial=self.g) > self.g:
            raise ValueError("assignment values must lie in 1..g")
        counts = np.bincount(assign, minlength=self.g + 1)[1:]
        if not np.array_equal(counts, sizes):
            raise ValueError("sizes do not match assignment counts")
        if (sizes < 1).any():
            raise ValueError("every group must be nonempty")
        if cent.shape[0] != self.g:
            raise ValueError("need one centroid per group")

    @property
    def n(self):
        return self.assignment.shape[0]

    def groups(self):
        """List of 0-based instance index arrays, one per group 1..g."""
        return [np.flatnonzero(self.assignment == m + 1) for m in range(self.g)]


def partition_from_assignment(features, assignment):
    """Build a Partition from 1-based group labels, centroids = group means."""
    assign = np.asarray(assignment, dtype=np.int64)
    if assign.shape != (features.n,):
        raise ValueError("assignment length must equal the instance count")
    if assign.min() < 1:
        raise ValueError("group indices are 1-based")
    g = int(assign.max())
    sizes = np.bincount(assign, minlength=g + 1)[1:]
    if (sizes < 1).any():
        empty = int(np.flatnonzero(sizes < 1)[0]) + 1
        raise ValueError(f"group {empty} is empty")
    X = features.values
    centroids = np.stack(
        [X[:, assign == m + 1].mean(axis=1) for m in range(g)]
    )
    return Partition(g=g, assignment=assign, sizes=sizes, centroids=centroids)


def _sq_dists(points, centers):
    # n x g matrix of squared euclidean distances
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ngd,ngd->ng", diff, diff)


def _plusplus_init(points, g, rng):
    # classic k-means++ D^2 seeding; falls back to uniform over the
    # not-yet-chosen points when all remaining distances are zero
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < g:
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(features, g, seed, max_iter=100):
    """Cluster instances into g groups with seeded k-means.

    k-means++ initialization, then Lloyd iterations until the
    assignment stops changing or max_iter is reached.  Distance ties go
    to the lowest group index.  A group left empty by an assignment
    step is reseeded with the point farthest from its own centroid
    (taken from a group that keeps at least 2 members).

    Args:
        features: FeatureMatrix of the instances to cluster.
        g: number of groups, 1 <= g <= n.
        seed: RNG seed; results are deterministic given (features, g, seed).
        max_iter: cap on Lloyd iterations.

    Returns:
        Partition with 1-based group labels and group-mean centroids.
    """
    n = features.n
    if g < 1 or g > n:
        raise ValueError(f"g must lie in 1..{n}, got {g}")
    points = features.values.T.copy()  # n x d
    rng = np.random.default_rng(seed)
    centers = _plusplus_init(points, g, rng)

    assign = np.full(n, -1, dtype=np.int64)  # 0-based during iteration
    for _ in range(max_iter):
        new_assign = np.argmin(_sq_dists(points, centers), axis=1)
        # reseed empty groups before declaring a fixpoint
        counts = np.bincount(new_assign, minlength=g)
        for m in np.flatnonzero(counts == 0):
            dist_own = ((points - centers[new_assign]) ** 2).sum(axis=1)
            donors = np.flatnonzero(counts[new_assign] >= 2)
            far = donors[np.argmax(dist_own[donors])]
            counts[new_assign[far]] -= 1
            new_assign[far] = m
            counts[m] = 1
            centers[m] = points[far]
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for m in range(g):
            centers[m] = points[assign == m].mean(axis=0)

    return partition_from_assignment(features, assign + 1)


def write_partition(partition, comments=()):
    """Serialize as 'instance_idx group_idx' lines, 1-based, one per instance."""
    lines = [f"# {c}" for c in comments]
    for i, m in enumerate(partition.assignment, start=1):
        lines.append(f"{i} {m}")
    return "\n".join(lines) + "\n"


def read_partition(text, features):
    """Parse a partition file and validate it against the instance count.

    Every instance 1..n must appear exactly once and every group up to
    the largest index must be nonempty.
    """
    n = features.n
    assign = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("#") or raw.strip() == "":
            continue
        parts = raw.split()
        if len(parts) != 2:
            raise ValueError(f"line {line_no}: expected 'instance_idx group_idx'")
        try:
            inst, grp = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {line_no}: expected two integers") from None
        if not 1 <= inst <= n:
            raise ValueError(f"line {line_no}: instance {inst} out of range 1..{n}")
        if seen[inst - 1]:
            raise ValueError(f"line {line_no}: instance {inst} assigned twice")
        if grp < 1:
            raise ValueError(f"line {line_no}: group indices are 1-based")
        seen[inst - 1] = True
        assign[inst - 1] = grp
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0]) + 1
        raise ValueError(f"partition does not cover instance {missing}")
    return partition_from_assignment(features, assign)
