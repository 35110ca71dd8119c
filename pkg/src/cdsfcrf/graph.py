"""Stochastic clique sampling on a nominally fully connected pixel graph.

Every pixel is a node; each unordered pair of distinct nodes is a candidate
clique. A candidate (i, j) becomes active according to the product of a
spatial affinity (Gaussian in pixel distance) and a data affinity (Gaussian
in observed intensity difference) compared against the sparsity factor
``gamma``:

* ``"threshold"`` mode: active iff ``P * Q >= gamma``.
* ``"stochastic"`` mode: active iff ``U * gamma <= P * Q`` where ``U`` is a
  uniform draw keyed by ``(seed, iteration, i, j)``.

The keyed draw is a pure function of the pair, so the realised clique set
does not depend on enumeration order or on how pairs are split across
workers.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DimensionError, ParameterError
from .transform import as_image

MODES = ("stochastic", "threshold")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class CliqueSamplingConfig:
    """Parameters of the clique indicator.

    ``radius`` bounds the candidate pixel distance; ``None`` picks
    ``ceil(6 * sigma_s)`` and ``0`` enumerates every pair of the image.
    """

    gamma: float = 0.05
    sigma_s: float = 1.5
    sigma_d: float = 0.1
    mode: str = "stochastic"
    radius: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if not self.sigma_s > 0:
            raise ParameterError(f"sigma_s must be > 0, got {self.sigma_s}")
        if not self.sigma_d > 0:
            raise ParameterError(f"sigma_d must be > 0, got {self.sigma_d}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.radius is not None and self.radius < 0:
            raise ParameterError(f"radius must be >= 0, got {self.radius}")

    @property
    def candidate_radius(self):
        if self.radius is None:
            return int(math.ceil(6.0 * self.sigma_s))
        return int(self.radius)


@dataclass(frozen=True)
class CliqueSet:
    """Active pairwise cliques, stored once per unordered pair with i < j.

    ``first`` and ``second`` are flat row-major node indices into an image of
    shape ``(height, width)``.
    """

    first: np.ndarray
    second: np.ndarray
    width: int
    height: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.width * self.height
        if self.first.shape != self.second.shape:
            raise DimensionError("clique endpoint arrays differ in length")
        if self.first.size:
            if np.any(self.first >= self.second):
                raise ParameterError("clique pairs must satisfy i < j")
            if self.first.min() < 0 or self.second.max() >= n:
                raise DimensionError(f"clique index outside [0, {n})")
        self.first.setflags(write=False)
        self.second.setflags(write=False)

    @property
    def shape(self):
        return (self.height, self.width)

    def __len__(self):
        return int(self.first.size)

    def pairs(self):
        return set(zip(self.first.tolist(), self.second.tolist()))

    def degrees(self):
        n = self.width * self.height
        return np.bincount(self.first, minlength=n) + np.bincount(self.second, minlength=n)

    def neighbors(self, i):
        """Partners of node `i` (both orientations), sorted."""
        out = np.concatenate([self.second[self.first == i], self.first[self.second == i]])
        return np.sort(out)

    def adjacency(self):
        """Per-node partner lists; symmetric by construction."""
        n = self.width * self.height
        lists = [[] for _ in range(n)]
        for a, b in zip(self.first.tolist(), self.second.tolist()):
            lists[a].append(b)
            lists[b].append(a)
        return [sorted(x) for x in lists]

    def dump(self, fh):
        """Write the debug text format: a header comment then ``i j`` per line."""
        fh.write(f"# cliques {self.width}x{self.height} n={len(self)}\n")
        for a, b in zip(self.first.tolist(), self.second.tolist()):
            fh.write(f"{a} {b}\n")


def _node_coords(i, width):
    return divmod(int(i), int(width))


def spatial_affinity(i, j, sigma_s, dims):
    """Gaussian spatial affinity between distinct nodes of a ``(height, width)`` grid."""
    if i == j:
        raise ParameterError("self-pairs are not cliques")
    _, width = dims
    ri, ci = _node_coords(i, width)
    rj, cj = _node_coords(j, width)
    d2 = (ri - rj) ** 2 + (ci - cj) ** 2
    return math.exp(-d2 / (2.0 * sigma_s**2))


def data_affinity(v_i, v_j, sigma_d):
    """Gaussian affinity of two observed intensities."""
    if not (math.isfinite(v_i) and math.isfinite(v_j)):
        raise ParameterError("intensities must be finite")
    return math.exp(-((v_i - v_j) ** 2) / (2.0 * sigma_d**2))


def keyed_uniform(seed, iteration, first, second):
    """Uniform [0, 1) draws that depend only on ``(seed, iteration, i, j)``.

    A splitmix64 finaliser is chained over the four key words; the top 53
    bits of the result form the double.
    """
    first = np.asarray(first, dtype=np.uint64)
    second = np.asarray(second, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = np.full(first.shape, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
        for word in (np.uint64(int(iteration) & 0xFFFFFFFFFFFFFFFF), first, second):
            h = _splitmix(h + _GOLDEN + word)
        h = _splitmix(h)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def candidate_pairs(height, width, radius):
    """All unordered node pairs within `radius` pixels (``0`` = every pair).

    Returns ``(first, second, dist2)`` with ``first < second``.
    """
    n = height * width
    if radius == 0:
        first, second = np.triu_indices(n, k=1)
        first = first.astype(np.int64)
        second = second.astype(np.int64)
        r1, c1 = np.divmod(first, width)
        r2, c2 = np.divmod(second, width)
        return first, second, ((r1 - r2) ** 2 + (c1 - c2) ** 2).astype(np.float64)

    # Half-plane of offsets so each unordered pair appears once: dy > 0, or
    # dy == 0 and dx > 0. Node j = i + dy * width + dx is then always > i.
    firsts, seconds, d2s = [], [], []
    rows, cols = np.indices((height, width))
    for dy in range(0, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx <= 0:
                continue
            d2 = dy * dy + dx * dx
            if d2 > radius * radius or dy >= height or abs(dx) >= width:
                continue
            r0 = rows[: height - dy, max(0, -dx): width - max(0, dx)]
            c0 = cols[: height - dy, max(0, -dx): width - max(0, dx)]
            a = (r0 * width + c0).ravel()
            firsts.append(a)
            seconds.append(a + dy * width + dx)
            d2s.append(np.full(a.size, float(d2)))
    if not firsts:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), np.empty(0)
    first = np.concatenate(firsts).astype(np.int64)
    second = np.concatenate(seconds).astype(np.int64)
    order = np.lexsort((second, first))
    return first[order], second[order], np.concatenate(d2s)[order]


def pair_affinity(obs_spatial, cfg, first, second, dist2):
    """Product ``P^s * Q^d`` for each candidate pair."""
    v = obs_spatial.ravel()
    diff = v[first] - v[second]
    return np.exp(-dist2 / (2.0 * cfg.sigma_s**2) - diff * diff / (2.0 * cfg.sigma_d**2))


class CliqueSampler:
    """Candidate pairs and affinities cached for repeated draws.

    The observation image is fixed during a reconstruction, so only the keyed
    uniforms change between iterations.
    """

    def __init__(self, obs_spatial, cfg, dims=None):
        obs = as_image(obs_spatial)
        if dims is not None and tuple(dims) != obs.shape:
            raise DimensionError(f"observation shape {obs.shape} does not match {tuple(dims)}")
        self.cfg = cfg
        self.height, self.width = obs.shape
        self.first, self.second, dist2 = candidate_pairs(
            self.height, self.width, cfg.candidate_radius
        )
        self.affinity = pair_affinity(obs, cfg, self.first, self.second, dist2)
        if cfg.mode == "stochastic":
            # Pairs with affinity >= gamma are active for every draw U < 1.
            self._sure = self.affinity >= cfg.gamma
        else:
            self._sure = None

    def sample(self, iteration=0):
        cfg = self.cfg
        if cfg.mode == "threshold":
            keep = self.affinity >= cfg.gamma
        else:
            keep = self._sure.copy()
            rest = np.flatnonzero(~self._sure)
            draws = keyed_uniform(cfg.seed, iteration, self.first[rest], self.second[rest])
            keep[rest] = draws * cfg.gamma <= self.affinity[rest]
        meta = {
            "seed": cfg.seed,
            "iteration": int(iteration),
            "mode": cfg.mode,
            "gamma": cfg.gamma,
            "sigma_s": cfg.sigma_s,
            "sigma_d": cfg.sigma_d,
            "radius": cfg.candidate_radius,
        }
        return CliqueSet(self.first[keep], self.second[keep], self.width, self.height, meta)


def sample_cliques(obs_spatial, cfg, iteration=0, dims=None):
    """Draw the active clique set for one iteration.

    Parameters
    ----------
    obs_spatial : array_like
        Spatial-domain observation image providing the data affinity.
    cfg : CliqueSamplingConfig
    iteration : int
        Mixed into the RNG key so successive resamples differ.
    dims : tuple, optional
        Expected ``(height, width)``; checked against `obs_spatial`.
    """
    return CliqueSampler(obs_spatial, cfg, dims).sample(iteration)


def expected_degree(cfg, obs_spatial):
    """Mean number of active cliques per node.

    In stochastic mode this is the expectation over the keyed draws,
    ``mean_i sum_j min(1, P*Q / gamma)``; with ``gamma == 0`` every candidate
    is active. In threshold mode it is the realised mean degree.
    """
    obs = as_image(obs_spatial)
    height, width = obs.shape
    first, second, dist2 = candidate_pairs(height, width, cfg.candidate_radius)
    aff = pair_affinity(obs, cfg, first, second, dist2)
    if cfg.mode == "threshold":
        weight = (aff >= cfg.gamma).astype(np.float64)
    elif cfg.gamma == 0:
        weight = np.ones_like(aff)
    else:
        weight = np.minimum(1.0, aff / cfg.gamma)
    # Each pair adds to the degree of both endpoints.
    return 2.0 * float(weight.sum()) / (height * width)
