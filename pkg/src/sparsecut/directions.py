"""Random projection directions: correlated Gaussian chains, the shuffled
sampler, a +-1 coin approximation, and Monte-Carlo checks of their tails.

All randomness comes from counter-based Philox generators. A trial's stream
is ``trial_rng(master, i)``, so a certificate can name the exact chain it
used. Normals are produced by the Box-Muller transform on Philox uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def trial_rng(master: int, *keys: int) -> np.random.Generator:
    """Independent Philox stream for sub-seed ``keys`` of a master seed."""
    seq = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def as_rng(rng: np.random.Generator | int) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else trial_rng(int(rng))


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal samples by Box-Muller."""
    size = int(np.prod(shape))
    half = (size + 1) // 2
    radius = np.sqrt(-2.0 * np.log1p(-rng.random(half)))
    angle = 2.0 * np.pi * rng.random(half)
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:size].reshape(shape)


@dataclass
class DirectionChain:
    """Directions ``u_1..u_r`` in R^d, one per row of ``vectors``."""

    vectors: np.ndarray
    rho: float
    kind: str
    # For shuffled prefixes: which list each slot of the full shuffle came
    # from (0 correlated, 1 independent), and the prefix length chosen.
    interleaving: tuple[int, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def negate(self) -> "DirectionChain":
        return DirectionChain(-self.vectors, self.rho, self.kind, self.interleaving)


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [0, 1], got {rho}")


def sample_chain(d: int, R: int, rho: float, rng: np.random.Generator | int) -> DirectionChain:
    """``u_1`` standard normal, ``u_{r+1} = rho u_r + sqrt(1 - rho^2) g_r``."""
    if d < 1 or R < 1:
        raise ValueError("dimension and chain length must be positive")
    _check_rho(rho)
    rng = as_rng(rng)
    noise = standard_normal(rng, (R, d))
    out = np.empty((R, d))
    out[0] = noise[0]
    tail = math.sqrt(1.0 - rho * rho)
    for r in range(1, R):
        out[r] = rho * out[r - 1] + tail * noise[r]
    return DirectionChain(out, rho, "correlated" if rho > 0 else "independent")


def sample_shuffled(d: int, R: int, rho: float, rng: np.random.Generator | int) -> DirectionChain:
    """Shuffle a rho-correlated chain with an independent one and keep a prefix.

    Both chains have length R. The interleaving is uniform among the
    C(2R, R) order-preserving merges and the prefix length is uniform on
    ``1..R``.
    """
    rng = as_rng(rng)
    corr = sample_chain(d, R, rho, rng).vectors
    indep = sample_chain(d, R, 0.0, rng).vectors
    slots = np.zeros(2 * R, dtype=int)
    slots[rng.choice(2 * R, size=R, replace=False)] = 1
    merged = np.empty((2 * R, d))
    merged[slots == 0] = corr
    merged[slots == 1] = indep
    r = int(rng.integers(1, R + 1))
    return DirectionChain(merged[:r], rho, "shuffled-prefix", tuple(int(s) for s in slots))


def default_coin_count(n: int) -> int:
    """Columns per direction for the +-1 sampler, ``ceil(9 log2 n)``."""
    return max(1, math.ceil(9 * math.log2(max(n, 2))))


class SignMatrixSampler:
    """Directions ``u = U 1/sqrt(k)`` from a +-1 matrix ``U`` of shape (d, k).

    ``step(rho)`` replaces ``U`` by a rho-correlated copy: each entry is kept
    with probability rho and redrawn as a fair sign otherwise.
    """

    def __init__(self, d: int, k: int, rng: np.random.Generator | int):
        if d < 1 or k < 1:
            raise ValueError("d and k must be positive")
        self.rng = as_rng(rng)
        self.k = k
        self.matrix = self._signs((d, k))

    def _signs(self, shape) -> np.ndarray:
        return np.where(self.rng.random(shape) < 0.5, -1, 1).astype(np.int8)

    def direction(self) -> np.ndarray:
        return self.matrix.sum(axis=1) / math.sqrt(self.k)

    def step(self, rho: float) -> np.ndarray:
        _check_rho(rho)
        keep = self.rng.random(self.matrix.shape) < rho
        self.matrix = np.where(keep, self.matrix, self._signs(self.matrix.shape)).astype(np.int8)
        return self.direction()


def sample_pm1_chain(d: int, R: int, rho: float, k: int,
                     rng: np.random.Generator | int) -> DirectionChain:
    if R < 1:
        raise ValueError("chain length must be positive")
    _check_rho(rho)
    sampler = SignMatrixSampler(d, k, rng)
    out = [sampler.direction()]
    for _ in range(R - 1):
        out.append(sampler.step(rho))
    return DirectionChain(np.array(out), rho, "pm1")


def pm1_stretch_tail(k: int, rho: float, t: float, samples: int,
                     rng: np.random.Generator | int, d: int = 8) -> float:
    """Empirical ``Pr[v.u_hat > rho v.u + t sqrt(1-rho^2)]`` for a random unit v.

    ``u`` and ``u_hat`` are consecutive directions of the +-1 sampler with
    ``k`` columns. The sign matrices are drawn in batches.
    """
    rng = as_rng(rng)
    v = standard_normal(rng, (d,))
    v /= np.linalg.norm(v)
    margin = t * math.sqrt(1.0 - rho * rho)
    hits = 0
    batch = max(1, 2_000_000 // (d * k))
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        u = np.where(rng.random((b, d, k)) < 0.5, -1.0, 1.0)
        fresh = np.where(rng.random((b, d, k)) < 0.5, -1.0, 1.0)
        u_hat = np.where(rng.random((b, d, k)) < rho, u, fresh)
        pu = np.einsum("i,bij->b", v, u) / math.sqrt(k)
        pv = np.einsum("i,bij->b", v, u_hat) / math.sqrt(k)
        hits += int(np.count_nonzero(pv > rho * pu + margin))
        done += b
    return hits / samples


def isoperimetry_violation_rate(delta: float, rho: float, eps: float, trials: int,
                                rng: np.random.Generator | int) -> float:
    """Monte-Carlo rate of points whose correlated copy rarely lands in a halfspace.

    The set is the halfspace ``{u : u_1 >= q}`` of Gaussian measure ``delta``.
    For each sampled ``u`` the chance that a rho-correlated copy lands in
    the halfspace is evaluated exactly from the one-dimensional conditional
    normal; the returned rate is the fraction of ``u`` for which that chance
    is below ``(eps * delta) ** (1 / (1 - rho))``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("correlation must lie in [0, 1) for this check")
    if not 0.0 < delta <= 1.0 or not 0.0 < eps:
        raise ValueError("delta must lie in (0, 1] and eps must be positive")
    rng = as_rng(rng)
    floor = (eps * delta) ** (1.0 / (1.0 - rho))
    if delta >= 1.0:
        return 0.0
    q = stats.norm.isf(delta)
    u1 = standard_normal(rng, (trials,))
    inner = stats.norm.sf((q - rho * u1) / math.sqrt(1.0 - rho * rho))
    return float(np.count_nonzero(inner < floor)) / trials


def isoperimetry_exact_rate(delta: float, rho: float, eps: float) -> float:
    """Closed form of the rate estimated by :func:`isoperimetry_violation_rate`."""
    if delta >= 1.0:
        return 0.0
    floor = (eps * delta) ** (1.0 / (1.0 - rho))
    q = stats.norm.isf(delta)
    if rho == 0.0:
        return 1.0 if delta < floor else 0.0
    # inner < floor  iff  u_1 < (q - sqrt(1-rho^2) * isf(floor)) / rho
    cut = (q - math.sqrt(1.0 - rho * rho) * stats.norm.isf(floor)) / rho
    return float(stats.norm.cdf(cut))
