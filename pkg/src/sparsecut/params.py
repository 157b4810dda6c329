"""Solver constants and the quantities derived from n and epsilon."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass


class ParameterError(ValueError):
    """A user-supplied parameter is outside its valid range."""


def epsilon_range(n: int) -> tuple[float, float]:
    """Valid epsilon interval ``[1/log2 n, 1/2]``."""
    return 1.0 / math.log2(max(n, 3)), 0.5


def check_epsilon(n: int, epsilon: float) -> float:
    """Validate epsilon for an n-vertex instance.

    Values above 1/2 or not positive are rejected. Values below ``1/log2 n``
    are raised to that floor with a warning, since the lower end of the
    range is only fixed up to a constant.
    """
    if not (0.0 < epsilon <= 0.5):
        raise ParameterError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    low, _ = epsilon_range(n)
    if epsilon < low:
        warnings.warn(f"epsilon {epsilon} below 1/log2(n) = {low:.4f}; using {low:.4f}")
        return low
    return epsilon


@dataclass(frozen=True)
class Params:
    """Constants of the cut-or-flow oracle for an n-vertex instance."""

    n: int
    epsilon: float
    c: float = 1 / 8
    sigma: float = 1 / 4
    gamma: float = 1 / 8
    eta: float = 1 / 4
    lambda_min: float = 0.1
    trial_factor: float = 8.0
    rounds_constant: float = 4.0
    phi_tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.c <= 0.25:
            raise ParameterError("c must lie in (0, 1/4]")
        if not 0 < self.eta < 0.5:
            raise ParameterError("eta must lie in (0, 1/2)")
        if self.sigma <= 0 or self.gamma <= 0 or self.lambda_min <= 0:
            raise ParameterError("sigma, gamma and lambda_min must be positive")

    @property
    def log_n(self) -> float:
        return math.log2(max(self.n, 2))

    @property
    def L(self) -> float:
        """Squared-distance threshold of a long pair."""
        return self.epsilon / 4

    @property
    def R(self) -> int:
        """Number of chaining hops."""
        return max(1, math.ceil(math.sqrt(self.epsilon * self.log_n)))

    @property
    def kappa(self) -> float:
        return 24 * self.R / (self.c * self.L)

    @property
    def beta(self) -> float:
        """Degree bound of a round's demand graph."""
        return 12 / (self.c * self.L)

    @property
    def delta(self) -> float:
        return self.gamma * self.c / 16

    @property
    def trial_cap(self) -> int:
        return max(1, math.ceil(self.trial_factor * self.n ** self.epsilon))

    @property
    def probe_count(self) -> int:
        """Direct FlowAndCut probes tried before the multiplicative-weights loop."""
        return max(1, math.ceil(self.log_n))

    @property
    def demand_target(self) -> float:
        """Long pairs to collect per round: ``n^(1-eps)/2``."""
        return self.n ** (1 - self.epsilon) / 2

    @property
    def max_rounds(self) -> int:
        """Round budget ``ceil(C n^(2 eps) ln^2 n)`` of the oracle loop."""
        ln = math.log(max(self.n, 2))
        return max(1, math.ceil(self.rounds_constant * self.n ** (2 * self.epsilon) * ln * ln))

    def chain_plan(self) -> tuple[int, float]:
        """Chain length and correlation of the direction sampler.

        Short chains (R < 7) use one independent direction; longer ones use
        R directions with correlation ``1 - 1/floor(R/7)``.
        """
        return chain_plan(self.R)


def chain_plan(R: int) -> tuple[int, float]:
    if R < 7:
        return 1, 0.0
    return R, 1.0 - 1.0 / (R // 7)


def chain_correlation(R: int) -> float:
    """Correlation used for an R-hop chain; independent directions below 7 hops."""
    return 0.0 if R < 7 else 1.0 - 1.0 / (R // 7)
