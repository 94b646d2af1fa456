"""Client utility functions and the client's selfish bid response."""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

# log-type utilities are never evaluated below this delivery ratio
Q_FLOOR = 1e-12


class UtilityFunction(ABC):
    """Strictly increasing, strictly concave utility of a delivery ratio in (0, 1]."""

    @abstractmethod
    def value(self, q):
        ...

    @abstractmethod
    def derivative(self, q):
        ...

    def second_derivative(self, q):
        h = 1e-6 * np.maximum(q, Q_FLOOR)
        return (self.derivative(q + h) - self.derivative(q - h)) / (2 * h)

    def inverse_derivative(self, slope: float) -> float | None:
        """q with U'(q) = slope, or None when no closed form is available."""
        return None

    def __call__(self, q):
        return self.value(q)

    def validate(self, grid_size: int = 64) -> None:
        """Spot-check monotonicity, concavity and the derivative on a grid."""
        grid = np.linspace(0.01, 0.99, grid_size)
        d = np.array([self.derivative(x) for x in grid])
        if np.any(d <= 0):
            raise ValueError(f"{self!r}: derivative is not positive on (0, 1]")
        if np.any(np.diff(d) >= 0):
            raise ValueError(f"{self!r}: derivative is not strictly decreasing")
        h = 1e-6
        for x, dx in zip(grid[::8], d[::8]):
            fd = (self.value(x + h) - self.value(x - h)) / (2 * h)
            if abs(fd - dx) > 1e-6 * max(1.0, abs(dx)):
                raise ValueError(f"{self!r}: derivative disagrees with finite differences at q={x}")


class LogUtility(UtilityFunction):
    """U(q) = weight * log(q)."""

    def __init__(self, weight: float = 1.0):
        if weight <= 0:
            raise ValueError("weight must be positive")
        self.weight = float(weight)
        self.validate()

    def value(self, q):
        return self.weight * np.log(np.maximum(q, Q_FLOOR))

    def derivative(self, q):
        return self.weight / np.maximum(q, Q_FLOOR)

    def second_derivative(self, q):
        return -self.weight / np.maximum(q, Q_FLOOR) ** 2

    def inverse_derivative(self, slope):
        return self.weight / slope

    def __repr__(self):
        return f"LogUtility(weight={self.weight:g})"


class PowerUtility(UtilityFunction):
    """U(q) = gamma * (q**alpha - 1) / alpha with gamma > 0 and 0 < alpha < 1."""

    def __init__(self, gamma: float, alpha: float):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        self.gamma = float(gamma)
        self.alpha = float(alpha)
        self.validate()

    def value(self, q):
        return self.gamma * (np.power(np.maximum(q, 0.0), self.alpha) - 1.0) / self.alpha

    def derivative(self, q):
        return self.gamma * np.power(np.maximum(q, Q_FLOOR), self.alpha - 1.0)

    def second_derivative(self, q):
        return self.gamma * (self.alpha - 1.0) * np.power(np.maximum(q, Q_FLOOR), self.alpha - 2.0)

    def inverse_derivative(self, slope):
        return (slope / self.gamma) ** (1.0 / (self.alpha - 1.0))

    def __repr__(self):
        return f"PowerUtility(gamma={self.gamma:g}, alpha={self.alpha:g})"


@dataclass(frozen=True)
class ClientResponse:
    rho_star: float
    q_implied: float
    interior: bool


def client_best_response(psi: float, utility: UtilityFunction, tol: float = 1e-10) -> ClientResponse:
    """Maximize U(rho / psi) - rho over 0 <= rho <= psi.

    Substituting q = rho / psi the objective is U(q) - psi * q on [0, 1], whose
    stationary point solves U'(q) = psi. U' is decreasing, so the root is found
    by bisection on q to within ``tol``.
    """
    if not psi > 0:
        raise ValueError(f"price psi must be positive, got {psi}")
    if utility.derivative(1.0) >= psi:
        return ClientResponse(rho_star=psi, q_implied=1.0, interior=False)
    if utility.derivative(Q_FLOOR) <= psi:
        return ClientResponse(rho_star=0.0, q_implied=0.0, interior=False)
    lo, hi = Q_FLOOR, 1.0
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if utility.derivative(mid) > psi:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    return ClientResponse(rho_star=psi * q, q_implied=q, interior=True)


def net_profit(rho: float, psi: float, utility: UtilityFunction) -> float:
    return float(utility.value(rho / psi) - rho)


def total_utility(q, utilities) -> float:
    return float(sum(u.value(x) for u, x in zip(utilities, q)))
