"""Value-space cuboid, reference states, and entropy/mobility structure.

The state of the system takes values in a cuboid S = prod_j [lower_j,
upper_j].  Two reference conventions are distinguished: case A anchors the
reference state at the lower corner (mass-constrained setting), case B
places it strictly inside (H^1 setting).  Each component carries a strictly
convex entropy h_j vanishing at both interval endpoints, and the induced
concave mobility m_j = 1/h_j'' extended by zero outside the interval.  The
heat entropy built from these densities drives the curvature estimates of
the time stepper.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .grid import GridField

__all__ = [
    "Case",
    "ValueSpace",
    "EntropyMobilityPair",
    "make_logarithmic_pair",
    "make_custom_pair",
    "heat_entropy_density",
    "heat_entropy",
]

# Values may sit outside S by at most this much and still count as a state
# (iterative solvers return endpoints accurate to their own tolerance).
STATE_ATOL = 1e-7


class Case(str, enum.Enum):
    """Reference-state convention: lower corner (A) or interior point (B)."""

    A = "A"
    B = "B"


@dataclass(frozen=True)
class ValueSpace:
    """Cuboid of admissible values with a distinguished reference state."""

    lower: np.ndarray
    upper: np.ndarray
    reference: np.ndarray
    case_tag: Case

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        reference = np.atleast_1d(np.asarray(self.reference, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "reference", reference)
        if not (lower.shape == upper.shape == reference.shape):
            raise ValueError("lower, upper and reference must have equal length")
        if not np.all(lower < upper):
            raise ValueError("value space requires lower_j < upper_j for every component")
        case = Case(self.case_tag)
        object.__setattr__(self, "case_tag", case)
        if case is Case.A:
            if not np.array_equal(reference, lower):
                raise ValueError("case A requires the reference state to equal the lower corner")
        else:
            if not (np.all(lower < reference) and np.all(reference < upper)):
                raise ValueError("case B requires the reference state strictly inside the cuboid")

    @property
    def n(self) -> int:
        return self.lower.size

    @classmethod
    def case_a(cls, lower, upper) -> "ValueSpace":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls(lower, upper, lower.copy(), Case.A)

    @classmethod
    def case_b(cls, lower, upper, reference) -> "ValueSpace":
        return cls(lower, upper, reference, Case.B)

    def contains(self, z, atol: float = STATE_ATOL) -> bool:
        """Componentwise membership test with a small solver-noise allowance."""
        z = np.asarray(z, dtype=float)
        lo = self.lower.reshape((-1,) + (1,) * (z.ndim - 1))
        hi = self.upper.reshape((-1,) + (1,) * (z.ndim - 1))
        return bool(np.all(z >= lo - atol) and np.all(z <= hi + atol))

    def clip(self, z: np.ndarray) -> np.ndarray:
        """Clamp values into the cuboid (used for evaluation only)."""
        z = np.asarray(z, dtype=float)
        lo = self.lower.reshape((-1,) + (1,) * (z.ndim - 1))
        hi = self.upper.reshape((-1,) + (1,) * (z.ndim - 1))
        return np.clip(z, lo, hi)

    def logarithmic_pairs(self) -> list["EntropyMobilityPair"]:
        """The paradigmatic entropy/mobility pair for every component."""
        return [
            make_logarithmic_pair(self.lower[j], self.upper[j], component_index=j)
            for j in range(self.n)
        ]


def _xlogx(v: np.ndarray) -> np.ndarray:
    # 0*log(0) = 0 exactly; below 1e-300 the product underflows to the limit.
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    mask = v > 1e-300
    out[mask] = v[mask] * np.log(v[mask])
    return out


@dataclass(frozen=True)
class EntropyMobilityPair:
    """Entropy h_j and induced mobility m_j = 1/h_j'' for one component.

    ``entropy`` and ``entropy_derivative`` are evaluated on the closed and
    open interval respectively; ``mobility`` is extended by zero outside
    [lower, upper].  ``mobility_poly`` holds (c0, c1, c2) coefficients when
    m(s) = c0 + c1*s + c2*s**2, which selects the fast compiled prox kernel.
    """

    component_index: int
    lower: float
    upper: float
    entropy: Callable[[np.ndarray], np.ndarray]
    entropy_derivative: Callable[[np.ndarray], np.ndarray]
    mobility: Callable[[np.ndarray], np.ndarray]
    entropy_second_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mobility_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mobility_poly: Optional[tuple] = field(default=None)

    def entropy_at(self, s) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), self.lower, self.upper)
        return self.entropy(s)

    def mobility_at(self, s) -> np.ndarray:
        """m_j(s) on the interval, zero outside."""
        s = np.asarray(s, dtype=float)
        inside = (s >= self.lower) & (s <= self.upper)
        vals = np.where(inside, self.mobility(np.clip(s, self.lower, self.upper)), 0.0)
        return vals

    def mobility_derivative_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.mobility_derivative is not None:
            return self.mobility_derivative(s)
        h = 1e-6 * (self.upper - self.lower)
        lo = np.clip(s - h, self.lower, self.upper)
        hi = np.clip(s + h, self.lower, self.upper)
        return (self.mobility(hi) - self.mobility(lo)) / np.maximum(hi - lo, 1e-300)


def make_logarithmic_pair(lower: float, upper: float, component_index: int = 0) -> EntropyMobilityPair:
    """Pair with h(s) = (s-l)log(s-l) + (r-s)log(r-s) - (r-l)log(r-l).

    The induced mobility is the concave parabola m(s) = (s-l)(r-s)/(r-l)
    vanishing at both endpoints.
    """
    lower = float(lower)
    upper = float(upper)
    if not lower < upper:
        raise ValueError(f"invalid interval: lower={lower} must be < upper={upper}")
    width = upper - lower
    logw = math.log(width)

    def h(s):
        return _xlogx(s - lower) + _xlogx(upper - s) - width * logw

    def h_prime(s):
        s = np.asarray(s, dtype=float)
        return np.log(s - lower) - np.log(upper - s)

    def h_second(s):
        s = np.asarray(s, dtype=float)
        return 1.0 / (s - lower) + 1.0 / (upper - s)

    def m(s):
        s = np.asarray(s, dtype=float)
        return (s - lower) * (upper - s) / width

    def m_prime(s):
        s = np.asarray(s, dtype=float)
        return (lower + upper - 2.0 * s) / width

    poly = (-lower * upper / width, (lower + upper) / width, -1.0 / width)
    return EntropyMobilityPair(
        component_index=component_index,
        lower=lower,
        upper=upper,
        entropy=h,
        entropy_derivative=h_prime,
        mobility=m,
        entropy_second_derivative=h_second,
        mobility_derivative=m_prime,
        mobility_poly=poly,
    )


def make_custom_pair(
    lower: float,
    upper: float,
    entropy: Callable,
    entropy_derivative: Callable,
    mobility: Callable,
    component_index: int = 0,
    entropy_second_derivative: Optional[Callable] = None,
    samples: int = 1024,
) -> EntropyMobilityPair:
    """Wrap a user-supplied (h, h', m) triple after validating its structure.

    Sampled checks at ``samples`` interior points: endpoint zeros of h and m,
    nonpositivity and strict convexity of h, concavity and positivity of m,
    and the reciprocal identity h'' * m = 1.  The identity is tested at
    1e-10 relative tolerance when h'' is supplied in closed form, and at
    1e-6 when it must be approximated by finite differences of h'.
    """
    lower = float(lower)
    upper = float(upper)
    if not lower < upper:
        raise ValueError(f"invalid interval: lower={lower} must be < upper={upper}")
    pair = EntropyMobilityPair(
        component_index=component_index,
        lower=lower,
        upper=upper,
        entropy=entropy,
        entropy_derivative=entropy_derivative,
        mobility=mobility,
        entropy_second_derivative=entropy_second_derivative,
    )
    _validate_pair(pair, samples=samples)
    return pair


def _validate_pair(pair: EntropyMobilityPair, samples: int = 1024) -> None:
    width = pair.upper - pair.lower
    # Stay away from the endpoints: h'' blows up there and finite differences
    # of the user-supplied h' lose accuracy.
    s = pair.lower + width * np.linspace(0.02, 0.98, samples)

    for endpoint in (pair.lower, pair.upper):
        if abs(float(pair.entropy_at(endpoint))) > 1e-10 * max(1.0, width):
            raise ValueError("entropy must vanish at both interval endpoints")
        if abs(float(pair.mobility_at(endpoint))) > 1e-10 * max(1.0, width):
            raise ValueError("mobility must vanish at both interval endpoints")

    h_vals = pair.entropy(s)
    if np.any(h_vals > 1e-12):
        raise ValueError("entropy must be nonpositive on the interval")
    m_vals = pair.mobility(s)
    if np.any(m_vals <= 0.0):
        raise ValueError("mobility must be positive on the open interval")

    # Concavity of m via second differences.
    dm = np.diff(m_vals, 2)
    step = s[1] - s[0]
    if np.any(dm / step**2 > 1e-10 * max(1.0, np.max(np.abs(m_vals)))):
        raise ValueError("mobility must be concave")

    # Reciprocal identity h'' * m = 1.
    if pair.entropy_second_derivative is not None:
        h2 = pair.entropy_second_derivative(s)
        rtol = 1e-10
    else:
        eps = 1e-6 * width
        h2 = (pair.entropy_derivative(s + eps) - pair.entropy_derivative(s - eps)) / (2 * eps)
        rtol = 1e-6
    if np.any(h2 <= 0.0):
        raise ValueError("entropy must be strictly convex on the interval")
    if np.max(np.abs(h2 * m_vals - 1.0)) > rtol:
        raise ValueError("mobility must equal the reciprocal of the entropy second derivative")


def _check_state_vector(space: ValueSpace, z: np.ndarray) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape[0] != space.n:
        raise ValueError(f"state has {z.shape[0]} components, expected {space.n}")
    if not space.contains(z):
        raise ValueError("state lies outside the value space")
    return z


def heat_entropy_density(space: ValueSpace, pairs: Sequence[EntropyMobilityPair], z) -> float:
    """Pointwise heat-entropy density at the state vector z.

    Case A returns sum_j h_j(z_j) (nonpositive); case B returns the Bregman
    divergence of h from the reference state (nonnegative).  Both vanish at
    the reference state.
    """
    z = _check_state_vector(space, z)
    total = 0.0
    for j, pair in enumerate(pairs):
        total += float(pair.entropy_at(z[j]))
    if space.case_tag is Case.A:
        return total
    for j, pair in enumerate(pairs):
        zj = space.reference[j]
        total -= float(pair.entropy_at(zj))
        total -= float(pair.entropy_derivative(np.asarray(zj))) * (z[j] - zj)
    return total


def heat_entropy(space: ValueSpace, pairs: Sequence[EntropyMobilityPair], u: "GridField") -> float:
    """Quadrature of the heat-entropy density over a grid field."""
    values = u.values
    if values.shape[0] != space.n:
        raise ValueError(f"field has {values.shape[0]} components, expected {space.n}")
    if not space.contains(values):
        raise ValueError("field values lie outside the value space")
    clipped = space.clip(values)
    total = 0.0
    for j, pair in enumerate(pairs):
        hj = pair.entropy_at(clipped[j])
        if space.case_tag is Case.B:
            zj = space.reference[j]
            hj = hj - float(pair.entropy_at(zj)) \
                - float(pair.entropy_derivative(np.asarray(zj))) * (clipped[j] - zj)
        total += float(np.sum(hj))
    return u.grid.spacing * total
