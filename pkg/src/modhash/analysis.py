"""Expectation curve, error bounds, parameter planning and distance estimation.

The expected per-component Lee distance between hashes of two vectors at
Euclidean distance d is

    E(d) = k/4 - (2k/pi^2) * sum_{j>=1} (2j-1)^{-2} exp(-2 (pi d (2j-1) / (delta k))^2)

E is 0 at d = 0, effectively equals d up to a knee that grows with k, and
saturates at k/4. At the default scale delta = sqrt(2/pi) the deviation from
the identity is bounded by

    F(t, k) = t * exp(-k^2 / (4 pi t^2))

which is increasing in t and decreasing in k, so a target threshold T and
bias budget eps admit the closed-form alphabet choice k >= 2T sqrt(pi ln(T/eps)).
The Hoeffding bound sizes the hash length:

    M >= ln(2) (beta+1) k^2 / (8 eps^2)

makes the empirical mean Lee distance land within eps of E with probability
at least 1 - 2^-beta.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .core import DEFAULT_DELTA, _check_even_k
from .errors import InvalidInput, InvalidParameter

_TERM_FLOOR = 1e-15
_MAX_TERMS = 1_000_000


def _check_delta(delta: float) -> float:
    if not (isinstance(delta, (int, float)) and math.isfinite(delta) and delta > 0):
        raise InvalidParameter("delta must be a positive finite real")
    return float(delta)


def expected_lee(dist: float, k: int, delta: float = DEFAULT_DELTA) -> float:
    """Expected single-component Lee distance at Euclidean distance `dist`.

    Sums the series until a term falls below 1e-15 (capped at 1e6 terms); the
    d = 0 point is the exact analytic zero.
    """
    k = _check_even_k(k)
    delta = _check_delta(delta)
    if not (isinstance(dist, (int, float)) and math.isfinite(dist)) or dist < 0:
        raise InvalidParameter("dist must be a finite nonnegative real")
    if dist == 0:
        return 0.0  # sum (2j-1)^-2 = pi^2/8 exactly cancels k/4
    c = 2.0 * (math.pi * dist / (delta * k)) ** 2
    total = 0.0
    start, block = 1, 4096
    while start <= _MAX_TERMS:
        stop = min(start + block - 1, _MAX_TERMS)
        odd = 2.0 * np.arange(start, stop + 1, dtype=np.float64) - 1.0
        terms = np.exp(-c * odd * odd) / (odd * odd)
        total += float(terms.sum())
        if terms[-1] < _TERM_FLOOR:
            break
        start = stop + 1
        block = min(block * 2, 1 << 18)
    return k / 4.0 - (2.0 * k / math.pi**2) * total


def expected_lee_bounds(dist: float, k: int, delta: float = DEFAULT_DELTA) -> tuple[float, float]:
    """Two-sided sandwich around expected_lee from the first series term:

    k/4 (1 - e^-c)  <=  E  <=  k/4 - (2k/pi^2) e^-c,   c = 2 (pi dist / (delta k))^2.
    """
    k = _check_even_k(k)
    delta = _check_delta(delta)
    if not (isinstance(dist, (int, float)) and math.isfinite(dist)) or dist < 0:
        raise InvalidParameter("dist must be a finite nonnegative real")
    e1 = math.exp(-2.0 * (math.pi * dist / (delta * k)) ** 2)
    lower = (k / 4.0) * (1.0 - e1)
    upper = k / 4.0 - (2.0 * k / math.pi**2) * e1
    return lower, upper


def bias_bound(dist: float, k: int) -> float:
    """F(t, k) = t exp(-k^2 / (4 pi t^2)): deviation of expected_lee from the
    identity, valid at the default delta = sqrt(2/pi)."""
    k = _check_even_k(k)
    if not (isinstance(dist, (int, float)) and math.isfinite(dist)) or dist < 0:
        raise InvalidInput("dist must be a finite nonnegative real")
    if dist == 0:
        return 0.0
    return dist * math.exp(-(k * k) / (4.0 * math.pi * dist * dist))


def plan_k(threshold: float, epsilon_bias: float) -> int:
    """Smallest even k with F(threshold, k) <= epsilon_bias.

    Starts from the closed-form inversion 2T sqrt(pi ln(T/eps)) rounded up to
    even, then walks by 2 in either direction until minimal, since the closed
    form is a derived starting point rather than a stated bound.
    """
    if not (isinstance(threshold, (int, float)) and math.isfinite(threshold)) or threshold <= 0:
        raise InvalidParameter("threshold must be a positive finite real")
    if not (isinstance(epsilon_bias, (int, float)) and math.isfinite(epsilon_bias)) or epsilon_bias <= 0:
        raise InvalidParameter("epsilon_bias must be a positive finite real")
    if epsilon_bias >= threshold:
        return 2  # F(T, k) < T for every k
    k = 2 * math.ceil(threshold * math.sqrt(math.pi * math.log(threshold / epsilon_bias)))
    k = max(k, 2)
    while bias_bound(threshold, k) > epsilon_bias:
        k += 2
    while k > 2 and bias_bound(threshold, k - 2) <= epsilon_bias:
        k -= 2
    return k


def plan_m(k: int, epsilon_stat: float, beta: int) -> int:
    """Hash length meeting the Hoeffding bound: ceil(ln2 (beta+1) k^2 / (8 eps^2))."""
    k = _check_even_k(k)
    if not (isinstance(epsilon_stat, (int, float)) and math.isfinite(epsilon_stat)) or epsilon_stat <= 0:
        raise InvalidParameter("epsilon_stat must be a positive finite real")
    if not isinstance(beta, (int, np.integer)) or beta < 1:
        raise InvalidParameter("beta must be a positive integer")
    return math.ceil(math.log(2.0) * (beta + 1) * k * k / (8.0 * epsilon_stat**2))


def _hoeffding_rhs(k: int, epsilon_stat: float, beta: int) -> float:
    return math.log(2.0) * (beta + 1) * k * k / (8.0 * epsilon_stat**2)


@dataclass(frozen=True)
class ProtocolParams:
    """Agreed threshold/precision intent plus the derived (k, M, P) plan.

    Invariants: F(threshold, k) <= epsilon_bias and M meets the Hoeffding
    bound for (k, epsilon_stat, beta); epsilon_bias + epsilon_stat = epsilon.
    """

    threshold: float
    epsilon: float
    beta: int
    k: int
    m: int
    epsilon_bias: float
    epsilon_stat: float
    padding: int = 0

    def __post_init__(self):
        _check_even_k(self.k)
        if self.threshold <= 0 or not math.isfinite(self.threshold):
            raise InvalidParameter("threshold must be positive")
        if self.epsilon <= 0 or self.epsilon_bias <= 0 or self.epsilon_stat <= 0:
            raise InvalidParameter("epsilon budgets must be positive")
        if abs(self.epsilon_bias + self.epsilon_stat - self.epsilon) > 1e-9 * self.epsilon:
            raise InvalidParameter("epsilon_bias + epsilon_stat must equal epsilon")
        if not isinstance(self.beta, int) or self.beta < 1:
            raise InvalidParameter("beta must be a positive integer")
        if not isinstance(self.m, int) or self.m < 1:
            raise InvalidParameter("M must be a positive integer")
        if not isinstance(self.padding, int) or self.padding < 0:
            raise InvalidParameter("padding must be a nonnegative integer")
        if bias_bound(self.threshold, self.k) > self.epsilon_bias * (1 + 1e-12):
            raise InvalidParameter("k too small: bias bound exceeds epsilon_bias at the threshold")
        if self.m < _hoeffding_rhs(self.k, self.epsilon_stat, self.beta) * (1 - 1e-12):
            raise InvalidParameter("M below the Hoeffding bound for (k, epsilon_stat, beta)")

    @classmethod
    def from_dimensions(
        cls,
        k: int,
        m: int,
        beta: int = 10,
        threshold: float | None = None,
        padding: int | None = None,
    ) -> "ProtocolParams":
        """Back-solve a consistent parameter set for a chosen (k, M).

        epsilon_stat is set so M meets the Hoeffding bound with equality;
        threshold defaults to k/4 with epsilon_bias = F(threshold, k).
        """
        k = _check_even_k(k)
        if not isinstance(m, int) or m < 1:
            raise InvalidParameter("M must be a positive integer")
        eps_stat = math.sqrt(math.log(2.0) * (beta + 1) * k * k / (8.0 * m))
        t = k / 4.0 if threshold is None else threshold
        eps_bias = bias_bound(t, k)
        if eps_bias <= 0:
            eps_bias = eps_stat  # thresholds ~0 have vanishing bias; keep budgets positive
        p = 10 * m if padding is None else padding
        return cls(
            threshold=t,
            epsilon=eps_bias + eps_stat,
            beta=beta,
            k=k,
            m=m,
            epsilon_bias=eps_bias,
            epsilon_stat=eps_stat,
            padding=p,
        )


def plan_parameters(threshold: float, epsilon: float, beta: int, padding_factor: int = 10) -> ProtocolParams:
    """Split the precision budget evenly between bias and statistical error,
    then derive (k, M) and a default obfuscation padding of padding_factor * M."""
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon)) or epsilon <= 0:
        raise InvalidParameter("epsilon must be a positive finite real")
    half = epsilon / 2.0
    k = plan_k(threshold, half)
    m = plan_m(k, half, beta)
    return ProtocolParams(
        threshold=float(threshold),
        epsilon=float(epsilon),
        beta=int(beta),
        k=k,
        m=m,
        epsilon_bias=half,
        epsilon_stat=half,
        padding=padding_factor * m,
    )


class EstimateMode(Enum):
    RAW = "raw"
    CURVE_INVERTED = "curve-inverted"


@dataclass(frozen=True)
class DistanceEstimate:
    """Outcome of a protocol run: a numeric distance or the saturation marker.

    value is None exactly when the mean Lee distance sits on the k/4 plateau,
    where the curve reveals only "farther than the threshold".
    """

    mean_lee: Fraction
    k: int
    m: int | None
    value: float | None
    mode: EstimateMode = field(default=EstimateMode.RAW, compare=False)

    @property
    def saturated(self) -> bool:
        return self.value is None

    def __str__(self) -> str:
        return "SATURATED" if self.saturated else repr(self.value)


def _invert_curve(target: float, k: int, delta: float) -> float:
    """Solve expected_lee(d, k, delta) = target by bisection on the monotone curve."""
    if target <= 0.0:
        return 0.0
    lo, hi = 0.0, delta * k
    while expected_lee(hi, k, delta) < target:
        hi *= 2.0
        if hi > 1e9 * delta * k:  # unreachable below the saturation cutoff
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if expected_lee(mid, k, delta) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def estimate_distance(
    mean_lee,
    k: int,
    mode: EstimateMode = EstimateMode.RAW,
    delta: float = DEFAULT_DELTA,
    saturation_margin: float | None = None,
    m: int | None = None,
) -> DistanceEstimate:
    """Turn an observed mean Lee distance into a distance estimate.

    RAW reports the mean itself (the curve is the identity below the knee);
    CURVE_INVERTED inverts the expectation series by bisection. Means within
    saturation_margin (default k/400) of the k/4 plateau are reported as
    SATURATED in either mode, since there the curve carries no distance
    information.
    """
    k = _check_even_k(k)
    delta = _check_delta(delta)
    frac = Fraction(mean_lee)
    if frac < 0 or frac > Fraction(k, 2):
        raise InvalidInput(f"mean Lee distance must lie in [0, k/2], got {frac}")
    margin = k / 400.0 if saturation_margin is None else float(saturation_margin)
    if margin < 0 or not math.isfinite(margin):
        raise InvalidParameter("saturation margin must be a nonnegative real")
    target = float(frac)
    if target >= k / 4.0 - margin:
        return DistanceEstimate(mean_lee=frac, k=k, m=m, value=None, mode=mode)
    if mode is EstimateMode.RAW:
        value = target
    elif mode is EstimateMode.CURVE_INVERTED:
        value = _invert_curve(target, k, delta)
    else:
        raise InvalidParameter(f"unknown estimation mode: {mode!r}")
    return DistanceEstimate(mean_lee=frac, k=k, m=m, value=value, mode=mode)
