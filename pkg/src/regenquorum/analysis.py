"""Closed-form availability and queueing formulas, with empirical comparison helpers."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

ANALYSIS_SCHEMA = "# regenquorum-analysis v1"
EXACT_LIMIT = 64


class DomainError(ValueError):
    pass


class UnstableQueue(ValueError):
    pass


class FlaggedValue(NamedTuple):
    value: float
    out_of_range: bool  # true when a "probability" exceeds 1


@dataclass(frozen=True)
class AvailabilityParams:
    N: int
    k: int
    d: int
    p_r: float
    p_w: float = 0.0  # carried for completeness; no formula reads it

    def __post_init__(self):
        for name in ("p_r", "p_w"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")
        if self.N < 1 or self.k < 0 or self.d < 0:
            raise DomainError("N must be positive and k, d non-negative")


def _weighted_sum(N: int, lo: int, hi: int, inner: int, p: float) -> float:
    """sum_{i=lo}^{hi} C(N,i) C(i,inner) p^i (1-p)^(N-i)."""
    if hi < lo:
        return 0.0
    if N <= EXACT_LIMIT:
        return float(sum(math.comb(N, i) * math.comb(i, inner) * p ** i * (1 - p) ** (N - i)
                         for i in range(lo, hi + 1)))
    if p == 0.0:
        return float(math.comb(N, 0) * math.comb(0, inner)) if lo == 0 else 0.0
    if p == 1.0:
        return float(math.comb(N, inner)) if lo <= N <= hi else 0.0
    lp, lq = math.log(p), math.log1p(-p)
    total = 0.0
    for i in range(lo, hi + 1):
        lc = (math.lgamma(N + 1) - math.lgamma(i + 1) - math.lgamma(N - i + 1)
              + math.lgamma(i + 1) - math.lgamma(inner + 1) - math.lgamma(i - inner + 1))
        total += math.exp(lc + i * lp + (N - i) * lq)
    return total


def prob_download_paper(a: AvailabilityParams) -> FlaggedValue:
    """Literal sum over i >= k of C(N,i) C(i,k) p^i (1-p)^(N-i).

    The extra C(i,k) factor lets the result exceed 1; such values are flagged,
    not clipped.  :func:`prob_at_least` is the ordinary availability.
    """
    v = _weighted_sum(a.N, a.k, a.N, a.k, a.p_r)
    return FlaggedValue(v, v > 1.0)


def prob_repair_paper(a: AvailabilityParams) -> FlaggedValue:
    """Literal sum over d <= i <= N-1 of C(N,i) C(i,d) p^i (1-p)^(N-i)."""
    v = _weighted_sum(a.N, a.d, a.N - 1, a.d, a.p_r)
    return FlaggedValue(v, v > 1.0)


def prob_at_least(N: int, m: int, p: float) -> float:
    """P(at least m of N independent nodes are up), each up with probability p."""
    if m > N:
        raise DomainError(f"m={m} exceeds N={N}")
    if m <= 0:
        return 1.0
    return float(stats.binom.sf(m - 1, N, p))


def poisson_pmf(rate: float, t: float, m: int) -> float:
    if rate < 0 or t < 0:
        raise DomainError("rate and t must be non-negative")
    return float(stats.poisson.pmf(m, rate * t))


def joint_pmf(lambda_w: float, T: float, lambda_r: float, t: float, l: int, m: int) -> float:
    """l writes in [0, T] and m reads in [0, t] from independent Poisson streams."""
    return poisson_pmf(lambda_w, T, l) * poisson_pmf(lambda_r, t, m)


def expected_requests(lambda_w: float, T: float, lambda_r: float, t: float) -> float:
    if min(lambda_w, T, lambda_r, t) < 0:
        raise DomainError("inputs must be non-negative")
    return (lambda_w * T) * (lambda_r * t)


def completion_pmf(N0: int, mu: float, t: float, m: int) -> float:
    """P(m of N0 queued requests remain at time t), no arrivals, service rate mu.

    For m >= 1 this is the Poisson(mu t) mass at N0 - m; m = 0 takes the rest.
    """
    if m > N0 or m < 0:
        raise DomainError(f"m={m} outside 0..{N0}")
    if mu < 0 or t < 0:
        raise DomainError("mu and t must be non-negative")
    lam = mu * t
    if m >= 1:
        return float(stats.poisson.pmf(N0 - m, lam))
    return float(stats.poisson.sf(N0 - 1, lam))


def completion_zero_limit(mu: float, t: float) -> float:
    """The e^(-mu t) curve.

    It equals ``completion_pmf(N0, mu, t, N0)`` for every N0 (nothing served
    yet).  It is *not* the large-N0 limit of the m = 0 branch, which tends to 0.
    """
    if mu < 0 or t < 0:
        raise DomainError("mu and t must be non-negative")
    return math.exp(-mu * t)


def mm1_pn(lam: float, mu: float, n: int) -> float:
    if not lam < mu:
        raise UnstableQueue(f"lambda={lam} must be below mu={mu}")
    if n < 0:
        raise DomainError("n must be non-negative")
    rho = lam / mu
    return rho ** n * (1 - rho)


# ---------------------------------------------------------------- comparison
@dataclass
class Divergence:
    support: List[int]
    empirical: np.ndarray
    analytical: np.ndarray
    tv: float
    max_diff: float
    z: Optional[np.ndarray] = None

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z))) if self.z is not None and len(self.z) else 0.0


def compare_empirical(empirical: Mapping[int, float], closed_form: Callable[[int], float],
                      support: Optional[Iterable[int]] = None,
                      samples: Optional[int] = None) -> Divergence:
    """Total variation and per-point z-scores of an empirical pmf against ``closed_form``.

    ``samples`` is the effective number of independent observations; without
    it no z-scores are computed.
    """
    pts = sorted(empirical) if support is None else list(support)
    emp = np.array([empirical.get(n, 0.0) for n in pts], dtype=float)
    ana = np.array([closed_form(n) for n in pts], dtype=float)
    diff = emp - ana
    z = None
    if samples:
        sd = np.sqrt(np.maximum(ana * (1 - ana), 1e-300) / samples)
        z = diff / sd
    return Divergence(pts, emp, ana, float(0.5 * np.abs(diff).sum()),
                      float(np.abs(diff).max()) if len(pts) else 0.0, z)


def binomial_bound(p: float, replications: int, sigmas: float = 3.0) -> float:
    """Half-width of the sigmas-sigma band for an estimated proportion."""
    return sigmas * math.sqrt(p * (1 - p) / replications)


# ---------------------------------------------------------------- registry and tables
def _download(N, k, p, d=0):
    return prob_download_paper(AvailabilityParams(int(N), int(k), int(d), p))


def _repair(N, d, p, k=0):
    return prob_repair_paper(AvailabilityParams(int(N), int(k), int(d), p))


FORMULAS: Dict[str, tuple] = {
    "download": (_download, ("N", "k", "p")),
    "repair": (_repair, ("N", "d", "p")),
    "at_least": (lambda N, m, p: prob_at_least(int(N), int(m), p), ("N", "m", "p")),
    "poisson": (lambda rate, t, m: poisson_pmf(rate, t, int(m)), ("rate", "t", "m")),
    "joint": (lambda lambda_w, T, lambda_r, t, l, m: joint_pmf(lambda_w, T, lambda_r, t, int(l), int(m)),
              ("lambda_w", "T", "lambda_r", "t", "l", "m")),
    "expected": (expected_requests, ("lambda_w", "T", "lambda_r", "t")),
    "completion": (lambda N0, mu, t, m: completion_pmf(int(N0), mu, t, int(m)), ("N0", "mu", "t", "m")),
    "completion_limit": (completion_zero_limit, ("mu", "t")),
    "mm1_pn": (lambda lam, mu, n: mm1_pn(lam, mu, int(n)), ("lam", "mu", "n")),
}


def evaluate(name: str, params: Mapping[str, float]) -> FlaggedValue:
    if name not in FORMULAS:
        raise KeyError(f"unknown formula {name!r}; known: {', '.join(sorted(FORMULAS))}")
    fn, names = FORMULAS[name]
    missing = [n for n in names if n not in params]
    if missing:
        raise DomainError(f"{name} needs {', '.join(missing)}")
    out = fn(**{n: params[n] for n in names})
    if isinstance(out, FlaggedValue):
        return out
    return FlaggedValue(float(out), False)


def formula_table(name: str, grid: Mapping[str, Sequence[float]]) -> str:
    """CSV over the Cartesian product of ``grid``; one row per point with a flag column."""
    _, names = FORMULAS[name]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(f"{ANALYSIS_SCHEMA} {name}\n")
    w.writerow([*names, "value", "flag"])
    for combo in itertools.product(*(grid[n] for n in names)):
        v = evaluate(name, dict(zip(names, combo)))
        w.writerow([*combo, repr(v.value), "FLAG" if v.out_of_range else ""])
    return buf.getvalue()


def read_table(text: str) -> List[dict]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(ANALYSIS_SCHEMA):
        raise ValueError("missing analysis schema header")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    for r in rows:
        for key in r:
            if key != "flag":
                r[key] = float(r[key])
    return rows
