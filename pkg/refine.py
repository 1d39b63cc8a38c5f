"""Exact values of s, w and s' on dyadic grids.

Integer values come from the eigenvector of M_{nm} = sqrt(2) h_{2n-m} with
eigenvalue 2^{-d}; the scaling equation then fills in each finer level
without touching the coarser values.
"""
import math
import sys
import threading
from typing import Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import null_space

from errors import DomainError, RegularityError
from exporters import rows_to_csv
from filters import FilterBank

Kind = Literal["scaling", "wavelet"]


class DyadicSamples(BaseModel):
    """Values of s^(d) or w^(d) at x = m / 2^level, m = 0 .. (2K-1) 2^level"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int
    deriv: int
    level: int
    kind: Kind
    values: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.values)) / 2.0 ** self.level

    @property
    def step(self) -> float:
        return 2.0 ** -self.level

    def at_integers(self) -> np.ndarray:
        return self.values[:: 2 ** self.level]

    def to_csv(self) -> str:
        return rows_to_csv(["x", "value"], zip(self.grid, self.values))


def check_regularity(K: int, d: int):
    """Derivative order d needs K >= 2d + 1 (K=3 is the first C^1 member)"""
    if d not in (0, 1):
        raise RegularityError(f"Derivative order d={d} not supported; only d in {{0,1}}")
    if d == 1 and K < 3:
        raise RegularityError(
            f"Insufficient regularity: Daubechies K={K} scaling function has no derivative (d={d} needs K>=3)"
        )


def refinement_matrix(fb: FilterBank) -> np.ndarray:
    """M_{nm} = sqrt(2) h_{2n-m} restricted to the interior integers 1..2K-2"""
    h = fb.h_array
    size = 2 * fb.K - 2
    M = np.zeros((size, size))
    for i, n in enumerate(range(1, 2 * fb.K - 1)):
        for j, m in enumerate(range(1, 2 * fb.K - 1)):
            if 0 <= 2 * n - m < len(h):
                M[i, j] = math.sqrt(2.0) * h[2 * n - m]
    return M


def integer_values(fb: FilterBank, d: int = 0) -> np.ndarray:
    """s^(d)(n) for n = 0..2K-1"""
    check_regularity(fb.K, d)

    if fb.K == 1:
        # Haar: indicator of [0, 1)
        return np.array([1.0, 0.0])

    M = refinement_matrix(fb)
    eigenvalue = 2.0 ** -d
    basis = null_space(M - eigenvalue * np.eye(len(M)), rcond=1e-9)
    if basis.shape[1] != 1:
        raise RegularityError(
            f"Insufficient regularity: eigenvalue 2^-{d} of the K={fb.K} refinement matrix "
            f"has null space of dimension {basis.shape[1]}, expected 1"
        )

    interior = basis[:, 0]
    values = np.zeros(2 * fb.K)
    values[1:-1] = interior
    if d == 0:
        norm = values.sum()
    else:
        # sum_n n s'(x - n) = 1 at x = 0 reads sum_m m s'(m) = -1
        norm = -np.dot(np.arange(2 * fb.K), values)
    if abs(norm) < 1e-14:
        raise RegularityError(f"Eigenvector for K={fb.K}, d={d} cannot be normalized")
    return values / norm


def _refine_once(prev: np.ndarray, taps: np.ndarray, factor: float, level: int, K: int) -> np.ndarray:
    """Values at level `level` from values of the refined function at level `level - 1`"""
    size = (2 * K - 1) * 2 ** level + 1
    out = np.zeros(size)
    out[::2] = prev
    odd = np.arange(1, size, 2)
    half = 2 ** (level - 1)
    for l, t in enumerate(taps):
        p = odd - l * half
        inside = (p >= 0) & (p < len(prev))
        out[odd[inside]] += factor * t * prev[p[inside]]
    return out


def refine_to_level(fb: FilterBank, d: int, J: int) -> DyadicSamples:
    if J < 0:
        raise DomainError(f"Level must be non-negative, got J={J}")
    base = integer_values(fb, d)

    if fb.K == 1:
        values = np.zeros(2 ** J + 1)
        values[: 2 ** J] = 1.0
        return DyadicSamples(K=1, deriv=d, level=J, kind="scaling", values=values)

    factor = math.sqrt(2.0) * 2.0 ** d
    values = base
    for level in range(1, J + 1):
        values = _refine_once(values, fb.h_array, factor, level, fb.K)
    return DyadicSamples(K=fb.K, deriv=d, level=J, kind="scaling", values=values)


def wavelet_samples(s_samples: DyadicSamples, fb: FilterBank) -> DyadicSamples:
    """w^(d)(x) = sqrt(2) 2^d sum_l g_l s^(d)(2x - l) on the grid one level coarser"""
    if s_samples.kind != "scaling":
        raise DomainError(f"Wavelet samples need scaling-function input, got kind '{s_samples.kind}'")
    if s_samples.K != fb.K:
        raise DomainError(f"Samples are for K={s_samples.K} but filters are K={fb.K}")
    if s_samples.level < 1:
        raise DomainError("Wavelet samples need scaling samples at level >= 1")

    J = s_samples.level - 1
    K = fb.K
    size = (2 * K - 1) * 2 ** J + 1
    m = np.arange(size)
    out = np.zeros(size)
    factor = math.sqrt(2.0) * 2.0 ** s_samples.deriv
    src = s_samples.values
    for l, t in enumerate(fb.g_array):
        p = 4 * m - l * 2 ** (J + 1)
        inside = (p >= 0) & (p < len(src))
        out[inside] += factor * t * src[p[inside]]
    return DyadicSamples(K=K, deriv=s_samples.deriv, level=J, kind="wavelet", values=out)


# ============== LAZY SAMPLE CACHE ==============
_samples: Dict[Tuple[int, Tuple[float, ...], str, int, int], DyadicSamples] = {}
_samples_lock = threading.Lock()


def sample_function(fb: FilterBank, kind: Kind, d: int, J: int) -> DyadicSamples:
    """Cached samples of s^(d) or w^(d) at level J"""
    key = (fb.K, tuple(fb.h), kind, d, J)
    cached = _samples.get(key)
    if cached is not None:
        return cached

    if kind == "scaling":
        samples = refine_to_level(fb, d, J)
    elif kind == "wavelet":
        samples = wavelet_samples(sample_function(fb, "scaling", d, J + 1), fb)
    else:
        raise DomainError(f"Unknown function kind '{kind}'")

    with _samples_lock:
        _samples.setdefault(key, samples)
    if J >= 12:
        print(f"✅ Sampled K={fb.K} {kind} d={d} at level {J} ({len(samples.values)} points)", file=sys.stderr)
    return _samples[key]


class OracleFactor(BaseModel):
    """One factor x^q f^(d)_{k,n}(x) of a brute-force integrand"""
    model_config = ConfigDict(frozen=True)

    kind: Kind = "scaling"
    k: int = 0
    n: int = 0
    d: int = Field(0, ge=0, le=1)
    q: int = Field(0, ge=0)


def oracle_integral(fb: FilterBank, factors: List[OracleFactor], J: int) -> float:
    """Riemann sum of prod_i x^{q_i} f_i(x) on the grid i / 2^J over the common support"""
    if not factors:
        raise DomainError("Oracle integral needs at least one factor")
    width = 2 * fb.K - 1
    lo = max(f.n * 2.0 ** -f.k for f in factors)
    hi = min((f.n + width) * 2.0 ** -f.k for f in factors)
    if lo >= hi:
        return 0.0

    first = math.ceil(lo * 2 ** J)
    last = math.floor(hi * 2 ** J)
    i = np.arange(first, last + 1, dtype=np.int64)
    x = i / 2.0 ** J
    integrand = np.ones(len(i))

    for f in factors:
        level = max(0, J - f.k)
        samples = sample_function(fb, f.kind, f.d, level)
        idx = i * 2 ** (f.k + level - J) - f.n * 2 ** level
        inside = (idx >= 0) & (idx < len(samples.values))
        values = np.zeros(len(i))
        values[inside] = samples.values[idx[inside]]
        scale = 2.0 ** (f.k / 2.0) * 2.0 ** (f.k * f.d)
        integrand *= scale * values * x ** f.q

    return float(integrand.sum() * 2.0 ** -J)
