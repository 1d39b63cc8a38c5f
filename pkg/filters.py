"""Daubechies-K filter coefficients and the banded H/G operators.

The low-pass coefficients h_n solve

    sum h_n = sqrt(2),   sum h_n h_{n-2m} = delta_{m0},   sum n^m g_n = 0 (m < K)

with g_n = (-1)^n h_{2K-1-n}. Closed forms exist for K <= 3 and are the only
orders supported.
"""
import math
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from errors import DomainError, UnsupportedOrderError
from exporters import rows_to_csv, to_json

SUPPORTED_ORDERS = (1, 2, 3)


def _table1(K: int) -> List[float]:
    """Closed radical forms, evaluated in float64"""
    if K == 1:
        return [1 / math.sqrt(2), 1 / math.sqrt(2)]

    if K == 2:
        r3 = math.sqrt(3.0)
        d = 4 * math.sqrt(2.0)
        return [(1 + r3) / d, (3 + r3) / d, (3 - r3) / d, (1 - r3) / d]

    r10 = math.sqrt(10.0)
    q = math.sqrt(5 + 2 * r10)
    d = 16 * math.sqrt(2.0)
    return [
        (1 + r10 + q) / d,
        (5 + r10 + 3 * q) / d,
        (10 - 2 * r10 + 2 * q) / d,
        (10 - 2 * r10 - 2 * q) / d,
        (5 + r10 - 3 * q) / d,
        (1 + r10 - q) / d,
    ]


def mirror_filters(h) -> List[float]:
    """High-pass partner: reverse the order and alternate the signs"""
    h = [float(v) for v in h]
    if len(h) == 0 or len(h) % 2:
        raise DomainError(f"Filter length must be even and positive, got {len(h)}")
    last = len(h) - 1
    return [(-1) ** n * h[last - n] for n in range(len(h))]


class FilterBank(BaseModel):
    """Low-pass h and high-pass g coefficients for Daubechies order K"""
    model_config = ConfigDict(frozen=True)

    K: int
    h: List[float]
    g: List[float]

    @model_validator(mode="after")
    def _check_identities(self):
        problems = filter_identity_residuals(self)
        if problems["length"]:
            raise ValueError(f"Expected {2 * self.K} coefficients, got h={len(self.h)}, g={len(self.g)}")
        if problems["sum"] > 1e-12:
            raise ValueError(f"sum(h) differs from sqrt(2) by {problems['sum']:.3e}")
        if problems["orthonormality"] > 1e-12:
            raise ValueError(f"h is not orthonormal under even shifts (residual {problems['orthonormality']:.3e})")
        if problems["vanishing_moments"] > 1e-10:
            raise ValueError(f"g has fewer than {self.K} vanishing moments (residual {problems['vanishing_moments']:.3e})")
        if problems["mirror"] > 0.0:
            raise ValueError("g is not the alternating reversal of h")
        return self

    @property
    def length(self) -> int:
        return 2 * self.K

    @property
    def h_array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=np.float64)

    @property
    def g_array(self) -> np.ndarray:
        return np.asarray(self.g, dtype=np.float64)

    def to_json(self) -> str:
        return to_json({"K": self.K, "h": self.h, "g": self.g})

    def to_csv(self) -> str:
        return rows_to_csv(["name"] + [str(n) for n in range(self.length)],
                           [["h"] + list(self.h), ["g"] + list(self.g)])


def filter_identity_residuals(fb: FilterBank) -> dict:
    """Residuals of the defining identities; zero length mismatch means consistent"""
    h = np.asarray(fb.h, dtype=np.float64)
    g = np.asarray(fb.g, dtype=np.float64)
    n_coef = 2 * fb.K
    length_bad = len(h) != n_coef or len(g) != n_coef
    if length_bad:
        return {"length": True, "sum": math.inf, "orthonormality": math.inf,
                "vanishing_moments": math.inf, "mirror": math.inf}

    ortho = 0.0
    for m in range(-(fb.K - 1), fb.K):
        shifted = sum(h[n] * h[n - 2 * m] for n in range(n_coef) if 0 <= n - 2 * m < n_coef)
        ortho = max(ortho, abs(shifted - (1.0 if m == 0 else 0.0)))

    n = np.arange(n_coef, dtype=np.float64)
    moments = max(abs(np.sum(n ** m * g)) for m in range(fb.K))
    mirror = max(abs(g[i] - (-1) ** i * h[n_coef - 1 - i]) for i in range(n_coef))

    return {
        "length": False,
        "sum": abs(h.sum() - math.sqrt(2.0)),
        "orthonormality": ortho,
        "vanishing_moments": moments,
        "mirror": mirror,
    }


def daubechies_filters(K: int, reverse: bool = False) -> FilterBank:
    """Table branch of the Daubechies-K filters; reverse=True gives the mirror solution"""
    if K not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(
            f"Daubechies order K={K} not supported; supported orders are {{1,2,3}}"
        )
    h = _table1(K)
    if reverse:
        h = h[::-1]
    return FilterBank(K=K, h=h, g=mirror_filters(h))


def perturbed_filters(fb: FilterBank, delta: float, index: int = 0) -> FilterBank:
    """Copy with one coefficient nudged, skipping validation (negative controls)"""
    h = list(fb.h)
    h[index] += delta
    return FilterBank.model_construct(K=fb.K, h=h, g=mirror_filters(h))


OperatorKind = Literal["H", "G", "HT", "GT"]


class BandedOperator(BaseModel):
    """Row rule H_{nm} = h_{m-2n}, G_{nm} = g_{m-2n}; HT/GT are the transposes"""
    model_config = ConfigDict(frozen=True)

    kind: OperatorKind
    filters: FilterBank

    @property
    def taps(self) -> np.ndarray:
        return self.filters.h_array if self.kind in ("H", "HT") else self.filters.g_array

    @property
    def transposed(self) -> bool:
        return self.kind.endswith("T")

    def matrix(self, N: int) -> np.ndarray:
        """Dense periodic matrix: (N/2 x N) for H/G, (N x N/2) for the transposes"""
        _check_periodic_length(N, self.filters.K)
        taps = self.taps
        rows = np.zeros((N // 2, N))
        for n in range(N // 2):
            for j, t in enumerate(taps):
                rows[n, (2 * n + j) % N] += t
        return rows.T.copy() if self.transposed else rows


class CoefficientWindow(BaseModel):
    """Values y_n for n = start .. start + len(values) - 1"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    start: int
    values: np.ndarray


def _check_periodic_length(N: int, K: int):
    if N % 2:
        raise DomainError(f"Periodic window length must be even, got {N}")
    if N < 2 * K:
        raise DomainError(f"Periodic window of length {N} is shorter than the filter length {2 * K}")


def banded_apply(op: BandedOperator, x, boundary: str = "periodic", start: int = 0) -> CoefficientWindow:
    """y_n = sum_m op_{nm} x_m, either wrapped mod N or with x zero outside its window"""
    x = np.asarray(x, dtype=np.float64)
    taps = op.taps
    L = len(taps)

    if boundary == "periodic":
        N = 2 * len(x) if op.transposed else len(x)
        _check_periodic_length(N, op.filters.K)
        if op.transposed:
            y = np.zeros(N)
            n = np.arange(len(x))
            for j, t in enumerate(taps):
                np.add.at(y, (2 * n + j) % N, t * x)
        else:
            n = np.arange(N // 2)
            y = np.zeros(N // 2)
            for j, t in enumerate(taps):
                y += t * x[(2 * n + j) % N]
        return CoefficientWindow(start=0, values=y)

    if boundary != "zero":
        raise DomainError(f"Unknown boundary rule '{boundary}'; use 'periodic' or 'zero'")

    if op.transposed:
        out_start = 2 * start
        y = np.zeros(2 * len(x) + L - 2) if len(x) else np.zeros(0)
        for j, t in enumerate(taps):
            y[j:j + 2 * len(x):2] += t * x
        return CoefficientWindow(start=out_start, values=y)

    # H/G: n runs over every row whose band touches the window
    first = math.ceil((start - (L - 1)) / 2)
    last = (start + len(x) - 1) // 2
    n = np.arange(first, last + 1)
    y = np.zeros(len(n))
    for j, t in enumerate(taps):
        m = 2 * n + j - start
        inside = (m >= 0) & (m < len(x))
        y[inside] += t * x[m[inside]]
    return CoefficientWindow(start=int(first), values=y)


def upsample_coefficients(coefs: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """One refinement step c'_l = sum_m c_m f_{l-2m} on index windows starting at 0"""
    if len(coefs) == 0:
        return np.zeros(0)
    out = np.zeros(2 * (len(coefs) - 1) + len(taps))
    for j, t in enumerate(taps):
        out[j:j + 2 * len(coefs) - 1:2] += t * coefs
    return out
