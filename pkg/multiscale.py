"""Periodic discrete wavelet transform, scale identities and 3D tensor helpers."""
import json
from itertools import product
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from conncoef import pair_derivative_table
from errors import DomainError
from exporters import to_json
from filters import BandedOperator, FilterBank, banded_apply, daubechies_filters


class Pyramid(BaseModel):
    """approx at level -L, details[i] at level -(i+1); translation index = analysis-time index"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int
    N: int
    levels: int
    approx: np.ndarray
    details: List[np.ndarray]

    def coefficient_count(self) -> int:
        return len(self.approx) + sum(len(d) for d in self.details)

    def energy(self) -> float:
        return float(np.sum(self.approx ** 2) + sum(np.sum(d ** 2) for d in self.details))

    def to_json(self) -> str:
        return to_json({
            "K": self.K,
            "N": self.N,
            "levels": self.levels,
            "approx": {str(-self.levels): self.approx},
            "details": {str(-(i + 1)): d for i, d in enumerate(self.details)},
        })

    @classmethod
    def from_json(cls, text: str) -> "Pyramid":
        try:
            data = json.loads(text)
            levels = int(data["levels"])
            approx = np.asarray(data["approx"][str(-levels)], dtype=np.float64)
            details = [np.asarray(data["details"][str(-(i + 1))], dtype=np.float64) for i in range(levels)]
            return cls(K=int(data["K"]), N=int(data["N"]), levels=levels, approx=approx, details=details)
        except (KeyError, TypeError, ValueError) as e:
            raise DomainError(f"Malformed pyramid JSON: {e}")


def dwt_analyze(x, fb: FilterBank, levels: int, boundary: str = "periodic") -> Pyramid:
    if boundary != "periodic":
        raise DomainError(f"Pyramid transforms are periodic only, got boundary '{boundary}'")
    x = np.asarray(x, dtype=np.float64)
    N = len(x)
    if levels < 1:
        raise DomainError(f"Number of levels must be >= 1, got {levels}")
    if N % 2 ** levels:
        raise DomainError(f"Signal length {N} is not divisible by 2^{levels}")
    if N // 2 ** levels < 2 * fb.K:
        raise DomainError(
            f"Coarsest window {N // 2 ** levels} is shorter than the filter length {2 * fb.K}; "
            f"use fewer levels or a longer signal"
        )

    H = BandedOperator(kind="H", filters=fb)
    G = BandedOperator(kind="G", filters=fb)
    approx = x
    details = []
    for _ in range(levels):
        details.append(banded_apply(G, approx).values)
        approx = banded_apply(H, approx).values
    return Pyramid(K=fb.K, N=N, levels=levels, approx=approx, details=details)


def dwt_synthesize(pyramid: Pyramid, fb: FilterBank) -> np.ndarray:
    if pyramid.K != fb.K:
        raise DomainError(f"Pyramid was built with K={pyramid.K}, filters are K={fb.K}")
    if len(pyramid.details) != pyramid.levels:
        raise DomainError(f"Pyramid declares {pyramid.levels} levels but holds {len(pyramid.details)} detail bands")

    HT = BandedOperator(kind="HT", filters=fb)
    GT = BandedOperator(kind="GT", filters=fb)
    approx = pyramid.approx
    for level in range(pyramid.levels - 1, -1, -1):
        detail = pyramid.details[level]
        if len(detail) != len(approx):
            raise DomainError(
                f"Shape mismatch at level {-(level + 1)}: approx has {len(approx)} values, detail has {len(detail)}"
            )
        approx = banded_apply(HT, approx).values + banded_apply(GT, detail).values
    if len(approx) != pyramid.N:
        raise DomainError(f"Reconstructed {len(approx)} values, pyramid declares N={pyramid.N}")
    return approx


class ScaleIdentityReport(BaseModel):
    K: int
    k: int
    orthonormality_residual: float
    derivative_residual: Optional[float] = None   # needs K >= 3

    @property
    def max_residual(self) -> float:
        values = [self.orthonormality_residual]
        if self.derivative_residual is not None:
            values.append(self.derivative_residual)
        return max(values)


def scale_identity_check(fb: FilterBank, k: int = 0) -> ScaleIdentityReport:
    """Residuals of delta_{mn} = sum_j h_{j-2m} h_{j-2n} and D^k_{mn} = sum h_{l-2m} h_{j-2n} D^{k+1}_{lj}

    The derivative table always comes from the exact K filters, so a nudged h
    shows up as a nonzero residual.
    """
    h = fb.h_array
    L = len(h)

    def tap(i: int) -> float:
        return h[i] if 0 <= i < L else 0.0

    ortho = 0.0
    for n in range(-(fb.K - 1), fb.K):
        value = sum(tap(j) * tap(j - 2 * n) for j in range(-L, 2 * L))
        ortho = max(ortho, abs(value - (1.0 if n == 0 else 0.0)))

    derivative = None
    if fb.K >= 3:
        D = pair_derivative_table(daubechies_filters(fb.K))
        W = 2 * fb.K - 2
        finer = 2.0 ** (2 * (k + 1))
        derivative = 0.0
        for n in range(-W, W + 1):
            value = 0.0
            for l in range(L):
                for j in range(2 * n, 2 * n + L):
                    value += tap(l) * tap(j - 2 * n) * finer * D.value(j - l)
            derivative = max(derivative, abs(value - 2.0 ** (2 * k) * D.value(n)))

    return ScaleIdentityReport(K=fb.K, k=k, orthonormality_residual=ortho, derivative_residual=derivative)


# ============== 3D TENSOR HELPERS ==============
Axis3 = Tuple[int, int, int]


def tensor3(cx: float, cy: float, cz: float) -> float:
    return cx * cy * cz


def wavelet_types() -> List[Tuple[str, str, str]]:
    """The seven generalized-wavelet labels: s/w per axis with at least one w"""
    return [t for t in product("sw", repeat=3) if "w" in t]


def laplacian3d(fb: FilterBank, k: int, m: Axis3, n: Axis3) -> float:
    """int grad s^k_m . grad s^k_n over R^3 for product scaling functions"""
    D = pair_derivative_table(fb)
    scale = 2.0 ** (2 * k)
    derivative = [scale * D.value(n[a] - m[a]) for a in range(3)]
    overlap = [1.0 if m[a] == n[a] else 0.0 for a in range(3)]

    total = 0.0
    for axis in range(3):
        factors = [derivative[a] if a == axis else overlap[a] for a in range(3)]
        total += tensor3(*factors)
    return total

