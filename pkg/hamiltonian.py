"""Free-field coefficient matrices on a periodic volume of N coarse cells.

Index conventions: scaling functions s^k_m with m = 0..N-1 at the coarse
scale k, wavelets w^l_n with n = 0..N 2^(l-k) - 1 at every finer scale
l = k..l_max. Translations wrap with period N 2^-k in x.
"""
import math
import sys
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from conncoef import (ConnFactor, ConnQuery, gamma_pair_table, general_connection,
                      pair_derivative_table, weighted_pair_table)
from errors import DomainError, EngineError, RegularityError
from exporters import matrix_to_coo, matrix_to_csv
from filters import FilterBank

BlockKind = Literal["ss", "sw", "ww"]


def _require_k3(fb: FilterBank):
    if fb.K != 3:
        raise RegularityError(
            f"Coupling matrices need first derivatives of the basis; K={fb.K} given, only K=3 is supported"
        )


def _check_volume(fb: FilterBank, N: int):
    if N < 2 * (2 * fb.K - 1):
        raise DomainError(f"Periodic volume N={N} is smaller than 2(2K-1)={2 * (2 * fb.K - 1)}")


def circulant_from_offsets(values: Dict[int, float], N: int) -> np.ndarray:
    """C_{mn} = sum over periodic images of values[n - m]"""
    C = np.zeros((N, N))
    m = np.arange(N)
    for offset, v in values.items():
        C[m, (m + offset) % N] += v
    return C


def _offsets(table) -> Dict[int, float]:
    return {index[0]: value for index, value in table.entries.items()}


class CouplingBlock(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: BlockKind
    scales: Tuple[int, ...]
    N: int
    matrix: np.ndarray

    def to_csv(self) -> str:
        return matrix_to_csv(self.matrix)

    def to_coo(self) -> str:
        return matrix_to_coo(self.matrix)

    def max_row_nonzeros(self, threshold: float = 0.0) -> int:
        return int(np.max(np.sum(np.abs(self.matrix) > threshold, axis=1)))


def _periodic_connection(K: int, left: ConnFactor, right: ConnFactor, period: int) -> float:
    """int left * right with the right factor summed over its periodic images"""
    total = 0.0
    for image in range(-2, 3):
        shifted = right.model_copy(update={"n": right.n + image * period})
        total += general_connection(ConnQuery(K=K, factors=[left, shifted]))
    return total


def _wavelet_count(N: int, k: int, l: int) -> int:
    return N * 2 ** (l - k)


def coupling_blocks(fb: FilterBank, k: int, l_max: Optional[int], N: int) -> List[CouplingBlock]:
    """ss block at scale k, sw blocks for l = k..l_max, ww blocks for k <= j <= l <= l_max"""
    _require_k3(fb)
    _check_volume(fb, N)

    D = pair_derivative_table(fb)
    ss = circulant_from_offsets({m: 2.0 ** (2 * k) * v for m, v in _offsets(D).items()}, N)
    blocks = [CouplingBlock(kind="ss", scales=(k,), N=N, matrix=ss)]
    if l_max is None or l_max < k:
        return blocks

    for l in range(k, l_max + 1):
        count = _wavelet_count(N, k, l)
        sw = np.zeros((N, count))
        for m in range(N):
            left = ConnFactor(kind="scaling", k=k, n=m, d=1)
            for n in range(count):
                right = ConnFactor(kind="wavelet", k=l, n=n, d=1)
                sw[m, n] = _periodic_connection(fb.K, left, right, count)
        blocks.append(CouplingBlock(kind="sw", scales=(k, l), N=N, matrix=sw))

    for j in range(k, l_max + 1):
        for l in range(j, l_max + 1):
            rows, cols = _wavelet_count(N, k, j), _wavelet_count(N, k, l)
            ww = np.zeros((rows, cols))
            for m in range(rows):
                left = ConnFactor(kind="wavelet", k=j, n=m, d=1)
                for n in range(cols):
                    right = ConnFactor(kind="wavelet", k=l, n=n, d=1)
                    ww[m, n] = _periodic_connection(fb.K, left, right, cols)
            blocks.append(CouplingBlock(kind="ww", scales=(j, l), N=N, matrix=ww))

    print(f"✅ Assembled {len(blocks)} coupling blocks (k={k}, l_max={l_max}, N={N})", file=sys.stderr)
    return blocks


class QuadraticForm(BaseModel):
    """D + mu^2 I over the coarse (a) plus fine (b) index set"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mu: float
    matrix: np.ndarray
    coarse_size: int
    fine_offsets: Dict[int, Tuple[int, int]]   # wavelet scale -> [start, stop)

    def block(self, label: Literal["aa", "ab", "bb"]) -> np.ndarray:
        a = slice(0, self.coarse_size)
        b = slice(self.coarse_size, len(self.matrix))
        return {"aa": self.matrix[a, a], "ab": self.matrix[a, b], "bb": self.matrix[b, b]}[label]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def quadratic_form(fb: FilterBank, mu: float, blocks: List[CouplingBlock]) -> QuadraticForm:
    if mu <= 0:
        raise DomainError(f"Mass must be positive, got mu={mu}")
    ss = [b for b in blocks if b.kind == "ss"]
    if len(ss) != 1:
        raise DomainError(f"Expected exactly one ss block, got {len(ss)}")
    coarse = ss[0]
    k = coarse.scales[0]
    N = coarse.N

    fine_scales = sorted({b.scales[1] for b in blocks if b.kind == "sw"})
    offsets, cursor = {}, N
    for l in fine_scales:
        count = _wavelet_count(N, k, l)
        offsets[l] = (cursor, cursor + count)
        cursor += count

    M = np.zeros((cursor, cursor))
    M[:N, :N] = coarse.matrix
    for b in blocks:
        if b.kind == "sw":
            lo, hi = offsets[b.scales[1]]
            M[:N, lo:hi] = b.matrix
            M[lo:hi, :N] = b.matrix.T
        elif b.kind == "ww":
            (r0, r1), (c0, c1) = offsets[b.scales[0]], offsets[b.scales[1]]
            M[r0:r1, c0:c1] = b.matrix
            if b.scales[0] != b.scales[1]:
                M[c0:c1, r0:r1] = b.matrix.T

    asymmetry = np.max(np.abs(M - M.T))
    if asymmetry > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise EngineError(f"Assembled quadratic form is not symmetric (max asymmetry {asymmetry:.3e})")

    M = M + mu ** 2 * np.eye(cursor)
    return QuadraticForm(mu=mu, matrix=M, coarse_size=N, fine_offsets=offsets)


def dispersion(fb: FilterBank, mu: float, p, k: int = 0):
    """mu^2 + sum_m D^k_{0m} cos(p m), the coarse circulant's eigenvalue at momentum p"""
    D = pair_derivative_table(fb)
    p = np.asarray(p, dtype=np.float64)
    total = np.full(p.shape, mu ** 2)
    for m, v in _offsets(D).items():
        total = total + 2.0 ** (2 * k) * v * np.cos(p * m)
    return total


class SpectrumReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mu: float
    N: int
    momenta: np.ndarray
    predicted: np.ndarray
    computed: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(np.sort(self.predicted) - self.computed)))


def circulant_spectrum(fb: FilterBank, mu: float, N: int, k: int = 0) -> SpectrumReport:
    """Direct eigensolve of the coarse quadratic form next to the Fourier prediction"""
    form = quadratic_form(fb, mu, coupling_blocks(fb, k, None, N))
    momenta = 2 * math.pi * np.arange(N) / N
    return SpectrumReport(mu=mu, N=N, momenta=momenta, predicted=dispersion(fb, mu, momenta, k),
                          computed=form.eigenvalues())


# ============== GENERATORS ==============
class GeneratorCoefficients(BaseModel):
    """B_{mn} = int s^k_m (s^k_n)', F_{mn} = int s^k_m x s^k_n, G_{mn} = int (s^k_m)' x (s^k_n)'"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    N: int
    B: np.ndarray
    F: np.ndarray
    G: np.ndarray


def generator_matrices(fb: FilterBank, k: int, N: int) -> GeneratorCoefficients:
    """Periodic in the translation offset; the x-weighted affine part uses each row's home translation m"""
    _require_k3(fb)
    _check_volume(fb, N)

    gamma = _offsets(gamma_pair_table(fb))
    F0 = _offsets(weighted_pair_table(fb, 0, 0, 1))
    G0 = _offsets(weighted_pair_table(fb, 1, 1, 1))
    D = _offsets(pair_derivative_table(fb))
    rows = np.arange(N, dtype=np.float64)

    B = 2.0 ** k * circulant_from_offsets(gamma, N)
    F = 2.0 ** -k * (circulant_from_offsets(F0, N) + np.diag(rows))
    G = 2.0 ** k * (circulant_from_offsets(G0, N) + rows[:, None] * circulant_from_offsets(D, N))
    return GeneratorCoefficients(k=k, N=N, B=B, F=F, G=G)


def boost_form(fb: FilterBank, mu: float, k: int, N: int) -> np.ndarray:
    """Field part mu^2 F + G of the 1D boost generator; the momentum part is F itself"""
    if mu <= 0:
        raise DomainError(f"Mass must be positive, got mu={mu}")
    gen = generator_matrices(fb, k, N)
    return mu ** 2 * gen.F + gen.G


# ============== PARTITION-OF-UNITY MOMENTUM DENSITY ==============
class PartitionMomentum(BaseModel):
    """P[m, n, j] = -2^{-k/2} int s^k_m s^k_n (s^k_j)'"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    N: int
    tensor: np.ndarray

    def sum_rule_residual(self, fb: FilterBank) -> float:
        """max |sum_m P_{mnj} + B_{nj}|"""
        B = 2.0 ** self.k * circulant_from_offsets(_offsets(gamma_pair_table(fb)), self.N)
        return float(np.max(np.abs(self.tensor.sum(axis=0) + B)))


def partition_momentum_coefficients(fb: FilterBank, k: int, N: int) -> PartitionMomentum:
    _require_k3(fb)
    _check_volume(fb, N)
    W = 2 * fb.K - 2
    norm = -2.0 ** (-k / 2.0)
    P = np.zeros((N, N, N))
    for m in range(N):
        for a in range(-W, W + 1):
            for b in range(-W, W + 1):
                if abs(a - b) > W:
                    continue
                value = general_connection(ConnQuery(K=fb.K, factors=[
                    ConnFactor(kind="scaling", k=k, n=m),
                    ConnFactor(kind="scaling", k=k, n=m + a),
                    ConnFactor(kind="scaling", k=k, n=m + b, d=1),
                ]))
                P[m, (m + a) % N, (m + b) % N] += norm * value
    return PartitionMomentum(k=k, N=N, tensor=P)


MixedFactor = Tuple[Literal["scaling", "wavelet"], int, int]


def mixed_momentum_coefficient(fb: FilterBank, k: int, m: int, phi: MixedFactor, pi: MixedFactor) -> float:
    """-2^{-k/2} int s^k_m(x) f_phi(x) f_pi'(x) dx with f = (kind, scale, translation)

    The smearing function is the scale-k partition of unity member s^k_m;
    phi/pi may be wavelets at finer scales, which covers the small-scale
    corrections to the localized momentum density.
    """
    _require_k3(fb)
    query = ConnQuery(K=fb.K, factors=[
        ConnFactor(kind="scaling", k=k, n=m),
        ConnFactor(kind=phi[0], k=phi[1], n=phi[2]),
        ConnFactor(kind=pi[0], k=pi[1], n=pi[2], d=1),
    ])
    return -2.0 ** (-k / 2.0) * general_connection(query)
