"""Connection coefficients by renormalization-group linear systems.

Every overlap integral of at most three factors (scaling functions, wavelets,
first derivatives, one power of x) reduces to a finite table of scale-0
integrals

    I_q(t_2, t_3) = int x^q s^(d1)(x) s^(d2)(x - t_2) s^(d3)(x - t_3) dx

with d1 <= d2 <= d3. Inserting the scaling equation into each factor maps the
table onto itself, which together with partition-of-unity sum rules,
symmetries and one inhomogeneous normalization row gives an overdetermined
linear system solved in the least-squares sense.
"""
import json
import math
import sys
import threading
from itertools import product
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import lstsq

from config import DEFAULT_CONFIG, EngineConfig
from errors import (DegenerateSystemError, DomainError,
                    UnsupportedConfigurationError)
from exporters import rows_to_csv, table_rows, to_json
from filters import FilterBank, daubechies_filters, upsample_coefficients
from refine import check_regularity

GOLDEN_PATH = Path(__file__).parent / "golden_tables.json"

TABLE_NAMES = {
    ((0, 1), 0): "gamma_pair",
    ((1, 1), 0): "D_pair",
    ((0, 1, 1), 0): "D_triple",
    ((0, 0), 1): "F_pair",
    ((1, 1), 1): "G_pair",
    ((0, 1), 1): "E_pair",
    ((0, 0), 0): "overlap_pair",
    ((0, 0, 0), 0): "overlap_triple",
    ((0, 0, 1), 0): "momentum_triple",
}

SUPPORTED_SHAPES = ("1 to 3 factors, each derivative order <= 1, "
                    "total derivative order <= 2, monomial power q in {0,1}")


class BaseTable(BaseModel):
    """Scale-0 integrals indexed by the translations of factors 2..n (first factor at 0)"""
    model_config = ConfigDict(frozen=True)

    kind: str
    K: int
    derivs: Tuple[int, ...]
    q: int
    entries: Dict[Tuple[int, ...], float]

    def value(self, *index: int) -> float:
        return self.entries.get(tuple(index), 0.0)

    def __getitem__(self, index) -> float:
        if not isinstance(index, tuple):
            index = (index,)
        return self.value(*index)

    def as_vector(self) -> Tuple[List[int], np.ndarray]:
        """Pair tables as (offsets, values) over the support window"""
        if len(self.derivs) != 2:
            raise DomainError(f"Table {self.kind} has {len(self.derivs) - 1} translation indices, not 1")
        keys = sorted(self.entries)
        return [k[0] for k in keys], np.array([self.entries[k] for k in keys])

    def to_csv(self) -> str:
        index_names = {1: [], 2: ["m"], 3: ["l", "m"]}[len(self.derivs)]
        return rows_to_csv(index_names + ["value"], table_rows(self.entries))

    def to_json(self) -> str:
        return to_json({
            "kind": self.kind, "K": self.K, "derivs": list(self.derivs), "q": self.q,
            "entries": [list(k) + [v] for k, v in sorted(self.entries.items())],
        })


# ============== MOMENTS ==============
def moments(fb: FilterBank, m_max: int) -> Tuple[List[float], List[float]]:
    """<x^m>_s and <x^m>_w for m = 0..m_max by the scaling-equation recursion"""
    if m_max < 0:
        raise DomainError(f"Highest moment power must be >= 0, got {m_max}")
    h, g = fb.h_array, fb.g_array
    l = np.arange(len(h), dtype=np.float64)

    s_moments = [1.0]
    for m in range(1, m_max + 1):
        acc = sum(math.comb(m, k) * np.sum(h * l ** (m - k)) * s_moments[k] for k in range(m))
        s_moments.append(acc / ((2 ** m - 1) * math.sqrt(2.0)))

    w_moments = []
    for m in range(m_max + 1):
        acc = sum(math.comb(m, k) * np.sum(g * l ** (m - k)) * s_moments[k] for k in range(m + 1))
        w_moments.append(acc / (math.sqrt(2.0) * 2 ** m))
    return s_moments, w_moments


def first_moment(fb: FilterBank) -> float:
    return float(np.dot(np.arange(len(fb.h)), fb.h_array) / math.sqrt(2.0))


def translated_first_moment(fb: FilterBank, n: int) -> float:
    """b_n = int x s_n(x) dx, the coefficients of x = sum_n b_n s_n(x)"""
    return n + first_moment(fb)


def _single_factor(fb: FilterBank, d: int, q: int, shift: float = 0.0) -> float:
    """int x^q s^(d)(x - shift) dx for q in {0,1}"""
    if d == 0:
        return 1.0 if q == 0 else first_moment(fb) + shift
    return 0.0 if q == 0 else -1.0


# ============== GENERIC RG SOLVER ==============
def support_window(K: int, n_factors: int) -> List[Tuple[int, ...]]:
    """Translations whose factor supports all overlap: |t_i|, |t_i - t_j| <= 2K-2"""
    W = 2 * K - 2
    if n_factors == 2:
        return [(t,) for t in range(-W, W + 1)]
    return [(a, b) for a in range(-W, W + 1) for b in range(-W, W + 1) if abs(a - b) <= W]


class _SystemBuilder:
    """Accumulates rows of A x = b over a fixed unknown index set"""

    def __init__(self, unknowns: List[Tuple[int, ...]]):
        self.index = {u: i for i, u in enumerate(unknowns)}
        self.rows: List[np.ndarray] = []
        self.rhs: List[float] = []

    def new_row(self) -> np.ndarray:
        return np.zeros(len(self.index))

    def add(self, row: np.ndarray, rhs: float):
        self.rows.append(row)
        self.rhs.append(rhs)

    def put(self, row: np.ndarray, key: Tuple[int, ...], coef: float) -> bool:
        i = self.index.get(key)
        if i is None:
            return False
        row[i] += coef
        return True


def _canonical(derivs) -> Tuple[int, ...]:
    return tuple(sorted(derivs))


def _validate_shape(derivs: Tuple[int, ...], q: int):
    if not 1 <= len(derivs) <= 3 or any(d not in (0, 1) for d in derivs) or sum(derivs) > 2 or q not in (0, 1):
        raise UnsupportedConfigurationError(
            f"Configuration not supported (derivs={derivs}, q={q}); supported shapes: {SUPPORTED_SHAPES}"
        )


class ConnectionEngine:
    """Base tables and general connection coefficients for one filter bank"""

    def __init__(self, fb: FilterBank, config: EngineConfig = DEFAULT_CONFIG):
        self.fb = fb
        self.config = config
        self.tables: Dict[Tuple[Tuple[int, ...], int], BaseTable] = {}
        self.queries: Dict[tuple, float] = {}
        self._lock = threading.RLock()

    # ---------- base tables ----------
    def base_table(self, derivs, q: int = 0) -> BaseTable:
        derivs = _canonical(derivs)
        _validate_shape(derivs, q)
        if any(derivs):
            check_regularity(self.fb.K, 1)

        key = (derivs, q)
        cached = self.tables.get(key)
        if cached is not None:
            return cached

        with self._lock:
            if key in self.tables:
                return self.tables[key]
            if len(derivs) == 1:
                entries = {(): _single_factor(self.fb, derivs[0], q)}
            elif derivs == (1, 1) and q == 0:
                entries = self._contract_triple()
            else:
                entries = self._solve(derivs, q)
            table = BaseTable(kind=TABLE_NAMES.get(key, "moment" if len(derivs) == 1 else "base"),
                              K=self.fb.K, derivs=derivs, q=q, entries=entries)
            _check_table_invariants(table)
            self.tables[key] = table
            return table

    def _contract_triple(self) -> Dict[Tuple[int, ...], float]:
        """D_{0m} = sum_n D_{0,-n,m-n}: the partition of unity collapses the s factor"""
        triple = self.base_table((0, 1, 1), 0)
        W = 2 * self.fb.K - 2
        return {(m,): sum(triple.value(-n, m - n) for n in range(-W, W + 1)) for m in range(-W, W + 1)}

    def _lower(self, derivs: Tuple[int, ...], q: int, index: Tuple[int, ...]) -> float:
        table = self.base_table(derivs, q)
        return table.value(*index)

    def _solve(self, derivs: Tuple[int, ...], q: int) -> Dict[Tuple[int, ...], float]:
        fb = self.fb
        h = fb.h_array
        n = len(derivs)
        unknowns = support_window(fb.K, n)
        system = _SystemBuilder(unknowns)
        scale = 2.0 ** (n / 2.0 + sum(derivs) - 1 - q)
        base0 = self.base_table(derivs, 0) if q == 1 else None

        print(f"🔧 Solving {TABLE_NAMES.get((derivs, q), 'base')} system for K={fb.K} "
              f"(derivs={derivs}, q={q}, {len(unknowns)} unknowns)", file=sys.stderr)

        # Scaling equation inserted into every factor, then translate by b_1
        for t in unknowns:
            row = system.new_row()
            system.put(row, t, 1.0)
            rhs = 0.0
            for b in product(range(len(h)), repeat=n):
                weight = scale * np.prod([h[bi] for bi in b])
                target = tuple(2 * t[i - 1] + b[i] - b[0] for i in range(1, n))
                system.put(row, target, -weight)
                if q == 1:
                    rhs += weight * b[0] * base0.value(*target)
            system.add(row, rhs)

        self._sum_rules(system, derivs, q, unknowns)
        self._symmetry_rules(system, derivs, q, unknowns, base0)

        A = np.array(system.rows)
        b = np.array(system.rhs)
        x, _, _, sv = lstsq(A, b, lapack_driver="gelsd")
        rank = int(np.sum(sv > 1e-11 * sv[0]))
        if rank < len(unknowns):
            raise DegenerateSystemError(
                f"Degenerate system for derivs={derivs}, q={q}, K={fb.K}: rank {rank} of "
                f"{len(unknowns)} unknowns (rank defect {len(unknowns) - rank})"
            )
        residual = np.max(np.abs(A @ x - b))
        if residual > self.config.lstsq_residual * max(1.0, np.max(np.abs(b))):
            raise DegenerateSystemError(
                f"Inconsistent system for derivs={derivs}, q={q}, K={fb.K}: residual {residual:.3e}"
            )
        return {u: float(x[i]) for i, u in enumerate(unknowns)}

    def _sum_rules(self, system: _SystemBuilder, derivs, q, unknowns):
        """Partition of unity sum_n s(x-n) = 1, sum_n s'(x-n) = 0 and the first-moment rules"""
        n = len(derivs)
        mean = first_moment(self.fb)
        polynomial_ok = self.fb.K >= 2

        for position in range(1, n):
            d = derivs[position]
            rest = tuple(derivs[i] for i in range(n) if i != position)
            others = sorted({u[:position - 1] + u[position:] for u in unknowns})
            for fixed in others:
                members = [u for u in unknowns if u[:position - 1] + u[position:] == fixed]
                lower_index = fixed

                row = system.new_row()
                for u in members:
                    system.put(row, u, 1.0)
                rhs = 0.0 if d == 1 else self._lower_value(rest, q, lower_index)
                system.add(row, rhs)

                if not polynomial_ok:
                    continue
                if d == 1:
                    # sum_n n s'(x - n) = 1
                    row = system.new_row()
                    for u in members:
                        system.put(row, u, float(u[position - 1]))
                    system.add(row, self._lower_value(rest, q, lower_index))
                elif q == 0:
                    # sum_n (n + <x>) s(x - n) = x
                    row = system.new_row()
                    for u in members:
                        system.put(row, u, u[position - 1] + mean)
                    system.add(row, self._lower_value(rest, 1, lower_index))

    def _lower_value(self, derivs, q, index) -> float:
        derivs = tuple(derivs)
        if len(derivs) == 1:
            return _single_factor(self.fb, derivs[0], q)
        return self._lower(derivs, q, index)

    def _symmetry_rules(self, system: _SystemBuilder, derivs, q, unknowns, base0: Optional[BaseTable]):
        n = len(derivs)
        if n == 3 and derivs[1] == derivs[2]:
            for t2, t3 in unknowns:
                if t2 < t3:
                    row = system.new_row()
                    system.put(row, (t2, t3), 1.0)
                    system.put(row, (t3, t2), -1.0)
                    system.add(row, 0.0)
        if derivs[0] == derivs[1]:
            # exchange the first two factors and re-center on the new first one
            for t in unknowns:
                swapped = (-t[0],) + tuple(ti - t[0] for ti in t[1:])
                row = system.new_row()
                system.put(row, t, 1.0)
                system.put(row, swapped, -1.0)
                rhs = q * t[0] * base0.value(*swapped) if q == 1 else 0.0
                system.add(row, rhs)

    # ---------- general connection coefficients ----------
    def general_connection(self, query: "ConnQuery") -> float:
        if query.K != self.fb.K:
            raise DomainError(f"Query is for K={query.K} but engine holds K={self.fb.K}")
        query.check_supported()
        if query.disjoint():
            return 0.0

        key = query.normalized_key()
        cached = self.queries.get(key)
        if cached is not None:
            return cached

        value = self._evaluate(query)
        with self._lock:
            # insertion order doubles as age; base tables are never evicted
            while len(self.queries) >= self.config.query_cache_size:
                self.queries.pop(next(iter(self.queries)))
            self.queries[key] = value
        return value

    def _expand(self, factor: "ConnFactor", J: int) -> Tuple[int, np.ndarray]:
        """Coefficients of a factor in the scale-J scaling functions: (first index, values)"""
        start, coefs = factor.n, np.array([1.0])
        steps = J - factor.k
        for step in range(steps):
            taps = self.fb.g_array if (factor.kind == "wavelet" and step == 0) else self.fb.h_array
            coefs = upsample_coefficients(coefs, taps)
            start = 2 * start
        return start, coefs

    def _evaluate(self, query: "ConnQuery") -> float:
        factors = sorted(query.factors, key=lambda f: f.d)
        derivs = tuple(f.d for f in factors)
        q = query.weight
        n = len(factors)
        J = max(f.k + (1 if f.kind == "wavelet" else 0) for f in factors)
        expanded = [self._expand(f, J) for f in factors]
        prefactor = 2.0 ** (J * (n / 2.0 + sum(derivs) - 1 - q))

        first_start, first = expanded[0]
        l1 = first_start + np.arange(len(first))

        if n == 1:
            if derivs[0] == 0:
                values = np.ones(len(l1)) if q == 0 else first_moment(self.fb) + l1
            else:
                values = np.zeros(len(l1)) if q == 0 else -np.ones(len(l1))
            return float(prefactor * np.dot(first, values))

        table_q = self.base_table(derivs, q)
        table_0 = self.base_table(derivs, 0) if q == 1 else None

        def gather(start: int, coefs: np.ndarray, positions: np.ndarray) -> np.ndarray:
            idx = positions - start
            inside = (idx >= 0) & (idx < len(coefs))
            out = np.zeros(len(positions))
            out[inside] = coefs[idx[inside]]
            return out

        total = 0.0
        for t, value in table_q.entries.items():
            weight = value + (l1 * table_0.value(*t) if q == 1 else 0.0)
            term = first * weight
            for i, (start, coefs) in enumerate(expanded[1:]):
                term = term * gather(start, coefs, l1 + t[i])
            total += float(np.sum(term))
        return prefactor * total


# ============== QUERIES ==============
class ConnFactor(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["scaling", "wavelet"] = "scaling"
    k: int = 0
    n: int = 0
    d: int = Field(0, ge=0)


class ConnQuery(BaseModel):
    """int x^weight prod_i f_i(x) dx with f_i = D^k T^n of s or w, optionally differentiated"""
    model_config = ConfigDict(frozen=True)

    K: int
    factors: List[ConnFactor]
    weight: int = Field(0, ge=0)

    def check_supported(self):
        derivs = tuple(f.d for f in self.factors)
        if not self.factors:
            raise UnsupportedConfigurationError(f"Query has no factors; supported shapes: {SUPPORTED_SHAPES}")
        _validate_shape(_canonical(derivs), self.weight)
        if any(derivs):
            check_regularity(self.K, 1)

    def supports(self) -> List[Tuple[float, float]]:
        width = 2 * self.K - 1
        return [(f.n * 2.0 ** -f.k, (f.n + width) * 2.0 ** -f.k) for f in self.factors]

    def disjoint(self) -> bool:
        intervals = self.supports()
        return max(lo for lo, _ in intervals) >= min(hi for _, hi in intervals)

    def normalized_key(self) -> tuple:
        factors = list(self.factors)
        if self.weight == 0:
            # shift x by an integer multiple of the coarsest cell; pure overlaps are invariant
            k_min = min(f.k for f in factors)
            anchor = next(f for f in factors if f.k == k_min).n
            factors = [f.model_copy(update={"n": f.n - anchor * 2 ** (f.k - k_min)}) for f in factors]
        signature = tuple(sorted((f.kind, f.k, f.n, f.d) for f in factors))
        return (self.K, signature, self.weight)


# ============== LAZY ENGINE REGISTRY ==============
_engines: Dict[Tuple[int, Tuple[float, ...]], ConnectionEngine] = {}
_engines_lock = threading.Lock()


def get_engine(fb: FilterBank, config: EngineConfig = DEFAULT_CONFIG) -> ConnectionEngine:
    key = (fb.K, tuple(fb.h))
    with _engines_lock:
        if key not in _engines:
            _engines[key] = ConnectionEngine(fb, config)
            print(f"✅ Connection engine ready for K={fb.K}", file=sys.stderr)
        return _engines[key]


def base_table(fb: FilterBank, derivs, q: int = 0) -> BaseTable:
    return get_engine(fb).base_table(derivs, q)


def gamma_pair_table(fb: FilterBank) -> BaseTable:
    """Gamma_{0n} = int s(x) s'(x-n) dx"""
    return get_engine(fb).base_table((0, 1), 0)


def triple_table(fb: FilterBank) -> BaseTable:
    """D_{0lm} = int s(x) s'(x-l) s'(x-m) dx"""
    return get_engine(fb).base_table((0, 1, 1), 0)


def pair_derivative_table(fb: FilterBank) -> BaseTable:
    """D_{0m} = int s'(x) s'(x-m) dx"""
    return get_engine(fb).base_table((1, 1), 0)


def overlap_triple_table(fb: FilterBank) -> BaseTable:
    return get_engine(fb).base_table((0, 0, 0), 0)


def momentum_triple_table(fb: FilterBank) -> BaseTable:
    """int s(x) s(x-l) s'(x-m) dx"""
    return get_engine(fb).base_table((0, 0, 1), 0)


def weighted_pair_table(fb: FilterBank, d1: int, d2: int, q: int = 1) -> BaseTable:
    """int s^(d1)(x) x^q s^(d2)(x-m) dx; (1,0) is mapped onto the (0,1) table"""
    if q not in (0, 1):
        raise UnsupportedConfigurationError(f"Monomial power q={q} not supported; q in {{0,1}}")
    engine = get_engine(fb)
    if d1 <= d2:
        return engine.base_table((d1, d2), q)

    # int s'(x) x^q s(x-m) = int s(z) (z+m)^q s'(z+m) dz
    forward = engine.base_table((d2, d1), q)
    forward0 = engine.base_table((d2, d1), 0)
    entries = {}
    for (m,), _ in forward.entries.items():
        entries[(m,)] = forward.value(-m) + (q * m * forward0.value(-m) if q == 1 else 0.0)
    return BaseTable(kind="base", K=fb.K, derivs=(d1, d2), q=q, entries=entries)


def weighted_mixed_table(fb: FilterBank) -> BaseTable:
    """E_{0m} = int s(x) x s'(x-m) dx"""
    return weighted_pair_table(fb, 0, 1, 1)


def general_connection(query: ConnQuery, fb: Optional[FilterBank] = None) -> float:
    fb = fb if fb is not None else daubechies_filters(query.K)
    return get_engine(fb).general_connection(query)


def connection(K: int, factors: List[tuple], weight: int = 0) -> float:
    """Shorthand: factors as (kind, k, n, d) tuples"""
    query = ConnQuery(K=K, factors=[ConnFactor(kind=f[0], k=f[1], n=f[2], d=f[3]) for f in factors],
                      weight=weight)
    return general_connection(query)


# ============== INVARIANTS ==============
def _check_table_invariants(table: BaseTable, tol: float = 1e-9):
    def fail(what: str):
        raise DegenerateSystemError(f"Table {table.kind} (K={table.K}) violates {what}")

    W = 2 * table.K - 2
    if table.kind == "gamma_pair":
        if any(abs(table.value(n) + table.value(-n)) > tol for n in range(W + 1)):
            fail("antisymmetry Gamma_{0,-n} = -Gamma_{0n}")
        if abs(sum(n * table.value(n) for n in range(-W, W + 1)) - 1.0) > tol:
            fail("sum_n n Gamma_{0n} = 1")
    elif table.kind == "D_pair":
        if any(abs(table.value(m) - table.value(-m)) > tol for m in range(W + 1)):
            fail("symmetry D_{0,-m} = D_{0m}")
        if abs(sum(table.value(m) for m in range(-W, W + 1))) > tol:
            fail("sum_m D_{0m} = 0")
    elif table.kind == "D_triple":
        for (l, m), v in table.entries.items():
            if abs(v - table.value(m, l)) > tol:
                fail("symmetry D_{0lm} = D_{0ml}")
        for l in range(-W, W + 1):
            if abs(sum(table.value(l, m) for m in range(-W, W + 1))) > tol:
                fail("sum_m D_{0lm} = 0")


# ============== GOLDEN TABLES ==============
class TableCheck(BaseModel):
    table: str
    count: int
    passed: int
    max_abs: float
    max_rel: float
    tolerance: Dict[str, float]

    @property
    def ok(self) -> bool:
        return self.passed == self.count

    def summary(self) -> str:
        tol = ", ".join(f"{k} {v:g}" for k, v in self.tolerance.items())
        return (f"{self.table}: {self.passed}/{self.count} entries within tolerance ({tol}); "
                f"max abs {self.max_abs:.3e}, max rel {self.max_rel:.3e}")


def load_golden(path: Path = GOLDEN_PATH) -> dict:
    with open(path, 'r') as f:
        return json.load(f)


def verify_golden(table: str, fb: Optional[FilterBank] = None, path: Path = GOLDEN_PATH) -> TableCheck:
    """Diff a computed table against the transcribed golden copy"""
    golden = load_golden(path)
    if table not in ("pair", "gamma", "triple"):
        raise DomainError(f"No golden copy for table '{table}'; available: pair, gamma, triple")
    fb = fb if fb is not None else daubechies_filters(golden["K"])
    if fb.K != golden["K"]:
        raise DomainError(f"Golden tables are for K={golden['K']}, not K={fb.K}")

    computed = {"pair": pair_derivative_table, "gamma": gamma_pair_table, "triple": triple_table}[table](fb)
    reference = golden[table]
    tolerance = reference["tolerance"]
    passed, max_abs, max_rel = 0, 0.0, 0.0
    for row in reference["entries"]:
        index, expected = tuple(row[:-1]), row[-1]
        actual = computed.value(*index)
        err = abs(actual - expected)
        rel = err / abs(expected) if expected != 0 else (0.0 if err == 0 else math.inf)
        max_abs = max(max_abs, err)
        if expected != 0:
            max_rel = max(max_rel, rel)
        within = True
        if "absolute" in tolerance:
            within &= err <= tolerance["absolute"]
        if "relative" in tolerance:
            within &= rel <= tolerance["relative"] if expected != 0 else err <= 1e-12
        passed += int(within)
    return TableCheck(table=table, count=len(reference["entries"]), passed=passed,
                      max_abs=max_abs, max_rel=max_rel, tolerance=tolerance)
