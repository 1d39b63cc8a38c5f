"""Free vacuum two-point integrals of smeared fields in 1+1 dimensions.

    A = <Phi^2> = int dp/2pi |f^(p)|^2 / (2 omega),   B = <Pi^2> = int dp/2pi |f^(p)|^2 omega / 2

with omega = sqrt(p^2 + mu^2) and f a scaling function or wavelet. The
Fourier transform of s is the infinite product of m0(p / 2^j), truncated
at a configurable depth.
"""
import math
import sys
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import roots_legendre

from config import DEFAULT_CONFIG, EngineConfig
from errors import ConvergenceError, DomainError
from filters import FilterBank

Element = Literal["scaling", "wavelet"]


class GammaResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float
    k: int
    element: Element
    A: float
    B: float
    gamma_star: float
    discriminant: float
    residual: float
    mass: float     # quadrature value of <f, f> before normalization
    tail_change: float = 0.0    # relative change of A or B when p_max doubles


def symbol(taps: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """(1/sqrt 2) sum_n c_n exp(-i n xi)"""
    n = np.arange(len(taps))
    return np.exp(-1j * np.outer(xi, n)) @ taps / math.sqrt(2.0)


def scaling_transform_sq(fb: FilterBank, p: np.ndarray, depth: int) -> np.ndarray:
    """|s^(p)|^2 from the truncated product of |m0(p / 2^j)|^2, j = 1..depth"""
    h = fb.h_array
    out = np.ones(len(p))
    for j in range(1, depth + 1):
        out *= np.abs(symbol(h, p / 2.0 ** j)) ** 2
    return out


def element_transform_sq(fb: FilterBank, p: np.ndarray, element: Element, depth: int) -> np.ndarray:
    if element == "scaling":
        return scaling_transform_sq(fb, p, depth)
    # w^(p) = m1(p/2) s^(p/2)
    return np.abs(symbol(fb.g_array, p / 2.0)) ** 2 * scaling_transform_sq(fb, p / 2.0, depth)


def _panel_nodes(lo: float, hi: float, nodes: int):
    """Gauss-Legendre nodes and weights on [lo, hi] in panels of width at most pi"""
    x, w = roots_legendre(nodes)
    panels = max(1, int(math.ceil((hi - lo) / math.pi)))
    edges = np.linspace(lo, hi, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2.0
    mid = (edges[1:] + edges[:-1]) / 2.0
    points = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return points, weights


def gamma_coefficients(fb: FilterBank, mu: float, k: int = 0, element: Element = "scaling",
                       config: Optional[EngineConfig] = None) -> GammaResult:
    """A, B and the residual-minimizing gamma* = sqrt(B/A) for the basis element at scale k"""
    config = config or DEFAULT_CONFIG
    if not mu > 0:
        raise DomainError(f"Mass must be positive, got mu={mu}; <Phi^2> diverges at mu=0 in 1+1 dimensions")
    if fb.K < 2:
        raise DomainError(f"K={fb.K}: <Pi^2> diverges for the discontinuous Haar basis; use K >= 2")
    if element not in ("scaling", "wavelet"):
        raise DomainError(f"Unknown basis element '{element}'")

    # scale k reduces to scale 0 with mass mu / 2^k: A -> 2^-k A, B -> 2^k B
    nu = mu / 2.0 ** k
    # [0, p_max] and the doubling shell [p_max, 2 p_max]; the shell bounds the truncation tail
    inner = _moments(fb, element, nu, *_panel_nodes(0.0, config.p_max, config.quad_nodes), config)
    shell = _moments(fb, element, nu, *_panel_nodes(config.p_max, 2.0 * config.p_max, config.quad_nodes), config)
    mass, a_sum, b_sum = inner + shell

    if abs(mass - 1.0) > config.norm_tolerance:
        raise ConvergenceError(
            f"Fourier quadrature lost normalization: <f,f> = {mass:.6f} "
            f"(p_max={config.p_max:g}, depth={config.fourier_depth}, nodes={config.quad_nodes})",
            history=[mass],
        )

    A0, B0 = a_sum / mass, b_sum / mass
    A_short, B_short = inner[1] / inner[0], inner[2] / inner[0]
    change_A = abs(A0 - A_short) / A0
    change_B = abs(B0 - B_short) / B0

    if change_A > config.tail_tolerance or (change_B > config.tail_tolerance and fb.K > 2):
        raise ConvergenceError(
            f"Momentum tail not converged: doubling p_max={config.p_max:g} moves A by {change_A:.3e} "
            f"and B by {change_B:.3e} (relative, tolerance {config.tail_tolerance:g}); "
            f"A {A_short:.12g} -> {A0:.12g}, B {B_short:.12g} -> {B0:.12g}",
            history=[(A_short, B_short), (A0, B0)],
        )
    if fb.K == 2:
        # B converges like 1/p_max for K=2
        print(f"⚠️ K=2 momentum integrand decays slowly; B moved by {change_B:.3e} "
              f"when p_max doubled to {2.0 * config.p_max:g}", file=sys.stderr)

    A = 2.0 ** -k * A0
    B = 2.0 ** k * B0
    gamma_star = math.sqrt(B / A)

    return GammaResult(
        mu=mu, k=k, element=element, A=float(A), B=float(B), gamma_star=gamma_star,
        discriminant=float(1.0 - 4.0 * A * B),
        residual=float((gamma_star * A + B / gamma_star - 1.0) / 2.0),
        mass=float(mass),
        tail_change=float(max(change_A, change_B)),
    )


def _moments(fb: FilterBank, element: Element, nu: float, u: np.ndarray, weights: np.ndarray,
             config: EngineConfig) -> np.ndarray:
    """Unnormalized <f,f>, A and B over the given nodes; both halves of the line, measure dp / 2pi"""
    density = element_transform_sq(fb, u, element, config.fourier_depth)
    omega = np.sqrt(u ** 2 + nu ** 2)
    return 2.0 * np.array([
        np.sum(weights * density),
        np.sum(weights * density / (2.0 * omega)),
        np.sum(weights * density * omega / 2.0),
    ]) / (2 * math.pi)
