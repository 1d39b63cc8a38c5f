"""Decoupling a coarse block from a fine block of a symmetric matrix.

Two routes: the similarity flow dH/dlam = [[G, H], H] with a block-diagonal
G, integrated by an adaptive Runge-Kutta 4(5) stepper, and the Okubo
unitary built from the operator A that solves

    A Ha - Hc A + HI^T - A HI A = 0

for H = [[Ha, HI], [HI^T, Hc]].
"""
import sys
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import RK45
from scipy.linalg import eigh, solve_sylvester

from config import DEFAULT_CONFIG, EngineConfig
from errors import ConvergenceError, DomainError, SpectralGapError
from exporters import rows_to_csv

Generator = Literal["fixed", "wegner-dynamic"]


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def block_diagonal(H: np.ndarray, split: int) -> np.ndarray:
    G = np.zeros_like(H)
    G[:split, :split] = H[:split, :split]
    G[split:, split:] = H[split:, split:]
    return G


def off_block_norm(H: np.ndarray, split: int) -> float:
    """Frobenius norm of the two off-diagonal blocks"""
    return float(np.sqrt(2.0) * np.linalg.norm(H[:split, split:]))


def _check_symmetric(H: np.ndarray, split: int):
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError(f"Expected a square matrix, got shape {H.shape}")
    if not 0 < split < len(H):
        raise DomainError(f"Block split {split} must lie strictly inside 0..{len(H)}")
    asymmetry = np.max(np.abs(H - H.T))
    if asymmetry > 1e-10 * max(1.0, np.max(np.abs(H))):
        raise DomainError(f"Matrix is not symmetric (max asymmetry {asymmetry:.3e})")


class FlowStep(BaseModel):
    lam: float
    off_norm: float
    min_eig_drift: float
    max_eig_drift: float


class FlowState(BaseModel):
    """Symmetric matrix over a coarse (first `split` indices) plus fine split"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    H: np.ndarray
    split: int
    lam: float = 0.0
    history: List[FlowStep] = Field(default_factory=list)

    @property
    def off_norm(self) -> float:
        return off_block_norm(self.H, self.split)


def wegner_flow(state: FlowState, generator: Generator = "wegner-dynamic", lam_max: float = 1.0,
                off_tol: Optional[float] = None, config: EngineConfig = DEFAULT_CONFIG) -> FlowState:
    """Integrate dH/dlam = [[G, H], H] from state.lam to lam_max.

    fixed uses G = block diagonal of the initial H; wegner-dynamic
    re-evaluates G along the flow and rejects any step that raises the
    off-block norm, retrying from the previous state with half the step.
    Stops early once the off-block norm drops below off_tol * initial.
    """
    H0 = np.asarray(state.H, dtype=np.float64)
    split = state.split
    _check_symmetric(H0, split)
    if generator not in ("fixed", "wegner-dynamic"):
        raise DomainError(f"Unknown generator '{generator}'; use fixed or wegner-dynamic")
    if lam_max < state.lam:
        raise DomainError(f"lam_max={lam_max} lies before the current flow parameter {state.lam}")

    n = len(H0)
    fixed = block_diagonal(H0, split)
    eig0 = np.linalg.eigvalsh(H0)
    scale = max(1.0, float(np.max(np.abs(H0))))

    def rhs(lam, y):
        H = y.reshape(n, n)
        G = fixed if generator == "fixed" else block_diagonal(H, split)
        return commutator(commutator(G, H), H).ravel()

    def record(lam: float, H: np.ndarray) -> FlowStep:
        eig = np.linalg.eigvalsh(H)
        return FlowStep(lam=lam, off_norm=off_block_norm(H, split),
                        min_eig_drift=float(eig[0] - eig0[0]), max_eig_drift=float(eig[-1] - eig0[-1]))

    history = list(state.history) or [record(state.lam, H0)]
    initial_norm = off_block_norm(H0, split)
    if lam_max == state.lam or initial_norm == 0.0:
        return FlowState(H=H0.copy(), split=split, lam=lam_max, history=history)

    solver = RK45(rhs, state.lam, H0.ravel(), lam_max, rtol=config.flow_rtol, atol=config.flow_atol)
    prev_lam, prev_y, prev_norm = state.lam, H0.ravel().copy(), initial_norm
    min_step = 1e-14 * max(1.0, abs(lam_max))
    steps = 0

    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            raise ConvergenceError(f"Flow integration failed at lam={solver.t:.6g}: {solver.message}",
                                   history=[s.off_norm for s in history])

        H = solver.y.reshape(n, n)
        H = (H + H.T) / 2.0
        norm = off_block_norm(H, split)

        if generator == "wegner-dynamic" and norm > prev_norm + 1e-14 * scale:
            step = (solver.t - prev_lam) / 2.0
            if step < min_step:
                if prev_norm <= 1e-10 * max(1.0, initial_norm):
                    break
                raise ConvergenceError(
                    f"Step-size underflow at lam={prev_lam:.6g} (off-block norm {prev_norm:.3e})",
                    history=[s.off_norm for s in history],
                )
            solver = RK45(rhs, prev_lam, prev_y, lam_max, rtol=config.flow_rtol, atol=config.flow_atol,
                          first_step=step)
            continue

        prev_lam, prev_y, prev_norm = solver.t, H.ravel().copy(), norm
        history.append(record(solver.t, H))

        steps += 1
        if steps > config.flow_max_steps:
            raise ConvergenceError(f"Flow did not reach lam={lam_max} within {config.flow_max_steps} steps",
                                   history=[s.off_norm for s in history])
        if off_tol is not None and norm <= off_tol * initial_norm:
            break

    return FlowState(H=prev_y.reshape(n, n), split=split, lam=prev_lam, history=history)


def trajectory_to_csv(state: FlowState) -> str:
    return rows_to_csv(["lam", "off_norm", "min_eig_drift", "max_eig_drift"],
                       [[s.lam, s.off_norm, s.min_eig_drift, s.max_eig_drift] for s in state.history])


# ============== OKUBO ==============
class BlockHamiltonian(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    Ha: np.ndarray
    Hc: np.ndarray
    HI: np.ndarray

    @classmethod
    def from_matrix(cls, H: np.ndarray, split: int) -> "BlockHamiltonian":
        H = np.asarray(H, dtype=np.float64)
        _check_symmetric(H, split)
        return cls(Ha=H[:split, :split], Hc=H[split:, split:], HI=H[:split, split:])

    def to_matrix(self) -> np.ndarray:
        return np.block([[self.Ha, self.HI], [self.HI.T, self.Hc]])


class OkuboResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    U: np.ndarray
    H_block: np.ndarray
    iterations: int
    residual_history: List[float]

    @property
    def off_norm(self) -> float:
        return off_block_norm(self.H_block, self.A.shape[1])


def _inverse_sqrt(M: np.ndarray) -> np.ndarray:
    w, V = eigh(M)
    return (V / np.sqrt(w)) @ V.T


def _check_gap(blocks: BlockHamiltonian):
    ea = np.linalg.eigvalsh(blocks.Ha)
    ec = np.linalg.eigvalsh(blocks.Hc)
    separation = float(np.min(np.abs(ea[:, None] - ec[None, :])))
    scale = max(1.0, float(np.max(np.abs(np.concatenate([ea, ec])))))
    if separation < 1e-10 * scale:
        raise SpectralGapError(
            f"No spectral gap between blocks: eigenvalues of Ha and Hc coincide to {separation:.3e}"
        )


def okubo_residual(blocks: BlockHamiltonian, A: np.ndarray) -> float:
    R = A @ blocks.Ha - blocks.Hc @ A + blocks.HI.T - A @ blocks.HI @ A
    return float(np.max(np.abs(R))) if R.size else 0.0


def okubo_unitary(A: np.ndarray) -> np.ndarray:
    """U = [[P, -P A^T], [A P, Q]] with P = (1 + A^T A)^-1/2, Q = (1 + A A^T)^-1/2"""
    na, nc = A.shape[1], A.shape[0]
    P = _inverse_sqrt(np.eye(na) + A.T @ A)
    Q = _inverse_sqrt(np.eye(nc) + A @ A.T)
    return np.block([[P, -P @ A.T], [A @ P, Q]])


def okubo_block(blocks: BlockHamiltonian, config: EngineConfig = DEFAULT_CONFIG) -> OkuboResult:
    _check_gap(blocks)
    Ha, Hc, HI = blocks.Ha, blocks.Hc, blocks.HI
    A = np.zeros((Hc.shape[0], Ha.shape[0]))
    history = [okubo_residual(blocks, A)]

    iterations = 0
    while history[-1] > config.okubo_tol * max(1.0, float(np.max(np.abs(blocks.to_matrix())))):
        if iterations >= config.okubo_max_iter:
            raise ConvergenceError(
                f"Okubo iteration did not converge in {config.okubo_max_iter} iterations "
                f"(last residual {history[-1]:.3e})",
                history=history,
            )
        A = solve_sylvester(-Hc, Ha, A @ HI @ A - HI.T)
        iterations += 1
        history.append(okubo_residual(blocks, A))
        if not np.isfinite(history[-1]):
            raise ConvergenceError("Okubo iteration diverged", history=history)

    U = okubo_unitary(A)
    H_block = U @ blocks.to_matrix() @ U.T
    if iterations:
        print(f"✅ Okubo operator converged in {iterations} iterations (residual {history[-1]:.3e})",
              file=sys.stderr)
    return OkuboResult(A=A, U=U, H_block=(H_block + H_block.T) / 2.0, iterations=iterations,
                       residual_history=history)


def okubo_series(blocks: BlockHamiltonian, order: int) -> List[np.ndarray]:
    """A_1..A_order of A = sum lam^n A_n for the coupling lam HI

    A_1 Ha - Hc A_1 = -HI^T, and A_n Ha - Hc A_n = sum_{i+j=n-1} A_i HI A_j.
    """
    if order < 1:
        raise DomainError(f"Series order must be >= 1, got {order}")
    _check_gap(blocks)
    Ha, Hc, HI = blocks.Ha, blocks.Hc, blocks.HI
    terms = [solve_sylvester(-Hc, Ha, -HI.T)]
    for n in range(2, order + 1):
        rhs = np.zeros_like(terms[0])
        for i in range(1, n - 1):
            rhs += terms[i - 1] @ HI @ terms[n - 1 - i - 1]
        terms.append(solve_sylvester(-Hc, Ha, rhs))
    return terms


def gapped_test_matrix(size: int, split: int, gap: float = 5.0, coupling: float = 1.0,
                       seed: int = 0) -> np.ndarray:
    """Random symmetric matrix with the coarse block shifted by -gap and the fine block by +gap"""
    if not 0 < split < size:
        raise DomainError(f"Block split {split} must lie strictly inside 0..{size}")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(size, size))
    H = (X + X.T) / 2.0
    H[:split, split:] *= coupling
    H[split:, :split] *= coupling
    H[:split, :split] -= gap * np.eye(split)
    H[split:, split:] += gap * np.eye(size - split)
    return H
