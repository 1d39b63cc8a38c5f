import numpy as np
import pytest

from decoupling import (BlockHamiltonian, FlowState, block_diagonal, gapped_test_matrix, off_block_norm,
                        okubo_block, okubo_residual, okubo_series, trajectory_to_csv, wegner_flow)
from errors import DomainError, SpectralGapError


def test_gapped_test_matrix():
    H = gapped_test_matrix(8, 3, seed=1)
    assert np.array_equal(H, H.T)
    assert off_block_norm(block_diagonal(H, 3), 3) == 0.0
    with pytest.raises(DomainError):
        gapped_test_matrix(8, 8)


# ============== SIMILARITY FLOW ==============
def test_block_diagonal_input_is_a_fixed_point():
    H = block_diagonal(gapped_test_matrix(6, 2), 2)
    state = wegner_flow(FlowState(H=H, split=2), lam_max=0.5)
    assert np.array_equal(state.H, H)
    assert state.lam == 0.5


def test_wegner_flow_decouples_and_preserves_spectrum():
    H = gapped_test_matrix(16, 8, gap=5.0, seed=3)
    eig = np.linalg.eigvalsh(H)
    state = wegner_flow(FlowState(H=H, split=8), "wegner-dynamic", lam_max=10.0, off_tol=1e-7)

    norms = [step.off_norm for step in state.history]
    assert norms[-1] <= 1e-6 * norms[0]
    assert all(b <= a + 1e-12 * max(1.0, norms[0]) for a, b in zip(norms, norms[1:]))
    assert np.max(np.abs(np.linalg.eigvalsh(state.H) - eig)) < 1e-8
    assert max(max(abs(step.min_eig_drift), abs(step.max_eig_drift)) for step in state.history) < 1e-8

    lines = trajectory_to_csv(state).splitlines()
    assert lines[0] == "lam,off_norm,min_eig_drift,max_eig_drift"
    assert len(lines) == len(state.history) + 1


@pytest.mark.parametrize("seed", [0, 1])
def test_wegner_flow_decouples_plain_random_matrix(seed):
    X = np.random.default_rng(seed).normal(size=(16, 16))
    H = (X + X.T) / 2.0
    eig = np.linalg.eigvalsh(H)
    # no imposed gap: the slowest off-block modes decay like exp(-delta^2 lam) for small level spacing delta
    state = wegner_flow(FlowState(H=H, split=8), "wegner-dynamic", lam_max=2000.0, off_tol=1e-7)

    assert state.off_norm <= 1e-6 * off_block_norm(H, 8)
    assert np.max(np.abs(np.linalg.eigvalsh(state.H) - eig)) < 1e-8


def test_fixed_generator_variant():
    H = gapped_test_matrix(8, 4, gap=4.0, coupling=0.3, seed=5)
    state = wegner_flow(FlowState(H=H, split=4), "fixed", lam_max=0.05)
    assert state.off_norm < off_block_norm(H, 4)
    assert np.max(np.abs(np.linalg.eigvalsh(state.H) - np.linalg.eigvalsh(H))) < 1e-7


def test_flow_rejects_bad_input():
    H = gapped_test_matrix(6, 3)
    with pytest.raises(DomainError):
        wegner_flow(FlowState(H=H + np.triu(np.ones((6, 6)), 1), split=3))
    with pytest.raises(DomainError):
        wegner_flow(FlowState(H=H, split=0))
    with pytest.raises(DomainError):
        wegner_flow(FlowState(H=H, split=3), "random")
    with pytest.raises(DomainError):
        wegner_flow(FlowState(H=H, split=3, lam=1.0), lam_max=0.5)


# ============== OKUBO ==============
def test_okubo_uncoupled_blocks():
    H = block_diagonal(gapped_test_matrix(6, 3), 3)
    result = okubo_block(BlockHamiltonian.from_matrix(H, 3))
    assert result.iterations == 0
    assert np.max(np.abs(result.A)) == 0.0
    assert np.max(np.abs(result.U - np.eye(6))) < 1e-14


def test_okubo_decouples_gapped_matrix():
    H = gapped_test_matrix(12, 5, gap=6.0, coupling=0.5, seed=7)
    blocks = BlockHamiltonian.from_matrix(H, 5)
    result = okubo_block(blocks)

    assert okubo_residual(blocks, result.A) < 1e-12
    assert result.off_norm < 1e-10
    assert np.max(np.abs(result.U @ result.U.T - np.eye(12))) < 1e-12

    spectra = np.sort(np.concatenate([np.linalg.eigvalsh(result.H_block[:5, :5]),
                                      np.linalg.eigvalsh(result.H_block[5:, 5:])]))
    assert np.max(np.abs(spectra - np.linalg.eigvalsh(H))) < 1e-9
    # the coarse block keeps the low end of the spectrum
    assert np.max(np.linalg.eigvalsh(result.H_block[:5, :5])) < np.min(np.linalg.eigvalsh(result.H_block[5:, 5:]))
    assert result.residual_history[-1] <= result.residual_history[0]


def test_okubo_needs_a_gap():
    H = np.diag([1.0, 2.0, 1.0, 2.0])
    H[0, 2] = H[2, 0] = 0.1
    with pytest.raises(SpectralGapError, match="No spectral gap"):
        okubo_block(BlockHamiltonian.from_matrix(H, 2))


def test_okubo_series_approaches_fixed_point():
    H = gapped_test_matrix(10, 4, gap=6.0, coupling=0.1, seed=11)
    blocks = BlockHamiltonian.from_matrix(H, 4)
    exact = okubo_block(blocks).A
    terms = okubo_series(blocks, 8)
    assert len(terms) == 8
    first = np.linalg.norm(exact - terms[0])
    summed = np.linalg.norm(exact - sum(terms))
    assert summed < 1e-8
    assert summed < first
    with pytest.raises(DomainError):
        okubo_series(blocks, 0)
