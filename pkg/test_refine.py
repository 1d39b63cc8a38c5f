import numpy as np
import pytest

from conncoef import first_moment
from errors import DomainError, RegularityError
from filters import daubechies_filters
from refine import (OracleFactor, check_regularity, integer_values, oracle_integral,
                    refine_to_level, refinement_matrix, sample_function, wavelet_samples)


@pytest.fixture(scope="module")
def fb3():
    return daubechies_filters(3)


def test_integer_values_k3(fb3):
    s = integer_values(fb3, 0)
    assert s[0] == 0.0 and s[-1] == 0.0
    assert s.sum() == pytest.approx(1.0, abs=1e-14)
    assert s[1] == pytest.approx(1.28634, abs=1e-4)
    assert s[2] == pytest.approx(-0.38584, abs=1e-4)


def test_integer_values_k2():
    s = integer_values(daubechies_filters(2), 0)
    assert s[1] == pytest.approx((1 + np.sqrt(3)) / 2, abs=1e-12)
    assert s[2] == pytest.approx((1 - np.sqrt(3)) / 2, abs=1e-12)


def test_derivative_normalization(fb3):
    ds = integer_values(fb3, 1)
    m = np.arange(len(ds))
    assert np.dot(m, ds) == pytest.approx(-1.0, abs=1e-12)
    assert ds.sum() == pytest.approx(0.0, abs=1e-12)


def test_refinement_matrix_has_eigenvalue_half_for_k2():
    M = refinement_matrix(daubechies_filters(2))
    eig = np.linalg.eigvals(M)
    assert np.min(np.abs(eig - 0.5)) < 1e-12


def test_regularity_gate():
    check_regularity(3, 1)
    with pytest.raises(RegularityError):
        check_regularity(2, 1)
    with pytest.raises(RegularityError):
        check_regularity(3, 2)
    with pytest.raises(RegularityError):
        sample_function(daubechies_filters(2), "scaling", 1, 4)


def test_refinement_keeps_coarser_values(fb3):
    coarse = refine_to_level(fb3, 0, 5)
    fine = refine_to_level(fb3, 0, 6)
    assert np.array_equal(fine.values[::2], coarse.values)
    assert len(fine.values) == 5 * 2 ** 6 + 1
    assert fine.grid[-1] == pytest.approx(5.0)


def test_central_differences_approach_derivative_samples(fb3):
    errors = []
    for J in (6, 8, 10):
        s = refine_to_level(fb3, 0, J)
        ds = refine_to_level(fb3, 1, J).values
        central = (s.values[2:] - s.values[:-2]) / (2 * s.step)
        errors.append(np.max(np.abs(central - ds[1:-1])))
    assert errors[0] > errors[1] > errors[2]
    # s' is only Hoelder continuous, so no fixed rate is asserted
    rate = np.log2(errors[0] / errors[2]) / 4
    print(f"📉 central-difference max error {errors} (observed order {rate:.3f} per level)")
    assert rate > 0


def test_partition_of_unity_on_level_10_grid(fb3):
    J = 10
    s = sample_function(fb3, "scaling", 0, J).values
    ds = sample_function(fb3, "scaling", 1, J).values
    cell = 2 ** J
    i = np.arange(cell)
    shifts = range(2 * fb3.K - 1)
    unity = sum(s[i + j * cell] for j in shifts)
    linear = sum(-j * ds[i + j * cell] for j in shifts)
    assert np.max(np.abs(unity - 1.0)) < 1e-9
    assert np.max(np.abs(linear - 1.0)) < 1e-9


def test_x_is_reproduced_by_translated_first_moments(fb3):
    J = 10
    s = sample_function(fb3, "scaling", 0, J).values
    cell = 2 ** J
    i = np.arange(cell)
    x = i / cell
    mean = first_moment(fb3)
    # b_n = n + <x> with n = -j for the translates covering [0, 1)
    recon = sum((-j + mean) * s[i + j * cell] for j in range(2 * fb3.K - 1))
    assert np.max(np.abs(recon - x)) < 1e-9


def test_wavelet_samples(fb3):
    w = sample_function(fb3, "wavelet", 0, 9)
    assert w.kind == "wavelet" and w.level == 9
    assert len(w.values) == 5 * 2 ** 9 + 1
    assert abs(np.sum(w.values) * w.step) < 1e-10
    assert np.sum(w.values ** 2) * w.step == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(DomainError):
        wavelet_samples(w, fb3)


def test_haar_samples():
    samples = refine_to_level(daubechies_filters(1), 0, 3)
    assert samples.values[:8] == pytest.approx(np.ones(8))
    assert samples.values[8] == 0.0


def test_sample_cache_returns_same_object(fb3):
    assert sample_function(fb3, "scaling", 0, 7) is sample_function(fb3, "scaling", 0, 7)


def test_samples_csv(fb3):
    csv = sample_function(fb3, "scaling", 0, 2).to_csv().splitlines()
    assert csv[0] == "x,value"
    assert len(csv) == 5 * 4 + 2
    assert csv[1].startswith("0,")


def test_oracle_orthonormality(fb3):
    J = 12
    norm = oracle_integral(fb3, [OracleFactor(), OracleFactor()], J)
    cross = oracle_integral(fb3, [OracleFactor(), OracleFactor(n=1)], J)
    mixed = oracle_integral(fb3, [OracleFactor(), OracleFactor(kind="wavelet")], J)
    assert norm == pytest.approx(1.0, abs=1e-3)
    assert abs(cross) < 1e-3
    assert abs(mixed) < 1e-3


def test_oracle_first_moment_and_disjoint_support(fb3):
    mean = oracle_integral(fb3, [OracleFactor(q=1)], 12)
    assert mean == pytest.approx(first_moment(fb3), abs=1e-3)
    assert oracle_integral(fb3, [OracleFactor(), OracleFactor(n=5)], 10) == 0.0
    with pytest.raises(DomainError):
        oracle_integral(fb3, [], 10)
