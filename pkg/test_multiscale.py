import json

import numpy as np
import pytest

from conncoef import pair_derivative_table
from errors import DomainError
from filters import daubechies_filters, perturbed_filters
from multiscale import (Pyramid, dwt_analyze, dwt_synthesize, laplacian3d, scale_identity_check,
                        tensor3, wavelet_types)
from refine import OracleFactor, oracle_integral


# ============== PERIODIC TRANSFORM ==============
@pytest.mark.parametrize("levels", [1, 2, 3])
def test_constant_signal_has_no_details(levels):
    fb = daubechies_filters(3)
    pyramid = dwt_analyze(np.full(64, 2.5), fb, levels)
    assert np.allclose(pyramid.approx, 2.0 ** (levels / 2) * 2.5, atol=1e-12)
    for detail in pyramid.details:
        assert np.max(np.abs(detail)) < 1e-12


def test_impulse_k2():
    fb = daubechies_filters(2)
    x = np.zeros(8)
    x[0] = 1.0
    pyramid = dwt_analyze(x, fb, 1)
    # y_n = sum_j h_j x_{2n+j}: only rows reaching index 0 (mod 8) see the impulse
    assert pyramid.approx == pytest.approx([fb.h[0], 0.0, 0.0, fb.h[2]], abs=1e-15)
    assert pyramid.details[0] == pytest.approx([fb.g[0], 0.0, 0.0, fb.g[2]], abs=1e-15)


@pytest.mark.parametrize("K", [1, 2, 3])
@pytest.mark.parametrize("N", [16, 64, 256])
@pytest.mark.parametrize("levels", [1, 2, 3])
def test_parseval_and_round_trip(K, N, levels):
    fb = daubechies_filters(K)
    if N // 2 ** levels < 2 * K:
        pytest.skip("coarsest window shorter than the filter")
    x = np.random.default_rng(N + levels).normal(size=N)
    pyramid = dwt_analyze(x, fb, levels)
    assert pyramid.coefficient_count() == N
    assert pyramid.energy() == pytest.approx(float(np.sum(x ** 2)), rel=1e-12)
    assert np.max(np.abs(dwt_synthesize(pyramid, fb) - x)) < 1e-12


def test_pyramid_json_round_trip():
    fb = daubechies_filters(2)
    x = np.arange(16, dtype=np.float64)
    pyramid = dwt_analyze(x, fb, 2)
    text = pyramid.to_json()
    data = json.loads(text)
    assert set(data["details"]) == {"-1", "-2"}
    assert "-2" in data["approx"]
    restored = Pyramid.from_json(text)
    assert np.max(np.abs(dwt_synthesize(restored, fb) - x)) < 1e-12


def test_shape_errors():
    fb = daubechies_filters(3)
    with pytest.raises(DomainError, match="divisible"):
        dwt_analyze(np.ones(20), fb, 3)
    with pytest.raises(DomainError, match="shorter than the filter"):
        dwt_analyze(np.ones(16), fb, 2)
    with pytest.raises(DomainError):
        dwt_analyze(np.ones(16), fb, 0)
    with pytest.raises(DomainError):
        dwt_analyze(np.ones(16), fb, 1, boundary="zero")

    pyramid = dwt_analyze(np.ones(32), fb, 1)
    broken = Pyramid(K=3, N=32, levels=1, approx=pyramid.approx, details=[pyramid.details[0][:-2]])
    with pytest.raises(DomainError, match="Shape mismatch"):
        dwt_synthesize(broken, fb)
    with pytest.raises(DomainError):
        dwt_synthesize(pyramid, daubechies_filters(2))
    with pytest.raises(DomainError, match="Malformed"):
        Pyramid.from_json('{"K": 3}')


# ============== SCALE IDENTITIES ==============
@pytest.mark.parametrize("k", [0, 2])
def test_scale_identities_hold_for_exact_filters(k):
    report = scale_identity_check(daubechies_filters(3), k)
    assert report.derivative_residual is not None
    assert report.max_residual < 1e-10


def test_scale_identities_skip_derivatives_below_k3():
    report = scale_identity_check(daubechies_filters(2))
    assert report.derivative_residual is None
    assert report.orthonormality_residual < 1e-12


def test_scale_identities_detect_perturbed_filters():
    report = scale_identity_check(perturbed_filters(daubechies_filters(3), 1e-2))
    assert report.max_residual > 1e-3


# ============== 3D TENSOR BASIS ==============
def test_wavelet_types():
    types = wavelet_types()
    assert len(types) == 7
    assert ("s", "s", "s") not in types
    assert ("w", "w", "w") in types
    assert tensor3(2.0, 3.0, 0.5) == 3.0


def test_laplacian3d_matches_one_dimensional_products():
    fb = daubechies_filters(3)
    D = pair_derivative_table(fb)
    assert laplacian3d(fb, 0, (0, 0, 0), (0, 0, 0)) == pytest.approx(3 * D.value(0), abs=1e-12)
    assert laplacian3d(fb, 0, (0, 0, 0), (1, 0, 0)) == pytest.approx(D.value(1), abs=1e-12)
    assert laplacian3d(fb, 0, (0, 0, 0), (1, 1, 0)) == 0.0
    assert laplacian3d(fb, 1, (0, 0, 0), (0, 2, 0)) == pytest.approx(4 * D.value(2), abs=1e-12)

    brute = oracle_integral(fb, [OracleFactor(d=1), OracleFactor(n=1, d=1)], 14)
    assert laplacian3d(fb, 0, (0, 0, 0), (1, 0, 0)) == pytest.approx(brute, abs=1e-3)
