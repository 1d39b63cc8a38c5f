import math

import numpy as np
import pytest

from errors import DomainError, UnsupportedOrderError
from filters import (BandedOperator, FilterBank, banded_apply, daubechies_filters,
                     filter_identity_residuals, mirror_filters, perturbed_filters,
                     upsample_coefficients)


@pytest.mark.parametrize("K", [1, 2, 3])
def test_defining_identities(K):
    fb = daubechies_filters(K)
    residuals = filter_identity_residuals(fb)
    assert not residuals["length"]
    assert residuals["sum"] < 1e-12
    assert residuals["orthonormality"] < 1e-12
    assert residuals["vanishing_moments"] < 1e-10
    assert residuals["mirror"] == 0.0


def test_k3_closed_forms():
    fb = daubechies_filters(3)
    r10 = math.sqrt(10.0)
    q = math.sqrt(5 + 2 * r10)
    expected = np.array([1 + r10 + q, 5 + r10 + 3 * q, 10 - 2 * r10 + 2 * q,
                         10 - 2 * r10 - 2 * q, 5 + r10 - 3 * q, 1 + r10 - q]) / (16 * math.sqrt(2))
    assert np.max(np.abs(fb.h_array - expected)) < 1e-14
    assert fb.h[0] == pytest.approx(0.332670552950, abs=1e-11)
    assert fb.h[1] == pytest.approx(0.806891509311, abs=1e-11)


def test_k2_and_haar_values():
    h2 = daubechies_filters(2).h
    assert h2[0] == pytest.approx((1 + math.sqrt(3)) / (4 * math.sqrt(2)), abs=1e-15)
    assert daubechies_filters(1).h == pytest.approx([1 / math.sqrt(2)] * 2, abs=1e-15)


def test_mirror_filters():
    fb = daubechies_filters(2)
    g = mirror_filters(fb.h)
    assert g == fb.g
    assert g[0] == pytest.approx(fb.h[3])
    assert g[1] == pytest.approx(-fb.h[2])
    with pytest.raises(DomainError):
        mirror_filters([1.0, 2.0, 3.0])


def test_reverse_root_choice_is_also_valid():
    fb = daubechies_filters(3, reverse=True)
    assert fb.h == daubechies_filters(3).h[::-1]
    assert filter_identity_residuals(fb)["orthonormality"] < 1e-12


@pytest.mark.parametrize("K", [0, 4, 7])
def test_unsupported_orders(K):
    with pytest.raises(UnsupportedOrderError, match=r"\{1,2,3\}"):
        daubechies_filters(K)


def test_validator_rejects_broken_bank():
    h = list(daubechies_filters(2).h)
    h[0] += 1e-3
    with pytest.raises(ValueError):
        FilterBank(K=2, h=h, g=mirror_filters(h))


def test_perturbed_filters_skip_validation():
    fb = perturbed_filters(daubechies_filters(3), 1e-2)
    assert filter_identity_residuals(fb)["sum"] == pytest.approx(1e-2)


@pytest.mark.parametrize("K", [1, 2, 3])
def test_periodic_operators_are_orthogonal(K):
    fb = daubechies_filters(K)
    N = 16
    H = BandedOperator(kind="H", filters=fb).matrix(N)
    G = BandedOperator(kind="G", filters=fb).matrix(N)
    W = np.vstack([H, G])
    assert np.max(np.abs(W @ W.T - np.eye(N))) < 1e-12
    assert np.max(np.abs(BandedOperator(kind="HT", filters=fb).matrix(N) - H.T)) == 0.0


def test_banded_apply_matches_dense_matrix():
    fb = daubechies_filters(3)
    x = np.random.default_rng(3).normal(size=12)
    for kind in ("H", "G"):
        op = BandedOperator(kind=kind, filters=fb)
        assert np.allclose(banded_apply(op, x).values, op.matrix(12) @ x, atol=1e-14)
    y = x[:6]
    for kind in ("HT", "GT"):
        op = BandedOperator(kind=kind, filters=fb)
        assert np.allclose(banded_apply(op, y).values, op.matrix(12) @ y, atol=1e-14)


def test_periodic_length_checks():
    op = BandedOperator(kind="H", filters=daubechies_filters(3))
    with pytest.raises(DomainError):
        banded_apply(op, np.ones(7))
    with pytest.raises(DomainError):
        banded_apply(op, np.ones(4))
    with pytest.raises(DomainError):
        banded_apply(op, np.ones(8), boundary="reflect")


def test_zero_boundary_window():
    fb = daubechies_filters(2)
    op = BandedOperator(kind="H", filters=fb)
    out = banded_apply(op, np.array([1.0]), boundary="zero", start=0)
    # row n touches m = 0 when 0 <= -2n <= 3
    assert out.start == -1
    assert out.values == pytest.approx([fb.h[2], fb.h[0]])

    up = banded_apply(BandedOperator(kind="HT", filters=fb), np.array([1.0]), boundary="zero", start=2)
    assert up.start == 4
    assert up.values == pytest.approx(fb.h)


def test_upsample_coefficients():
    taps = np.array([1.0, 2.0])
    assert upsample_coefficients(np.array([1.0, 1.0]), taps) == pytest.approx([1.0, 2.0, 1.0, 2.0])
    assert len(upsample_coefficients(np.zeros(0), taps)) == 0


def test_exports_use_seventeen_digits():
    fb = daubechies_filters(3)
    h0 = fb.to_json().split("[")[1].split(",")[0]
    assert h0.startswith("0.332670552950")
    assert len(h0) >= 16
    lines = fb.to_csv().splitlines()
    assert lines[0] == "name,0,1,2,3,4,5"
    assert lines[1].startswith("h,") and lines[2].startswith("g,")
