import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daif.spectral import (Spectrum, amplitude, fft, frequency_filter, irdft, max_top_k, rdft,
                           top_k_indices)
from oracles import naive_dft, naive_filter

series = st.integers(1, 512).flatmap(
    lambda T: st.integers(0, 2 ** 32 - 1).map(lambda s: np.random.default_rng(s).normal(size=T)))


def test_rdft_examples():
    np.testing.assert_allclose(rdft([1, 1, 1, 1]).coefficients, [4, 0, 0], atol=1e-15)
    np.testing.assert_allclose(rdft([1, 0, 0, 0]).coefficients, [1, 1, 1], atol=1e-15)
    x = np.random.default_rng(0).normal(size=8)
    assert np.max(np.abs(rdft(x).coefficients - naive_dft(x))) <= 1e-9


@pytest.mark.parametrize("T", [1, 2, 3, 5, 7, 12, 17, 31, 64, 96, 100, 127])
def test_rdft_matches_naive_dft_across_lengths(T):
    x = np.random.default_rng(T).normal(size=T)
    assert np.max(np.abs(rdft(x).coefficients - naive_dft(x))) <= 1e-9


def test_complex_fft_matches_direct_sum():
    z = np.random.default_rng(1).normal(size=12) + 1j * np.random.default_rng(2).normal(size=12)
    direct = np.array([sum(z[t] * np.exp(-2j * np.pi * j * t / 12) for t in range(12))
                       for j in range(12)])
    assert np.max(np.abs(fft(z) - direct)) <= 1e-9


def test_rdft_rejects_empty():
    with pytest.raises(ValueError):
        rdft([])


def test_spectrum_dc_and_nyquist_are_real():
    s = rdft(np.random.default_rng(4).normal(size=10))
    assert s.coefficients[0].imag == 0.0 and s.coefficients[-1].imag == 0.0


def test_irdft_examples():
    np.testing.assert_allclose(irdft(Spectrum(np.array([4, 0, 0], dtype=complex), 4)), [1, 1, 1, 1],
                               atol=1e-15)
    x = np.random.default_rng(2).normal(size=16)
    assert np.max(np.abs(irdft(rdft(x)) - x)) <= 1e-9
    c = np.zeros(17, dtype=complex)
    c[3] = 2.0 - 1.5j
    t = np.arange(32)
    # a single bin j with value a+ib and its mirror give (2/T)(a cos - b sin)
    closed = (2 / 32) * (2.0 * np.cos(2 * np.pi * 3 * t / 32) + 1.5 * np.sin(2 * np.pi * 3 * t / 32))
    assert np.max(np.abs(irdft(Spectrum(c, 32)) - closed)) <= 1e-12


def test_spectrum_rejects_wrong_length():
    with pytest.raises(ValueError):
        Spectrum(np.zeros(4, dtype=complex), 4)


def test_amplitude_examples():
    a = amplitude(rdft(np.full(8, 2.5)))
    assert a[0] > 0 and np.all(np.abs(a[1:]) < 1e-12)
    assert amplitude(Spectrum(np.array([3 + 4j, 0, 0]), 4))[0] == 5.0
    t = np.arange(64)
    x = np.cos(2 * np.pi * 4 * t / 64) + 0.5 * np.sin(2 * np.pi * 11 * t / 64)
    amps = amplitude(rdft(x))
    oracle = np.abs(naive_dft(x))
    assert set(np.argsort(-amps)[:2]) == {4, 11} == set(np.argsort(-oracle)[:2])


def test_top_k_examples():
    assert top_k_indices([3, 1, 2], 3).tolist() == [0, 1, 2]
    assert top_k_indices([5, 1, 9, 9], 2).tolist() == [2, 3]
    assert top_k_indices([9, 1, 9, 5], 2).tolist() == [0, 2]
    amps = np.random.default_rng(3).random(20)
    assert set(top_k_indices(amps, 3)) == set(sorted(range(20), key=lambda i: -amps[i])[:3])
    for k in (0, 4):
        with pytest.raises(ValueError):
            top_k_indices([1.0, 2.0, 3.0], k)


def test_frequency_filter_examples():
    assert np.max(np.abs(frequency_filter(np.full(32, -1.25), 1) + 1.25)) <= 1e-12
    t = np.arange(32)
    x = np.cos(2 * np.pi * 3 * t / 32)
    assert np.max(np.abs(frequency_filter(x, 1) - x)) <= 1e-9
    t = np.arange(64)
    noise = 0.01 * np.random.default_rng(9).normal(size=64)
    x = np.cos(2 * np.pi * 2 * t / 64) + 0.3 * np.cos(2 * np.pi * 7 * t / 64) + noise
    assert set(top_k_indices(amplitude(rdft(x)), 2)) == {2, 7}
    assert np.max(np.abs(frequency_filter(x, 2) - naive_filter(x, 2))) <= 1e-9


def test_frequency_filter_k_range():
    with pytest.raises(ValueError):
        frequency_filter(np.ones(8), 6)
    assert max_top_k(8) == 5 and max_top_k(96) == 49 and max_top_k(7) == 4


def test_keep_dc_flag_preserves_mean():
    t = np.arange(64)
    x = 0.2 + np.cos(2 * np.pi * 5 * t / 64) + 0.8 * np.sin(2 * np.pi * 9 * t / 64)
    # with DC competing, k=1 keeps only the strongest tone and loses the level
    assert abs(frequency_filter(x, 1).mean()) < 1e-12
    kept = frequency_filter(x, 1, keep_dc=True)
    assert abs(kept.mean() - 0.2) < 1e-12


def test_filter_operates_on_last_axis():
    X = np.random.default_rng(6).normal(size=(3, 4, 20))
    out = frequency_filter(X, 3)
    for i in range(3):
        for j in range(4):
            np.testing.assert_array_equal(out[i, j], frequency_filter(X[i, j], 3))


@settings(max_examples=60, deadline=None)
@given(series)
def test_round_trip_property(x):
    assert np.max(np.abs(irdft(rdft(x)) - x)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(series)
def test_max_k_identity_and_idempotence_property(x):
    T = len(x)
    assert np.max(np.abs(frequency_filter(x, T // 2 + 1) - x)) <= 1e-9
    k = 1 + T // 5
    once = frequency_filter(x, k)
    assert np.max(np.abs(frequency_filter(once, k) - once)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(series, st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2 ** 32 - 1))
def test_linearity_property(x, a, b, seed):
    y = np.random.default_rng(seed).normal(size=len(x))
    lhs = rdft(a * x + b * y).coefficients
    rhs = a * rdft(x).coefficients + b * rdft(y).coefficients
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(series)
def test_energy_nondecreasing_in_k_property(x):
    norms = [math.sqrt(float(np.dot(f, f)))
             for f in (frequency_filter(x, k) for k in range(1, len(x) // 2 + 2))]
    assert all(b >= a - 1e-9 for a, b in zip(norms, norms[1:]))
