import numpy as np
import pytest

from diffstc import channels as ch
from diffstc.errors import ParameterError, UnsupportedError


def j0_series(x, terms=80):
    s, t = 0.0, 1.0
    for k in range(terms):
        if k:
            t *= -(x * x / 4) / (k * k)
        s += t
    return s


def test_jakes_examples():
    assert ch.jakes_phi(0, 0.02) == 1
    assert all(ch.jakes_phi(m, 0.0) == 1 for m in range(5))
    assert abs(ch.jakes_phi(1, 0.02) - j0_series(2 * np.pi * 0.02)) < 1e-10
    assert abs(ch.jakes_phi(1, 0.02) - 0.99606) < 1e-5


@pytest.mark.parametrize("x", [0.1, 3.0, 7.9, 8.1, 12.0, 25.0])
def test_bessel_against_series(x):
    assert abs(ch.bessel_j0(x) - j0_series(x, 200)) < 1e-7


def test_rff_covariance():
    assert np.array_equal(ch.rff_covariance(4, 0.0), np.ones((4, 4)))
    c = ch.rff_covariance(2, 0.02)
    assert np.allclose(c, [[1, 0.99606], [0.99606, 1]], atol=1e-5)
    c = ch.rff_covariance(6, 0.05)
    assert np.all(np.diag(c) == 1) and np.array_equal(c, c.T)
    for k in range(1, 6):
        assert np.allclose(np.diag(c, k), c[0, k])


def test_awgn_phase_unit_gain():
    h = ch.draw_channel(ch.ChannelModel("AWGN_PHASE"), 1, 1, 10, ch.RngStream(1), batch=100)
    assert np.allclose(np.abs(h), 1, atol=1e-15)
    assert np.allclose(h, h[:, :1])


def test_rbf_variance():
    h = ch.draw_channel(ch.ChannelModel("RBF"), 2, 2, 1, ch.RngStream(2), batch=25000)
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 0.02


def test_rff_lag1_correlation():
    h = ch.draw_channel(ch.ChannelModel("RFF", 0.02), 1, 1, 4, ch.RngStream(3), batch=100000)
    assert abs(np.mean(h[:, 1] * h[:, 0].conj()).real - 0.996) < 0.005
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 0.02


def test_rff_multiantenna_unsupported():
    with pytest.raises(UnsupportedError):
        ch.draw_channel(ch.ChannelModel("RFF", 0.02), 2, 1, 4, ch.RngStream(1))


def test_transmit_moments_and_hooks():
    S = np.ones((20000, 2, 2)) / np.sqrt(2)
    H = np.ones((2, 1))
    Y = ch.transmit(S, H, 0.0, ch.RngStream(4))
    assert abs(np.mean(np.abs(Y) ** 2) - 1) < 0.03
    S = np.eye(2)[None] * np.array([1, -1])[:, None, None]
    assert np.array_equal(ch.transmit(S, np.eye(2), 4.0, None, noise=False), 2 * S)
    W1 = ch.transmit(np.zeros((3, 2)), np.eye(2), 5.0, ch.RngStream(9))
    W2 = ch.complex_normal(ch.RngStream(9).generator(), (3, 2))
    assert np.array_equal(W1, W2)


def test_reproducible_streams():
    a = ch.draw_channel(ch.ChannelModel("RFF", 0.01), 1, 1, 20, ch.RngStream(7, 3))
    b = ch.draw_channel(ch.ChannelModel("RFF", 0.01), 1, 1, 20, ch.RngStream(7, 3))
    c = ch.draw_channel(ch.ChannelModel("RFF", 0.01), 1, 1, 20, ch.RngStream(7, 4))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert ch.RngStream(7, 3).child(0) != ch.RngStream(7, 3).child(1)


def test_model_validation():
    with pytest.raises(ParameterError):
        ch.ChannelModel("RFF", 1.5)
    with pytest.raises(ValueError):
        ch.ChannelModel("BOGUS")
