import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn
from diffstc import alphabets as al, channels as ch
from diffstc import siso_diff as sd
from diffstc.errors import CapacityError, ParameterError, UnsupportedError


def ln_i0_series(z, terms=400):
    # ln sum (z/2)^(2k) / (k!)^2, summed in log space
    k = np.arange(terms)
    from math import lgamma
    lt = np.array([2 * kk * np.log(z / 2) - 2 * lgamma(kk + 1) for kk in k]) if z > 0 else np.r_[0.0]
    m = lt.max()
    return m + np.log(np.sum(np.exp(lt - m)))


def test_ln_i0_examples():
    assert sd.ln_i0_approx(0) == 0
    assert abs(sd.ln_i0_approx(1) - 0.2359143585) < 1e-9
    for z in (0.5, 3.0, 10.0, 19.9):
        assert abs(sd.ln_i0_approx(z) - ln_i0_series(z)) < 1e-9
    for z in (30.0, 100.0):
        assert abs(sd.ln_i0_approx(z) - (z - 0.5 * np.log(2 * np.pi * z))) < 1e-12


def test_ln_i0_switch_jump():
    below, above = sd.ln_i0_approx(20.0), sd.ln_i0_approx(20.0 + 1e-9)
    assert abs(below - ln_i0_series(20.0)) < 1e-9
    assert abs(abs(below - above) - 1 / (8 * 20)) < 2e-4


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 60), st.floats(0, 60))
def test_ln_i0_monotone(a, b):
    lo, hi = sorted((a, b))
    if hi - lo > 1e-6 and not (lo <= 20 < hi):
        assert sd.ln_i0_approx(lo) <= sd.ln_i0_approx(hi)


def test_diff_encode_examples():
    c = al.psk(4)
    assert np.allclose(sd.diff_encode([1, 1], c, include_reference=True), [1, 1j, -1])
    c = al.build(al.Kind.DASK, q_a=2, a=2.0)
    s = sd.diff_encode([1, 1, 0], c, include_reference=True)
    e = np.round(np.log(np.abs(s) / np.abs(s[0])) / np.log(2.0))
    assert np.array_equal(e, [0, 1, 0, 0])
    with pytest.raises(ParameterError):
        sd.diff_encode([4], c)


def test_candidates():
    S, Z = sd.enumerate_candidates(al.psk(4), 3)
    assert S.shape == (16, 3) and Z.shape == (16, 2)
    assert np.allclose(S[:, 0], 1)
    assert np.array_equal(Z[5], [1, 1]) and np.allclose(S[5], [1, 1j, -1])
    S, _ = sd.enumerate_candidates(al.dapsk(8, 2, 2.1), 3)
    assert S.shape == (256, 3)
    with pytest.raises(CapacityError):
        sd.enumerate_candidates(al.psk(16), 7)


def test_config_validation():
    with pytest.raises(UnsupportedError, match="unsupported metric/channel"):
        sd.MsddConfig(3, "GLRT", channel="RFF")
    with pytest.raises(ParameterError):
        sd.MsddConfig(3, "ML_RFF", rho=10.0)
    with pytest.raises(ParameterError):
        sd.MsddConfig(1, "CORR")
    with pytest.raises(UnsupportedError):
        sd.alphabet_split(al.rect_qam(16))


CONSTS = [al.psk(2), al.psk(8), al.build(al.Kind.DASK, q_a=2, a=2.0), al.dapsk(8, 2, 2.1), al.dapsk(4, 4, 1.6)]


def _frame(c, n, rng, h=np.exp(0.6j)):
    # noiseless received frame sqrt(rho) h s with rho = 1e4 and a unit-gain channel
    info = rng.integers(0, c.size, (4, n))
    return info, 100.0 * h * sd.diff_encode(info, c, include_reference=True)


@pytest.mark.parametrize("c", CONSTS, ids=lambda c: c.kind.value + str(c.size))
@pytest.mark.parametrize("metric", ["ML_AWGN", "ML_RBF", "GLRT", "CORR"])
@pytest.mark.parametrize("T", [2, 3])
def test_noiseless_recovery(c, metric, T, rng):
    if metric == "CORR" and not c.is_constant_envelope:
        pytest.skip("CORR ignores amplitudes")
    info, y = _frame(c, 12, rng)
    cfg = sd.MsddConfig(T, metric, rho=1e4)
    assert np.array_equal(sd.msdd_detect_frame(y, cfg, c), info)


def test_quasi_independent_noiseless(rng):
    c = al.dapsk(8, 2, 2.1)
    info, y = _frame(c, 12, rng)
    cfg = sd.MsddConfig(3, "ML_AWGN", mode="QUASI_INDEPENDENT", rho=1e4)
    assert np.array_equal(sd.msdd_detect_frame(y, cfg, c), info)


def test_rff_noiseless(rng):
    c = al.psk(8)
    info, y = _frame(c, 12, rng)
    cfg = sd.MsddConfig(3, "ML_RFF", rho=1e6, cov=ch.rff_covariance(3, 0.01))
    assert np.array_equal(sd.msdd_detect_frame(y, cfg, c), info)


def gaussian_loglik(y, s, rho, lam):
    D = np.diag(s)
    C = rho * D @ lam @ D.conj().T + np.eye(len(s))
    return -np.real(y.conj() @ np.linalg.solve(C, y)) - np.linalg.slogdet(C)[1]


@pytest.mark.parametrize("c", [al.psk(4), al.dapsk(4, 2, 2.0)], ids=["psk", "dapsk"])
def test_ml_rff_matches_likelihood_oracle(c, rng):
    T, rho = 3, 10.0
    lam = ch.rff_covariance(T, 0.05)
    cfg = sd.MsddConfig(T, "ML_RFF", rho=rho, cov=lam)
    S, Z = sd.enumerate_candidates(c, T)
    for _ in range(40):
        y = crandn(rng, T) * 2
        ref = Z[np.argmax([gaussian_loglik(y, s, rho, lam) for s in S])]
        assert np.array_equal(sd.msdd_detect(y, cfg, c)[0], ref)


def rbf_loglik(y, s, rho):
    e = np.sum(np.abs(s) ** 2)
    return rho * abs(np.vdot(s, y)) ** 2 / (1 + rho * e) - np.log1p(rho * e)


def test_ml_rbf_matches_likelihood_oracle(rng):
    c, T, rho = al.dapsk(4, 2, 2.0), 3, 5.0
    S, Z = sd.enumerate_candidates(c, T)
    lam = np.ones((T, T))
    cfg = sd.MsddConfig(T, "ML_RBF", rho=rho)
    for _ in range(40):
        y = crandn(rng, T) * 2
        ref = Z[np.argmax([gaussian_loglik(y, s, rho, lam) for s in S])]
        assert np.array_equal(sd.msdd_detect(y, cfg, c)[0], ref)
        assert np.array_equal(Z[np.argmax([rbf_loglik(y, s, rho) for s in S])], ref)


@pytest.mark.parametrize("metric", ["ML_AWGN", "ML_RBF", "ML_RFF"])
def test_constant_envelope_simplification(metric, rng):
    c, T = al.psk(8), 3
    kw = {"cov": ch.rff_covariance(T, 0.03)} if metric == "ML_RFF" else {}
    a = sd.MsddConfig(T, metric, rho=4.0, **kw)
    b = sd.MsddConfig(T, metric, rho=4.0, simplify=False, **kw)
    Y = crandn(rng, 300, T)
    assert np.array_equal(sd.msdd_detect_batch(Y, a, c)[0], sd.msdd_detect_batch(Y, b, c)[0])


def test_t2_corr_is_conventional(rng):
    c = al.psk(8)
    y = crandn(rng, 500, 2)
    info, _, _ = sd.msdd_detect_batch(y, sd.MsddConfig(2, "CORR"), c)
    assert np.array_equal(info[:, 0], sd.conventional_detect(y[:, 0], y[:, 1], c))


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi), st.integers(0, 2 ** 31))
def test_phase_rotation_invariance(phi, seed):
    rng = np.random.default_rng(seed)
    c = al.dapsk(8, 2, 2.1)
    y = crandn(rng, 20, 3)
    cfg = sd.MsddConfig(3, "ML_AWGN", rho=3.0)
    a = sd.msdd_detect_batch(y, cfg, c)[0]
    b = sd.msdd_detect_batch(y * np.exp(1j * phi), cfg, c)[0]
    assert np.array_equal(a, b)


def test_simo_receivers(rng):
    c = al.psk(4)
    h = crandn(rng, 50, 3)
    x = rng.integers(0, 4, 50)
    y = 2.0 * c.points[x][:, None] * h
    assert np.array_equal(sd.simo_mrc_detect(y, h, c, rho=4.0), x)
    assert np.array_equal(sd.simo_diff_detect(h, y / 2.0, c), x)
    with pytest.raises(UnsupportedError):
        sd.simo_diff_detect(h, y, al.rect_qam(16))
