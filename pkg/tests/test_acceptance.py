"""Acceptance criteria 1-10, one test each.

Every test prints a ``criterion k: PASS|FAIL`` line (visible in the plain
``pytest -v`` log) and asserts at the stated tolerance.  Criteria 5-10
are Monte Carlo runs and take minutes; they are marked ``slow``.
"""

import time

import numpy as np
import pytest

from conftest import crandn
from diffstc import alphabets as al
from diffstc import channels as ch
from diffstc import cxmat
from diffstc import design_analysis as da
from diffstc import diff_stbc as ds
from diffstc import dustm
from diffstc import simkit as sk
from diffstc import siso_diff as sd
from diffstc import stcodes as sc


@pytest.fixture
def report(capsys):
    def _report(k, ok, detail, t0):
        with capsys.disabled():
            print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'} ({time.time() - t0:.1f} s) {detail}")
        assert ok, f"criterion {k}: {detail}"
    return _report


def _gap(target, a_kw, b_kw):
    """SNR (Eb/N0) gap ``b - a`` at `target` BER and both curves."""
    ra, rb = sk.run_ber(sk.SimConfig(**a_kw)), sk.run_ber(sk.SimConfig(**b_kw))
    xa, xb = sk.snr_at_ber(ra, target), sk.snr_at_ber(rb, target)
    curves = {"a": [f"{r.ebn0_db:g}:{r.ber:.2e}" for r in ra], "b": [f"{r.ebn0_db:g}:{r.ber:.2e}" for r in rb]}
    return xb - xa, xa, xb, curves


def test_criterion_1_structure(report):
    t0 = time.time()
    checks = {}
    for kind in ("ALAMOUTI", "TH4"):
        checks[f"ostbc {kind}"] = all(sc.validate_ostbc(sc.make_code(kind)).values())
    for kind in ("MDC4", "MDC8"):
        checks[f"mdc {kind}"] = all(sc.validate_mdc(sc.make_code(kind)).values())
    rng = np.random.default_rng(1)
    for kind in ("ALAMOUTI", "TH4", "MDC4", "MDC8"):
        code = sc.make_code(kind)
        x = crandn(rng, 50, code.K)
        checks[f"forms {kind}"] = np.abs(sc.assemble(code, x) - sc.assemble_ab(code, x)).max() < 1e-12
    for kind in ("MDC4", "MDC8"):
        code = sc.make_code(kind)
        worst = 0.0
        for x in crandn(rng, 50, code.K):
            _, direct, closed = sc.gram(code, x)
            worst = max(worst, np.abs(direct - closed).max())
        checks[f"gram {kind}"] = worst < 1e-12
    for kind in ("ALAMOUTI", "TH4"):
        checks[f"certificate {kind}"] = da.ostbc_distance_certificate(sc.make_code(kind), al.psk(4)) < 1e-12
    dt = time.time() - t0
    failed = [k for k, v in checks.items() if not v]
    report(1, not failed and dt < 1.0, f"{len(checks) - len(failed)}/{len(checks)} checks, failed={failed}", t0)


def test_criterion_2_metric_equivalence(report):
    t0 = time.time()
    rng = np.random.default_rng(2)
    c, T, rho, B = al.psk(8), 3, 5.0, 1000
    info = rng.integers(0, 8, (B, T - 1))
    s = sd.diff_encode(info, c, include_reference=True)
    h = crandn(rng, B, 1)
    Y = np.sqrt(rho) * h * s + crandn(rng, B, T)
    winners = {}
    for m in ("GLRT", "ML_RBF", "ML_AWGN", "CORR"):
        for simplify in (True, False):
            cfg = sd.MsddConfig(T, m, rho=rho, simplify=simplify)
            winners[(m, simplify)] = sd.msdd_detect_batch(Y, cfg, c)[0]
    ref = winners[("CORR", True)]
    msdd_ok = all(np.array_equal(w, ref) for w in winners.values())

    code, q = sc.make_code("ALAMOUTI"), al.psk(4)
    cands, idx = ds.two_block_candidates(code, q)
    agree_fast = 0
    for _ in range(500):
        k = rng.integers(0, 4, (1, 2))
        S, _ = ds.encode_sequence(ds.info_matrices(code, q, k), unitary=True)
        Y = ch.transmit(S, crandn(rng, 2, 1), 4.0, rng)
        fast = ds.decode_fast_ml_unitary(Y[0], Y[1], code, q)
        agree_fast += np.array_equal(fast, idx[ds.decode_matrix_ml_general(Y[0], Y[1], cands, 4.0)])

    q16 = al.rect_qam(16)
    k = rng.integers(0, 16, (2000, 2))
    S, a = ds.encode_sequence(ds.info_matrices(code, q16, k)[:, None], unitary=False)
    Y = ch.transmit(S, crandn(rng, 2000, 1, 2, 1), 30.0, rng)
    srsd = ds.decode_srsd(Y[:, 0], Y[:, 1], code, q16, a[:, 0])
    near = ds.decode_near_optimal(Y[:, 0], Y[:, 1], code, q16, a[:, 0])
    srsd_ok = np.array_equal(srsd, near)
    dt = time.time() - t0
    ok = msdd_ok and agree_fast == 500 and srsd_ok and dt < 10
    report(2, ok, f"msdd metrics agree={msdd_ok} (8 variants x {B}), fast==general {agree_fast}/500, "
                  f"srsd==near-optimal {srsd_ok} (2000 blocks)", t0)


def test_criterion_3_design_search(report):
    t0 = time.time()
    rot = da.grid_search("QAM_ROTATION", {"theta": "0:45:0.01"})
    rot_ok = abs(rot.params["theta"] - 13.28) <= 0.05
    q8 = da.grid_search("MDC_8QAM", {"theta1": "0:89.95:0.05", "theta2": "0:89.95:0.05", "r": [1.37]})
    t1, t2 = q8.params["theta1"], q8.params["theta2"]
    q8_ok = any(abs(t1 - a) <= 0.5 and abs(t2 - b) <= 0.5 for a, b in ((12.73, 58.18), (77.27, 31.82)))
    u_ok = True
    for eta, L in ((1, 4), (2, 16)):
        u, _ = dustm.table_u(2, eta)
        got = dustm.search_u(2, L)["coding_gain"]
        u_ok &= abs(got - dustm.coding_gain_u(u, L)) < 1e-9
    dt = time.time() - t0
    report(3, rot_ok and q8_ok and u_ok and dt < 60,
           f"rotation {rot.params['theta']:.2f} deg, 8-QAM ({t1:.2f}, {t2:.2f}) deg, u-search CG match={u_ok}", t0)


def test_criterion_4_diversity_certificates(report):
    t0 = time.time()
    full = {}
    for (M, eta) in sorted(dustm.TABLE_U):
        u, L = dustm.table_u(M, eta)
        code = dustm.make_cyclic(u, L)
        # group code: V_a - V_b = V_b (V_(a-b) - I), so the L - 1 differences to I cover every pair
        ranks = [cxmat.rank(code.power(l) - np.eye(M)) for l in range(1, L)]
        ok = min(ranks) == M
        if L <= 256:
            ok &= da.distance_spectrum(code.codebook()).min_rank == M
        full[(M, L)] = ok
    code = sc.make_code("MDC4")
    det_rect = da.mdc_min_det(al.rect_qam(4))[0]
    det_rot = da.mdc_min_det(al.rotated_qam(4, al.QAM_ROTATION))[0]
    cg_rect = da.distance_spectrum(sc.codebook(code, al.rect_qam(4))[0]).coding_gain
    cg_rot = da.distance_spectrum(sc.codebook(code, al.rotated_qam(4, al.QAM_ROTATION))[0]).coding_gain
    unc = da.qostbc_single_symbol_certificate("UNCOMBINED", al.rect_qam(16))["min_rank"]
    dt = time.time() - t0
    ok = all(full.values()) and det_rect == 0 and cg_rect == 0 and det_rot > 0 and cg_rot > 0 and unc == 2
    report(4, ok and dt < 10, f"DUSTM full rank {sum(full.values())}/{len(full)}, MDC4 min-det rect={det_rect:g} "
                              f"rotated={det_rot:.4g} (CG {cg_rect:g}/{cg_rot:.4f}), uncombined rank={unc}", t0)


# Block-fading anchors use 10-block frames so that the error count is spread over many channel draws.

@pytest.mark.slow
def test_criterion_5_simo_coherent_vs_noncoherent(report):
    t0 = time.time()
    common = dict(N=2, constellation="psk4", frame_len=10, ebn0_grid_db=list(range(0, 21, 2)),
                  stop={"min_bit_errors": 2000, "max_frames": 200000}, seed=5)
    gap, xa, xb, curves = _gap(1e-2, dict(scheme="SIMO_COH", **common), dict(scheme="SIMO_NONCOH", **common))
    report(5, abs(gap - 3.0) <= 0.7,
           f"gap {gap:.2f} dB at BER 1e-2 (coherent {xa:.2f}, differential {xb:.2f}) {curves}", t0)


@pytest.mark.slow
def test_criterion_6_alamouti_vs_dustm(report):
    t0 = time.time()
    common = dict(M=2, N=1, frame_len=10, ebn0_grid_db=list(range(10, 33, 2)),
                  stop={"min_bit_errors": 1500, "max_frames": 100000}, seed=6)
    u, L = dustm.table_u(2, 2)
    gap, xa, xb, curves = _gap(1e-3, dict(scheme="OSTBC_UNITARY", code="ALAMOUTI", constellation="psk4", **common),
                               dict(scheme="DUSTM", u=u, L=L, **common))
    report(6, abs(gap - 3.0) <= 1.0,
           f"gap {gap:.2f} dB at BER 1e-3 (Alamouti {xa:.2f}, DUSTM u={u} L={L} {xb:.2f}) {curves}", t0)


@pytest.mark.slow
def test_criterion_7_ring_ratio(report):
    t0 = time.time()
    res = da.grid_search("RING_RATIO", {"a": "1.4:3.0:0.1"}, q_p=8, q_a=2, ebn0_db=18.0, bits=4_000_000, seed=7)
    a = res.params["a"]
    trace = [f"{t['a']:.1f}:{t['value']:.2e}" for t in res.trace]
    report(7, abs(a - 2.1) <= 0.2 + 1e-9, f"argmin a = {a:.1f} (BER {res.value:.2e}) {trace}", t0)


@pytest.mark.slow
def test_criterion_8_msdd_removes_error_floor(report):
    t0 = time.time()
    ratios = {}
    for T in (2, 4):
        rows = sk.run_ber(sk.SimConfig(scheme="DPSK_MSDD", constellation="psk16", T=T, metric="ML_RFF",
                                       channel={"kind": "RFF", "fdts": 0.02}, frame_len=150,
                                       ebn0_grid_db=[20.0, 30.0], stop={"min_bit_errors": 1000,
                                                                         "max_frames": 20000}, seed=8))
        ratios[T] = (rows[1].ber / rows[0].ber, rows[0].ber, rows[1].ber)
    ok = ratios[2][0] > 0.5 and ratios[4][0] < 0.2
    detail = ", ".join(f"T={T}: BER {b20:.3e} -> {b30:.3e}, ratio {r:.3f}" for T, (r, b20, b30) in ratios.items())
    report(8, ok, detail + " (required: T=2 ratio > 0.5, T=4 ratio < 0.2)", t0)


@pytest.mark.slow
def test_criterion_9_near_optimal_vs_ml(report):
    t0 = time.time()
    common = dict(scheme="OSTBC_QAM", code="ALAMOUTI", constellation="qam16", frame_len=10,
                  ebn0_grid_db=list(range(18, 37, 2)), stop={"min_bit_errors": 1500, "max_frames": 60000}, seed=9)
    gap, xa, xb, curves = _gap(1e-3, dict(decoder="ML", **common), dict(decoder="NEAR_OPTIMAL", **common))
    report(9, gap <= 0.5, f"near-optimal minus ML {gap:.2f} dB at BER 1e-3 (ML {xa:.2f}, near-optimal {xb:.2f}) "
                          f"{curves}", t0)


@pytest.mark.slow
def test_criterion_10_qostbc_vs_th4(report):
    t0 = time.time()
    common = dict(M=4, N=1, frame_len=10, ebn0_grid_db=list(range(10, 25)),
                  stop={"min_bit_errors": 1500, "max_frames": 60000}, seed=10)
    gap, xa, xb, curves = _gap(1e-3, dict(scheme="QOSTBC_COMBINED", constellation="qam16r", **common),
                               dict(scheme="OSTBC_QAM", code="TH4", constellation=["qam32", "qam32", "qam64"],
                                    **common))
    report(10, abs(gap - 1.5) <= 1.0,
           f"gap {gap:.2f} dB at BER 1e-3 (MDC-QOSTBC {xa:.2f}, T-H 32/32/64 {xb:.2f}) {curves}", t0)
