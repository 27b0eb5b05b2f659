"""Codebook analysis and constellation design searches.

For a pair of codewords the squared distance matrix is
``D^H D`` with ``D = V_l - V_l'`` and eigenvalues ``lambda_m``.  Over all
unordered pairs a codebook is summarized by

* the minimum rank ``r`` (diversity order ``r N``),
* the coding gain ``min (prod_m lambda_m)^(1/M)``, zero when any pair is
  rank deficient,
* the diversity sum ``min sum_m lambda_m``.

The design searches evaluate either an analytic objective (the MDC
minimum determinant) on a parameter grid, or a simulated error rate via
:mod:`diffstc.simkit`.
"""

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from . import cxmat
from .alphabets import Constellation, Kind, build, rect_qam, rotate
from .errors import ParameterError

#: relative eigenvalue threshold below which a distance eigenvalue counts as zero
RANK_TOL = cxmat.RANK_RTOL
#: pairs above which the batched numpy eigensolver replaces the Jacobi kernel
JACOBI_PAIR_LIMIT = 4096


@dataclass(frozen=True)
class CodebookReport:
    """Pairwise distance summary of a codebook."""

    size: int
    N: int
    min_rank: int
    diversity_order: int
    coding_gain: float
    diversity_sum: float
    argmin_pair: tuple
    engine: str = "jacobi"

    def to_json(self):
        return json.dumps(asdict(self))


def _pair_eigs(D, engine):
    G = np.conj(np.swapaxes(D, -1, -2)) @ D
    if engine == "jacobi":
        return np.array([cxmat.eig_hermitian(g) for g in G]).reshape(len(G), -1)
    return np.linalg.eigvalsh(G)


def distance_spectrum(codebook, N=1, tol=RANK_TOL, engine="auto"):
    """Rank, coding gain and diversity sum over all codeword pairs.

    Parameters
    ----------
    codebook : sequence of ndarray or ndarray (L, T, M)
    N : int
        Receive antennas (diversity order is ``min_rank * N``).
    tol : float
        Eigenvalues below ``tol * max(1, largest eigenvalue of the pair)``
        count as zero.
    engine : {"auto", "jacobi", "numpy"}
        Eigen solver; ``auto`` uses the in-house Jacobi kernel up to
        :data:`JACOBI_PAIR_LIMIT` pairs.

    Returns
    -------
    CodebookReport
    """
    C = np.asarray(codebook, dtype=np.complex128)
    if C.ndim != 3 or len(C) < 2:
        raise ParameterError("need at least two codewords of equal shape")
    L, M = len(C), C.shape[-1]
    i, j = np.triu_indices(L, 1)
    if engine == "auto":
        engine = "jacobi" if len(i) <= JACOBI_PAIR_LIMIT else "numpy"
    lam = np.clip(_pair_eigs(C[i] - C[j], engine), 0.0, None)
    top = np.maximum(1.0, lam.max(axis=1, keepdims=True))
    ranks = np.sum(lam > tol * top, axis=1)
    prods = np.prod(lam, axis=1)
    prods[ranks < M] = 0.0
    cg = prods ** (1.0 / M)
    # ties (to rounding) go to the first pair in index order, whatever the engine
    k = int(np.flatnonzero(cg <= cg.min() + 1e-12 * max(1.0, cg.min()))[0])
    return CodebookReport(size=L, N=int(N), min_rank=int(ranks.min()),
                          diversity_order=int(ranks.min()) * int(N),
                          coding_gain=float(cg[k]), diversity_sum=float(np.sum(lam, axis=1).min()),
                          argmin_pair=(int(i[k]), int(j[k])), engine=engine)


def pep_bound(Vl, Vl2, rho, N=1):
    """Chernoff bound ``1/2 prod_m [1 + rho^2 / (4 (1 + 2 rho)) sigma_m^2]^(-N)``.

    ``sigma_m`` are the singular values of ``Vl - Vl2``.
    """
    if rho <= 0:
        raise ParameterError("rho must be positive")
    s = cxmat.singular_values(np.asarray(Vl) - np.asarray(Vl2))
    f = rho ** 2 / (4.0 * (1.0 + 2.0 * rho))
    return float(0.5 * np.prod((1.0 + f * s ** 2) ** (-float(N))))


def _min_det_values(points, M, K):
    d = points[:, None] - points[None, :]
    v = np.abs(d.real ** 2 - d.imag ** 2) ** M / K
    iu = np.triu_indices(len(points), 1)
    return v[iu], iu


def mdc_min_det(constellation, M=4, K=4):
    """``min (1/K) |(dx^R)^2 - (dx^I)^2|^M`` over all point pairs.

    Returns
    -------
    (float, (int, int))
        The minimum and the first pair (in index order) attaining it.
    """
    pts = constellation.points if isinstance(constellation, Constellation) else np.asarray(constellation)
    v, (i, j) = _min_det_values(pts, M, K)
    k = int(np.argmin(v))
    return float(v[k]), (int(i[k]), int(j[k]))


class Objective(str, Enum):
    RING_RATIO = "RING_RATIO"
    QAM_ROTATION = "QAM_ROTATION"
    MDC_8QAM = "MDC_8QAM"
    OSTBC_8QAM = "OSTBC_8QAM"


@dataclass
class SearchResult:
    """Best grid point, its objective value and the evaluated trace."""

    objective: str
    params: dict
    value: float
    trace: list = field(default_factory=list)
    complete: bool = True
    goal: str = "max"

    def to_json(self):
        return json.dumps(asdict(self))


def parse_grid(text):
    """``"start:stop:step"`` (stop inclusive) or a comma list into an array."""
    if isinstance(text, (list, tuple, np.ndarray)):
        return np.asarray(text, dtype=float)
    s = str(text)
    if ":" in s:
        start, stop, step = (float(v) for v in s.split(":"))
        if step <= 0 or stop < start:
            raise ParameterError(f"bad grid {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)
    return np.array([float(v) for v in s.split(",") if v.strip()])


def _two_ring_min_det(r, th1, th2, chunk=256):
    """MDC min-det of the two-ring 8-QAM on the grid ``th1 x th2`` (radians).

    Pairs inside one ring depend on one angle only, cross pairs on both.
    """
    k = np.arange(4) * np.pi / 2
    e = (4.0 + 4.0 * r * r) / 8.0  # mean energy before normalization
    iu = np.triu_indices(4, 1)

    def ring(rad, th):
        p = rad * np.exp(1j * (k[None] + th[:, None]))
        d = p[:, iu[0]] - p[:, iu[1]]
        return np.abs((d * d).real).min(axis=1)

    inner, outer = ring(1.0, th1), ring(r, th2)
    out = np.empty((len(th1), len(th2)))
    p2 = r * np.exp(1j * (k[None] + th2[:, None]))  # (n2, 4)
    for s in range(0, len(th1), chunk):
        p1 = np.exp(1j * (k[None] + th1[s:s + chunk, None]))  # (c, 4)
        d = p1[:, None, :, None] - p2[None, :, None, :]
        cross = np.abs((d * d).real).reshape(d.shape[0], d.shape[1], 16).min(axis=2)
        out[s:s + chunk] = np.minimum(np.minimum(cross, outer[None]), inner[s:s + chunk, None])
    return out / e


def grid_search(objective, grid, budget=None, **opts):
    """Exhaustive parameter search.

    Parameters
    ----------
    objective : Objective or str
    grid : dict
        Per-parameter grids (arrays or ``"start:stop:step"`` strings):

        ``QAM_ROTATION``: ``theta`` in degrees; option ``q`` (default 16).
        ``MDC_8QAM``: ``theta1``, ``theta2`` in degrees, ``r`` (scalar or grid).
        ``RING_RATIO``: ``a``; options ``q_p``, ``q_a``, ``ebn0_db``, ``T``,
        ``bits`` (per grid point), ``seed``, ``channel`` (default
        ``AWGN_PHASE``) and ``metric`` (default ``GLRT``).
        ``OSTBC_8QAM``: ``a`` and ``theta`` (degrees, inner ring rotation);
        options ``ebn0_db``, ``bits``, ``seed``.
    budget : int, optional
        Maximum number of grid points to evaluate; a larger grid is cut
        and the result flagged incomplete.

    Returns
    -------
    SearchResult
        Ties go to the lowest grid index.
    """
    obj = Objective(objective)
    if obj is Objective.QAM_ROTATION:
        theta = parse_grid(grid.get("theta", "0:45:0.01"))
        theta, complete = _cap(theta, budget)
        base = rect_qam(int(opts.get("q", 16)))
        M, K = int(opts.get("M", 4)), int(opts.get("K", 4))
        pts = base.points[None, :] * np.exp(1j * np.deg2rad(theta))[:, None]
        d = pts[:, :, None] - pts[:, None, :]
        iu = np.triu_indices(base.size, 1)
        v = (np.abs(d.real ** 2 - d.imag ** 2) ** M / K)[:, iu[0], iu[1]].min(axis=1)
        k = int(np.argmax(v))
        trace = [{"theta": float(t), "value": float(x)} for t, x in zip(theta, v)]
        return SearchResult(obj.value, {"theta": float(theta[k])}, float(v[k]), trace, complete)
    if obj is Objective.MDC_8QAM:
        t1 = parse_grid(grid.get("theta1", "0:89.99:0.05"))
        t2 = parse_grid(grid.get("theta2", "0:89.99:0.05"))
        rs = np.atleast_1d(parse_grid(grid.get("r", [1.37])))
        budget_left = budget
        best, trace, complete = None, [], True
        for r in rs:
            if budget_left is not None and budget_left < len(t1) * len(t2):
                complete = False
                break
            if budget_left is not None:
                budget_left -= len(t1) * len(t2)
            v = _two_ring_min_det(float(r), np.deg2rad(t1), np.deg2rad(t2))
            a, b = np.unravel_index(int(np.argmax(v)), v.shape)
            trace.append({"r": float(r), "theta1": float(t1[a]), "theta2": float(t2[b]), "value": float(v[a, b])})
            if best is None or v[a, b] > best["value"]:
                best = trace[-1]
        if best is None:
            return SearchResult(obj.value, {}, float("nan"), trace, False)
        params = {k: best[k] for k in ("r", "theta1", "theta2")}
        return SearchResult(obj.value, params, best["value"], trace, complete)
    if obj is Objective.RING_RATIO:
        return _ring_ratio_search(grid, budget, **opts)
    return _ostbc_8qam_search(grid, budget, **opts)


def _cap(values, budget):
    if budget is not None and len(values) > budget:
        return values[:budget], False
    return values, True


def _ring_ratio_search(grid, budget, q_p=8, q_a=2, ebn0_db=18.0, T=2, bits=200_000, seed=1,
                       channel="AWGN_PHASE", metric="GLRT"):
    # default receiver: conventional (T = 2) detection without knowledge of the channel gain
    from .simkit import SimConfig, bits_per_frame, run_ber

    a_grid, complete = _cap(parse_grid(grid.get("a", "1.4:3.0:0.1")), budget)
    trace = []
    bps = int(np.log2(q_p * q_a))
    for k, a in enumerate(a_grid):
        cfg = SimConfig(scheme="DAPSK_MSDD", constellation=f"dapsk{q_p}x{q_a}a{a:.6g}", T=T,
                        metric=metric, channel={"kind": channel}, ebn0_grid_db=[ebn0_db],
                        stop={"min_bit_errors": 10 ** 9, "max_frames": 1}, seed=seed)
        cfg.stop["max_frames"] = max(1, -(-int(bits) // bits_per_frame(cfg)))
        row = run_ber(cfg)[0]
        trace.append({"a": float(a), "value": row.ber, "bit_errors": row.bit_errors, "bits": row.bits})
    vals = np.array([t["value"] for t in trace])
    k = int(np.argmin(vals))
    return SearchResult("RING_RATIO", {"a": trace[k]["a"]}, float(vals[k]), trace, complete, "min")


def _ostbc_8qam_search(grid, budget, ebn0_db=14.0, bits=100_000, seed=1, N=1):
    from .simkit import SimConfig, bits_per_frame, run_ber

    a_grid = parse_grid(grid.get("a", "1.2:2.2:0.1"))
    th_grid = parse_grid(grid.get("theta", "0:45:15"))
    pairs = [(a, t) for a in a_grid for t in th_grid]
    pairs, complete = _cap(pairs, budget)
    trace = []
    for a, t in pairs:
        const = {"kind": "CIRC_8QAM", "a": float(a), "inner_rotation": float(np.deg2rad(t))}
        cfg = SimConfig(scheme="OSTBC_QAM", code="ALAMOUTI", M=2, N=N, constellation=const,
                        ebn0_grid_db=[ebn0_db], stop={"min_bit_errors": 10 ** 9, "max_frames": 1}, seed=seed)
        cfg.stop["max_frames"] = max(1, -(-int(bits) // bits_per_frame(cfg)))
        row = run_ber(cfg)[0]
        trace.append({"a": float(a), "theta": float(t), "value": row.ser})
    vals = np.array([t["value"] for t in trace])
    k = int(np.argmin(vals))
    return SearchResult("OSTBC_8QAM", {"a": trace[k]["a"], "theta": trace[k]["theta"]},
                        float(vals[k]), trace, complete, "min")


def omdc_objective(radii):
    """MDC min-det objective ``min |(dx^R)^2 - (dx^I)^2|`` of the axis constellation."""
    c = build(Kind.OMDC4 if len(radii) == 2 else Kind.OMDC8, radii=np.abs(radii))
    v, _ = _min_det_values(c.points, 1, 1)
    return float(v.min())


def optimize_omdc_radii(q=8, starts=200, seed=0):
    """Numerically optimal radii of the axis (OMDC) constellation.

    Multistart Nelder-Mead on the min-det objective, with the radii
    normalized to unit mean energy.  The constellation places two antipodal
    points per circle, alternating between the axes.

    Returns
    -------
    (ndarray, float)
        Sorted radii and the objective value.
    """
    if q not in (4, 8):
        raise ParameterError("OMDC constellations have 4 or 8 points")
    n = q // 2
    rng = np.random.default_rng(seed)

    def f(r):
        r = np.abs(r)
        if np.any(r < 1e-6) or len(set(np.round(r, 12))) < n:
            return 0.0
        return -omdc_objective(r)

    best_r, best_v = None, -np.inf
    for _ in range(starts):
        res = minimize(f, rng.random(n) * 2 + 0.05, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
        v = -res.fun
        if v > best_v + 1e-12:
            r = np.sort(np.abs(res.x))
            best_r, best_v = r * np.sqrt((q / 2) / np.sum(r ** 2)), v
    return best_r, float(best_v)


def ostbc_distance_certificate(code, constellation):
    """Largest deviation of ``D^H D`` from a multiple of I over all codeword pairs."""
    from .stcodes import codebook

    Vs, _ = codebook(code, constellation)
    worst = 0.0
    for a, b in combinations(range(len(Vs)), 2):
        D = Vs[a] - Vs[b]
        G = D.conj().T @ D
        c = np.real(np.trace(G)) / G.shape[0]
        worst = max(worst, float(np.max(np.abs(G - c * np.eye(G.shape[0])))))
    return worst


def rotation_invariance_check(constellation, theta):
    """``mdc_min_det`` of the rotation by `theta` and by `theta + pi/2`."""
    a = mdc_min_det(rotate(constellation, theta))[0]
    b = mdc_min_det(rotate(constellation, theta + np.pi / 2))[0]
    return a, b


def qostbc_single_symbol_certificate(mode, constellation):
    """Rank and determinant of QOSTBC distance matrices for single-symbol errors.

    With equal previous subsystem amplitudes the equivalent information
    matrix ``V'`` is real-linear in the symbols, so the distance matrix of
    two blocks differing only in symbol ``i`` is ``V'`` evaluated at the
    difference.  All positions and all point pairs are scanned.

    Returns
    -------
    dict
        ``min_rank``, ``min_abs_det`` and the worst ``(position, i, j)``.
    """
    from .diff_qostbc import QostbcMode, actual_info_matrix, subsystem_symbols

    qm = QostbcMode.of(mode)
    pts = constellation.points if isinstance(constellation, Constellation) else np.asarray(constellation)
    best = {"min_rank": None, "min_abs_det": np.inf, "argmin": None}
    for pos in range(4):
        for i, j in combinations(range(len(pts)), 2):
            dx = np.zeros(4, dtype=np.complex128)
            dx[pos] = pts[i] - pts[j]
            D = actual_info_matrix(subsystem_symbols(qm, dx), 1.0, 1.0, qm.p)
            r = cxmat.rank(D)
            d = abs(cxmat.determinant(D))
            if best["min_rank"] is None or r < best["min_rank"]:
                best["min_rank"] = r
            if d < best["min_abs_det"]:
                best["min_abs_det"], best["argmin"] = float(d), (pos, i, j)
    return best
