"""Signal constellations with bit labels.

Every constellation is normalized to unit average symbol energy over
its points.  Points are stored in index order and ``labels[i]`` is the
bit string carried by ``points[i]``.

Supported families
------------------
PSK        unit-circle points ``exp(j 2 pi k / q)``, cyclic gray labels
DASK       amplitude levels ``a**d`` (ring ratio ``a``)
DAPSK      concentric PSK circles; phase bits high, amplitude bits low
RECT_QAM   rectangular grid, per-axis gray labels (square or 2:1)
CROSS_QAM  32-point cross constellation (6x6 grid without corners)
CIRC_8QAM  two 4-PSK rings with radius ratio ``a`` and relative rotation
OMDC4/8    points on the axes, two per circle, alternating axes
MDC_8QAM   two 4-PSK rings rotated independently by ``theta1``/``theta2``
ROTATED    any of the above multiplied by ``exp(j theta)``

Angles are in radians everywhere in the library; the CLI converts from
degrees.
"""

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParameterError

ENERGY_TOL = 1e-12

#: radii of the 4-point orthogonalized MDC constellation.  Exact optimum of
#: min(4 r1^2, 4 r2^2, r2^2 - r1^2) subject to r1^2 + r2^2 = 2.
OMDC4_RADII = (np.sqrt(1.0 / 3.0), np.sqrt(5.0 / 3.0))
#: radii of the 8-point orthogonalized MDC constellation in increasing order,
#: alternating imaginary / real axis.  Obtained numerically with
#: ``scripts/omdc_radii.py`` (see ``design_analysis.optimize_omdc_radii``).
OMDC8_RADII = (0.348449649, 0.779157117, 1.045348961, 1.476056421)


class Kind(str, Enum):
    PSK = "PSK"
    DASK = "DASK"
    DAPSK = "DAPSK"
    RECT_QAM = "RECT_QAM"
    CROSS_QAM = "CROSS_QAM"
    CIRC_8QAM = "CIRC_8QAM"
    OMDC4 = "OMDC4"
    OMDC8 = "OMDC8"
    MDC_8QAM = "MDC_8QAM"
    ROTATED = "ROTATED"


def _is_pow2(q):
    return isinstance(q, (int, np.integer)) and q >= 1 and (q & (q - 1)) == 0


def _nbits(q):
    return int(q).bit_length() - 1


def gray_labels(q):
    """Reflected binary gray code of length `q` as bit strings.

    Entry ``k`` is the label of index ``k``; consecutive entries (and the
    last/first pair) differ in exactly one bit.

    >>> gray_labels(4)
    ['00', '01', '11', '10']
    """
    if not _is_pow2(q) or q < 2:
        raise ParameterError(f"gray code length must be a power of two >= 2, got {q}")
    n = _nbits(q)
    return [format(k ^ (k >> 1), f"0{n}b") for k in range(q)]


def _gray_or_empty(q):
    return gray_labels(q) if q > 1 else [""]


@dataclass(frozen=True)
class DapskSplit:
    """Phase / amplitude split of a DAPSK alphabet with ring ratio `a`."""

    q_p: int
    q_a: int
    a: float

    def __post_init__(self):
        if not (_is_pow2(self.q_p) and _is_pow2(self.q_a)):
            raise ParameterError("q_p and q_a must be powers of two")
        if self.q_a > 1 and not self.a > 1.0:
            raise ParameterError("ring ratio must exceed 1")

    @property
    def q(self):
        return self.q_p * self.q_a


@dataclass(frozen=True, eq=False)
class Constellation:
    """A labelled, unit-energy point set.

    Attributes
    ----------
    kind : Kind
    points : ndarray of complex, shape (q,)
    labels : tuple of str
        Bit label of every point, all of length ``bits_per_symbol``.
    meta : dict
        Construction parameters (ring ratio, angles, axis levels, ...).
    """

    kind: Kind
    points: np.ndarray
    labels: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.complex128)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(self.labels))
        q = pts.size
        if not _is_pow2(q):
            raise ParameterError(f"constellation size must be a power of two, got {q}")
        if len(self.labels) != q or len(set(self.labels)) != q:
            raise ParameterError("labels must be distinct and one per point")
        b = _nbits(q)
        if any(len(s) != b or set(s) - {"0", "1"} for s in self.labels):
            raise ParameterError(f"labels must be {b}-bit strings")

    @property
    def size(self):
        return self.points.size

    @property
    def bits_per_symbol(self):
        return _nbits(self.size)

    @property
    def bits(self):
        """Bit table, shape (q, bits_per_symbol), dtype uint8."""
        b = self.bits_per_symbol
        if b == 0:
            return np.zeros((1, 0), dtype=np.uint8)
        return np.array([[int(c) for c in s] for s in self.labels], dtype=np.uint8)

    @property
    def is_constant_envelope(self):
        return bool(np.allclose(np.abs(self.points), 1.0, atol=1e-12))

    @property
    def is_rectangular(self):
        return "levels_re" in self.meta

    def energy(self):
        return float(np.mean(np.abs(self.points) ** 2))

    def index_from_bits(self, bits):
        """Map rows of a bit array (..., b) to point indices."""
        bits = np.asarray(bits, dtype=np.int64)
        lut = np.zeros(self.size, dtype=np.int64)
        for i, s in enumerate(self.labels):
            lut[int(s, 2)] = i
        weights = 1 << np.arange(self.bits_per_symbol)[::-1]
        return lut[bits @ weights]

    def to_json(self):
        """JSON document ``{kind, params, points, labels}``."""
        params = {k: v for k, v in self.meta.items() if not k.startswith("levels_")}
        return json.dumps({
            "kind": self.kind.value,
            "params": _jsonable(params),
            "points": [[float(p.real), float(p.imag)] for p in self.points],
            "labels": list(self.labels),
        })


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _normalize(points):
    points = np.asarray(points, dtype=np.complex128)
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def _psk(q, phase_offset=0.0):
    if not _is_pow2(q) or q < 2:
        raise ParameterError(f"PSK order must be a power of two >= 2, got {q}")
    k = np.arange(q)
    pts = np.exp(1j * (2 * np.pi * k / q + phase_offset))
    return Constellation(Kind.PSK, pts, gray_labels(q), {"q": q, "phase_offset": phase_offset})


def _dapsk(q_p, q_a, a, kind=Kind.DAPSK):
    split = DapskSplit(int(q_p), int(q_a), float(a))
    if split.q < 2:
        raise ParameterError("DAPSK alphabet must have at least two points")
    amp = split.a ** np.arange(split.q_a) if split.q_a > 1 else np.ones(1)
    c = 1.0 / np.sqrt(np.mean(amp ** 2))
    phase = np.exp(2j * np.pi * np.arange(split.q_p) / split.q_p)
    pts = c * (phase[:, None] * amp[None, :]).ravel()
    gp, ga = _gray_or_empty(split.q_p), _gray_or_empty(split.q_a)
    labels = [gp[p] + ga[d] for p in range(split.q_p) for d in range(split.q_a)]
    meta = {"q_p": split.q_p, "q_a": split.q_a, "a": split.a, "amp_scale": c}
    return Constellation(kind, pts, labels, meta)


def _pam_levels(m):
    return (2.0 * np.arange(m) - (m - 1)).astype(float)


def _rect_qam(q):
    if not _is_pow2(q) or q < 4:
        raise ParameterError(f"rectangular QAM size must be a power of two >= 4, got {q}")
    b = _nbits(q)
    m_re = 1 << ((b + 1) // 2)
    m_im = 1 << (b // 2)
    lr, li = _pam_levels(m_re), _pam_levels(m_im)
    scale = 1.0 / np.sqrt(np.mean(lr ** 2) + np.mean(li ** 2))
    pts = np.array([complex(lr[r], li[i]) for r in range(m_re) for i in range(m_im)]) * scale
    gr, gi = gray_labels(m_re), gray_labels(m_im)
    labels = [gr[r] + gi[i] for r in range(m_re) for i in range(m_im)]
    meta = {"q": q, "levels_re": lr * scale, "levels_im": li * scale}
    return Constellation(Kind.RECT_QAM, pts, labels, meta)


def _cross_qam(q=32):
    if q != 32:
        raise ParameterError("cross QAM is defined for 32 points only")
    # start from 8x4 rectangular gray grid, fold the outer columns to the top/bottom
    base = _rect_qam(32)
    lr, li = _pam_levels(8), _pam_levels(4)
    pts, labels = [], []
    for r in range(8):
        for i in range(4):
            x, y = lr[r], li[i]
            if abs(x) == 7:
                x, y = np.sign(x) * (4 - abs(y)), np.sign(y) * 5
            pts.append(complex(x, y))
            labels.append(base.labels[r * 4 + i])
    return Constellation(Kind.CROSS_QAM, _normalize(pts), labels, {"q": 32})


def _two_ring(theta_inner, theta_outer, ratio, kind, meta):
    k = np.arange(4) * np.pi / 2
    inner = np.exp(1j * (k + theta_inner))
    outer = ratio * np.exp(1j * (k + theta_outer))
    g = gray_labels(4)
    labels = ["0" + s for s in g] + ["1" + s for s in g]
    return Constellation(kind, _normalize(np.concatenate([inner, outer])), labels, meta)


def _circ8(a=1.6, inner_rotation=np.pi / 4):
    if not a > 1.0:
        raise ParameterError("ring ratio must exceed 1")
    meta = {"a": float(a), "inner_rotation": float(inner_rotation)}
    return _two_ring(inner_rotation, 0.0, a, Kind.CIRC_8QAM, meta)


def _mdc_8qam(r, theta1, theta2):
    if not r > 1.0:
        raise ParameterError("radius ratio must exceed 1")
    for t in (theta1, theta2):
        if not 0.0 <= t < np.pi / 2:
            raise ParameterError("ring angles must lie in [0, pi/2)")
    meta = {"r": float(r), "theta1": float(theta1), "theta2": float(theta2)}
    return _two_ring(theta1, theta2, r, Kind.MDC_8QAM, meta)


def _omdc(radii, kind):
    radii = np.sort(np.asarray(radii, dtype=float))
    if np.any(radii <= 0) or len(set(radii)) != len(radii):
        raise ParameterError("OMDC radii must be positive and distinct")
    q = 2 * radii.size
    radii = radii * np.sqrt((q / 2) / np.sum(radii ** 2))
    # smallest circle on the axis opposite to the largest, alternating outward
    axes = [(1j if (radii.size - 1 - i) % 2 else 1.0) for i in range(radii.size)]
    pts = []
    for r, u in zip(radii, axes):
        pts += [r * u, -r * u]
    return Constellation(kind, np.array(pts), gray_labels(q), {"radii": radii.tolist()})


def build(kind, **params):
    """Construct a normalized, labelled constellation.

    Parameters
    ----------
    kind : Kind or str
    **params
        PSK: ``q``, optional ``phase_offset``.  DASK: ``q_a``, ``a``.
        DAPSK: ``q_p``, ``q_a``, ``a`` (or ``split``).  RECT_QAM: ``q``.
        CROSS_QAM: ``q`` (32).  CIRC_8QAM: ``a``, ``inner_rotation``.
        OMDC4 / OMDC8: optional ``radii``.  MDC_8QAM: ``r``, ``theta1``,
        ``theta2``.  ROTATED: ``base`` (a Constellation or a dict of build
        arguments including ``kind``) and ``theta``.

    Raises
    ------
    ParameterError
        For sizes that are not powers of two, ring ratios <= 1, angles out
        of range or missing parameters.
    """
    try:
        kind = Kind(kind if not isinstance(kind, str) else kind.upper())
    except ValueError as exc:
        raise ParameterError(f"unknown constellation kind {kind!r}") from exc
    try:
        if kind is Kind.PSK:
            return _psk(int(params["q"]), float(params.get("phase_offset", 0.0)))
        if kind is Kind.DASK:
            return _dapsk(1, params["q_a"], params["a"], Kind.DASK)
        if kind is Kind.DAPSK:
            if "split" in params:
                s = params["split"]
                return _dapsk(s.q_p, s.q_a, s.a)
            return _dapsk(params["q_p"], params["q_a"], params["a"])
        if kind is Kind.RECT_QAM:
            return _rect_qam(int(params["q"]))
        if kind is Kind.CROSS_QAM:
            return _cross_qam(int(params.get("q", 32)))
        if kind is Kind.CIRC_8QAM:
            return _circ8(params.get("a", 1.6), params.get("inner_rotation", np.pi / 4))
        if kind is Kind.OMDC4:
            return _omdc(params.get("radii", OMDC4_RADII), Kind.OMDC4)
        if kind is Kind.OMDC8:
            return _omdc(params.get("radii", OMDC8_RADII), Kind.OMDC8)
        if kind is Kind.MDC_8QAM:
            return _mdc_8qam(params["r"], params["theta1"], params["theta2"])
        base = params["base"]
        if isinstance(base, dict):
            base = build(**base)
        return rotate(base, float(params["theta"]))
    except KeyError as exc:
        raise ParameterError(f"{kind.value} requires parameter {exc.args[0]!r}") from exc


def rotate(base, theta):
    """Multiply every point of `base` by ``exp(j theta)``; labels are kept."""
    meta = {"base_kind": base.kind.value, "base": dict(base.meta), "theta": float(theta)}
    meta["base"] = {k: v for k, v in meta["base"].items() if not k.startswith("levels_")}
    return Constellation(Kind.ROTATED, base.points * np.exp(1j * theta), base.labels, meta)


def psk(q):
    return build(Kind.PSK, q=q)


def rect_qam(q):
    return build(Kind.RECT_QAM, q=q)


def rotated_qam(q, theta):
    """Rectangular `q`-QAM rotated by `theta` radians."""
    return rotate(rect_qam(q), theta)


def dapsk(q_p, q_a, a):
    return build(Kind.DAPSK, q_p=q_p, q_a=q_a, a=a)


def circ8_for_ostbc():
    """Circular 8-QAM for orthogonal codes: ring ratio 1.6, inner ring at 45 degrees."""
    return build(Kind.CIRC_8QAM, a=1.6, inner_rotation=np.pi / 4)


#: ring optimum of the MDC 8-QAM search at r = 1.37
MDC_8QAM_R = 1.37
MDC_8QAM_THETAS_DEG = (12.73, 58.18)
#: optimal rotation of a square QAM for MDC codes, 0.5 * atan(0.5)
QAM_ROTATION = 0.5 * np.arctan(0.5)


def mdc_8qam_optimal():
    return build(Kind.MDC_8QAM, r=MDC_8QAM_R, theta1=np.deg2rad(MDC_8QAM_THETAS_DEG[0]),
                 theta2=np.deg2rad(MDC_8QAM_THETAS_DEG[1]))


def from_spec(spec):
    """Build a constellation from a compact textual or dict description.

    Accepted strings: ``"psk4"``, ``"qam16"``, ``"qam16r"`` (rotated by
    :data:`QAM_ROTATION`), ``"rect8"``, ``"circ8"``, ``"cross32"``, ``"omdc4"``,
    ``"omdc8"``, ``"mdc8"``, ``"dapsk8x2a2.1"`` (q_p x q_a, ring ratio).
    Square sizes of ``"qamN"`` are rectangular; ``"qam8"`` is the circular
    8-QAM for orthogonal codes and ``"qam32"`` the cross constellation.
    A dict is passed through to :func:`build`.
    """
    if isinstance(spec, Constellation):
        return spec
    if isinstance(spec, dict):
        spec = dict(spec)
        return build(spec.pop("kind"), **spec)
    s = str(spec).lower().strip()
    try:
        if s.startswith("psk"):
            return psk(int(s[3:]))
        if s.startswith("qam") and s.endswith("r"):
            return rotated_qam(int(s[3:-1]), QAM_ROTATION)
        if s.startswith("rect"):
            return rect_qam(int(s[4:]))
        if s.startswith("qam"):
            q = int(s[3:])
            if q == 8:
                return circ8_for_ostbc()
            return build(Kind.CROSS_QAM) if q == 32 else rect_qam(q)
        if s == "circ8":
            return circ8_for_ostbc()
        if s == "cross32":
            return build(Kind.CROSS_QAM)
        if s == "omdc4":
            return build(Kind.OMDC4)
        if s == "omdc8":
            return build(Kind.OMDC8)
        if s == "mdc8":
            return mdc_8qam_optimal()
        if s.startswith("dapsk"):
            body = s[5:]
            qs, a = body.split("a")
            q_p, q_a = qs.split("x")
            return dapsk(int(q_p), int(q_a), float(a))
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"cannot parse constellation {spec!r}") from exc
    raise ParameterError(f"unknown constellation {spec!r}")
