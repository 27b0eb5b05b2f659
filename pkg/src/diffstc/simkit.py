"""Monte Carlo bit error rate experiments.

A :class:`SimConfig` names a scheme, its dimensions, alphabets, channel
and an ``Eb/N0`` grid.  :func:`run_ber` simulates frames in fixed-size
chunks until ``min_bit_errors`` are collected or ``max_frames`` is
reached.  Every chunk draws from its own random substream keyed by
``(seed, grid point, chunk index)``; chunks are merged in index order and
the stopping rule is checked after each one, so results do not depend on
the number of workers.

The SNR convention is ``rho = eta Eb/N0`` with ``eta`` the information
bits per channel use (per time slot).  A frame carries ``frame_len``
data symbols (single antenna) or blocks (multiple antennas) after one
reference symbol or block; the reference carries no data and is never
counted.
"""

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum

import numpy as np

from . import diff_qostbc, diff_stbc, dustm, siso_diff
from .alphabets import Constellation, Kind, from_spec
from .channels import ChannelKind, ChannelModel, RngStream, complex_normal, draw_channel, rff_covariance, \
    transmit, transmit_siso
from .errors import CapacityError, ConfigError, DiffStcError, UnsupportedError
from .stcodes import CODEBOOK_GUARD, make_code

#: two-sided 95% standard normal quantile of the Wilson interval
Z95 = 1.959963984540054

CSV_COLUMNS = ("scheme", "M", "N", "T", "constellation", "metric", "fdts", "ebn0_db", "rho_db", "frames",
               "bits", "bit_errors", "ber", "ber_ci_low", "ber_ci_high", "symbols", "symbol_errors", "ser",
               "seed", "config_hash")

#: data symbols per frame (single antenna) and data blocks per frame (multiple antennas)
SISO_FRAME = 150
MIMO_FRAME = 50
#: approximate number of transmitted symbols per simulation chunk
CHUNK_SYMBOLS = 24000


class Scheme(str, Enum):
    DPSK_MSDD = "DPSK_MSDD"
    DAPSK_MSDD = "DAPSK_MSDD"
    SIMO_COH = "SIMO_COH"
    SIMO_NONCOH = "SIMO_NONCOH"
    DUSTM = "DUSTM"
    OSTBC_UNITARY = "OSTBC_UNITARY"
    OSTBC_QAM = "OSTBC_QAM"
    OMDC = "OMDC"
    QOSTBC_COMBINED = "QOSTBC_COMBINED"
    QOSTBC_UNCOMBINED = "QOSTBC_UNCOMBINED"


class Decoder(str, Enum):
    NEAR_OPTIMAL = "NEAR_OPTIMAL"
    SRSD = "SRSD"
    ML = "ML"


_SISO = {Scheme.DPSK_MSDD, Scheme.DAPSK_MSDD}
_SIMO = {Scheme.SIMO_COH, Scheme.SIMO_NONCOH}
_DEFAULT_CONST = {
    Scheme.DPSK_MSDD: "psk4", Scheme.DAPSK_MSDD: "dapsk8x2a2.1", Scheme.SIMO_COH: "psk4",
    Scheme.SIMO_NONCOH: "psk4", Scheme.DUSTM: None, Scheme.OSTBC_UNITARY: "psk4",
    Scheme.OSTBC_QAM: "qam16", Scheme.OMDC: "omdc4", Scheme.QOSTBC_COMBINED: "qam16r",
    Scheme.QOSTBC_UNCOMBINED: "qam16",
}


def ebn0_to_rho(ebn0_db, eta):
    """Linear SNR ``rho = eta 10^(Eb/N0 / 10)``."""
    if eta <= 0:
        raise ConfigError("eta must be positive")
    return float(eta) * 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)


def rho_to_ebn0(rho, eta):
    """Inverse of :func:`ebn0_to_rho`, in dB."""
    if eta <= 0:
        raise ConfigError("eta must be positive")
    return 10.0 * np.log10(np.asarray(rho, dtype=float) / float(eta))


def wilson_interval(k, n, z=Z95):
    """Wilson score interval of a binomial proportion ``k / n``."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return float(max(0.0, mid - half)), float(min(1.0, mid + half))


@dataclass
class SimConfig:
    """Experiment description; see :meth:`from_dict` for the accepted keys.

    ``constellation`` is a compact string (``"psk4"``, ``"qam16r"``, ...),
    a dict for :func:`diffstc.alphabets.build`, or a list of those (one per
    symbol for mixed alphabets).  ``channel`` is ``{"kind", "fdts"}``.
    ``amplitude`` selects how non-unitary decoders learn the previous
    block amplitude: ``"DECISION"`` (from the previous decision) or
    ``"GENIE"`` (the transmitted value).
    """

    scheme: str
    M: int = None
    N: int = 1
    T: int = 2
    constellation: object = None
    code: str = None
    metric: str = "ML_AWGN"
    mode: str = "COMBINED"
    decoder: str = "NEAR_OPTIMAL"
    amplitude: str = "DECISION"
    channel: dict = field(default_factory=lambda: {"kind": "RBF", "fdts": 0.0})
    ebn0_grid_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    frame_len: int = None
    stop: dict = field(default_factory=lambda: {"min_bit_errors": 200, "max_frames": 10 ** 6})
    seed: int = 1
    u: list = None
    L: int = None
    chunk_frames: int = None
    noise: bool = True
    workers: int = 1

    def __post_init__(self):
        try:
            self.scheme = Scheme(str(self.scheme).upper()).value
        except ValueError as exc:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from exc
        sch = Scheme(self.scheme)
        if self.M is None:
            self.M = 1 if sch in _SISO or sch in _SIMO else (4 if sch in (Scheme.OMDC, Scheme.QOSTBC_COMBINED,
                                                                           Scheme.QOSTBC_UNCOMBINED) else 2)
        if self.constellation is None:
            self.constellation = _DEFAULT_CONST[sch]
        if self.frame_len is None:
            self.frame_len = SISO_FRAME if sch in _SISO or sch in _SIMO else MIMO_FRAME
        ch = {"kind": "RBF", "fdts": 0.0}
        ch.update(self.channel or {})
        ch["kind"] = str(ch["kind"]).upper()
        ch["fdts"] = float(ch.get("fdts", 0.0))
        self.channel = ch
        st = {"min_bit_errors": 200, "max_frames": 10 ** 6}
        st.update(self.stop or {})
        self.stop = {k: int(v) for k, v in st.items()}
        self.ebn0_grid_db = [float(v) for v in np.atleast_1d(self.ebn0_grid_db)]
        for k in ("M", "N", "T", "frame_len", "seed", "workers"):
            setattr(self, k, int(getattr(self, k)))
        self.metric = str(self.metric).upper()
        self.mode = str(self.mode).upper()
        self.decoder = str(self.decoder).upper()
        self.amplitude = str(self.amplitude).upper()

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "scheme" not in d:
            raise ConfigError("config needs a 'scheme'")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        """Content hash of the resolved config (worker count excluded)."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()[:16]

    def constellation_label(self):
        c = self.constellation
        if isinstance(c, (list, tuple)):
            return "/".join(_label(v) for v in c)
        return _label(c)


def _label(c):
    if c is None:
        return ""
    if isinstance(c, dict):
        return ",".join(f"{k}={v}" for k, v in sorted(c.items()))
    if isinstance(c, Constellation):
        return c.kind.value
    return str(c)


@dataclass
class ErrorStats:
    """Error counts of one grid point."""

    ebn0_db: float
    rho: float
    frames: int = 0
    bits: int = 0
    bit_errors: int = 0
    symbols: int = 0
    symbol_errors: int = 0

    def add(self, frames, bits, bit_errors, symbols, symbol_errors):
        self.frames += int(frames)
        self.bits += int(bits)
        self.bit_errors += int(bit_errors)
        self.symbols += int(symbols)
        self.symbol_errors += int(symbol_errors)

    @property
    def ber(self):
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def ser(self):
        return self.symbol_errors / self.symbols if self.symbols else 0.0

    @property
    def ber_ci(self):
        return wilson_interval(self.bit_errors, self.bits)

    @property
    def ser_ci(self):
        return wilson_interval(self.symbol_errors, self.symbols)


@dataclass
class Row:
    """:class:`ErrorStats` with the identifying columns of one CSV line."""

    cfg: SimConfig
    stats: ErrorStats
    flagged: bool = False

    def __getattr__(self, name):
        return getattr(self.__dict__["stats"], name)

    def as_record(self):
        c, s = self.cfg, self.stats
        lo, hi = s.ber_ci
        metric = c.metric if c.scheme in (Scheme.DPSK_MSDD.value, Scheme.DAPSK_MSDD.value) else c.decoder
        return {
            "scheme": c.scheme, "M": c.M, "N": c.N, "T": c.T, "constellation": c.constellation_label(),
            "metric": metric, "fdts": c.channel["fdts"], "ebn0_db": s.ebn0_db,
            "rho_db": 10.0 * np.log10(s.rho), "frames": s.frames, "bits": s.bits,
            "bit_errors": s.bit_errors, "ber": s.ber, "ber_ci_low": lo, "ber_ci_high": hi,
            "symbols": s.symbols, "symbol_errors": s.symbol_errors, "ser": s.ser, "seed": c.seed,
            "config_hash": c.config_hash(),
        }


def _bit_errors(bits_table, a, b):
    return int(np.count_nonzero(bits_table[a] != bits_table[b]))


def _consts(spec, K):
    specs = list(spec) if isinstance(spec, (list, tuple)) else [spec] * K
    if len(specs) != K:
        raise ConfigError(f"expected {K} constellations, got {len(specs)}")
    try:
        return [from_spec(s) for s in specs]
    except DiffStcError as exc:
        raise ConfigError(f"bad constellation {spec!r}: {exc}") from exc


class _Link:
    """Scheme wiring: payload generation, transmission and detection of a batch of frames."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.sch = Scheme(cfg.scheme)
        self.model = ChannelModel(cfg.channel["kind"], cfg.channel["fdts"], cfg.frame_len + 1)
        if cfg.amplitude not in ("DECISION", "GENIE"):
            raise ConfigError("amplitude must be DECISION or GENIE")
        if cfg.frame_len < 1:
            raise ConfigError("frame_len must be positive")
        if self.sch not in _SISO and self.model.kind is not ChannelKind.RBF:
            raise UnsupportedError(f"unsupported metric/channel: {self.sch.value} needs block fading (RBF)")
        getattr(self, "_setup_" + self.sch.value.lower())()

    # -- setup ---------------------------------------------------------------------------------

    def _setup_siso(self, psk):
        c = self.cfg
        if c.M != 1 or c.N != 1:
            raise ConfigError("single-antenna schemes need M = N = 1")
        (self.const,) = _consts(c.constellation, 1)
        try:
            siso_diff.alphabet_split(self.const)
        except DiffStcError as exc:
            raise ConfigError(f"constellation not usable for differential detection: {exc}") from exc
        if psk != self.const.is_constant_envelope:
            raise ConfigError(f"{self.sch.value} needs a {'PSK' if psk else 'DAPSK'} alphabet")
        try:
            metric = siso_diff.Metric(c.metric)
            siso_diff.Mode(c.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if metric is siso_diff.Metric.CORR and not psk:
            raise UnsupportedError("unsupported metric/channel: CORR needs a constant-envelope alphabet")
        if c.T < 2 or c.frame_len % (c.T - 1):
            raise ConfigError("frame_len must be a multiple of T - 1 (T >= 2)")
        # validate the receiver (GLRT over RFF is rejected here)
        self._msdd(1.0)
        self.eta = float(self.const.bits_per_symbol)
        self.bits_per_frame = c.frame_len * self.const.bits_per_symbol
        self.symbols_per_frame = c.frame_len

    def _msdd(self, rho):
        c = self.cfg
        cov = rff_covariance(c.T, c.channel["fdts"]) if c.metric == "ML_RFF" else None
        return siso_diff.MsddConfig(c.T, c.metric, c.mode, rho=rho, cov=cov, channel=self.model.kind)

    def _setup_dpsk_msdd(self):
        self._setup_siso(True)

    def _setup_dapsk_msdd(self):
        self._setup_siso(False)

    def _setup_simo(self):
        c = self.cfg
        if c.M != 1:
            raise ConfigError("SIMO schemes need M = 1")
        (self.const,) = _consts(c.constellation, 1)
        self.eta = float(self.const.bits_per_symbol)
        self.bits_per_frame = c.frame_len * self.const.bits_per_symbol
        self.symbols_per_frame = c.frame_len

    def _setup_simo_coh(self):
        self._setup_simo()

    def _setup_simo_noncoh(self):
        self._setup_simo()
        if not self.const.is_constant_envelope:
            raise ConfigError("SIMO_NONCOH needs a PSK alphabet")

    def _setup_dustm(self):
        c = self.cfg
        if c.u is None:
            eta = 1 if c.L is None else int(np.log2(c.L)) // c.M
            u, L = dustm.table_u(c.M, max(1, eta))
        else:
            u, L = list(c.u), c.L
        if L is None or len(u) != c.M:
            raise ConfigError("DUSTM needs u with M entries and L")
        L = int(L)
        if L & (L - 1):
            raise ConfigError("DUSTM codebook size must be a power of two")
        self.code = dustm.make_cyclic(u, L)
        self.bits_table = np.array([[int(b) for b in s] for s in dustm.complementary_bitmap(L)], dtype=np.uint8)
        self.eta = np.log2(L) / c.M
        self.bits_per_frame = c.frame_len * self.bits_table.shape[1]
        self.symbols_per_frame = c.frame_len

    def _setup_stbc(self, default_code, unitary):
        c = self.cfg
        code = c.code or default_code
        try:
            self.code = make_code(code)
        except (ValueError, DiffStcError) as exc:
            raise ConfigError(f"unknown code {code!r}") from exc
        if self.code.M != c.M:
            raise ConfigError(f"code {self.code.kind.value} has M = {self.code.M}, config says {c.M}")
        self.alph = _consts(c.constellation, self.code.K)
        if unitary and not all(a.is_constant_envelope for a in self.alph):
            raise ConfigError("unitary differential codes need PSK alphabets")
        try:
            self.decoder = Decoder(c.decoder)
        except ValueError as exc:
            raise ConfigError(f"unknown decoder {c.decoder!r}") from exc
        if self.decoder is Decoder.SRSD and not all(a.is_rectangular for a in self.alph):
            raise ConfigError("SRSD needs rectangular QAM")
        if self.decoder is Decoder.ML:
            L = int(np.prod([a.size for a in self.alph]))
            if L > CODEBOOK_GUARD:
                raise CapacityError(f"ML search over {L} codewords exceeds guard {CODEBOOK_GUARD}")
        nb = sum(a.bits_per_symbol for a in self.alph)
        self.eta = nb / self.code.M
        self.bits_per_frame = c.frame_len * nb
        self.symbols_per_frame = c.frame_len * self.code.K

    def _setup_ostbc_unitary(self):
        self._setup_stbc("ALAMOUTI" if self.cfg.M == 2 else "TH4", True)

    def _setup_ostbc_qam(self):
        self._setup_stbc("ALAMOUTI" if self.cfg.M == 2 else "TH4", False)

    def _setup_omdc(self):
        self._setup_stbc("MDC4", False)
        if not self.code.kind.value.startswith("MDC"):
            raise ConfigError("OMDC needs an MDC code")
        if any(a.kind not in (Kind.OMDC4, Kind.OMDC8) for a in self.alph):
            raise ConfigError("OMDC needs an OMDC4 or OMDC8 constellation")

    def _setup_qostbc(self, kind):
        c = self.cfg
        if c.M != 4:
            raise ConfigError("QOSTBC schemes need M = 4")
        (self.const,) = _consts(c.constellation, 1)
        if kind is diff_qostbc.QostbcKind.UNCOMBINED and not self.const.is_rectangular:
            raise ConfigError("uncombined decoding needs rectangular QAM")
        self.qmode = diff_qostbc.QostbcMode.of(kind)
        self.eta = float(self.const.bits_per_symbol)
        self.bits_per_frame = c.frame_len * 4 * self.const.bits_per_symbol
        self.symbols_per_frame = c.frame_len * 4

    def _setup_qostbc_combined(self):
        self._setup_qostbc(diff_qostbc.QostbcKind.COMBINED)

    def _setup_qostbc_uncombined(self):
        self._setup_qostbc(diff_qostbc.QostbcKind.UNCOMBINED)

    # -- simulation ----------------------------------------------------------------------------

    def run(self, B, rho, gen, noise=True):
        """Simulate `B` frames; returns ``(bit_errors, symbol_errors)``."""
        if self.sch in _SISO:
            return self._run_siso(B, rho, gen, noise)
        if self.sch in _SIMO:
            return self._run_simo(B, rho, gen, noise)
        if self.sch is Scheme.DUSTM:
            return self._run_dustm(B, rho, gen, noise)
        if self.sch in (Scheme.QOSTBC_COMBINED, Scheme.QOSTBC_UNCOMBINED):
            return self._run_qostbc(B, rho, gen, noise)
        return self._run_stbc(B, rho, gen, noise)

    def _run_siso(self, B, rho, gen, noise):
        n = self.cfg.frame_len
        info = gen.integers(0, self.const.size, (B, n))
        s = siso_diff.diff_encode(info, self.const, include_reference=True)
        h = draw_channel(self.model, 1, 1, n + 1, gen, batch=B)
        y = transmit_siso(s, h, rho, gen, noise)
        det = siso_diff.msdd_detect_frame(y, self._msdd(rho), self.const)
        return _bit_errors(self.const.bits, info, det), int(np.count_nonzero(info != det))

    def _run_simo(self, B, rho, gen, noise):
        c = self.cfg
        n, N = c.frame_len, c.N
        info = gen.integers(0, self.const.size, (B, n))
        x = self.const.points[info]
        # same draw order as the single-antenna path so that N = 1 reproduces it
        h = complex_normal(gen, (B, N))
        if self.sch is Scheme.SIMO_COH:
            y = transmit_siso(x[..., None], h[:, None, :], rho, gen, noise)
            det = siso_diff.simo_mrc_detect(y, h[:, None, :], self.const, rho)
        else:
            s = siso_diff.diff_encode(info, self.const, include_reference=True)
            y = transmit_siso(s[..., None], h[:, None, :], rho, gen, noise)
            det = siso_diff.simo_diff_detect(y[:, :-1], y[:, 1:], self.const)
        return _bit_errors(self.const.bits, info, det), int(np.count_nonzero(info != det))

    def _mimo_channel(self, S, rho, gen, noise):
        H = draw_channel(self.model, self.cfg.M, self.cfg.N, 1, gen, batch=S.shape[0])
        return transmit(S, H[:, None], rho, gen, noise)

    def _run_dustm(self, B, rho, gen, noise):
        code, n = self.code, self.cfg.frame_len
        z = gen.integers(0, code.L, (B, n))
        x = np.concatenate([np.zeros((B, 1), dtype=np.int64), np.cumsum(z, axis=1) % code.L], axis=1)
        S = code.diag_power(x)[..., None] * np.eye(code.M)
        Y = self._mimo_channel(S, rho, gen, noise)
        det = dustm.dustm_ml_decode(Y[:, :-1], Y[:, 1:], code)
        return _bit_errors(self.bits_table, z, det), int(np.count_nonzero(z != det))

    def _run_stbc(self, B, rho, gen, noise):
        code, n = self.code, self.cfg.frame_len
        idx = np.stack([gen.integers(0, a.size, (B, n)) for a in self.alph], axis=-1)
        V = diff_stbc.info_matrices(code, self.alph, idx)
        unitary = self.sch is Scheme.OSTBC_UNITARY
        S, amp = diff_stbc.encode_sequence(V, unitary=unitary)
        Y = self._mimo_channel(S, rho, gen, noise)
        if unitary:
            det = diff_stbc.decode_fast_ml_unitary(Y[:, :-1], Y[:, 1:], code, self.alph)
        elif self.cfg.amplitude == "GENIE":
            det = self._decode_stbc(Y[:, :-1], Y[:, 1:], amp[:, :-1], rho)
        else:
            det = np.empty_like(idx)
            a_prev = np.ones(B)
            for t in range(n):
                det[:, t] = self._decode_stbc(Y[:, t], Y[:, t + 1], a_prev, rho)
                Vh = diff_stbc.info_matrices(code, self.alph, det[:, t])
                a_prev = np.sqrt(np.sum(np.abs(Vh) ** 2, axis=(-2, -1)) / code.M)
        errs = sum(_bit_errors(a.bits, idx[..., k], det[..., k]) for k, a in enumerate(self.alph))
        return errs, int(np.count_nonzero(idx != det))

    def _decode_stbc(self, Yp, Yc, a_prev, rho):
        if self.decoder is Decoder.SRSD:
            return diff_stbc.decode_srsd(Yp, Yc, self.code, self.alph, a_prev)
        if self.decoder is Decoder.ML:
            return diff_stbc.decode_ml_nonunitary(Yp, Yc, self.code, self.alph, rho, a_prev)
        return diff_stbc.decode_near_optimal(Yp, Yc, self.code, self.alph, a_prev)

    def _run_qostbc(self, B, rho, gen, noise):
        n, const = self.cfg.frame_len, self.const
        idx = gen.integers(0, const.size, (B, n, 4))
        S, A1, A2 = diff_qostbc.encode_sequence(self.qmode, const.points[idx])
        Y = self._mimo_channel(S, rho, gen, noise)
        combined = self.qmode.mode is diff_qostbc.QostbcKind.COMBINED
        decode = diff_qostbc.decode_combined if combined else diff_qostbc.decode_uncombined
        if self.cfg.amplitude == "GENIE":
            det = decode(diff_qostbc.subsystem_split(Y[:, :-1]), diff_qostbc.subsystem_split(Y[:, 1:]),
                         const, A1[:, :-1], A2[:, :-1])
        else:
            det = np.empty_like(idx)
            a1, a2 = np.ones(B), np.ones(B)
            for t in range(n):
                det[:, t] = decode(diff_qostbc.subsystem_split(Y[:, t]), diff_qostbc.subsystem_split(Y[:, t + 1]),
                                   const, a1, a2)
                _, _, a1, a2 = diff_qostbc.make_info_submatrices(self.qmode, const.points[det[:, t]], check=False)
                a1 = np.maximum(a1, 1e-12)
                a2 = np.maximum(a2, 1e-12)
        return _bit_errors(const.bits, idx, det), int(np.count_nonzero(idx != det))


def build_link(cfg):
    """Validate `cfg` and return the scheme wiring (raises before any simulation)."""
    if not cfg.ebn0_grid_db:
        raise ConfigError("ebn0 grid is empty")
    if cfg.stop["min_bit_errors"] < 0 or cfg.stop["max_frames"] < 1:
        raise ConfigError("invalid stopping rule")
    return _Link(cfg)


def spectral_efficiency(cfg):
    """Information bits per channel use of the configured scheme."""
    return build_link(cfg).eta


def bits_per_frame(cfg):
    return build_link(cfg).bits_per_frame


def _chunk_frames(cfg, link):
    if cfg.chunk_frames:
        return int(cfg.chunk_frames)
    per_frame = (cfg.frame_len + 1) * max(cfg.M, 1)
    return max(1, CHUNK_SYMBOLS // per_frame)


def run_ber(cfg, noise=None):
    """Simulate every grid point of `cfg`.

    Parameters
    ----------
    cfg : SimConfig
    noise : bool, optional
        Override ``cfg.noise`` (noiseless runs are a test hook).

    Returns
    -------
    list of Row
        One row per grid point; each satisfies ``bit_errors >= min_bit_errors``
        or ``frames == max_frames``.  Rows are flagged when the BER at the
        highest SNR exceeds the BER at the lowest.
    """
    link = build_link(cfg)
    noise = cfg.noise if noise is None else bool(noise)
    chunk = _chunk_frames(cfg, link)
    max_frames, min_err = cfg.stop["max_frames"], cfg.stop["min_bit_errors"]
    rows = []
    for gi, ebn0 in enumerate(cfg.ebn0_grid_db):
        rho = float(ebn0_to_rho(ebn0, link.eta))
        stats = ErrorStats(ebn0, rho)
        base = RngStream(cfg.seed, gi)

        def work(ci):
            B = min(chunk, max_frames - ci * chunk)
            be, se = link.run(B, rho, base.child(ci).generator(), noise)
            return B, be, se

        n_chunks = -(-max_frames // chunk)
        ci = 0
        pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        try:
            while ci < n_chunks and (stats.frames == 0 or stats.bit_errors < min_err):
                wave = range(ci, min(n_chunks, ci + max(1, cfg.workers)))
                results = list(pool.map(work, wave)) if pool else [work(k) for k in wave]
                for B, be, se in results:
                    stats.add(B, B * link.bits_per_frame, be, B * link.symbols_per_frame, se)
                    ci += 1
                    if stats.bit_errors >= min_err:
                        break
        finally:
            if pool:
                pool.shutdown()
        rows.append(Row(cfg, stats))
    if len(rows) > 1 and rows[-1].stats.ber > rows[0].stats.ber and cfg.ebn0_grid_db[-1] > cfg.ebn0_grid_db[0]:
        rows[-1].flagged = True
    return rows


def write_csv(rows, path, append=False, meta=None):
    """Write rows with the fixed column schema.

    With `append`, rows are added to an existing file and the header is
    only written when the file is new or empty.  `meta` lines are written
    as ``#`` comments before the rows (readers skip them).

    Raises
    ------
    OSError
        With the offending path in the message.
    """
    path = os.fspath(path)
    try:
        exists = append and os.path.exists(path) and os.path.getsize(path) > 0
        with open(path, "a" if append else "w", newline="") as fh:
            for line in meta or ():
                fh.write(f"# {line}\n")
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            if not exists:
                w.writeheader()
            for r in rows:
                w.writerow(r.as_record() if isinstance(r, Row) else r)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path):
    """Rows of a file written by :func:`write_csv` as dicts of strings."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def config_header(cfg):
    """Comment lines embedding the resolved config and its hash."""
    return [f"config_hash {cfg.config_hash()}", "config " + json.dumps(cfg.to_dict(), sort_keys=True)]


def snr_at_ber(rows, target, x="ebn0_db"):
    """Log-linear interpolation of the SNR at which the BER crosses `target`.

    Returns ``nan`` when the curve does not cross the target.
    """
    pts = [(r.as_record()[x], r.stats.ber) for r in rows if r.stats.ber > 0]
    for (x0, b0), (x1, b1) in zip(pts, pts[1:]):
        if b0 >= target >= b1 and b0 != b1:
            f = (np.log10(b0) - np.log10(target)) / (np.log10(b0) - np.log10(b1))
            return float(x0 + f * (x1 - x0))
    return float("nan")
