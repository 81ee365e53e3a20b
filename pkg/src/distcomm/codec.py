"""Random codebooks and the nearest-typical-neighbor decoders.

A codebook is a deterministic function of a shared 64-bit seed: encoder and
decoder regenerate it per block from the seed, so the only shared state is
the seed itself.  Decoding restricts attention to codewords whose empirical
type lies in a per-coordinate window around the source law, then accepts
only a *unique* candidate within the distortion threshold; ties are declared
as erasures rather than broken.

Also houses the scalar grid quantizer and the distortion-inflation margin
used to run real-valued sources through the discrete pipeline.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .prob import (CondPmf, DistortionMatrix, JointPmf, Pmf, check_symbols,
                   empirical_type, is_typical, joint_empirical_type)
from .streams import derive_rng

#: Default cap on M * n symbols per codebook; guards against runaway rates.
MAX_CODEBOOK_SYMBOLS = 1 << 26


def codeword_count(n: int, rate: float) -> int:
    """M = floor(2^(n*rate)) clamped to a minimum of 2, with snapping for
    float artifacts at integer exponents."""
    nr = n * rate
    if nr >= 62:
        # would overflow any practical memory cap anyway
        return 1 << 62
    if abs(nr - round(nr)) < 1e-9:
        m = 1 << int(round(nr))
    else:
        m = int(math.floor(2.0 ** nr))
    return max(m, 2)


@dataclass(frozen=True)
class CodecParams:
    n: int
    rate: float
    eps: float
    target_d: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be >= 1")
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.target_d < 0:
            raise ValueError("target distortion must be >= 0")

    @property
    def codeword_count(self) -> int:
        return codeword_count(self.n, self.rate)


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray  # (M, n) int64
    params: CodecParams
    source: Optional[Pmf] = None
    cond_source: Optional[CondPmf] = None
    coverstory: Optional[np.ndarray] = None

    @property
    def alphabet_size(self) -> int:
        if self.source is not None:
            return self.source.alphabet_size
        if self.cond_source is not None:
            return self.cond_source.alphabet_size
        return int(self.codewords.max()) + 1


class ErasureReason(Enum):
    NO_CANDIDATE = "no_candidate"
    AMBIGUOUS = "ambiguous"
    TRANSMITTER_ATYPICAL = "transmitter_atypical"


@dataclass(frozen=True)
class DecodeOutcome:
    """Either a decoded message index or an erasure with a reason."""

    message: Optional[int]
    erasure: Optional[ErasureReason]

    def __post_init__(self):
        if (self.message is None) == (self.erasure is None):
            raise ValueError("outcome must be exactly one of decoded/erasure")

    @classmethod
    def decoded(cls, message: int) -> "DecodeOutcome":
        return cls(message=message, erasure=None)

    @classmethod
    def erased(cls, reason: ErasureReason) -> "DecodeOutcome":
        return cls(message=None, erasure=reason)

    @property
    def is_decoded(self) -> bool:
        return self.message is not None

    def label(self) -> str:
        if self.is_decoded:
            return f"decoded:{self.message}"
        return f"erasure:{self.erasure.value}"


def _check_capacity(m: int, n: int, cap: int):
    if m * n > cap:
        raise ValueError(
            f"codebook of {m} x {n} symbols exceeds the cap of {cap}; "
            "lower n*rate or raise max_symbols")


def generate_codebook(p_x: Pmf, params: CodecParams,
                      rng: Optional[np.random.Generator] = None,
                      block_index: int = 0,
                      max_symbols: int = MAX_CODEBOOK_SYMBOLS) -> Codebook:
    """Draw M codewords of n iid symbols from p_x.

    With ``rng`` omitted, the stream is derived from (params.seed,
    block_index), so encoder and decoder sharing the seed regenerate the same
    codebook independently per block.
    """
    m = params.codeword_count
    _check_capacity(m, params.n, max_symbols)
    if rng is None:
        rng = derive_rng(params.seed, block_index)
    cdf = np.cumsum(p_x.mass)
    draws = rng.random((m, params.n))
    words = np.minimum(np.searchsorted(cdf, draws, side="right"),
                       p_x.alphabet_size - 1).astype(np.int64)
    words.flags.writeable = False
    return Codebook(codewords=words, params=params, source=p_x)


def generate_codebook_conditional(p_x_given_v: CondPmf, v,
                                  params: CodecParams,
                                  rng: Optional[np.random.Generator] = None,
                                  block_index: int = 0,
                                  max_symbols: int = MAX_CODEBOOK_SYMBOLS) -> Codebook:
    """Draw codewords with position t distributed as the row selected by v_t."""
    va = check_symbols(v, p_x_given_v.n_conditions)
    if va.size != params.n:
        raise ValueError("coverstory length must equal block length")
    m = params.codeword_count
    _check_capacity(m, params.n, max_symbols)
    if rng is None:
        rng = derive_rng(params.seed, block_index)
    cdfs = np.cumsum(p_x_given_v.rows, axis=1)[va]      # (n, |X|)
    draws = rng.random((m, params.n))
    words = (draws[:, :, None] > cdfs[None, :, :]).sum(axis=2)
    words = np.minimum(words, p_x_given_v.alphabet_size - 1).astype(np.int64)
    words.flags.writeable = False
    va = va.copy()
    va.flags.writeable = False
    return Codebook(codewords=words, params=params,
                    cond_source=p_x_given_v, coverstory=va)


def typical_mask(cb: Codebook, p_x: Pmf, eps: float) -> np.ndarray:
    """Boolean mask over messages whose empirical type is within eps of p_x."""
    n = cb.params.n
    ok = np.ones(cb.codewords.shape[0], dtype=bool)
    for a in range(p_x.alphabet_size):
        freq = (cb.codewords == a).sum(axis=1) / n
        ok &= np.abs(freq - p_x.mass[a]) <= eps
    return ok


def restricted_set(cb: Codebook, p_x: Pmf, eps: float) -> np.ndarray:
    """Message indices whose codeword type lies in the typicality window."""
    return np.flatnonzero(typical_mask(cb, p_x, eps))


def conditional_typical_mask(cb: Codebook, p_vx: JointPmf, eps: float) -> np.ndarray:
    """Mask over messages whose joint (coverstory, codeword) type is typical."""
    if cb.coverstory is None:
        raise ValueError("codebook has no coverstory")
    n = cb.params.n
    v = cb.coverstory
    n_v, n_x = p_vx.mass.shape
    ok = np.ones(cb.codewords.shape[0], dtype=bool)
    for s in range(n_v):
        sel = v == s
        for i in range(n_x):
            freq = ((cb.codewords[:, sel] == i).sum(axis=1)) / n
            ok &= np.abs(freq - p_vx.mass[s, i]) <= eps
    return ok


def encode(cb: Codebook, message: int) -> np.ndarray:
    """Codeword for a message index; transmitted even if atypical."""
    if not 0 <= message < cb.codewords.shape[0]:
        raise ValueError("message index out of range")
    return cb.codewords[message]


def codeword_distortions(cb: Codebook, y, d: DistortionMatrix) -> np.ndarray:
    """Average distortion between every codeword and the received sequence."""
    ya = check_symbols(y, d.output_size)
    if ya.size != cb.params.n:
        raise ValueError("received length must equal block length")
    return d.d[cb.codewords, ya[None, :]].mean(axis=1)


def _unique_within(mask: np.ndarray, dists: np.ndarray,
                   threshold: float) -> DecodeOutcome:
    candidates = np.flatnonzero(mask & (dists <= threshold))
    if candidates.size == 0:
        return DecodeOutcome.erased(ErasureReason.NO_CANDIDATE)
    if candidates.size > 1:
        return DecodeOutcome.erased(ErasureReason.AMBIGUOUS)
    return DecodeOutcome.decoded(int(candidates[0]))


def decode_nearest_typical(cb: Codebook, p_x: Pmf, eps: float, target_d: float,
                           d: DistortionMatrix, y) -> DecodeOutcome:
    """Declare the unique typical codeword within the threshold; else erase."""
    mask = typical_mask(cb, p_x, eps)
    dists = codeword_distortions(cb, y, d)
    return _unique_within(mask, dists, target_d)


def decode_conditional(cb: Codebook, p_vx: JointPmf, eps: float,
                       target_d: float, d: DistortionMatrix, v,
                       y) -> DecodeOutcome:
    """Conditional variant: typicality is of the joint (v, codeword) type.

    An atypical coverstory empties the restricted set by construction and is
    reported as its own erasure reason.
    """
    va = check_symbols(v, p_vx.mass.shape[0])
    if cb.coverstory is None or not np.array_equal(va, cb.coverstory):
        raise ValueError("coverstory does not match the codebook")
    p_v = Pmf(p_vx.mass.sum(axis=1) / p_vx.mass.sum())
    if not is_typical(empirical_type(va, p_v.alphabet_size), p_v, eps):
        return DecodeOutcome.erased(ErasureReason.TRANSMITTER_ATYPICAL)
    mask = conditional_typical_mask(cb, p_vx, eps)
    dists = codeword_distortions(cb, y, d)
    return _unique_within(mask, dists, target_d)


# ---------------------------------------------------------------------------
# Scalar quantization for bounded real alphabets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quantizer:
    """Uniform grid of half-open cells [lo + i*delta, lo + (i+1)*delta) on
    [lo, hi); the top endpoint folds into the last cell.  Representatives are
    cell centers."""

    delta: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.hi <= self.lo:
            raise ValueError("support must have positive width")

    @property
    def n_cells(self) -> int:
        return int(math.ceil((self.hi - self.lo) / self.delta - 1e-12))

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_cells) + 0.5) * self.delta

    def cell_pmf(self) -> Pmf:
        """Cell masses for a uniform source on the support."""
        edges = self.lo + np.arange(self.n_cells + 1) * self.delta
        edges = np.minimum(edges, self.hi)
        widths = np.diff(edges)
        return Pmf(widths / widths.sum())

    def distortion_matrix(self, kind: str) -> DistortionMatrix:
        c = self.centers
        diff = c[:, None] - c[None, :]
        if kind == "squared_error":
            return DistortionMatrix(diff ** 2)
        if kind == "absolute_error":
            return DistortionMatrix(np.abs(diff))
        raise ValueError(f"unsupported distortion family {kind!r}")


def quantize_sequence(q: Quantizer, x) -> np.ndarray:
    """Indices of the cells containing each value; values must lie in support."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < q.lo) or np.any(xa > q.hi):
        raise ValueError("value outside quantizer support")
    idx = np.floor((xa - q.lo) / q.delta).astype(np.int64)
    return np.minimum(idx, q.n_cells - 1)


def continuity_margin(kind: str, delta: float, support_width: float) -> float:
    """Uniform bound on distortion inflation caused by grid quantization.

    Quantizing each endpoint moves it by at most delta/2, so the pairwise
    shift is at most delta; the bound is the modulus of continuity of the
    distortion family at that shift, monotone in delta and vanishing with it.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if kind == "squared_error":
        return 2.0 * support_width * delta + delta ** 2
    if kind == "absolute_error":
        return delta
    raise ValueError(f"unsupported distortion family {kind!r}")


# ---------------------------------------------------------------------------
# Codebook export/import for reproducibility audits
# ---------------------------------------------------------------------------

_MAGIC = b"DCCB"
_VERSION = 1
_HEADER = struct.Struct("<4sHIQIQdddd")  # magic, ver, n, M, |X|, seed, rate, eps, D, pad


def export_codebook(cb: Codebook, path) -> None:
    """Write the codebook in the documented binary layout (symbols as bytes)."""
    alpha = cb.alphabet_size
    if alpha > 256:
        raise ValueError("binary export supports alphabets up to 256 symbols")
    m, n = cb.codewords.shape
    header = _HEADER.pack(_MAGIC, _VERSION, n, m, alpha, cb.params.seed,
                          cb.params.rate, cb.params.eps, cb.params.target_d, 0.0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(cb.codewords.astype(np.uint8).tobytes(order="C"))


def import_codebook(path) -> Codebook:
    """Read a codebook written by :func:`export_codebook`."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, n, m, alpha, seed, rate, eps, target_d, _ = \
            _HEADER.unpack(header)
        if magic != _MAGIC:
            raise ValueError("not a codebook file")
        if version != _VERSION:
            raise ValueError(f"unsupported codebook version {version}")
        body = fh.read(m * n)
    if len(body) != m * n:
        raise ValueError("truncated codebook file")
    words = np.frombuffer(body, dtype=np.uint8).reshape(m, n).astype(np.int64)
    if words.size and words.max() >= alpha:
        raise ValueError("symbol out of range in codebook body")
    words.flags.writeable = False
    params = CodecParams(n=n, rate=rate, eps=eps, target_d=target_d, seed=seed)
    return Codebook(codewords=words, params=params)
