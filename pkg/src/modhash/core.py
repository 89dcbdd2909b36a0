"""Keyed modular hashing over Z_k, the Lee metric, and its binary ring coding.

A key is the secret tuple (k, delta, A, U). Hashing a real vector x computes

    floor(A x + U) mod k        (component-wise, mathematical modulo)

With A entries i.i.d. normal of standard deviation 1/delta and U entries
uniform on [0, k), each output component is uniform on Z_k for *every* input,
so a hash reveals nothing without the key. Lee distances between two hashes
of the same key still track the Euclidean distance of the inputs below a
threshold that grows with k; the analysis module quantifies that relation.

The binary ring coding c(.) maps each symbol of Z_k to k/2 bits such that
Hamming distance between codes equals Lee distance between symbols, which
lets a secure Hamming-distance subprotocol stand in for a third party.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatch, InvalidInput, InvalidParameter
from .rng import ChaChaStream, check_seed

DEFAULT_DELTA = math.sqrt(2.0 / math.pi)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_even_k(k) -> int:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise InvalidParameter("k must be an integer")
    if k < 2 or k % 2 != 0:
        raise InvalidParameter(f"k must be an even integer >= 2, got {k}")
    return int(k)


@dataclass(frozen=True, eq=False)
class HashKey:
    """Secret hash key: alphabet size k, scale delta, projection A, dither U.

    A is M x N (one row per hash component), entries finite; every dither
    entry lies in [0, k). Instances are immutable and safe to share across
    threads.
    """

    k: int
    delta: float
    a: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k", _check_even_k(self.k))
        if not (isinstance(self.delta, (int, float)) and math.isfinite(self.delta) and self.delta > 0):
            raise InvalidParameter("delta must be a positive finite real")
        a = _frozen_array(self.a, np.float64)
        u = _frozen_array(self.u, np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidParameter("A must be a 2-D matrix with M, N >= 1")
        if not np.isfinite(a).all():
            raise InvalidParameter("A entries must be finite")
        if u.ndim != 1 or u.shape[0] != a.shape[0]:
            raise DimensionMismatch("U must have one entry per row of A")
        if not np.isfinite(u).all() or (u < 0).any() or (u >= self.k).any():
            raise InvalidParameter("every dither entry must satisfy 0 <= u < k")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "u", u)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def __eq__(self, other):
        if not isinstance(other, HashKey):
            return NotImplemented
        return (
            self.k == other.k
            and self.delta == other.delta
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.u, other.u)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class HashVector:
    """M integers in Z_k: the unit of exchange between parties."""

    k: int
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k", _check_even_k(self.k))
        comps = _frozen_array(self.components, np.int64)
        if comps.ndim != 1 or comps.shape[0] < 1:
            raise InvalidInput("components must be a non-empty 1-D sequence")
        if (comps < 0).any() or (comps >= self.k).any():
            raise InvalidInput("every component must lie in Z_k")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return self.components.shape[0]

    def __eq__(self, other):
        if not isinstance(other, HashVector):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.components, other.components)

    __hash__ = None

    def __len__(self) -> int:
        return self.m


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on {0..size-1}; applying it re-indexes hash components."""

    size: int
    mapping: np.ndarray

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise InvalidParameter("size must be a positive integer")
        object.__setattr__(self, "size", int(self.size))
        mapping = _frozen_array(self.mapping, np.int64)
        if mapping.shape != (self.size,):
            raise InvalidParameter("mapping length must equal size")
        if (mapping < 0).any() or (mapping >= self.size).any() or (
            np.bincount(mapping, minlength=self.size) != 1
        ).any():
            raise InvalidParameter("mapping must be a bijection on {0..size-1}")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        return cls(size, np.arange(size, dtype=np.int64))

    @classmethod
    def random(cls, size: int, stream: ChaChaStream) -> "Permutation":
        return cls(size, stream.permutation_indices(size))

    def inverse(self) -> "Permutation":
        return Permutation(self.size, np.argsort(self.mapping))

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.mapping, other.mapping)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryCode:
    """Concatenated k/2-bit ring codes of a hash vector's components.

    Each block must be the code of some symbol: a prefix run of ones
    (symbols 0..k/2) or a suffix run of ones (symbols k/2+1..k-1).
    """

    k: int
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k", _check_even_k(self.k))
        bits = _frozen_array(self.bits, np.uint8)
        half = self.k // 2
        if bits.ndim != 1 or bits.shape[0] < half or bits.shape[0] % half != 0:
            raise InvalidInput("bit length must be a positive multiple of k/2")
        if (bits > 1).any():
            raise InvalidInput("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)
        _decode_blocks(bits.reshape(-1, half), self.k)  # raises on invalid blocks

    @property
    def m(self) -> int:
        return self.bits.shape[0] // (self.k // 2)

    def __eq__(self, other):
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.bits, other.bits)

    __hash__ = None


def generate_key(k: int, m: int, n: int, seed: bytes, delta: float = DEFAULT_DELTA) -> HashKey:
    """Derive a hash key deterministically from a 32-byte seed.

    A entries are i.i.d. normal with mean 0 and standard deviation 1/delta
    (variance pi/2 at the default delta = sqrt(2/pi)); dither entries are
    i.i.d. uniform on [0, k). The seed feeds a single ChaCha20 stream consumed
    as all of A (row-major) followed by all of U, with normals produced by the
    probit transform; the same (k, m, n, seed, delta) always yields a
    bit-identical key.
    """
    k = _check_even_k(k)
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidParameter("M must be a positive integer")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameter("N must be a positive integer")
    if not (isinstance(delta, (int, float)) and math.isfinite(delta) and delta > 0):
        raise InvalidParameter("delta must be a positive finite real")
    stream = ChaChaStream(check_seed(seed))
    a = stream.standard_normal(int(m) * int(n)).reshape(int(m), int(n)) * (1.0 / delta)
    u = stream.uniform01(int(m)) * k
    return HashKey(k=k, delta=float(delta), a=a, u=u)


def hash_vector(key: HashKey, x) -> HashVector:
    """Hash a length-N real vector: floor(A x + U) mod k, component-wise.

    The modulo is mathematical (result always in {0..k-1}), so arbitrarily
    negative projections still land in Z_k.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInput("input must be a 1-D vector")
    if x.shape[0] != key.n:
        raise DimensionMismatch(f"input has length {x.shape[0]}, key expects {key.n}")
    if not np.isfinite(x).all():
        raise InvalidInput("input entries must be finite")
    z = key.a @ x + key.u
    if not np.isfinite(z).all():
        raise InvalidInput("projection overflowed the floating-point range")
    comps = np.mod(np.floor(z), key.k)
    return HashVector(k=key.k, components=comps.astype(np.int64))


def lee_distance(a: int, b: int, k: int) -> int:
    """Shortest arc between a and b on the ring of circumference k."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidParameter("k must be a positive integer")
    if not (0 <= a < k) or not (0 <= b < k):
        raise InvalidInput("a and b must lie in Z_k")
    d = abs(int(a) - int(b))
    return min(d, int(k) - d)


def _lee_componentwise(c1: np.ndarray, c2: np.ndarray, k: int) -> np.ndarray:
    d = np.abs(c1 - c2)
    return np.minimum(d, k - d)


def mean_lee_distance(h1: HashVector, h2: HashVector) -> Fraction:
    """Exact per-component average Lee distance between two hash vectors.

    Returned as a Fraction so downstream de-obfuscation stays exact; use
    float() for the real view.
    """
    if h1.k != h2.k:
        raise DimensionMismatch(f"alphabet mismatch: {h1.k} vs {h2.k}")
    if h1.m != h2.m:
        raise DimensionMismatch(f"length mismatch: {h1.m} vs {h2.m}")
    total = int(_lee_componentwise(h1.components, h2.components, h1.k).sum())
    return Fraction(total, h1.m)


def apply_permutation(h: HashVector, p: Permutation) -> HashVector:
    """Re-index a hash vector: output component i is input component p.mapping[i]."""
    if p.size != h.m:
        raise DimensionMismatch(f"permutation size {p.size} != vector length {h.m}")
    return HashVector(k=h.k, components=h.components[p.mapping])


def concat_hashes(h: HashVector, z: HashVector) -> HashVector:
    """Stack two hash vectors over the same alphabet."""
    if h.k != z.k:
        raise DimensionMismatch(f"alphabet mismatch: {h.k} vs {z.k}")
    return HashVector(k=h.k, components=np.concatenate([h.components, z.components]))


def _encode_components(comps: np.ndarray, k: int) -> np.ndarray:
    """(M,) symbols -> (M, k/2) bit blocks of the ring code."""
    half = k // 2
    pos = np.arange(1, half + 1, dtype=np.int64)[None, :]
    a = comps[:, None]
    low = a <= half
    bits = np.where(low, pos <= a, pos > (a - half))
    return bits.astype(np.uint8)


def _decode_blocks(blocks: np.ndarray, k: int) -> np.ndarray:
    """(M, k/2) bit blocks -> (M,) symbols; raises InvalidInput on non-codewords."""
    half = k // 2
    ones = blocks.sum(axis=1, dtype=np.int64)
    symbols = np.where(
        ones == 0, 0,
        np.where(ones == half, half, np.where(blocks[:, 0] == 1, ones, k - ones)),
    ).astype(np.int64)
    if not np.array_equal(_encode_components(symbols, k), blocks):
        raise InvalidInput("block is not a ring codeword")
    return symbols


def encode_lee_to_binary(h: HashVector) -> BinaryCode:
    """Ring-encode each component into k/2 bits; Hamming distance between two
    codes then equals the summed Lee distance between the source vectors."""
    bits = _encode_components(h.components, h.k).reshape(-1)
    return BinaryCode(k=h.k, bits=bits)


def decode_binary_to_lee(code: BinaryCode) -> HashVector:
    """Invert encode_lee_to_binary (every block decodes to a unique symbol)."""
    half = code.k // 2
    symbols = _decode_blocks(code.bits.reshape(-1, half), code.k)
    return HashVector(k=code.k, components=symbols)


def hamming_distance(b1: BinaryCode, b2: BinaryCode) -> int:
    """Number of differing bit positions between two equal-shape codes."""
    if b1.k != b2.k:
        raise DimensionMismatch(f"alphabet mismatch: {b1.k} vs {b2.k}")
    if b1.bits.shape != b2.bits.shape:
        raise DimensionMismatch("code lengths differ")
    return int(np.count_nonzero(b1.bits != b2.bits))
