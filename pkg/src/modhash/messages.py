"""Wire-visible protocol vocabulary: roles, protocol kinds, message bodies.

Every message travels inside an Envelope carrying the 16-byte session id, the
protocol kind and the sender role; the recipient is routing metadata only and
never appears on the wire.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction

import numpy as np

from .core import BinaryCode, HashVector, Permutation

SESSION_ID_BYTES = 16


class Role(IntEnum):
    ALICE = 0
    BOB = 1
    CHARLIE = 2


class ProtocolKind(IntEnum):
    FULL_KEY_3P = 0        # Alice shares (k, A, U) with Bob; Charlie averages
    PUBLIC_A_3P = 1        # A is public by reference; secret dither + permutation
    TWO_PARTY_HAMMING = 2  # no third party; secure Hamming oracle on ring codes
    OBFUSCATED_3P = 3      # uniform padding + permutation hide the distance from Charlie


THREE_PARTY_KINDS = frozenset(
    {ProtocolKind.FULL_KEY_3P, ProtocolKind.PUBLIC_A_3P, ProtocolKind.OBFUSCATED_3P}
)


@dataclass(frozen=True, eq=False)
class KeyShare:
    """Key material Alice sends Bob over the confidential channel.

    Exactly one of `a` (explicit M x N matrix) and `a_digest` (content address
    of a public matrix) is set. `permutation` rides along for the public-A and
    obfuscated kinds; `pad1`/`pad2` only for the obfuscated kind.
    """

    k: int
    delta: float
    n: int
    u: np.ndarray
    a: np.ndarray | None = None
    a_digest: bytes | None = None
    permutation: Permutation | None = None
    pad1: HashVector | None = None
    pad2: HashVector | None = None

    @property
    def m(self) -> int:
        return len(self.u)

    def __eq__(self, other):
        if not isinstance(other, KeyShare):
            return NotImplemented
        return (
            self.k == other.k
            and self.delta == other.delta
            and self.n == other.n
            and np.array_equal(self.u, other.u)
            and (
                np.array_equal(self.a, other.a)
                if (self.a is not None and other.a is not None)
                else self.a is other.a is None
            )
            and self.a_digest == other.a_digest
            and self.permutation == other.permutation
            and self.pad1 == other.pad1
            and self.pad2 == other.pad2
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class HashSubmission:
    """A party's hash vector, as delivered to the averaging party."""

    vector: HashVector

    def __eq__(self, other):
        if not isinstance(other, HashSubmission):
            return NotImplemented
        return self.vector == other.vector

    __hash__ = None


@dataclass(frozen=True)
class DistanceResult:
    """Exact mean Lee distance over `count` components, in lowest terms."""

    mean_lee: Fraction
    count: int


@dataclass(frozen=True, eq=False)
class HammingRequest:
    """One party's ring code, forwarded to whoever evaluates the oracle."""

    code: BinaryCode

    def __eq__(self, other):
        if not isinstance(other, HammingRequest):
            return NotImplemented
        return self.code == other.code

    __hash__ = None


@dataclass(frozen=True)
class HammingResponse:
    """The oracle's output: the Hamming distance between both parties' codes."""

    distance: int


@dataclass(frozen=True)
class Abort:
    reason: str


MessageBody = KeyShare | HashSubmission | DistanceResult | HammingRequest | HammingResponse | Abort


@dataclass(frozen=True)
class Envelope:
    """A message in flight. recipient is local routing only, excluded from
    equality and never serialized."""

    session_id: bytes
    kind: ProtocolKind
    sender: Role
    body: MessageBody
    recipient: Role | None = field(default=None, compare=False)

    def addressed_to(self, recipient: Role) -> "Envelope":
        return Envelope(self.session_id, self.kind, self.sender, self.body, recipient)
