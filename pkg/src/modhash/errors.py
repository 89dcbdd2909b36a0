"""Exception hierarchy shared by all modhash modules."""


class ModHashError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(ModHashError):
    """A configuration value is out of its allowed domain (odd k, M <= 0, ...)."""


class InvalidInput(ModHashError):
    """A data value is malformed (non-finite vector, component outside Z_k, ...)."""


class DimensionMismatch(ModHashError):
    """Two objects that must agree on k / length / shape do not."""


class ProtocolViolation(ModHashError):
    """A session received a message it must not accept in its current state.

    Carries the Abort envelopes the session emitted while shutting down, so a
    driver can still deliver them to peers.
    """

    def __init__(self, message, aborts=()):
        super().__init__(message)
        self.aborts = tuple(aborts)


class OracleUnavailable(ModHashError):
    """The secure-Hamming oracle failed or was not provided."""


class TransportClosed(ModHashError):
    """The peer endpoint closed or the connection was lost mid-session."""


class EncodingError(ModHashError):
    """A message cannot be serialized (value exceeds its wire-field range)."""


class DecodeError(ModHashError):
    """Base class for every wire-decoding failure. Decoding never raises
    anything else on arbitrary input bytes."""


class TruncatedFrame(DecodeError):
    """Fewer bytes than the frame header or declared length require."""


class VersionUnsupported(DecodeError):
    """Frame version byte is not a version this build speaks."""


class UnknownMessageType(DecodeError):
    """msg_type byte does not name a defined (family, kind, sender) combination."""


class ComponentOutOfRange(DecodeError):
    """A hash component >= k, or k itself outside the wire's supported range."""


class NonBijectivePermutation(DecodeError):
    """Permutation indices do not form a bijection on {0..size-1}."""


class ZeroDenominator(DecodeError):
    """A wire rational carried denominator 0."""


class MalformedPayload(DecodeError):
    """Payload bytes do not parse as the declared message type."""


class InvalidRingCode(MalformedPayload):
    """A binary block is not the ring encoding of any alphabet symbol."""
