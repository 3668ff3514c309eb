"""Split-TLS over satellite: handshake and content delivery simulator."""

from ._satsplit import (
    CSV_HEADER,
    AuthenticationFailure,
    ConfigError,
    Error,
    FramingError,
    InvalidParameter,
    InvariantViolation,
    UnknownKnob,
    ece_decrypt,
    ece_encrypt,
    handshake,
    knobs,
    page_load,
    run,
    sweep,
)

__all__ = [
    "CSV_HEADER",
    "AuthenticationFailure",
    "ConfigError",
    "Error",
    "FramingError",
    "InvalidParameter",
    "InvariantViolation",
    "UnknownKnob",
    "ece_decrypt",
    "ece_encrypt",
    "handshake",
    "knobs",
    "page_load",
    "run",
    "sweep",
]
