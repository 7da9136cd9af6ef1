"""Stdio JSON-lines runner that evaluates solutions in isolated children."""

from .runner import (
    PROTOCOL_VERSION,
    BadRequest,
    ExecRequest,
    evaluate,
    parse_request,
    serve,
)

__version__ = "0.1.0"

__all__ = [
    "PROTOCOL_VERSION",
    "BadRequest",
    "ExecRequest",
    "evaluate",
    "parse_request",
    "serve",
    "__version__",
]
