"""A compiler for a small functional array language with forward-mode
differentiation, a rewrite-based optimizer and a C back end."""

from .parser import ParseError, parse, parse_type
from .printer import pretty, show_type
from .syntax import alpha_eq

__all__ = ["ParseError", "parse", "parse_type", "pretty", "show_type", "alpha_eq"]
