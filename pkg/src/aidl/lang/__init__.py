"""The .aidl text frontend."""

from .elaborate import Compiled, compile_file, compile_source, elaborate
from .format import format_expr, format_model, model_signature
from .lexer import SourceUnit, tokenize
from .nodes import ast_record
from .parser import parse, parse_text

__all__ = [
    "Compiled", "SourceUnit", "ast_record", "compile_file", "compile_source", "elaborate", "format_expr",
    "format_model", "model_signature", "parse", "parse_text", "tokenize",
]
