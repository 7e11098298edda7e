"""Command line interface and circuit file format."""

from .circuit import Circuit, CircuitSyntaxError, parse_circuit, parse_circuit_text, serialize_circuit
from .main import main, run

__all__ = ["Circuit", "CircuitSyntaxError", "main", "parse_circuit", "parse_circuit_text", "run", "serialize_circuit"]
