"""Reader and writer for ``.hist`` circuit files.

A circuit file has bracketed sections::

    [system]
    qubits = 2            # or: dim = 3
    factors = 2 2         # optional subsystem dimensions

    [params]
    alpha = 0.6           # names usable in any numeric expression

    [initial]
    state = qubit(alpha, beta) bell00

    [steps]
    gate H 0
    measure all           # closes time slot t1
    gate CNOT 0 1
    unitary [[1, 0], [0, 1j]] on 1
    measure 0 1 t2        # trailing non-integer token names the time

    [options]
    tol = 1e-10
    log_base = 2
    shots = 40000
    seed = 7

Gates between two ``measure`` lines compose into one evolution operator.
The last step must be a ``measure``.  ``#`` starts a comment.
"""

from __future__ import annotations

import ast
import cmath
import math
import operator
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..model import (
    GATES,
    ScheduleError,
    SystemSchedule,
    basis_observable,
    computational_observable,
    embed_gate,
    identity,
    validate,
)

__all__ = [
    "CircuitSyntaxError",
    "Circuit",
    "parse_circuit",
    "parse_circuit_text",
    "serialize_circuit",
    "bundled_circuits",
    "resolve_circuit_path",
]

SECTIONS = ("system", "params", "initial", "steps", "options")
OPTION_TYPES = {"tol": float, "prune_tol": float, "log_base": float, "shots": int, "seed": int}


class CircuitSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True, eq=False)
class Circuit:
    schedule: SystemSchedule
    name: str = "circuit"
    options: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    measured_wires: tuple = ()


# --------------------------------------------------------------------------
# numeric expressions

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"sqrt": cmath.sqrt, "exp": cmath.exp, "cos": cmath.cos, "sin": cmath.sin, "conj": lambda z: complex(z).conjugate()}
_CONSTS = {"pi": math.pi, "e": math.e, "j": 1j, "i": 1j}


def _eval_node(node, names: dict):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, names)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, names), _eval_node(node.right, names))
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ValueError(f"unknown name {node.id!r}")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
        args = [_eval_node(a, names) for a in node.args]
        out = _FUNCS[node.func.id](*args)
        return out.real if isinstance(out, complex) and out.imag == 0 and node.func.id == "sqrt" else out
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval_node(e, names) for e in node.elts]
    raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")


def evaluate(text: str, names: dict | None = None):
    """Evaluate a numeric expression (numbers, + - * / **, sqrt, exp, pi, j)."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}") from exc
    return _eval_node(tree, names or {})


# --------------------------------------------------------------------------
# initial states

_S2 = 1 / math.sqrt(2)
_NAMED = {
    "+": np.array([_S2, _S2]),
    "-": np.array([_S2, -_S2]),
    "bell00": np.array([_S2, 0, 0, _S2]),
    "bell01": np.array([0, _S2, _S2, 0]),
    "bell10": np.array([_S2, 0, 0, -_S2]),
    "bell11": np.array([0, _S2, -_S2, 0]),
}


def _split_tokens(text: str) -> list:
    """Split on whitespace outside parentheses/brackets."""
    out, depth, cur = [], 0, ""
    for c in text:
        if c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
        if c.isspace() and depth == 0:
            if cur:
                out.append(cur)
            cur = ""
        else:
            cur += c
    if depth != 0:
        raise ValueError(f"unbalanced brackets in {text!r}")
    if cur:
        out.append(cur)
    return out


def _state_factor(token: str, names: dict) -> np.ndarray:
    if token in _NAMED:
        return _NAMED[token].astype(complex)
    if token and set(token) <= {"0", "1"}:
        v = np.zeros(2 ** len(token), dtype=complex)
        v[int(token, 2)] = 1
        return v
    for fn in ("qubit", "vector", "basis"):
        if token.startswith(fn + "(") and token.endswith(")"):
            args = evaluate("[" + token[len(fn) + 1 : -1] + "]", names)
            if fn == "qubit":
                if len(args) != 2:
                    raise ValueError("qubit(alpha, beta) takes two amplitudes")
                return np.array(args, dtype=complex)
            if fn == "vector":
                return np.array(args, dtype=complex)
            if len(args) != 2:
                raise ValueError("basis(index, dim) takes two integers")
            v = np.zeros(int(args[1].real if isinstance(args[1], complex) else args[1]), dtype=complex)
            v[int(args[0].real if isinstance(args[0], complex) else args[0])] = 1
            return v
    raise ValueError(f"unknown state {token!r}")


# --------------------------------------------------------------------------
# parsing


def _logical_lines(text: str):
    """Yield ``(line_number, content)`` with comments stripped and bracketed continuations joined."""
    buf, start, depth = "", 0, 0
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip() and not buf:
            continue
        if not buf:
            start = no
        buf = f"{buf} {line.strip()}" if buf else line.strip()
        depth += line.count("[") + line.count("(") - line.count("]") - line.count(")")
        is_header = buf.startswith("[") and buf.endswith("]") and buf[1:-1].strip() in SECTIONS
        if depth <= 0 or is_header:
            yield start, buf
            buf, depth = "", 0
    if buf:
        raise CircuitSyntaxError("unbalanced brackets at end of file", start)


def _key_value(line: str, no: int) -> tuple:
    if "=" not in line:
        raise CircuitSyntaxError(f"expected 'key = value', got {line!r}", no)
    k, v = line.split("=", 1)
    return k.strip(), v.strip()


def parse_circuit_text(text: str, name: str = "circuit", overrides: dict | None = None, tol: float | None = None) -> Circuit:
    """Parse circuit text into a validated :class:`Circuit`.

    ``overrides`` replaces entries of the ``[params]`` section.
    """
    section = None
    system: dict = {}
    params: dict = {}
    initial_line: tuple | None = None
    steps: list = []
    options: dict = {}
    for no, line in _logical_lines(text):
        if line.startswith("[") and line.endswith("]") and line[1:-1].strip() in SECTIONS:
            section = line[1:-1].strip()
            continue
        if section is None:
            raise CircuitSyntaxError("content before the first [section]", no)
        if section == "system":
            k, v = _key_value(line, no)
            system[k] = (v, no)
        elif section == "params":
            k, v = _key_value(line, no)
            if not k.isidentifier():
                raise CircuitSyntaxError(f"bad parameter name {k!r}", no)
            try:
                params[k] = evaluate(v, params)
            except ValueError as exc:
                raise CircuitSyntaxError(str(exc), no) from None
        elif section == "initial":
            k, v = _key_value(line, no)
            if k != "state":
                raise CircuitSyntaxError(f"unknown initial-state key {k!r}", no)
            initial_line = (v, no)
        elif section == "steps":
            steps.append((no, line))
        elif section == "options":
            k, v = _key_value(line, no)
            if k not in OPTION_TYPES:
                raise CircuitSyntaxError(f"unknown option {k!r}", no)
            try:
                options[k] = float(v) if OPTION_TYPES[k] is float else int(v)
            except ValueError:
                raise CircuitSyntaxError(f"bad value for option {k!r}: {v!r}", no) from None

    for k, v in (overrides or {}).items():
        params[k] = v
    if options.get("log_base", 2) != 2:
        raise CircuitSyntaxError("log_base is locked to 2")

    # system
    if "qubits" in system and "dim" in system:
        raise CircuitSyntaxError("give either qubits or dim, not both", system["dim"][1])
    n_qubits = None
    try:
        if "qubits" in system:
            n_qubits = int(system["qubits"][0])
            dim = 2**n_qubits
        elif "dim" in system:
            dim = int(system["dim"][0])
        else:
            raise CircuitSyntaxError("[system] needs 'qubits' or 'dim'")
        factors = tuple(int(x) for x in system["factors"][0].split()) if "factors" in system else ()
    except ValueError as exc:
        raise CircuitSyntaxError(f"bad [system] entry: {exc}") from None
    if not factors and n_qubits and n_qubits > 1:
        factors = (2,) * n_qubits
    if factors and math.prod(factors) != dim:
        line = system["factors"][1] if "factors" in system else None
        raise CircuitSyntaxError(f"factors {list(factors)} do not multiply to dimension {dim}", line)

    # initial state
    if initial_line is None:
        raise CircuitSyntaxError("missing [initial] state")
    v_text, no = initial_line
    try:
        psi = np.ones(1, dtype=complex)
        for tok in _split_tokens(v_text):
            psi = np.kron(psi, _state_factor(tok, params))
    except ValueError as exc:
        raise CircuitSyntaxError(str(exc), no) from None
    if psi.shape[0] != dim:
        raise CircuitSyntaxError(f"initial state has dimension {psi.shape[0]}, system has {dim}", no)

    # steps
    unitaries, observables, times, wires_out = [], [], [], []
    current = identity(dim)
    pending = False
    for no, line in steps:
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if head == "gate":
                current = _gate_step(rest, n_qubits, params) @ current
                pending = True
            elif head == "unitary":
                current = _unitary_step(rest, dim, n_qubits, params) @ current
                pending = True
            elif head == "measure":
                obs, label, wires = _measure_step(rest, dim, n_qubits)
                unitaries.append(current)
                observables.append(obs)
                times.append(label or f"t{len(times) + 1}")
                wires_out.append(wires)
                current = identity(dim)
                pending = False
            else:
                raise ValueError(f"unknown step {head!r}")
        except (ValueError, KeyError) as exc:
            raise CircuitSyntaxError(str(exc).strip("'\""), no) from None
    if not observables:
        raise CircuitSyntaxError("circuit has no measure step")
    if pending:
        raise CircuitSyntaxError("the final step must be a measure", steps[-1][0])

    schedule = SystemSchedule(dim, psi, tuple(unitaries), tuple(observables), tuple(times), factors)
    problems = validate(schedule, tol if tol is not None else options.get("tol", 1e-10))
    if problems:
        raise ScheduleError("invalid circuit: " + "; ".join(str(p) for p in problems), problems)
    return Circuit(schedule, name, options, params, tuple(wires_out))


def _wires(tokens: list, n_qubits: int | None) -> list:
    if n_qubits is None:
        raise ValueError("gates on wires need a qubit system")
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ValueError(f"bad wire list {' '.join(tokens)!r}") from None


def _gate_step(rest: str, n_qubits, params) -> np.ndarray:
    tokens = rest.split()
    if not tokens:
        raise ValueError("gate needs a name")
    name = tokens[0].upper()
    if name not in GATES:
        raise ValueError(f"unknown gate {tokens[0]!r}; known: {', '.join(sorted(GATES))}")
    return embed_gate(GATES[name], _wires(tokens[1:], n_qubits), n_qubits)


def _unitary_step(rest: str, dim: int, n_qubits, params) -> np.ndarray:
    body, sep, on = rest.rpartition(" on ")
    if not sep:
        body, on = rest, ""
    m = np.array(evaluate(body, params), dtype=complex)
    if m.ndim != 2:
        raise ValueError("unitary needs a matrix literal [[...], ...]")
    if on.strip():
        return embed_gate(m, _wires(on.split(), n_qubits), n_qubits)
    if m.shape != (dim, dim):
        raise ValueError(f"unitary of shape {m.shape} on a {dim}-dimensional system")
    return m


def _measure_step(rest: str, dim: int, n_qubits):
    tokens = rest.split()
    label = None
    if tokens and tokens[-1] != "all" and not tokens[-1].lstrip("-").isdigit():
        label = tokens.pop()
    if tokens == ["all"]:
        if n_qubits is None:
            return basis_observable(dim), label, None
        wires = list(range(n_qubits))
    elif not tokens:
        raise ValueError("measure needs wires or 'all'")
    else:
        wires = _wires(tokens, n_qubits)
    return computational_observable(n_qubits, wires), label, tuple(wires)


# --------------------------------------------------------------------------
# files


def bundled_circuits() -> list:
    root = resources.files("qhist") / "circuits"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".hist"))


def resolve_circuit_path(spec: str) -> Path:
    """A filesystem path, or the name of a bundled circuit (``entangler``)."""
    p = Path(spec)
    if p.exists():
        return p
    name = spec if spec.endswith(".hist") else spec + ".hist"
    ref = resources.files("qhist") / "circuits" / name
    if ref.is_file():
        return Path(str(ref))
    raise FileNotFoundError(f"no circuit file {spec!r} (bundled: {', '.join(bundled_circuits())})")


def parse_circuit(path, overrides: dict | None = None, tol: float | None = None) -> Circuit:
    p = resolve_circuit_path(str(path))
    return parse_circuit_text(p.read_text(), name=p.stem, overrides=overrides, tol=tol)


def _num(z: complex) -> str:
    z = complex(z)
    return repr(z.real) if z.imag == 0 else repr(z)


def serialize_circuit(circuit: Circuit) -> str:
    """Canonical text form: explicit state vector and one unitary per slot."""
    s = circuit.schedule
    lines = ["[system]"]
    nq = s.n_qubits if circuit.measured_wires and any(w is not None for w in circuit.measured_wires) else None
    lines.append(f"qubits = {nq}" if nq is not None else f"dim = {s.dim}")
    if s.factors:
        lines.append("factors = " + " ".join(str(f) for f in s.factors))
    lines += ["", "[initial]", "state = vector(" + ", ".join(_num(z) for z in s.initial_state) + ")", "", "[steps]"]
    for k, (u, t) in enumerate(zip(s.unitaries, s.times)):
        rows = ", ".join("[" + ", ".join(_num(z) for z in row) + "]" for row in u)
        lines.append(f"unitary [{rows}]")
        wires = circuit.measured_wires[k] if k < len(circuit.measured_wires) else None
        lines.append(f"measure {'all' if wires is None else ' '.join(str(w) for w in wires)} {t}")
    if circuit.options:
        lines += ["", "[options]"]
        lines += [f"{k} = {v!r}" for k, v in sorted(circuit.options.items())]
    return "\n".join(lines) + "\n"
