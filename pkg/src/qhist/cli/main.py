"""``qhist`` command line: histories, probabilities, entropies, verification.

Exit codes: 0 ok, 1 usage error, 2 invalid circuit / query or zero
probability, 3 verification residual above ``VERIFY_LIMIT``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from ..chains import all_sequences, chain_probability
from ..density import (
    NonFactorableError,
    PositivityError,
    SubsystemSplit,
    entropy,
    from_pure,
    measure_update,
    partial_probability_rho,
    reduce,
    unknown_result_update,
)
from ..histvec import (
    BasisSizeError,
    SequenceProjector,
    ZeroProbabilityError,
    build_history_vector,
    collapse,
    conditional_probability,
    partial_sequence_probability,
    sequence_probability,
    time_project,
)
from ..linalg import DEFAULT_TOL
from ..model import ScheduleError
from ..oracle import enumerate_tree_with_residual, sample
from .circuit import CircuitSyntaxError, evaluate, parse_circuit
from .report import Report, fmt, fmt_complex

VERIFY_LIMIT = 1e-8
TOL_ENV = "QHIST_TOL"

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# argument helpers


def _tolerance(args, circuit_options: dict | None = None) -> float:
    if args.tol is not None:
        return args.tol
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            return float(env)
        except ValueError:
            raise UsageError(f"{TOL_ENV}={env!r} is not a number") from None
    if circuit_options and "tol" in circuit_options:
        return float(circuit_options["tol"])
    return DEFAULT_TOL


def _params(items) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip().isidentifier():
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = evaluate(value)
        except ValueError as exc:
            raise UsageError(f"--param {item!r}: {exc}") from None
    return out


def _default_split(schedule, text: str | None):
    if text is None:
        if len(schedule.factors) != 2:
            raise UsageError("--split is required unless the system has exactly two factors")
        text = "1|2"
    return SubsystemSplit.parse(schedule, text)


def _projector(schedule, items, split_text: str | None, flag: str) -> SequenceProjector:
    """Assemble ``SLOT=LABEL`` constraints.

    LABEL is a joint outcome label, a shell pattern, or a local outcome
    suffixed with the side (``0A``, ``1B``) which needs a subsystem split.
    """
    fixed: dict = {}
    split = None
    for item in items or ():
        slot_text, sep, value = item.partition("=")
        if not sep or not value:
            raise UsageError(f"{flag} expects SLOT=LABEL, got {item!r}")
        try:
            k = schedule.slot(slot_text.strip())
        except KeyError as exc:
            raise UsageError(f"{flag} {item!r}: {exc.args[0]}") from None
        value = value.strip()
        labels = schedule.observables[k].labels
        if value in labels:
            admitted = frozenset([value])
        elif any(c in value for c in "?*["):
            admitted = SequenceProjector.of(schedule, {k: value}).fixed[k]
        elif len(value) > 1 and value[-1] in "AB":
            if split is None:
                split = _default_split(schedule, split_text)
            try:
                admitted = split.joint_labels(k, value[-1], value[:-1])
            except KeyError as exc:
                raise UsageError(f"{flag} {item!r}: {exc.args[0]}") from None
        else:
            raise UsageError(f"{flag} {item!r}: unknown outcome; valid: {', '.join(labels)}")
        fixed[k] = fixed[k] & admitted if k in fixed else admitted
        if not fixed[k]:
            raise UsageError(f"{flag}: constraints at {schedule.times[k]} admit no outcome")
    return SequenceProjector(fixed)


def _slots(schedule, text: str | None):
    if text is None:
        return None
    try:
        return [schedule.slot(t.strip()) for t in text.split(",") if t.strip()]
    except KeyError as exc:
        raise UsageError(f"--slots: {exc.args[0]}") from None


# --------------------------------------------------------------------------
# rendering helpers


def _seq_cells(seq, slots, final: int, final_obs) -> list:
    cells = []
    for k, label in zip(slots, seq.labels):
        if k == final and seq.final_index is not None and final_obs.rank(label) > 1:
            label = f"{label}#{seq.final_index}"
        cells.append(label)
    return cells


def history_table(hv) -> tuple:
    final = hv.schedule.n - 1
    columns = ["index"] + [hv.schedule.times[k] for k in hv.slots] + ["amp_re", "amp_im", "probability"]
    rows = []
    for i, (seq, a) in enumerate(hv.items(), 1):
        rows.append([i] + _seq_cells(seq, hv.slots, final, hv.schedule.observables[final]) + [a.real, a.imag, abs(a) ** 2])
    return columns, rows


def history_diagram(hv, marked) -> list:
    """One column per slot, one line per history; ``*`` marks measured or fixed slots."""
    final = hv.schedule.n - 1
    times = [hv.schedule.times[k] for k in hv.slots]
    cells = [_seq_cells(seq, hv.slots, final, hv.schedule.observables[final]) for seq, _ in hv.items()]
    widths = [max([len(t)] + [len(c[j]) for c in cells]) for j, t in enumerate(times)]
    amps = [fmt_complex(a) for _, a in hv.items()]
    probs = [fmt(abs(a) ** 2) for _, a in hv.items()]
    wa = max([len("amplitude")] + [len(a) for a in amps])
    wp = max([len("probability")] + [len(p) for p in probs])
    tag = max(len(f"[{len(cells)}]"), 3)
    lead = " " * (tag + len(" psi"))
    join = "    "
    out = [
        lead + join + join.join(t.center(w) for t, w in zip(times, widths)) + "  " + "amplitude".rjust(wa) + "  " + "probability".rjust(wp),
        lead + join + join.join(("*" if k in marked else ".").center(w) for k, w in zip(hv.slots, widths)),
    ]
    for i, (c, a, p) in enumerate(zip(cells, amps, probs), 1):
        nodes = " -- ".join(x.center(w) for x, w in zip(c, widths))
        out.append(f"[{i}]".rjust(tag) + " psi -- " + nodes + "  " + a.rjust(wa) + "  " + p.rjust(wp))
    return out


def _base_report(command: str, circuit, tol: float) -> Report:
    s = circuit.schedule
    r = Report(command)
    r.add("circuit", circuit.name)
    r.add("dim", s.dim)
    r.add("factors", " ".join(str(f) for f in s.factors) if s.factors else "-")
    r.add("times", " ".join(s.times))
    for name, value in sorted(circuit.params.items()):
        r.add(f"param.{name}", complex(value) if complex(value).imag else complex(value).real)
    r.add("tol", tol)
    return r


def _build(circuit, tol: float):
    prune = float(circuit.options.get("prune_tol", 1e-12))
    return build_history_vector(circuit.schedule, prune_tol=prune)


# --------------------------------------------------------------------------
# commands


def cmd_histories(circuit, args, tol: float, content_only: bool = False) -> Report:
    s = circuit.schedule
    hv = _build(circuit, tol)
    proj = _projector(s, args.fix, args.split, "--fix")
    r = _base_report("content" if content_only else "histories", circuit, tol)
    r.add("fix", proj.describe(s.times))
    marked = set(range(s.n))
    if proj.fixed:
        p = partial_sequence_probability(hv, proj)
        r.add("fix_probability", p)
        filtered = collapse(hv, proj)
        reduced = time_project(filtered, proj.slots)
        r.add("n_histories", len(filtered))
        if not content_only:
            c, rows = history_table(filtered)
            r.table("histories", c, rows)
        c, rows = history_table(reduced)
        r.table("reduced_content", c, rows)
        r.diagram("reduced_content", history_diagram(reduced, set(proj.slots) | {s.n - 1}))
        if not content_only:
            r.diagram("histories", history_diagram(filtered, marked))
        return r
    r.add("n_histories", len(hv))
    r.add("norm", hv.norm())
    c, rows = history_table(hv)
    r.table("content" if content_only else "histories", c, rows)
    if not content_only:
        r.diagram("histories", history_diagram(hv, marked))
    return r


def cmd_prob(circuit, args, tol: float) -> Report:
    s = circuit.schedule
    if args.given and not args.query:
        raise UsageError("--given needs --query")
    if args.query and args.fix:
        raise UsageError("use either --fix or --query/--given")
    if not (args.fix or args.query):
        raise UsageError("prob needs --fix or --query")
    mode = args.mode or "pure"
    if mode == "measured":
        raise UsageError("prob supports --mode pure or unknown-result")
    hv = _build(circuit, tol)
    r = _base_report("prob", circuit, tol)
    r.add("mode", mode)
    rho = None
    if mode == "unknown-result":
        rho = unknown_result_update(from_pure(hv), _slots(s, args.slots))
        r.add("dephased", " ".join(s.times[k] for k in rho_slots(s, args.slots)))
    if args.fix:
        proj = _projector(s, args.fix, args.split, "--fix")
        r.add("query", proj.describe(s.times))
        p = partial_sequence_probability(hv, proj) if rho is None else partial_probability_rho(rho, proj)
        r.add("probability", p)
        return r
    query = _projector(s, args.query, args.split, "--query")
    given = _projector(s, args.given, args.split, "--given")
    r.add("query", query.describe(s.times))
    r.add("given", given.describe(s.times))
    if rho is None:
        pg = partial_sequence_probability(hv, given) if given.fixed else 1.0
        p = conditional_probability(hv, given, query) if given.fixed else partial_sequence_probability(hv, query)
    else:
        pg = partial_probability_rho(rho, given) if given.fixed else 1.0
        if pg <= tol:
            raise ZeroProbabilityError(f"conditioning event {given.describe(s.times)} has probability {pg:.3e}")
        p = partial_probability_rho(rho, given & query) / pg
    r.add("given_probability", pg)
    r.add("probability", p)
    return r


def rho_slots(schedule, text):
    given = _slots(schedule, text)
    return list(range(schedule.n)) if given is None else given


def cmd_entropy(circuit, args, tol: float) -> Report:
    s = circuit.schedule
    split = _default_split(s, args.split)
    mode = args.mode or "pure"
    hv = _build(circuit, tol)
    rho = from_pure(hv)
    r = _base_report("entropy", circuit, tol)
    r.add("split", args.split or "1|2")
    r.add("mode", mode)
    log_base = float(circuit.options.get("log_base", 2))
    r.add("log_base", log_base)
    if mode == "measured":
        proj = _projector(s, args.fix, args.split, "--fix")
        if not proj.fixed:
            raise UsageError("--mode measured needs --fix")
        r.add("fix", proj.describe(s.times))
        rho = measure_update(rho, proj)
    elif mode == "unknown-result":
        rho = unknown_result_update(rho, _slots(s, args.slots))
        r.add("dephased", " ".join(s.times[k] for k in rho_slots(s, args.slots)))
    parts = {"AB": rho, "A": reduce(rho, split, "A"), "B": reduce(rho, split, "B")}
    values = {k: entropy(m, log_base=log_base) for k, m in parts.items()}
    for k in ("AB", "A", "B"):
        r.add(f"S_{k}", values[k])
    rows = []
    for k in ("AB", "A", "B"):
        for i, lam in enumerate(parts[k].eigenvalues(tol), 1):
            if lam > tol:
                rows.append([k, i, lam])
    r.table("spectrum", ["part", "index", "eigenvalue"], rows)
    return r


def cmd_verify(circuit, args, tol: float) -> tuple:
    s = circuit.schedule
    hv = _build(circuit, tol)
    tree, pruned = enumerate_tree_with_residual(s)
    worst_chain = worst_born = 0.0
    rows = []
    count = 0
    for seq in all_sequences(s):
        count += 1
        pc = chain_probability(s, seq)
        po = tree.get(seq.labels, 0.0)
        ph = sequence_probability(hv, seq)
        worst_chain = max(worst_chain, abs(pc - po))
        worst_born = max(worst_born, abs(pc - ph))
        if max(pc, po) > tol:
            rows.append(list(seq.labels) + [pc, po, pc - po])
    residual = max(worst_chain, worst_born)
    r = _base_report("verify", circuit, tol)
    r.add("n_sequences", count)
    r.add("oracle_pruned_mass", pruned)
    r.add("max_residual_chain_vs_oracle", f"{worst_chain:.3e}")
    r.add("max_residual_amplitude_vs_chain", f"{worst_born:.3e}")
    r.add("limit", f"{VERIFY_LIMIT:.3e}")
    r.add("status", "ok" if residual <= VERIFY_LIMIT else "fail")
    r.table("probabilities", list(s.times) + ["chain", "oracle", "difference"], rows)
    shots = args.shots if args.shots is not None else circuit.options.get("shots")
    if shots:
        seed = args.seed if args.seed is not None else int(circuit.options.get("seed", 0))
        res = sample(s, int(shots), seed)
        zrows = []
        zmax = 0.0
        for labels, p in tree.items():
            if p <= tol:
                continue
            f = res.frequencies.get(labels, 0.0)
            z = (f - p) / math.sqrt(p * (1 - p) / res.n_shots) if p < 1 else 0.0
            zmax = max(zmax, abs(z))
            zrows.append(list(labels) + [res.counts.get(labels, 0), f, p, z])
        r.add("shots", res.n_shots)
        r.add("seed", res.seed)
        r.add("rng", res.algorithm)
        r.add("max_abs_z", zmax)
        r.table("sampling", list(s.times) + ["count", "frequency", "expected", "z"], zrows)
    return r, residual


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qhist", description="Quantum history amplitudes, probabilities and entropies.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("circuit", help="circuit file path or bundled name (entangler, teleport)")
        sp.add_argument("--param", action="append", metavar="NAME=VALUE", help="override a [params] entry")
        sp.add_argument("--tol", type=float, help=f"numerical tolerance (env {TOL_ENV})")
        sp.add_argument("--format", choices=("text", "structured"), default="text")
        sp.add_argument("--split", help="subsystem bipartition over factors, e.g. 1|2")
        return sp

    for name, text in (("histories", "history table and diagram"), ("content", "history content")):
        sp = common(sub.add_parser(name, help=text))
        sp.add_argument("--fix", action="append", metavar="SLOT=LABEL", help="collapse onto outcomes")
    sp = common(sub.add_parser("prob", help="full, partial or conditional probability"))
    sp.add_argument("--fix", action="append", metavar="SLOT=LABEL")
    sp.add_argument("--query", action="append", metavar="SLOT=LABEL")
    sp.add_argument("--given", action="append", metavar="SLOT=LABEL")
    sp.add_argument("--mode", choices=("pure", "unknown-result"))
    sp.add_argument("--slots", help="comma-separated times dephased in unknown-result mode (default all)")
    sp = common(sub.add_parser("entropy", help="history entropies of the joint system and each side"))
    sp.add_argument("--mode", choices=("pure", "measured", "unknown-result"))
    sp.add_argument("--fix", action="append", metavar="SLOT=LABEL", help="outcomes for measured mode")
    sp.add_argument("--slots", help="comma-separated times dephased in unknown-result mode (default all)")
    sp = common(sub.add_parser("verify", help="compare against direct sequential simulation"))
    sp.add_argument("--shots", type=int, help="also sample this many runs (default from circuit options)")
    sp.add_argument("--seed", type=int)
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.tol is not None and not args.tol > 0:
            raise UsageError("--tol must be positive")
        overrides = _params(args.param)
        circuit = parse_circuit(args.circuit, overrides=overrides, tol=args.tol)
        tol = _tolerance(args, circuit.options)
        code = EXIT_OK
        if args.command in ("histories", "content"):
            report = cmd_histories(circuit, args, tol, content_only=args.command == "content")
        elif args.command == "prob":
            report = cmd_prob(circuit, args, tol)
        elif args.command == "entropy":
            report = cmd_entropy(circuit, args, tol)
        else:
            report, residual = cmd_verify(circuit, args, tol)
            code = EXIT_OK if residual <= VERIFY_LIMIT else EXIT_VERIFY
    except UsageError as exc:
        print(f"qhist: error: {exc}", file=stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"qhist: error: {exc}", file=stderr)
        return EXIT_USAGE
    except ScheduleError as exc:
        print(f"qhist: invalid schedule: {exc}", file=stderr)
        for v in getattr(exc, "violations", ()) or ():
            print(f"  {v.message}", file=stderr)
        return EXIT_INVALID
    except (CircuitSyntaxError, ZeroProbabilityError, NonFactorableError, PositivityError, BasisSizeError) as exc:
        print(f"qhist: error: {exc}", file=stderr)
        return EXIT_INVALID
    except (KeyError, ValueError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"qhist: error: {msg}", file=stderr)
        return EXIT_INVALID
    stdout.write(report.render(args.format))
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))
