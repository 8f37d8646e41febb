"""CPLEX-LP text export/import and solution-file parsing.

Grammar written and accepted here (a subset of the CPLEX LP format)::

    \\ comment
    Minimize
     obj: +1 CL +1 CQ +1 CD
    Subject To
     <row>: <coef> <var> <coef> <var> ... <sense> <rhs>
    Bounds
     <lb> <= <var> <= <ub>
    Binaries
     <var> <var> ...
    End

Coefficients are written with 17 significant digits so a write/read round
trip is exact. Long rows wrap onto continuation lines. Variables not listed
under Bounds default to ``0 <= x < inf``; binaries are bounded by [0, 1].
"""

from __future__ import annotations

import io
import math
import re
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import GE, LE, MilpModel

_TERMS_PER_LINE = 8
_SECTIONS = {
    "minimize": "obj",
    "minimise": "obj",
    "min": "obj",
    "subject to": "rows",
    "such that": "rows",
    "st": "rows",
    "s.t.": "rows",
    "bounds": "bounds",
    "binaries": "bin",
    "binary": "bin",
    "bin": "bin",
    "end": "end",
}


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x) + 0.0, ".17g")


def _terms(pairs) -> list[str]:
    out = []
    for name, a in pairs:
        out.append(("+" if a >= 0 else "-") + _num(abs(a)) + " " + name)
    return out


def _wrapped(head: str, tokens: list[str], tail: str = "") -> str:
    lines = []
    for i in range(0, max(len(tokens), 1), _TERMS_PER_LINE):
        chunk = " ".join(tokens[i : i + _TERMS_PER_LINE])
        lines.append((" " + head + " " if i == 0 else "   ") + chunk)
    lines[-1] += tail
    return "\n".join(lines) + "\n"


def write_lp(model: MilpModel, path=None) -> str:
    """Serialize ``model``; also writes to ``path`` when given. Returns the text."""
    buf = io.StringIO()
    buf.write("\\ fronthaul placement and routing model\n")
    buf.write("Minimize\n")
    obj = [(model.names[j], model.objective[j]) for j in np.flatnonzero(model.objective)]
    if not obj:
        obj = [(model.names[0], 0.0)]
    buf.write(_wrapped("obj:", _terms(obj)))
    buf.write("Subject To\n")
    A = model.A.tocsr()
    for i, name in enumerate(model.row_names):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        pairs = [(model.names[j], a) for j, a in zip(A.indices[lo:hi], A.data[lo:hi])]
        buf.write(_wrapped(name + ":", _terms(pairs), f" {model.senses[i]} {_num(model.rhs[i])}"))
    buf.write("Bounds\n")
    for j, name in enumerate(model.names):
        if model.binary[j]:
            continue
        lb, ub = model.lb[j], model.ub[j]
        if lb == 0.0 and math.isinf(ub):
            continue
        if lb == ub:
            buf.write(f" {name} = {_num(lb)}\n")
        else:
            buf.write(f" {_num(lb)} <= {name} <= {_num(ub)}\n")
    binaries = [name for j, name in enumerate(model.names) if model.binary[j]]
    if binaries:
        buf.write("Binaries\n")
        for i in range(0, len(binaries), _TERMS_PER_LINE):
            buf.write(" " + " ".join(binaries[i : i + _TERMS_PER_LINE]) + "\n")
    buf.write("End\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _float(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


_SENSE_RE = re.compile(r"(<=|>=|=<|=>|<|>|=)")


def _parse_linear(text: str) -> list[tuple[str, float]]:
    pairs, sign, coef = [], 1.0, None
    for tok in text.split():
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        if tok[0] in "+-":
            sign, tok = (-1.0 if tok[0] == "-" else 1.0), tok[1:]
        pairs.append((tok, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    return pairs


def _statements(body: list[str]) -> list[str]:
    """Join continuation lines: a statement ends with ``<sense> <number>``."""
    out, cur = [], ""
    for line in body:
        cur = (cur + " " + line).strip()
        if _SENSE_RE.search(cur):
            out.append(cur)
            cur = ""
    if cur:
        out.append(cur)
    return out


def read_lp(source) -> MilpModel:
    """Parse LP text (or a path to an LP file) written by :func:`write_lp`."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text()
    sections: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": [], "bin": []}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key is not None:
            current = key
            if key == "end":
                break
            continue
        if current is None:
            raise ValueError(f"content outside any section: {line!r}")
        sections[current].append(line)

    names: list[str] = []
    index: dict[str, int] = {}

    def col(name: str) -> int:
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    obj_text = " ".join(sections["obj"])
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    obj_pairs = _parse_linear(obj_text)
    for name, _ in obj_pairs:
        col(name)

    rows, cols, vals, senses, rhs, row_names = [], [], [], [], [], []
    for stmt in _statements(sections["rows"]):
        name, expr = stmt.split(":", 1)
        lhs, sense, right = _SENSE_RE.split(expr, maxsplit=1)
        sense = {"=<": LE, "<": LE, "=>": GE, ">": GE}.get(sense, sense)
        i = len(senses)
        for var, a in _parse_linear(lhs):
            rows.append(i)
            cols.append(col(var))
            vals.append(a)
        senses.append(sense)
        rhs.append(_float(right.strip()))
        row_names.append(name.strip())

    bounds = {}
    for line in sections["bounds"]:
        parts = line.split()
        if len(parts) == 5:
            lb, _, var, _, ub = parts
            bounds[var] = (_float(lb), _float(ub))
        elif len(parts) == 3 and parts[1] == "=":
            v = _float(parts[2])
            bounds[parts[0]] = (v, v)
        elif len(parts) == 3 and parts[1] in ("<=", ">="):
            var, op, val = parts
            lb, ub = bounds.get(var, (0.0, math.inf))
            bounds[var] = (lb, _float(val)) if op == "<=" else (_float(val), ub)
        else:
            raise ValueError(f"unsupported bound line: {line!r}")
        col(parts[2] if len(parts) == 5 else parts[0])

    binaries = set()
    for line in sections["bin"]:
        for var in line.split():
            col(var)
            binaries.add(var)

    n = len(names)
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    for var, (lo, hi) in bounds.items():
        lb[index[var]], ub[index[var]] = lo, hi
    binary = np.zeros(n, dtype=bool)
    for var in binaries:
        binary[index[var]] = True
        ub[index[var]] = 1.0
    objective = np.zeros(n)
    for var, a in obj_pairs:
        objective[index[var]] += a
    A = sp.coo_matrix((vals, (rows, cols)), shape=(len(senses), n)).tocsr()
    return MilpModel(
        names=names,
        lb=lb,
        ub=ub,
        binary=binary,
        objective=objective,
        A=A,
        senses=senses,
        rhs=np.array(rhs, dtype=float),
        row_names=row_names,
    )


def write_solution(path, names, values, status: str = "optimal", objective: float | None = None) -> None:
    """Write the plain ``name value`` solution format (``#`` lines are metadata)."""
    lines = [f"# status {status}"]
    if objective is not None:
        lines.append(f"# objective {_num(objective)}")
    lines += [f"{name} {_num(v)}" for name, v in zip(names, values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path_or_text) -> tuple[dict[str, float], str, float | None]:
    """Parse either the plain ``name value`` format or a CBC-style solution file.

    Returns ``(values, status, objective)``; ``status`` is one of ``optimal``,
    ``infeasible``, ``time-limit``, ``feasible-with-gap`` or ``unknown``.
    """
    text = path_or_text
    if "\n" not in str(path_or_text) and Path(path_or_text).exists():
        text = Path(path_or_text).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return {}, "unknown", None
    if lines[0].startswith("#") or len(lines[0].split()) == 2:
        return _read_plain(lines)
    return _read_cbc(lines)


def _read_plain(lines):
    values, status, objective = {}, "unknown", None
    for ln in lines:
        if ln.startswith("#"):
            parts = ln[1:].split()
            if len(parts) >= 2 and parts[0] == "status":
                status = parts[1]
            elif len(parts) >= 2 and parts[0] == "objective":
                objective = float(parts[1])
            continue
        name, val = ln.split()
        values[name] = float(val)
    return values, status, objective


def _read_cbc(lines):
    # header e.g. "Optimal - objective value 2.40000000"
    head = lines[0].lower()
    if head.startswith("optimal"):
        status = "optimal"
    elif "infeasible" in head:
        status = "infeasible"
    elif "time" in head:
        status = "time-limit"
    elif "gap" in head or "stopped" in head:
        status = "feasible-with-gap"
    else:
        status = "unknown"
    m = re.search(r"objective value\s+(\S+)", lines[0], flags=re.IGNORECASE)
    objective = float(m.group(1)) if m else None
    values = {}
    for ln in lines[1:]:
        parts = ln.replace("**", " ").split()
        if len(parts) >= 3:
            values[parts[1]] = float(parts[2])
    return values, status, objective
