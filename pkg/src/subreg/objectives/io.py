"""Plain-text instance files.

A file is a sequence of blocks. Each block starts with a header line
``<keyword> <int>...`` whose integers fix how many data lines follow;
blank lines and ``#`` comments are ignored. Floats are written with
``repr`` so a round trip is exact.

    subreg-instance 1
    family <coverage|nqp|dopt>
    seed <int>
    polytope <m> <n>
      <m lines: row i of A>          (omitted when m == 0)
      <1 line: b>                    (omitted when m == 0)
      <1 line: box lower>
      <1 line: box upper>
    rounds <T>
    then T objective blocks, one per round:

    coverage <n_sets> <|U|> <width>
      <1 line: weights>
      <|U| lines: member set indices, padded with n_sets>
    nqp <n> <noise>
      <n lines: row i of H>
      <1 line: u>
    dopt <N> <n> <ridge> <lower> <upper> <noise>
      <N lines: design vector i>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Box, Polytope
from .coverage import CoverageObjective
from .dopt import DOptObjective
from .nqp import NqpObjective

FORMAT_TAG = "subreg-instance"
FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class InstanceFile:
    family: str
    seed: int
    polytope: Polytope
    objectives: list


def _row(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _int_row(values) -> str:
    return " ".join(str(int(v)) for v in np.ravel(values))


def _objective_lines(obj) -> list[str]:
    if isinstance(obj, CoverageObjective):
        lines = [f"coverage {obj.n_sets} {obj.weights.size} {obj.members.shape[1]}", _row(obj.weights)]
        lines += [_int_row(r) for r in obj.members]
    elif isinstance(obj, NqpObjective):
        lines = [f"nqp {obj.u_vec.size} {obj.noise!r}"]
        lines += [_row(r) for r in obj.h_matrix]
        lines.append(_row(obj.u_vec))
    elif isinstance(obj, DOptObjective):
        if obj.design.shape[0] != 1:
            raise ValueError("only single design sets can be serialized")
        X = obj.design[0]
        lo, hi = float(obj.domain_box.lower[0]), float(obj.domain_box.upper[0])
        lines = [f"dopt {X.shape[0]} {X.shape[1]} {obj.ridge_eps!r} {lo!r} {hi!r} {obj.noise!r}"]
        lines += [_row(r) for r in X]
    else:
        raise ValueError(f"cannot serialize objective of family {obj.family!r}")
    return lines


def dumps(family: str, seed: int, polytope: Polytope, objectives) -> str:
    p = polytope
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"family {family}", f"seed {int(seed)}",
             f"polytope {p.n_constraints} {p.dim}"]
    lines += [_row(r) for r in p.a_matrix]
    if p.n_constraints:
        lines.append(_row(p.b_vector))
    lines += [_row(p.box.lower), _row(p.box.upper)]
    objectives = list(objectives)
    lines.append(f"rounds {len(objectives)}")
    for obj in objectives:
        lines += _objective_lines(obj)
    return "\n".join(lines) + "\n"


def save(path, family, seed, polytope, objectives) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(family, seed, polytope, objectives))


class _Reader:
    def __init__(self, text):
        self.lines = [
            (no, line.split("#", 1)[0].split())
            for no, line in enumerate(text.splitlines(), start=1)
        ]
        self.lines = [(no, toks) for no, toks in self.lines if toks]
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise InstanceFormatError(f"unexpected end of file, expected {what}")
        item = self.lines[self.pos]
        self.pos += 1
        return item

    def header(self, keyword, n_args):
        no, toks = self.next(keyword)
        if toks[0] != keyword or len(toks) != n_args + 1:
            raise InstanceFormatError(f"expected '{keyword}' with {n_args} values, got {' '.join(toks)!r}", no)
        return no, toks[1:]

    def floats(self, width, what):
        no, toks = self.next(what)
        if len(toks) != width:
            raise InstanceFormatError(f"{what}: expected {width} values, found {len(toks)}", no)
        try:
            return np.array([float(t) for t in toks])
        except ValueError:
            raise InstanceFormatError(f"{what}: malformed number", no) from None

    def matrix(self, rows, width, what):
        return np.array([self.floats(width, what) for _ in range(rows)]).reshape(rows, width)


def _int(tok, no):
    try:
        return int(tok)
    except ValueError:
        raise InstanceFormatError(f"expected an integer, got {tok!r}", no) from None


def _float(tok, no):
    try:
        return float(tok)
    except ValueError:
        raise InstanceFormatError(f"expected a number, got {tok!r}", no) from None


def _read_objective(r: _Reader):
    no, toks = r.next("objective block")
    r.pos -= 1
    kind = toks[0]
    if kind == "coverage":
        no, args = r.header("coverage", 3)
        n, n_u, width = (_int(a, no) for a in args)
        weights = r.floats(n_u, "weights")
        members = r.matrix(n_u, width, "members").astype(np.int64)
        return CoverageObjective(weights, members, n)
    if kind == "nqp":
        no, args = r.header("nqp", 2)
        n, noise = _int(args[0], no), _float(args[1], no)
        H = r.matrix(n, n, "H")
        u = r.floats(n, "u")
        return NqpObjective(H, u, noise)
    if kind == "dopt":
        no, args = r.header("dopt", 6)
        N, n = _int(args[0], no), _int(args[1], no)
        ridge, lo, hi, noise = (_float(a, no) for a in args[2:])
        X = r.matrix(N, n, "design vector")
        return DOptObjective(X, ridge, lo, hi, noise)
    raise InstanceFormatError(f"unknown objective kind {kind!r}", no)


def loads(text: str) -> InstanceFile:
    r = _Reader(text)
    no, args = r.header(FORMAT_TAG, 1)
    if _int(args[0], no) != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported version {args[0]}", no)
    _, (family,) = r.header("family", 1)
    no, (seed,) = r.header("seed", 1)
    seed = _int(seed, no)
    no, args = r.header("polytope", 2)
    m, n = _int(args[0], no), _int(args[1], no)
    A = r.matrix(m, n, "A row")
    b = r.floats(m, "b") if m else np.zeros(0)
    lower, upper = r.floats(n, "box lower"), r.floats(n, "box upper")
    try:
        polytope = Polytope(A, b, Box(lower, upper))
    except ValueError as exc:
        raise InstanceFormatError(f"invalid polytope: {exc}", no) from None
    no, (rounds,) = r.header("rounds", 1)
    objectives = [_read_objective(r) for _ in range(_int(rounds, no))]
    if r.pos != len(r.lines):
        raise InstanceFormatError("trailing content", r.lines[r.pos][0])
    for obj in objectives:
        if obj.family != family or obj.dim != n:
            raise InstanceFormatError(f"objective does not match family {family!r} and dimension {n}")
    return InstanceFile(family, seed, polytope, objectives)


def load(path) -> InstanceFile:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())
