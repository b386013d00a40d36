"""Plain-text standard-form dump.

Layout, one record per line, floats written with ``repr``::

    qextrap-conic 1
    sense <min|max>
    c0 <float>
    cones <count>
    cone <free|nonneg|psd> <size>          (count lines, in variable order)
    vars <n>
    c <nnz>
    <col> <value>                          (nnz lines, increasing col)
    eq <rows> <nnz>
    <row> <col> <value>                    (row-major, increasing col)
    beq
    <value>                                (rows lines)
    in <rows> <nnz>
    ...                                    (same as eq)
    bin
    <value>
    end

PSD variables are the upper triangle of each block, column by column.
"""

from __future__ import annotations

import hashlib

import numpy as np
import scipy.sparse as sp

from qextrap.solver.program import Cone, ConicProgram

MAGIC = "qextrap-conic 1"


def _mat_lines(tag: str, m: sp.csr_matrix, b: np.ndarray) -> list[str]:
    coo = m.tocoo()
    order = np.lexsort((coo.col, coo.row))
    out = [f"{tag} {m.shape[0]} {coo.nnz}"]
    out += [f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}" for k in order]
    out.append("b" + tag)
    out += [repr(float(v)) for v in b]
    return out


def dump_standard_form(p: ConicProgram) -> str:
    lines = [MAGIC, f"sense {p.sense}", f"c0 {p.c0!r}", f"cones {len(p.cones)}"]
    lines += [f"cone {cn.kind} {cn.size}" for cn in p.cones]
    lines.append(f"vars {p.n_vars}")
    nz = np.flatnonzero(p.c)
    lines.append(f"c {nz.size}")
    lines += [f"{int(i)} {float(p.c[i])!r}" for i in nz]
    lines += _mat_lines("eq", p.A_eq, p.b_eq)
    lines += _mat_lines("in", p.A_in, p.b_in)
    lines.append("end")
    return "\n".join(lines) + "\n"


def program_hash(p: ConicProgram) -> str:
    return hashlib.sha256(dump_standard_form(p).encode()).hexdigest()


class _Reader:
    def __init__(self, text: str):
        self.lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        self.k = 0

    def next(self, expect: str | None = None) -> list[str]:
        if self.k >= len(self.lines):
            raise ValueError("unexpected end of dump")
        parts = self.lines[self.k].split()
        self.k += 1
        if expect is not None and parts[0] != expect:
            raise ValueError(f"line {self.k}: expected {expect!r}, got {parts[0]!r}")
        return parts


def _read_mat(rd: _Reader, tag: str, n: int):
    _, rows, nnz = rd.next(tag)
    rows, nnz = int(rows), int(nnz)
    ri, ci, vv = np.zeros(nnz, int), np.zeros(nnz, int), np.zeros(nnz)
    for k in range(nnz):
        a, b, v = rd.next()
        ri[k], ci[k], vv[k] = int(a), int(b), float(v)
    rd.next("b" + tag)
    b = np.array([float(rd.next()[0]) for _ in range(rows)])
    return sp.csr_matrix((vv, (ri, ci)), shape=(rows, n)), b


def parse_standard_form(text: str) -> ConicProgram:
    rd = _Reader(text)
    if " ".join(rd.next()) != MAGIC:
        raise ValueError("not a qextrap standard-form dump")
    sense = rd.next("sense")[1]
    c0 = float(rd.next("c0")[1])
    ncones = int(rd.next("cones")[1])
    cones = []
    for _ in range(ncones):
        _, kind, size = rd.next("cone")
        cones.append(Cone(kind, int(size)))
    n = int(rd.next("vars")[1])
    c = np.zeros(n)
    for _ in range(int(rd.next("c")[1])):
        i, v = rd.next()
        c[int(i)] = float(v)
    a_eq, b_eq = _read_mat(rd, "eq", n)
    a_in, b_in = _read_mat(rd, "in", n)
    rd.next("end")
    p = ConicProgram(tuple(cones), c, a_eq, b_eq, a_in, b_in, sense, c0)
    if p.n_vars != n:
        raise ValueError(f"cone sizes give {p.n_vars} variables, header says {n}")
    return p
