#!/usr/bin/env python3
"""Solve a sparse SDPA problem with cvxpy/CVXOPT and write a solution file.

usage: sdpa_cvxopt.py PROBLEM.dat-s SOLUTION [--solver NAME]

The problem is read in SDPA's dual form: max <F0, Y> s.t. <Fk, Y> = ck, Y PSD.
The solution file holds a `status` line followed by `Y blk i j value` lines.
"""
import re
import sys

import cvxpy as cp
import numpy as np


def fields(line):
    return [f for f in re.split(r"[\s,(){}]+", line) if f]


def read(path):
    with open(path) as fh:
        lines = [l for l in fh if not l.lstrip().startswith(('"', "*"))]
    m = int(fields(lines[0])[0])
    nb = int(fields(lines[1])[0])
    sizes = [int(s) for s in fields(lines[2])]
    c = [float(s) for s in fields(lines[3])] if m else []
    entries = []
    for line in lines[4:]:
        f = fields(line)
        if f:
            entries.append((int(f[0]), int(f[1]), int(f[2]), int(f[3]), float(f[4])))
    assert len(sizes) == nb and len(c) == m
    return m, sizes, c, entries


def main():
    args = sys.argv[1:]
    solver = "CVXOPT"
    if "--solver" in args:
        k = args.index("--solver")
        solver = args[k + 1]
        del args[k : k + 2]
    src, dst = args
    m, sizes, c, entries = read(src)
    ys = []
    cons = []
    for s in sizes:
        if s > 0:
            y = cp.Variable((s, s), symmetric=True)
            cons.append(y >> 0)
        else:
            y = cp.Variable(-s, nonneg=True)
        ys.append(y)
    exprs = [0] * (m + 1)
    for k, b, i, j, v in entries:
        y = ys[b - 1]
        if sizes[b - 1] < 0:
            term = v * y[i - 1]
        elif i == j:
            term = v * y[i - 1, j - 1]
        else:
            term = 2 * v * y[i - 1, j - 1]
        exprs[k] = exprs[k] + term
    for k in range(1, m + 1):
        cons.append(exprs[k] == c[k - 1])
    obj = cp.Maximize(exprs[0]) if not isinstance(exprs[0], int) else cp.Minimize(0)
    prob = cp.Problem(obj, cons)
    try:
        prob.solve(solver=solver)
        status = prob.status
    except cp.error.SolverError:
        status = "error"
    if status in ("optimal", "optimal_inaccurate"):
        word = "feasible"
    elif status in ("infeasible", "infeasible_inaccurate"):
        word = "infeasible"
    else:
        word = "unknown"
    with open(dst, "w") as out:
        out.write(f"status {word}\n")
        if word == "feasible":
            for b, (s, y) in enumerate(zip(sizes, ys), start=1):
                val = np.asarray(y.value)
                if s > 0:
                    for j in range(s):
                        for i in range(j + 1):
                            out.write(f"Y {b} {i + 1} {j + 1} {float(val[i, j])!r}\n")
                else:
                    for i in range(-s):
                        out.write(f"Y {b} {i + 1} {i + 1} {float(val[i])!r}\n")


if __name__ == "__main__":
    main()
