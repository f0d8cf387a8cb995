#!/usr/bin/env python3
"""Solve an SDPA sparse (.dat-s) problem with cvxpy.

Reads the file as written by `dimbound export-sdpa`:
    max <F0, X>  s.t.  <F_i, X> = c_i,  X = diag(X_1, ..., X_k) >= 0
and prints the primal and dual objective values in the lines the C++
cross-check parses. Usable as DIMBOUND_SDP_SOLVER (called as `<exe> in out`).
"""

import argparse
import re
import sys

import cvxpy as cp
import numpy as np
import scipy.sparse as sp


def read_sdpa(path):
    tokens = []
    header = True
    with open(path) as fh:
        for line in fh:
            if header and (not line.strip() or line[0] in '"*'):
                continue
            header = False
            tokens.extend(re.sub(r"[{}(),]", " ", line).split())
    pos = 0

    def take(n=1):
        nonlocal pos
        out = tokens[pos:pos + n]
        if len(out) < n:
            sys.exit(f"truncated SDPA file {path}")
        pos += n
        return out

    m = int(take()[0])
    nb = int(take()[0])
    sizes = [int(s) for s in take(nb)]
    c = np.array([float(s) for s in take(m)])
    entries = [[[] for _ in range(nb)] for _ in range(m + 1)]
    while pos + 5 <= len(tokens):
        mat, blk, i, j, v = take(5)
        entries[int(mat)][int(blk) - 1].append((int(i) - 1, int(j) - 1, float(v)))
    return sizes, c, entries


def sym(size, triples):
    rows, cols, vals = [], [], []
    for i, j, v in triples:
        rows.append(i)
        cols.append(j)
        vals.append(v)
        if i != j:
            rows.append(j)
            cols.append(i)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("input")
    ap.add_argument("output", nargs="?", help="solution file (only the objective values are written)")
    ap.add_argument("--solver", default="CLARABEL")
    ap.add_argument("--constant", type=float, default=None,
                    help="objective constant printed by export-sdpa; also reports the bound constant - optimum")
    args = ap.parse_args()

    sizes, c, entries = read_sdpa(args.input)
    # SDPA marks diagonal blocks with negative sizes
    X = [cp.Variable((abs(s), abs(s)), symmetric=True) if s > 0 else cp.Variable(abs(s)) for s in sizes]

    def inner(mat):
        terms = []
        for b, s in enumerate(sizes):
            if not entries[mat][b]:
                continue
            if s > 0:
                terms.append(cp.sum(cp.multiply(sym(s, entries[mat][b]), X[b])))
            else:
                d = np.zeros(abs(s))
                for i, j, v in entries[mat][b]:
                    d[i] += v
                terms.append(d @ X[b])
        return cp.sum(cp.hstack(terms)) if terms else cp.Constant(0.0)

    cons = [x >> 0 if s > 0 else x >= 0 for x, s in zip(X, sizes)]
    eqs = [inner(i + 1) == c[i] for i in range(len(c))]
    prob = cp.Problem(cp.Maximize(inner(0)), cons + eqs)
    prob.solve(solver=args.solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        print(f"status: {prob.status}")
        return 1
    primal = prob.value
    # dual objective c^T y from the equality multipliers
    y = np.array([float(np.asarray(e.dual_value).ravel()[0]) for e in eqs])
    dual = float(c @ y) if len(c) else primal
    print(f"status: {prob.status}")
    print(f"Primal objective value: {primal:.12e}")
    print(f"Dual objective value: {dual:.12e}")
    if args.constant is not None:
        print(f"bound: {args.constant - primal:.12f}")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(f"{primal:.17g}\n{dual:.17g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
