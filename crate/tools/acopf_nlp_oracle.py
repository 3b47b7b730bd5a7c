"""Full AC optimal power flow reference solutions.

Solves the polar-form ACOPF of a MATPOWER case directly with scipy's SLSQP
method. Line-flow limits are omitted by default, matching the model driven
by the ADMM decomposition. Used to produce the frozen reference values in
crates/acopf/tests.

    python3 tools/acopf_nlp_oracle.py crates/acopf/data/case9.m [--limits]
"""
import re
import sys

import numpy as np
from scipy.optimize import minimize


def read_block(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\]" % name, text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.replace(";", " ").split()])
    return np.array(rows)


def load(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)", text).group(1))
    bus = read_block(text, "bus")
    gen = read_block(text, "gen")
    br = read_block(text, "branch")
    cost = read_block(text, "gencost")
    on = gen[:, 7] > 0
    gen, cost = gen[on], cost[on]
    br = br[br[:, 10] > 0]
    return base, bus, gen, br, cost


def admittances(base, bus, br):
    idx = {int(b): k for k, b in enumerate(bus[:, 0])}
    nb = len(bus)
    Y = np.zeros((nb, nb), dtype=complex)
    lines = []
    for row in br:
        f, t = idx[int(row[0])], idx[int(row[1])]
        r, x, b = row[2], row[3], row[4]
        tap = row[8] if row[8] != 0 else 1.0
        T = tap * np.exp(1j * np.deg2rad(row[9]))
        ys = 1.0 / complex(r, x)
        yff = (ys + 1j * b / 2) / (tap * tap)
        yft = -ys / np.conj(T)
        ytf = -ys / T
        ytt = ys + 1j * b / 2
        Y[f, f] += yff
        Y[f, t] += yft
        Y[t, f] += ytf
        Y[t, t] += ytt
        lines.append((f, t, yff, yft, ytf, ytt, row[5] / base))
    Y += np.diag((bus[:, 4] + 1j * bus[:, 5]) / base)
    return idx, Y, lines


def solve(path, limits=False):
    base, bus, gen, br, cost = load(path)
    idx, Y, lines = admittances(base, bus, br)
    nb, ng = len(bus), len(gen)
    gbus = np.array([idx[int(g)] for g in gen[:, 0]])
    c2 = cost[:, 4] * base * base
    c1 = cost[:, 5] * base
    c0 = cost[:, 6]
    pd = bus[:, 2] / base
    qd = bus[:, 3] / base
    ref = int(np.argmax(bus[:, 1] == 3))

    def unpack(z):
        return z[:ng], z[ng:2 * ng], z[2 * ng:2 * ng + nb], z[2 * ng + nb:]

    def obj(z):
        pg = z[:ng]
        return float(np.sum(c2 * pg * pg + c1 * pg + c0))

    def balance(z):
        pg, qg, vm, va = unpack(z)
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        inj = np.zeros(nb, dtype=complex)
        np.add.at(inj, gbus, pg + 1j * qg)
        mis = inj - (pd + 1j * qd) - S
        return np.concatenate([mis.real, mis.imag, [va[ref]]])

    def flow_margin(z):
        _, _, vm, va = unpack(z)
        V = vm * np.exp(1j * va)
        out = []
        for f, t, yff, yft, ytf, ytt, smax in lines:
            sf = V[f] * np.conj(yff * V[f] + yft * V[t])
            st = V[t] * np.conj(ytf * V[f] + ytt * V[t])
            out += [smax ** 2 - abs(sf) ** 2, smax ** 2 - abs(st) ** 2]
        return np.array(out)

    bounds = (
        [(g[9] / base, g[8] / base) for g in gen]
        + [(g[4] / base, g[3] / base) for g in gen]
        + [(b[12], b[11]) for b in bus]
        + [(-np.pi, np.pi)] * nb
    )
    z0 = np.concatenate([
        (gen[:, 8] + gen[:, 9]) / (2 * base),
        (gen[:, 3] + gen[:, 4]) / (2 * base),
        np.ones(nb),
        np.zeros(nb),
    ])
    cons = [{"type": "eq", "fun": balance}]
    if limits:
        cons.append({"type": "ineq", "fun": flow_margin})
    res = minimize(obj, z0, method="SLSQP", bounds=bounds, constraints=cons,
                   options={"ftol": 1e-12, "maxiter": 2000})
    pg, qg, vm, va = unpack(res.x)
    return res, pg, qg, vm, va, np.max(np.abs(balance(res.x)))


if __name__ == "__main__":
    res, pg, qg, vm, va, mis = solve(sys.argv[1], "--limits" in sys.argv)
    np.set_printoptions(precision=10)
    print("success", res.success, res.message)
    print("objective %.10f" % res.fun)
    print("pg", pg)
    print("qg", qg)
    print("vm", vm)
    print("va", va)
    print("max mismatch", mis)
