"""CPLEX-style LP file writer (Minimize / Subject To / Bounds / Binary / End).

Names are reduced to ``[A-Za-z0-9_]``; a leading digit or an ``e``/``E``
followed by a digit (which readers may take for an exponent) gets a ``_``
prefix, and collisions get a numeric suffix.  The objective constant, which
the format has no slot for, is written as a comment.
"""
from __future__ import annotations

import math
import re

from .model import MilpModel, Sense, VarKind

_BAD = re.compile(r"[^A-Za-z0-9_]")
_LINE = 72


def _sanitize(names):
    out, seen = [], set()
    for raw in names:
        name = _BAD.sub("_", raw) or "_"
        if name[0].isdigit() or re.match(r"[eE][0-9]", name):
            name = "_" + name
        base, k = name, 1
        while name in seen:
            name = f"{base}_{k}"
            k += 1
        seen.add(name)
        out.append(name)
    return out


def _num(x: float) -> str:
    return repr(float(x)) if x != int(x) or abs(x) >= 1e15 else str(int(x))


def _terms(pairs, names):
    parts = []
    for v, c in pairs:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1.0 else _num(mag) + " "
        parts.append(f"{sign} {coef}{names[v]}")
    if parts and parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return parts


def _wrap(head, parts, tail=""):
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > _LINE and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + p
    if tail:
        cur += " " + tail
    lines.append(cur)
    return lines


def export_lp_text(model: MilpModel) -> str:
    vnames = _sanitize(v.name for v in model.variables)
    cnames = _sanitize(c.name for c in model.constraints)
    out = [f"\\ {_BAD.sub('_', model.name)}"]
    if model.objective.constant:
        out.append(f"\\ objective constant {_num(model.objective.constant)} omitted")
    out.append("Minimize")
    obj_pairs = [(v, c) for v, c in model.objective.terms.items() if c != 0.0]
    if not obj_pairs and model.variables:
        obj_pairs = [(0, 0.0)]
    obj_parts = [f"0 {vnames[v]}" if c == 0.0 else p for (v, c), p in zip(obj_pairs, _terms(obj_pairs, vnames))]
    out.extend(_wrap(" obj:", obj_parts))

    out.append("Subject To")
    sense_txt = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for con, cname in zip(model.constraints, cnames):
        pairs = list(zip(con.indices, con.coefs))
        if pairs:
            parts = _terms(pairs, vnames)
        elif model.variables:
            parts = [f"0 {vnames[0]}"]
        else:
            continue
        out.extend(_wrap(f" {cname}:", parts, f"{sense_txt[con.sense]} {_num(con.rhs)}"))

    bounds, binaries = [], []
    for v, name in zip(model.variables, vnames):
        if v.kind is VarKind.BINARY:
            binaries.append(name)
            if v.lb == 0.0 and v.ub == 1.0:
                continue
        lb, ub = v.lb, v.ub
        if math.isinf(lb) and math.isinf(ub):
            bounds.append(f" {name} free")
        elif lb == ub:
            bounds.append(f" {name} = {_num(lb)}")
        elif math.isinf(lb):
            bounds.append(f" -inf <= {name} <= {_num(ub)}")
        elif math.isinf(ub):
            if lb != 0.0:
                bounds.append(f" {name} >= {_num(lb)}")
        else:
            bounds.append(f" {_num(lb)} <= {name} <= {_num(ub)}")
    if bounds:
        out.append("Bounds")
        out.extend(bounds)
    if binaries:
        out.append("Binary")
        out.extend(_wrap("", binaries))
    out.append("End")
    return "\n".join(out) + "\n"
