"""Plain-text rendering of verdicts and atlas reports."""

from __future__ import annotations

from typing import TYPE_CHECKING

from .engine import TestVerdict

if TYPE_CHECKING:
    from .atlas import Report


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in rows])


def verdict_text(v: TestVerdict) -> str:
    out = [f"branch {v.label} on {v.system}: {v.status}"]
    out.append("leads: " + ", ".join(f"{k}~phi^-{p}" for k, p in sorted(v.leads.items())))
    if v.bosonic is not None:
        out.append(f"bosonic resonances: {list(v.bosonic_roots)}   A(n) = {v.bosonic}")
    if v.fermionic is not None:
        out.append(f"fermionic resonances: {list(v.fermionic_roots)}   B(n) = {v.fermionic}")
    if v.fermion_relation:
        out.append(f"fermion relation: {v.fermion_relation}" + (f" ({v.k_relation})" if v.k_relation else ""))
    if v.static_functions:
        out.append("static functions: " + ", ".join(v.static_functions))
    if v.log_flag:
        out.append("warning: a resonance sits on a level fixed by the seed (movable log)")
    ledger = v.ledger_text()
    if ledger:
        out.append("arbitrary functions: " + ", ".join(ledger))
    if v.deferred:
        out.append("deferred conditions: " + ", ".join(f"n={o} ({s}) checked at n={r}" for o, s, r in v.deferred))
    if v.max_level_solved is not None:
        out.append(f"solved through level {v.max_level_solved}")
    if v.failure:
        f = v.failure
        out.append(f"failure: {f.get('reason')}" + (f" at n={f['level']}" if f.get("level") is not None else ""))
        if "analysis" in f:
            a = f["analysis"]
            out.append(f"continued analysis: {a.get('reason')} at n={a.get('level')}")
        res = f.get("analysis", f).get("residual")
        if res is not None:
            out.append(f"residual: {res}")
    return "\n".join(out)


def atlas_text(report: "Report") -> str:
    parts = ["classification"]
    rows = []
    for row in report.classification():
        statuses = sorted(set(row["entries"].values()))
        rows.append([row["case"], ", ".join(statuses) or "-", ", ".join(sorted(row["entries"])) or "-"])
    parts.append(_table(["case", "status", "entries"], rows))

    parts.append("\nentries")
    rows = []
    for r in report.entries:
        obs = r.observed
        where = f"n={obs['level']}" if obs.get("level") is not None else ""
        rows.append([r.label, obs.get("status", "?"), where, r.outcome])
    parts.append(_table(["label", "status", "site", "outcome"], rows))

    parts.append("\ndiophantine scans (box +-60)")
    rows = []
    for s in report.scans:
        rows.append([s.case, s.scope, str(len(s.found)), str(len(s.extras)), "yes" if s.routes_agree else "no",
                     str(len(s.outside_families)), s.outcome])
    parts.append(_table(["case", "scope", "found", "extras", "routes", "outside", "outcome"], rows))

    parts.append("\nresonance polynomials")
    rows = [[p.kind, p.label, "equal" if p.equal else "differs",
             "-" if p.claim is None else f"{p.claim}: {'holds' if p.claim_holds else 'fails'}", p.outcome]
            for p in report.polynomials]
    parts.append(_table(["", "case", "printed vs generated", "claim", "outcome"], rows))

    parts.append("\nleading fermion exponents")
    rows = [[c.case, str(c.computed["plus"]), str(c.computed["minus"]), str(c.computed["type1"]),
             "match" if c.ok else "mismatch"] for c in report.candidates]
    parts.append(_table(["case", "k=+k0", "k=-k0", "type-1", "outcome"], rows))

    parts.append("\nfamily formulas at sample points")
    rows = [[f.family, ",".join(f"{a}={b}" for a, b in f.point.items()), f.printed["alpha"], f.printed["beta"],
             f.printed["u0"], ",".join(f.diffs) or "-", f.outcome] for f in report.families]
    parts.append(_table(["case", "point", "alpha", "beta", "u0", "differs", "outcome"], rows))

    if report.deviations:
        parts.append("\ndocumented deviations")
        parts += [f"  {d}" for d in report.deviations]
    if report.mismatches:
        parts.append("\nMISMATCHES")
        parts += [f"  {m}" for m in report.mismatches]
    parts.append(f"\nresult: {'reproduced' if report.ok else 'NOT reproduced'}")
    return "\n".join(parts)
