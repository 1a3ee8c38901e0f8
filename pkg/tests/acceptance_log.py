"""Collects per-criterion outcomes so the run ends with one line each."""

RESULTS = {}


def record(n, part, ok, detail):
    RESULTS.setdefault(n, []).append((part, bool(ok), detail))
    print(f"criterion {n}{'(' + part + ')' if part else ''}: {'PASS' if ok else 'FAIL'}  {detail}")


def summary_lines():
    out = []
    for n in sorted(RESULTS):
        parts = RESULTS[n]
        ok = all(p[1] for p in parts)
        bad = [p[0] or "all" for p in parts if not p[1]]
        note = "" if ok else f"  (failing: {', '.join(bad)})"
        out.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}{note}")
    return out
