"""Convergence studies, EOC tables and run artefacts."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

from .geometry import write_svg
from .solver import RunConfig, RunResult, config_hash, run

ERROR_KEYS = ("e_u0", "e_u1", "e_p0", "e_p1")


def eoc(coarse: float | None, fine: float | None) -> float | None:
    """``log2(coarse / fine)``; ``None`` when undefined (missing or zero errors)."""
    if coarse is None or fine is None or not (coarse > 0 and fine > 0):
        return None
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        return None
    return math.log2(coarse / fine)


@dataclass
class EocRow:
    nc: int
    h: float
    errors: dict[str, float] | None
    note: str = ""
    config_hash: str = ""
    seconds: float = 0.0


@dataclass
class EocTable:
    """Errors per refinement level with orders between consecutive levels."""

    k: int
    rows: list[EocRow] = field(default_factory=list)

    def error(self, i: int, key: str) -> float | None:
        e = self.rows[i].errors
        return None if e is None else e.get(key)

    def order(self, i: int, key: str) -> float | None:
        """Order between level ``i - 1`` and ``i`` (``None`` for the first row)."""
        if i == 0:
            return None
        return eoc(self.error(i - 1, key), self.error(i, key))

    def orders(self, key: str) -> list[float | None]:
        return [self.order(i, key) for i in range(len(self.rows))]

    @staticmethod
    def _fmt_err(v: float | None) -> str:
        return "failed" if v is None else f"{v:.3e}"

    @staticmethod
    def _fmt_ord(v: float | None) -> str:
        return "---" if v is None else f"{v:.2f}"

    def format(self) -> str:
        head = f"{'h=tau':<8}" + "".join(f"{k:>12}{'order':>7}" for k in ERROR_KEYS)
        lines = [f"k = {self.k}", head, "-" * len(head)]
        for i, r in enumerate(self.rows):
            cells = "".join(f"{self._fmt_err(self.error(i, k)):>12}{self._fmt_ord(self.order(i, k)):>7}"
                            for k in ERROR_KEYS)
            lines.append(f"{'1/' + str(r.nc):<8}{cells}")
        notes = [f"  1/{r.nc}: {r.note}" for r in self.rows if r.note]
        if notes:
            lines += ["notes:"] + notes
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        cols = ["nc", "h"] + [c for k in ERROR_KEYS for c in (k, f"order_{k}")] + ["config_hash", "seconds", "note"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i, r in enumerate(self.rows):
                vals = [r.nc, repr(r.h)]
                for k in ERROR_KEYS:
                    e, o = self.error(i, k), self.order(i, k)
                    vals += ["" if e is None else repr(e), "" if o is None else f"{o:.4f}"]
                w.writerow(vals + [r.config_hash, f"{r.seconds:.2f}", r.note])


def convergence_study(base: RunConfig, levels, progress=None) -> tuple[EocTable, list[RunResult]]:
    """Run ``base`` at ``h = tau = 1 / nc`` for every ``nc`` in ``levels``.

    A failed level leaves a gap in the table with the failure as a note.
    """
    levels = list(levels)
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError("levels must form a halving sequence of h")
    table = EocTable(base.k)
    results = []
    for nc in levels:
        cfg = replace(base, nc=nc, tau=None)
        res = run(cfg)
        results.append(res)
        secs = sum(d.seconds for d in res.diagnostics)
        ok = res.status == "ok" and res.errors
        table.rows.append(EocRow(nc, cfg.h, dict(res.errors) if ok else None, "" if ok else (res.failure or "failed"),
                                 res.config_hash, secs))
        if progress is not None:
            progress(table)
    return table, results


def write_artifacts(result: RunResult, out: str) -> list[str]:
    """Result JSON, diagnostics CSV and interface snapshots (CSV + SVG)."""
    os.makedirs(out, exist_ok=True)
    written = []
    path = os.path.join(out, "result.json")
    result.to_json(path)
    written.append(path)
    path = os.path.join(out, "diagnostics.csv")
    result.write_diagnostics_csv(path)
    written.append(path)
    if result.interfaces:
        labels = list(result.interfaces)
        for label in labels:
            path = os.path.join(out, f"interface_t{label}.csv")
            result.interfaces[label].to_csv(path)
            written.append(path)
        path = os.path.join(out, "interfaces.svg")
        write_svg(path, [result.interfaces[l] for l in labels], labels=[f"t = {l}" for l in labels])
        written.append(path)
    return written


__all__ = ["EocRow", "EocTable", "convergence_study", "eoc", "write_artifacts", "config_hash"]
