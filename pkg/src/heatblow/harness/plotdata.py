"""Plot-ready tables from a finished run directory."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..similarity import profile_f
from .scenarios import RunWriter, load_outcome


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def _profile_table(run_dir: Path, blow: dict, w: RunWriter, n_xi: int = 201) -> Path | None:
    fields = run_dir / "fields.csv"
    if not fields.is_file():
        return None
    T, a, p, dx = blow["T"], blow["a"], blow["p"], blow["dx"]
    _, rows = _read_csv(fields)
    xi = np.linspace(-1, 1, n_xi)
    cols, names = [xi, profile_f(xi, p)], ["xi", "f_xi"]
    for row in rows:
        t = float(row[0])
        tau = T - t
        if not 0 < tau < 1:
            continue
        vals = np.array([float(v) for v in row[1:]])
        x = blow["x0"] + dx * np.arange(vals.size)
        xx = a + xi * math.sqrt(tau * abs(math.log(tau)))
        cols.append(tau ** (1 / (p - 1)) * np.interp(xx, x, vals))
        names.append(f"y_rescaled_s={-math.log(tau):.6g}")
    if len(cols) == 2:
        return None
    return w.csv("plot_profile.csv", names, zip(*cols))


def _rate_tables(run_dir: Path, manifest: dict, w: RunWriter) -> list[Path]:
    out = []
    summary = manifest.get("summary", {})
    fits = {f["p"]: f["exponent"] for f in summary.get("fits", [])}
    if "estimate" in summary:
        fits.setdefault(summary["blowup"]["p"], summary["estimate"]["exponent"])
    for path in sorted(run_dir.glob("*rate.csv")):
        header, rows = _read_csv(path)
        table = []
        for r in rows:
            p, t, m, gap = (float(v) for v in r[:4])
            if gap > 0 and m > 0:
                table.append((p, t, math.log(gap), math.log(m), fits.get(p, math.nan), -1 / (p - 1)))
        out.append(w.csv(f"plot_{path.name}", ["p", "t", "log_t_est_minus_t", "log_max_abs_y",
                                                "fitted_slope", "expected_slope"], table))
    return out


def emit_plotdata(run_dir: str | Path) -> list[Path]:
    """Write ``plot_*.csv`` tables next to the run's outputs.

    Raises FileNotFoundError for a directory without a finished manifest.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    manifest, _ = load_outcome(run_dir)
    if manifest.get("status") != "COMPLETE":
        raise FileNotFoundError(f"run in {run_dir} is INCOMPLETE")
    w = RunWriter(run_dir)
    written: list[Path] = []
    summary = manifest.get("summary", {})
    blow = dict(summary["blowup"]) if "blowup" in summary else None
    if blow is not None:
        blow["x0"] = manifest["config"]["problem"]["omega_domain"][0]
        prof = _profile_table(run_dir, blow, w)
        if prof is not None:
            written.append(prof)
    written += _rate_tables(run_dir, manifest, w)
    margins = run_dir / "margins.csv"
    if margins.is_file():
        header, rows = _read_csv(margins)
        written.append(w.csv("plot_margins.csv", header, ([float(v) for v in r] for r in rows)))
    return written
