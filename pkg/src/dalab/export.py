"""CSV / JSON / gnuplot writers for the result types."""
from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .certify import AveragingReport
from .dynamics import MomentTrace
from .spectral import IDSCurve, SpectralResult
from .stats import EdgeReport, ILSEReport, WegnerReport

__all__ = [
    "write_csv",
    "write_json",
    "write_table",
    "write_spectrum",
    "write_ids",
    "write_reports",
    "write_wegner",
    "write_ilse",
    "write_moments",
    "write_edges",
    "summary",
]


def _plain(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (tuple, list)):
        return "/".join(str(int(c)) for c in x)
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if isinstance(r, dict):
                r = [r[h] for h in header]
            w.writerow([_cell(v) for v in r])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_table(path, x, y, comment: str | None = None) -> Path:
    """Two-column whitespace table readable by gnuplot."""
    path = Path(path)
    with path.open("w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for a, b in zip(np.asarray(x, dtype=float), np.asarray(y, dtype=float)):
            fh.write(f"{a:.17g} {b:.17g}\n")
    return path


def write_spectrum(path, res: SpectralResult) -> Path:
    rows = ((i, float(e), float(r)) for i, (e, r) in enumerate(zip(res.eigenvalues, res.residuals)))
    return write_csv(path, ["index", "eigenvalue", "residual"], rows)


def write_ids(path, curve: IDSCurve) -> Path:
    rows = zip(curve.energies, curve.mean, curve.minimum, curve.maximum, curve.center_spread)
    return write_csv(path, ["E", "N_mean", "N_min", "N_max", "center_spread"], rows)


def write_reports(path, reports: Sequence[AveragingReport]) -> Path:
    rows = ((r.test, r.parameter_set, r.worst_margin, r.passed, r.vacuous, r.nsamples) for r in reports)
    return write_csv(path, ["test", "parameter_set", "worst_margin", "pass", "vacuous", "nsamples"], rows)


def write_wegner(path, rep: WegnerReport) -> Path:
    return write_csv(path, ["E", "eta", "L", "center", "nsamples", "phat", "ci_lo", "ci_hi"], rep.rows())


def write_ilse(path, rep: ILSEReport) -> Path:
    return write_csv(path, ["L", "center", "sample", "lambda_min"], rep.rows())


def write_moments(path, trace: MomentTrace) -> Path:
    return write_csv(path, ["t", "sample", "m_p", "p", "interval_lo", "interval_hi"], trace.rows())


def write_edges(path, rep: EdgeReport) -> Path:
    rows = ((s, float(a), float(b)) for s, (a, b) in enumerate(zip(rep.lambda_min, rep.lambda_max)))
    return write_csv(path, ["sample", "lambda_min", "lambda_max"], rows)


def summary(q_w=None, uniformity=None, c_fit=None, p=None, seed=None, **extra) -> dict:
    out = {"q_w": q_w, "uniformity": uniformity, "c_fit": c_fit, "p": p, "seed": seed}
    out.update(extra)
    return _plain(out)
