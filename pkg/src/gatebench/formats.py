"""File formats: shot-record datasets, estimates, reports and plot-ready CSVs.

Every writer has a matching reader, and all output is deterministic (sorted
keys, ``repr`` floats, no timestamps) so identical inputs give identical
bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from gatebench.drb import Circuit, DecayFit, DrbAnalysis, ShotRecord
from gatebench.errors import DataFormatError
from gatebench.gst import GateSetEstimate

DATASET_FORMAT = "gatebench.dataset/1"
ESTIMATE_FORMAT = "gatebench.estimate/1"


# --------------------------------------------------------------------------------------------
# generic JSON / CSV helpers
# --------------------------------------------------------------------------------------------


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_rows_csv(path: str | Path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(columns or (rows[0].keys() if rows else []))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return path


def read_rows_csv(path: str | Path) -> list[dict]:
    """Rows as dicts; numeric-looking cells are converted to int or float."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")

    def convert(cell: str):
        for cast in (int, float):
            try:
                return cast(cell)
            except ValueError:
                pass
        return cell

    with path.open(newline="") as fh:
        return [{k: convert(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# --------------------------------------------------------------------------------------------
# circuits and shot records
# --------------------------------------------------------------------------------------------


def circuit_to_dict(c: Circuit) -> dict:
    return {
        "prep": list(c.prep),
        "layers": list(c.layers),
        "meas": list(c.meas),
        "target": c.target,
        "depth": c.depth,
        "tag": list(c.tag),
    }


def circuit_from_dict(d: dict) -> Circuit:
    try:
        target = int(d.get("target", 0))
        if target not in (0, 1):
            raise DataFormatError(f"target outcome must be 0 or 1, got {target}")
        circ = Circuit(
            prep=tuple(d["prep"]),
            layers=tuple(d["layers"]),
            meas=tuple(d["meas"]),
            target=target,
            tag=tuple(d.get("tag", ())),
        )
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"malformed circuit entry {d!r}: {exc}") from exc
    if "depth" in d and int(d["depth"]) != circ.depth:
        raise DataFormatError(f"circuit depth {d['depth']} disagrees with {circ.depth} layers")
    return circ


def dataset_to_dict(records: Sequence[ShotRecord]) -> dict:
    """Circuits listed once; each record refers to its circuit by index."""
    index: dict[Circuit, int] = {}
    circuits = []
    rows = []
    for r in records:
        if r.circuit not in index:
            index[r.circuit] = len(circuits)
            circuits.append(circuit_to_dict(r.circuit))
        rows.append({"circuit_id": index[r.circuit], "shots": r.shots, "count_target": r.count_target})
    return {"format": DATASET_FORMAT, "circuits": circuits, "records": rows}


def dataset_from_dict(d: dict) -> list[ShotRecord]:
    if not isinstance(d, dict) or "circuits" not in d or "records" not in d:
        raise DataFormatError("dataset needs 'circuits' and 'records' fields")
    circuits = [circuit_from_dict(c) for c in d["circuits"]]
    out = []
    for i, row in enumerate(d["records"]):
        try:
            cid, shots, count = int(row["circuit_id"]), int(row["shots"]), int(row["count_target"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"record {i}: {exc}") from exc
        if not 0 <= cid < len(circuits):
            raise DataFormatError(f"record {i}: circuit_id {cid} out of range")
        if shots <= 0 or not 0 <= count <= shots:
            raise DataFormatError(f"record {i}: need shots > 0 and 0 <= count_target <= shots")
        out.append(ShotRecord(circuits[cid], shots, count))
    return out


def write_dataset(path: str | Path, records: Sequence[ShotRecord]) -> Path:
    return write_json(path, dataset_to_dict(records))


def read_dataset(path: str | Path) -> list[ShotRecord]:
    return dataset_from_dict(read_json(path))


# --------------------------------------------------------------------------------------------
# DRB outputs
# --------------------------------------------------------------------------------------------


def fit_to_dict(fit: DecayFit) -> dict:
    return {
        "A": fit.A,
        "B": fit.B,
        "p": fit.p,
        "fidelity": fit.fidelity,
        "ci95": dict(sorted(fit.ci95.items())),
        "decay_identifiable": fit.decay_identifiable,
    }


def drb_to_dict(analysis: DrbAnalysis) -> dict:
    s = analysis.spam
    return {
        "target0": fit_to_dict(analysis.fit0),
        "target1": fit_to_dict(analysis.fit1),
        "pooled": fit_to_dict(analysis.pooled),
        "fidelity": analysis.fidelity,
        "fidelity_ci95": analysis.pooled.ci95.get("fidelity", float("nan")),
        "spam": {"p01": s.p01, "p10": s.p10, "ci95_p01": s.ci_p01, "ci95_p10": s.ci_p10},
    }


def decay_rows(analysis: DrbAnalysis) -> list[dict]:
    """Per-depth mean and spread of the success probability, one row per (target, depth)."""
    rows = []
    for target, fit in ((0, analysis.fit0), (1, analysis.fit1)):
        for (m, mean), (_, std) in zip(fit.per_depth_means, fit.per_depth_std):
            rows.append({"target": target, "depth": int(m), "mean_P": float(mean), "std_P": float(std)})
    return rows


DECAY_COLUMNS = ("target", "depth", "mean_P", "std_P")


# --------------------------------------------------------------------------------------------
# GST estimates
# --------------------------------------------------------------------------------------------


def _cplx(a: np.ndarray) -> dict:
    a = np.asarray(a)
    return {"real": a.real.tolist(), "imag": a.imag.tolist()}


def _uncplx(d) -> np.ndarray:
    try:
        return np.asarray(d["real"], dtype=float) + 1j * np.asarray(d["imag"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed complex array: {exc}") from exc


def estimate_to_dict(est: GateSetEstimate) -> dict:
    return {
        "format": ESTIMATE_FORMAT,
        "rho": _cplx(est.rho),
        "povm": [_cplx(e) for e in est.povm],
        "gates": {k: _cplx(v) for k, v in est.gates.items()},
        "loglik": est.loglik,
        "gauge_fixed": est.gauge_fixed,
    }


def estimate_from_dict(d: dict) -> GateSetEstimate:
    try:
        return GateSetEstimate(
            rho=_uncplx(d["rho"]),
            povm=[_uncplx(e) for e in d["povm"]],
            gates={k: _uncplx(v) for k, v in d["gates"].items()},
            loglik=d.get("loglik"),
            gauge_fixed=bool(d.get("gauge_fixed", False)),
        )
    except (KeyError, AttributeError) as exc:
        raise DataFormatError(f"malformed estimate: missing {exc}") from exc


def matrix_rows(m: np.ndarray) -> list[dict]:
    m = np.asarray(m)
    m2 = m.reshape(m.shape[0], -1) if m.ndim == 2 else m.reshape(-1, 1)
    return [
        {"row": i, "col": j, "real": float(m2[i, j].real), "imag": float(m2[i, j].imag)}
        for i in range(m2.shape[0])
        for j in range(m2.shape[1])
    ]


def write_matrix_csv(path: str | Path, m: np.ndarray) -> Path:
    return write_rows_csv(path, matrix_rows(m), ("row", "col", "real", "imag"))


def read_matrix_csv(path: str | Path) -> np.ndarray:
    rows = read_rows_csv(path)
    if not rows:
        raise DataFormatError(f"{path}: empty matrix file")
    try:
        n = max(r["row"] for r in rows) + 1
        k = max(r["col"] for r in rows) + 1
        out = np.zeros((n, k), dtype=complex)
        for r in rows:
            out[r["row"], r["col"]] = float(r["real"]) + 1j * float(r["imag"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed matrix rows: {exc}") from exc
    return out


def write_estimate_csvs(out_dir: str | Path, est: GateSetEstimate, prefix: str) -> list[Path]:
    """One matrix CSV per gate plus the state and POVM, all vectorized/superoperator form."""
    out_dir = Path(out_dir)
    paths = [write_matrix_csv(out_dir / f"{prefix}_rho.csv", est.rho)]
    for a, e in enumerate(est.povm):
        paths.append(write_matrix_csv(out_dir / f"{prefix}_povm{a}.csv", e))
    for label, g in est.gates.items():
        paths.append(write_matrix_csv(out_dir / f"{prefix}_gate_{label}.csv", g))
    return paths


# --------------------------------------------------------------------------------------------
# calibration maps
# --------------------------------------------------------------------------------------------

CALIBRATION_COLUMNS = ("k", "phi_rad", "score", "log_score")


def calibration_rows(cmap) -> list[dict]:
    logs = cmap.log_scores
    return [
        {"k": float(k), "phi_rad": float(p), "score": float(math.exp(logs[i, j])), "log_score": float(logs[i, j])}
        for i, k in enumerate(cmap.k_grid)
        for j, p in enumerate(cmap.phi_grid)
    ]


def read_calibration_csv(path: str | Path):
    """``(k_grid, phi_grid, log_scores)`` reassembled from a map CSV."""
    rows = read_rows_csv(path)
    if not rows:
        raise DataFormatError(f"{path}: empty calibration map")
    ks = sorted({float(r["k"]) for r in rows})
    ps = sorted({float(r["phi_rad"]) for r in rows})
    logs = np.full((len(ks), len(ps)), np.nan)
    ki = {k: i for i, k in enumerate(ks)}
    pi = {p: j for j, p in enumerate(ps)}
    for r in rows:
        logs[ki[float(r["k"])], pi[float(r["phi_rad"])]] = float(r["log_score"])
    return np.array(ks), np.array(ps), logs
