"""File formats for measured traces and fit results.

Absorption-trace CSV: optional '#' comment lines, then a header row
``field_mT,<kind>[,theta_deg]`` where ``<kind>`` is ``q_m`` or ``tan_ions``,
followed by numeric rows. S21 CSV: header ``freq_GHz,re,im`` (complex) or
``freq_GHz,mag`` (magnitude-only). Fit results serialize to JSON with full
parameter, uncertainty and residual records.
"""

from __future__ import annotations

import json

import numpy as np

from .lossfit import FitResult, NotchFit, S21Trace

__all__ = [
    "load_trace_csv",
    "save_trace_csv",
    "load_s21_csv",
    "save_s21_csv",
    "fit_result_to_dict",
    "save_fit_result_json",
    "notch_fit_to_dict",
]

TRACE_KINDS = ("q_m", "tan_ions")


def _read_csv(path):
    header = None
    rows = []
    comments = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line.lstrip("# "))
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = cells
            else:
                rows.append([float(c) for c in cells])
    if header is None or not rows:
        raise ValueError(f"{path}: no tabular data found")
    return header, np.array(rows), comments


def load_trace_csv(path):
    """Read an absorption trace; returns (field_mt, values, kind, theta_deg)."""
    header, data, _ = _read_csv(path)
    if len(header) < 2 or header[0] != "field_mT":
        raise ValueError(f"{path}: expected header starting with field_mT, got {header}")
    kind = header[1]
    if kind not in TRACE_KINDS:
        raise ValueError(f"{path}: value column must be one of {TRACE_KINDS}, got {kind!r}")
    theta = None
    if len(header) >= 3:
        if header[2] != "theta_deg":
            raise ValueError(f"{path}: third column must be theta_deg, got {header[2]!r}")
        theta = float(data[0, 2])
    field = data[:, 0]
    if np.any(np.diff(field) <= 0):
        raise ValueError(f"{path}: field axis must be strictly increasing")
    return field, data[:, 1], kind, theta


def save_trace_csv(path, field_mt, values, kind: str, theta_deg=None, header_lines=()):
    if kind not in TRACE_KINDS:
        raise ValueError(f"kind must be one of {TRACE_KINDS}")
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        cols = f"field_mT,{kind}" + (",theta_deg" if theta_deg is not None else "")
        fh.write(cols + "\n")
        for b, v in zip(field_mt, values):
            row = f"{b:.9e},{v:.9e}"
            if theta_deg is not None:
                row += f",{theta_deg:.9e}"
            fh.write(row + "\n")


def load_s21_csv(path) -> S21Trace:
    """Read a transmission sweep (complex re/im or magnitude-only)."""
    header, data, _ = _read_csv(path)
    if header[0] != "freq_GHz":
        raise ValueError(f"{path}: expected first column freq_GHz, got {header[0]!r}")
    if header[1:3] == ["re", "im"]:
        s21 = data[:, 1] + 1j * data[:, 2]
    elif header[1] == "mag":
        s21 = data[:, 1]
    else:
        raise ValueError(f"{path}: expected columns re,im or mag, got {header[1:]}")
    return S21Trace(freq_ghz=data[:, 0], s21=s21)


def save_s21_csv(path, trace: S21Trace, header_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        if trace.is_complex:
            fh.write("freq_GHz,re,im\n")
            for f, z in zip(trace.freq_ghz, trace.s21):
                fh.write(f"{f:.9e},{z.real:.9e},{z.imag:.9e}\n")
        else:
            fh.write("freq_GHz,mag\n")
            for f, v in zip(trace.freq_ghz, trace.s21):
                fh.write(f"{f:.9e},{v:.9e}\n")


def fit_result_to_dict(result: FitResult, provenance=None) -> dict:
    out = {
        "model": "single-mode cavity-spin absorption",
        "kappa_mhz": result.kappa_mhz,
        "f_r_ghz": result.f_r_ghz,
        "residual_rms": result.residual_rms,
        "converged": result.converged,
        "message": result.message,
        "degenerate": result.degenerate,
        "peaks": [
            {
                "label": p.label,
                "b_f_mt": p.b_f_mt,
                "gamma_mhz": p.gamma_mhz,
                "g_c_mhz": p.g_c_mhz,
                "gradient_mhz_per_mt": p.gradient_mhz_per_mt,
                "uncertainty": result.uncertainties[k] if k < len(result.uncertainties) else {},
            }
            for k, p in enumerate(result.peaks)
        ],
        "covariance": np.asarray(result.covariance).tolist(),
    }
    if provenance:
        out["provenance"] = provenance
    return out


def save_fit_result_json(path, result: FitResult, provenance=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_result_to_dict(result, provenance), fh, indent=2)
        fh.write("\n")


def notch_fit_to_dict(fit: NotchFit, kappa_configured_mhz=None, provenance=None) -> dict:
    kappa_derived = fit.f_r_ghz * (1.0 / fit.q_i + 1.0 / fit.q_c) * 1e3
    out = {
        "f_r_ghz": fit.f_r_ghz,
        "q_i": fit.q_i,
        "q_c": fit.q_c,
        "q_m": fit.q_m,
        "amplitude": fit.amplitude,
        "kappa_derived_mhz": kappa_derived,
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
        "message": fit.message,
    }
    if kappa_configured_mhz is not None:
        out["kappa_configured_mhz"] = kappa_configured_mhz
    if provenance:
        out["provenance"] = provenance
    return out
