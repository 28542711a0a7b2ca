"""Loss-tangent reduction and cavity-spin absorption fitting.

The measured quality factor of the driven resonator at spin-cavity detuning
``delta`` follows the single-mode model

    q_m(delta) = omega_r * (delta^2 + gamma^2)
                 / (2 g_c^2 gamma + kappa * (delta^2 + gamma^2))

with every rate (kappa, gamma, g_c, delta) an ordinary frequency in MHz and
omega_r = f_r in MHz (the 2-pi factors cancel in the ratio). Equivalently,
each spin packet adds an ion loss tangent

    tan_ions(delta) = 2 g_c^2 gamma / (omega_r * (delta^2 + gamma^2))

on top of the cavity baseline kappa/omega_r, which makes multi-peak fitting
additive in 1/Q. Detuning is mapped onto the swept field through each peak's
transition gradient: delta = gradient * (field - b_f).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .optimize import LeastSquaresResult, damped_least_squares

__all__ = [
    "S21Trace",
    "PeakModel",
    "FitResult",
    "NotchFit",
    "LossBudget",
    "NoDipError",
    "eq1_qm",
    "eq1_tan_ions",
    "multipeak_qm",
    "multipeak_tan_ions",
    "fit_s21_notch",
    "decompose_loss",
    "fit_multipeak",
    "rms_model_fit_deviation",
    "DEFAULT_GRADIENT_MHZ_PER_MT",
]

# Free-spin slope g * mu_B/h for g = 1.9912; used when a peak has no
# model-supplied gradient.
DEFAULT_GRADIENT_MHZ_PER_MT = 27.8693

GAMMA_MAX_MHZ = 1e4
G_C_MAX_MHZ = 1e3


class NoDipError(ValueError):
    """The transmission trace contains no resolvable resonance dip."""


@dataclass(frozen=True)
class S21Trace:
    """One transmission sweep: frequency axis (GHz) and complex or |S21| data."""

    freq_ghz: np.ndarray
    s21: np.ndarray
    field_mt: float | None = None
    theta_deg: float | None = None

    def __post_init__(self):
        freq = np.asarray(self.freq_ghz, dtype=float)
        s21 = np.asarray(self.s21)
        if freq.ndim != 1 or freq.size < 5 or freq.size != s21.size:
            raise ValueError("trace needs matching 1-d axes with at least 5 points")
        if not np.all(np.diff(freq) > 0):
            raise ValueError("frequency axis must be strictly increasing")
        object.__setattr__(self, "freq_ghz", freq)
        object.__setattr__(self, "s21", s21)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.s21)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.s21)


@dataclass(frozen=True)
class PeakModel:
    """One absorption peak: centre field, line-width, collective coupling."""

    b_f_mt: float
    gamma_mhz: float
    g_c_mhz: float
    gradient_mhz_per_mt: float = DEFAULT_GRADIENT_MHZ_PER_MT
    label: str = ""

    def __post_init__(self):
        if self.gamma_mhz <= 0:
            raise ValueError("gamma must be positive")
        if self.g_c_mhz < 0:
            raise ValueError("g_c must be non-negative")
        if self.gradient_mhz_per_mt == 0:
            raise ValueError("gradient must be nonzero")


@dataclass
class FitResult:
    """Converged (or best-so-far) multi-peak fit with diagnostics."""

    peaks: list[PeakModel]
    kappa_mhz: float
    f_r_ghz: float
    residual_rms: float
    covariance: np.ndarray
    converged: bool
    message: str
    degenerate: bool = False
    uncertainties: list[dict] = dc_field(default_factory=list)


@dataclass
class NotchFit:
    """Notch-model parameters extracted from one S21 trace."""

    f_r_ghz: float
    q_i: float
    q_c: float
    q_m: float
    amplitude: float
    residual_rms: float
    converged: bool
    message: str


def eq1_qm(delta_mhz, gamma_mhz: float, g_c_mhz: float, kappa_mhz: float, f_r_ghz: float):
    """Measured quality factor at detuning delta (MHz); vectorized in delta."""
    if gamma_mhz <= 0 or kappa_mhz <= 0:
        raise ValueError("gamma and kappa must be positive")
    delta = np.asarray(delta_mhz, dtype=float)
    omega = f_r_ghz * 1e3
    num = delta**2 + gamma_mhz**2
    out = omega * num / (2.0 * g_c_mhz**2 * gamma_mhz + kappa_mhz * num)
    return out if out.ndim else float(out)


def eq1_tan_ions(delta_mhz, gamma_mhz: float, g_c_mhz: float, f_r_ghz: float):
    """Ion loss tangent of one peak at detuning delta (MHz); baseline removed."""
    if gamma_mhz <= 0:
        raise ValueError("gamma must be positive")
    delta = np.asarray(delta_mhz, dtype=float)
    omega = f_r_ghz * 1e3
    out = 2.0 * g_c_mhz**2 * gamma_mhz / (omega * (delta**2 + gamma_mhz**2))
    return out if out.ndim else float(out)


def multipeak_tan_ions(field_mt, peaks, f_r_ghz: float):
    """Sum of per-peak ion loss tangents along a field axis."""
    field = np.asarray(field_mt, dtype=float)
    total = np.zeros_like(field)
    for p in peaks:
        delta = p.gradient_mhz_per_mt * (field - p.b_f_mt)
        total += eq1_tan_ions(delta, p.gamma_mhz, p.g_c_mhz, f_r_ghz)
    return total


def multipeak_qm(field_mt, peaks, kappa_mhz: float, f_r_ghz: float):
    """Measured Q along a field axis: cavity baseline plus additive ion losses."""
    omega = f_r_ghz * 1e3
    inv_q = kappa_mhz / omega + multipeak_tan_ions(field_mt, peaks, f_r_ghz)
    return 1.0 / inv_q


def _notch_model(freq_ghz, f_r, q_m, q_c, amplitude):
    s = 1.0 - (q_m / q_c) / (1.0 + 2j * q_m * (freq_ghz - f_r) / f_r)
    return amplitude * s


def fit_s21_notch(trace: S21Trace) -> NotchFit:
    """Least-squares notch fit returning (f_r, Q_i, Q_c, Q_m).

    Model: ``S21(f) = a * (1 - (Q_m/Q_c) / (1 + 2i Q_m (f - f_r)/f_r))`` with
    ``1/Q_m = 1/Q_i + 1/Q_c`` and a real amplitude nuisance parameter a.
    Magnitude-only traces are fit on |S21|. Raises NoDipError on flat traces.
    """
    freq = trace.freq_ghz
    mag = trace.magnitude.astype(float)

    baseline = float(np.median(mag))
    if baseline <= 0:
        raise NoDipError("trace magnitude is not positive")
    depth = baseline - float(mag.min())
    noise = 1.4826 * float(np.median(np.abs(np.diff(mag)))) / np.sqrt(2.0)
    if depth <= max(8.0 * noise, 1e-9 * baseline):
        raise NoDipError(
            f"no dip detected (depth {depth:.3g} vs noise {noise:.3g}, baseline {baseline:.3g})"
        )

    # Initial guesses from the dip geometry.
    i_min = int(np.argmin(mag))
    f_r0 = float(freq[i_min])
    rel_depth = min(depth / baseline, 1.0 - 1e-6)
    half = baseline - 0.5 * depth
    below = np.flatnonzero(mag < half)
    if below.size >= 2:
        fwhm = float(freq[below[-1]] - freq[below[0]])
    else:
        fwhm = float(freq[-1] - freq[0]) / 10.0
    fwhm = max(fwhm, float(np.min(np.diff(freq))))
    q_m0 = f_r0 / fwhm
    q_c0 = q_m0 / rel_depth

    if trace.is_complex:
        data = np.concatenate([trace.s21.real, trace.s21.imag])

        def residual(x):
            model = _notch_model(freq, x[0], x[1], x[2], x[3])
            return np.concatenate([model.real, model.imag]) - data

    else:

        def residual(x):
            return np.abs(_notch_model(freq, x[0], x[1], x[2], x[3])) - mag

    x0 = np.array([f_r0, q_m0, q_c0, baseline])
    lo = np.array([freq[0], 1.0, 1.0, 1e-12])
    hi = np.array([freq[-1], np.inf, np.inf, np.inf])
    res = damped_least_squares(residual, x0, bounds=(lo, hi))

    f_r, q_m, q_c, amplitude = res.x
    if q_c <= q_m:
        # Unphysical ordering (would give negative Q_i): q_m approaches q_c
        # from below for an over-coupled lossless resonator.
        q_c = max(q_c, q_m * (1 + 1e-9))
    q_i = 1.0 / (1.0 / q_m - 1.0 / q_c)
    return NotchFit(
        f_r_ghz=float(f_r),
        q_i=float(q_i),
        q_c=float(q_c),
        q_m=float(q_m),
        amplitude=float(amplitude),
        residual_rms=res.residual_rms,
        converged=res.converged,
        message=res.message,
    )


@dataclass(frozen=True)
class LossBudget:
    """Per-field loss tangent decomposition; tan_m = tan_c + tan_int exactly."""

    field_mt: np.ndarray
    tan_m: np.ndarray
    tan_c: float
    tan_int: np.ndarray
    tan_b: np.ndarray
    negative_tan_int: bool

    @property
    def tan_ions(self) -> np.ndarray:
        # Other field-induced losses are assumed negligible.
        return self.tan_b


def decompose_loss(field_mt, q_m, q_c: float, zero_field_tan_int: float) -> LossBudget:
    """Split measured 1/Q into coupling, intrinsic and field-dependent channels."""
    field = np.asarray(field_mt, dtype=float)
    q_m = np.asarray(q_m, dtype=float)
    if q_c <= 0 or np.any(q_m <= 0):
        raise ValueError("quality factors must be positive")
    tan_m = 1.0 / q_m
    tan_c = 1.0 / q_c
    tan_int = tan_m - tan_c
    negative = bool(np.any(tan_int < 0))
    if negative:
        warnings.warn("negative intrinsic loss; coupling Q is likely overestimated", stacklevel=2)
    tan_b = tan_int - zero_field_tan_int
    return LossBudget(
        field_mt=field,
        tan_m=tan_m,
        tan_c=tan_c,
        tan_int=tan_int,
        tan_b=tan_b,
        negative_tan_int=negative,
    )


def fit_multipeak(
    field_mt,
    values,
    seeds,
    kappa_mhz: float,
    f_r_ghz: float,
    kind: str = "q_m",
    fit_kappa: bool = False,
    gamma_max_mhz: float = GAMMA_MAX_MHZ,
    g_c_max_mhz: float = G_C_MAX_MHZ,
    max_iter: int = 500,
) -> FitResult:
    """Nonlinear least squares over {b_f, gamma, g_c} per peak, kappa fixed.

    `kind` selects the measured quantity: "q_m" traces are fit with the full
    cavity model, "tan_ions" traces with the baseline-free additive form (the
    two agree through the 1/Q identity). ``fit_kappa=True`` releases the
    cavity line-width as an extra parameter (only meaningful for "q_m").
    Non-convergence at the iteration cap reports the best-so-far parameters
    flagged ``converged=False``; a near-singular parameter covariance
    (overlapping seeds) sets ``degenerate=True``.
    """
    field = np.asarray(field_mt, dtype=float)
    data = np.asarray(values, dtype=float)
    if field.size != data.size or field.size < 3:
        raise ValueError("field and value arrays must match with at least 3 points")
    if np.any(np.diff(field) <= 0):
        raise ValueError("field axis must be strictly increasing")
    if kind not in ("q_m", "tan_ions"):
        raise ValueError(f"unknown trace kind {kind!r}")
    if fit_kappa and kind != "q_m":
        raise ValueError("kappa only enters the q_m model; tan_ions traces cannot fit it")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed peak is required")

    gradients = [p.gradient_mhz_per_mt for p in seeds]
    labels = [p.label for p in seeds]

    def unpack(x):
        return [
            PeakModel(
                b_f_mt=float(x[3 * k]),
                gamma_mhz=float(x[3 * k + 1]),
                g_c_mhz=float(x[3 * k + 2]),
                gradient_mhz_per_mt=gradients[k],
                label=labels[k],
            )
            for k in range(len(seeds))
        ]

    if kind == "q_m":

        def residual(x):
            kap = x[-1] if fit_kappa else kappa_mhz
            return multipeak_qm(field, unpack(x), kap, f_r_ghz) - data

    else:

        def residual(x):
            return multipeak_tan_ions(field, unpack(x), f_r_ghz) - data

    x0 = np.array([v for p in seeds for v in (p.b_f_mt, p.gamma_mhz, p.g_c_mhz)])
    span = field[-1] - field[0]
    lo = np.array([v for _ in seeds for v in (field[0] - span, 1e-6, 0.0)])
    hi = np.array([v for _ in seeds for v in (field[-1] + span, gamma_max_mhz, g_c_max_mhz)])
    if fit_kappa:
        x0 = np.append(x0, kappa_mhz)
        lo = np.append(lo, 1e-9)
        hi = np.append(hi, np.inf)

    res = damped_least_squares(residual, x0, bounds=(lo, hi), max_iter=max_iter)

    peaks = unpack(res.x)
    if fit_kappa:
        kappa_mhz = float(res.x[-1])
    errs = np.sqrt(np.maximum(np.diag(res.covariance), 0.0))
    uncertainties = [
        {
            "b_f_mt": float(errs[3 * k]),
            "gamma_mhz": float(errs[3 * k + 1]),
            "g_c_mhz": float(errs[3 * k + 2]),
        }
        for k in range(len(seeds))
    ]
    return FitResult(
        peaks=peaks,
        kappa_mhz=kappa_mhz,
        f_r_ghz=f_r_ghz,
        residual_rms=res.residual_rms,
        covariance=res.covariance,
        converged=res.converged,
        message=res.message,
        degenerate=res.degenerate,
        uncertainties=uncertainties,
    )


def rms_model_fit_deviation(modelled_mt, fitted_mt) -> float:
    """Mean absolute percentage deviation between modelled and fitted fields."""
    modelled = np.asarray(modelled_mt, dtype=float)
    fitted = np.asarray(fitted_mt, dtype=float)
    if modelled.shape != fitted.shape or modelled.ndim != 1 or modelled.size == 0:
        raise ValueError("modelled and fitted field lists must have equal nonzero length")
    if np.any(modelled <= 0) or np.any(fitted <= 0):
        raise ValueError("fields must be positive")
    return float(np.mean(np.abs(modelled - fitted) / fitted) * 100.0)
