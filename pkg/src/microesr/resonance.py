"""Resonance-field search and mode-resolved transition intensities.

For a fixed field direction the level diagram is swept over field magnitude;
every level pair whose transition frequency crosses the resonator frequency
yields one resonance. Intensities combine a Boltzmann population difference
with the microwave matrix elements of the exciting region.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import spincore
from .constants import K_B_OVER_H_GHZ_PER_K
from .geometry import ModeRegion, lab_to_crystal
from .kernels import eigvals_sweep
from .spincore import SpinSystem, crystal_field_matrix, eigensolve, spin_matrices, zeeman_matrix

__all__ = [
    "ResonatorSpec",
    "Transition",
    "q_to_kappa",
    "transition_frequencies",
    "find_resonance_fields",
    "boltzmann_populations",
    "transition_intensity",
    "orientation_transitions",
    "INTENSITY_THRESHOLD",
]

# Transitions weaker than this fraction of the strongest at an orientation
# are kept but flagged; they are expected to be unobservable.
INTENSITY_THRESHOLD = 1e-4


def q_to_kappa(f_r_ghz: float, q_i: float, q_c: float) -> float:
    """Total line-width kappa in MHz from internal and coupling Q factors."""
    if q_i <= 0 or q_c <= 0:
        raise ValueError("quality factors must be positive")
    return f_r_ghz * (1.0 / q_i + 1.0 / q_c) * 1e3


@dataclass(frozen=True)
class ResonatorSpec:
    """Fixed-frequency readout resonator.

    `kappa_mhz` is the line-width used by the loss model. When both quality
    factors are given the Q-derived value is also retained (`kappa_derived_mhz`);
    the two need not agree and both are reported by the CLI.
    """

    f_r_ghz: float
    kappa_mhz: float
    q_i: float | None = None
    q_c: float | None = None

    def __post_init__(self):
        if self.f_r_ghz <= 0:
            raise ValueError("resonator frequency must be positive")
        if self.kappa_mhz <= 0:
            raise ValueError("resonator line-width must be positive")
        for name in ("q_i", "q_c"):
            q = getattr(self, name)
            if q is not None and q <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def f_r_mhz(self) -> float:
        return self.f_r_ghz * 1e3

    @property
    def kappa_derived_mhz(self) -> float | None:
        if self.q_i is None or self.q_c is None:
            return None
        return q_to_kappa(self.f_r_ghz, self.q_i, self.q_c)


@dataclass(frozen=True)
class Transition:
    """One level pair degenerate with the resonator at `field_mt`."""

    level_pair: tuple[int, int]
    field_mt: float
    frequency_mhz: float
    gradient_mhz_per_mt: float
    mode: str | None = None
    site: int | None = None
    intensity: float | None = None
    below_threshold: bool = False


def transition_frequencies(sys: SpinSystem, direction, magnitude_mt: float) -> np.ndarray:
    """Matrix f[i, j] = E_j - E_i (MHz) at the given field; >= 0 above the diagonal."""
    if magnitude_mt < 0:
        raise ValueError("field magnitude must be non-negative")
    h = crystal_field_matrix(sys) + magnitude_mt * zeeman_matrix(sys, direction)
    levels = eigensolve(h).levels
    return levels[None, :] - levels[:, None]


def _pair_frequency(levels_row: np.ndarray, i: int, j: int) -> float:
    return float(levels_row[j] - levels_row[i])


def find_resonance_fields(
    sys: SpinSystem,
    resonator: ResonatorSpec,
    direction,
    field_range_mt: tuple[float, float] = (0.0, 120.0),
    grid_step_mt: float = 0.1,
    freq_tol_mhz: float = 0.001,
    gradient_step_mt: float = 0.01,
    merge_tol_mt: float = 0.01,
) -> list[Transition]:
    """All fields in range where some pair frequency equals the resonator's.

    A dense grid scan brackets sign changes of ``f_ij(B) - f_r`` for every
    level pair; each bracket is refined by bisection to `freq_tol_mhz`. The
    local slope df/dB is recorded by central finite difference. Duplicate
    roots of the same pair closer than `merge_tol_mt` are merged. Mode, site
    and intensity are left unset.
    """
    b_lo, b_hi = map(float, field_range_mt)
    if not (np.isfinite(b_lo) and np.isfinite(b_hi)) or b_hi <= b_lo:
        raise ValueError("field range must be finite with stop > start")
    if grid_step_mt <= 0:
        raise ValueError("grid step must be positive")

    h_cf = crystal_field_matrix(sys)
    h_z = zeeman_matrix(sys, direction)
    f_r = resonator.f_r_mhz

    n_steps = int(round((b_hi - b_lo) / grid_step_mt))
    fields = b_lo + grid_step_mt * np.arange(n_steps + 1)
    if fields[-1] < b_hi - 1e-9:
        fields = np.append(fields, b_hi)
    levels = eigvals_sweep(h_cf, h_z, fields)

    dim = levels.shape[1]
    found: list[Transition] = []
    for i in range(dim):
        for j in range(i + 1, dim):
            gap = levels[:, j] - levels[:, i] - f_r
            roots = _bracket_roots(h_cf, h_z, i, j, fields, gap, f_r, freq_tol_mhz)
            for b_root, f_root in _merge_close(roots, merge_tol_mt):
                grad = _pair_gradient(h_cf, h_z, i, j, b_root, gradient_step_mt, b_lo)
                found.append(
                    Transition(
                        level_pair=(i, j),
                        field_mt=b_root,
                        frequency_mhz=f_root,
                        gradient_mhz_per_mt=grad,
                    )
                )
    found.sort(key=lambda t: (t.field_mt, t.level_pair))
    return found


def _eig_at(h_cf: np.ndarray, h_z: np.ndarray, b: float) -> np.ndarray:
    return eigvals_sweep(h_cf, h_z, np.array([b]))[0]


def _bracket_roots(h_cf, h_z, i, j, fields, gap, f_r, tol, max_iter=100):
    """Bisect every sign change of `gap` on the grid; returns (field, f_ij) pairs."""
    roots = []
    for k in np.flatnonzero(np.signbit(gap[:-1]) != np.signbit(gap[1:])):
        lo, hi = fields[k], fields[k + 1]
        g_lo = gap[k]
        if g_lo == 0.0:
            roots.append((float(lo), f_r))
            continue
        b_mid, g_mid = lo, g_lo
        for _ in range(max_iter):
            b_mid = 0.5 * (lo + hi)
            row = _eig_at(h_cf, h_z, b_mid)
            g_mid = _pair_frequency(row, i, j) - f_r
            if abs(g_mid) <= tol:
                break
            if (g_mid < 0) == (g_lo < 0):
                lo, g_lo = b_mid, g_mid
            else:
                hi = b_mid
        roots.append((float(b_mid), g_mid + f_r))
    # An exact zero at the last grid point has no right neighbour sign change.
    if gap[-1] == 0.0:
        roots.append((float(fields[-1]), f_r))
    return roots


def _merge_close(roots, merge_tol):
    if not roots:
        return []
    roots = sorted(roots)
    merged = [roots[0]]
    for b, f in roots[1:]:
        if b - merged[-1][0] <= merge_tol:
            merged[-1] = (0.5 * (b + merged[-1][0]), 0.5 * (f + merged[-1][1]))
        else:
            merged.append((b, f))
    return merged


def _pair_gradient(h_cf, h_z, i, j, b, step, b_lo):
    lo = max(b - step, b_lo)
    hi = b + step
    row_hi = _eig_at(h_cf, h_z, hi)
    row_lo = _eig_at(h_cf, h_z, lo)
    return (_pair_frequency(row_hi, i, j) - _pair_frequency(row_lo, i, j)) / (hi - lo)


def boltzmann_populations(levels_mhz: np.ndarray, temperature_k: float) -> np.ndarray:
    """Normalized thermal populations of the given energy levels (MHz)."""
    if temperature_k <= 0:
        raise ValueError("temperature must be positive")
    levels = np.asarray(levels_mhz, dtype=float)
    kt_mhz = K_B_OVER_H_GHZ_PER_K * 1e3 * temperature_k
    weights = np.exp(-(levels - levels.min()) / kt_mhz)
    return weights / weights.sum()


def transition_intensity(
    sys: SpinSystem,
    states: np.ndarray,
    level_pair: tuple[int, int],
    bmw_dirs: np.ndarray,
    populations: np.ndarray,
) -> float:
    """Population-weighted microwave matrix element for one transition.

    ``(p_i - p_j) * sum_axes |<j| S.n |i>|^2`` with eigenvector columns in
    `states` and unit microwave directions (site frame) in `bmw_dirs`.
    """
    i, j = level_pair
    sx, sy, sz = spin_matrices(sys.s)
    vi = states[:, i]
    vj = states[:, j]
    element = 0.0
    for n in np.atleast_2d(bmw_dirs):
        op = n[0] * sx + n[1] * sy + n[2] * sz
        element += abs(np.vdot(vj, op @ vi)) ** 2
    return float((populations[i] - populations[j]) * element)


def orientation_transitions(
    sys: SpinSystem,
    resonator: ResonatorSpec,
    regions,
    theta_deg: float,
    temperature_k: float = 0.25,
    sense: int = +1,
    field_range_mt: tuple[float, float] = (0.0, 120.0),
    grid_step_mt: float = 0.1,
    sites: tuple[int, ...] | None = None,
    intensity_threshold: float = INTENSITY_THRESHOLD,
    **search_kwargs,
) -> list[Transition]:
    """All transitions at one orientation, over regions and sites, with intensities.

    `sites` selects site indices (default: all of `sys.sites`). Transitions
    weaker than `intensity_threshold` times the strongest at this orientation
    are flagged `below_threshold` but retained.
    """
    site_indices = tuple(range(len(sys.sites))) if sites is None else tuple(sites)
    out: list[Transition] = []
    for region in regions:
        for site_idx in site_indices:
            b0, bmw = lab_to_crystal(theta_deg, region, sys.sites[site_idx], sense=sense)
            hits = find_resonance_fields(
                sys, resonator, b0, field_range_mt, grid_step_mt, **search_kwargs
            )
            if not hits:
                continue
            h_cf = crystal_field_matrix(sys)
            h_z = zeeman_matrix(sys, b0)
            for t in hits:
                eig = eigensolve(h_cf + t.field_mt * h_z)
                pops = boltzmann_populations(eig.levels, temperature_k)
                weight = transition_intensity(sys, eig.states, t.level_pair, bmw, pops)
                out.append(replace(t, mode=region.label, site=site_idx, intensity=weight))
    if out:
        strongest = max(t.intensity for t in out)
        if strongest > 0:
            out = [
                replace(t, below_threshold=t.intensity < intensity_threshold * strongest)
                for t in out
            ]
    out.sort(key=lambda t: (t.field_mt, t.mode or "", t.site or 0, t.level_pair))
    return out


def remove_site(sys: SpinSystem, site_idx: int) -> SpinSystem:
    """Copy of `sys` with one site rotation removed (for site-attribution checks)."""
    sites = tuple(s for k, s in enumerate(sys.sites) if k != site_idx)
    return spincore.SpinSystem(s=sys.s, g=sys.g, cf=sys.cf, sites=sites, ensemble_n=sys.ensemble_n)
