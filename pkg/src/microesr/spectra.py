"""Angular absorption maps: assembly, edge filtering, CSV/SVG export.

A map is a rotation-angle x field grid of absorption intensity. Simulated
maps superpose every transition of every region and site, rendered as an
area-normalized Lorentzian along the field axis (line-width converted from
MHz through the local transition gradient) and weighted by transition
intensity times the region's area fraction. Rendering is cosmetic; the
physics is carried by the line positions and weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import ModeRegion
from .resonance import ResonatorSpec, orientation_transitions
from .spincore import SpinSystem

__all__ = [
    "AngularSpectrum",
    "simulate_angular_map",
    "edge_filter",
    "export_map_csv",
    "load_map_csv",
    "export_map_svg",
    "mode_intensity_split",
]

DEFAULT_RENDER_LINEWIDTH_MHZ = 50.0

# Transitions flatter than this (MHz/mT) render with a capped field width to
# keep anticrossing regions from painting the whole axis.
MIN_RENDER_GRADIENT = 1e-3


@dataclass(frozen=True)
class AngularSpectrum:
    """Rotation x field intensity grid with provenance."""

    thetas_deg: np.ndarray
    fields_mt: np.ndarray
    intensity: np.ndarray
    provenance: str = "simulated"

    def __post_init__(self):
        thetas = np.asarray(self.thetas_deg, dtype=float)
        fields = np.asarray(self.fields_mt, dtype=float)
        grid = np.asarray(self.intensity, dtype=float)
        if grid.shape != (thetas.size, fields.size):
            raise ValueError(
                f"grid shape {grid.shape} does not match axes ({thetas.size}, {fields.size})"
            )
        if not np.all(np.isfinite(grid)):
            raise ValueError("intensities must be finite")
        if self.provenance.startswith("simulated") and np.any(grid < -1e-12):
            raise ValueError("simulated intensities must be non-negative")
        object.__setattr__(self, "thetas_deg", thetas)
        object.__setattr__(self, "fields_mt", fields)
        object.__setattr__(self, "intensity", grid)


def _lorentzian_area_norm(x, center, fwhm):
    half = fwhm / 2.0
    return (half / np.pi) / ((x - center) ** 2 + half**2)


def simulate_angular_map(
    sys: SpinSystem,
    resonator: ResonatorSpec,
    regions,
    thetas_deg,
    fields_mt,
    render_linewidth_mhz: float = DEFAULT_RENDER_LINEWIDTH_MHZ,
    temperature_k: float = 0.25,
    sense: int = +1,
    grid_step_mt: float | None = None,
    progress=None,
) -> AngularSpectrum:
    """Simulated angular map over the given orientation and field axes.

    `grid_step_mt` is the resonance-search grid (defaults to the field-axis
    spacing). `progress`, when given, is called with (index, n_thetas) after
    each orientation.
    """
    regions = list(regions)
    if not regions:
        thetas = np.asarray(thetas_deg, dtype=float)
        fields = np.asarray(fields_mt, dtype=float)
        return AngularSpectrum(thetas, fields, np.zeros((thetas.size, fields.size)))
    if render_linewidth_mhz <= 0:
        raise ValueError("render line-width must be positive")

    thetas = np.asarray(thetas_deg, dtype=float)
    fields = np.asarray(fields_mt, dtype=float)
    if grid_step_mt is None:
        grid_step_mt = float(np.min(np.diff(fields))) if fields.size > 1 else 0.1
    field_range = (float(fields.min()), float(fields.max()))

    total_area = sum(r.area_um2 for r in regions)
    area_frac = {r.label: r.area_um2 / total_area for r in regions}

    grid = np.zeros((thetas.size, fields.size))
    for k, theta in enumerate(thetas):
        for t in orientation_transitions(
            sys,
            resonator,
            regions,
            theta,
            temperature_k=temperature_k,
            sense=sense,
            field_range_mt=field_range,
            grid_step_mt=grid_step_mt,
        ):
            weight = t.intensity * area_frac[t.mode]
            if weight == 0.0:
                continue
            slope = max(abs(t.gradient_mhz_per_mt), MIN_RENDER_GRADIENT)
            fwhm_mt = render_linewidth_mhz / slope
            grid[k] += weight * _lorentzian_area_norm(fields, t.field_mt, fwhm_mt)
        if progress is not None:
            progress(k + 1, thetas.size)
    return AngularSpectrum(thetas, fields, grid)


def mode_intensity_split(
    sys: SpinSystem,
    resonator: ResonatorSpec,
    regions,
    theta_deg: float,
    temperature_k: float = 0.25,
    sense: int = +1,
    **kwargs,
) -> dict[str, float]:
    """Summed raw transition intensity per mode label at one orientation."""
    sums: dict[str, float] = {r.label: 0.0 for r in regions}
    for t in orientation_transitions(
        sys, resonator, regions, theta_deg, temperature_k=temperature_k, sense=sense, **kwargs
    ):
        sums[t.mode] += t.intensity
    return sums


def edge_filter(spec: AngularSpectrum, scale: str = "linear") -> AngularSpectrum:
    """Signed central-difference derivative along the field axis.

    Linear in the input (so superposed maps filter term by term); end points
    use one-sided differences to preserve the grid shape. ``scale="log"``
    differentiates log10 of the intensity instead (floored well below the
    data to keep zeros finite).
    """
    if spec.intensity.shape[0] < 3 or spec.intensity.shape[1] < 3:
        raise ValueError("edge filter needs at least a 3x3 grid")
    if scale not in ("linear", "log"):
        raise ValueError(f"unknown filter scale {scale!r}")
    values = spec.intensity
    if scale == "log":
        floor = np.max(np.abs(values)) * 1e-12 if np.any(values) else 1e-300
        values = np.log10(np.abs(values) + floor)
    filtered = np.gradient(values, spec.fields_mt, axis=1)
    return replace(
        spec,
        intensity=filtered,
        provenance=f"{spec.provenance}|edge_filter(central-diff-field,{scale})",
    )


# --- CSV schema -----------------------------------------------------------
#
# Optional leading '#' comment lines (provenance), then a header row whose
# first cell is "theta_deg\field_mT" followed by the field values; each data
# row starts with its theta. Numbers use scientific notation with nine
# digits after the point.

_CSV_CORNER = "theta_deg\\field_mT"


def export_map_csv(spec: AngularSpectrum, path, header_lines=()) -> None:
    """Write a map as CSV; see the schema comment above."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# provenance: {spec.provenance}\n")
        fh.write(_CSV_CORNER + "," + ",".join(f"{b:.9e}" for b in spec.fields_mt) + "\n")
        for theta, row in zip(spec.thetas_deg, spec.intensity):
            fh.write(f"{theta:.9e}," + ",".join(f"{v:.9e}" for v in row) + "\n")


def load_map_csv(path) -> AngularSpectrum:
    """Read a map written by export_map_csv (or measured data in the same schema)."""
    provenance = "measured"
    rows = []
    fields = None
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "provenance:" in line:
                    provenance = line.split("provenance:", 1)[1].strip()
                continue
            cells = line.split(",")
            if fields is None:
                if cells[0] != _CSV_CORNER:
                    raise ValueError(f"unexpected CSV header cell {cells[0]!r}")
                fields = np.array([float(c) for c in cells[1:]])
                continue
            rows.append([float(c) for c in cells])
    if fields is None or not rows:
        raise ValueError("CSV contains no map data")
    data = np.array(rows)
    return AngularSpectrum(
        thetas_deg=data[:, 0],
        fields_mt=fields,
        intensity=data[:, 1:],
        provenance=provenance,
    )


# --- SVG rendering --------------------------------------------------------

# Five-anchor blue-to-yellow ramp, linearly interpolated.
_RAMP = np.array(
    [
        (13, 8, 135),
        (84, 2, 163),
        (156, 23, 158),
        (220, 81, 102),
        (253, 231, 37),
    ],
    dtype=float,
)


def _color(value: float) -> str:
    x = min(max(value, 0.0), 1.0) * (len(_RAMP) - 1)
    k = min(int(x), len(_RAMP) - 2)
    frac = x - k
    rgb = (1 - frac) * _RAMP[k] + frac * _RAMP[k + 1]
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def export_map_svg(
    spec: AngularSpectrum,
    path,
    width_px: int = 900,
    height_px: int = 600,
    vmin: float | None = None,
    vmax: float | None = None,
    header_lines=(),
) -> None:
    """Render a map as an SVG heat map with degree/mT axes.

    One ``<g class="col">`` group per orientation column; consecutive cells
    of equal quantized color are merged into single rectangles, which keeps
    mostly-empty simulated maps compact.
    """
    data = np.abs(spec.intensity) if np.any(spec.intensity < 0) else spec.intensity
    lo = float(data.min()) if vmin is None else vmin
    hi = float(data.max()) if vmax is None else vmax
    if hi <= lo:
        hi = lo + 1.0
    norm = (np.clip(data, lo, hi) - lo) / (hi - lo)
    levels = np.minimum((norm * 255).astype(int), 255)

    margin_l, margin_b, margin_t, margin_r = 70, 48, 16, 16
    plot_w = width_px - margin_l - margin_r
    plot_h = height_px - margin_t - margin_b
    n_theta, n_field = levels.shape
    col_w = plot_w / n_theta
    cell_h = plot_h / n_field

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
        f'viewBox="0 0 {width_px} {height_px}">'
    ]
    for line in (*header_lines, f"provenance: {spec.provenance}"):
        parts.append(f"<!-- {line} -->")
    parts.append(f'<rect x="0" y="0" width="{width_px}" height="{height_px}" fill="white"/>')

    for k in range(n_theta):
        x = margin_l + k * col_w
        parts.append(f'<g class="col" data-theta="{spec.thetas_deg[k]:g}">')
        j = 0
        while j < n_field:
            j2 = j
            while j2 + 1 < n_field and levels[k, j2 + 1] == levels[k, j]:
                j2 += 1
            # Field axis points up: row j draws at the bottom.
            y_top = margin_t + plot_h - (j2 + 1) * cell_h
            h = (j2 - j + 1) * cell_h
            parts.append(
                f'<rect x="{x:.2f}" y="{y_top:.2f}" width="{col_w + 0.5:.2f}" '
                f'height="{h + 0.5:.2f}" fill="{_color(levels[k, j] / 255)}"/>'
            )
            j = j2 + 1
        parts.append("</g>")

    parts.append(_svg_axes(spec, margin_l, margin_t, plot_w, plot_h, height_px))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _svg_axes(spec, margin_l, margin_t, plot_w, plot_h, height_px):
    style = 'font-family="sans-serif" font-size="12" fill="black"'
    parts = [
        f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>'
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        theta = spec.thetas_deg[0] + frac * (spec.thetas_deg[-1] - spec.thetas_deg[0])
        x = margin_l + frac * plot_w
        parts.append(
            f'<text x="{x:.1f}" y="{margin_t + plot_h + 18}" text-anchor="middle" {style}>'
            f"{theta:.0f}&#176;</text>"
        )
        field = spec.fields_mt[0] + frac * (spec.fields_mt[-1] - spec.fields_mt[0])
        y = margin_t + plot_h - frac * plot_h
        parts.append(
            f'<text x="{margin_l - 8}" y="{y + 4:.1f}" text-anchor="end" {style}>'
            f"{field:.0f} mT</text>"
        )
    parts.append(
        f'<text x="{margin_l + plot_w / 2:.0f}" y="{height_px - 8}" text-anchor="middle" {style}>'
        "rotation (deg)</text>"
    )
    return "\n".join(parts)
