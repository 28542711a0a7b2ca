"""Field-orientation geometry for a tilted-axis crystal under a planar resonator.

The static field is rotated in the lab y-z plane (theta = 0 along lab z, the
sweep axis is lab x). Each inductor region carries an angle triple
(alpha, beta, gamma) mapping lab vectors into the crystal frame:

* ``alpha`` -- in-plane angle (about the sweep axis) from the theta = 0 field
  position to the plane containing the crystal z-axis, so it offsets the
  sweep angle; the two regions' current directions are 90 degrees apart in
  the chip plane, hence their alphas differ by 90;
* ``beta``  -- tilt of the crystal z-axis out of the rotation plane (33 deg
  for an R-cut substrate, whose c-axis lies 57 deg from the surface normal);
* ``gamma`` -- final azimuth about the crystal z-axis.

Each substitution site adds one more rotation about the crystal z-axis. One
rotation chain is applied to the static-field direction and to every
microwave axis, so relative excitation angles are preserved at every theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EulerAngles",
    "ModeRegion",
    "PERPENDICULAR",
    "PARALLEL",
    "normalize_angle",
    "rotation_matrix",
    "inplane_rotation",
    "lab_to_crystal",
    "sweep_orientations",
    "default_regions",
]

PERPENDICULAR = "perpendicular"
PARALLEL = "parallel"


def normalize_angle(deg: float) -> float:
    """Wrap an angle in degrees into [0, 360)."""
    return float(np.mod(deg, 360.0))


@dataclass(frozen=True)
class EulerAngles:
    """x-y-z (Tait-Bryan) angle triple in degrees, normalized to [0, 360)."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", normalize_angle(self.alpha))
        object.__setattr__(self, "beta", normalize_angle(self.beta))
        object.__setattr__(self, "gamma", normalize_angle(self.gamma))


def _rot_z(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_x(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_matrix(euler: EulerAngles) -> np.ndarray:
    """SO(3) matrix Rz(gamma) @ Ry(beta) @ Rx(-alpha).

    The trailing Rx(-alpha) composes with the in-plane sweep rotation (also
    about x), so alpha acts as an offset on the sweep angle: the transformed
    sweep vector has polar angle arccos(cos(beta) * cos(theta + alpha)).
    """
    return _rot_z(euler.gamma) @ _rot_y(euler.beta) @ _rot_x(-euler.alpha)


def inplane_rotation(theta_deg: float, sense: int = +1) -> np.ndarray:
    """Rotation of the lab frame taking z toward +y (sense=+1) by theta.

    sense=-1 rotates z toward -y instead; the hardware does not pin the sign,
    so it is configurable.
    """
    if sense not in (+1, -1):
        raise ValueError("sense must be +1 or -1")
    return _rot_x(-sense * theta_deg)


@dataclass(frozen=True)
class ModeRegion:
    """One inductor region: excitation label, crystal mapping, area, MW axes.

    `bmw_axes` are the unit directions (lab frame, at theta = 0) along which
    the oscillating field produced by this region points. They co-rotate with
    the static field, so the excitation geometry is the same at every theta.
    """

    label: str
    euler: EulerAngles
    area_um2: float
    bmw_axes: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if self.label not in (PERPENDICULAR, PARALLEL):
            raise ValueError(f"region label must be perpendicular or parallel, got {self.label!r}")
        if self.area_um2 <= 0:
            raise ValueError("region area must be positive")
        axes = []
        for axis in self.bmw_axes:
            v = np.asarray(axis, dtype=float)
            norm = np.linalg.norm(v)
            if v.shape != (3,) or abs(norm - 1.0) > 1e-12:
                raise ValueError(f"microwave axis {axis} is not a unit 3-vector")
            axes.append(tuple(v))
        if not axes:
            raise ValueError("region needs at least one microwave axis")
        object.__setattr__(self, "bmw_axes", tuple(axes))


def default_regions(area_perp_um2: float = 3400.0, area_par_um2: float = 416.0) -> tuple[ModeRegion, ModeRegion]:
    """The two-region idealization of the lumped-element inductor.

    Perpendicular region: current along the theta = 0 field, oscillating
    field along lab x and y, both normal to it. Parallel region: current 90
    degrees away in the chip plane, oscillating field along lab x and z, the
    z component being parallel to the theta = 0 field. Both regions see the
    same crystal tilt; their alphas differ by the 90 degrees between the two
    current directions.
    """
    perp = ModeRegion(
        label=PERPENDICULAR,
        euler=EulerAngles(30.0, 33.0, 0.0),
        area_um2=area_perp_um2,
        bmw_axes=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
    )
    par = ModeRegion(
        label=PARALLEL,
        euler=EulerAngles(120.0, 33.0, 0.0),
        area_um2=area_par_um2,
        bmw_axes=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    )
    return perp, par


def lab_to_crystal(
    theta_deg: float,
    region: ModeRegion,
    site_rotation_deg: float = 0.0,
    sense: int = +1,
) -> tuple[np.ndarray, np.ndarray]:
    """Map the swept static field and the region's MW axes into a site frame.

    Returns `(b0_dir, bmw_dirs)`: the unit static-field direction and an
    (n_axes, 3) array of unit microwave directions, all expressed in the
    crystal frame of the site rotated by `site_rotation_deg` about z.
    """
    chain = (
        _rot_z(site_rotation_deg)
        @ rotation_matrix(region.euler)
        @ inplane_rotation(theta_deg, sense=sense)
    )
    b0 = chain @ np.array([0.0, 0.0, 1.0])
    bmw = np.array([chain @ np.asarray(axis) for axis in region.bmw_axes])
    return b0 / np.linalg.norm(b0), bmw / np.linalg.norm(bmw, axis=1)[:, None]


def sweep_orientations(start_deg: float, stop_deg: float, step_deg: float) -> np.ndarray:
    """Uniform orientation grid: inclusive start, exclusive stop."""
    if step_deg <= 0:
        raise ValueError("orientation step must be positive")
    n = int(np.ceil((stop_deg - start_deg) / step_deg - 1e-12))
    return start_deg + step_deg * np.arange(max(n, 0))
