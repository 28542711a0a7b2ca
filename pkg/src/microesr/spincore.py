"""Spin operators, crystal-field Hamiltonian construction and diagonalization.

Conventions used throughout:

* basis states are |S, m> with m descending from +S, so index 0 is m = +S;
* extended (Hermitian, cosine-type, q >= 0) Stevens operators in the
  standard Abragam-Bleaney normalization;
* Hamiltonian entries are frequencies in MHz, magnetic fields in mT.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import MU_B_OVER_H_MHZ_PER_MT

__all__ = [
    "CONVERSION_FACTORS",
    "CrystalFieldCoefficients",
    "SpinSystem",
    "EigenSystem",
    "VanishingOperatorWarning",
    "spin_matrices",
    "stevens_operator",
    "convert_coefficients",
    "crystal_field_matrix",
    "zeeman_matrix",
    "build_hamiltonian",
    "eigensolve",
]

# Conventional lowercase coefficients b_k^q = factor * B_k^q.
CONVERSION_FACTORS = {
    (2, 0): 3.0,
    (4, 0): 60.0,
    (6, 0): 1260.0,
    (4, 3): 3.0,
    (6, 3): 36.0,
    (6, 6): 1260.0,
}


class VanishingOperatorWarning(UserWarning):
    """Requested operator rank exceeds 2S, so the operator is identically zero."""


def _validate_spin(s: float) -> int:
    """Return the multiplicity 2S+1, rejecting non-half-integer or S < 1/2."""
    mult = round(2 * s) + 1
    if abs(2 * s - round(2 * s)) > 1e-12 or mult < 2:
        raise ValueError(f"spin quantum number must be a half-integer >= 1/2, got {s}")
    return mult


def spin_matrices(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Sx, Sy, Sz) in the |S, m> basis, m descending from +S."""
    mult = _validate_spin(s)
    m = s - np.arange(mult)
    sz = np.diag(m).astype(complex)
    # S+ couples |m> to |m+1>; with a descending basis that is one row up.
    amp = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((mult, mult), dtype=complex)
    sp[np.arange(mult - 1), np.arange(1, mult)] = amp
    sm = sp.conj().T
    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    return sx, sy, sz


def stevens_operator(k: int, q: int, s: float) -> np.ndarray:
    """Extended Stevens operator O_k^q as a dense (2S+1) x (2S+1) matrix.

    Supports the cosine-type operators appearing in trigonal crystal fields:
    (k, q) in {(2,0), (4,0), (6,0), (4,3), (6,3), (6,6)}. The returned matrix
    is dimensionless, Hermitian and traceless. For k > 2S the operator
    vanishes identically; a zero matrix is returned with a
    VanishingOperatorWarning.
    """
    if (k, q) not in CONVERSION_FACTORS:
        raise ValueError(f"unsupported Stevens operator (k={k}, q={q})")
    mult = _validate_spin(s)
    if k > 2 * s:
        warnings.warn(
            f"O_{k}^{q} vanishes identically for S={s} (k > 2S)",
            VanishingOperatorWarning,
            stacklevel=2,
        )
        return np.zeros((mult, mult), dtype=complex)

    sx, sy, sz = spin_matrices(s)
    sp = sx + 1j * sy
    sm = sx - 1j * sy
    eye = np.eye(mult, dtype=complex)
    x = s * (s + 1)

    if (k, q) == (2, 0):
        op = 3 * _mpow(sz, 2) - x * eye
    elif (k, q) == (4, 0):
        op = 35 * _mpow(sz, 4) - (30 * x - 25) * _mpow(sz, 2) + (3 * x**2 - 6 * x) * eye
    elif (k, q) == (6, 0):
        op = (
            231 * _mpow(sz, 6)
            - (315 * x - 735) * _mpow(sz, 4)
            + (105 * x**2 - 525 * x + 294) * _mpow(sz, 2)
            + (-5 * x**3 + 40 * x**2 - 60 * x) * eye
        )
    elif (k, q) == (4, 3):
        ladder = _mpow(sp, 3) + _mpow(sm, 3)
        op = (sz @ ladder + ladder @ sz) / 4
    elif (k, q) == (6, 3):
        ladder = _mpow(sp, 3) + _mpow(sm, 3)
        poly = 11 * _mpow(sz, 3) - (3 * x + 59) * sz
        op = (poly @ ladder + ladder @ poly) / 4
    else:  # (6, 6)
        op = (_mpow(sp, 6) + _mpow(sm, 6)) / 2

    return op


def _mpow(a: np.ndarray, n: int) -> np.ndarray:
    return np.linalg.matrix_power(a, n)


@dataclass(frozen=True)
class CrystalFieldCoefficients:
    """Conventional lowercase crystal-field coefficients b_k^q in MHz."""

    b20: float = 0.0
    b40: float = 0.0
    b60: float = 0.0
    b43: float = 0.0
    b63: float = 0.0
    b66: float = 0.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not np.isfinite(value):
                raise ValueError(f"crystal-field coefficient {name} must be finite")

    def as_dict(self) -> dict[str, float]:
        return {
            "b20": self.b20,
            "b40": self.b40,
            "b60": self.b60,
            "b43": self.b43,
            "b63": self.b63,
            "b66": self.b66,
        }

    def scaled(self, factor: float) -> "CrystalFieldCoefficients":
        return CrystalFieldCoefficients(
            **{name: factor * value for name, value in self.as_dict().items()}
        )


def convert_coefficients(cf: CrystalFieldCoefficients) -> dict[tuple[int, int], float]:
    """Map lowercase b_k^q (MHz) to uppercase B_k^q (MHz) by the fixed factors."""
    lowercase = {
        (2, 0): cf.b20,
        (4, 0): cf.b40,
        (6, 0): cf.b60,
        (4, 3): cf.b43,
        (6, 3): cf.b63,
        (6, 6): cf.b66,
    }
    return {kq: value / CONVERSION_FACTORS[kq] for kq, value in lowercase.items()}


@dataclass(frozen=True)
class SpinSystem:
    """A single paramagnetic species: spin, isotropic g, crystal field, sites.

    `sites` lists the z-axis rotations (degrees, about the crystal c-axis) of
    the crystallographically inequivalent substitution sites. `ensemble_n` is
    metadata only (approximate number of spins) and never enters the physics.
    """

    s: float = 3.5
    g: float = 1.9912
    cf: CrystalFieldCoefficients = field(default_factory=CrystalFieldCoefficients)
    sites: tuple[float, ...] = (0.0, 60.0)
    ensemble_n: float | None = None

    def __post_init__(self):
        _validate_spin(self.s)
        if self.g <= 0:
            raise ValueError(f"g-factor must be positive, got {self.g}")
        if len(self.sites) == 0:
            raise ValueError("at least one site rotation is required")
        object.__setattr__(self, "sites", tuple(float(v) for v in self.sites))

    @property
    def multiplicity(self) -> int:
        return round(2 * self.s) + 1

    def with_cf(self, cf: CrystalFieldCoefficients) -> "SpinSystem":
        return replace(self, cf=cf)


def crystal_field_matrix(sys: SpinSystem) -> np.ndarray:
    """Zero-field Hamiltonian sum(B_k^q O_k^q) in MHz."""
    h = np.zeros((sys.multiplicity, sys.multiplicity), dtype=complex)
    for (k, q), coeff in convert_coefficients(sys.cf).items():
        if coeff == 0.0:
            continue
        h += coeff * stevens_operator(k, q, sys.s)
    return h


def zeeman_matrix(sys: SpinSystem, direction) -> np.ndarray:
    """Zeeman matrix per unit field, g * (mu_B/h) * (n . S), in MHz/mT."""
    n = np.asarray(direction, dtype=float)
    sx, sy, sz = spin_matrices(sys.s)
    return sys.g * MU_B_OVER_H_MHZ_PER_MT * (n[0] * sx + n[1] * sy + n[2] * sz)


def build_hamiltonian(sys: SpinSystem, b_crystal_mt) -> np.ndarray:
    """Full Hamiltonian in MHz for a static field vector (mT, crystal frame)."""
    b = np.asarray(b_crystal_mt, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise ValueError("field must be a finite 3-vector in mT")
    mag = np.linalg.norm(b)
    h = crystal_field_matrix(sys)
    if mag > 0:
        h = h + mag * zeeman_matrix(sys, b / mag)
    return h


class EigensolveError(RuntimeError):
    """Diagonalization failed; carries condition diagnostics in the message."""


@dataclass(frozen=True)
class EigenSystem:
    """Sorted eigenvalues (MHz) and the matching orthonormal eigenvectors."""

    levels: np.ndarray
    states: np.ndarray

    @property
    def dim(self) -> int:
        return self.levels.shape[0]


def eigensolve(h: np.ndarray, hermiticity_rtol: float = 1e-9) -> EigenSystem:
    """Diagonalize a Hermitian matrix with a deterministic ordering.

    Eigenvalues are ascending; within a degenerate cluster the eigenvectors
    are ordered by the index of their largest-magnitude basis component so
    repeated runs label transitions identically.
    """
    h = np.asarray(h, dtype=complex)
    scale = np.linalg.norm(h)
    if scale > 0 and np.linalg.norm(h - h.conj().T) > hermiticity_rtol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    try:
        levels, states = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(h) if np.all(np.isfinite(h)) else np.inf
        raise EigensolveError(
            f"eigensolver did not converge (dim={h.shape[0]}, cond={cond:.3e})"
        ) from exc

    levels, states = _tie_break(levels, states, scale)
    return EigenSystem(levels=levels, states=states)


def _tie_break(levels: np.ndarray, states: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Reorder degenerate eigenvectors by largest-magnitude component index."""
    tol = 1e-9 * max(scale, 1.0)
    order = np.arange(levels.size)
    start = 0
    while start < levels.size:
        stop = start + 1
        while stop < levels.size and levels[stop] - levels[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            peaks = [int(np.argmax(np.abs(states[:, i]))) for i in block]
            order[start:stop] = block[np.argsort(peaks, kind="stable")]
        start = stop
    return levels[order], states[:, order]
