"""Meshes, spinor fields, equation parameters, and L2 geometry.

The discrete state lives on a uniform grid with cell width tau equal to the
time step (unit CFL).  Cell j covers [j*tau, (j+1)*tau); values outside the
stored window are implicitly zero, which reproduces whole-line dynamics
exactly for compactly supported data because the scheme propagates one cell
per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf


class FieldError(ValueError):
    """Invalid mesh, field, or profile data."""


@dataclass(frozen=True)
class Mesh:
    """Integer cell window [j_min, j_max] with cell width tau."""

    tau: float
    j_min: int
    j_max: int

    def __post_init__(self):
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise FieldError(f"tau must be a positive finite real, got {self.tau}")
        if self.j_min > self.j_max:
            raise FieldError(f"empty window: j_min={self.j_min} > j_max={self.j_max}")

    @property
    def n_cells(self) -> int:
        return self.j_max - self.j_min + 1

    def x(self, j):
        """Left edge of cell j."""
        return j * self.tau

    def grow(self, cells: int = 1) -> "Mesh":
        return Mesh(self.tau, self.j_min - cells, self.j_max + cells)


@dataclass(frozen=True)
class SchemeParams:
    """Coefficients of the nonlinear Dirac system: mass m, Thirring coupling
    alpha, Gross-Neveu coupling beta."""

    m: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.m >= 0.0):
            raise FieldError(f"mass m must be nonnegative, got {self.m}")
        for name in ("m", "alpha", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise FieldError(f"{name} must be finite")


@dataclass(frozen=True)
class OdeOptions:
    """Discretization of the per-cell nonlinear flow."""

    substeps_per_tau: int = 16
    project_norm: bool = True
    closed_form_if_available: bool = True

    def __post_init__(self):
        if self.substeps_per_tau < 1:
            raise FieldError("substeps_per_tau must be >= 1")


@dataclass(frozen=True)
class SpinorField:
    """Piecewise-constant complex pair (u, v) on a mesh window at time
    step_index * tau.  Immutable after construction."""

    mesh: Mesh
    u: np.ndarray
    v: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        u = np.array(self.u, dtype=np.complex128, copy=True)
        v = np.array(self.v, dtype=np.complex128, copy=True)
        n = self.mesh.n_cells
        if u.shape != (n,) or v.shape != (n,):
            raise FieldError(
                f"component length mismatch: window has {n} cells, "
                f"got u:{u.shape} v:{v.shape}")
        if self.step_index < 0:
            raise FieldError("step_index must be nonnegative")
        for name, arr in (("u", u), ("v", v)):
            bad = ~np.isfinite(arr)
            if bad.any():
                j = self.mesh.j_min + int(np.flatnonzero(bad)[0])
                raise FieldError(f"non-finite {name} value at cell {j}")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def tau(self) -> float:
        return self.mesh.tau

    def value_at(self, j: int) -> tuple[complex, complex]:
        """(u_j, v_j), zero outside the window."""
        if self.mesh.j_min <= j <= self.mesh.j_max:
            i = j - self.mesh.j_min
            return complex(self.u[i]), complex(self.v[i])
        return 0j, 0j

    def slab(self, j_lo: int, j_hi: int) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) arrays over cells j_lo..j_hi inclusive, zero-padded."""
        n = j_hi - j_lo + 1
        if n <= 0:
            raise FieldError("empty cell range")
        u = np.zeros(n, dtype=np.complex128)
        v = np.zeros(n, dtype=np.complex128)
        lo = max(j_lo, self.mesh.j_min)
        hi = min(j_hi, self.mesh.j_max)
        if lo <= hi:
            src = slice(lo - self.mesh.j_min, hi - self.mesh.j_min + 1)
            dst = slice(lo - j_lo, hi - j_lo + 1)
            u[dst] = self.u[src]
            v[dst] = self.v[src]
        return u, v


def zero_field(mesh: Mesh, step_index: int = 0) -> SpinorField:
    n = mesh.n_cells
    return SpinorField(mesh, np.zeros(n, np.complex128), np.zeros(n, np.complex128),
                       step_index)


@dataclass(frozen=True)
class InitialProfile:
    """Concrete initial data.

    kind:
      gaussian_packet -- amplitude * exp(-(x-center)^2 / (2 width^2)) for both
        components, supported (for windowing purposes) on center +- radius
        (default radius = 6*width).
      homogeneous -- constant pair on [x_lo, x_hi].
      delta_cell -- amplitude pair in the single cell j0.
      table -- explicit per-cell values starting at cell j0.
    """

    kind: str
    center: float = 0.0
    width: float = 1.0
    amplitude_u: complex = 1.0 + 0j
    amplitude_v: complex = 0j
    radius: float | None = None
    x_lo: float = -1.0
    x_hi: float = 1.0
    j0: int = 0
    table_u: tuple = field(default_factory=tuple)
    table_v: tuple = field(default_factory=tuple)

    KINDS = ("gaussian_packet", "homogeneous", "delta_cell", "table")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise FieldError(f"unknown profile kind {self.kind!r}")
        if self.kind == "gaussian_packet" and not self.width > 0:
            raise FieldError("gaussian width must be positive")
        if self.kind == "homogeneous" and not self.x_lo < self.x_hi:
            raise FieldError("homogeneous profile needs x_lo < x_hi")
        if self.kind == "table":
            if len(self.table_u) != len(self.table_v) or not self.table_u:
                raise FieldError("table profile needs equal nonempty u/v tables")

    @property
    def support_radius(self) -> float:
        return self.radius if self.radius is not None else 6.0 * self.width

    def default_window(self, tau: float, pad: int = 0) -> Mesh:
        """Smallest cell window covering the profile support, padded."""
        if self.kind == "gaussian_packet":
            lo = math.floor((self.center - self.support_radius) / tau)
            hi = math.ceil((self.center + self.support_radius) / tau)
        elif self.kind == "homogeneous":
            lo = math.floor(self.x_lo / tau)
            hi = math.ceil(self.x_hi / tau) - 1
            hi = max(hi, lo)
        elif self.kind == "delta_cell":
            lo = hi = self.j0
        else:
            lo = self.j0
            hi = self.j0 + len(self.table_u) - 1
        return Mesh(tau, lo - pad, hi + pad)


def _gaussian_point(profile, x):
    g = np.exp(-((x - profile.center) ** 2) / (2.0 * profile.width ** 2))
    return profile.amplitude_u * g, profile.amplitude_v * g


def _gaussian_cell_average(profile, a, b, w):
    # integral of exp(-(x-c)^2/(2w^2)) over [a, b], divided by b - a
    s = w * math.sqrt(2.0)
    c = profile.center
    mass = w * math.sqrt(math.pi / 2.0) * (erf((b - c) / s) - erf((a - c) / s))
    g = mass / (b - a)
    return profile.amplitude_u * g, profile.amplitude_v * g


def sample_initial_data(profile: InitialProfile, mesh: Mesh,
                        mode: str = "point_sample") -> SpinorField:
    """Piecewise-constant sampling of a profile onto a mesh window.

    point_sample puts the profile value at x = j*tau in cell j (the grid-point
    convention); cell_average puts the cell mean there instead.
    """
    if mode not in ("point_sample", "cell_average"):
        raise FieldError(f"unknown sampling mode {mode!r}")
    n = mesh.n_cells
    u = np.zeros(n, np.complex128)
    v = np.zeros(n, np.complex128)
    js = np.arange(mesh.j_min, mesh.j_max + 1)
    if profile.kind == "gaussian_packet":
        if mode == "point_sample":
            u, v = _gaussian_point(profile, js * mesh.tau)
        else:
            a = js * mesh.tau
            u, v = _gaussian_cell_average(profile, a, a + mesh.tau, profile.width)
    elif profile.kind == "homogeneous":
        if mode == "point_sample":
            inside = (profile.x_lo <= js * mesh.tau) & (js * mesh.tau < profile.x_hi)
            u[inside] = profile.amplitude_u
            v[inside] = profile.amplitude_v
        else:
            left = np.maximum(js * mesh.tau, profile.x_lo)
            right = np.minimum((js + 1) * mesh.tau, profile.x_hi)
            frac = np.clip(right - left, 0.0, None) / mesh.tau
            u = profile.amplitude_u * frac
            v = profile.amplitude_v * frac
    elif profile.kind == "delta_cell":
        if mesh.j_min <= profile.j0 <= mesh.j_max:
            i = profile.j0 - mesh.j_min
            u[i] = profile.amplitude_u
            v[i] = profile.amplitude_v
    else:  # table
        for k, (tu, tv) in enumerate(zip(profile.table_u, profile.table_v)):
            j = profile.j0 + k
            if mesh.j_min <= j <= mesh.j_max:
                u[j - mesh.j_min] = tu
                v[j - mesh.j_min] = tv
    for name, arr in (("u", u), ("v", v)):
        bad = ~np.isfinite(arr)
        if bad.any():
            j = mesh.j_min + int(np.flatnonzero(bad)[0])
            raise FieldError(f"profile produced non-finite {name} at cell {j}")
    return SpinorField(mesh, u, v, step_index=0)


def mass_density(f: SpinorField) -> np.ndarray:
    """Per-cell |u|^2 + |v|^2."""
    return (f.u.real ** 2 + f.u.imag ** 2) + (f.v.real ** 2 + f.v.imag ** 2)


def l2_norm(f: SpinorField) -> float:
    """sqrt(sum_j (|u_j|^2 + |v_j|^2) * tau)."""
    return math.sqrt(float(np.sum(mass_density(f))) * f.tau)


def l2_distance(a: SpinorField, b: SpinorField, shift_cells: int = 0) -> float:
    """L2 norm of a(. + shift_cells*tau) - b(.), zeros outside supports."""
    if a.tau != b.tau:
        raise FieldError(f"mesh width mismatch: {a.tau} vs {b.tau}")
    mu = shift_cells
    # a(x + mu*tau) at cell j is a's value at cell j + mu
    j_lo = min(a.mesh.j_min - mu, b.mesh.j_min)
    j_hi = max(a.mesh.j_max - mu, b.mesh.j_max)
    au, av = a.slab(j_lo + mu, j_hi + mu)
    bu, bv = b.slab(j_lo, j_hi)
    du = au - bu
    dv = av - bv
    total = float(np.sum((du.real ** 2 + du.imag ** 2) + (dv.real ** 2 + dv.imag ** 2)))
    return math.sqrt(total * a.tau)


def restrict_to_coarse(fine: SpinorField, factor: int) -> SpinorField:
    """L2 projection onto the mesh coarsened by an integer factor.

    Coarse cell J is the mean of fine cells J*factor .. J*factor+factor-1.
    """
    if factor < 2:
        raise FieldError("coarsening factor must be >= 2")
    m = fine.mesh
    if m.j_min % factor != 0 or m.n_cells % factor != 0:
        raise FieldError(
            f"window [{m.j_min}, {m.j_max}] is not aligned to factor {factor}")
    coarse_mesh = Mesh(m.tau * factor, m.j_min // factor,
                       m.j_min // factor + m.n_cells // factor - 1)
    u = fine.u.reshape(-1, factor).mean(axis=1)
    v = fine.v.reshape(-1, factor).mean(axis=1)
    return SpinorField(coarse_mesh, u, v, fine.step_index)
