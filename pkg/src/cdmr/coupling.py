"""Collective spin-ensemble coupling from a cavity mode magnetic field map.

The mode field is supplied on a rectilinear grid, either loaded from CSV or
generated from a built-in current-loop surrogate.  The ensemble coupling rate
follows from mode-volume style integrals evaluated with the midpoint rule on
the grid cells:

    g_s^2 = gamma_e^2 mu_0 hbar omega_c
            * int(rho |B|^2 sin^2(phi) P_zS) / [int(|B|^2) * int(rho P_zS)]

with the normalization integral over the whole map and the density-weighted
integrals over the sample region.  The result is invariant under rescaling of
the field amplitude (the mode normalization cancels) and reduces to
gamma_e^2 mu_0 hbar omega_c / V for a uniform transverse field.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipe, ellipk

from .constants import DEFAULT_CONSTANTS, PhysicalConstants

FIELDMAP_MAGIC = "fieldmap v1"
_SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class FieldMap:
    """Cavity-mode magnetic field sampled on a uniform rectilinear grid.

    ``b`` has shape (nx, ny, nz, 3) in tesla (amplitude normalization is
    arbitrary).  Grid points are cell centers; ``cell_volume`` is the volume
    each point represents in the midpoint rule.
    """

    x: np.ndarray  # (nx,) m
    y: np.ndarray  # (ny,) m
    z: np.ndarray  # (nz,) m
    b: np.ndarray  # (nx, ny, nz, 3) tesla
    cell_volume: float  # m^3

    def __post_init__(self):
        for name, coords in (("x", self.x), ("y", self.y), ("z", self.z)):
            if coords.ndim != 1 or coords.size < 2:
                raise ValueError(f"axis {name} needs at least 2 grid points")
            spacing = np.diff(coords)
            if np.any(spacing <= 0.0):
                raise ValueError(f"axis {name} coordinates must be strictly increasing")
            if np.max(spacing) - np.min(spacing) > _SPACING_RTOL * np.max(np.abs(spacing)):
                raise ValueError(f"axis {name} grid spacing is not uniform")
        expected = (self.x.size, self.y.size, self.z.size, 3)
        if self.b.shape != expected:
            raise ValueError(f"field array shape {self.b.shape} does not match grid {expected}")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("field values must be finite")
        if not (math.isfinite(self.cell_volume) and self.cell_volume > 0.0):
            raise ValueError(f"cell volume must be finite and positive, got {self.cell_volume!r}")

    @property
    def shape(self):
        return (self.x.size, self.y.size, self.z.size)


def _spacing(coords):
    return float(coords[1] - coords[0])


def save_field_map(field_map: FieldMap, path, extra_comments=()):
    """Write a field map as CSV with an x-fastest row ordering.

    Header line carries the magic tag and grid shape; any ``extra_comments``
    are emitted as additional '#' lines before the data.
    """
    nx, ny, nz = field_map.shape
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# {FIELDMAP_MAGIC} nx={nx} ny={ny} nz={nz}\n")
        for comment in extra_comments:
            handle.write(f"# {comment}\n")
        handle.write("# x,y,z,Bx,By,Bz\n")
        for iz in range(nz):
            for iy in range(ny):
                for ix in range(nx):
                    bx, by, bz = (float(v) for v in field_map.b[ix, iy, iz])
                    handle.write(
                        f"{float(field_map.x[ix])!r},{float(field_map.y[iy])!r},"
                        f"{float(field_map.z[iz])!r},{bx!r},{by!r},{bz!r}\n"
                    )


def load_field_map(path):
    """Parse a field-map CSV written by :func:`save_field_map`.

    Raises ValueError with the offending line number on malformed rows,
    non-finite values, inconsistent grids or wrong row counts.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.readlines()
    shape = None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            body = text.lstrip("#").strip()
            if body.startswith(FIELDMAP_MAGIC):
                if shape is not None:
                    raise ValueError(f"line {lineno}: duplicate field map header")
                try:
                    entries = dict(item.split("=") for item in body.split()[2:])
                    shape = (int(entries["nx"]), int(entries["ny"]), int(entries["nz"]))
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"line {lineno}: malformed field map header: {text!r}") from exc
            continue
        if shape is None:
            raise ValueError(f"line {lineno}: data before the '# {FIELDMAP_MAGIC} ...' header")
        parts = text.split(",")
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 comma-separated values, got {len(parts)}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-numeric value in row: {text!r}") from exc
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"line {lineno}: non-finite value in row: {text!r}")
        rows.append(values)
    if shape is None:
        raise ValueError("missing field map header line")
    nx, ny, nz = shape
    if any(n < 2 for n in shape):
        raise ValueError(f"grid must have at least 2 points per axis, got {shape}")
    if len(rows) != nx * ny * nz:
        raise ValueError(f"expected {nx * ny * nz} data rows for grid {shape}, found {len(rows)}")
    data = np.asarray(rows)
    # x varies fastest, then y, then z.
    x = data[:nx, 0].copy()
    y = data[: nx * ny : nx, 1].copy()
    z = data[:: nx * ny, 2].copy()
    coords = data[:, 0:3].reshape(nz, ny, nx, 3)
    expected = np.stack(np.meshgrid(x, y, z, indexing="ij"), axis=-1).transpose(2, 1, 0, 3)
    scale = max(np.max(np.abs(expected)), 1e-300)
    if not np.allclose(coords, expected, rtol=0.0, atol=_SPACING_RTOL * scale):
        raise ValueError("row coordinates are not a uniform x-fastest rectilinear grid")
    b = data[:, 3:6].reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3).copy()
    field_map = FieldMap(
        x=x,
        y=y,
        z=z,
        b=b,
        cell_volume=_spacing(x) * _spacing(y) * _spacing(z),
    )
    return field_map


def loop_field_at(points, radius, current, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Magnetic field of a circular current loop, closed form.

    The loop lies in the z = 0 plane, centered on the origin, carrying
    ``current`` (A) counterclockwise when viewed from +z.  ``points`` is an
    (..., 3) array in meters.  Uses the complete elliptic integrals; exact up
    to floating point.  Raises if any point lies on (or numerically at) the
    wire itself.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError("points must have a trailing dimension of 3")
    if not (radius > 0.0 and math.isfinite(radius)):
        raise ValueError(f"loop radius must be finite and positive, got {radius!r}")
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    rho = np.hypot(x, y)
    wire_distance = np.hypot(rho - radius, z)
    if np.any(wire_distance < 1e-9 * radius):
        raise ValueError("grid point coincides with the loop wire; field diverges there")
    q = (radius + rho) ** 2 + z**2
    near = (radius - rho) ** 2 + z**2
    m = 4.0 * radius * rho / q
    k_int = ellipk(m)
    e_int = ellipe(m)
    prefactor = constants.mu_0 * current / (2.0 * math.pi * np.sqrt(q))
    bz = prefactor * (k_int + e_int * (radius**2 - rho**2 - z**2) / near)
    with np.errstate(invalid="ignore", divide="ignore"):
        b_rho = prefactor * (z / rho) * (-k_int + e_int * (radius**2 + rho**2 + z**2) / near)
        ux = np.where(rho > 0.0, x / np.where(rho > 0.0, rho, 1.0), 0.0)
        uy = np.where(rho > 0.0, y / np.where(rho > 0.0, rho, 1.0), 0.0)
    b_rho = np.where(rho > 0.0, b_rho, 0.0)
    return np.stack([b_rho * ux, b_rho * uy, bz], axis=-1)


def generate_loop_field(radius, current, x_span, y_span, z_span,
                        constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Sample the loop surrogate mode field on a uniform grid.

    Each span is (min, max, n) in meters with n >= 2.  The n points are the
    centers of n equal cells tiling [min, max] exactly, so the summed cell
    volume equals the box volume at every resolution and doubling n nests the
    sub-cells inside the parent cells (clean second-order midpoint
    convergence).  Returns a FieldMap.
    """
    axes = []
    for name, span in (("x", x_span), ("y", y_span), ("z", z_span)):
        lo, hi, n = span
        n = int(n)
        if n < 2:
            raise ValueError(f"axis {name} needs at least 2 points, got {n}")
        if not hi > lo:
            raise ValueError(f"axis {name} span must have max > min")
        step = (hi - lo) / n
        axes.append(lo + (np.arange(n) + 0.5) * step)
    x, y, z = axes
    grid = np.stack(np.meshgrid(x, y, z, indexing="ij"), axis=-1)
    b = loop_field_at(grid, radius, current, constants)
    return FieldMap(
        x=x,
        y=y,
        z=z,
        b=b,
        cell_volume=_spacing(x) * _spacing(y) * _spacing(z),
    )


@dataclass(frozen=True)
class SampleRegion:
    """Axis-aligned box holding a uniform density of polarized defects."""

    bounds: tuple    # (xmin, xmax, ymin, ymax, zmin, zmax) in m
    rho_s: float     # defect number density, m^-3
    p_zs: float      # steady-state longitudinal polarization

    def __post_init__(self):
        if len(self.bounds) != 6:
            raise ValueError("bounds must be (xmin, xmax, ymin, ymax, zmin, zmax)")
        xmin, xmax, ymin, ymax, zmin, zmax = self.bounds
        if not (xmax > xmin and ymax > ymin and zmax > zmin):
            raise ValueError(f"region must have positive extent, got bounds {self.bounds}")
        if not (math.isfinite(self.rho_s) and self.rho_s > 0.0):
            raise ValueError(f"defect density must be finite and positive, got {self.rho_s!r}")
        if not (-1.0 <= self.p_zs <= 1.0):
            raise ValueError(f"polarization must lie in [-1, 1], got {self.p_zs!r}")

    def contains(self, x, y, z):
        xmin, xmax, ymin, ymax, zmin, zmax = self.bounds
        return (
            (x >= xmin) & (x <= xmax)
            & (y >= ymin) & (y <= ymax)
            & (z >= zmin) & (z <= zmax)
        )


@dataclass(frozen=True)
class CouplingResult:
    """Ensemble coupling rate and the bookkeeping quantities derived with it."""

    g_s: float       # ensemble-averaged single-spin coupling, rad/s
    n_eff: float     # effective number of contributing polarized spins
    e_cc: float      # critical (saturation) photon number 1/(4 g_s^2 T1 T2)
    region_volume: float  # m^3 of the sample region covered by grid cells


def single_spin_coupling(b_c, phi, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Coupling rate of one spin to a local mode field of amplitude |b_c|.

    ``phi`` is the angle between the mode field and the defect axis; only
    sin^2(phi) enters downstream, so the sign of phi is irrelevant and the
    returned rate is non-negative.
    """
    b = np.asarray(b_c, dtype=float)
    magnitude = float(np.linalg.norm(b)) if b.shape == (3,) else float(abs(b))
    return constants.gamma_e * magnitude * abs(math.sin(phi))


def effective_coupling(field_map: FieldMap, region: SampleRegion, defect_axes,
                       omega_c, t1, t2,
                       constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Ensemble coupling g_s, effective spin number and saturation photon number.

    Parameters
    ----------
    field_map : FieldMap
        Cavity-mode field; its full extent defines the normalization integral.
    region : SampleRegion
        Where the polarized defects sit.  Grid cells belong to the region iff
        their center lies inside (midpoint rule).
    defect_axes : array_like, shape (n_axes, 3)
        Defect symmetry axes of the contributing classes; sin^2 of the angle
        between the local mode field and each axis is averaged over them.
    omega_c : float
        Cavity angular frequency, rad/s.
    t1, t2 : float
        Longitudinal and transverse relaxation times, s.

    Returns
    -------
    CouplingResult
    """
    if not (omega_c > 0.0 and t1 > 0.0 and t2 > 0.0):
        raise ValueError("omega_c, t1 and t2 must all be positive")
    if region.p_zs == 0.0:
        raise ValueError("region polarization is zero; no contributing spins")
    axes = np.atleast_2d(np.asarray(defect_axes, dtype=float))
    if axes.shape[1] != 3 or axes.shape[0] < 1:
        raise ValueError("defect_axes must be a non-empty (n, 3) array")
    norms = np.linalg.norm(axes, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("defect axes must be non-zero")
    axes = axes / norms[:, None]

    b = field_map.b
    b_sq = np.einsum("...i,...i->...", b, b)
    # sin^2 averaged over the contributing defect axes; points with zero
    # field carry zero weight in the numerator, so their angle is moot.
    safe_b_sq = np.where(b_sq > 0.0, b_sq, 1.0)
    cos_sq_sum = np.zeros_like(b_sq)
    for axis in axes:
        cos_sq_sum += np.einsum("...i,i->...", b, axis) ** 2 / safe_b_sq
    sin_sq = np.where(b_sq > 0.0, 1.0 - cos_sq_sum / axes.shape[0], 0.0)

    grid_x, grid_y, grid_z = np.meshgrid(field_map.x, field_map.y, field_map.z, indexing="ij")
    inside = region.contains(grid_x, grid_y, grid_z)
    if not np.any(inside):
        raise ValueError("sample region does not overlap the field map grid")

    dv = field_map.cell_volume
    norm_integral = float(np.sum(b_sq)) * dv
    if norm_integral == 0.0:
        raise ValueError("field map is identically zero; mode normalization undefined")
    weighted = float(np.sum(b_sq[inside] * sin_sq[inside])) * dv * region.rho_s * region.p_zs
    region_volume = float(np.count_nonzero(inside)) * dv
    population = region.rho_s * region.p_zs * region_volume  # int(rho P_zS)

    g_s_sq = (
        constants.gamma_e**2 * constants.mu_0 * constants.hbar * omega_c
        * weighted / (norm_integral * population)
    )
    if g_s_sq <= 0.0:
        raise ValueError("coupling came out non-positive; mode field is parallel to every defect axis")
    g_s = math.sqrt(g_s_sq)
    return CouplingResult(
        g_s=g_s,
        n_eff=-population,
        e_cc=1.0 / (4.0 * g_s_sq * t1 * t2),
        region_volume=region_volume,
    )
