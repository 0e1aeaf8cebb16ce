"""Emitter localization against precomputed coupling maps.

Numerical field solvers export gridded maps of the coupling efficiency
and the propagation phase over emitter positions.  Intersecting the
measured phase with the map's phase field yields candidate positions
(contour branches), the coupling range along those branches bounds the
map-predicted efficiency, and comparing it with the measured efficiency
constrains the in-plane dipole angle through the cos**2 projection of
both the pump and probe couplings.

Map file format: CSV with header ``y_nm,z_nm,beta_eff,phi_t_deg``,
row-major (y outer, z inner), ``#`` comments allowed.  Phases are stored
in degrees in files and radians in memory.  A cell with NaN entries is
treated as outside the valid region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MapFormatError, NoSolutionError, ParameterDomainError


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


@dataclass
class CouplingMap:
    """Gridded (beta_eff, phi_t) over emitter positions, with bilinear access."""

    y_nm: np.ndarray
    z_nm: np.ndarray
    beta: np.ndarray  # shape (ny, nz), x-polarized dipole
    phi: np.ndarray  # rad, wrapped to (-pi, pi]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y_nm, dtype=float)
        z = np.asarray(self.z_nm, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        p = np.asarray(self.phi, dtype=float)
        if y.ndim != 1 or z.ndim != 1:
            raise MapFormatError("axes must be one-dimensional")
        if y.size < 2 or z.size < 2:
            raise MapFormatError("each axis needs at least 2 samples")
        if np.any(np.diff(y) <= 0) or np.any(np.diff(z) <= 0):
            raise MapFormatError("axes must be strictly increasing")
        if b.shape != (y.size, z.size) or p.shape != (y.size, z.size):
            raise MapFormatError("grids must have shape (len(y_nm), len(z_nm))")
        valid = np.isfinite(b) & np.isfinite(p)
        inside = b[np.isfinite(b)]
        if np.any(inside < 0) or np.any(inside > 1):
            raise MapFormatError("beta_eff values must lie in [0, 1]")
        self.y_nm, self.z_nm, self.beta, self.phi = y, z, b, p
        self.valid = valid

    def _cell(self, y, z):
        if not (self.y_nm[0] <= y <= self.y_nm[-1]) or not (self.z_nm[0] <= z <= self.z_nm[-1]):
            raise ParameterDomainError(f"point ({y}, {z}) lies outside the map extent")
        i = min(int(np.searchsorted(self.y_nm, y, side="right")) - 1, self.y_nm.size - 2)
        j = min(int(np.searchsorted(self.z_nm, z, side="right")) - 1, self.z_nm.size - 2)
        i = max(i, 0)
        j = max(j, 0)
        ty = (y - self.y_nm[i]) / (self.y_nm[i + 1] - self.y_nm[i])
        tz = (z - self.z_nm[j]) / (self.z_nm[j + 1] - self.z_nm[j])
        return i, j, ty, tz

    def _bilinear(self, grid, y, z):
        i, j, ty, tz = self._cell(y, z)
        if not self.valid[i : i + 2, j : j + 2].all():
            return np.nan
        g = grid
        return (
            g[i, j] * (1 - ty) * (1 - tz)
            + g[i + 1, j] * ty * (1 - tz)
            + g[i, j + 1] * (1 - ty) * tz
            + g[i + 1, j + 1] * ty * tz
        )

    def beta_at(self, y, z) -> float:
        """Bilinearly interpolated coupling efficiency at (y, z) in nm."""
        return float(self._bilinear(self.beta, y, z))

    def phi_at(self, y, z) -> float:
        """Bilinearly interpolated phase (rad) at (y, z) in nm."""
        return float(self._bilinear(self.phi, y, z))


def load_map(path) -> CouplingMap:
    """Load and validate a coupling map CSV.

    Errors carry the offending file line or cell coordinate.  Rows must
    arrive row-major: y blocks in strictly increasing order, z strictly
    increasing within each block, and every block over the same z axis.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header != ["y_nm", "z_nm", "beta_eff", "phi_t_deg"]:
                    raise MapFormatError(
                        f"line {lineno}: header must be 'y_nm,z_nm,beta_eff,phi_t_deg'"
                    )
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise MapFormatError(f"line {lineno}: expected 4 columns, got {len(parts)}")
            try:
                y, z, b, p = (float(c) for c in parts)
            except ValueError as exc:
                raise MapFormatError(f"line {lineno}: non-numeric value") from exc
            if np.isfinite(b) and not 0.0 <= b <= 1.0:
                raise MapFormatError(
                    f"line {lineno}: beta_eff={b} at cell (y={y}, z={z}) outside [0, 1]"
                )
            rows.append((lineno, y, z, b, p))
    if not rows:
        raise MapFormatError("map file contains no data rows")

    # reconstruct the row-major grid and validate the ordering as we go
    y_axis = []
    z_axis = None
    blocks = []
    current_y = None
    current_z = []
    current_vals = []

    def close_block(lineno):
        nonlocal z_axis
        if z_axis is None:
            z_axis = list(current_z)
        elif current_z != z_axis:
            raise MapFormatError(
                f"line {lineno}: z samples of y={current_y} block do not match the first block"
            )
        blocks.append(list(current_vals))

    for lineno, y, z, b, p in rows:
        if current_y is None or y != current_y:
            if current_y is not None:
                close_block(lineno)
                if y <= current_y:
                    raise MapFormatError(f"line {lineno}: y_nm axis not strictly increasing")
            current_y = y
            y_axis.append(y)
            current_z = []
            current_vals = []
        if current_z and z <= current_z[-1]:
            raise MapFormatError(
                f"line {lineno}: z_nm not strictly increasing within y={y} block"
            )
        current_z.append(z)
        current_vals.append((b, p))
    close_block(rows[-1][0])

    nz = len(z_axis)
    for k, block in enumerate(blocks):
        if len(block) != nz:
            raise MapFormatError(
                f"grid incomplete: y={y_axis[k]} block has {len(block)} cells, expected {nz}"
            )
    beta = np.array([[b for b, _ in block] for block in blocks], dtype=float)
    phi_deg = np.array([[p for _, p in block] for block in blocks], dtype=float)
    return CouplingMap(
        y_nm=np.array(y_axis),
        z_nm=np.array(z_axis),
        beta=beta,
        phi=_wrap_angle(np.deg2rad(phi_deg)),
        meta={"path": str(path)},
    )


# ---------------------------------------------------------------------------
# Marching-squares phase contours


def _edge_crossing(w1, w2):
    """Crossing parameter on an edge, or None.

    The phase difference field is angular: a sign change counts only if
    the short arc between the endpoint values passes through zero, i.e.
    |w1 - w2| < pi.  Exact zeros are nudged positive so cells classify
    deterministically.
    """
    a = w1 if w1 != 0 else 1e-300
    b = w2 if w2 != 0 else 1e-300
    if (a > 0) == (b > 0):
        return None
    if abs(a - b) >= np.pi:
        return None
    return a / (a - b)


def phase_contour(cmap: CouplingMap, phi_target, tolerance) -> list:
    """Level set of the phase field at ``phi_target`` (angles mod 2*pi).

    Marching squares on the wrapped difference field, returning ordered
    polylines as (n, 2) arrays of (y_nm, z_nm).  Vertices are checked
    against the map's own interpolator and must match ``phi_target``
    within ``tolerance`` (rad); an empty list means the map never reaches
    the target phase.
    """
    if tolerance <= 0:
        raise ParameterDomainError("tolerance must be > 0")
    w = _wrap_angle(cmap.phi - phi_target)
    ny, nz = w.shape
    y, z = cmap.y_nm, cmap.z_nm

    def edge_key(i, j, horizontal):
        return (i, j, horizontal)

    def edge_point(i, j, horizontal, t):
        # horizontal: along y between (i,j) and (i+1,j); else along z
        if horizontal:
            return (y[i] + t * (y[i + 1] - y[i]), z[j])
        return (y[i], z[j] + t * (z[j + 1] - z[j]))

    segments = []  # (edge_key_a, point_a, edge_key_b, point_b)
    for i in range(ny - 1):
        for j in range(nz - 1):
            if not cmap.valid[i : i + 2, j : j + 2].all():
                continue
            corners = w[i, j], w[i + 1, j], w[i + 1, j + 1], w[i, j + 1]
            # cell edges: bottom (y-dir at j), right (z-dir at i+1),
            # top (y-dir at j+1), left (z-dir at i)
            crossings = []
            t = _edge_crossing(corners[0], corners[1])
            if t is not None:
                crossings.append((edge_key(i, j, True), edge_point(i, j, True, t)))
            t = _edge_crossing(corners[1], corners[2])
            if t is not None:
                crossings.append((edge_key(i + 1, j, False), edge_point(i + 1, j, False, t)))
            t = _edge_crossing(corners[3], corners[2])
            if t is not None:
                crossings.append((edge_key(i, j + 1, True), edge_point(i, j + 1, True, t)))
            t = _edge_crossing(corners[0], corners[3])
            if t is not None:
                crossings.append((edge_key(i, j, False), edge_point(i, j, False, t)))
            if len(crossings) == 2:
                segments.append((crossings[0], crossings[1]))
            elif len(crossings) == 4:
                # saddle cell: the centre sign decides which opposite
                # corners the zero level separates
                centre = float(np.mean(corners))
                first_positive = corners[0] > 0 if corners[0] != 0 else True
                if (centre > 0) == first_positive:
                    # centre joins corner 0: contours cut off corners 1 and 3
                    segments.append((crossings[0], crossings[1]))
                    segments.append((crossings[2], crossings[3]))
                else:
                    segments.append((crossings[0], crossings[3]))
                    segments.append((crossings[1], crossings[2]))

    # chain segments into polylines via shared edge keys
    adjacency = {}
    for seg_idx, (a, b) in enumerate(segments):
        adjacency.setdefault(a[0], []).append((seg_idx, b))
        adjacency.setdefault(b[0], []).append((seg_idx, a))

    used = [False] * len(segments)
    polylines = []

    def walk(start_key, start_point):
        pts = [start_point]
        key = start_key
        while True:
            nxt = None
            for seg_idx, other in adjacency.get(key, []):
                if not used[seg_idx]:
                    used[seg_idx] = True
                    nxt = other
                    break
            if nxt is None:
                break
            pts.append(nxt[1])
            key = nxt[0]
        return pts

    # open chains first (edges used once), then closed loops
    degree = {k: len(v) for k, v in adjacency.items()}
    open_keys = [k for k, d in degree.items() if d == 1]
    for key in sorted(open_keys):
        for seg_idx, other in adjacency[key]:
            if not used[seg_idx]:
                start_point = next(
                    pt for ek, pt in segments[seg_idx] if ek == key
                )
                used[seg_idx] = True
                pts = [start_point, other[1]]
                pts.extend(walk(other[0], other[1])[1:])
                polylines.append(pts)
    for seg_idx, (a, b) in enumerate(segments):
        if used[seg_idx]:
            continue
        used[seg_idx] = True
        pts = [a[1], b[1]]
        pts.extend(walk(b[0], b[1])[1:])
        polylines.append(pts)

    result = []
    for pts in polylines:
        arr = np.array(pts, dtype=float)
        keep = np.array(
            [abs(_wrap_angle(cmap.phi_at(py, pz) - phi_target)) <= tolerance for py, pz in arr]
        )
        arr = arr[keep]
        if arr.shape[0] >= 2:
            result.append(arr)
    result.sort(key=lambda a: (a[0, 0], a[0, 1]))
    return result


def beta_range_on_contour(cmap: CouplingMap, contour):
    """(min, max) of the interpolated coupling efficiency along a contour.

    ``contour`` is a polyline array or the list returned by
    :func:`phase_contour`.  Every marching-squares segment lies inside a
    single grid cell, so 5 samples per segment comfortably exceeds 4
    samples per crossed cell.
    """
    if isinstance(contour, np.ndarray):
        polylines = [contour]
    else:
        polylines = list(contour)
    if not polylines or all(np.asarray(p).shape[0] == 0 for p in polylines):
        raise ParameterDomainError("contour is empty")
    lo, hi = np.inf, -np.inf
    ts = np.linspace(0.0, 1.0, 5)
    for poly in polylines:
        poly = np.asarray(poly, dtype=float)
        for k in range(poly.shape[0] - 1):
            a, b = poly[k], poly[k + 1]
            for t in ts:
                val = cmap.beta_at(*(a + t * (b - a)))
                if np.isfinite(val):
                    lo = min(lo, val)
                    hi = max(hi, val)
        if poly.shape[0] == 1:
            val = cmap.beta_at(*poly[0])
            if np.isfinite(val):
                lo = min(lo, val)
                hi = max(hi, val)
    if not np.isfinite(lo):
        raise ParameterDomainError("contour has no valid samples")
    return float(lo), float(hi)


def dipole_angle(beta_measured, beta_map) -> float:
    """In-plane dipole angle from measured vs map-predicted coupling.

    Both the pump and probe couplings project onto the map's dipole axis
    as cos(theta), so beta_measured = beta_map * cos(theta)**2 and

        theta = arccos(sqrt(beta_measured / beta_map)) in [0, pi/2].
    """
    if beta_measured <= 0 or beta_map <= 0:
        raise ParameterDomainError("couplings must be > 0")
    if beta_measured > beta_map:
        raise NoSolutionError(
            f"beta_measured={beta_measured} exceeds the map value {beta_map}; "
            "a tilted dipole cannot outperform the aligned case"
        )
    return float(np.arccos(np.sqrt(beta_measured / beta_map)))
