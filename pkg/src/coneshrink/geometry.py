"""Radial-graph reconstruction of the shrinker end, residual verification,
cone asymptotics, and profile/mesh export.

The end is the radial graph r = e^{phi(d)} over the annular region
0 < d <= d0 + margin; the phi-equation residual

    R(d) = phi''/(1 + phi'^2) + phi' H(d) - n + e^{2 phi}/2

is the reduction of the shrinker equation H = -X.nu/2 to this chart and is
the authoritative verification.  Meshes exist for the two cases with a
closed-form ambient parameterization: surfaces of revolution (n = 2, g = 1)
and sphere-product tori (n = 3, g = 2, exported as a fixed-psi2 slice
projected to the first three coordinates).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .catalog import CurvatureProfile, IsoparametricFamily, mean_curvature
from .errors import (
    ExportIOError,
    InsufficientRange,
    OutOfRange,
    ResolutionTooLow,
    UnsupportedFamily,
)
from .ivp import D_SIDE, SolutionProfile, _hermite_eval
from .numutil import atomic_write_text, loglog_slope
from .series import (
    FormalSeries,
    compute_coefficients,
    evaluate_truncated,
    series_value_tail,
)

PROFILE_JSON_SCHEMA = {
    "type": "object",
    "required": ["schema", "family", "columns", "rows"],
    "properties": {
        "schema": {"const": "coneshrink/profile-v1"},
        "family": {"type": "object"},
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

EXPORT_COLUMNS = ("d", "r", "phi", "eq130_residual", "eq350_drift")


@dataclass(frozen=True)
class ShrinkerResidualReport:
    values: np.ndarray
    max_abs: float


def shrinker_residual(profile_d: SolutionProfile, family: IsoparametricFamily,
                      d2phi=None) -> ShrinkerResidualReport:
    """Radial-graph shrinker residual at the stored nodes.

    ``d2phi`` overrides the profile's second derivative (used to evaluate
    synthetic profiles that carry their own)."""
    if profile_d.side != D_SIDE:
        raise OutOfRange("shrinker residual needs a d-side profile")
    d = profile_d["d"]
    phi = profile_d["phi"]
    dphi = profile_d["dphi"]
    if d2phi is None:
        d2phi = profile_d["d2phi"]
    prof = CurvatureProfile(family, profile_d.meta.get("profile_mode", "cot_sum"))
    h_vals = np.array([float(mean_curvature(prof, dv)) for dv in d])
    vals = d2phi / (1 + dphi ** 2) + dphi * h_vals - family.n + 0.5 * np.exp(2 * phi)
    return ShrinkerResidualReport(values=vals, max_abs=float(np.max(np.abs(vals))))


def cone_profile(family: IsoparametricFamily, d_values) -> SolutionProfile:
    """The leading asymptote phi = -ln(d/A1)/2 packaged as a d-side profile
    (it solves nothing; used to show the cone itself fails the residual)."""
    a1 = float(compute_coefficients(family, 1).coefficient(1))
    d = np.asarray(d_values, dtype=float)
    phi = -0.5 * np.log(d / a1)
    dphi = -0.5 / d
    d2phi = 0.5 / d ** 2
    return SolutionProfile(
        side=D_SIDE, family=family,
        columns={"d": d, "phi": phi, "dphi": dphi, "d2phi": d2phi,
                 "g": d / a1,
                 "eq130_residual": np.zeros_like(d), "eq350_drift": np.zeros_like(d)},
        meta={"source": "cone_profile"},
    )


@dataclass(frozen=True)
class AsymptoticReport:
    d_samples: np.ndarray
    deviations: np.ndarray      # phi + ln(d/A1)/2, -> 0 linearly in d
    products: np.ndarray        # d * e^phi, decreasing to 0 as d -> 0
    slope: float
    monotone: bool
    growth: float               # phi(d_lo) - phi(d_hi), ~ ln(d_hi/d_lo)/2

    @property
    def ok(self):
        return 0.7 <= self.slope <= 1.3 and self.monotone


def asymptotic_check(profile_d: SolutionProfile, series: FormalSeries,
                     d_lo: float = 1e-6, d_hi: float = 1e-2,
                     points_per_decade: int = 8) -> AsymptoticReport:
    """Cone-asymptotics verification on [d_lo, d_hi] via series-backed samples.

    phi(d) + ln(d/A1)/2 = ln(A1 * gamma(s)/ (A1^2 s)) / 2 is computed
    cancellation-free from the series tail, so the O(d) decay is resolved far
    below rounding of the naive difference.
    """
    if profile_d.side != D_SIDE:
        raise OutOfRange("asymptotic_check needs a d-side profile")
    if d_hi / d_lo < 100.0:
        raise InsufficientRange("need at least two decades of d")
    a1 = float(series.coefficient(1))
    n_pts = max(3, int(round(points_per_decade * math.log10(d_hi / d_lo))))
    # choose s so that d = gamma(s) covers [d_lo, d_hi]; gamma(s) ~ A1 s
    s_grid = np.exp(np.linspace(math.log(d_lo / a1), math.log(d_hi / a1), n_pts))
    d_samples, deviations, products = [], [], []
    for s in s_grid:
        gamma_s = float(evaluate_truncated(series, s).value)
        tail = float(series_value_tail(series, s).value)  # gamma(s) - A1 s
        d_samples.append(gamma_s)
        deviations.append(0.5 * math.log1p(tail / (a1 * s)))
        products.append(gamma_s / math.sqrt(s))           # d * e^phi, phi = -ln(s)/2
    d_samples = np.array(d_samples)
    deviations = np.array(deviations)
    products = np.array(products)
    nz = np.abs(deviations) > 0
    slope = loglog_slope(d_samples[nz], np.abs(deviations[nz]))
    monotone = bool(np.all(np.diff(products) > 0))
    growth = float(-0.5 * math.log(s_grid[0]) + 0.5 * math.log(s_grid[-1]))
    return AsymptoticReport(
        d_samples=d_samples, deviations=deviations, products=products,
        slope=float(slope), monotone=monotone, growth=growth,
    )


# ---------------------------------------------------------------------------
# Profile export
# ---------------------------------------------------------------------------

def export_profile(profile_d: SolutionProfile, path, format: str = "csv"):
    """Write (d, r = e^phi, phi, residuals) as CSV or a schema-stable JSON."""
    if profile_d.side != D_SIDE:
        raise OutOfRange("export_profile needs a d-side profile")
    d = profile_d["d"]
    r = np.exp(profile_d["phi"])
    cols = {
        "d": d, "r": r, "phi": profile_d["phi"],
        "eq130_residual": profile_d["eq130_residual"],
        "eq350_drift": profile_d["eq350_drift"],
    }
    try:
        if format == "csv":
            lines = [",".join(EXPORT_COLUMNS)]
            for row in zip(*[cols[c] for c in EXPORT_COLUMNS]):
                lines.append(",".join(repr(float(v)) for v in row))
            atomic_write_text(path, "\n".join(lines) + "\n")
        elif format == "json":
            doc = {
                "schema": "coneshrink/profile-v1",
                "family": profile_d.family.as_dict(),
                "columns": list(EXPORT_COLUMNS),
                "rows": [[float(cols[c][i]) for c in EXPORT_COLUMNS]
                         for i in range(len(d))],
            }
            atomic_write_text(path, json.dumps(doc, indent=1))
        else:
            raise OutOfRange(f"unknown export format {format!r}")
    except OSError as exc:
        raise ExportIOError(path, exc) from exc
    return path


# ---------------------------------------------------------------------------
# Mesh export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshResult:
    path: object
    n_d: int
    n_angular: int
    vertex_count: int
    face_count: int
    discrete_residual: float   # max |H_disc + X.nu/2| / max |H_disc|, nan if unchecked


def export_mesh(profile_d: SolutionProfile, family: IsoparametricFamily, path,
                resolution: int = 64, psi2_slice: float = 0.0) -> MeshResult:
    """Triangulated OBJ of the reconstructed end.

    n = 2, g = 1: surface of revolution, watertight in the angular direction,
    with a cotangent-Laplacian shrinker check reported in the header comment.
    n = 3, g = 2: the fixed-psi2 slice of the torus chart projected to the
    first three coordinates.
    """
    if resolution < 8:
        raise ResolutionTooLow(f"resolution {resolution} < 8 angular samples")
    if profile_d.side != D_SIDE:
        raise OutOfRange("export_mesh needs a d-side profile")
    case = (family.n, family.g)
    if case == (2, 1):
        verts, faces = _revolution_mesh(profile_d, family, resolution)
        residual = discrete_shrinker_residual(verts, faces, resolution)
    elif case == (3, 2):
        verts, faces = _torus_slice_mesh(profile_d, family, resolution, psi2_slice)
        residual = float("nan")
    else:
        raise UnsupportedFamily(
            f"(n, g) = {case}: no closed-form ambient parameterization meshed here"
        )
    header = [
        "# radial-graph end mesh",
        f"# family g={family.g} m_minus={family.m_minus} m_plus={family.m_plus} "
        f"n={family.n} theta1={family.theta1!r}",
        f"# resolution {resolution}x{resolution}",
    ]
    if math.isfinite(residual):
        header.append(
            f"# discrete shrinker check: max|H_disc + X.nu/2| / max|H_disc| = {residual:.6e}"
        )
    lines = header + [f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}" for v in verts]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    try:
        atomic_write_text(path, "\n".join(lines) + "\n")
    except OSError as exc:
        raise ExportIOError(path, exc) from exc
    return MeshResult(path=path, n_d=resolution, n_angular=resolution,
                      vertex_count=len(verts), face_count=len(faces),
                      discrete_residual=residual)


def _mesh_phi_interp(profile_d, d_samples):
    return _hermite_eval(profile_d["d"], profile_d["phi"], profile_d["dphi"],
                         d_samples)


def _revolution_mesh(profile_d, family, resolution):
    d_nodes = profile_d["d"]
    d_samples = np.linspace(d_nodes[0], d_nodes[-1], resolution)
    phi = _mesh_phi_interp(profile_d, d_samples)
    r = np.exp(phi)
    chi = family.theta1 + d_samples          # colatitude of the circle on S^2
    psi = 2 * np.pi * np.arange(resolution) / resolution
    sin_chi = np.sin(chi)[:, None]
    cos_chi = np.cos(chi)[:, None]
    rr = r[:, None]
    verts = np.stack([
        (rr * sin_chi * np.cos(psi)[None, :]).ravel(),
        (rr * sin_chi * np.sin(psi)[None, :]).ravel(),
        (rr * cos_chi * np.ones_like(psi)[None, :]).ravel(),
    ], axis=1)
    faces = _grid_faces(resolution, resolution, wrap=True)
    faces = _orient_outward(verts, faces)
    return verts, faces


def _torus_slice_mesh(profile_d, family, resolution, psi2):
    d_nodes = profile_d["d"]
    d_samples = np.linspace(d_nodes[0], d_nodes[-1], resolution)
    phi = _mesh_phi_interp(profile_d, d_samples)
    r = np.exp(phi)
    th = family.theta1 + d_samples
    psi1 = 2 * np.pi * np.arange(resolution) / resolution
    # ambient S^3 point (cos th cos p1, cos th sin p1, sin th cos p2, sin th sin p2),
    # sliced at fixed psi2 and orthogonally projected to the first three coordinates
    rr = r[:, None]
    cos_t = np.cos(th)[:, None]
    sin_t = np.sin(th)[:, None]
    verts = np.stack([
        (rr * cos_t * np.cos(psi1)[None, :]).ravel(),
        (rr * cos_t * np.sin(psi1)[None, :]).ravel(),
        (rr * sin_t * math.cos(psi2) * np.ones_like(psi1)[None, :]).ravel(),
    ], axis=1)
    faces = _grid_faces(resolution, resolution, wrap=True)
    faces = _orient_outward(verts, faces)
    return verts, faces


def _grid_faces(n_rows, n_cols, wrap):
    faces = []
    cols = n_cols if wrap else n_cols - 1
    for i in range(n_rows - 1):
        for j in range(cols):
            j2 = (j + 1) % n_cols
            a = i * n_cols + j
            b = i * n_cols + j2
            c = (i + 1) * n_cols + j
            d = (i + 1) * n_cols + j2
            faces.append((a, b, d))
            faces.append((a, d, c))
    return faces


def _orient_outward(verts, faces):
    """Flip all faces if normals point inward (radial component negative)."""
    a = verts[[f[0] for f in faces]]
    b = verts[[f[1] for f in faces]]
    c = verts[[f[2] for f in faces]]
    normals = np.cross(b - a, c - a)
    centers = (a + b + c) / 3.0
    score = float(np.sum(np.einsum("ij,ij->i", normals, centers)))
    if score < 0:
        return [(f[0], f[2], f[1]) for f in faces]
    return faces


def discrete_shrinker_residual(verts, faces, n_cols):
    """Cotangent-Laplacian mean curvature against -X.nu/2 on interior vertices.

    Returns max |H_disc + X.nu/2| / max |H_disc| (sum convention for H,
    outward vertex normals from area-weighted face normals)."""
    nv = len(verts)
    faces = np.asarray(faces)
    v0, v1, v2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    # cotangents of the three corner angles of every face
    def cot_angle(p, q, r):
        u, w = q - p, r - p
        cross = np.cross(u, w)
        denom = np.linalg.norm(cross, axis=1)
        return np.einsum("ij,ij->i", u, w) / np.where(denom > 0, denom, 1.0)

    cot0 = cot_angle(v0, v1, v2)
    cot1 = cot_angle(v1, v2, v0)
    cot2 = cot_angle(v2, v0, v1)
    face_normals = np.cross(v1 - v0, v2 - v0)
    areas = 0.5 * np.linalg.norm(face_normals, axis=1)

    lap = np.zeros_like(verts)
    vertex_area = np.zeros(nv)
    vertex_normal = np.zeros_like(verts)
    # corner k's cotangent weights the opposite edge
    for (ia, ib), w in (((1, 2), cot0), ((2, 0), cot1), ((0, 1), cot2)):
        a_idx, b_idx = faces[:, ia], faces[:, ib]
        diff = verts[a_idx] - verts[b_idx]
        np.add.at(lap, a_idx, -0.5 * w[:, None] * diff)
        np.add.at(lap, b_idx, 0.5 * w[:, None] * diff)
    np.add.at(vertex_area, faces.ravel(), np.repeat(areas / 3.0, 3))
    np.add.at(vertex_normal, faces.ravel(), np.repeat(face_normals, 3, axis=0))
    # lap holds (1/2) sum w_ij (x_j - x_i); dividing by the vertex area gives
    # the surface Laplacian of the position, i.e. the mean curvature vector
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = lap / vertex_area[:, None]
    norms = np.linalg.norm(vertex_normal, axis=1)
    unit_n = vertex_normal / np.where(norms > 0, norms, 1.0)[:, None]
    h_disc = np.einsum("ij,ij->i", delta, unit_n)   # sum convention, sign along nu
    x_dot_n = np.einsum("ij,ij->i", verts, unit_n)
    interior = np.ones(nv, dtype=bool)
    interior[:n_cols] = False
    interior[-n_cols:] = False
    resid = np.abs(h_disc[interior] + 0.5 * x_dot_n[interior])
    return float(np.max(resid) / np.max(np.abs(h_disc[interior])))


def read_profile_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
