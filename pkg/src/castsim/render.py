"""Software renderer: bump-shaded rasterization with pixel-exact ID masks.

Texture normal maps perturb shading only (fake detail); defect height maps
displace subdivided geometry (true detail). The two never interact, which is
what makes texture strength and defect depth independently tunable.

Visibility is a classic depth-buffered rasterizer: nearest surface wins,
depth ties resolve to the lower triangle index. No shadows or global
illumination.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .defects import MASK_EPSILON_MM, DefectInstance
from .errors import (
    EmptyMesh,
    FootprintOutsideChart,
    NoLights,
    SubdivisionBudgetExceeded,
)
from .imaging import AlbedoMap, GrayImage, MaskMap, NormalMap
from .stereo import ImageStack, LightRig

_TRIANGLE_BUDGET = 10_000_000


# ---------------------------------------------------------------------------
# scene types
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Triangulated, UV-mapped mesh in millimetres."""

    vertices: np.ndarray  # (N, 3) mm
    triangles: np.ndarray  # (M, 3) int
    uvs: np.ndarray  # (N, 2) in [0, 1]^2
    normals: np.ndarray  # (N, 3) unit
    tags: np.ndarray | None = None  # (M,) defect id per triangle, 0 = none

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.uvs = np.asarray(self.uvs, dtype=np.float64)
        self.normals = np.asarray(self.normals, dtype=np.float64)
        if self.triangles.size == 0 or self.vertices.size == 0:
            raise EmptyMesh("mesh has no geometry")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise ValueError("triangle indices out of range")
        if np.abs(np.linalg.norm(self.normals, axis=1) - 1.0).max() > 1e-6:
            raise ValueError("vertex normals must be unit length")
        v = self.vertices[self.triangles]
        areas = 0.5 * np.linalg.norm(
            np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
        if areas.min() <= 0.0:
            raise ValueError("mesh contains degenerate triangles")
        if self.tags is None:
            self.tags = np.zeros(len(self.triangles), dtype=np.int32)
        else:
            self.tags = np.asarray(self.tags, dtype=np.int32)


def make_plate(width_mm: float, height_mm: float) -> Mesh:
    """Flat z=0 plate centred on the origin, UVs spanning [0, 1]^2."""
    hw, hh = width_mm / 2.0, height_mm / 2.0
    vertices = np.array([[-hw, -hh, 0.0], [hw, -hh, 0.0],
                         [hw, hh, 0.0], [-hw, hh, 0.0]])
    uvs = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    normals = np.tile([0.0, 0.0, 1.0], (4, 1))
    return Mesh(vertices, triangles, uvs, normals)


@dataclass(frozen=True)
class Material:
    albedo: float | AlbedoMap = 0.8
    texture_normals: NormalMap | None = None
    bump_strength: float = 1.0
    specular_strength: float = 0.0
    specular_exponent: float = 16.0

    def __post_init__(self):
        if isinstance(self.albedo, float) and self.albedo < 0:
            raise ValueError("albedo must be non-negative")
        if self.bump_strength < 0 or self.specular_strength < 0:
            raise ValueError("strengths must be non-negative")
        if self.specular_exponent <= 0:
            raise ValueError("specular_exponent must be positive")


@dataclass(frozen=True)
class DefectPlacement:
    instance: DefectInstance
    uv_center: tuple  # (u, v)
    uv_scale: float  # uv units per mm
    displacement_scale: float = 1.0
    defect_id: int = 1

    def __post_init__(self):
        if self.uv_scale <= 0 or self.displacement_scale <= 0:
            raise ValueError("scales must be positive")
        if self.defect_id < 1:
            raise ValueError("defect_id must be a positive integer")
        u0, v0, u1, v1 = self.uv_bounds()
        if u0 < 0 or v0 < 0 or u1 > 1 or v1 > 1:
            raise FootprintOutsideChart(
                f"footprint [{u0:.3f},{u1:.3f}]x[{v0:.3f},{v1:.3f}] leaves the chart")

    def uv_bounds(self):
        hm = self.instance.height
        half_u = hm.width / hm.resolution / 2.0 * self.uv_scale
        half_v = hm.height / hm.resolution / 2.0 * self.uv_scale
        return (self.uv_center[0] - half_u, self.uv_center[1] - half_v,
                self.uv_center[0] + half_u, self.uv_center[1] + half_v)

    def texel_uv(self) -> float:
        return self.uv_scale / self.instance.height.resolution

    def sample_height(self, uvs: np.ndarray) -> np.ndarray:
        """Bilinear height (mm) at UV positions; zero outside the map."""
        hm = self.instance.height
        local = (uvs - np.asarray(self.uv_center)) / self.uv_scale  # mm
        px = local[..., 0] * hm.resolution + (hm.width - 1) / 2.0
        py = local[..., 1] * hm.resolution + (hm.height - 1) / 2.0
        return _bilinear(hm.heights, px, py, fill=0.0)


@dataclass(frozen=True)
class DirectionalLight:
    direction: tuple  # unit vector pointing from surface toward the light
    intensity: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("light direction must be unit length")
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")
        object.__setattr__(self, "direction", tuple(float(x) for x in d))


@dataclass(frozen=True)
class Camera:
    position: tuple
    look_at: tuple
    up: tuple = (0.0, 1.0, 0.0)
    vfov_degrees: float = 40.0
    width: int = 256
    height: int = 256

    def __post_init__(self):
        if not 0.0 < self.vfov_degrees < 180.0:
            raise ValueError("vertical FOV must lie in (0, 180) degrees")
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be positive")

    def basis(self):
        pos = np.asarray(self.position, dtype=np.float64)
        fwd = np.asarray(self.look_at, dtype=np.float64) - pos
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        right = right / np.linalg.norm(right)
        up = np.cross(right, fwd)
        return pos, right, up, fwd

    def world_to_screen(self, points: np.ndarray):
        """Project world points; returns (sx, sy, depth) with depth the
        positive view-space distance along the optical axis."""
        pos, right, up, fwd = self.basis()
        rel = points - pos
        x = rel @ right
        y = rel @ up
        depth = rel @ fwd
        tan_half = np.tan(np.deg2rad(self.vfov_degrees) / 2.0)
        aspect = self.width / self.height
        with np.errstate(divide="ignore", invalid="ignore"):
            ndc_x = x / depth / (tan_half * aspect)
            ndc_y = y / depth / tan_half
        sx = (ndc_x + 1.0) / 2.0 * self.width
        sy = (1.0 - ndc_y) / 2.0 * self.height
        return sx, sy, depth

    def pixel_rays(self, px: np.ndarray, py: np.ndarray):
        """World-space rays through pixel centres (px + .5, py + .5)."""
        pos, right, up, fwd = self.basis()
        tan_half = np.tan(np.deg2rad(self.vfov_degrees) / 2.0)
        aspect = self.width / self.height
        ndc_x = (px + 0.5) / self.width * 2.0 - 1.0
        ndc_y = 1.0 - (py + 0.5) / self.height * 2.0
        d = (fwd[None, :]
             + ndc_x[:, None] * tan_half * aspect * right[None, :]
             + ndc_y[:, None] * tan_half * up[None, :])
        return pos, d


@dataclass(frozen=True)
class Scene:
    mesh: Mesh
    material: Material
    placements: tuple = ()
    lights: tuple = (DirectionalLight((0.0, 0.0, 1.0)),)
    camera: Camera = Camera(position=(0.0, 0.0, 50.0), look_at=(0.0, 0.0, 0.0))
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))
        object.__setattr__(self, "lights", tuple(self.lights))
        if len(self.lights) == 0:
            raise NoLights("scene needs at least one light")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background intensity must lie in [0, 1]")


@dataclass(frozen=True)
class RenderOutput:
    image: GrayImage
    mask: MaskMap
    metadata: dict


# ---------------------------------------------------------------------------
# displacement
# ---------------------------------------------------------------------------

def _tri_uv_bbox(uvs, tri):
    t = uvs[tri]
    return t[:, 0].min(), t[:, 1].min(), t[:, 0].max(), t[:, 1].max()


def displace_mesh(mesh: Mesh, placements) -> Mesh:
    """Subdivide triangles over defect footprints and displace the surface.

    Triangles whose UV bounds overlap a footprint are 4-split until every
    edge is at most one displacement texel long (in UV); vertices whose UV
    samples a negative height move along the interpolated normal by
    height * displacement_scale. Triangles in the moved region carry the
    placement's defect id. Geometry outside every footprint is untouched.
    """
    placements = tuple(placements)
    if not placements:
        return Mesh(mesh.vertices.copy(), mesh.triangles.copy(),
                    mesh.uvs.copy(), mesh.normals.copy(),
                    np.zeros(len(mesh.triangles), dtype=np.int32))

    vertices = [tuple(v) for v in mesh.vertices]
    uvs = [tuple(u) for u in mesh.uvs]
    normals = [tuple(n) for n in mesh.normals]
    tris = [tuple(t) for t in mesh.triangles]
    midpoint = {}

    bounds = [p.uv_bounds() for p in placements]
    texels = [p.texel_uv() for p in placements]

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            vertices.append(tuple((np.asarray(vertices[i]) + vertices[j]) / 2.0))
            uvs.append(tuple((np.asarray(uvs[i]) + uvs[j]) / 2.0))
            n = np.asarray(normals[i]) + normals[j]
            normals.append(tuple(n / np.linalg.norm(n)))
            midpoint[key] = len(vertices) - 1
        return midpoint[key]

    while True:
        UV = np.asarray(uvs)
        TR = np.asarray(tris, dtype=np.int64)
        tri_uv = UV[TR]  # (M, 3, 2)
        lo = tri_uv.min(axis=1)
        hi = tri_uv.max(axis=1)
        max_edge = np.linalg.norm(
            tri_uv - np.roll(tri_uv, -1, axis=1), axis=2).max(axis=1)
        need = np.zeros(len(tris), dtype=bool)
        for (bu0, bv0, bu1, bv1), texel in zip(bounds, texels):
            overlap = ((hi[:, 0] >= bu0) & (lo[:, 0] <= bu1)
                       & (hi[:, 1] >= bv0) & (lo[:, 1] <= bv1))
            need |= overlap & (max_edge > texel)
        if not need.any():
            break
        if len(tris) + 3 * int(need.sum()) > _TRIANGLE_BUDGET:
            raise SubdivisionBudgetExceeded(
                f"subdivision exceeded {_TRIANGLE_BUDGET} triangles")
        next_tris = []
        for tri, split in zip(tris, need):
            if split:
                a, b, c = tri
                ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
                next_tris.extend([(a, ab, ca), (ab, b, bc),
                                  (ca, bc, c), (ab, bc, ca)])
            else:
                next_tris.append(tri)
        tris = next_tris

    V = np.asarray(vertices)
    UV = np.asarray(uvs)
    N = np.asarray(normals)
    T = np.asarray(tris, dtype=np.int64)

    offsets = np.zeros(len(V))
    vertex_label = np.zeros(len(V), dtype=np.int32)
    for p in placements:
        h = p.sample_height(UV)
        offsets += h * p.displacement_scale
        vertex_label[h < -MASK_EPSILON_MM] = p.defect_id
    moved = offsets != 0.0
    V = V + offsets[:, None] * N

    tags = vertex_label[T].max(axis=1).astype(np.int32)

    # moved vertices get normals recomputed from the displaced faces;
    # everything else keeps its input normal so undisplaced shading is
    # bit-identical
    if moved.any():
        e1 = V[T[:, 1]] - V[T[:, 0]]
        e2 = V[T[:, 2]] - V[T[:, 0]]
        fn = np.cross(e1, e2)
        acc = np.zeros_like(V)
        for c in range(3):
            np.add.at(acc, T[:, c], fn)
        norm = np.linalg.norm(acc, axis=1)
        ok = moved & (norm > 1e-12)
        N = N.copy()
        N[ok] = acc[ok] / norm[ok, None]

    return Mesh(V, T, UV, N, tags)


# ---------------------------------------------------------------------------
# shading
# ---------------------------------------------------------------------------

def _bilinear(grid: np.ndarray, px, py, fill=0.0):
    """Bilinear sample of a (H, W) or (H, W, C) grid at float pixel coords."""
    H, W = grid.shape[:2]
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0
    out_shape = px.shape + grid.shape[2:]
    result = np.full(out_shape, fill, dtype=np.float64)
    inside = (px >= -0.5) & (py >= -0.5) & (px <= W - 0.5) & (py <= H - 0.5)
    xc0 = np.clip(x0, 0, W - 1)
    xc1 = np.clip(x0 + 1, 0, W - 1)
    yc0 = np.clip(y0, 0, H - 1)
    yc1 = np.clip(y0 + 1, 0, H - 1)
    if grid.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v = (grid[yc0, xc0] * (1 - fx) * (1 - fy) + grid[yc0, xc1] * fx * (1 - fy)
         + grid[yc1, xc0] * (1 - fx) * fy + grid[yc1, xc1] * fx * fy)
    result[inside] = v[inside]
    return result


def sample_texture_normals(nm: NormalMap, uvs: np.ndarray) -> np.ndarray:
    """Bilinear tangent-space normals at UV positions, renormalized."""
    px = uvs[..., 0] * (nm.width - 1)
    py = uvs[..., 1] * (nm.height - 1)
    n = _bilinear(nm.normals, px, py, fill=0.0)
    n[..., 2] = np.where(np.linalg.norm(n, axis=-1) < 1e-9, 1.0, n[..., 2])
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def perturb_normals(normals, tangents, bitangents, tex_normals, bump_strength):
    """Bump perturbation n' = normalize(n + s (T tx + B ty)).

    tx, ty are the tangent-plane components of the sampled texture normal;
    degenerate tangent frames (zero vectors) fall back to the unperturbed n.
    """
    perturbed = (normals
                 + bump_strength * (tangents * tex_normals[..., 0:1]
                                    + bitangents * tex_normals[..., 1:2]))
    norm = np.linalg.norm(perturbed, axis=-1, keepdims=True)
    bad = norm[..., 0] < 1e-9
    perturbed[bad] = normals[bad]
    norm[bad] = 1.0
    return perturbed / np.linalg.norm(perturbed, axis=-1, keepdims=True)


def shade(normals: np.ndarray, albedo: np.ndarray, lights,
          view_dirs: np.ndarray, specular_strength: float = 0.0,
          specular_exponent: float = 16.0) -> np.ndarray:
    """Lambert + Blinn specular over directional lights, clamped to [0, 1].

    intensity = sum_l I_l (albedo max(0, n.l) + ks max(0, n.h)^e)
    """
    total = np.zeros(normals.shape[:-1])
    for light in lights:
        l = np.asarray(light.direction)
        diffuse = albedo * np.clip(normals @ l, 0.0, None)
        term = diffuse
        if specular_strength > 0.0:
            h = l + view_dirs
            h = h / np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), 1e-12)
            spec = specular_strength * np.clip(
                np.einsum("...i,...i->...", normals, h), 0.0, None) ** specular_exponent
            term = term + spec
        total = total + light.intensity * term
    return np.clip(total, 0.0, 1.0)


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

class _RasterResult:
    def __init__(self, tri_index, bary, depth):
        self.tri_index = tri_index  # (H, W) int32, -1 where background
        self.bary = bary  # (H, W, 3)
        self.depth = depth


def rasterize(mesh: Mesh, camera: Camera) -> _RasterResult:
    """Depth-buffered visibility; ties go to the lower triangle index."""
    H, W = camera.height, camera.width
    sx, sy, depth_v = camera.world_to_screen(mesh.vertices)
    tri_index = np.full((H, W), -1, dtype=np.int64)
    bary = np.zeros((H, W, 3))
    zbuf = np.full((H, W), np.inf)

    T = mesh.triangles
    vx = sx[T]  # (M, 3)
    vy = sy[T]
    vz = depth_v[T]
    front = (vz > 1e-9).all(axis=1)  # no near-plane clipping
    x_lo = np.maximum(np.floor(vx.min(axis=1) - 0.5).astype(np.int64), 0)
    x_hi = np.minimum(np.ceil(vx.max(axis=1) + 0.5).astype(np.int64), W - 1)
    y_lo = np.maximum(np.floor(vy.min(axis=1) - 0.5).astype(np.int64), 0)
    y_hi = np.minimum(np.ceil(vy.max(axis=1) + 0.5).astype(np.int64), H - 1)
    on_screen = front & (x_lo <= x_hi) & (y_lo <= y_hi)

    for t in np.flatnonzero(on_screen):
        x0, x1 = x_lo[t], x_hi[t]
        y0, y1 = y_lo[t], y_hi[t]
        px = np.arange(x0, x1 + 1) + 0.5
        py = np.arange(y0, y1 + 1) + 0.5
        PX, PY = np.meshgrid(px, py)
        ax, ay = vx[t, 0], vy[t, 0]
        bx, by = vx[t, 1], vy[t, 1]
        cx, cy = vx[t, 2], vy[t, 2]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0.0:
            continue
        w0 = ((cx - bx) * (PY - by) - (cy - by) * (PX - bx)) / area
        w1 = ((ax - cx) * (PY - cy) - (ay - cy) * (PX - cx)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        inv_z = w0 / vz[t, 0] + w1 / vz[t, 1] + w2 / vz[t, 2]
        z = 1.0 / inv_z
        win = inside & (z < zbuf[y0:y1 + 1, x0:x1 + 1])
        if not win.any():
            continue
        # perspective-correct barycentrics for attribute interpolation
        b0 = (w0 / vz[t, 0]) * z
        b1 = (w1 / vz[t, 1]) * z
        b2 = (w2 / vz[t, 2]) * z
        sub = (slice(y0, y1 + 1), slice(x0, x1 + 1))
        zbuf[sub] = np.where(win, z, zbuf[sub])
        tri_index[sub] = np.where(win, t, tri_index[sub])
        for c, b in enumerate((b0, b1, b2)):
            bary[sub + (c,)] = np.where(win, b, bary[sub + (c,)])
    return _RasterResult(tri_index, bary, zbuf)


def _tangent_frames(mesh: Mesh):
    """Per-triangle normalized UV tangent and bitangent; zero if degenerate."""
    T = mesh.triangles
    p0, p1, p2 = (mesh.vertices[T[:, i]] for i in range(3))
    u0, u1, u2 = (mesh.uvs[T[:, i]] for i in range(3))
    dp1, dp2 = p1 - p0, p2 - p0
    du1, du2 = u1 - u0, u2 - u0
    det = du1[:, 0] * du2[:, 1] - du1[:, 1] * du2[:, 0]
    tangents = np.zeros_like(dp1)
    bitangents = np.zeros_like(dp1)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, det, 1.0)
    t = (dp1 * du2[:, 1:2] - dp2 * du1[:, 1:2]) / inv[:, None]
    b = (dp2 * du1[:, 0:1] - dp1 * du2[:, 0:1]) / inv[:, None]
    tn = np.linalg.norm(t, axis=1)
    bn = np.linalg.norm(b, axis=1)
    ok = ok & (tn > 1e-12) & (bn > 1e-12)
    tangents[ok] = t[ok] / tn[ok, None]
    bitangents[ok] = b[ok] / bn[ok, None]
    return tangents, bitangents


def render(scene: Scene) -> RenderOutput:
    """Render image + ID mask for a scene.

    Geometry is displaced first; visibility comes from the rasterizer; the
    mask holds the defect tag of the visible triangle at each pixel.
    """
    mesh = displace_mesh(scene.mesh, scene.placements)
    raster = rasterize(mesh, scene.camera)
    image = shade_visible(mesh, scene, raster)
    mask = np.zeros(raster.tri_index.shape, dtype=np.int32)
    hit = raster.tri_index >= 0
    mask[hit] = mesh.tags[raster.tri_index[hit]]
    meta = {
        "scene_hash": scene_hash(scene),
        "camera": {
            "position": list(scene.camera.position),
            "look_at": list(scene.camera.look_at),
            "vfov_degrees": scene.camera.vfov_degrees,
        },
        "bounding_boxes": mask_bounding_boxes(MaskMap(mask)),
    }
    return RenderOutput(GrayImage(image), MaskMap(mask), meta)


def shade_visible(mesh: Mesh, scene: Scene, raster: _RasterResult) -> np.ndarray:
    """Shading pass over the visible pixels of a raster result."""
    hit = raster.tri_index >= 0
    out = np.full(raster.tri_index.shape, scene.background)
    if not hit.any():
        return out
    tri = raster.tri_index[hit]
    b = raster.bary[hit]  # (P, 3)
    T = mesh.triangles[tri]  # (P, 3)

    pos = np.einsum("pc,pcd->pd", b, mesh.vertices[T])
    nrm = np.einsum("pc,pcd->pd", b, mesh.normals[T])
    nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
    uv = np.einsum("pc,pcd->pd", b, mesh.uvs[T])

    mat = scene.material
    if isinstance(mat.albedo, AlbedoMap):
        albedo = _bilinear(mat.albedo.albedo,
                           uv[:, 0] * (mat.albedo.width - 1),
                           uv[:, 1] * (mat.albedo.height - 1), fill=0.0)
    else:
        albedo = float(mat.albedo)

    if mat.texture_normals is not None and mat.bump_strength > 0.0:
        tangents, bitangents = _tangent_frames(mesh)
        tex = sample_texture_normals(mat.texture_normals, uv)
        nrm = perturb_normals(nrm, tangents[tri], bitangents[tri], tex,
                              mat.bump_strength)

    cam_pos = np.asarray(scene.camera.position)
    view = cam_pos - pos
    view = view / np.linalg.norm(view, axis=-1, keepdims=True)
    out[hit] = shade(nrm, albedo, scene.lights, view,
                     mat.specular_strength, mat.specular_exponent)
    return out


def render_stack_for_stereo(scene: Scene, rig: LightRig) -> ImageStack:
    """One Lambertian render per rig light, sharing visibility.

    Specular is forced off so the stack obeys the model the stereo solver
    inverts; bump perturbation stays on, which is exactly what makes the
    round trip recover the texture normals.
    """
    mesh = displace_mesh(scene.mesh, scene.placements)
    raster = rasterize(mesh, scene.camera)
    base_mat = replace(scene.material, specular_strength=0.0)
    images = []
    for d in rig.directions:
        one = replace(scene, lights=(DirectionalLight(tuple(d)),),
                      material=base_mat, placements=())
        # placements already applied to `mesh`; shade_visible does not displace
        images.append(GrayImage(shade_visible(mesh, one, raster)))
    return ImageStack(tuple(images), rig)


# ---------------------------------------------------------------------------
# ray-cast oracle
# ---------------------------------------------------------------------------

def raycast_pixels(mesh: Mesh, camera: Camera, px: np.ndarray, py: np.ndarray):
    """Independent visibility oracle: nearest triangle hit per pixel centre.

    Returns (tri_index, depth) arrays with -1 / inf where nothing is hit.
    Ties at equal depth resolve to the lower triangle index, matching the
    rasterizer contract.
    """
    origin, dirs = camera.pixel_rays(np.asarray(px, dtype=np.float64),
                                     np.asarray(py, dtype=np.float64))
    T = mesh.triangles
    v0 = mesh.vertices[T[:, 0]]
    e1 = mesh.vertices[T[:, 1]] - v0
    e2 = mesh.vertices[T[:, 2]] - v0
    best_tri = np.full(len(dirs), -1, dtype=np.int64)
    best_t = np.full(len(dirs), np.inf)
    for i, d in enumerate(dirs):
        pvec = np.cross(d, e2)
        det = np.einsum("md,md->m", e1, pvec)
        ok = np.abs(det) > 1e-14
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = origin - v0
        u = np.einsum("md,md->m", tvec, pvec) * inv_det
        qvec = np.cross(tvec, e1)
        v = np.einsum("d,md->m", d, qvec) * inv_det
        t = np.einsum("md,md->m", e2, qvec) * inv_det
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
        if hit.any():
            idx = np.flatnonzero(hit)
            ts = t[idx]
            # argmin returns the first (lowest-index) minimum
            j = idx[np.argmin(ts)]
            best_tri[i] = j
            best_t[i] = t[j]
    return best_tri, best_t


# ---------------------------------------------------------------------------
# metadata helpers
# ---------------------------------------------------------------------------

def mask_bounding_boxes(mask: MaskMap) -> list:
    """Tight pixel boxes per defect ID present in a mask.

    Boxes are [x_min, y_min, x_max, y_max] inclusive.
    """
    boxes = []
    for defect_id in np.unique(mask.labels):
        if defect_id == 0:
            continue
        ys, xs = np.nonzero(mask.labels == defect_id)
        boxes.append({
            "defect_id": int(defect_id),
            "box": [int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())],
        })
    return boxes


def scene_hash(scene: Scene) -> str:
    """Deterministic digest of everything that influences the pixels."""
    h = hashlib.sha256()
    for arr in (scene.mesh.vertices, scene.mesh.triangles, scene.mesh.uvs,
                scene.mesh.normals):
        h.update(np.ascontiguousarray(arr).tobytes())
    mat = scene.material
    albedo = (mat.albedo.albedo.tobytes() if isinstance(mat.albedo, AlbedoMap)
              else repr(float(mat.albedo)).encode())
    h.update(albedo)
    if mat.texture_normals is not None:
        h.update(np.ascontiguousarray(mat.texture_normals.normals).tobytes())
    h.update(repr((mat.bump_strength, mat.specular_strength,
                   mat.specular_exponent)).encode())
    for p in scene.placements:
        h.update(np.ascontiguousarray(p.instance.height.heights).tobytes())
        h.update(repr((p.uv_center, p.uv_scale, p.displacement_scale,
                       p.defect_id)).encode())
    h.update(json.dumps({
        "lights": [[list(l.direction), l.intensity] for l in scene.lights],
        "camera": [list(scene.camera.position), list(scene.camera.look_at),
                   list(scene.camera.up), scene.camera.vfov_degrees,
                   scene.camera.width, scene.camera.height],
        "background": scene.background,
    }, sort_keys=True).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# OBJ I/O
# ---------------------------------------------------------------------------

def load_obj(path) -> Mesh:
    """Load a triangulated Wavefront OBJ with UVs (v/vt[/vn] faces)."""
    positions, uvs_raw, normals_raw, faces = [], [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                positions.append([float(x) for x in parts[1:4]])
            elif parts[0] == "vt":
                uvs_raw.append([float(x) for x in parts[1:3]])
            elif parts[0] == "vn":
                normals_raw.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise ValueError(f"non-triangular face in {path}")
                faces.append([p.split("/") for p in parts[1:]])
    if not positions or not faces:
        raise EmptyMesh(f"{path} contains no triangles")

    # re-index so each (position, uv, normal) combination is one vertex
    combos = {}
    verts, uvs, norms, tris = [], [], [], []
    for face in faces:
        tri = []
        for ref in face:
            vi = int(ref[0]) - 1
            ti = int(ref[1]) - 1 if len(ref) > 1 and ref[1] else 0
            ni = int(ref[2]) - 1 if len(ref) > 2 and ref[2] else -1
            key = (vi, ti, ni)
            if key not in combos:
                combos[key] = len(verts)
                verts.append(positions[vi])
                uvs.append(uvs_raw[ti] if uvs_raw else [0.0, 0.0])
                norms.append(normals_raw[ni] if ni >= 0 else [0.0, 0.0, 1.0])
            tri.append(combos[key])
        tris.append(tri)
    norms = np.asarray(norms, dtype=np.float64)
    norms /= np.maximum(np.linalg.norm(norms, axis=1, keepdims=True), 1e-12)
    return Mesh(np.asarray(verts), np.asarray(tris), np.asarray(uvs), norms)


def save_obj(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
        for u in mesh.uvs:
            fh.write(f"vt {u[0]} {u[1]}\n")
        for n in mesh.normals:
            fh.write(f"vn {n[0]} {n[1]} {n[2]}\n")
        for t in mesh.triangles:
            a, b, c = t + 1
            fh.write(f"f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}\n")
