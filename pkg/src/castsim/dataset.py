"""Randomized scene generation at scale, annotation writing, and splitting.

Every image i draws all of its randomness from an RNG seeded by
hash(master_seed, i), so single images are reproducible in isolation and
generation order never matters.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .defects import DefectParamRanges, DefectParams, generate_defect, sample_params
from .errors import EmptyManifest, PlacementFailed
from .imaging import GrayImage, MaskMap, NormalMap, save_image, save_mask_map
from .noise import NoiseSpec, hash_u64
from .render import (
    Camera,
    DefectPlacement,
    DirectionalLight,
    Material,
    Scene,
    make_plate,
    mask_bounding_boxes,
    render,
)


@dataclass(frozen=True)
class CameraPoseRanges:
    """Orbit ranges around the part: degrees and millimetres."""

    azimuth_deg: tuple = (0.0, 360.0)
    elevation_deg: tuple = (40.0, 90.0)
    distance_mm: tuple = (80.0, 120.0)


@dataclass(frozen=True)
class LightRanges:
    """Single-key-light randomization: slant/azimuth jitter plus intensity."""

    slant_deg: tuple = (20.0, 50.0)
    azimuth_deg: tuple = (0.0, 360.0)
    intensity: tuple = (0.9, 1.1)


@dataclass(frozen=True)
class RandomizationConfig:
    n_images: int = 10
    master_seed: int = 0
    defects_per_image: tuple = (1, 3)
    defect_param_ranges: DefectParamRanges = field(default_factory=DefectParamRanges)
    camera_pose_ranges: CameraPoseRanges = field(default_factory=CameraPoseRanges)
    light_ranges: LightRanges = field(default_factory=LightRanges)
    texture_seeds: tuple = ()  # NormalMap textures to draw the plate skin from
    healthy_fraction: float = 0.0  # the reference pipeline is all-defective
    plate_mm: float = 10.0
    image_width: int = 160
    image_height: int = 120
    vfov_degrees: float = 10.0
    albedo: float = 0.8
    bump_strength: float = 1.0

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        lo, hi = self.defects_per_image
        if lo < 1 or lo > hi:
            raise ValueError("defects_per_image must satisfy 1 <= min <= max")
        if not 0.0 <= self.healthy_fraction < 1.0:
            raise ValueError("healthy_fraction must lie in [0, 1)")
        if self.plate_mm <= 0:
            raise ValueError("plate_mm must be positive")
        object.__setattr__(self, "texture_seeds", tuple(self.texture_seeds))


@dataclass
class DatasetManifest:
    records: list
    config_hash: str

    def __len__(self):
        return len(self.records)


def _uniform(rng, bounds):
    lo, hi = bounds
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def _orbit_camera(cfg: RandomizationConfig, rng) -> Camera:
    r = cfg.camera_pose_ranges
    az = np.deg2rad(_uniform(rng, r.azimuth_deg))
    el = np.deg2rad(_uniform(rng, r.elevation_deg))
    d = _uniform(rng, r.distance_mm)
    pos = (d * np.cos(el) * np.cos(az), d * np.cos(el) * np.sin(az),
           d * np.sin(el))
    fwd = -np.asarray(pos) / d
    up = (0.0, 0.0, 1.0)
    if abs(fwd @ np.asarray(up)) > 0.99:  # near-zenith view
        up = (0.0, 1.0, 0.0)
    return Camera(position=pos, look_at=(0.0, 0.0, 0.0), up=up,
                  vfov_degrees=cfg.vfov_degrees,
                  width=cfg.image_width, height=cfg.image_height)


def _key_light(cfg: RandomizationConfig, rng) -> DirectionalLight:
    r = cfg.light_ranges
    s = np.deg2rad(_uniform(rng, r.slant_deg))
    az = np.deg2rad(_uniform(rng, r.azimuth_deg))
    d = (np.sin(s) * np.cos(az), np.sin(s) * np.sin(az), np.cos(s))
    return DirectionalLight(direction=d, intensity=_uniform(rng, r.intensity))


def _boxes_overlap(a, b):
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def randomize_scene(cfg: RandomizationConfig, index: int) -> Scene:
    """Draw one fully determined scene for image `index`."""
    if index >= cfg.n_images:
        raise ValueError(f"index {index} out of range for n_images {cfg.n_images}")
    rng = np.random.default_rng(hash_u64(cfg.master_seed, index))

    healthy = rng.random() < cfg.healthy_fraction
    n_defects = 0 if healthy else int(
        rng.integers(cfg.defects_per_image[0], cfg.defects_per_image[1] + 1))

    uv_scale = 1.0 / cfg.plate_mm
    placements = []
    taken = []
    for d in range(n_defects):
        params = sample_params(cfg.defect_param_ranges, rng)
        seed = int(rng.integers(0, 2 ** 63))
        instance = generate_defect(params, seed)
        half = instance.height.width / instance.height.resolution / 2.0 * uv_scale
        placed = False
        for _ in range(100):
            cu = float(rng.uniform(half, 1.0 - half))
            cv = float(rng.uniform(half, 1.0 - half))
            box = (cu - half, cv - half, cu + half, cv + half)
            if all(not _boxes_overlap(box, t) for t in taken):
                taken.append(box)
                placements.append(DefectPlacement(
                    instance=instance, uv_center=(cu, cv), uv_scale=uv_scale,
                    displacement_scale=1.0, defect_id=d + 1))
                placed = True
                break
        if not placed:
            raise PlacementFailed(
                f"could not place defect {d + 1} of image {index} in 100 attempts")

    texture = None
    if cfg.texture_seeds:
        texture = cfg.texture_seeds[int(rng.integers(len(cfg.texture_seeds)))]

    return Scene(
        mesh=make_plate(cfg.plate_mm, cfg.plate_mm),
        material=Material(albedo=cfg.albedo, texture_normals=texture,
                          bump_strength=cfg.bump_strength),
        placements=tuple(placements),
        lights=(_key_light(cfg, rng),),
        camera=_orbit_camera(cfg, rng),
    )


def _noise_spec_dict(spec: NoiseSpec) -> dict:
    return {"kind": spec.kind, "octaves": spec.octaves,
            "base_frequency": spec.base_frequency,
            "lacunarity": spec.lacunarity, "gain": spec.gain, "seed": spec.seed}


def _params_dict(params: DefectParams) -> dict:
    return {
        "radius_mm": params.radius_mm,
        "depth_mm": params.depth_mm,
        "edge_noise": _noise_spec_dict(params.edge_noise),
        "edge_amplitude": params.edge_amplitude,
        "floor_noise": _noise_spec_dict(params.floor_noise),
        "floor_amplitude": params.floor_amplitude,
        "profile_power": params.profile_power,
        "resolution": params.resolution,
    }


def config_hash(cfg: RandomizationConfig) -> str:
    payload = {}
    for f in cfg.__dataclass_fields__:
        value = getattr(cfg, f)
        if f == "texture_seeds":
            value = [hashlib.sha256(
                np.ascontiguousarray(t.normals).tobytes()).hexdigest()
                for t in value]
        elif hasattr(value, "__dataclass_fields__"):
            value = asdict(value)
        payload[f] = value
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=list).encode()).hexdigest()


def generate_dataset(cfg: RandomizationConfig, out_dir) -> DatasetManifest:
    """Render cfg.n_images randomized scenes and write images, masks, and a
    JSONL manifest under out_dir. Deterministic for a fixed config."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(cfg.n_images):
        scene = randomize_scene(cfg, i)
        out = render(scene)
        image_name = f"image_{i:05d}.png"
        mask_name = f"mask_{i:05d}.png"
        save_image(out.image, out_dir / image_name, bit_depth=16)
        save_mask_map(out.mask, out_dir / mask_name)
        records.append({
            "index": i,
            "image": image_name,
            "mask": mask_name,
            "boxes": out.metadata["bounding_boxes"],
            "defects": [{
                "defect_id": p.defect_id,
                "seed": p.instance.seed,
                "uv_center": list(p.uv_center),
                "params": _params_dict(p.instance.params),
            } for p in scene.placements],
            "camera": {
                "position": [float(x) for x in scene.camera.position],
                "look_at": [float(x) for x in scene.camera.look_at],
                "up": [float(x) for x in scene.camera.up],
                "vfov_degrees": scene.camera.vfov_degrees,
                "width": scene.camera.width,
                "height": scene.camera.height,
            },
            "lights": [{"direction": list(l.direction), "intensity": l.intensity}
                       for l in scene.lights],
            "scene_hash": out.metadata["scene_hash"],
            "split": None,
        })
    manifest = DatasetManifest(records=records, config_hash=config_hash(cfg))
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def recompute_boxes(mask: MaskMap) -> list:
    """Re-derive annotation boxes from a stored mask (audit oracle)."""
    return mask_bounding_boxes(mask)


def split(manifest: DatasetManifest, test_fraction: float, seed: int) -> DatasetManifest:
    """Tag records train/test by seeded shuffle; |test| = round(n * fraction)."""
    if not manifest.records:
        raise EmptyManifest("manifest has no records")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(manifest.records)
    n_test = round(n * test_fraction)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = set(int(i) for i in perm[:n_test])
    records = []
    for i, rec in enumerate(manifest.records):
        rec = dict(rec)
        rec["split"] = "test" if i in test_idx else "train"
        records.append(rec)
    return DatasetManifest(records=records, config_hash=manifest.config_hash)


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w") as fh:
        for rec in manifest.records:
            fh.write(json.dumps({**rec, "config_hash": manifest.config_hash},
                                sort_keys=True) + "\n")


def load_manifest(path) -> DatasetManifest:
    records = []
    config = ""
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            config = rec.pop("config_hash", config)
            records.append(rec)
    if not records:
        raise EmptyManifest(f"{path} holds no records")
    return DatasetManifest(records=records, config_hash=config)
