"""Single command-line entry point for every pipeline stage.

Exit codes: 0 success, 1 stage error, 2 usage error, 3 config error.
Logs go to stderr; with --json a machine-readable summary goes to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import defects, imaging, stereo, texture
from .render import (
    Camera,
    DefectPlacement,
    DirectionalLight,
    Material,
    Scene,
    load_obj,
    make_plate,
    render as render_scene,
)
from .errors import ConfigError, PipelineError
from .noise import NoiseSpec

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3

_RANGE = {"type": "array", "items": {"type": "number"},
          "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "castsim pipeline configuration",
    "type": "object",
    "properties": {
        "master_seed": {"type": "integer"},
        "solver": {
            "type": "object",
            "properties": {
                "shadow_threshold": {"type": "number"},
                "highlight_threshold": {"type": "number"},
                "min_valid_lights": {"type": "integer", "minimum": 3},
            },
            "additionalProperties": False,
        },
        "synthesis": {
            "type": "object",
            "properties": {
                "target_width": {"type": "integer", "minimum": 1},
                "target_height": {"type": "integer", "minimum": 1},
                "overlap": {"type": "integer", "minimum": 1},
                "top_k": {"type": "integer", "minimum": 1},
                "rng_seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "defects": {
            "type": "object",
            "properties": {
                "radius_mm": _RANGE, "depth_mm": _RANGE,
                "edge_amplitude": _RANGE, "floor_amplitude": _RANGE,
                "profile_power": _RANGE, "base_frequency": _RANGE,
                "octaves": _RANGE, "lacunarity": _RANGE, "gain": _RANGE,
                "kinds": {"type": "array",
                          "items": {"enum": ["fractal", "turbulence"]}},
                "resolution": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "dataset": {
            "type": "object",
            "properties": {
                "n_images": {"type": "integer", "minimum": 1},
                "defects_per_image": _RANGE,
                "healthy_fraction": {"type": "number",
                                     "minimum": 0, "exclusiveMaximum": 1},
                "plate_mm": {"type": "number", "exclusiveMinimum": 0},
                "image_width": {"type": "integer", "minimum": 1},
                "image_height": {"type": "integer", "minimum": 1},
                "vfov_degrees": {"type": "number"},
                "albedo": {"type": "number", "minimum": 0},
                "bump_strength": {"type": "number", "minimum": 0},
                "texture_seeds": {"type": "array", "items": {"type": "string"}},
                "camera": {
                    "type": "object",
                    "properties": {"azimuth_deg": _RANGE,
                                   "elevation_deg": _RANGE,
                                   "distance_mm": _RANGE},
                    "additionalProperties": False,
                },
                "lights": {
                    "type": "object",
                    "properties": {"slant_deg": _RANGE, "azimuth_deg": _RANGE,
                                   "intensity": _RANGE},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(args, summary: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(summary, sort_keys=True))
    for path in summary.get("outputs", []):
        _log(f"wrote {path}")


def _load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    import jsonschema
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid: {exc.message}")
    return cfg


def _parse_rig(spec: str) -> stereo.LightRig:
    parts = spec.split(":")
    if len(parts) != 3 or parts[0] != "octagon":
        raise ConfigError(f"unsupported rig spec {spec!r}, expected octagon:SLANT:COUNT")
    return stereo.octagon_rig(float(parts[1]), int(parts[2]))


def _parse_size(spec: str):
    try:
        w, h = spec.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ConfigError(f"bad size {spec!r}, expected WIDTHxHEIGHT")


def _randomization_config(cfg: dict, seed_override=None) -> ds.RandomizationConfig:
    d = cfg.get("defects", {})
    ranges = defects.DefectParamRanges(**{
        k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
    dcfg = cfg.get("dataset", {})
    textures = tuple(imaging.load_normal_map(p)
                     for p in dcfg.get("texture_seeds", []))
    kwargs = {k: v for k, v in dcfg.items()
              if k not in ("camera", "lights", "texture_seeds")}
    if "defects_per_image" in kwargs:
        kwargs["defects_per_image"] = tuple(kwargs["defects_per_image"])
    cam = {k: tuple(v) for k, v in dcfg.get("camera", {}).items()}
    lights = {k: tuple(v) for k, v in dcfg.get("lights", {}).items()}
    seed = cfg.get("master_seed", 0) if seed_override is None else seed_override
    return ds.RandomizationConfig(
        master_seed=seed,
        defect_param_ranges=ranges,
        camera_pose_ranges=ds.CameraPoseRanges(**cam),
        light_ranges=ds.LightRanges(**lights),
        texture_seeds=textures,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_solve_normals(args):
    stack_desc = json.loads(Path(args.stack).read_text())
    images = imaging.load_image_stack(
        [Path(args.stack).parent / p for p in stack_desc["images"]])
    if args.rig:
        rig = _parse_rig(args.rig)
    else:
        rig = stereo.LightRig(np.asarray(stack_desc["lights"], dtype=float))
    stack = stereo.ImageStack(tuple(images), rig)
    cfg = stereo.SolverConfig(
        shadow_threshold=args.shadow_threshold,
        highlight_threshold=args.highlight_threshold,
        min_valid_lights=args.min_valid_lights)
    nm, am = stereo.solve_normals(stack, cfg)
    imaging.save_normal_map(nm, args.out_normals)
    outputs = [args.out_normals]
    if args.out_albedo:
        peak = am.albedo.max()
        scaled = imaging.GrayImage(am.albedo / peak if peak > 1.0 else am.albedo)
        imaging.save_image(scaled, args.out_albedo)
        outputs.append(args.out_albedo)
    _emit(args, {"outputs": outputs,
                 "valid_fraction": float(nm.valid.mean()),
                 "integrability": stereo.integrability_report(nm)})
    return EXIT_OK


def _cmd_build_dict(args):
    maps = [imaging.load_normal_map(p) for p in args.maps]
    dictionary = texture.build_dictionary(maps, args.patch_size, args.stride)
    texture.save_dictionary(dictionary, args.out)
    _emit(args, {"outputs": [args.out], "patches": len(dictionary)})
    return EXIT_OK


def _cmd_synth_texture(args):
    dictionary = texture.load_dictionary(args.dict)
    seed = texture.SeedPatch(imaging.load_normal_map(args.seed))
    w, h = _parse_size(args.size)
    cfg = texture.SynthesisConfig(target_width=w, target_height=h,
                                  top_k=args.top_k, rng_seed=args.rng)
    out, log = texture.synthesize(seed, dictionary, cfg)
    imaging.save_normal_map(out, args.out)
    outputs = [args.out]
    if args.log:
        Path(args.log).write_text(json.dumps(log))
        outputs.append(args.log)
    _emit(args, {"outputs": outputs, "pastes": len(log["pastes"])})
    return EXIT_OK


def _cmd_gen_defect(args):
    params = defects.DefectParams(
        radius_mm=args.radius, depth_mm=args.depth,
        edge_noise=NoiseSpec(kind=args.edge_kind),
        edge_amplitude=args.edge_amp,
        floor_noise=NoiseSpec(kind=args.floor_kind),
        floor_amplitude=args.floor_amp,
        profile_power=args.profile_power,
        resolution=args.resolution)
    instance = defects.generate_defect(params, args.seed)
    imaging.save_height_map(instance.height, args.out)
    outputs = [args.out]
    if args.mask:
        imaging.save_mask_map(instance.mask, args.mask)
        outputs.append(args.mask)
    _emit(args, {"outputs": outputs,
                 "min_height_mm": float(instance.height.heights.min()),
                 "mask_pixels": int((instance.mask.labels > 0).sum())})
    return EXIT_OK


def _scene_from_json(desc: dict, base: Path) -> Scene:
    mesh_desc = desc.get("mesh", {"plate_mm": 10.0})
    if "obj" in mesh_desc:
        mesh = load_obj(base / mesh_desc["obj"])
    else:
        side = float(mesh_desc.get("plate_mm", 10.0))
        mesh = make_plate(side, side)
    mat_desc = desc.get("material", {})
    tex = mat_desc.get("texture_normals")
    material = Material(
        albedo=float(mat_desc.get("albedo", 0.8)),
        texture_normals=imaging.load_normal_map(base / tex) if tex else None,
        bump_strength=float(mat_desc.get("bump_strength", 1.0)),
        specular_strength=float(mat_desc.get("specular_strength", 0.0)),
        specular_exponent=float(mat_desc.get("specular_exponent", 16.0)))
    placements = []
    for p in desc.get("placements", []):
        hm = imaging.load_height_map(base / p["height_map"])
        placements.append(DefectPlacement(
            instance=defects.instance_from_height_map(hm),
            uv_center=tuple(p["uv_center"]),
            uv_scale=float(p["uv_scale"]),
            displacement_scale=float(p.get("displacement_scale", 1.0)),
            defect_id=int(p.get("defect_id", 1))))
    lights = tuple(DirectionalLight(tuple(l["direction"]),
                                           float(l.get("intensity", 1.0)))
                   for l in desc.get("lights", [{"direction": [0.0, 0.0, 1.0]}]))
    cam_desc = desc.get("camera", {})
    camera = Camera(
        position=tuple(cam_desc.get("position", (0.0, 0.0, 50.0))),
        look_at=tuple(cam_desc.get("look_at", (0.0, 0.0, 0.0))),
        up=tuple(cam_desc.get("up", (0.0, 1.0, 0.0))),
        vfov_degrees=float(cam_desc.get("vfov_degrees", 20.0)),
        width=int(cam_desc.get("width", 256)),
        height=int(cam_desc.get("height", 256)))
    return Scene(mesh=mesh, material=material,
                        placements=tuple(placements), lights=lights,
                        camera=camera,
                        background=float(desc.get("background", 0.0)))


def _cmd_render(args):
    desc = json.loads(Path(args.scene).read_text())
    scene = _scene_from_json(desc, Path(args.scene).parent)
    out = render_scene(scene)
    imaging.save_image(out.image, args.out_image)
    imaging.save_mask_map(out.mask, args.out_mask)
    outputs = [args.out_image, args.out_mask]
    if args.out_meta:
        Path(args.out_meta).write_text(json.dumps(out.metadata, sort_keys=True))
        outputs.append(args.out_meta)
    _emit(args, {"outputs": outputs, "scene_hash": out.metadata["scene_hash"]})
    return EXIT_OK


def _cmd_dataset(args):
    cfg_dict = _load_config(args.config) if args.config else {}
    cfg = _randomization_config(cfg_dict, seed_override=args.seed)
    if args.n is not None:
        cfg = ds.RandomizationConfig(**{
            **{f: getattr(cfg, f) for f in cfg.__dataclass_fields__},
            "n_images": args.n})
    manifest = ds.generate_dataset(cfg, args.out)
    _emit(args, {"outputs": [str(Path(args.out) / "manifest.jsonl")],
                 "records": len(manifest), "config_hash": manifest.config_hash})
    return EXIT_OK


def _cmd_split(args):
    manifest = ds.load_manifest(args.manifest)
    tagged = ds.split(manifest, args.test_frac, args.seed or 0)
    out = args.out or args.manifest
    ds.save_manifest(tagged, out)
    _emit(args, {"outputs": [out],
                 "test": sum(r["split"] == "test" for r in tagged.records),
                 "train": sum(r["split"] == "train" for r in tagged.records)})
    return EXIT_OK


def _cmd_validate_config(args):
    _load_config(args.config)
    _log(f"{args.config} is valid")
    _emit(args, {"outputs": [], "valid": True})
    return EXIT_OK


def _demo_texture(out_dir: Path, master_seed: int):
    """Synthesize a stand-in 'scanned' texture and run the scan-solve and
    synthesis stages on it."""
    from .noise import fbm

    size = 96
    y, x = np.mgrid[0:size, 0:size].astype(float)
    spec = NoiseSpec(octaves=3, base_frequency=0.06, seed=master_seed)
    z = 1.5 * fbm(x, y, spec)
    gy, gx = np.gradient(z)
    n = np.dstack([-gx, -gy, np.ones_like(z)])
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    scanned = imaging.NormalMap(n)

    # scan-solve round trip: image the surface under the octagon rig,
    # then reconstruct it
    rig = stereo.octagon_rig(45.0, 8)
    stack = stereo.render_lambertian(scanned.normals,
                                     np.full((size, size), 0.8), rig)
    recovered, _ = stereo.solve_normals(stack, stereo.SolverConfig())
    imaging.save_normal_map(recovered, out_dir / "scan_normals.png")

    dictionary = texture.build_dictionary([recovered], patch_size=13, stride=6)
    seed_crop = imaging.NormalMap(scanned.normals[16:64, 16:64],
                                  scanned.valid[16:64, 16:64])
    cfg = texture.SynthesisConfig(target_width=160, target_height=160,
                                  top_k=3, rng_seed=master_seed)
    tex, log = texture.synthesize(texture.SeedPatch(seed_crop), dictionary, cfg)
    imaging.save_normal_map(tex, out_dir / "texture.png")
    (out_dir / "pastes.json").write_text(json.dumps(log))
    return tex


def _cmd_demo(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    master_seed = args.seed if args.seed is not None else 0
    _log("demo: scan-solve + texture synthesis")
    tex = _demo_texture(out_dir, master_seed)
    _log("demo: defect generation + rendering + dataset assembly")
    cfg = ds.RandomizationConfig(
        n_images=args.n, master_seed=master_seed,
        defect_param_ranges=defects.DefectParamRanges(resolution=12.0),
        texture_seeds=(tex,))
    manifest = ds.generate_dataset(cfg, out_dir / "dataset")
    tagged = ds.split(manifest, 0.2, master_seed)
    ds.save_manifest(tagged, out_dir / "dataset" / "manifest.jsonl")
    outputs = [str(out_dir / "scan_normals.png"), str(out_dir / "texture.png"),
               str(out_dir / "pastes.json"),
               str(out_dir / "dataset" / "manifest.jsonl")]
    outputs += [str(out_dir / "dataset" / r["image"]) for r in manifest.records]
    _emit(args, {"outputs": outputs, "records": len(manifest),
                 "config_hash": manifest.config_hash})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="castsim",
        description="Synthetic labeled images of textured parts with surface defects")
    parser.add_argument("--print-schema", action="store_true",
                        help="print the pipeline config JSON schema and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, seed=True):
        p.add_argument("--json", action="store_true",
                       help="machine-readable summary on stdout")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the config master seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap (reserved; stages currently run "
                            "single-threaded)")

    p = sub.add_parser("solve-normals", help="photometric stereo on an image stack")
    p.add_argument("--stack", required=True,
                   help="JSON manifest with image paths and light directions")
    p.add_argument("--rig", help="override lights, e.g. octagon:45:8")
    p.add_argument("--shadow-threshold", type=float, default=0.02)
    p.add_argument("--highlight-threshold", type=float, default=0.98)
    p.add_argument("--min-valid-lights", type=int, default=3)
    p.add_argument("--out-normals", required=True)
    p.add_argument("--out-albedo")
    common(p)
    p.set_defaults(func=_cmd_solve_normals)

    p = sub.add_parser("build-dict", help="harvest a patch dictionary from normal maps")
    p.add_argument("--maps", nargs="+", required=True)
    p.add_argument("--patch-size", type=int, default=17)
    p.add_argument("--stride", type=int, default=8)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_build_dict)

    p = sub.add_parser("synth-texture", help="grow a texture from a seed patch")
    p.add_argument("--seed", required=True, metavar="SEED_PNG",
                   help="seed patch normal map")
    p.add_argument("--dict", required=True)
    p.add_argument("--size", default="256x256")
    p.add_argument("--rng", type=int, default=0)
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="write the paste log JSON here")
    common(p, seed=False)
    p.set_defaults(func=_cmd_synth_texture)

    p = sub.add_parser("gen-defect", help="generate one hole-defect height map")
    p.add_argument("--radius", type=float, default=0.8)
    p.add_argument("--depth", type=float, default=0.4)
    p.add_argument("--edge-amp", type=float, default=0.3)
    p.add_argument("--floor-amp", type=float, default=0.2)
    p.add_argument("--edge-kind", choices=["fractal", "turbulence"],
                   default="fractal")
    p.add_argument("--floor-kind", choices=["fractal", "turbulence"],
                   default="turbulence")
    p.add_argument("--profile-power", type=float, default=1.0)
    p.add_argument("--resolution", type=float, default=50.0)
    p.add_argument("--out", required=True)
    p.add_argument("--mask")
    common(p)
    p.set_defaults(func=_cmd_gen_defect)
    # gen-defect interprets --seed as the defect seed, default 0
    p.set_defaults(seed=0)

    p = sub.add_parser("render", help="render a scene JSON to image + mask")
    p.add_argument("--scene", required=True)
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-meta")
    common(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("dataset", help="generate a randomized labeled dataset")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    common(p)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("split", help="tag manifest records train/test")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--out", help="write here instead of in place")
    common(p)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("demo", help="run the whole pipeline on generated sample data")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=5)
    common(p)
    p.set_defaults(func=_cmd_demo)

    p = sub.add_parser("validate-config", help="check a pipeline config JSON")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=_cmd_validate_config)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.print_schema:
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except (PipelineError, FileNotFoundError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_STAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
