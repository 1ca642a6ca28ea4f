"""Dataset demo: randomized scenes, annotations, and a train/test split.

Scene parameters (defect shapes, placements, camera orbit, key light) are
drawn per image from a seeded RNG, so image i is reproducible in isolation.
The manifest is one JSON record per line with boxes, full defect parameters,
and the scene hash; split() tags each record train or test.

Run:  python demos/05_dataset_assembly.py [out_dir]
"""

import json
import sys
import time
from pathlib import Path

from castsim import (
    DefectParamRanges,
    RandomizationConfig,
    generate_dataset,
    save_manifest,
    split,
)


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output/dataset")

    cfg = RandomizationConfig(
        n_images=8,
        master_seed=2024,
        defects_per_image=(1, 3),
        defect_param_ranges=DefectParamRanges(
            radius_mm=(0.4, 1.0), depth_mm=(0.2, 0.5), resolution=12.0),
        image_width=160, image_height=120)

    t0 = time.perf_counter()
    manifest = generate_dataset(cfg, out_dir)
    print(f"generated {len(manifest)} images in "
          f"{time.perf_counter() - t0:.1f}s (config {manifest.config_hash[:12]})")

    for rec in manifest.records[:3]:
        boxes = [b["box"] for b in rec["boxes"]]
        print(f"  {rec['image']}: {len(rec['defects'])} defects, boxes {boxes}")

    tagged = split(manifest, test_fraction=0.25, seed=0)
    save_manifest(tagged, out_dir / "manifest.jsonl")
    counts = {}
    for rec in tagged.records:
        counts[rec["split"]] = counts.get(rec["split"], 0) + 1
    print(f"split: {counts}")

    first = json.loads((out_dir / "manifest.jsonl").read_text().splitlines()[0])
    print(f"manifest record keys: {sorted(first)}")
    print(f"wrote dataset to {out_dir}")


if __name__ == "__main__":
    main()
