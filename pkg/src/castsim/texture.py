"""Dictionary-based exemplar texture synthesis for normal maps.

A dictionary of fixed-size encoded patches is harvested from scanned normal
maps. Synthesis grows outward from a seed patch: at each step the unfilled
pixel on the fill front whose surrounding window overlaps the most filled
content is chosen, the dictionary patch best matching that overlap is pasted
into the unfilled positions only (no blending), and the front advances.

Patch distances are computed in the encoded 8-bit space with integer
accumulation, so a brute-force scan and any vectorized path agree bit for
bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    EmptyDictionary,
    EmptyInput,
    MapTooSmall,
    PipelineError,
    SeedLargerThanTarget,
)
from .imaging import NormalMap, decode_normal_map, encode_normal_map


@dataclass(frozen=True)
class PatchDictionary:
    """Indexed collection of encoded square normal-map patches."""

    patch_size: int
    patches: np.ndarray  # (N, p, p, 3) uint8
    source_ids: tuple  # (map index, y, x) origin per patch

    def __post_init__(self):
        p = self.patch_size
        if p < 3 or p % 2 == 0:
            raise ValueError("patch_size must be an odd integer >= 3")
        patches = np.asarray(self.patches, dtype=np.uint8)
        if patches.ndim != 4 or patches.shape[1:] != (p, p, 3):
            raise ValueError(f"patches must be (N, {p}, {p}, 3)")
        if patches.shape[0] == 0:
            raise EmptyDictionary("dictionary has no patches")
        if len(self.source_ids) != patches.shape[0]:
            raise ValueError("source_ids length must match patch count")
        pp = np.array(patches)
        pp.flags.writeable = False
        object.__setattr__(self, "patches", pp)
        object.__setattr__(self, "source_ids", tuple(self.source_ids))

    def __len__(self) -> int:
        return self.patches.shape[0]


@dataclass(frozen=True)
class SeedPatch:
    """Starting texture region; need not be a dictionary member."""

    patch: NormalMap


@dataclass(frozen=True)
class SynthesisConfig:
    target_width: int = 256
    target_height: int = 256
    overlap: int = 8  # informational: actual overlap follows the fill front
    top_k: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.target_width < 1 or self.target_height < 1:
            raise ValueError("target dimensions must be positive")
        if self.overlap < 1:
            raise ValueError("overlap must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def build_dictionary(normal_maps, patch_size: int, stride: int) -> PatchDictionary:
    """Harvest every fully-valid patch at stride offsets from the input maps."""
    if not normal_maps:
        raise EmptyInput("no normal maps given")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    patches = []
    sources = []
    for mi, nm in enumerate(normal_maps):
        if nm.height < patch_size or nm.width < patch_size:
            raise MapTooSmall(
                f"map {mi} is {nm.width}x{nm.height}, below patch size {patch_size}")
        enc = encode_normal_map(nm)
        for y in range(0, nm.height - patch_size + 1, stride):
            for x in range(0, nm.width - patch_size + 1, stride):
                if nm.valid[y:y + patch_size, x:x + patch_size].all():
                    patches.append(enc[y:y + patch_size, x:x + patch_size])
                    sources.append((mi, y, x))
    if not patches:
        raise EmptyInput("all candidate patches touch invalid pixels")
    return PatchDictionary(patch_size, np.stack(patches), tuple(sources))


def patch_distances(query: np.ndarray, mask: np.ndarray,
                    dictionary: PatchDictionary) -> np.ndarray:
    """Mean squared distance of every dictionary patch to a partial query.

    query: (p, p, 3) uint8 encoded patch; mask: (p, p) bool validity. The
    distance is the integer sum of squared channel differences over valid
    pixels, divided by (valid pixel count * 255^2); integer accumulation
    makes the result independent of summation order.
    """
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("query mask has no valid pixels")
    q = np.asarray(query, dtype=np.int64)[mask]  # (count, 3)
    d = dictionary.patches.astype(np.int64)[:, mask, :]
    diff = d - q[None]
    sums = np.einsum("npc,npc->n", diff, diff)
    return sums / (count * 255.0 * 255.0)


def nearest_patches(query: np.ndarray, mask: np.ndarray,
                    dictionary: PatchDictionary, k: int):
    """k best (index, distance) pairs, ties broken by ascending index."""
    if len(dictionary) == 0:
        raise EmptyDictionary("dictionary has no patches")
    dist = patch_distances(query, mask, dictionary)
    order = np.argsort(dist, kind="stable")[:k]
    return [(int(i), float(dist[i])) for i in order]


def _box_count(mask: np.ndarray, half: int) -> np.ndarray:
    """Per-pixel count of True values in the (2*half+1)^2 window, cropped at
    the borders (zero padding)."""
    p = 2 * half + 1
    padded = np.zeros((mask.shape[0] + p, mask.shape[1] + p), dtype=np.int32)
    padded[half + 1:half + 1 + mask.shape[0],
           half + 1:half + 1 + mask.shape[1]] = mask
    ii = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = mask.shape
    return (ii[p:p + h, p:p + w] - ii[:h, p:p + w]
            - ii[p:p + h, :w] + ii[:h, :w])


def _local_front(filled: np.ndarray, out: np.ndarray, y0, y1, x0, x1) -> None:
    """Recompute front = unfilled & 8-adjacent-to-filled on a crop of out."""
    H, W = filled.shape
    ey0, ey1 = max(0, y0 - 1), min(H, y1 + 1)
    ex0, ex1 = max(0, x0 - 1), min(W, x1 + 1)
    region = filled[ey0:ey1, ex0:ex1]
    pad = np.zeros((region.shape[0] + 2, region.shape[1] + 2), dtype=bool)
    pad[1:-1, 1:-1] = region
    dil = np.zeros_like(region)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            dil |= pad[dy:dy + region.shape[0], dx:dx + region.shape[1]]
    iy0, ix0 = y0 - ey0, x0 - ex0
    out[y0:y1, x0:x1] = (dil & ~region)[iy0:iy0 + (y1 - y0), ix0:ix0 + (x1 - x0)]


class _FillState:
    """Mutable synthesis canvas with incrementally maintained front and
    per-window filled counts."""

    def __init__(self, height, width, patch_size):
        self.p = patch_size
        self.half = patch_size // 2
        self.canvas = np.zeros((height, width, 3), dtype=np.uint8)
        self.filled = np.zeros((height, width), dtype=bool)
        self.filled_count = np.zeros((height, width), dtype=np.int32)
        self.front = np.zeros((height, width), dtype=bool)
        # bounding box of everything touched so far, for cheap argmax crops
        self.bbox = None

    def _grow_bbox(self, y0, y1, x0, x1):
        H, W = self.filled.shape
        y0, y1 = max(0, y0), min(H, y1)
        x0, x1 = max(0, x0), min(W, x1)
        if self.bbox is None:
            self.bbox = [y0, y1, x0, x1]
        else:
            b = self.bbox
            b[0], b[1] = min(b[0], y0), max(b[1], y1)
            b[2], b[3] = min(b[2], x0), max(b[3], x1)

    def fill(self, y0, x0, h, w, values) -> int:
        """Copy values into the unfilled positions of a region; returns the
        number of newly filled pixels."""
        region_new = ~self.filled[y0:y0 + h, x0:x0 + w]
        n_new = int(region_new.sum())
        if n_new == 0:
            return 0
        np.copyto(self.canvas[y0:y0 + h, x0:x0 + w], values, where=region_new[..., None])
        self.filled[y0:y0 + h, x0:x0 + w] = True

        # window counts change for centres within `half` of a new pixel
        H, W = self.filled.shape
        cy0, cy1 = max(0, y0 - self.half), min(H, y0 + h + self.half)
        cx0, cx1 = max(0, x0 - self.half), min(W, x0 + w + self.half)
        ny0, ny1 = max(0, cy0 - self.half), min(H, cy1 + self.half)
        nx0, nx1 = max(0, cx0 - self.half), min(W, cx1 + self.half)
        local = np.zeros((ny1 - ny0, nx1 - nx0), dtype=bool)
        local[y0 - ny0:y0 - ny0 + h, x0 - nx0:x0 - nx0 + w] = region_new
        counts = _box_count(local, self.half)
        self.filled_count[cy0:cy1, cx0:cx1] += counts[cy0 - ny0:cy1 - ny0,
                                                      cx0 - nx0:cx1 - nx0]
        _local_front(self.filled, self.front, cy0, cy1, cx0, cx1)
        self._grow_bbox(cy0 - 1, cy1 + 1, cx0 - 1, cx1 + 1)
        return n_new

    def pick_center(self):
        """Front pixel with the highest filled count; ties resolve to the
        smallest row-major position."""
        y0, y1, x0, x1 = self.bbox
        crop_front = self.front[y0:y1, x0:x1]
        scores = np.where(crop_front, self.filled_count[y0:y1, x0:x1], -1)
        flat = int(np.argmax(scores))
        if scores.flat[flat] < 0:
            return None
        cy, cx = divmod(flat, x1 - x0)
        return y0 + cy, x0 + cx

    def window_at(self, cy, cx):
        """Patch window centred at (cy, cx), shifted to stay inside the image."""
        H, W = self.filled.shape
        y0 = min(max(0, cy - self.half), H - self.p)
        x0 = min(max(0, cx - self.half), W - self.p)
        return y0, x0


def synthesize(seed: SeedPatch, dictionary: PatchDictionary,
               cfg: SynthesisConfig):
    """Grow a normal map of the target size from a seed patch.

    Returns (NormalMap, paste_log). The log records the seed placement and
    every (window, patch index) paste; replay_paste_log reproduces the
    output bit for bit without re-running the search.
    """
    if len(dictionary) == 0:
        raise EmptyDictionary("dictionary has no patches")
    p = dictionary.patch_size
    H, W = cfg.target_height, cfg.target_width
    sp = seed.patch
    if sp.height > H or sp.width > W:
        raise SeedLargerThanTarget(
            f"seed {sp.width}x{sp.height} exceeds target {W}x{H}")
    if H < p or W < p:
        raise MapTooSmall(f"target must be at least {p}x{p}")

    state = _FillState(H, W, p)
    sy, sx = (H - sp.height) // 2, (W - sp.width) // 2
    seed_enc = encode_normal_map(sp)
    remaining = H * W - state.fill(sy, sx, sp.height, sp.width, seed_enc)

    rng = np.random.default_rng(cfg.rng_seed)
    dict_int = dictionary.patches.astype(np.int64)
    pastes = []
    while remaining > 0:
        center = state.pick_center()
        if center is None:
            raise PipelineError("fill front vanished before coverage")
        y0, x0 = state.window_at(*center)
        window_mask = state.filled[y0:y0 + p, x0:x0 + p]
        query = state.canvas[y0:y0 + p, x0:x0 + p]
        dist = _masked_distances(query, window_mask, dict_int)
        k = min(cfg.top_k, len(dictionary))
        best = np.argsort(dist, kind="stable")[:k]
        choice = int(best[rng.integers(k)])
        n_new = state.fill(y0, x0, p, p, dictionary.patches[choice])
        remaining -= n_new
        pastes.append({"y": int(y0), "x": int(x0), "patch": choice})

    log = {
        "seed_pos": [int(sy), int(sx)],
        "seed_size": [int(sp.height), int(sp.width)],
        "patch_size": int(p),
        "target": [int(H), int(W)],
        "pastes": pastes,
    }
    return decode_normal_map(state.canvas), log


def _masked_distances(query, mask, dict_int):
    count = int(mask.sum())
    q = query.astype(np.int64)[mask]
    d = dict_int[:, mask, :]
    diff = d - q[None]
    sums = np.einsum("npc,npc->n", diff, diff)
    return sums / (count * 255.0 * 255.0)


def replay_paste_log(seed: SeedPatch, dictionary: PatchDictionary, log) -> NormalMap:
    """Re-apply a paste log; the output must equal the original synthesis."""
    H, W = log["target"]
    p = log["patch_size"]
    canvas = np.zeros((H, W, 3), dtype=np.uint8)
    filled = np.zeros((H, W), dtype=bool)
    sy, sx = log["seed_pos"]
    sh, sw = log["seed_size"]
    canvas[sy:sy + sh, sx:sx + sw] = encode_normal_map(seed.patch)
    filled[sy:sy + sh, sx:sx + sw] = True
    for paste in log["pastes"]:
        y, x, idx = paste["y"], paste["x"], paste["patch"]
        new = ~filled[y:y + p, x:x + p]
        np.copyto(canvas[y:y + p, x:x + p], dictionary.patches[idx],
                  where=new[..., None])
        filled[y:y + p, x:x + p] = True
    if not filled.all():
        raise PipelineError("paste log does not cover the target")
    return decode_normal_map(canvas)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_dictionary(dictionary: PatchDictionary, directory) -> None:
    """Write one encoded PNG per patch plus an index JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(len(dictionary)):
        name = f"patch_{i:05d}.png"
        Image.fromarray(dictionary.patches[i], mode="RGB").save(directory / name)
        names.append(name)
    index = {
        "patch_size": dictionary.patch_size,
        "patches": names,
        "sources": [list(s) for s in dictionary.source_ids],
    }
    (directory / "index.json").write_text(json.dumps(index, indent=1))


def load_dictionary(directory) -> PatchDictionary:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    patches = np.stack([
        np.asarray(Image.open(directory / name).convert("RGB"))
        for name in index["patches"]])
    sources = tuple(tuple(s) for s in index["sources"])
    return PatchDictionary(index["patch_size"], patches, sources)
