"""castsim: synthetic labeled images of textured parts with surface defects.

Pipeline stages: photometric-stereo texture capture, exemplar-inpainting
texture synthesis, noise-based defect height maps, bump/displacement
rendering with pixel-exact segmentation masks, and dataset assembly.
"""

from .dataset import (
    CameraPoseRanges,
    DatasetManifest,
    LightRanges,
    RandomizationConfig,
    generate_dataset,
    load_manifest,
    randomize_scene,
    save_manifest,
    split,
)
from .defects import (
    DefectInstance,
    DefectParamRanges,
    DefectParams,
    generate_defect,
    sample_params,
)
from .imaging import (
    AlbedoMap,
    GrayImage,
    HeightMap,
    MaskMap,
    NormalMap,
    decode_normal_map,
    encode_normal_map,
    load_height_map,
    load_image,
    load_normal_map,
    save_height_map,
    save_image,
    save_normal_map,
)
from .noise import NoiseSpec, fbm, gradient_noise, turbulence
from .render import (
    Camera,
    DefectPlacement,
    DirectionalLight,
    Material,
    Mesh,
    RenderOutput,
    Scene,
    displace_mesh,
    make_plate,
    mask_bounding_boxes,
    render,
    render_stack_for_stereo,
)
from .stereo import (
    ImageStack,
    LightRig,
    SolverConfig,
    integrability_report,
    octagon_rig,
    render_lambertian,
    solve_normals,
)
from .texture import (
    PatchDictionary,
    SeedPatch,
    SynthesisConfig,
    build_dictionary,
    nearest_patches,
    replay_paste_log,
    synthesize,
)

__version__ = "0.1.0"
