"""Control-curve engine, schematic face renderer and dataset pipeline for
humanoid facial-expression work."""

from .backend import get_backend, set_backend, using_numba
from .controls import (
    ControlChannel,
    ControlRegistry,
    clamp,
    neutral_vector,
    registry_default,
)
from .curves import Keyframe, Track, eval_bezier_param, eval_linear, eval_step, eval_track, solve_bezier_time
from .clips import AnimationClip, load_clip, make_synthetic_clips, sample_clip, save_clip
from .render import FaceGeometry, Frame, render, render_batch
from .ssim import SsimParams, dedup, ssim
from .dataset import BuildConfig, build, histograms, load_manifest, stats, verify
from .evaluation import EvalReport, compare, score

__version__ = "0.1.0"
