"""Line-based metrics, forward-splat interpolation and training-triplet mining
for traditional 2D animation frames."""
import os

import numba

if "NUMBA_THREADING_LAYER" not in os.environ:
    # omp is thread-safe and avoids probing an outdated TBB
    numba.config.THREADING_LAYER = "omp"

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CelforgeError, EmptySketchError, FitError, FormatError, InvalidInputError, InvalidParameterError,
    NoValidPixelsError,
)
from .imgproc import gaussian_blur, morph_open, read_png, rgb_to_lab, to_grayscale, write_png  # noqa: E402
from .linework import SketchParams, chamfer, edt, extract_sketch, nedt  # noqa: E402
from .warp import backward_warp, halfway_guess, infilled_warp, occlusion_mask, softmax_splat, z_metric  # noqa: E402
from .flo import read_flo, write_flo  # noqa: E402
from .mining import (  # noqa: E402
    DedupModel, PanParams, TripletFlows, TripletRecord, detect_pan, dedup_features, fit_dedup, mine,
    naive_ssim_filter, restricted_set, rrld,
)
from .evaluation import aggregate, chamfer_eval, psnr, ssim  # noqa: E402
