"""Cross-domain stochastically fully connected CRF reconstruction for
compressive-sensing MRI."""

__version__ = "0.1.0"

from .energy import EnergyBreakdown, EnergyParams, total_energy, total_gradient
from .errors import (
    CDSFCRFError,
    DimensionError,
    DivergenceError,
    FormatError,
    ParameterError,
)
from .graph import CliqueSamplingConfig, CliqueSet, expected_degree, sample_cliques
from .metrics import QualityReport, evaluate, psnr, rel_l2, ssim
from .optimizer import ReconConfig, ReconResult, grid_tune, reconstruct
from .phantom import PhantomSpec, default_prostate_spec, generate_phantom
from .transform import (
    apply_mask,
    dft2_forward,
    dft2_inverse,
    lines_for_ratio,
    radial_mask,
    sampling_ratio,
    zero_filled_recon,
)
