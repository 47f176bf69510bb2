"""Coherent scattering from a charged quantum dot in a low-Q micropillar.

Energies are in ueV (FWHM for rates) and times in ns throughout.
"""

__version__ = "0.1.0"

from .ensemble import (  # noqa: E402
    JitterSpec,
    PhaseModel,
    ScanGrid,
    SpinEnsemble,
    averaged_counts,
    averaged_counts_mc,
    calibrate_jitter,
    phase_scan,
    rs_lineshape,
    voigt_fwhm,
)
from .estimation import (  # noqa: E402
    FitResult,
    GammaRatioTable,
    LifetimeDataset,
    PhaseDataset,
    fit_coupling,
    fit_lifetime_scale,
    residuals,
)
from .polarization import (  # noqa: E402
    JonesVector,
    PhaseResult,
    PolarizationCounts,
    counts_from_jones,
    phase_from_counts,
    rotation_angle,
    scatter_linear_v,
)
from .qed import (  # noqa: E402
    HBAR_UEV_NS,
    CavitySpec,
    DipoleSpec,
    beta_factor,
    cold_reflection,
    coupled_reflection,
    coupling_from_rate,
    lifetime_from_linewidth,
    linewidth_from_lifetime,
    purcell_rate,
    solid_angle_fraction,
)
