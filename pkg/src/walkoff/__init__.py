"""Propagation of walk-off-distorted two-photon spatial correlations.

The package computes the joint position distribution of a photon pair by two
independent routes (Wigner phase-space shear and angular-spectrum propagation),
a closed-form width model, and the section-fitting analysis used on measured
coincidence histograms.
"""

from .analysis import (
    CutKind,
    SectionFit,
    SectionProfile,
    extract_section,
    fit_sinc2,
    postselect_profile,
    profile_sup_difference,
    width_map,
)
from .crystal import CrystalSpec, WalkoffParams, derive_walkoff_params
from .grids import Axis, ComplexGrid2D, CoordinateFrame, JointIntensity, fourier_pair, rotate_frame
from .heuristic import HeuristicParams, anti_correlation_width, asymmetry_map
from .io import read_histogram, write_histogram
from .spectrum import PropagationSetting, joint_intensity, propagate_angular_spectrum
from .state import (
    AnsatzParams,
    MomentumStateParams,
    SampledMomentumState,
    build_ansatz_wavefunction,
    build_momentum_wavefunction,
)
from .wigner import (
    ShearSetting,
    compute_wigner,
    momentum_marginal,
    position_marginal,
    propagate_wigner,
    sheared_position_marginals,
)

__version__ = "0.1.0"
