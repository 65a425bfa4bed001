"""Trajectory-guided wavelet fields.

Pilot-wave trajectories for analytic and grid wavefunctions, wave fields
built from retarded/advanced cone crossings of source worldlines, and
Cauchy-surface reconstruction of those fields.
"""

__version__ = "0.1.0"

from ._backend import backend_name  # noqa: F401
from .bohmian import (  # noqa: F401
    IntegratorConfig,
    TrajectoryEnsemble,
    integrate_ensemble,
    integrate_many_body,
    integrate_trajectory,
    sample_born,
)
from .cauchy import (  # noqa: F401
    CauchyData,
    kirchhoff_reconstruct,
    record_cauchy_data,
)
from .errors import (  # noqa: F401
    ConfigError,
    DomainError,
    GeometryError,
    GuidedWavesError,
    NodeError,
    StencilError,
    SubluminalityError,
    SuperluminalRegimeError,
    WorldlineRangeError,
    WorldlineTooShortError,
)
from .fieldsynth import (  # noqa: F401
    AtomicOrbitParams,
    FieldGrid,
    atomic_series_field,
    evaluate_field_points,
    lw_field,
    lw_field_batch,
    moving_wavelet_approx,
    near_field_expansion,
    spherical_bessel_j,
    spherical_harmonic,
    stationary_wavelet,
    synth_field_map,
)
from .greens import (  # noqa: F401
    EPS_RHO_DEFAULT,
    GreenKind,
    green_weight,
    lightcone_intersect,
    lightcone_intersect_batch,
)
from .spacetime import (  # noqa: F401
    ConstantFrequencyLaw,
    SourceLaw,
    TabulatedLaw,
    Worldline,
    boost_matrix,
    minkowski_dot,
)
from .verify import (  # noqa: F401
    ResidualReport,
    born_equivariance,
    dalembert_report,
    dalembert_residual,
    guidance_consistency,
    newton_residual,
    phase_gradient_check,
)
from .wavefunction import (  # noqa: F401
    GaussianSuperposition,
    GridWavefunction1D,
    GridWavefunction2D,
    PlaneWave1D,
    double_slit_model,
    effective_mass,
    polar_decompose,
    probability_current,
    quantum_potential,
)
