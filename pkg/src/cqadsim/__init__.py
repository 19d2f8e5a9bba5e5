"""Desk-scale simulator and analysis toolkit for dispersive qubit-phonon
(circuit quantum acoustodynamics) experiments: truncated-Fock-space linear
algebra, Lindblad dynamics under pulse schedules, the experiment protocols
(swap-based Fock preparation, number-resolved spectroscopy, Ramsey/echo
parity, Wigner tomography), a Schrieffer-Wolff analytic track, and the
spectral/tomographic fitting pipeline.
"""

from .device import (
    SystemParams,
    chi_analytic,
    delta_prime,
    dispersive_hamiltonian,
    full_jc_hamiltonian,
    load_params,
    paper_default_params,
    purcell_rate,
)
from .dynamics import (
    NoiseModel,
    Pulse,
    Schedule,
    Segment,
    displacement_drive,
    lindblad_evolve,
    swap_gate,
    vacuum_rabi_chevron,
)
from .exceptions import (
    CqadError,
    DispersiveRegimeError,
    FitError,
    NumericError,
    TruncationError,
    ValidationError,
)
from .hilbert import (
    DensityMatrix,
    HilbertConfig,
    Ket,
    OperatorMatrix,
    annihilation,
    coherent_state,
    displacement_operator,
    expectation,
    fock_state,
    parity_operator,
    partial_trace,
    qubit_operator,
    tensor,
)
from .sequences import (
    ExperimentSpec,
    ParityResult,
    StatePrep,
    echo_parity,
    fock_preparation,
    four_phase_average,
    interaction_time_offset_scan,
    qubit_spectroscopy,
    ramsey_parity,
    wigner_scan,
)
from .swtheory import (
    RamseyPrediction,
    SWExpansion,
    chi_numeric,
    ramsey_sigma_z_analytic,
    sw_rotating_hamiltonian,
    sw_transform_state,
)

__version__ = "0.1.0"
