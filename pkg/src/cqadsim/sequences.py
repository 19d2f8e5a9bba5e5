"""Experiment protocols: state preparation, spectroscopy, parity, Wigner scans.

Pulses in the parity sequences are instantaneous rotations; the phase of the
final pi/2 pulse is calibrated numerically against a vacuum reference run
(four phase offsets, cosine extraction), exactly one calibration per
(sequence variant, detuning, interaction time, noise) operating point.
Parity values are reported normalized by the vacuum fringe contrast; the raw
qubit expectation is kept alongside.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm as _expm

from .analysis import SpectrumTrace, decay_fit
from .device import TWO_PI, SystemParams, chi_analytic, delta_prime
from .dynamics import (
    NoiseModel,
    Pulse,
    Segment,
    collapse_operators,
    displacement_drive,
    evolve_segments,
    liouvillian,
)
from .exceptions import NumericError, TruncationError, ValidationError
from .hilbert import (
    DensityMatrix,
    HilbertConfig,
    Ket,
    annihilation,
    coherent_amplitudes,
    displacement_operator,
    fock_state,
    qubit_operator,
    qubit_projector,
    reduced_mode_matrix,
)
from .swtheory import echo_sigma_z_analytic

__all__ = [
    "StatePrep",
    "ExperimentSpec",
    "ParityResult",
    "EXPERIMENT_KINDS",
    "prepare_state",
    "fock_preparation",
    "qubit_spectroscopy",
    "spectroscopy_peak_hints",
    "ramsey_parity",
    "echo_parity",
    "four_phase_average",
    "wigner_scan",
    "default_ramsey_time",
    "echo_offset_zero_time",
    "analytic_echo_offset",
    "interaction_time_offset_scan",
    "OffsetScan",
    "coherence_protocols",
    "FOUR_PHASES",
]

FOUR_PHASES = (0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0)


def _ordered_map(fn, items, jobs: int = 1) -> list:
    """Map preserving input order; optional thread pool over sweep points."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))

EXPERIMENT_KINDS = (
    "spectroscopy",
    "ramsey_parity",
    "echo_parity",
    "wigner",
    "fock_prep_check",
    "t1",
    "t2_ramsey",
    "rabi_chevron",
    "chi_scan",
)

_PREP_TARGETS = ("vacuum", "fock", "coherent", "superposition_01", "custom")
_PREP_METHODS = ("ideal_injection", "swap_sequence", "displacement_drive")


@dataclass(frozen=True)
class StatePrep:
    target: str = "vacuum"
    m: int = 0
    beta: complex = 0j
    method: str = "ideal_injection"
    ket: Ket | None = None

    def __post_init__(self):
        if self.target not in _PREP_TARGETS:
            raise ValidationError(f"unknown prep target {self.target!r}")
        if self.method not in _PREP_METHODS:
            raise ValidationError(f"unknown prep method {self.method!r}")
        if self.target == "fock" and self.method == "swap_sequence" and self.m > 3:
            raise ValidationError("swap-sequence preparation is limited to M <= 3")
        if self.target == "custom" and self.ket is None:
            raise ValidationError("custom prep requires a ket")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    preparation: StatePrep = field(default_factory=StatePrep)
    sweep: Mapping[str, object] = field(default_factory=dict)
    repetitions: int = 1
    label: str = ""

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValidationError(
                f"unknown experiment kind {self.kind!r}; expected one of {EXPERIMENT_KINDS}"
            )
        object.__setattr__(self, "sweep", dict(self.sweep))


@dataclass(frozen=True)
class ParityResult:
    """Calibrated parity estimate from one qubit interferometry sequence.

    ``value`` is the contrast-normalized estimate (raw - offset)/contrast
    against the vacuum reference; ``raw_sigma_z`` is the bare expectation.
    Single-phase estimates at finite g/Delta can overshoot |1| by O(eps^2);
    four-phase averages at offset-zeroed times stay within 1e-3.
    """

    value: float
    raw_sigma_z: float
    interaction_time: float
    phases_used: tuple[float, ...]
    reference_contrast: float
    reference_offset: float

    def __post_init__(self):
        if abs(self.value) > 1.05:
            raise NumericError(f"parity estimate {self.value:.4f} far outside [-1, 1]")


# ---------------------------------------------------------------------------
# state preparation


def _rotation_matrix(config: HilbertConfig, theta: float, eta: float) -> np.ndarray:
    """Counterclockwise qubit rotation: |g> -> cos(eta/2)|g> + e^{i theta} sin(eta/2)|e>."""
    c, s = math.cos(eta / 2.0), math.sin(eta / 2.0)
    q = np.eye(config.qubit_levels, dtype=complex)
    q[0, 0] = c
    q[1, 1] = c
    q[1, 0] = np.exp(1j * theta) * s
    q[0, 1] = -np.exp(-1j * theta) * s
    m = q
    for d in config.phonon_dims:
        m = np.kron(m, np.eye(d))
    return m


def _apply_unitary(state, u: np.ndarray):
    if isinstance(state, Ket):
        return Ket(state.config, u @ state.amplitudes, normalized=False)
    return DensityMatrix(state.config, u @ state.matrix @ u.conj().T)


def _sigma_z_expectation(state) -> float:
    sz = qubit_operator(state.config, "sigma_z").matrix
    if isinstance(state, Ket):
        return float(np.real(state.amplitudes.conj() @ (sz @ state.amplitudes)))
    return float(np.real(np.trace(state.matrix @ sz)))


def fock_preparation(
    M: int,
    method: str,
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    pulse_duration: float = 50e-9,
):
    """Prepare M phonons: ideal injection or repeated pi-pulse + swap rounds.

    Swap k uses the resonant duration 1/(4 g sqrt(k)) for full transfer on
    the |e, k-1> <-> |g, k> transition.  ``pulse_duration`` = 0 makes the
    qubit pulses instantaneous.
    """
    if M > config.phonon_dims[0] - 2:
        raise TruncationError(f"M={M} needs phonon dim >= {M + 2}")
    if method == "ideal_injection" or M == 0:
        ket = fock_state(config, [M] + [0] * (config.n_modes - 1), 0)
        return ket if noise.is_trivial else ket.to_density()
    if method != "swap_sequence":
        raise ValidationError(f"Fock preparation does not support method {method!r}")
    state = fock_state(config, [0] * config.n_modes, 0)
    state = state if noise.is_trivial else state.to_density()
    g = params.mode_g(0)
    for k in range(1, M + 1):
        state = _excite_qubit(state, params, config, noise, math.pi, pulse_duration)
        swap_seg = Segment(duration=1.0 / (4.0 * g * math.sqrt(k)), detuning=0.0)
        state = evolve_segments(state, [swap_seg], params, config, noise)
    return state


def _excite_qubit(state, params, config, noise, angle, pulse_duration, theta=0.0):
    if pulse_duration <= 0:
        return _apply_unitary(state, _rotation_matrix(config, theta, angle))
    amp = angle / (TWO_PI * pulse_duration)
    seg = Segment(
        duration=pulse_duration,
        detuning=params.delta("rest"),
        qubit_drive=Pulse(shape="square", amplitude=amp, phase=theta),
    )
    return evolve_segments(state, [seg], params, config, noise)


def prepare_state(
    prep: StatePrep,
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    pulse_duration: float = 50e-9,
    drive_duration: float = 1e-6,
):
    """Produce the phonon state at the rest detuning with the qubit in |g>."""
    if prep.target == "vacuum":
        ket = fock_state(config, [0] * config.n_modes, 0)
        return ket if noise.is_trivial else ket.to_density()
    if prep.target == "fock":
        return fock_preparation(prep.m, prep.method, params, config, noise, pulse_duration)
    if prep.target == "coherent":
        if prep.method == "displacement_drive":
            amp = abs(prep.beta) / (math.pi * drive_duration)
            drive = displacement_drive(
                params, config, noise, amplitude=amp,
                phase=float(np.angle(prep.beta) + math.pi / 2.0), duration=drive_duration,
            )
            state = fock_state(config, [0] * config.n_modes, 0)
            return drive.apply(state if noise.is_trivial else state.to_density())
        from .hilbert import _truncation_guard

        _truncation_guard(config, 0, prep.beta)
        c = coherent_amplitudes(config.phonon_dims[0], prep.beta)
        return _inject_mode_state(c, config, noise)
    if prep.target == "superposition_01":
        if prep.method == "swap_sequence":
            state = fock_state(config, [0] * config.n_modes, 0)
            state = state if noise.is_trivial else state.to_density()
            state = _excite_qubit(state, params, config, noise, math.pi / 2.0, pulse_duration)
            g = params.mode_g(0)
            swap_seg = Segment(duration=1.0 / (4.0 * g), detuning=0.0)
            return evolve_segments(state, [swap_seg], params, config, noise)
        c = np.zeros(config.phonon_dims[0], dtype=complex)
        c[0] = c[1] = 1.0 / math.sqrt(2.0)
        return _inject_mode_state(c, config, noise)
    if prep.target == "custom":
        if prep.ket.config != config:
            raise ValidationError("custom ket config mismatch")
        return prep.ket if noise.is_trivial else prep.ket.to_density()
    raise ValidationError(f"unhandled prep target {prep.target!r}")


def _inject_mode_state(c: np.ndarray, config: HilbertConfig, noise: NoiseModel):
    v = c
    for d in config.phonon_dims[1:]:
        g0 = np.zeros(d, dtype=complex)
        g0[0] = 1.0
        v = np.kron(v, g0)
    full = np.zeros(config.dim, dtype=complex)
    full[: v.size] = v  # qubit |g> block (qubit index is slowest)
    ket = Ket(config, full)
    return ket if noise.is_trivial else ket.to_density()


# ---------------------------------------------------------------------------
# parity sequences


def default_ramsey_time(params: SystemParams, delta: float | None = None) -> float:
    """t0 = pi/|chi| with chi = 2 g^2/Delta at the Ramsey point (or given delta)."""
    d = params.delta("ramsey") if delta is None else delta
    chi = chi_analytic(params.g_lg00, d, params.alpha, form="approximate")
    return 1.0 / (2.0 * abs(chi))


def _run_parity_sequence(state, variant, theta, theta2, t, delta, params, config, noise,
                         ramp_time=0.0):
    rest = params.delta("rest")

    def seg(duration, det):
        if ramp_time > 0:
            return Segment(duration=duration, detuning=det, ramp="linear",
                           ramp_time=min(ramp_time, duration), ramp_from=rest)
        return Segment(duration=duration, detuning=det)

    state = _apply_unitary(state, _rotation_matrix(config, theta, math.pi / 2.0))
    if variant == "ramsey":
        state = evolve_segments(state, [seg(t, delta)], params, config, noise)
    elif variant == "echo":
        state = evolve_segments(state, [seg(t / 2.0, delta)], params, config, noise)
        state = _apply_unitary(state, _rotation_matrix(config, theta, math.pi))
        state = evolve_segments(state, [seg(t / 2.0, -delta)], params, config, noise)
    else:
        raise ValidationError(f"unknown parity variant {variant!r}")
    state = _apply_unitary(state, _rotation_matrix(config, theta2, math.pi / 2.0))
    return _sigma_z_expectation(state)


_CAL_LOCK = threading.Lock()
_CAL_CACHE: dict[tuple, tuple[float, float, float]] = {}


def _noise_key(noise: NoiseModel) -> tuple:
    return (noise.qubit_gamma1, noise.qubit_gamma_phi, noise.phonon_kappa1,
            noise.phonon_kappa_phi)


def _fringe_calibration(variant, t, delta, params, config, noise, ramp_time=0.0):
    """Vacuum-reference fringe: returns (phase, contrast, offset).

    Computed without any static qubit offset (an uncalibrated drift must not
    leak into the calibration), with four second-pulse phase offsets.
    """
    key = (
        variant, float(t), float(delta), config.dims, _noise_key(noise),
        params.g_lg00, params.lg10_offset, params.delta("rest"), ramp_time,
    )
    with _CAL_LOCK:
        if key in _CAL_CACHE:
            return _CAL_CACHE[key]
    cal_noise = noise.without_offset()
    vac = fock_state(config, [0] * config.n_modes, 0)
    state0 = vac if cal_noise.is_trivial else vac.to_density()
    vals = [
        _run_parity_sequence(state0, variant, 0.0, o, t, delta, params, config, cal_noise,
                             ramp_time)
        for o in FOUR_PHASES
    ]
    c = (vals[0] - vals[2]) / 2.0
    s = (vals[1] - vals[3]) / 2.0
    phase = math.atan2(s, c)
    contrast = math.hypot(c, s)
    offset = sum(vals) / 4.0
    if contrast < 1e-6:
        raise NumericError("vacuum reference fringe has no contrast; cannot calibrate")
    result = (phase, contrast, offset)
    with _CAL_LOCK:
        _CAL_CACHE[key] = result
    return result


def _parity_result(raw, t, phases, cal):
    phase, contrast, offset = cal
    return ParityResult(
        value=(raw - offset) / contrast,
        raw_sigma_z=raw,
        interaction_time=t,
        phases_used=tuple(phases),
        reference_contrast=contrast,
        reference_offset=offset,
    )


def ramsey_parity(
    prepared_state,
    t_interaction: float,
    theta: float,
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    delta: float | None = None,
    ramp_time: float = 0.0,
) -> ParityResult:
    """Single Ramsey parity estimate: pi/2 - dispersive interaction - pi/2."""
    if t_interaction <= 0:
        raise ValidationError("interaction time must be > 0")
    d = params.delta("ramsey") if delta is None else delta
    cal = _fringe_calibration("ramsey", t_interaction, d, params, config, noise, ramp_time)
    raw = _run_parity_sequence(
        prepared_state, "ramsey", theta, theta + cal[0], t_interaction, d,
        params, config, noise, ramp_time,
    )
    return _parity_result(raw, t_interaction, (theta,), cal)


def echo_parity(
    prepared_state,
    theta: float,
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    t_total: float | None = None,
    delta: float | None = None,
    ramp_time: float = 0.0,
) -> ParityResult:
    """Echo parity: two half interactions at +-Delta with a pi pulse between."""
    d = params.delta("ramsey") if delta is None else delta
    t = default_ramsey_time(params, d) if t_total is None else t_total
    if t <= 0:
        raise ValidationError("interaction time must be > 0")
    cal = _fringe_calibration("echo", t, d, params, config, noise, ramp_time)
    raw = _run_parity_sequence(
        prepared_state, "echo", theta, theta + cal[0], t, d, params, config, noise, ramp_time,
    )
    return _parity_result(raw, t, (theta,), cal)


def four_phase_average(
    prepared_state,
    variant: str = "echo",
    params: SystemParams | None = None,
    config: HilbertConfig | None = None,
    noise: NoiseModel | None = None,
    t_interaction: float | None = None,
    delta: float | None = None,
    phases: Sequence[float] = FOUR_PHASES,
    ramp_time: float = 0.0,
) -> ParityResult:
    """Average the chosen parity sequence over drive phases (default four)."""
    d = params.delta("ramsey") if delta is None else delta
    t = (default_ramsey_time(params, d) if variant == "ramsey" else
         echo_offset_zero_time(params, d)) if t_interaction is None else t_interaction
    cal = _fringe_calibration(variant, t, d, params, config, noise, ramp_time)
    raws = [
        _run_parity_sequence(prepared_state, variant, th, th + cal[0], t, d,
                             params, config, noise, ramp_time)
        for th in phases
    ]
    return _parity_result(float(np.mean(raws)), t, phases, cal)


# ---------------------------------------------------------------------------
# interaction-time selection (finite-epsilon offset of the parity estimate)


_ZERO_CACHE: dict[tuple, float] = {}


def analytic_echo_offset(
    params: SystemParams, delta: float, times: Sequence[float], beta_far: float = 2.0,
) -> np.ndarray:
    """Order-eps^2 four-phase echo background on a far-field coherent state.

    This is the analytic track for the tomography offset: its zero crossings
    are the interaction times that null the Wigner background.
    """
    chi_sign = 1 if delta > 0 else -1
    dim = max(int(4 * beta_far**2) + 6, 12)
    c = coherent_amplitudes(dim, beta_far)
    out = np.empty(len(times))
    for i, t in enumerate(times):
        vals = [echo_sigma_z_analytic(c, th, t, params, delta, chi_sign) for th in FOUR_PHASES]
        out[i] = float(np.mean(vals))
    return out


def echo_offset_zero_time(
    params: SystemParams, delta: float | None = None, beta_far: float = 2.0,
    span: float = 0.30e-6,
) -> float:
    """Interaction time near pi/|chi| where the analytic echo offset crosses zero.

    The offset is evaluated on a far-field coherent state (parity ~ 0) with
    the order-eps^2 echo expression, four-phase averaged; the zero crossing
    closest to t0 is refined by bisection.  This mirrors choosing the
    tomography interaction time that nulls the Wigner background.
    """
    d = params.delta("ramsey") if delta is None else delta
    key = (params.g_lg00, params.alpha, d, beta_far)
    if key in _ZERO_CACHE:
        return _ZERO_CACHE[key]
    t0 = default_ramsey_time(params, d)
    chi_sign = 1 if d > 0 else -1
    dim = max(int(4 * beta_far**2) + 6, 12)
    c = coherent_amplitudes(dim, beta_far)

    def offset(t):
        vals = [echo_sigma_z_analytic(c, th, t, params, d, chi_sign) for th in FOUR_PHASES]
        return float(np.mean(vals))

    times = np.linspace(t0 - span, t0 + span, 121)
    vals = np.array([offset(t) for t in times])
    crossings = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if crossings.size == 0:
        _ZERO_CACHE[key] = t0
        return t0
    best = crossings[np.argmin(np.abs(times[crossings] - t0))]
    lo, hi = times[best], times[best + 1]
    flo = offset(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = offset(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    result = 0.5 * (lo + hi)
    _ZERO_CACHE[key] = result
    return result


@dataclass(frozen=True)
class OffsetScan:
    times: np.ndarray
    offsets: np.ndarray
    oscillation_frequency: float
    best_time: float
    analytic_zero: float
    frequency_ratio_to_delta_prime: float
    doubled_frequency_flag: bool


def interaction_time_offset_scan(
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    times: Sequence[float] | None = None,
    delta: float | None = None,
    ring_radius: float = 1.9,
    n_ring: int = 8,
    variant: str = "echo",
    phases: Sequence[float] = FOUR_PHASES,
) -> OffsetScan:
    """Far-field Wigner offset (mean over a |beta| ring) vs interaction time.

    Reports the fitted oscillation frequency, the |offset|-minimizing time,
    and whether the frequency looks doubled relative to |Delta'| (the
    unexplained experimental observation; simulations track |Delta'|).
    """
    d = params.delta("ramsey") if delta is None else delta
    t0 = default_ramsey_time(params, d)
    if times is None:
        times = np.linspace(t0 - 0.30e-6, t0 + 0.30e-6, 41)
    times = np.asarray(times, dtype=float)
    vac = fock_state(config, [0] * config.n_modes, 0)
    base = vac if noise.is_trivial else vac.to_density()
    ring = [ring_radius * np.exp(2j * math.pi * k / n_ring) for k in range(n_ring)]
    displaced = []
    for b in ring:
        u = displacement_operator(config, 0, -b).matrix
        displaced.append(_apply_unitary(base, u))
    offsets = np.empty(times.size)
    for i, t in enumerate(times):
        cal = _fringe_calibration(variant, t, d, params, config, noise)
        vals = []
        for st in displaced:
            raws = [
                _run_parity_sequence(st, variant, th, th + cal[0], t, d, params, config, noise)
                for th in phases
            ]
            vals.append((np.mean(raws) - cal[2]) / cal[1])
        offsets[i] = (2.0 / math.pi) * float(np.mean(vals))

    freq = _fit_oscillation_frequency(times, offsets)
    dp = abs(delta_prime(params.g_lg00, d))
    best_time = float(times[np.argmin(np.abs(offsets))])
    zero = echo_offset_zero_time(params, d) if variant == "echo" else _ramsey_zero(params, d)
    ratio = freq / dp
    return OffsetScan(
        times=times,
        offsets=offsets,
        oscillation_frequency=freq,
        best_time=best_time,
        analytic_zero=zero,
        frequency_ratio_to_delta_prime=ratio,
        doubled_frequency_flag=bool(abs(ratio - 2.0) < 0.25),
    )


def _ramsey_zero(params, d):
    # zeros of sin(Delta' t): multiples of 1/(2|Delta'|) nearest t0
    t0 = default_ramsey_time(params, d)
    step = 1.0 / (2.0 * abs(delta_prime(params.g_lg00, d)))
    return round(t0 / step) * step


def _fit_oscillation_frequency(times, offsets) -> float:
    """Least-squares sinusoid frequency of the signed offset trace (Hz)."""
    t = times - times[0]
    y = offsets - offsets.mean()
    if np.allclose(y, 0):
        return 0.0
    dt = float(np.median(np.diff(t)))
    spec = np.abs(np.fft.rfft(y))
    freqs = np.fft.rfftfreq(t.size, dt)
    f0 = float(freqs[np.argmax(spec[1:]) + 1])
    from scipy.optimize import least_squares

    def residual(p):
        a, f, ph = p
        return a * np.cos(TWO_PI * f * t + ph) - y

    res = least_squares(
        residual, [float(np.abs(y).max()), f0, 0.0],
        bounds=([0.0, f0 / 3.0, -TWO_PI], [np.inf, f0 * 3.0, TWO_PI]),
    )
    return float(res.x[1])


# ---------------------------------------------------------------------------
# spectroscopy


def spectroscopy_peak_hints(
    params: SystemParams, delta_operate: float, n_peaks: int
) -> tuple[float, float]:
    """(center, spacing) hints for the Voigt-sum fit from exact dressed levels.

    The center is the n=0 qubit line; the spacing is the chord slope of the
    exact peak positions over the fitted range (peak positions curve because
    the per-phonon shift shrinks with n, so the chord anchored at peak 0
    keeps the bounded per-peak deviations smallest).
    """
    from .swtheory import chi_numeric

    cfg = HilbertConfig(2, (max(n_peaks + 6, 10),))
    shifts = chi_numeric(params, cfg, delta_operate, max(n_peaks - 1, 1))
    from .device import full_jc_hamiltonian

    h = full_jc_hamiltonian(params, cfg, delta_operate, frame="phonon_rotating").matrix
    w, v = np.linalg.eigh(h)
    d = cfg.phonon_dims[0]
    idx_g0 = int(np.argmax(np.abs(v[0 * d + 0, :]) ** 2))
    idx_e0 = int(np.argmax(np.abs(v[1 * d + 0, :]) ** 2))
    line0 = float((w[idx_e0] - w[idx_g0]) / TWO_PI)
    if n_peaks <= 1:
        return line0, float(shifts[0])
    chord = float(np.sum(shifts[: n_peaks - 1]) / (n_peaks - 1))
    return line0, chord


def qubit_spectroscopy(
    prepared_state,
    delta_operate: float,
    probe: Pulse | None,
    freq_grid: Sequence[float],
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    probe_duration: float = 15e-6,
    jobs: int = 1,
    phase_cycles: int = 2,
) -> SpectrumTrace:
    """Weak-probe qubit spectrum while dispersively coupled to the phonon state.

    Each grid frequency (Hz, relative to the LG-00 mode) is simulated in the
    frame co-rotating with the probe, where the Hamiltonian is constant.  The
    default probe amplitude keeps peak excitation in the linear regime.

    ``phase_cycles`` averages the spectrum over equally spaced probe carrier
    phases.  Two cycles cancel every response term linear in the probe field;
    without them, states with phonon coherences (coherent states) bias the
    peak heights through interference between the probe-built amplitude and
    the dressed components the state already carries.  (Experimentally the
    same terms wash out through slow qubit frequency fluctuations.)  Diagonal
    phonon states are insensitive, so ``phase_cycles=1`` is safe for Fock
    preparations.
    """
    freqs = np.asarray(sorted(freq_grid), dtype=float)
    if probe is None or probe.amplitude == 0.0:
        amp = 0.5 / (TWO_PI * probe_duration)
        probe = Pulse(shape="square", amplitude=amp)
    sz = qubit_operator(config, "sigma_z").matrix
    sp = qubit_operator(config, "sigma_plus").matrix
    sm = qubit_operator(config, "sigma_minus").matrix
    pe = qubit_projector(config, 1).matrix
    drives = []
    for k in range(max(phase_cycles, 1)):
        drive_phase = -(probe.phase + TWO_PI * k / max(phase_cycles, 1) + math.pi / 2.0)
        drives.append(TWO_PI * 0.5 * probe.amplitude * (
            np.exp(-1j * drive_phase) * sp + np.exp(1j * drive_phase) * sm
        ))
    rho = prepared_state.to_density() if isinstance(prepared_state, Ket) else prepared_state
    cs = collapse_operators(config, noise)
    qubit_freq = delta_operate + noise.static_qubit_offset

    mode_ops = []
    for k in range(config.n_modes):
        a = annihilation(config, k).matrix
        mode_ops.append((a.conj().T @ a, TWO_PI * params.mode_g(k) * (sp @ a + sm @ a.conj().T),
                         params.mode_offset(k)))

    def one_point(f: float) -> float:
        h0 = TWO_PI * (qubit_freq - f) * 0.5 * sz
        for num, coupling, offset in mode_ops:
            h0 = h0 + TWO_PI * (offset - f) * num + coupling
        acc = 0.0
        for h_drive in drives:
            h = h0 + h_drive
            if cs:
                prop = _expm(liouvillian(h, cs) * probe_duration)
                rho_f = (prop @ rho.matrix.reshape(-1)).reshape(config.dim, config.dim)
            else:
                w, v = np.linalg.eigh(h)
                u = (v * np.exp(-1j * w * probe_duration)) @ v.conj().T
                rho_f = u @ rho.matrix @ u.conj().T
            acc += float(np.real(np.trace(rho_f @ pe)))
        return acc / len(drives)

    pops = np.array(_ordered_map(one_point, freqs, jobs))

    meta = {
        "detuning": delta_operate,
        "probe_amplitude": probe.amplitude,
        "probe_duration": probe_duration,
        "probe_bandwidth": 1.0 / (TWO_PI * probe_duration),
        "warnings": [],
    }
    _warn_if_grid_misses_peaks(meta, rho, freqs, params, delta_operate)
    return SpectrumTrace(freqs, pops, meta)


def _warn_if_grid_misses_peaks(meta, rho, freqs, params, delta_operate):
    pn = np.real(np.diag(reduced_mode_matrix(rho, 0)))
    occupied = np.where(pn > 0.01)[0]
    if occupied.size == 0:
        return
    chi = chi_analytic(params.g_lg00, delta_operate, params.alpha, form="full")
    lamb = params.g_lg00**2 / delta_operate
    line0 = delta_operate + lamb
    expected = [line0 + n * chi for n in occupied]
    margin = abs(chi) / 2.0
    if min(expected) - margin < freqs[0] or max(expected) + margin > freqs[-1]:
        meta["warnings"].append(
            f"frequency grid [{freqs[0]:.3e}, {freqs[-1]:.3e}] does not span the expected "
            f"peaks [{min(expected):.3e}, {max(expected):.3e}]"
        )


# ---------------------------------------------------------------------------
# Wigner tomography


def wigner_scan(
    prepared_state,
    beta_grid: np.ndarray,
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    interaction_time: float | None = None,
    phases: Sequence[float] = FOUR_PHASES,
    delta: float | None = None,
    variant: str = "echo",
    jobs: int = 1,
) -> np.ndarray:
    """Displaced-parity values over a grid of complex amplitudes.

    Convention: the state is displaced by -beta and the parity recorded as
    the value at beta, i.e. W(beta) = (2/pi) Tr[D^dag(beta) rho D(beta) Pi];
    this function returns the calibrated parities (the 2/pi scaling and axis
    calibration are applied by ``analysis.wigner_assemble``).
    """
    d = params.delta("ramsey") if delta is None else delta
    t = (echo_offset_zero_time(params, d) if variant == "echo"
         else default_ramsey_time(params, d)) if interaction_time is None else interaction_time
    grid = np.asarray(beta_grid, dtype=complex)
    flat = grid.reshape(-1)
    cal = _fringe_calibration(variant, t, d, params, config, noise)

    def one_point(b: complex) -> float:
        u = displacement_operator(config, 0, -b).matrix
        st = _apply_unitary(prepared_state, u)
        raws = [
            _run_parity_sequence(st, variant, th, th + cal[0], t, d, params, config, noise)
            for th in phases
        ]
        return (float(np.mean(raws)) - cal[2]) / cal[1]

    out = np.array(_ordered_map(one_point, list(flat), jobs))
    return out.reshape(grid.shape)


# ---------------------------------------------------------------------------
# coherence protocols


def coherence_protocols(
    kind: str,
    params: SystemParams,
    config: HilbertConfig,
    noise: NoiseModel,
    delays: Sequence[float],
    demod_freq: float | None = None,
):
    """Simulated T1/T2 protocols with fits; returns (times, values, FitResult).

    Phonon protocols park the qubit at the rest detuning during the delay and
    shuttle the excitation with resonant swaps.
    """
    delays = np.asarray(delays, dtype=float)
    rest = params.delta("rest")
    g = params.mode_g(0)
    swap_seg = Segment(duration=1.0 / (4.0 * g), detuning=0.0)
    pe = qubit_projector(config, 1).matrix
    vac = fock_state(config, [0] * config.n_modes, 0)
    base = vac if noise.is_trivial else vac.to_density()

    def measure_pe(state):
        if isinstance(state, Ket):
            return float(np.real(state.amplitudes.conj() @ (pe @ state.amplitudes)))
        return float(np.real(np.trace(state.matrix @ pe)))

    values = np.empty(delays.size)
    if kind == "qubit_t1":
        for i, tau in enumerate(delays):
            st = _apply_unitary(base, _rotation_matrix(config, 0.0, math.pi))
            if tau > 0:
                st = evolve_segments(st, [Segment(tau, rest)], params, config, noise)
            values[i] = measure_pe(st)
        fit = decay_fit(delays, values, "exponential")
    elif kind == "qubit_t2":
        f_demod = 0.25e6 if demod_freq is None else demod_freq
        for i, tau in enumerate(delays):
            st = _apply_unitary(base, _rotation_matrix(config, 0.0, math.pi / 2.0))
            if tau > 0:
                st = evolve_segments(st, [Segment(tau, rest)], params, config, noise)
            theta2 = -TWO_PI * rest * tau + TWO_PI * f_demod * tau
            # two quadrature-opposed readouts: the T1 baseline drift cancels
            plus = measure_pe(_apply_unitary(st, _rotation_matrix(config, theta2, math.pi / 2.0)))
            minus = measure_pe(
                _apply_unitary(st, _rotation_matrix(config, theta2 + math.pi, math.pi / 2.0))
            )
            values[i] = 0.5 * (plus - minus)
        fit = decay_fit(delays, values, "exponential_sine")
    elif kind == "phonon_t1":
        for i, tau in enumerate(delays):
            st = _apply_unitary(base, _rotation_matrix(config, 0.0, math.pi))
            st = evolve_segments(st, [swap_seg], params, config, noise)
            if tau > 0:
                st = evolve_segments(st, [Segment(tau, rest)], params, config, noise)
            st = evolve_segments(st, [swap_seg], params, config, noise)
            values[i] = measure_pe(st)
        fit = decay_fit(delays, values, "exponential")
    elif kind == "phonon_t2":
        f_demod = 15e3 if demod_freq is None else demod_freq
        for i, tau in enumerate(delays):
            st = _apply_unitary(base, _rotation_matrix(config, 0.0, math.pi / 2.0))
            st = evolve_segments(st, [swap_seg], params, config, noise)
            if tau > 0:
                st = evolve_segments(st, [Segment(tau, rest)], params, config, noise)
            st = evolve_segments(st, [swap_seg], params, config, noise)
            theta2 = TWO_PI * f_demod * tau
            plus = measure_pe(_apply_unitary(st, _rotation_matrix(config, theta2, math.pi / 2.0)))
            minus = measure_pe(
                _apply_unitary(st, _rotation_matrix(config, theta2 + math.pi, math.pi / 2.0))
            )
            values[i] = 0.5 * (plus - minus)
        fit = decay_fit(delays, values, "exponential_sine")
    else:
        raise ValidationError(f"unknown coherence protocol {kind!r}")
    return delays, values, fit
