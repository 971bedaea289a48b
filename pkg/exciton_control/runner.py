"""
Experiment runner: turns a validated :class:`ExperimentConfig` into lattices, models,
states and protocols, dispatches on the experiment kind and writes the artifacts.
"""

import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.experiment_config import ExperimentConfig, FieldSection, InitialStateSection, ProtocolSection

from .artifacts import ArtifactWriter
from .control.fieldmap import (
    BeamPulse,
    DCPulse,
    FieldConfig,
    dc_gradient_pulse,
    gaussian_beam_pulse,
    pulse_to_delta,
    timescale_report,
)
from .control.protocols import ControlProtocol, ProtocolKind, optimal_lens_strength, predict_focus
from .control.steering import run_steering, steering_schedule
from .coupling import (
    CouplingKind,
    CouplingModel,
    build_hamiltonian,
    coupling_element,
    dispersion_2d,
    dispersion_lr,
    dispersion_nn,
    export_triplets,
    zeta3_limit,
)
from .disorder_focus import (
    block_focus_experiment,
    block_phases,
    enhancement_experiment,
    find_clean_focus_time,
    realization_seeds,
    verify_block_solution,
)
from .errors import ConfigError
from .evolve import (
    Envelope,
    PulseSchedule,
    RunRecord,
    StaticKernel,
    apply_phase_mask,
    mask_fidelity,
    propagate_pulsed,
    propagate_with_mask,
)
from .lattice import (
    DisorderRealization,
    LatticeSpec,
    build_lattice,
    parse_mask_grid,
    partition_blocks,
    sample_disorder,
    sample_disorder_keeping,
)
from .wavepacket import (
    ExcitonState,
    k_transform,
    make_bessel_focus,
    make_eigenstate,
    make_gaussian,
    make_single_site,
    make_uniform,
)

logger = logging.getLogger(__name__)


def build_spec(config: ExperimentConfig) -> LatticeSpec:
    section = config.lattice
    return build_lattice(section.dim, section.extent, section.lattice_constant)


def build_model(config: ExperimentConfig) -> CouplingModel:
    c = config.coupling
    return CouplingModel(CouplingKind(c.kind), c.alpha, c.site_energy, c.theta, c.phi, c.truncation, c.gauge)


def build_realization(config: ExperimentConfig, spec: LatticeSpec) -> DisorderRealization:
    section = config.disorder
    if section.mask_file:
        try:
            text = Path(section.mask_file).read_text()
        except OSError as exc:
            raise ConfigError(f"disorder.mask_file: {exc}") from None
        occupied = parse_mask_grid(text, spec)
        return DisorderRealization(spec, occupied, seed=None,
                                   vacancy_fraction=1.0 - occupied.mean())
    if section.vacancy_fraction == 0:
        return DisorderRealization.clean(spec)
    seed = config.seed if section.seed is None else section.seed
    return sample_disorder(spec, section.vacancy_fraction, seed)


def nearest_alpha(model: CouplingModel, dimensionality: int) -> float:
    """Coupling across one lattice constant along x."""
    return coupling_element(model, (1.0,) + (0.0,) * (dimensionality - 1))


def build_state(section: InitialStateSection, realization: DisorderRealization,
                model: CouplingModel) -> ExcitonState:
    spec = realization.spec
    carrier = np.asarray(section.carrier_ak, dtype=float) / spec.lattice_constant
    if section.kind == "gaussian":
        return make_gaussian(realization, section.center, section.width, carrier)
    if section.kind == "eigenstate":
        return make_eigenstate(realization, carrier)
    if section.kind == "single_site":
        return make_single_site(realization, section.site)
    if section.kind == "bessel":
        return make_bessel_focus(realization, section.site, section.lead_time,
                                 nearest_alpha(model, spec.dimensionality))
    return make_uniform(realization)


def lens_strength(section: ProtocolSection, state_section: Optional[InitialStateSection],
                  spec: LatticeSpec, alpha: float) -> float:
    """Explicit phi0, or the optimal one for the initial state, signed to focus for ``alpha``."""
    if section.phi0 != "optimal":
        return float(section.phi0)
    if state_section is not None and state_section.kind == "gaussian":
        strength = optimal_lens_strength(spec.lattice_constant, width=state_section.width)
    else:
        strength = optimal_lens_strength(spec.lattice_constant, n_sites=max(spec.shape))
    return math.copysign(strength, alpha)


def build_protocol(section: ProtocolSection, state_section: Optional[InitialStateSection],
                   spec: LatticeSpec, model: CouplingModel,
                   schedule: Optional[PulseSchedule] = None) -> ControlProtocol:
    kind = ProtocolKind(section.kind)
    if kind is ProtocolKind.LINEAR_KICK:
        delta = np.asarray(section.delta_ak, dtype=float) / spec.lattice_constant
        return ControlProtocol(kind, delta=delta)
    if kind is ProtocolKind.QUADRATIC_LENS:
        phi0 = lens_strength(section, state_section, spec, nearest_alpha(model, spec.dimensionality))
        return ControlProtocol(kind, phi0=phi0, target=tuple(section.target))
    if schedule is None:
        raise ConfigError("protocol.kind: 'field_schedule' needs a [field] section")
    return ControlProtocol(kind, schedule=schedule)


def build_field(section: FieldSection) -> FieldConfig:
    return FieldConfig(
        dc_field=section.dc_field, theta=section.theta, phi=section.phi,
        intensity=section.intensity, waist=section.waist, wavelength=section.wavelength,
        beam_offset=section.beam_offset, rotational_constant=section.rotational_constant,
        dipole_moment=section.dipole_moment, alpha_parallel=section.alpha_parallel,
        alpha_perpendicular=section.alpha_perpendicular,
        transition_dipole=section.transition_dipole, detuning=section.detuning,
    )


def build_field_schedule(section: FieldSection, realization: DisorderRealization):
    """(FieldConfig, PulseSchedule, predicted kick in 1/m or None)."""
    field = build_field(section)
    center = section.center if section.center is not None else realization.spec.center
    a = realization.spec.lattice_constant
    if section.pulse == "dc_gradient":
        pulse = DCPulse(section.gradient, section.duration)
        schedule = dc_gradient_pulse(realization, field, pulse, center[0], section.start)
        return field, schedule, pulse_to_delta(field, pulse, a)
    pulse = BeamPulse(section.duration)
    schedule = gaussian_beam_pulse(realization, field, pulse, center, section.start, section.beam_profile)
    predicted = pulse_to_delta(field, pulse, a) if section.beam_profile in ("linear", "axial") else None
    return field, schedule, predicted


def schedule_kick(schedule, state: ExcitonState) -> float:
    """Kick (1/m) of the linear part of the accumulated phase, fitted over the packet."""
    coords = state.realization.occupied_coordinates[:, 0].astype(float)
    weights = np.sqrt(state.probabilities())
    slope = np.polyfit(coords, schedule.accumulated_phase(), 1, w=weights)[0]
    return -slope / state.realization.spec.lattice_constant


def ring_check(model: CouplingModel, spec: LatticeSpec) -> Dict[str, Optional[float]]:
    """
    Eigenvalues of the periodic ring/torus against the band at its quantized wave vectors,
    as the largest deviation relative to |alpha_ref|.
    """
    model = replace(model, gauge=True)
    dipolar = model.kind is CouplingKind.DIPOLAR
    if dipolar and not math.isfinite(model.truncation):
        logger.info("Ring check skipped: untruncated dipolar couplings have no finite ring")
        return {"max_relative_error": None}
    hamiltonian = build_hamiltonian(model, DisorderRealization.clean(spec), periodic=True)
    a = spec.lattice_constant
    axes = [2.0 * np.pi * np.fft.fftfreq(n) / a for n in spec.shape]
    if spec.dimensionality == 1:
        band = dispersion_lr(model, axes[0], a) if dipolar else dispersion_nn(model, axes[0], a)
    else:
        kx, ky = np.meshgrid(*axes, indexing="ij")
        band = dispersion_2d(model, kx, ky, a)
    expected = np.sort(np.ravel(band))
    found = np.sort(hamiltonian.eigenvalues())
    return {"max_relative_error": float(np.max(np.abs(found - expected)) / abs(model.alpha_ref))}


def _time_grid(duration: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, duration, samples + 1)


def _round_target(target) -> Tuple[int, ...]:
    return tuple(int(round(float(v))) for v in target)


class ExperimentRunner:
    """Runs one experiment and writes its artifacts under ``out_dir``."""

    def __init__(self, config: ExperimentConfig, out_dir: Optional[str] = None,
                 jobs: Optional[int] = None, tolerance: Optional[float] = None):
        self.config = config
        self.out_dir = Path(out_dir or config.output.dir)
        self.jobs = jobs if jobs is not None else (config.ensemble.jobs if config.ensemble else None)
        self.tolerance = tolerance if tolerance is not None else (
            config.time.tolerance if config.time else 1e-9)
        self.writer = ArtifactWriter(self.out_dir)
        self.summary: Dict[str, Any] = {"experiment": config.kind, "name": config.name, "seed": config.seed}

    @property
    def method(self) -> str:
        return self.config.time.method if self.config.time else "auto"

    def run(self) -> Dict[str, Any]:
        handlers: Dict[str, Callable[[], None]] = {
            "dispersion": self.run_dispersion,
            "kick": self.run_kick,
            "focus1d": self.run_focus,
            "focus2d": self.run_focus,
            "steer": self.run_steer,
            "vacancy_scan": self.run_vacancy_scan,
            "block_focus": self.run_block_focus,
        }
        logger.info(f"Running {self.config.kind} experiment '{self.config.name}'")
        self.writer.write_json("config.json", self.config.model_dump())
        handlers[self.config.kind]()
        self.writer.write_json("summary.json", self.summary)
        self.writer.write_manifest()
        return self.summary

    # ——— shared pieces ———

    def _setup(self):
        spec = build_spec(self.config)
        model = build_model(self.config)
        realization = build_realization(self.config, spec)
        hamiltonian = build_hamiltonian(model, realization)
        state = build_state(self.config.initial_state, realization, model)
        if self.config.output.state_dumps and not realization.is_clean:
            self.writer.write_mask_grid("vacancies.txt", realization)
        if self.config.output.triplets:
            self.writer.write_text("hamiltonian.txt", export_triplets(hamiltonian), kind="triplets")
        return spec, model, realization, hamiltonian, state

    def _write_record(self, label: str, record: RunRecord) -> None:
        self.writer.write_frame(f"trajectory_{label}.csv", record.to_frame())
        if not self.config.output.state_dumps:
            return
        first = record.snapshots[0]
        if first.realization.spec.dimensionality == 1:
            self._write_1d_snapshots(label, record.snapshots)
        else:
            for i, snapshot in enumerate(record.snapshots):
                self.writer.write_state(f"states/{label}_{i:04d}.txt", snapshot)

    def _write_1d_snapshots(self, label: str, snapshots: List[ExcitonState]) -> None:
        real_rows, k_rows = [], []
        for snapshot in snapshots:
            coords = snapshot.realization.occupied_coordinates[:, 0]
            for n, p in zip(coords, snapshot.probabilities()):
                real_rows.append({"time": snapshot.time_tag, "n": int(n), "probability": p})
            spectrum = k_transform(snapshot)
            for k, w in zip(spectrum.k_axes[0], spectrum.weights):
                k_rows.append({"time": snapshot.time_tag, "ak": k * spectrum.lattice_constant, "weight": w})
        self.writer.write_frame(f"realspace_{label}.csv", pd.DataFrame(real_rows))
        self.writer.write_frame(f"kspace_{label}.csv", pd.DataFrame(k_rows))

    def _record_line(self, label: str, record: RunRecord, **extra) -> Dict[str, Any]:
        return {"run": label, "samples": len(record.times), "norm_drift": record.norm_drift,
                "steps_accepted": record.steps_accepted, "steps_rejected": record.steps_rejected,
                **record.config, **extra}

    # ——— experiment kinds ———

    def run_dispersion(self) -> None:
        spec = build_spec(self.config)
        model = build_model(self.config)
        section = self.config.dispersion
        a = spec.lattice_constant
        ak = np.linspace(-np.pi, np.pi, section.n_k)
        rows, checks = [], []
        # bands relative to the site energy
        gauged = replace(model, gauge=True)
        for theta in section.thetas:
            oriented = gauged.with_orientation(theta, model.phi)
            alpha = nearest_alpha(oriented, spec.dimensionality)
            if spec.dimensionality == 1:
                nn = dispersion_nn(oriented, ak / a, a)
                lr = dispersion_lr(oriented, ak / a, a) if math.isfinite(oriented.truncation) else nn
                for x, e_nn, e_lr in zip(ak, nn, lr):
                    rows.append({"theta_deg": math.degrees(theta), "ak": x, "alpha": alpha,
                                 "band_nn": e_nn, "band_lr": e_lr})
            else:
                kx, ky = np.meshgrid(ak, ak, indexing="ij")
                band = dispersion_2d(oriented, kx / a, ky / a, a)
                for x, y, e in zip(kx.ravel(), ky.ravel(), band.ravel()):
                    rows.append({"theta_deg": math.degrees(theta), "akx": x, "aky": y, "alpha": alpha, "band": e})
            if section.ring_check:
                checks.append({"theta_deg": math.degrees(theta), **ring_check(oriented, spec)})
        self.writer.write_frame("dispersion.csv", pd.DataFrame(rows))
        self.summary["ring_check"] = checks
        if model.kind is CouplingKind.DIPOLAR and spec.dimensionality == 1:
            self.summary["zeta3_band_edge"] = zeta3_limit(gauged)

    def run_kick(self) -> None:
        spec, model, realization, hamiltonian, state = self._setup()
        times = _time_grid(self.config.time.duration, self.config.time.samples)
        stride = self.config.time.snapshot_stride
        lines = []
        k_start = k_transform(state).center()[0]
        schedule = None
        if self.config.field is not None:
            field, schedule, predicted = build_field_schedule(self.config.field, realization)
            record = propagate_pulsed(hamiltonian, schedule, state, times, self.tolerance,
                                      snapshot_stride=stride, method=self.method)
            measured = k_transform(record.final_state).center()[0] - k_start
            fitted = schedule_kick(schedule, state)
            report = {
                "measured_delta_a": measured * spec.lattice_constant,
                "schedule_delta_a": fitted * spec.lattice_constant,
                "predicted_delta_a": None if predicted is None else predicted * spec.lattice_constant,
                "timing": timescale_report(nearest_alpha(model, spec.dimensionality),
                                           model.site_energy, schedule.duration),
            }
            if predicted:
                report["deviation"] = abs(measured - predicted) / abs(predicted)
                if report["deviation"] > 0.07:
                    logger.warning(f"Pulsed kick deviates {report['deviation']:.1%} from the analytic value")
            self.summary["pulse"] = report
            self._write_record("pulse", record)
            self.writer.write_phase_grid("pulse_phase.txt", realization, schedule.accumulated_phase())
            lines.append(self._record_line("pulse", record))
        if self.config.protocol is not None:
            section = self.config.protocol
            protocol = build_protocol(section, self.config.initial_state, spec, model, schedule)
            mask = protocol.mask(realization, nearest_alpha(model, spec.dimensionality))
            if section.realization == "pulse":
                pulse = protocol.pulse(realization, section.apply_at, section.pulse_duration,
                                       Envelope(section.envelope))
                record = propagate_pulsed(hamiltonian, pulse, state, times, self.tolerance,
                                          snapshot_stride=stride, method=self.method)
                self.summary["mask_fidelity"] = mask_fidelity(hamiltonian, pulse, state, self.tolerance,
                                                              self.method)
            else:
                record = propagate_with_mask(hamiltonian, state, mask, section.apply_at, times,
                                             snapshot_stride=stride, method=self.method)
            shift = k_transform(record.final_state).center()[0] - k_start
            requested = None if protocol.delta is None else \
                float(np.atleast_1d(protocol.delta)[0]) * spec.lattice_constant
            self.summary["mask"] = {"protocol": protocol.kind.value, "requested_delta_a": requested,
                                    "measured_delta_a": shift * spec.lattice_constant}
            self._write_record("mask", record)
            lines.append(self._record_line("mask", record))
        self.writer.write_jsonl("runs.jsonl", lines)

    def run_focus(self) -> None:
        spec, model, realization, hamiltonian, state = self._setup()
        section = self.config.protocol
        protocol = build_protocol(section, self.config.initial_state, spec, model)
        target = _round_target(section.target)
        times = section.apply_at + _time_grid(self.config.time.duration, self.config.time.samples)
        stride = self.config.time.snapshot_stride
        mask = protocol.mask(realization, nearest_alpha(model, spec.dimensionality))
        if section.realization == "pulse":
            pulse = protocol.pulse(realization, section.apply_at, section.pulse_duration,
                                   Envelope(section.envelope))
            record = propagate_pulsed(hamiltonian, pulse, state, times, self.tolerance, target,
                                      snapshot_stride=stride, method=self.method)
        else:
            record = propagate_with_mask(hamiltonian, state, mask, section.apply_at, times, target,
                                         snapshot_stride=stride, method=self.method)
        probability = record.series("target_probability")
        best = int(np.argmax(probability))
        alpha = nearest_alpha(model, spec.dimensionality)
        width = self.config.initial_state.width if self.config.initial_state.kind == "gaussian" else None
        prediction = predict_focus(protocol.phi0, alpha, spec.lattice_constant, width=width,
                                   n_sites=None if width else max(spec.shape))
        self.summary.update({
            "phi0": protocol.phi0,
            "predicted": {"t_star": prediction.t_star, "sigma_x_focus": prediction.sigma_x_focus,
                          "delta_k": prediction.delta_k},
            "measured": {"t_focus": record.times[best] - section.apply_at,
                         "target_probability": float(probability[best]),
                         "initial_probability": float(probability[0]),
                         "width": float(record.series("width")[best])},
        })
        self.writer.write_phase_grid("lens_phase.txt", realization, mask)
        self._write_record("focus", record)
        self.writer.write_jsonl("runs.jsonl", [self._record_line("focus", record)])

    def run_steer(self) -> None:
        spec, model, realization, hamiltonian, state = self._setup()
        section = self.config.steering
        breakpoints = [(b.time, b.theta, b.phi) for b in section.breakpoints]
        epochs = steering_schedule(model, realization, breakpoints, self.config.time.duration,
                                   section.ramp_slices)
        record = run_steering(epochs, state, section.samples_per_epoch, method=self.method)
        frame = record.to_frame()
        axes = [c for c in ("center_x", "center_y") if c in frame]
        start = np.array([state.realization.occupied_coordinates[:, i].astype(float)
                          @ state.probabilities() for i in range(spec.dimensionality)])
        displacements = []
        for index, epoch in enumerate(epochs):
            end = frame[frame["epoch"] == index][axes].iloc[-1].to_numpy()
            displacements.append({"epoch": index, "theta_deg": math.degrees(epoch.theta),
                                  "phi_deg": math.degrees(epoch.phi),
                                  "displacement": (end - start).tolist()})
            start = end
        self.summary["epochs"] = displacements
        self._write_record("steer", record)
        self.writer.write_jsonl("runs.jsonl", [self._record_line("steer", record)])

    def _state_factory(self, model: CouplingModel) -> Callable[[DisorderRealization], ExcitonState]:
        section = self.config.initial_state
        if self.config.ensemble.initial == "uniform" or section is None:
            return make_uniform
        return lambda realization: build_state(section, realization, model)

    def run_vacancy_scan(self) -> None:
        spec = build_spec(self.config)
        model = build_model(self.config)
        ensemble = self.config.ensemble
        protocol = build_protocol(self.config.protocol, self.config.initial_state, spec, model)
        target = tuple(ensemble.target) if ensemble.target else _round_target(protocol.target)
        factory = self._state_factory(model)
        focus_time = ensemble.focus_time
        if focus_time == "clean_scan":
            focus_time = find_clean_focus_time(model, spec, protocol, factory, target)
        elif focus_time == "predicted":
            focus_time = 1.0 / (4.0 * nearest_alpha(model, spec.dimensionality) * protocol.phi0)
        frames, summaries = [], []
        for index, fraction in enumerate(tqdm(ensemble.vacancy_fractions, desc="vacancy scan")):
            report = enhancement_experiment(model, spec, fraction, ensemble.n_realizations, protocol,
                                            target, factory, focus_time, seed=self.config.seed + index,
                                            jobs=self.jobs, method=self.method)
            frames.append(report.to_frame())
            summaries.append(report.summary())
            if ensemble.n_realizations == 1 and self.config.output.state_dumps:
                self._dump_lens_realization(index, model, spec, fraction, protocol, target, factory,
                                            report.focus_time)
        self.writer.write_frame("realizations.csv", pd.concat(frames, ignore_index=True))
        self.writer.write_jsonl("realizations.jsonl",
                                (row for frame in frames for row in frame.to_dict(orient="records")))
        self.summary.update({"phi0": protocol.phi0, "focus_time": float(focus_time), "fractions": summaries})

    def _dump_lens_realization(self, index, model, spec, fraction, protocol, target, factory, t_star):
        seed = realization_seeds(self.config.seed + index, 1)[0]
        realization = sample_disorder_keeping(spec, fraction, seed, target)
        hamiltonian = build_hamiltonian(model, realization)
        initial = factory(realization)
        masked = protocol.apply(initial, nearest_alpha(model, spec.dimensionality))
        kernel = StaticKernel(hamiltonian, self.method)
        self.writer.write_mask_grid(f"vacancies_{index}.txt", realization)
        self.writer.write_state(f"states/initial_{index}.txt", initial)
        self.writer.write_state(f"states/masked_{index}.txt",
                                masked.evolved(kernel(masked.amplitudes, t_star), t_star))
        self.writer.write_state(f"states/unmasked_{index}.txt",
                                initial.evolved(kernel(initial.amplitudes, t_star), t_star))

    def run_block_focus(self) -> None:
        spec = build_spec(self.config)
        model = build_model(self.config)
        ensemble = self.config.ensemble
        target = tuple(ensemble.target) if ensemble.target else tuple(n // 2 for n in spec.shape)
        factory = None if ensemble.initial == "uniform" else self._state_factory(model)
        frames, summaries = [], []
        for index, fraction in enumerate(tqdm(ensemble.vacancy_fractions, desc="block focus")):
            report = block_focus_experiment(model, spec, fraction, ensemble.n_realizations,
                                            ensemble.block_shape, ensemble.horizon, target,
                                            seed=self.config.seed + index, jobs=self.jobs,
                                            state_factory=factory, method=self.method)
            frames.append(report.to_frame())
            summary = report.summary()
            if ensemble.n_realizations == 1 and self.config.output.state_dumps:
                summary["verified_probability"] = self._dump_block_realization(
                    index, model, spec, fraction, target, factory)
            summaries.append(summary)
        self.writer.write_frame("realizations.csv", pd.concat(frames, ignore_index=True))
        self.writer.write_jsonl("realizations.jsonl",
                                (row for frame in frames for row in frame.to_dict(orient="records")))
        self.summary.update({"horizon": ensemble.horizon, "block_shape": list(ensemble.block_shape),
                             "fractions": summaries})

    def _dump_block_realization(self, index, model, spec, fraction, target, factory) -> float:
        ensemble = self.config.ensemble
        seed = realization_seeds(self.config.seed + index, 1)[0]
        realization = sample_disorder_keeping(spec, fraction, seed, target)
        hamiltonian = build_hamiltonian(model, realization)
        initial = factory(realization) if factory else make_uniform(realization)
        solution = block_phases(model, realization, partition_blocks(spec, ensemble.block_shape),
                                target, ensemble.horizon, initial=initial, hamiltonian=hamiltonian,
                                method=self.method)
        kernel = StaticKernel(hamiltonian, self.method)
        masked = apply_phase_mask(initial, solution.mask())
        horizon = ensemble.horizon
        self.writer.write_mask_grid(f"vacancies_{index}.txt", realization)
        self.writer.write_phase_grid(f"block_phases_{index}.txt", realization, solution.mask())
        self.writer.write_state(f"states/initial_{index}.txt", initial)
        self.writer.write_state(f"states/masked_{index}.txt",
                                masked.evolved(kernel(masked.amplitudes, horizon), horizon))
        self.writer.write_state(f"states/unmasked_{index}.txt",
                                initial.evolved(kernel(initial.amplitudes, horizon), horizon))
        return verify_block_solution(solution, hamiltonian, initial, self.method)
