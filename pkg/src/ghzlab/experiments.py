"""Named experiments built on the simulator and analysis layers.

A `SimContext` bundles one complete noise configuration (source, chip
stage, detectors).  All runs are deterministic given a master seed; the
per-setting work of a tomography can optionally spread over worker threads
(GHZLAB_WORKERS) without changing any result.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analysis, qmath, simulator
from .analysis import (BellResult, MeasurementRecord, MleResult, PhaseScanFit,
                       TomographySet, WitnessResult, bell_settings, bell_value,
                       fit_phase_scan, max_fidelity_over_phase, mle_reconstruct,
                       monte_carlo_error, phase_witness, stabilizer_witness,
                       tomography_settings)
from .chip import PreparationStage, setting_for_projector
from .qmath import PauliLabel, fidelity_to_pure, ghz4, purity
from .simulator import DetectorModel, OutcomeDistribution, qubit_distribution, sample_counts
from .source import (MasterFractions, SourceSpec, enumerate_joint_inputs,
                     fit_master_fractions)

MEASURED_REFLECTIVITIES = (0.500, 0.505, 0.4905, 0.503)


@dataclass(frozen=True)
class SimContext:
    spec: SourceSpec
    fractions: MasterFractions
    stage: PreparationStage
    detectors: DetectorModel

    @classmethod
    def ideal(cls) -> "SimContext":
        return cls(spec=SourceSpec.ideal(), fractions=MasterFractions.perfect(),
                   stage=PreparationStage(), detectors=DetectorModel.ideal())

    def with_state_phase(self, theta: float) -> "SimContext":
        stage = PreparationStage.with_state_phase(theta, self.stage.reflectivities)
        return replace(self, stage=stage)


def worker_count() -> int:
    try:
        n = int(os.environ.get("GHZLAB_WORKERS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, 32))


def parallel_map(fn, items):
    """Order-preserving map, threaded when GHZLAB_WORKERS > 1."""
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def settings_for_labels(labels) -> tuple:
    """MZI settings for four measurement labels; identity parties sit at Z."""
    out = []
    for lab in labels:
        out.append(setting_for_projector(
            PauliLabel.Z if lab is PauliLabel.I else lab))
    return tuple(out)


def measurement_record(ctx: SimContext, labels, shots: int | None = None,
                       seed=None, effective_counts: float = 1.0,
                       enumeration=None) -> MeasurementRecord:
    """Simulate one measurement setting.

    With ``shots`` set, counts are a seeded multinomial sample of that many
    post-selected events; otherwise the exact conditional probabilities are
    scaled by ``effective_counts``.
    """
    dist = qubit_distribution(ctx.spec, ctx.fractions, ctx.stage,
                              settings_for_labels(labels), ctx.detectors,
                              enumeration=enumeration)
    if shots is None:
        counts = dist.conditional() * effective_counts
    else:
        counts = sample_counts(dist, shots, seed).astype(float)
    return MeasurementRecord(settings=tuple(labels), counts=counts)


def run_simulate(ctx: SimContext, labels) -> OutcomeDistribution:
    return qubit_distribution(ctx.spec, ctx.fractions, ctx.stage,
                              settings_for_labels(labels), ctx.detectors)


def run_tomography(ctx: SimContext, shots: int | None = None, seed=None,
                   effective_counts: float = 1e6) -> TomographySet:
    """All 81 tomography records, exact or sampled with per-setting child seeds."""
    settings = tomography_settings()
    enumeration = enumerate_joint_inputs(ctx.spec, ctx.fractions)
    if shots is None:
        seeds = [None] * len(settings)
    else:
        seeds = np.random.SeedSequence(seed).spawn(len(settings))
    records = parallel_map(
        lambda pair: measurement_record(ctx, pair[0], shots=shots, seed=pair[1],
                                        effective_counts=effective_counts,
                                        enumeration=enumeration),
        zip(settings, seeds))
    return TomographySet(records)


@dataclass(frozen=True)
class TomographyReport:
    fidelity: float
    purity: float
    theta_star: float
    fidelity_at_theta_star: float
    fidelity_error: float
    purity_error: float
    mle_iterations: int
    mle_converged: bool


def tomography_report(ts: TomographySet, n_resamples: int = 50,
                      seed=12345) -> tuple[TomographyReport, MleResult]:
    """MLE reconstruction plus fidelity/purity and their Monte-Carlo errors."""
    target = ghz4()
    mle = mle_reconstruct(ts)
    fid = fidelity_to_pure(mle.rho, target)
    pur = purity(mle.rho)
    theta_star, fid_star = max_fidelity_over_phase(mle.rho)

    def fid_stat(resampled):
        return fidelity_to_pure(mle_reconstruct(resampled).rho, target)

    def pur_stat(resampled):
        return purity(mle_reconstruct(resampled).rho)

    if n_resamples >= 2:
        fid_err = monte_carlo_error(ts, fid_stat, n_resamples, seed)
        pur_err = monte_carlo_error(ts, pur_stat, n_resamples, seed)
    else:
        fid_err = pur_err = 0.0
    report = TomographyReport(fidelity=fid, purity=pur, theta_star=theta_star,
                              fidelity_at_theta_star=fid_star,
                              fidelity_error=fid_err, purity_error=pur_err,
                              mle_iterations=mle.iterations,
                              mle_converged=mle.converged)
    return report, mle


def run_witness(ctx: SimContext, shots: int | None = None, seed=None) -> WitnessResult:
    seeds = np.random.SeedSequence(seed).spawn(2) if shots is not None else [None, None]
    rec_x = measurement_record(ctx, (PauliLabel.X,) * 4, shots=shots, seed=seeds[0])
    rec_z = measurement_record(ctx, (PauliLabel.Z,) * 4, shots=shots, seed=seeds[1])
    return stabilizer_witness(rec_x, rec_z)


def run_phase_witness(ctx: SimContext, shots: int | None = None, seed=None) -> float:
    rec = measurement_record(ctx, analysis.PHASE_WITNESS_SETTINGS,
                             shots=shots, seed=seed)
    return phase_witness(rec)


def run_bell(ctx: SimContext, shots: int | None = None, seed=None) -> BellResult:
    settings = bell_settings()
    enumeration = enumerate_joint_inputs(ctx.spec, ctx.fractions)
    if shots is None:
        seeds = [None] * 8
    else:
        seeds = np.random.SeedSequence(seed).spawn(8)
    records = parallel_map(
        lambda pair: measurement_record(ctx, pair[0], shots=shots, seed=pair[1],
                                        effective_counts=max(shots or 1, 1),
                                        enumeration=enumeration),
        zip(settings, seeds))
    return bell_value(records)


def run_bell_sweep(ctx: SimContext, photon_index: int, scales) -> list:
    """Inequality value as one photon's distinguishability scale is dialed down."""
    rows = []
    for s in scales:
        scale = list(ctx.spec.distinguishability_scale)
        scale[photon_index] = float(s)
        spec = replace(ctx.spec, distinguishability_scale=tuple(scale))
        bell = run_bell(replace(ctx, spec=spec))
        fr = ctx.fractions.x
        overlaps = [fr[photon_index] * s * fr[j] for j in range(4) if j != photon_index]
        rows.append({"scale": float(s),
                     "min_pairwise_overlap": float(min(overlaps)),
                     "bell_value": bell.value})
    return rows


def run_phase_scan(ctx: SimContext, powers_mw, rad_per_mw: float,
                   offset_rad: float, shots: int | None = None, seed=None
                   ) -> tuple[list, PhaseScanFit]:
    """Phase witness versus heater power, plus the cosine fit.

    The scanned heater's phase is linear in electrical power, so the state
    phase at power P is ``rad_per_mw * P + offset_rad``.
    """
    powers = list(powers_mw)
    points = []
    if shots is not None:
        seeds = np.random.SeedSequence(seed).spawn(len(powers))
    for i, p in enumerate(powers):
        theta = rad_per_mw * p + offset_rad
        val = run_phase_witness(ctx.with_state_phase(theta),
                                shots=shots, seed=seeds[i] if shots else None)
        points.append((float(p), float(val)))
    return points, fit_phase_scan(points)


def measured_noise_context(include_multiphoton: bool = True,
                        include_distinguishability: bool = True,
                        include_couplers: bool = True,
                        detector_efficiencies=None) -> SimContext:
    """Noise configuration built from the measured source and chip parameters."""
    base = SourceSpec()
    g2 = base.g2 if include_multiphoton else 0.0
    overlaps = dict(base.measured_overlaps)
    spec = SourceSpec(g2=g2, measured_overlaps=overlaps, eta=base.eta)
    if include_distinguishability:
        fractions = fit_master_fractions(overlaps)
    else:
        fractions = MasterFractions.perfect()
    stage = PreparationStage(
        reflectivities=MEASURED_REFLECTIVITIES if include_couplers else (0.5,) * 4)
    det = DetectorModel.ideal() if detector_efficiencies is None else \
        DetectorModel(efficiencies=tuple(detector_efficiencies))
    return SimContext(spec=spec, fractions=fractions, stage=stage, detectors=det)


ABLATION_ROWS = (
    ("couplers_only", dict(include_multiphoton=False,
                           include_distinguishability=False,
                           include_couplers=True)),
    ("multiphoton_only", dict(include_multiphoton=True,
                              include_distinguishability=False,
                              include_couplers=False)),
    ("distinguishability_only", dict(include_multiphoton=False,
                                     include_distinguishability=True,
                                     include_couplers=False)),
    ("combined_no_detectors", dict(include_multiphoton=True,
                                   include_distinguishability=True,
                                   include_couplers=True)),
)


def run_ablation(detector_pattern=None, n_resamples: int = 0, seed=0) -> list:
    """Fidelity/purity grid with each noise source toggled, via exact tomography."""
    rows = []
    for name, flags in ABLATION_ROWS:
        ctx = measured_noise_context(**flags)
        ts = run_tomography(ctx)
        report, _ = tomography_report(ts, n_resamples=n_resamples, seed=seed)
        rows.append({"row": name, "fidelity": report.fidelity,
                     "purity": report.purity})
    if detector_pattern is not None:
        for name, flags in (("detectors_only", dict(include_multiphoton=False,
                                                    include_distinguishability=False,
                                                    include_couplers=False)),
                            ("combined_all", dict(include_multiphoton=True,
                                                  include_distinguishability=True,
                                                  include_couplers=True))):
            ctx = measured_noise_context(**flags, detector_efficiencies=detector_pattern)
            ts = run_tomography(ctx)
            report, _ = tomography_report(ts, n_resamples=n_resamples, seed=seed)
            rows.append({"row": name, "fidelity": report.fidelity,
                         "purity": report.purity})
    return rows
