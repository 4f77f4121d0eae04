"""Experiment configuration: a single JSON document with embedded defaults.

Every run of the command-line tool validates the full document against the
range constraints of the underlying types before any computation starts.
The ``notes`` block carries human-readable descriptions of each section so
an emitted default file documents itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .chip import HeaterCalibration, PreparationStage
from .errors import ConfigError
from .experiments import MEASURED_REFLECTIVITIES, SimContext
from .simulator import DetectorModel, LossBudget
from .source import MasterFractions, SourceSpec, fit_master_fractions

SCHEMA = "ghzlab-config/v1"


def default_config() -> dict:
    return {
        "schema": SCHEMA,
        "seed": 20220901,
        "shots_per_setting": 450,
        "exact_probabilities": True,
        "source": {
            "g2": 0.005,
            "overlaps": {"AB": 0.924, "AC": 0.915, "BD": 0.881, "CD": 0.921},
            "eta": 0.039,
            "distinguishability_scale": [1.0, 1.0, 1.0, 1.0],
        },
        "chip": {
            "path_phases": [0.0] * 8,
            "reflectivities": list(MEASURED_REFLECTIVITIES),
        },
        "detectors": {"efficiencies": [1.0] * 8},
        "simulate": {"settings": ["z", "z", "z", "z"]},
        "phase_scan": {
            "power_min_mw": 28.0,
            "power_max_mw": 78.0,
            "points": 13,
            "rad_per_mw": 0.126264,
            "offset_rad": -0.3848165328204134,
        },
        "bell_sweep": {"photon": "C", "scales": [1.0, 0.75, 0.5, 0.25, 0.0]},
        "qss": {"rounds": 2000, "public_fraction": 0.0},
        "ablation": {"detector_pattern": None, "resamples": 0},
        "tomography": {"resamples": 25},
        "calibrate": {
            "alpha_targets_rad": [0.0, 0.0, 0.0, 0.0],
            "phi_targets_rad": [3.8656, 2.838, 0.798, 0.990],
        },
        "rate": {
            "repetition_rate_hz": 79e6,
            "filling_factor": 0.67,
            "first_lens_brightness": 0.50,
            "eta_coupling": 0.29,
            "eta_demux": 0.75,
            "eta_chip": 0.54,
            "eta_detector": 0.65,
        },
        "notes": {
            "source": "measured emitter parameters: multiphoton g2(0), pairwise "
                      "mean-wavepacket overlaps of the four measurable photon "
                      "pairs, and end-to-end transmission per photon",
            "chip": "static path phases (rad) and directional-coupler "
                    "reflectivities (BAR power fraction, mean of both "
                    "polarizations as characterized)",
            "detectors": "relative detection efficiencies of the 8 threshold "
                         "detectors; balanced loss belongs in source.eta",
            "phase_scan": "heater power grid (mW) and the linear power-to-phase "
                          "map of the scanned shifter",
            "shots_per_setting": "post-selected events per measurement setting "
                                 "when sampling; exact_probabilities=true uses "
                                 "noiseless probabilities instead",
            "rate": "loss-budget factors entering the four-fold coincidence "
                    "rate estimate",
        },
    }


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    context: SimContext
    seed: int
    shots_per_setting: int
    exact_probabilities: bool
    budget: LossBudget
    calibration: HeaterCalibration

    @property
    def shots(self) -> int | None:
        return None if self.exact_probabilities else self.shots_per_setting


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def parse_config(data: dict) -> ExperimentConfig:
    _require(isinstance(data, dict), "config must be a JSON object")
    _require(data.get("schema") == SCHEMA, f"config schema must be {SCHEMA!r}")
    merged = default_config()
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    try:
        src = merged["source"]
        spec = SourceSpec(
            g2=float(src["g2"]),
            measured_overlaps={k: float(v) for k, v in src["overlaps"].items()},
            eta=float(src["eta"]),
            distinguishability_scale=tuple(float(s)
                                           for s in src["distinguishability_scale"]),
        )
        if all(v == 1.0 for v in spec.measured_overlaps.values()):
            fractions = MasterFractions.perfect()
        else:
            fractions = fit_master_fractions(spec.measured_overlaps)
        chip_block = merged["chip"]
        stage = PreparationStage(
            path_phases=tuple(float(p) for p in chip_block["path_phases"]),
            reflectivities=tuple(float(r) for r in chip_block["reflectivities"]),
        )
        det = DetectorModel(efficiencies=tuple(
            float(e) for e in merged["detectors"]["efficiencies"]))
        rate = merged["rate"]
        budget = LossBudget(
            repetition_rate_hz=float(rate["repetition_rate_hz"]),
            filling_factor=float(rate["filling_factor"]),
            first_lens_brightness=float(rate["first_lens_brightness"]),
            eta_coupling=float(rate["eta_coupling"]),
            eta_demux=float(rate["eta_demux"]),
            eta_chip=float(rate["eta_chip"]),
            eta_detector=float(rate["eta_detector"]),
        )
        calibration_file = merged.get("heater_calibration_file")
        calibration = (HeaterCalibration.from_file(calibration_file)
                       if calibration_file else HeaterCalibration())
        seed = int(merged["seed"])
        shots = int(merged["shots_per_setting"])
        _require(shots >= 1, "shots_per_setting must be positive")
        exact = bool(merged["exact_probabilities"])
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    ctx = SimContext(spec=spec, fractions=fractions, stage=stage, detectors=det)
    return ExperimentConfig(raw=merged, context=ctx, seed=seed,
                            shots_per_setting=shots, exact_probabilities=exact,
                            budget=budget, calibration=calibration)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


def dump_config(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
