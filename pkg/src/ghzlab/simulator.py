"""Multi-photon propagation through the chip and threshold detection.

Photons are tracked as (spatial mode, internal label) pairs.  Photons with
equal labels interfere; groups of mutually orthogonal labels scatter
independently and their output occupation distributions convolve.  Each
group's distribution comes from permanents of the scattering submatrices
with the standard bosonic normalization.

Detection is modeled as independent binomial loss per output mode followed
by threshold (click / no-click) readout; an event is kept only when every
qubit's mode pair shows exactly one clicked detector.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .chip import PreparationStage, full_unitary
from .qmath import permanent
from .source import (JointInputEnumeration, MasterFractions, SourceSpec,
                     enumerate_joint_inputs)

OUTCOME_LABELS = tuple(format(k, "04b") for k in range(16))


@dataclass
class OutcomeDistribution:
    """Probabilities of the 16 post-selected outcomes plus the discarded mass."""

    probs: np.ndarray
    discard_mass: float

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (16,):
            raise ValueError("need 16 outcome probabilities")

    @property
    def success_probability(self) -> float:
        return float(self.probs.sum())

    def conditional(self) -> np.ndarray:
        total = self.probs.sum()
        if total <= 0.0:
            raise ValueError("no post-selected probability mass")
        return self.probs / total

    def to_json_dict(self) -> dict:
        return {
            "outcomes": {lab: float(p) for lab, p in zip(OUTCOME_LABELS, self.probs)},
            "discard_mass": float(self.discard_mass),
            "success_probability": self.success_probability,
        }

    def to_csv(self) -> str:
        lines = ["outcome,probability"]
        lines += [f"{lab},{float(p)!r}" for lab, p in zip(OUTCOME_LABELS, self.probs)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DetectorModel:
    """Per-mode detection efficiencies of the 8 threshold detectors."""

    efficiencies: tuple = (1.0,) * 8
    threshold: bool = True

    def __post_init__(self):
        if len(self.efficiencies) != 8:
            raise ValueError("need 8 detector efficiencies")
        for e in self.efficiencies:
            if not 0.0 < e <= 1.0:
                raise ValueError(f"efficiency out of (0,1]: {e}")

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls()

    @property
    def is_ideal(self) -> bool:
        return all(e == 1.0 for e in self.efficiencies)


@dataclass(frozen=True)
class LossBudget:
    """End-to-end loss budget entering the four-fold coincidence rate."""

    repetition_rate_hz: float = 79e6
    filling_factor: float = 0.67
    first_lens_brightness: float = 0.50
    eta_coupling: float = 0.29
    eta_demux: float = 0.75
    eta_chip: float = 0.54
    eta_detector: float = 0.65

    def __post_init__(self):
        if self.repetition_rate_hz <= 0:
            raise ValueError("repetition rate must be positive")
        for name in ("filling_factor", "first_lens_brightness", "eta_coupling",
                     "eta_demux", "eta_chip", "eta_detector"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} out of (0,1]: {v}")


def coincidence_rate(budget: LossBudget) -> float:
    """Four-fold coincidence rate: RR * FF * (per-photon transmission)^4 / 8."""
    per_photon = (budget.first_lens_brightness * budget.eta_coupling *
                  budget.eta_demux * budget.eta_chip * budget.eta_detector)
    return budget.repetition_rate_hz * budget.filling_factor * per_photon ** 4 / 8.0


def _occupations(n_photons: int, n_modes: int):
    """All output occupation vectors with the given photon total."""
    for combo in itertools.combinations_with_replacement(range(n_modes), n_photons):
        occ = [0] * n_modes
        for m in combo:
            occ[m] += 1
        yield tuple(occ)


def _group_distribution(u: np.ndarray, modes: tuple) -> dict:
    """Output occupation distribution for identical photons at ``modes``."""
    n_modes = u.shape[0]
    k = len(modes)
    if k == 1:
        col = u[:, modes[0]]
        return {tuple(1 if j == m else 0 for j in range(n_modes)): float(abs(col[m]) ** 2)
                for m in range(n_modes) if abs(col[m]) ** 2 > 0.0}
    cols = u[:, list(modes)]
    in_mult = defaultdict(int)
    for m in modes:
        in_mult[m] += 1
    t_fact = 1.0
    for c in in_mult.values():
        t_fact *= math.factorial(c)
    dist = {}
    for occ in _occupations(k, n_modes):
        rows = [j for j, c in enumerate(occ) for _ in range(c)]
        amp = permanent(cols[rows, :])
        s_fact = 1.0
        for c in occ:
            if c > 1:
                s_fact *= math.factorial(c)
        p = abs(amp) ** 2 / (s_fact * t_fact)
        if p > 0.0:
            dist[occ] = p
    return dist


def scatter_distribution(u: np.ndarray, photons, _group_cache: dict | None = None
                         ) -> dict:
    """Distribution over output occupations for labeled input photons.

    ``photons`` is a sequence of (input mode, internal label) pairs; photons
    with different labels do not interfere, so their group distributions are
    convolved.  An optional cache maps sorted input-mode tuples to group
    distributions so repeated label groups are scattered once per unitary.
    """
    u = np.asarray(u, dtype=complex)
    n_modes = u.shape[0]
    photons = tuple(photons)
    if not 1 <= len(photons) <= 8:
        raise ValueError("photon count must lie in 1..8")
    groups = defaultdict(list)
    for mode, label in photons:
        groups[label].append(mode)
    dist = {tuple([0] * n_modes): 1.0}
    for label in sorted(groups):
        modes = tuple(sorted(groups[label]))
        if _group_cache is not None and modes in _group_cache:
            gdist = _group_cache[modes]
        else:
            gdist = _group_distribution(u, modes)
            if _group_cache is not None:
                _group_cache[modes] = gdist
        new = defaultdict(float)
        for occ1, p1 in dist.items():
            for occ2, p2 in gdist.items():
                new[tuple(a + b for a, b in zip(occ1, occ2))] += p1 * p2
        dist = dict(new)
    return dist


def _thin_mode(count: int, eta: float):
    """Binomial survival outcomes (kept count, probability) for one mode."""
    if count == 0:
        return ((0, 1.0),)
    return tuple((m, math.comb(count, m) * eta ** m * (1.0 - eta) ** (count - m))
                 for m in range(count + 1))


def apply_detector_efficiency(dist: dict, det: DetectorModel) -> dict:
    """Independent binomial loss on each mode's occupation."""
    if det.is_ideal:
        return dist
    etas = det.efficiencies
    out = defaultdict(float)
    for occ, p in dist.items():
        branches = [(tuple(), 1.0)]
        for j, n in enumerate(occ):
            branches = [(kept + (m,), q * pm)
                        for kept, q in branches
                        for m, pm in _thin_mode(n, etas[j])]
        for kept, q in branches:
            out[kept] += p * q
    return dict(out)


def threshold_and_postselect(dist: dict) -> OutcomeDistribution:
    """Map occupations to qubit outcomes, discarding invalid click patterns.

    A pattern is valid when each mode pair holds exactly one clicked
    detector; the clicked rail sets the qubit value (upper = 0).
    """
    probs = np.zeros(16)
    discard = 0.0
    for occ, p in dist.items():
        n_pairs = len(occ) // 2
        value = 0
        valid = True
        for k in range(n_pairs):
            up = occ[2 * k] > 0
            down = occ[2 * k + 1] > 0
            if up == down:
                valid = False
                break
            value = (value << 1) | (1 if down else 0)
        if valid:
            probs[value] += p
        else:
            discard += p
    return OutcomeDistribution(probs=probs, discard_mass=discard)


def qubit_distribution(spec: SourceSpec, fractions: MasterFractions,
                       stage: PreparationStage, settings,
                       det: DetectorModel = DetectorModel.ideal(),
                       enumeration: JointInputEnumeration | None = None
                       ) -> OutcomeDistribution:
    """End-to-end outcome distribution for one measurement configuration.

    The weight that the input enumeration dropped (fewer than four photons,
    or negligible terms) is accounted to the discard mass, so the total
    probability including discards is one.
    """
    if enumeration is None:
        enumeration = enumerate_joint_inputs(spec, fractions)
    u = full_unitary(stage, settings)
    cache: dict = {}
    rows = np.zeros((max(len(enumeration.terms), 1), 17))
    for idx, term in enumerate(enumeration.terms):
        d = scatter_distribution(u, term.photons, _group_cache=cache)
        d = apply_detector_efficiency(d, det)
        od = threshold_and_postselect(d)
        rows[idx, :16] = term.weight * od.probs
        rows[idx, 16] = term.weight * od.discard_mass
    summed = rows.sum(axis=0)
    discard = summed[16] + (1.0 - enumeration.retained_weight)
    return OutcomeDistribution(probs=summed[:16], discard_mass=float(discard))


def sample_counts(dist: OutcomeDistribution, shots: int, seed) -> np.ndarray:
    """Multinomial draw of post-selected events from the conditional distribution."""
    if shots < 1:
        raise ValueError("shots must be positive")
    p = dist.conditional()
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, p / p.sum())
