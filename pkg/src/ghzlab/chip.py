"""Model of the reconfigurable photonic chip.

The chip has two stages acting on 8 spatial modes (two rails per qubit,
upper rail = |0>):

* a preparation stage -- four directional couplers on mode pairs (1,2),
  (3,4), (5,6), (7,8), a fixed network of waveguide crossings, and one
  static path phase per output mode;
* a measurement stage -- four thermally tuned Mach-Zehnder interferometers
  (MZI), one per qubit, each implementing a single-qubit projective
  measurement selected by two phases (alpha before the first coupler on the
  upper rail, phi between the arms).

The thermal phase shifters are driven by 16 resistors whose currents map
quadratically to the MZI phases through dense crosstalk matrices; this
module also provides the forward map and its power-minimizing inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import SolverError
from .qmath import PauliLabel

TWO_PI = 2.0 * math.pi

# Output mode k (top to bottom) receives post-coupler mode CROSSING[k]:
# three waveguide crossings swap the inner mode pairs.
CROSSING = (0, 2, 1, 4, 3, 6, 5, 7)

# Photons are launched one per coupler into the upper input ports.
INPUT_MODES = (0, 2, 4, 6)


def coupler(reflectivity: float) -> np.ndarray:
    """2x2 directional coupler: BAR amplitude sqrt(R), CROSS amplitude i*sqrt(1-R)."""
    r = float(reflectivity)
    if not 0.0 < r < 1.0:
        raise ValueError(f"reflectivity must lie in (0,1), got {r}")
    return np.array(
        [[math.sqrt(r), 1j * math.sqrt(1.0 - r)],
         [1j * math.sqrt(1.0 - r), math.sqrt(r)]],
        dtype=complex,
    )


def phase_on_upper(x: float) -> np.ndarray:
    return np.array([[np.exp(1j * x), 0.0], [0.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class PreparationStage:
    """Static preparation-stage parameters.

    ``path_phases`` are the optical phases (radians) accumulated on each of
    the 8 modes between the couplers and the measurement stage;
    ``reflectivities`` are the power fractions remaining in the BAR mode of
    the four couplers.
    """

    path_phases: tuple = (0.0,) * 8
    reflectivities: tuple = (0.5, 0.5, 0.5, 0.5)

    def __post_init__(self):
        if len(self.path_phases) != 8:
            raise ValueError("need 8 path phases")
        if len(self.reflectivities) != 4:
            raise ValueError("need 4 coupler reflectivities")
        for r in self.reflectivities:
            if not 0.0 < float(r) < 1.0:
                raise ValueError(f"reflectivity must lie in (0,1), got {r}")

    @property
    def phase_combination(self) -> float:
        """Signed sum th1-th2-th3+th4+th5-th6-th7+th8 of the path phases."""
        t = self.path_phases
        return t[0] - t[1] - t[2] + t[3] + t[4] - t[5] - t[6] + t[7]

    @property
    def state_phase(self) -> float:
        """Relative phase of |1010> vs |0101> in the post-selected state.

        Equals minus the path-phase combination, wrapped to (-pi, pi].
        """
        p = -self.phase_combination
        return float(np.angle(np.exp(1j * p)))

    @classmethod
    def with_state_phase(cls, theta: float,
                         reflectivities: Sequence[float] = (0.5, 0.5, 0.5, 0.5)
                         ) -> "PreparationStage":
        """Stage whose post-selected state is (|0101> + e^{i*theta}|1010>)/sqrt(2)."""
        phases = [0.0] * 8
        phases[1] = float(theta)
        return cls(path_phases=tuple(phases), reflectivities=tuple(reflectivities))


def preparation_unitary(stage: PreparationStage) -> np.ndarray:
    """8x8 scattering matrix of the preparation stage (couplers, crossings, phases)."""
    c = np.zeros((8, 8), dtype=complex)
    for k in range(4):
        c[2 * k:2 * k + 2, 2 * k:2 * k + 2] = coupler(stage.reflectivities[k])
    perm = np.zeros((8, 8), dtype=complex)
    for out, pc in enumerate(CROSSING):
        perm[out, pc] = 1.0
    phases = np.exp(1j * np.asarray(stage.path_phases, dtype=float))
    return (phases[:, None] * perm) @ c


@dataclass(frozen=True)
class MziSetting:
    """One MZI configuration: input phase alpha and internal phase phi (radians)."""

    alpha: float
    phi: float
    pauli: PauliLabel | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha) % TWO_PI)
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)


# Phase settings realizing each projective measurement; the +1 eigenstate
# cos(chi)|0> + e^{i*psi} sin(chi)|1> of the labeled operator exits on the
# upper output with probability one (validated in the test suite).
_PROJECTOR_TABLE = {
    PauliLabel.X: (0.0, math.pi / 2),
    PauliLabel.MINUS_X: (0.0, 3 * math.pi / 2),
    PauliLabel.Y: (math.pi / 2, math.pi / 2),
    PauliLabel.Z: (0.0, math.pi),
    PauliLabel.MINUS_Z: (0.0, 0.0),
    PauliLabel.XPZ: (0.0, 3 * math.pi / 4),
    PauliLabel.XMZ: (0.0, math.pi / 4),
}

# +1 eigenstates as (chi, psi) for the same rows.
PROJECTOR_EIGENSTATE = {
    PauliLabel.X: (math.pi / 4, 0.0),
    PauliLabel.MINUS_X: (-math.pi / 4, 0.0),
    PauliLabel.Y: (math.pi / 4, math.pi / 2),
    PauliLabel.Z: (0.0, 0.0),
    PauliLabel.MINUS_Z: (math.pi / 2, 0.0),
    PauliLabel.XPZ: (math.pi / 8, 0.0),
    PauliLabel.XMZ: (3 * math.pi / 8, 0.0),
}


def setting_for_projector(label: PauliLabel) -> MziSetting:
    if label not in _PROJECTOR_TABLE:
        raise ValueError(f"no MZI setting for label {label}")
    alpha, phi = _PROJECTOR_TABLE[label]
    return MziSetting(alpha=alpha, phi=phi, pauli=label)


def mzi_block(setting: MziSetting) -> np.ndarray:
    """2x2 transfer matrix: coupler . phi-shift . coupler . alpha-shift."""
    dc = coupler(0.5)
    return dc @ phase_on_upper(setting.phi) @ dc @ phase_on_upper(setting.alpha)


def measurement_unitary(settings: Sequence[MziSetting]) -> np.ndarray:
    """Block-diagonal 8x8 unitary of the four measurement MZIs."""
    if len(settings) != 4:
        raise ValueError("need one MZI setting per qubit")
    u = np.zeros((8, 8), dtype=complex)
    for k, s in enumerate(settings):
        u[2 * k:2 * k + 2, 2 * k:2 * k + 2] = mzi_block(s)
    return u


def full_unitary(stage: PreparationStage, settings: Sequence[MziSetting]) -> np.ndarray:
    return measurement_unitary(settings) @ preparation_unitary(stage)


# --------------------------------------------------------------------------
# Thermal phase-shifter network
# --------------------------------------------------------------------------

_ALPHA_MATRIX_KRAD = np.array([
    [53.031, -54.123, -10.807, -4.293, -2.302, -1.307, -1.000, -0.733],
    [2.915, 9.016, 49.504, -48.858, -9.342, -3.271, -1.604, -0.801],
    [1.094, 1.304, 4.330, 9.644, 51.987, -53.094, -11.325, -3.920],
    [0.828, 1.124, 1.604, 2.203, 4.162, 11.675, 54.696, -51.980],
])

_PHI_MATRIX_KRAD = np.array([
    [53.604, -52.942, -12.937, -4.535, -2.067, -1.504, 0.0, -0.730],
    [3.779, 10.918, 52.829, -54.752, -9.796, -3.963, 0.0, -1.201],
    [1.165, 1.870, 3.826, 11.283, 48.144, -54.833, 0.0, -3.791],
    [0.706, 0.926, 1.338, 2.199, 3.731, 11.630, 0.0, -52.863],
])

_PHI_OFFSET_RAD = np.array([3.8656, 2.838, 0.798, 0.990])


@dataclass(frozen=True)
class HeaterCalibration:
    """Current-to-phase calibration of the 16 thermal shifters.

    ``alpha_matrix`` / ``phi_matrix`` are 4x8 crosstalk matrices in krad/A^2
    mapping squared currents of resistors 1-8 (alpha phases) and 9-16 (phi
    phases); ``phi_offset`` is the zero-current phi vector in radians.
    Resistor numbering is 1-based; dead channels must carry no current.
    """

    alpha_matrix: np.ndarray = field(default_factory=lambda: _ALPHA_MATRIX_KRAD.copy())
    phi_matrix: np.ndarray = field(default_factory=lambda: _PHI_MATRIX_KRAD.copy())
    phi_offset: np.ndarray = field(default_factory=lambda: _PHI_OFFSET_RAD.copy())
    resistances: np.ndarray = field(default_factory=lambda: np.full(16, 420.0))
    dead_channels: frozenset = frozenset({15})

    def __post_init__(self):
        a = np.asarray(self.alpha_matrix, dtype=float)
        b = np.asarray(self.phi_matrix, dtype=float)
        r = np.asarray(self.resistances, dtype=float)
        if a.shape != (4, 8) or b.shape != (4, 8):
            raise ValueError("crosstalk matrices must be 4x8")
        if np.asarray(self.phi_offset, dtype=float).shape != (4,):
            raise ValueError("phi offset must have 4 entries")
        if r.shape != (16,):
            raise ValueError("need 16 resistances")
        if np.any(r < 400.0) or np.any(r > 440.0):
            raise ValueError("resistances out of the plausible 400-440 ohm range")
        object.__setattr__(self, "alpha_matrix", a)
        object.__setattr__(self, "phi_matrix", b)
        object.__setattr__(self, "phi_offset", np.asarray(self.phi_offset, dtype=float))
        object.__setattr__(self, "resistances", r)
        for ch in self.dead_channels:
            if not 1 <= ch <= 16:
                raise ValueError(f"dead channel {ch} out of range 1-16")
            if ch >= 9 and np.any(b[:, ch - 9] != 0.0):
                raise ValueError(f"dead channel {ch} has nonzero crosstalk column")
        for i in range(4):
            diag = {2 * i, 2 * i + 1}
            for m in (a, b):
                live = [abs(m[i, j]) for j in range(8)
                        if j not in diag and (m is a or (j + 9) not in self.dead_channels)]
                ref = [abs(m[i, j]) for j in diag
                       if m is a or (j + 9) not in self.dead_channels]
                if ref and live and max(live) >= min(ref):
                    raise ValueError(f"row {i + 1}: diagonal-block entries do not dominate")

    def dead_mask(self) -> np.ndarray:
        mask = np.zeros(16, dtype=bool)
        for ch in self.dead_channels:
            mask[ch - 1] = True
        return mask

    def to_text(self) -> str:
        lines = ["# heater calibration", "units krad/A^2 ; phases rad ; resistances ohm"]
        for row in self.alpha_matrix:
            lines.append("alpha_row " + " ".join(f"{v:.6g}" for v in row))
        for row in self.phi_matrix:
            lines.append("phi_row " + " ".join(f"{v:.6g}" for v in row))
        lines.append("phi_offset " + " ".join(f"{v:.6g}" for v in self.phi_offset))
        lines.append("resistances " + " ".join(f"{v:.6g}" for v in self.resistances))
        lines.append("dead_channels " + " ".join(str(c) for c in sorted(self.dead_channels)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "HeaterCalibration":
        alpha_rows, phi_rows = [], []
        offset = resist = None
        dead: frozenset = frozenset()
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("units"):
                continue
            key, *vals = line.split()
            if key == "alpha_row":
                alpha_rows.append([float(v) for v in vals])
            elif key == "phi_row":
                phi_rows.append([float(v) for v in vals])
            elif key == "phi_offset":
                offset = [float(v) for v in vals]
            elif key == "resistances":
                resist = [float(v) for v in vals]
            elif key == "dead_channels":
                dead = frozenset(int(v) for v in vals)
            else:
                raise ValueError(f"unknown key {key!r} in calibration file")
        if len(alpha_rows) != 4 or len(phi_rows) != 4 or offset is None or resist is None:
            raise ValueError("incomplete calibration file")
        return cls(alpha_matrix=np.array(alpha_rows), phi_matrix=np.array(phi_rows),
                   phi_offset=np.array(offset), resistances=np.array(resist),
                   dead_channels=dead)

    @classmethod
    def from_file(cls, path: str | Path) -> "HeaterCalibration":
        return cls.from_text(Path(path).read_text())


def heater_forward(cal: HeaterCalibration, currents: Sequence[float]
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Phases (alpha 4-vector, phi 4-vector) produced by the given currents (A)."""
    c = np.asarray(currents, dtype=float)
    if c.shape != (16,):
        raise ValueError("need 16 currents")
    if np.any(c < 0.0):
        raise ValueError("currents must be nonnegative")
    dead = cal.dead_mask()
    if np.any(c[dead] != 0.0):
        raise ValueError("nonzero current on a dead channel")
    sq = c ** 2
    alpha = 1e3 * cal.alpha_matrix @ sq[:8]
    phi = cal.phi_offset + 1e3 * cal.phi_matrix @ sq[8:]
    return alpha, phi


def _solve_block(matrix_krad: np.ndarray, base_rad: np.ndarray,
                 resistances: np.ndarray, usable: np.ndarray,
                 max_lift: int = 4) -> np.ndarray:
    """Power-minimal squared currents with M @ u = base + 2*pi*k, u >= 0.

    Searches every per-target lift combination k in {0..max_lift}^4 with a
    linear program minimizing sum(R_j * u_j), then polishes the winning
    support by least squares for machine-precision equality.
    """
    m = 1e3 * matrix_krad[:, usable]
    cost = resistances[usable]
    n = m.shape[1]
    best_u = None
    best_power = np.inf
    lifts = np.stack(np.meshgrid(*[np.arange(max_lift + 1)] * 4, indexing="ij"),
                     axis=-1).reshape(-1, 4)
    for k in lifts:
        b = base_rad + TWO_PI * k
        res = linprog(cost, A_eq=m, b_eq=b, bounds=[(0, None)] * n, method="highs")
        if not res.success:
            continue
        u = np.clip(res.x, 0.0, None)
        support = u > 1e-12
        if support.any():
            sol, *_ = np.linalg.lstsq(m[:, support], b, rcond=None)
            polished = np.zeros(n)
            polished[support] = np.clip(sol, 0.0, None)
            if np.all(sol >= -1e-12) and np.max(np.abs(m @ polished - b)) <= 1e-9:
                u = polished
        if np.max(np.abs(m @ u - b)) > 1e-7:
            continue
        power = float(cost @ u)
        if power < best_power - 1e-15:
            best_power = power
            best_u = u
    if best_u is None:
        raise SolverError("no nonnegative heater solution reaches the target phases")
    full = np.zeros(8)
    full[usable] = best_u
    return full


def heater_solve(cal: HeaterCalibration, alpha_target: Sequence[float],
                 phi_target: Sequence[float]) -> np.ndarray:
    """Currents (16-vector, A) realizing the target phases modulo 2*pi.

    Each target is lifted by the multiple of 2*pi that minimizes the total
    dissipated power; dead channels stay at zero.
    """
    at = np.asarray(alpha_target, dtype=float)
    pt = np.asarray(phi_target, dtype=float)
    if at.shape != (4,) or pt.shape != (4,):
        raise ValueError("need 4 alpha and 4 phi targets")
    if not (np.all(np.isfinite(at)) and np.all(np.isfinite(pt))):
        raise ValueError("targets must be finite")
    dead = cal.dead_mask()
    usable_a = ~dead[:8]
    usable_p = ~dead[8:]
    base_a = np.mod(at, TWO_PI)
    base_p = np.mod(pt - cal.phi_offset, TWO_PI)
    u_alpha = _solve_block(cal.alpha_matrix, base_a, cal.resistances[:8], usable_a)
    u_phi = _solve_block(cal.phi_matrix, base_p, cal.resistances[8:], usable_p)
    return np.sqrt(np.concatenate([u_alpha, u_phi]))


def compensate_setting(setting: MziSetting,
                       pair_efficiencies: tuple[float, float]) -> MziSetting:
    """Adjust phi so the efficiency-weighted detector balance matches the ideal one.

    The balance is probed the way the hardware is calibrated: classical
    light into the upper MZI input, whose upper-output fraction is
    sin^2(phi/2) and is insensitive to alpha.  With unequal detector
    efficiencies the observed balance is biased; the returned setting
    restores the original ideal balance exactly.
    """
    eta_up, eta_down = (float(e) for e in pair_efficiencies)
    if not (0.0 < eta_up <= 1.0 and 0.0 < eta_down <= 1.0):
        raise ValueError("efficiencies must lie in (0, 1]")
    if eta_up == eta_down:
        return setting
    s0 = math.sin(setting.phi / 2.0) ** 2
    s_adj = s0 * eta_down / (eta_up * (1.0 - s0) + eta_down * s0)
    phi_adj = 2.0 * math.asin(math.sqrt(min(max(s_adj, 0.0), 1.0)))
    if setting.phi > math.pi:
        phi_adj = TWO_PI - phi_adj
    return MziSetting(alpha=setting.alpha, phi=phi_adj, pauli=None)


def upper_click_probability(setting: MziSetting, state2: np.ndarray) -> float:
    """Probability that a single photon in ``state2`` exits on the upper output."""
    v = np.asarray(state2, dtype=complex).ravel()
    out = mzi_block(setting) @ v
    return float(abs(out[0]) ** 2)
