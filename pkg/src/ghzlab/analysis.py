"""State characterization from measured (or simulated) count records.

Conventions: outcome bit 0 means the upper detector clicked, which is the
+1 eigenstate of the labeled operator at that party's MZI setting.  The
raw product expectation therefore refers to the *labeled* operators; the
`expectation` function flips the contribution of negated labels (-X, -Z)
so that it always returns the expectation of the unsigned Pauli product,
and the witness / inequality evaluators reapply the operator signs where
their definitions need them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import FitError
from .qmath import (PauliLabel, SQRT2, check_density_matrix,
                    project_to_physical)

TOMOGRAPHY_BASES = (PauliLabel.X, PauliLabel.Y, PauliLabel.Z)

# Two-qubit Pauli projectors used for the phase witness and the inequality:
# party 1 measures (X+Z)/sqrt2 or (X-Z)/sqrt2, party 3 measures X or Z, and
# parties 2 and 4 measure -X or -Z.
M0 = (PauliLabel.XPZ, PauliLabel.MINUS_X, PauliLabel.X, PauliLabel.MINUS_X)
M1 = (PauliLabel.XMZ, PauliLabel.MINUS_Z, PauliLabel.Z, PauliLabel.MINUS_Z)

PHASE_WITNESS_SETTINGS = M0


@dataclass
class MeasurementRecord:
    """Counts (or exact probabilities) of the 16 outcomes at one setting."""

    settings: tuple
    counts: np.ndarray

    def __post_init__(self):
        self.settings = tuple(self.settings)
        if len(self.settings) != 4:
            raise ValueError("need one label per party")
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (16,):
            raise ValueError("need 16 outcome counts")
        if np.any(self.counts < 0.0):
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        t = self.total
        if t <= 0.0:
            raise ValueError("record has zero total counts")
        return self.counts / t


_BITS = np.array([[(k >> (3 - i)) & 1 for i in range(4)] for k in range(16)])


def expectation(record: MeasurementRecord, identity_mask=None) -> float:
    """Product expectation over the non-masked parties.

    Outcome 0 contributes +1 and outcome 1 contributes -1 per party;
    negated labels flip their party's contribution, so the result is the
    expectation of the product of unsigned operators.  Masked parties (and
    parties labeled I) contribute +1 regardless, which traces them out.
    """
    p = record.probabilities()
    if identity_mask is None:
        identity_mask = tuple(lab is PauliLabel.I for lab in record.settings)
    signs = np.ones(16)
    for i, (lab, masked) in enumerate(zip(record.settings, identity_mask)):
        if masked or lab is PauliLabel.I:
            continue
        contrib = 1.0 - 2.0 * _BITS[:, i]
        if lab.sign < 0:
            contrib = -contrib
        signs = signs * contrib
    return float(p @ signs)


def _signed_expectation(record: MeasurementRecord) -> float:
    """Expectation of the product of the labeled operators, signs included."""
    sign = 1
    for lab in record.settings:
        if lab is not PauliLabel.I:
            sign *= lab.sign
    return sign * expectation(record)


def phase_witness(record: MeasurementRecord) -> float:
    """Four-party phase witness <M0 M0 M0 M0>; equals cos(theta)/sqrt(2) ideally."""
    if record.settings != PHASE_WITNESS_SETTINGS:
        raise ValueError("phase witness requires the M0 projector settings")
    return _signed_expectation(record)


@dataclass(frozen=True)
class PhaseScanFit:
    amplitude: float
    rad_per_unit: float
    phase_offset: float
    power_at_max: float


def fit_phase_scan(points) -> PhaseScanFit:
    """Fit witness-vs-power data with A*cos(a*P + b).

    The heater phase is linear in electrical power, so a cosine in power
    captures the scan; the returned ``power_at_max`` is the fitted-cosine
    argmax closest to the middle of the scanned range.
    """
    pts = [(float(p), float(w)) for p, w in points]
    if len(pts) < 5:
        raise FitError("need at least 5 scan points")
    power = np.array([p for p, _ in pts])
    wit = np.array([w for _, w in pts])
    if np.ptp(wit) < 1e-12:
        raise FitError("degenerate scan: witness does not vary")

    def model(p, amp, a, b):
        return amp * np.cos(a * p + b)

    span = np.ptp(power)
    amp0 = max(np.ptp(wit) / 2.0, 1e-6)
    best = None
    for periods in (0.5, 1.0, 1.5, 2.0, 3.0):
        a0 = 2.0 * math.pi * periods / span
        for b0 in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
            try:
                popt, _ = curve_fit(model, power, wit, p0=[amp0, a0, b0], maxfev=5000)
            except RuntimeError:
                continue
            resid = float(np.sum((model(power, *popt) - wit) ** 2))
            if best is None or resid < best[0] - 1e-15:
                best = (resid, popt)
    if best is None:
        raise FitError("cosine fit did not converge")
    amp, a, b = best[1]
    if amp < 0.0:
        amp, b = -amp, b + math.pi
    if a < 0.0:
        a, b = -a, -b
    mid = float(power.mean())
    k = round((a * mid + b) / (2.0 * math.pi))
    p_max = (2.0 * math.pi * k - b) / a
    return PhaseScanFit(amplitude=float(amp), rad_per_unit=float(a),
                        phase_offset=float(b), power_at_max=float(p_max))


@dataclass(frozen=True)
class WitnessResult:
    value: float
    fidelity_lower_bound: float
    g1_expectation: float
    stabilizer_indicator: float


def stabilizer_witness(record_x: MeasurementRecord,
                       record_z: MeasurementRecord) -> WitnessResult:
    """Stabilizer witness from the two records X^4 and Z^4.

    W = 3 - 2*[ (<XXXX>+1)/2 + P(alternating Z outcomes) ]; a negative
    value certifies entanglement and bounds the fidelity from below by
    (1 - W)/2.
    """
    if record_x.settings != (PauliLabel.X,) * 4:
        raise ValueError("first record must be measured at X on all parties")
    if record_z.settings != (PauliLabel.Z,) * 4:
        raise ValueError("second record must be measured at Z on all parties")
    g1 = expectation(record_x)
    pz = record_z.probabilities()
    indicator = float(pz[0b0101] + pz[0b1010])
    w = 3.0 - 2.0 * ((g1 + 1.0) / 2.0 + indicator)
    return WitnessResult(value=w, fidelity_lower_bound=(1.0 - w) / 2.0,
                         g1_expectation=g1, stabilizer_indicator=indicator)


def bell_settings() -> tuple:
    """The eight measurement settings of the inequality, identity parties as I."""
    I = PauliLabel.I
    return (
        (M1[0], M1[1], I, I),
        (M1[0], I, M1[2], I),
        (M1[0], I, I, M1[3]),
        (M0[0], M1[1], I, I),
        (M0[0], I, M1[2], I),
        (M0[0], I, I, M1[3]),
        (M0[0], M0[1], M0[2], M0[3]),
        (M1[0], M0[1], M0[2], M0[3]),
    )


@dataclass(frozen=True)
class BellResult:
    value: float
    expectations: tuple
    standard_error: float


def bell_value(records) -> BellResult:
    """Bell-like inequality value from the eight settings of `bell_settings`.

    I^2 = sum_i <M0(1) M1(i)> - sum_i <M1(1) M1(i)>
          + 3 <M0 M0 M0 M0> + 3 <M1 M0 M0 M0>,  classically bounded by 6.
    The standard error propagates per-record multinomial shot noise;
    exact-probability records (total <= 1) contribute none.
    """
    records = list(records)
    expected = bell_settings()
    if len(records) != 8:
        raise ValueError("need 8 records")
    for rec, setting in zip(records, expected):
        if tuple(rec.settings) != setting:
            raise ValueError(
                f"record settings {tuple(s.token for s in rec.settings)} do not match "
                f"required {tuple(s.token for s in setting)}")
    e = [_signed_expectation(rec) for rec in records]
    coeff = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0, 3.0])
    value = float(coeff @ np.array(e))
    var = 0.0
    for c, rec, ev in zip(coeff, records, e):
        n = rec.total
        if n > 1.0:
            var += c ** 2 * max(1.0 - ev ** 2, 0.0) / n
    return BellResult(value=value, expectations=tuple(e),
                      standard_error=math.sqrt(var))


def tomography_settings() -> list:
    """All 81 basis tuples (X,Y,Z per party), lexicographic with x < y < z."""
    return [tuple(combo) for combo in itertools.product(TOMOGRAPHY_BASES, repeat=4)]


@dataclass
class TomographySet:
    records: list

    def __post_init__(self):
        settings = [tuple(r.settings) for r in self.records]
        expected = tomography_settings()
        if sorted(settings, key=str) != sorted(expected, key=str):
            raise ValueError("tomography set must contain each of the 81 settings once")
        self._by_setting = {tuple(r.settings): r for r in self.records}

    def record(self, settings) -> MeasurementRecord:
        return self._by_setting[tuple(settings)]

    def map_counts(self, fn) -> "TomographySet":
        return TomographySet([MeasurementRecord(r.settings, fn(r.counts))
                              for r in self.records])

    def to_json_dict(self) -> dict:
        return {"records": [{"settings": [s.token.lower() for s in r.settings],
                             "counts": [float(c) for c in r.counts]}
                            for r in self.records]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "TomographySet":
        recs = [MeasurementRecord(tuple(PauliLabel.from_token(t) for t in item["settings"]),
                                  np.asarray(item["counts"], dtype=float))
                for item in data["records"]]
        return cls(recs)


def linear_inversion(ts: TomographySet) -> np.ndarray:
    """Pauli reconstruction rho = (1/16) sum <P> P over all 256 Pauli strings.

    Expectations of strings containing identities are averaged over every
    compatible record with those parties masked.  The output is Hermitian
    with unit trace but may have negative eigenvalues.
    """
    labels = (PauliLabel.I,) + TOMOGRAPHY_BASES
    rho = np.zeros((16, 16), dtype=complex)
    single = {lab: lab.matrix for lab in labels}
    for string in itertools.product(labels, repeat=4):
        mask = tuple(lab is PauliLabel.I for lab in string)
        compatible = [rec for rec in ts.records
                      if all(m or rec.settings[i] is string[i]
                             for i, m in enumerate(mask))]
        ev = float(np.mean([expectation(rec, identity_mask=mask)
                            for rec in compatible]))
        op = single[string[0]]
        for lab in string[1:]:
            op = np.kron(op, single[lab])
        rho += ev * op
    return rho / 16.0


_EIG_PLUS = {
    PauliLabel.X: np.array([1.0, 1.0]) / SQRT2,
    PauliLabel.Y: np.array([1.0, 1.0j]) / SQRT2,
    PauliLabel.Z: np.array([1.0, 0.0], dtype=complex),
}
_EIG_MINUS = {
    PauliLabel.X: np.array([1.0, -1.0]) / SQRT2,
    PauliLabel.Y: np.array([1.0, -1.0j]) / SQRT2,
    PauliLabel.Z: np.array([0.0, 1.0], dtype=complex),
}


def _projector_vectors(ts: TomographySet) -> tuple[np.ndarray, np.ndarray]:
    """Stacked projector kets (16 x 1296) and counts (1296,) for the MLE."""
    vecs = []
    counts = []
    for rec in ts.records:
        for outcome in range(16):
            v = np.array([1.0], dtype=complex)
            for i, lab in enumerate(rec.settings):
                bit = (outcome >> (3 - i)) & 1
                v = np.kron(v, _EIG_MINUS[lab] if bit else _EIG_PLUS[lab])
            vecs.append(v)
            counts.append(rec.counts[outcome])
    return np.array(vecs).T, np.array(counts)


@dataclass
class MleResult:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool


def _log_likelihood(counts: np.ndarray, q: np.ndarray, s: float) -> float:
    active = counts > 0.0
    if np.any(q[active] <= 0.0):
        return -np.inf
    return float(counts[active] @ np.log(q[active])) - float(counts.sum()) * math.log(s)


def mle_reconstruct(ts: TomographySet, max_iterations: int = 5000,
                    rel_tol: float = 1e-10) -> MleResult:
    """Maximum-likelihood density matrix from a complete tomography set.

    The state is parametrized as rho = T T^dag / Tr(T T^dag) with T lower
    triangular (256 real parameters), which keeps every iterate physical.
    The multinomial log-likelihood is maximized by gradient ascent with a
    backtracking line search; the gradient with respect to conj(T) is

        sum_k (n_k / q_k) v_k (v_k^dag T)  -  (N / S) T,

    masked to the lower triangle, where q_k = |T^dag v_k|^2 are
    unnormalized outcome weights and S = Tr(T T^dag).  Iteration stops
    when the relative likelihood gain drops below ``rel_tol``.
    """
    v, counts = _projector_vectors(ts)
    n_total = counts.sum()
    if n_total <= 0.0:
        raise ValueError("tomography set has no counts")

    rho0 = project_to_physical(linear_inversion(ts))
    w, vec = np.linalg.eigh(rho0)
    w = np.clip(w, 1e-8, None)
    w /= w.sum()
    rho0 = (vec * w) @ vec.conj().T
    t = np.linalg.cholesky(rho0)

    def stats(tmat):
        wv = tmat.conj().T @ v
        q = np.einsum("ij,ij->j", wv.conj(), wv).real
        s = float(np.einsum("ij,ij->", tmat.conj(), tmat).real)
        return wv, q, s

    wv, q, s = stats(t)
    ll = _log_likelihood(counts, q, s)
    step = 1.0
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(q > 0.0, counts / q, 0.0)
        grad = (v * ratio[None, :]) @ wv.conj().T - (n_total / s) * t
        grad = np.tril(grad)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            converged = True
            break
        scale = np.linalg.norm(t) / gnorm
        improved = False
        for _ in range(60):
            t_new = t + step * scale * grad
            wv_new, q_new, s_new = stats(t_new)
            ll_new = _log_likelihood(counts, q_new, s_new)
            if ll_new > ll:
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
        gain = ll_new - ll
        t, wv, q, s, ll = t_new, wv_new, q_new, s_new, ll_new
        step = min(step * 1.3, 16.0)
        if gain <= rel_tol * abs(ll):
            converged = True
            break
    rho = t @ t.conj().T
    rho /= np.trace(rho).real
    rho = (rho + rho.conj().T) / 2.0
    return MleResult(rho=check_density_matrix(rho, eig_tol=1e-9),
                     log_likelihood=ll, iterations=iteration, converged=converged)


def mle_log_likelihood(ts: TomographySet, rho: np.ndarray) -> float:
    """Multinomial log-likelihood of a density matrix for a tomography set."""
    v, counts = _projector_vectors(ts)
    p = np.einsum("ik,ij,jk->k", v.conj(), rho, v).real
    active = counts > 0.0
    if np.any(p[active] <= 0.0):
        return -np.inf
    return float(counts[active] @ np.log(p[active]))


def monte_carlo_error(ts: TomographySet, statistic, n_resamples: int, seed) -> float:
    """Standard deviation of a statistic under Poisson count resampling."""
    if n_resamples < 2:
        raise ValueError("need at least 2 resamples")
    children = np.random.SeedSequence(seed).spawn(n_resamples)
    values = []
    for child in children:
        rng = np.random.default_rng(child)
        resampled = ts.map_counts(lambda c: rng.poisson(c).astype(float))
        values.append(float(statistic(resampled)))
    return float(np.std(values, ddof=1))


def max_fidelity_over_phase(rho: np.ndarray) -> tuple[float, float]:
    """Best fidelity to the one-parameter target family and its phase.

    F(theta) = (rho_55 + rho_AA)/2 + Re(e^{i theta} rho_5A) over the two
    alternating basis states; the coherence phase gives the argmax in
    closed form, with theta = 0 on zero coherence.
    """
    r = np.asarray(rho, dtype=complex)
    if r.shape != (16, 16):
        raise ValueError("need a 16x16 density matrix")
    coh = complex(r[0b0101, 0b1010])
    diag = (r[0b0101, 0b0101].real + r[0b1010, 0b1010].real) / 2.0
    if abs(coh) < 1e-15:
        return 0.0, float(diag)
    theta = float(-np.angle(coh))
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    return theta, float(diag + abs(coh))
