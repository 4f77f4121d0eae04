import itertools
import math

import numpy as np
import pytest

from ghzlab.errors import FitError
from ghzlab.simulator import scatter_distribution
from ghzlab.source import (MEASURED_PAIRS, MasterFractions, SourceSpec,
                           enumerate_joint_inputs, fit_master_fractions,
                           input_mixture, noise_label, overlap_bounds,
                           solve_pair_probabilities, subsidiary_label,
                           MASTER_LABEL)


class TestPairProbabilities:
    def test_zero_g2(self):
        p = solve_pair_probabilities(0.0)
        assert (p.p0, p.p1, p.p2) == (0.0, 1.0, 0.0)

    @pytest.mark.parametrize("g2", [0.005, 0.012, 0.1, 0.3])
    def test_solution_satisfies_definition(self, g2):
        p = solve_pair_probabilities(g2)
        assert p.p0 == 0.0
        assert p.p1 + p.p2 == pytest.approx(1.0, abs=1e-14)
        assert 0.0 <= p.p2 < 0.5
        assert 2 * p.p2 / (p.p1 + 2 * p.p2) ** 2 == pytest.approx(g2, abs=1e-12)

    def test_reference_values(self):
        # frozen from the closed-form root, checked by substitution above
        assert solve_pair_probabilities(0.005).p2 == pytest.approx(2.512579e-3, rel=1e-5)
        assert solve_pair_probabilities(0.012).p2 == pytest.approx(6.073098e-3, rel=1e-5)

    @pytest.mark.parametrize("g2", [-0.01, 0.5, 0.7])
    def test_range_rejected(self, g2):
        with pytest.raises(ValueError):
            solve_pair_probabilities(g2)


class TestMasterFractionFit:
    def test_symmetric_case(self):
        frac = fit_master_fractions({p: 0.81 for p in MEASURED_PAIRS})
        assert np.allclose(frac.x, 0.9, atol=1e-9)

    def test_all_ones(self):
        frac = fit_master_fractions({p: 1.0 for p in MEASURED_PAIRS})
        assert np.allclose(frac.x, 1.0, atol=1e-9)

    def test_balanced_truth_recovered(self):
        xt = (0.97, 0.95, 0.99, 0.95 * 0.99 / 0.97)  # satisfies xA*xD = xB*xC
        m = {"AB": xt[0] * xt[1], "AC": xt[0] * xt[2],
             "BD": xt[1] * xt[3], "CD": xt[2] * xt[3]}
        frac = fit_master_fractions(m)
        assert max(abs(a - b) for a, b in zip(frac.x, xt)) < 1e-6

    def test_measured_products_recovered_for_any_truth(self):
        # the four measured products are identifiable even when the
        # underlying fractions are not
        xt = (0.97, 0.95, 0.99, 0.96)
        m = {"AB": xt[0] * xt[1], "AC": xt[0] * xt[2],
             "BD": xt[1] * xt[3], "CD": xt[2] * xt[3]}
        frac = fit_master_fractions(m)
        x = frac.x
        pairs = {"AB": x[0] * x[1], "AC": x[0] * x[2],
                 "BD": x[1] * x[3], "CD": x[2] * x[3]}
        for key in MEASURED_PAIRS:
            assert pairs[key] == pytest.approx(m[key], abs=1e-6)
        assert x[0] * x[3] == pytest.approx(x[1] * x[2], abs=1e-6)

    def test_deterministic(self, measured_overlaps_default):
        a = fit_master_fractions(measured_overlaps_default)
        b = fit_master_fractions(measured_overlaps_default)
        assert a.x == b.x

    def test_invalid_overlaps(self):
        with pytest.raises(FitError):
            fit_master_fractions({"AB": 1.2, "AC": 0.9, "BD": 0.9, "CD": 0.9})
        with pytest.raises(FitError):
            fit_master_fractions({"AB": 0.9, "AC": 0.9})


class TestOverlapBounds:
    def test_all_ones_collapse(self):
        (bc_lo, bc_hi), (ad_lo, ad_hi) = overlap_bounds(
            {p: 1.0 for p in MEASURED_PAIRS})
        assert bc_lo == pytest.approx(1.0, abs=5e-6)
        assert bc_hi == pytest.approx(1.0, abs=5e-6)
        assert ad_lo == pytest.approx(1.0, abs=5e-6)

    def test_symmetric_case_full_range(self):
        # frozen from a dense-grid search over x in [0,1]^4: every point of
        # the family (0.9t, 0.9/t, 0.9/t, 0.9t) reproduces all measured
        # products exactly, so the unmeasured products span [0.81^2, 1]
        (bc_lo, bc_hi), (ad_lo, ad_hi) = overlap_bounds(
            {p: 0.81 for p in MEASURED_PAIRS})
        assert bc_lo == pytest.approx(0.6561, abs=1e-4)
        assert bc_hi == pytest.approx(1.0, abs=1e-4)
        assert ad_lo == pytest.approx(0.6561, abs=1e-4)
        assert ad_hi == pytest.approx(1.0, abs=1e-4)

    def test_grid_oracle_agreement_symmetric(self):
        g = np.linspace(0.0, 1.0, 81, dtype=np.float32)
        xa, xb, xc, xd = np.meshgrid(g, g, g, g, indexing="ij", sparse=True)
        f = ((xa * xb - 0.81) ** 2 + (xa * xc - 0.81) ** 2 +
             (xb * xd - 0.81) ** 2 + (xc * xd - 0.81) ** 2)
        near = f <= f.min() + 1e-5
        bc = np.broadcast_to(xb * xc, f.shape)[near]
        (bc_lo, bc_hi), _ = overlap_bounds({p: 0.81 for p in MEASURED_PAIRS})
        assert bc_lo <= bc.min() + 0.02
        assert bc_hi >= bc.max() - 0.02

    def test_default_overlaps_nonempty_and_contain_fit(self, measured_overlaps_default,
                                                   fitted_fractions):
        (bc_lo, bc_hi), (ad_lo, ad_hi) = overlap_bounds(measured_overlaps_default)
        x = fitted_fractions.x
        assert bc_lo <= x[1] * x[2] <= bc_hi
        assert ad_lo <= x[0] * x[3] <= ad_hi
        assert 0.0 < bc_lo < bc_hi <= 1.0


class TestInputMixture:
    def test_perfect_source_single_term(self):
        spec = SourceSpec.ideal()
        terms = input_mixture(spec, MasterFractions.perfect(), 0)
        live = [(w, labels) for w, labels in terms if w > 0]
        assert live == [(1.0, (MASTER_LABEL,))]

    def test_zero_eta_means_vacuum(self):
        spec = SourceSpec(g2=0.005, eta=1e-12)
        terms = input_mixture(spec, MasterFractions.perfect(), 0)
        weights = {labels: w for w, labels in terms}
        assert weights[()] == pytest.approx(1.0, abs=1e-10)

    def test_default_parameters_weights(self):
        spec = SourceSpec()
        frac = MasterFractions(x=(0.95, 0.95, 0.95, 0.95))
        terms = input_mixture(spec, frac, 0)
        weights = [w for w, _ in terms]
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)
        p = solve_pair_probabilities(spec.g2)
        expected_master = (spec.eta * 0.95 * p.p1 +
                           spec.eta * (1 - spec.eta) * 0.95 * p.p2)
        assert weights[1] == pytest.approx(expected_master, rel=1e-12)

    def test_normalized_over_random_parameters(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            spec = SourceSpec(g2=rng.uniform(0, 0.4), eta=rng.uniform(0.01, 1.0),
                              measured_overlaps={p: 0.9 for p in MEASURED_PAIRS},
                              distinguishability_scale=tuple(rng.uniform(0, 1, 4)))
            frac = MasterFractions(x=tuple(rng.uniform(0, 1, 4)))
            for i in range(4):
                terms = input_mixture(spec, frac, i)
                assert all(w >= -1e-15 for w, _ in terms)
                assert sum(w for w, _ in terms) == pytest.approx(1.0, abs=1e-12)

    def test_distinguishability_scale_moves_weight(self):
        spec = SourceSpec(distinguishability_scale=(0.0, 1.0, 1.0, 1.0))
        frac = MasterFractions.perfect()
        terms = input_mixture(spec, frac, 0)
        weights = {labels: w for w, labels in terms}
        assert weights[(MASTER_LABEL,)] == pytest.approx(0.0, abs=1e-15)
        assert weights[(subsidiary_label(0),)] > 0.0


class TestEnumeration:
    def test_ideal_source_single_term(self):
        enum = enumerate_joint_inputs(SourceSpec.ideal(), MasterFractions.perfect())
        assert len(enum.terms) == 1
        term = enum.terms[0]
        assert term.weight == pytest.approx(1.0)
        assert term.photons == ((0, 0), (2, 0), (4, 0), (6, 0))
        assert enum.retained_weight == pytest.approx(1.0)

    def test_no_multiphoton_gives_sixteen_label_terms(self):
        spec = SourceSpec(g2=0.0, eta=0.5,
                          measured_overlaps={p: 0.81 for p in MEASURED_PAIRS})
        enum = enumerate_joint_inputs(spec, MasterFractions(x=(0.9,) * 4))
        assert len(enum.terms) == 16
        for term in enum.terms:
            assert len(term.photons) == 4
            assert all(lab in (MASTER_LABEL, subsidiary_label(i))
                       for i, (mode, lab) in enumerate(term.photons))

    def test_raw_and_filtered_counts(self):
        spec = SourceSpec()
        enum = enumerate_joint_inputs(spec, MasterFractions(x=(0.95,) * 4))
        assert enum.raw_term_count == 6 ** 4 == 1296
        assert enum.photon_filtered_count == 1041

    def test_retained_weight_matches_terms(self, noise_ctx):
        enum = enumerate_joint_inputs(noise_ctx.spec, noise_ctx.fractions)
        assert enum.retained_weight == pytest.approx(
            sum(t.weight for t in enum.terms), abs=1e-15)
        assert enum.retained_weight < 1.0

    def test_weight_pruning_threshold(self):
        spec = SourceSpec()
        frac = MasterFractions(x=(0.95,) * 4)
        enum = enumerate_joint_inputs(spec, frac, weight_cutoff=1e-8)
        w_max = max(t.weight for t in enum.terms)
        assert all(t.weight >= 1e-8 * w_max for t in enum.terms)
        loose = enumerate_joint_inputs(spec, frac, weight_cutoff=0.0)
        assert len(loose.terms) == 1041
        assert len(enum.terms) < len(loose.terms)


def _hom_coincidence(spec, fractions, i, j):
    """P(both detectors click) for inputs i, j through a balanced coupler."""
    dc = np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2)
    mixtures = (input_mixture(spec, fractions, i), input_mixture(spec, fractions, j))
    total = 0.0
    for (wa, la), (wb, lb) in itertools.product(*mixtures):
        w = wa * wb
        if w <= 0.0 or (not la and not lb):
            continue
        photons = [(0, lab) for lab in la] + [(1, lab) for lab in lb]
        dist = scatter_distribution(dc, photons)
        total += w * sum(p for occ, p in dist.items() if occ[0] > 0 and occ[1] > 0)
    return total


class TestHomConsistency:
    def test_pure_single_photons_reproduce_overlap(self):
        # no multiphoton noise: visibility equals the pairwise product x_i*x_j
        frac = MasterFractions(x=(0.97, 0.90, 0.95, 0.92))
        spec = SourceSpec(g2=0.0, eta=0.3,
                          measured_overlaps={p: 0.9 for p in MEASURED_PAIRS})
        blind = SourceSpec(g2=0.0, eta=0.3,
                           measured_overlaps={p: 0.9 for p in MEASURED_PAIRS},
                           distinguishability_scale=(0.0,) * 4)
        for (i, j) in ((0, 1), (0, 2), (1, 3), (2, 3)):
            c_ind = _hom_coincidence(spec, frac, i, j)
            c_dist = _hom_coincidence(blind, frac, i, j)
            visibility = 1.0 - c_ind / c_dist
            assert visibility == pytest.approx(frac.x[i] * frac.x[j], abs=1e-9)

    def test_multiphoton_noise_lowers_visibility(self):
        frac = MasterFractions(x=(0.96,) * 4)
        clean = SourceSpec(g2=0.0, eta=0.039,
                           measured_overlaps={p: 0.9 for p in MEASURED_PAIRS})
        noisy = SourceSpec(g2=0.01, eta=0.039,
                           measured_overlaps={p: 0.9 for p in MEASURED_PAIRS})
        blind = SourceSpec(g2=0.0, eta=0.039,
                           measured_overlaps={p: 0.9 for p in MEASURED_PAIRS},
                           distinguishability_scale=(0.0,) * 4)
        c_dist = _hom_coincidence(blind, frac, 0, 1)
        v_clean = 1.0 - _hom_coincidence(clean, frac, 0, 1) / c_dist
        v_noisy = 1.0 - _hom_coincidence(noisy, frac, 0, 1) / c_dist
        assert v_noisy < v_clean
        assert v_clean == pytest.approx(frac.x[0] * frac.x[1], abs=1e-9)

    def test_blinding_one_photon_zeroes_its_overlaps_only(self):
        frac = MasterFractions(x=(0.97, 0.90, 0.95, 0.92))
        base = dict(g2=0.0, eta=0.3,
                    measured_overlaps={p: 0.9 for p in MEASURED_PAIRS})
        spec = SourceSpec(**base, distinguishability_scale=(1, 1, 0, 1))
        blind = SourceSpec(**base, distinguishability_scale=(0,) * 4)
        for (i, j) in ((0, 2), (2, 3)):  # pairs involving photon C
            v = 1 - _hom_coincidence(spec, frac, i, j) / _hom_coincidence(blind, frac, i, j)
            assert v == pytest.approx(0.0, abs=1e-9)
        for (i, j) in ((0, 1), (1, 3)):  # pairs without photon C
            v = 1 - _hom_coincidence(spec, frac, i, j) / _hom_coincidence(blind, frac, i, j)
            assert v == pytest.approx(frac.x[i] * frac.x[j], abs=1e-9)
