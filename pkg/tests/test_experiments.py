"""Refinement, perturbation, and benchmark studies."""
import math

import numpy as np
import pytest

from dirac_split import (InitialProfile, OdeOptions, SchemeParams, StudyError,
                         convergence_study, homogeneous_benchmark, oracle_flow,
                         perturbation_study, special_case_suite)

FREE = SchemeParams(0.0, 0.0, 0.0)
GENERAL = SchemeParams(1.0, 1.0, 0.5)

SMALL_GAUSSIAN = InitialProfile(kind="gaussian_packet", width=1.0,
                                amplitude_u=0.02, amplitude_v=0.012j)


class TestConvergenceStudy:
    def test_pure_transport_grid_aligned_data_is_exact(self):
        # indicator data aligned to the coarsest grid is represented exactly
        # at every level; transport is exact, so all Cauchy distances vanish
        prof = InitialProfile(kind="homogeneous", amplitude_u=0.5,
                              amplitude_v=0.25j, x_lo=-1.0, x_hi=1.0)
        table = convergence_study(prof, FREE, 1.0, 0, 2, OdeOptions())
        assert all(r["dist"] == 0.0 for r in table.rows)

    def test_refinement_ladder_contracts(self):
        prof = InitialProfile(kind="gaussian_packet", width=1.0,
                              amplitude_u=0.2, amplitude_v=0.1j)
        table = convergence_study(prof, GENERAL, 0.5, 3, 6,
                                  OdeOptions(substeps_per_tau=4))
        dists = [r["dist"] for r in table.rows]
        assert all(b < a for a, b in zip(dists, dists[1:]))

    def test_csv_shape(self, tmp_path):
        prof = InitialProfile(kind="gaussian_packet", width=1.0,
                              amplitude_u=0.1)
        table = convergence_study(prof, FREE, 0.5, 2, 4, OdeOptions())
        table.write_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "k,tau,dist,ratio"
        assert len(lines) == 3

    def test_cell_cap_guard(self):
        prof = InitialProfile(kind="gaussian_packet", width=1.0)
        with pytest.raises(StudyError):
            convergence_study(prof, FREE, 1.0, 2, 12, OdeOptions(),
                              cell_cap=1000)

    def test_rejects_bad_levels(self):
        prof = InitialProfile(kind="gaussian_packet", width=1.0)
        with pytest.raises(StudyError):
            convergence_study(prof, FREE, 1.0, 3, 3, OdeOptions())


class TestPerturbationStudy:
    def test_zero_scale(self):
        rep = perturbation_study(SMALL_GAUSSIAN, SMALL_GAUSSIAN, 0.0,
                                 GENERAL, 0.25, 1 / 8, OdeOptions())
        assert rep["sup_sq_distance"] == 0.0
        assert rep["pass"]

    def test_transport_distance_constant_in_time(self):
        from dirac_split import (Mesh, SpinorField, l2_distance, run,
                                 sample_initial_data)
        tau = 1 / 8
        mesh = SMALL_GAUSSIAN.default_window(tau)
        a = sample_initial_data(SMALL_GAUSSIAN, mesh)
        b = SpinorField(mesh, a.u * 1.001, a.v, 0)
        ha = run(a, FREE, 8, OdeOptions())
        hb = run(b, FREE, 8, OdeOptions())
        d0 = l2_distance(ha.frames[0], hb.frames[0], 0)
        for n in range(9):
            assert l2_distance(ha.frames[n], hb.frames[n], 0) == \
                pytest.approx(d0, rel=1e-12)

    def test_exponential_bound_holds(self):
        rep = perturbation_study(SMALL_GAUSSIAN, SMALL_GAUSSIAN, 1e-3,
                                 GENERAL, 0.5, 1 / 16, OdeOptions())
        assert rep["hypothesis_ok"]
        assert rep["pass"]
        assert rep["margin"] > 0

    def test_small_scale_linearity(self):
        # distance is ~ degree-1 homogeneous in the perturbation scale
        dists = {}
        for s in (5e-5, 1e-4):
            rep = perturbation_study(SMALL_GAUSSIAN, SMALL_GAUSSIAN, s,
                                     GENERAL, 0.25, 1 / 8, OdeOptions())
            dists[s] = math.sqrt(rep["sup_sq_distance"])
        ratio = dists[1e-4] / dists[5e-5]
        assert 1.8 <= ratio <= 2.2

    def test_rejects_negative_scale(self):
        with pytest.raises(StudyError):
            perturbation_study(SMALL_GAUSSIAN, SMALL_GAUSSIAN, -1.0,
                               GENERAL, 0.25, 1 / 8, OdeOptions())


class TestHomogeneousBenchmark:
    def test_zero_params_exact(self):
        assert homogeneous_benchmark(FREE, 0.5, 1 / 16, OdeOptions()) == 0.0

    def test_mass_rotation_quarter_turn(self):
        # interior value after T = pi/2 is (0, i) for data (1, 0)
        p = SchemeParams(1.0, 0.0, 0.0)
        T = math.pi / 2
        err = homogeneous_benchmark(p, T, T / 16, OdeOptions(),
                                    u0=1.0, v0=0.0)
        assert err <= 1e-8
        u, v = oracle_flow(1.0, 0.0, p, T, 100_000)
        assert abs(u) < 1e-12 and abs(v - 1j) < 1e-12

    def test_general_regime_error_small(self):
        err = homogeneous_benchmark(GENERAL, 1.0, 1 / 32,
                                    OdeOptions(substeps_per_tau=64))
        assert err <= 1e-8

    def test_rejects_non_multiple_T(self):
        with pytest.raises(StudyError):
            homogeneous_benchmark(GENERAL, 0.3, 0.25, OdeOptions())


class TestSpecialCaseSuite:
    def test_deterministic(self):
        a = special_case_suite(OdeOptions(), n_cases=12, oracle_substeps=500)
        b = special_case_suite(OdeOptions(), n_cases=12, oracle_substeps=500)
        assert a == b

    def test_zero_regime_exact(self):
        rep = special_case_suite(OdeOptions(), n_cases=20, oracle_substeps=500)
        assert rep["zero"] == 0.0

    def test_closed_form_regimes_tight(self):
        rep = special_case_suite(OdeOptions(), n_cases=40,
                                 oracle_substeps=10_000)
        assert rep["mass_rotation"] <= 1e-10
        assert rep["thirring_phase"] <= 1e-10
        assert rep["closed_vs_substep"] <= 1e-10

    def test_general_regime_at_k64(self):
        rep = special_case_suite(OdeOptions(substeps_per_tau=64),
                                 n_cases=40, oracle_substeps=10_000)
        assert rep["general"] <= 1e-9
