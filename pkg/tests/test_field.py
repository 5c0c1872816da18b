"""Meshes, fields, sampling, and L2 geometry."""
import math

import numpy as np
import pytest

from dirac_split import (FieldError, InitialProfile, Mesh, SpinorField,
                         l2_distance, l2_norm, restrict_to_coarse,
                         sample_initial_data, zero_field)


def random_field(rng, tau=0.25, j_min=-10, j_max=20, step=0):
    mesh = Mesh(tau, j_min, j_max)
    n = mesh.n_cells
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return SpinorField(mesh, u, v, step)


class TestMesh:
    def test_window_length(self):
        assert Mesh(0.5, -3, 4).n_cells == 8

    def test_rejects_bad_tau(self):
        with pytest.raises(FieldError):
            Mesh(0.0, 0, 1)
        with pytest.raises(FieldError):
            Mesh(-1.0, 0, 1)

    def test_rejects_empty_window(self):
        with pytest.raises(FieldError):
            Mesh(0.5, 2, 1)


class TestSpinorField:
    def test_rejects_length_mismatch(self):
        mesh = Mesh(0.5, 0, 3)
        with pytest.raises(FieldError):
            SpinorField(mesh, np.zeros(3, complex), np.zeros(4, complex))

    def test_rejects_nonfinite_with_cell_index(self):
        mesh = Mesh(0.5, 5, 7)
        u = np.array([0.0, np.nan, 0.0], complex)
        with pytest.raises(FieldError, match="cell 6"):
            SpinorField(mesh, u, np.zeros(3, complex))

    def test_immutable_and_decoupled_from_caller(self):
        mesh = Mesh(0.5, 0, 2)
        u = np.ones(3, complex)
        f = SpinorField(mesh, u, np.zeros(3, complex))
        u[0] = 99.0
        assert f.u[0] == 1.0
        with pytest.raises(ValueError):
            f.u[0] = 2.0

    def test_value_at_outside_window_is_zero(self):
        f = zero_field(Mesh(0.5, 0, 2))
        assert f.value_at(100) == (0j, 0j)


class TestSampleInitialData:
    def test_homogeneous_constant(self):
        prof = InitialProfile(kind="homogeneous", amplitude_u=1.0,
                              amplitude_v=0.0, x_lo=-1.0, x_hi=1.0)
        f = sample_initial_data(prof, Mesh(0.25, -4, 3), "point_sample")
        assert np.all(f.u == 1.0)
        assert np.all(f.v == 0.0)

    def test_delta_cell(self):
        prof = InitialProfile(kind="delta_cell", j0=0, amplitude_u=1.0)
        f = sample_initial_data(prof, Mesh(0.5, -3, 3), "point_sample")
        assert f.value_at(0) == (1.0, 0.0)
        assert np.count_nonzero(f.u) == 1
        assert np.count_nonzero(f.v) == 0

    def test_cell_average_of_constant_is_exact(self):
        prof = InitialProfile(kind="homogeneous", amplitude_u=0.7 + 0.2j,
                              amplitude_v=-0.1j, x_lo=-2.0, x_hi=2.0)
        f = sample_initial_data(prof, Mesh(0.5, -4, 3), "cell_average")
        assert np.all(f.u == 0.7 + 0.2j)
        assert np.all(f.v == -0.1j)

    def test_gaussian_cell_average_matches_quadrature(self):
        # oracle: midpoint quadrature with 10^4 points per cell
        prof = InitialProfile(kind="gaussian_packet", center=0.3, width=0.8,
                              amplitude_u=1.0 + 0.5j, amplitude_v=0.25)
        tau = 0.25
        mesh = Mesh(tau, -12, 12)
        f = sample_initial_data(prof, mesh, "cell_average")
        npts = 10_000
        for i, j in enumerate(range(mesh.j_min, mesh.j_max + 1)):
            x = (j + (np.arange(npts) + 0.5) / npts) * tau
            g = np.mean(np.exp(-((x - prof.center) ** 2)
                               / (2.0 * prof.width ** 2)))
            assert abs(f.u[i] - prof.amplitude_u * g) < 1e-9
            assert abs(f.v[i] - prof.amplitude_v * g) < 1e-9

    def test_gaussian_samplings_approach_each_other_under_refinement(self):
        prof = InitialProfile(kind="gaussian_packet", width=1.0,
                              amplitude_u=1.0)
        dists = []
        for tau in (0.5, 0.25):
            a = sample_initial_data(prof, prof.default_window(tau),
                                    "point_sample")
            b = sample_initial_data(prof, prof.default_window(tau),
                                    "cell_average")
            dists.append(l2_distance(a, b, 0))
        assert dists[1] < dists[0]

    def test_rejects_unknown_mode(self):
        prof = InitialProfile(kind="delta_cell")
        with pytest.raises(FieldError):
            sample_initial_data(prof, Mesh(0.5, 0, 1), "nearest")

    def test_deterministic(self):
        prof = InitialProfile(kind="gaussian_packet", width=0.7,
                              amplitude_u=0.3, amplitude_v=0.1j)
        mesh = Mesh(0.125, -40, 40)
        a = sample_initial_data(prof, mesh, "cell_average")
        b = sample_initial_data(prof, mesh, "cell_average")
        assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


class TestL2Norm:
    def test_zero_field(self):
        assert l2_norm(zero_field(Mesh(0.5, -2, 2))) == 0.0

    def test_single_cell(self):
        f = SpinorField(Mesh(0.25, 0, 0), [3.0 + 4.0j], [0.0])
        assert l2_norm(f) == pytest.approx(2.5, abs=0.0)

    def test_matches_compensated_summation_oracle(self):
        rng = np.random.default_rng(7)
        f = random_field(rng, j_min=0, j_max=999)
        terms = [abs(f.u[i]) ** 2 + abs(f.v[i]) ** 2
                 for i in range(f.mesh.n_cells)]
        expected = math.sqrt(math.fsum(terms) * f.tau)
        assert l2_norm(f) == pytest.approx(expected, rel=1e-14)


class TestL2Distance:
    def test_identity(self):
        rng = np.random.default_rng(3)
        f = random_field(rng)
        assert l2_distance(f, f, 0) == 0.0

    def test_delta_vs_zero(self):
        tau = 0.3
        f = SpinorField(Mesh(tau, 0, 0), [1.0], [0.0])
        z = zero_field(Mesh(tau, -5, 5))
        for mu in (-3, 0, 7):
            assert l2_distance(f, z, mu) == pytest.approx(math.sqrt(tau))

    def test_matches_constructed_difference(self):
        rng = np.random.default_rng(11)
        a = random_field(rng, j_min=-4, j_max=9)
        b = random_field(rng, j_min=-6, j_max=5)
        mu = 3
        j_lo, j_hi = -15, 20
        au, av = a.slab(j_lo + mu, j_hi + mu)
        bu, bv = b.slab(j_lo, j_hi)
        diff = SpinorField(Mesh(a.tau, j_lo, j_hi), au - bu, av - bv)
        assert l2_distance(a, b, mu) == pytest.approx(l2_norm(diff), rel=1e-14)

    def test_shift_symmetry(self):
        rng = np.random.default_rng(13)
        a = random_field(rng, j_min=-5, j_max=8)
        b = random_field(rng, j_min=0, j_max=12)
        for mu in (-4, -1, 0, 2, 9):
            assert l2_distance(a, b, mu) == pytest.approx(
                l2_distance(b, a, -mu), rel=1e-14)

    def test_rejects_tau_mismatch(self):
        a = zero_field(Mesh(0.5, 0, 1))
        b = zero_field(Mesh(0.25, 0, 1))
        with pytest.raises(FieldError):
            l2_distance(a, b, 0)


class TestRestrictToCoarse:
    def test_constant_pair(self):
        f = SpinorField(Mesh(0.5, 0, 1), [0.4j, 0.4j], [1.0, 1.0])
        c = restrict_to_coarse(f, 2)
        assert c.u[0] == 0.4j and c.v[0] == 1.0
        assert c.mesh.tau == 1.0

    def test_mean(self):
        f = SpinorField(Mesh(0.5, 0, 1), [1.0, 0.0], [0.0, 0.0])
        assert restrict_to_coarse(f, 2).u[0] == 0.5

    def test_projection_orthogonality(self):
        # <fine - coarse, 1> = 0 per coarse cell
        rng = np.random.default_rng(5)
        f = random_field(rng, j_min=0, j_max=23)
        c = restrict_to_coarse(f, 4)
        for J in range(c.mesh.n_cells):
            block = f.u[4 * J:4 * J + 4]
            assert abs(np.sum(block - c.u[J])) < 1e-12 * (1 + np.abs(block).max())

    def test_contraction(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            f = random_field(rng, j_min=0, j_max=29)
            assert l2_norm(restrict_to_coarse(f, 2)) <= l2_norm(f) + 1e-14

    def test_rejects_misaligned(self):
        f = zero_field(Mesh(0.5, 1, 4))
        with pytest.raises(FieldError):
            restrict_to_coarse(f, 2)


class TestInitialProfile:
    def test_rejects_unknown_kind(self):
        with pytest.raises(FieldError):
            InitialProfile(kind="square_wave")

    def test_rejects_nonpositive_width(self):
        with pytest.raises(FieldError):
            InitialProfile(kind="gaussian_packet", width=0.0)

    def test_table_length_check(self):
        with pytest.raises(FieldError):
            InitialProfile(kind="table", table_u=(1.0,), table_v=())

    def test_default_window_covers_support(self):
        prof = InitialProfile(kind="gaussian_packet", center=2.0, width=0.5)
        m = prof.default_window(0.25)
        assert m.j_min * 0.25 <= 2.0 - prof.support_radius
        assert (m.j_max + 1) * 0.25 >= 2.0 + prof.support_radius
