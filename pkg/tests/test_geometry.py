import numpy as np
import pytest

from bwdam import linalg
from bwdam.errors import DimensionError, DomainError, NumericError
from bwdam.geometry import (
    AffineMap,
    CommutingFamily,
    GaussianMeasure,
    bures_w2,
    bures_w2_squared,
    dirac_w2_squared,
    geodesic,
    neg_log_l2_inner,
    ot_map,
    push_forward_affine,
    spectral_w2_squared,
)


def gauss1d(mu, var):
    return GaussianMeasure(mean=np.array([mu]), cov=np.array([[var]]))


def random_gaussian(rng, d, mean_scale=2.0, cond=20.0):
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    eigs = np.exp(rng.uniform(np.log(0.2), np.log(0.2 * cond), size=d))
    return GaussianMeasure(
        mean=mean_scale * rng.standard_normal(d), cov=(q * eigs) @ q.T
    )


class TestBuresDistance:
    def test_identical_measures(self):
        rng = np.random.default_rng(0)
        p = random_gaussian(rng, 4)
        assert bures_w2_squared(p, p) == pytest.approx(0.0, abs=1e-10)

    def test_equal_covariances_reduce_to_mean_gap(self):
        rng = np.random.default_rng(1)
        p = random_gaussian(rng, 3)
        q = GaussianMeasure(mean=p.mean + np.array([1.0, -2.0, 0.5]), cov=p.cov)
        assert bures_w2_squared(p, q) == pytest.approx(1.0 + 4.0 + 0.25, rel=1e-12)

    def test_one_dim_closed_form(self):
        # Independent oracle: (mu1-mu2)^2 + (sigma1-sigma2)^2 in one dimension.
        assert bures_w2_squared(gauss1d(0.0, 1.0), gauss1d(3.0, 4.0)) == pytest.approx(
            10.0, rel=1e-12
        )
        rng = np.random.default_rng(2)
        for _ in range(200):
            m1, m2 = rng.uniform(-5, 5, size=2)
            s1, s2 = rng.uniform(0.1, 3.0, size=2)
            expected = (m1 - m2) ** 2 + (s1 - s2) ** 2
            got = bures_w2_squared(gauss1d(m1, s1**2), gauss1d(m2, s2**2))
            assert got == pytest.approx(expected, abs=1e-10 * max(1.0, expected))

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        p = random_gaussian(rng, 5)
        q = random_gaussian(rng, 5)
        assert bures_w2_squared(p, q) == pytest.approx(
            bures_w2_squared(q, p), abs=1e-9
        )

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            d = int(rng.integers(1, 9))
            p, q, r = (random_gaussian(rng, d, cond=8.0) for _ in range(3))
            dpq, dqr, dpr = bures_w2(p, q), bures_w2(q, r), bures_w2(p, r)
            assert bures_w2(q, p) == pytest.approx(dpq, abs=1e-9)
            assert dpr <= dpq + dqr + 1e-8

    def test_dim_mismatch(self):
        rng = np.random.default_rng(5)
        with pytest.raises(DimensionError):
            bures_w2_squared(random_gaussian(rng, 2), random_gaussian(rng, 3))


class TestDiracDistance:
    def test_standard_normal(self):
        for d in (1, 3, 7):
            p = GaussianMeasure(mean=np.zeros(d), cov=np.eye(d))
            assert dirac_w2_squared(p) == pytest.approx(float(d), rel=1e-14)

    def test_split_budget_radius(self):
        # ||mu||^2 = R^2/2 and Tr(Sigma) = R^2/2 puts the measure on the sphere.
        r_sq = 8.0
        d = 4
        mean = np.full(d, np.sqrt(r_sq / 2.0 / d))
        cov = np.eye(d) * (r_sq / 2.0 / d)
        p = GaussianMeasure(mean=mean, cov=cov)
        assert dirac_w2_squared(p) == pytest.approx(r_sq, rel=1e-12)

    def test_small_epsilon_limit(self):
        rng = np.random.default_rng(6)
        p = random_gaussian(rng, 3)
        eps = 1e-8
        near_dirac = GaussianMeasure(mean=np.zeros(3), cov=eps * np.eye(3))
        assert bures_w2_squared(p, near_dirac) == pytest.approx(
            dirac_w2_squared(p), abs=1e-3
        )


class TestOtMap:
    def test_identity_when_equal(self):
        rng = np.random.default_rng(7)
        p = random_gaussian(rng, 4)
        t = ot_map(p, p)
        assert np.max(np.abs(t.matrix - np.eye(4))) <= 1e-9
        assert np.max(np.abs(t(p.mean) - p.mean)) <= 1e-9

    def test_pure_translation(self):
        mu = np.array([1.0, -2.0])
        p = GaussianMeasure(mean=np.zeros(2), cov=np.eye(2))
        q = GaussianMeasure(mean=mu, cov=np.eye(2))
        t = ot_map(p, q)
        assert np.allclose(t.matrix, np.eye(2), atol=1e-12)
        assert np.allclose(t.shift, mu, atol=1e-12)

    def test_pushforward_reaches_target(self):
        rng = np.random.default_rng(8)
        for d in (2, 4, 4):
            p = random_gaussian(rng, d)
            q = random_gaussian(rng, d)
            pushed = push_forward_affine(ot_map(p, q), p)
            assert np.max(np.abs(pushed.mean - q.mean)) <= 1e-7
            assert np.linalg.norm(pushed.cov - q.cov) <= 1e-7 * max(
                1.0, np.linalg.norm(q.cov)
            )

    def test_alternative_map_form_agrees(self):
        rng = np.random.default_rng(9)
        p = random_gaussian(rng, 4)
        q = random_gaussian(rng, 4)
        a_alg = ot_map(p, q).matrix
        sp, isp = linalg.spd_sqrt_invsqrt(p.cov)
        inner = linalg.spd_sqrt(linalg.symmetrize(sp @ q.cov @ sp))
        a_notation = isp @ inner @ isp
        assert np.max(np.abs(a_alg - a_notation)) <= 1e-8 * np.max(np.abs(a_alg))

    def test_round_trip_composition(self):
        rng = np.random.default_rng(10)
        p = random_gaussian(rng, 3)
        q = random_gaussian(rng, 3)
        back = push_forward_affine(ot_map(q, p), push_forward_affine(ot_map(p, q), p))
        assert bures_w2(p, back) <= 1e-6


class TestPushForward:
    def test_identity_map(self):
        rng = np.random.default_rng(11)
        p = random_gaussian(rng, 3)
        mapped = push_forward_affine(
            AffineMap(matrix=np.eye(3), shift=np.zeros(3)), p
        )
        assert np.allclose(mapped.mean, p.mean)
        assert np.allclose(mapped.cov, p.cov)

    def test_scaling(self):
        rng = np.random.default_rng(12)
        p = random_gaussian(rng, 2)
        mapped = push_forward_affine(
            AffineMap(matrix=2.0 * np.eye(2), shift=np.zeros(2)), p
        )
        assert np.allclose(mapped.mean, 2.0 * p.mean)
        assert np.allclose(mapped.cov, 4.0 * p.cov)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(13)
        c = rng.standard_normal((3, 3))
        shift = rng.standard_normal(3)
        p = GaussianMeasure(mean=np.zeros(3), cov=np.eye(3))
        mapped = push_forward_affine(AffineMap(matrix=c, shift=shift), p)
        samples = rng.standard_normal((1_000_000, 3)) @ c.T + shift
        emp_cov = np.cov(samples.T)
        assert np.max(np.abs(emp_cov - mapped.cov)) <= 1e-2 * max(
            1.0, np.max(np.abs(mapped.cov))
        )


class TestNegLogL2Inner:
    def test_one_dim_quadrature_oracle(self):
        # integral of phi(x)^2 over R equals 1/(2 sqrt(pi)).
        xs = np.linspace(-12.0, 12.0, 1_000_001)
        phi = np.exp(-0.5 * xs**2) / np.sqrt(2.0 * np.pi)
        integral = np.trapezoid(phi**2, xs)
        p = gauss1d(0.0, 1.0)
        assert neg_log_l2_inner(p, p) == pytest.approx(-np.log(integral), abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(14)
        p = random_gaussian(rng, 3)
        q = random_gaussian(rng, 3)
        assert neg_log_l2_inner(p, q) == pytest.approx(
            neg_log_l2_inner(q, p), abs=1e-9
        )

    def test_monotone_in_mean_gap(self):
        cov = np.diag([0.5, 1.5])
        base = GaussianMeasure(mean=np.zeros(2), cov=cov)
        vals = [
            neg_log_l2_inner(
                base, GaussianMeasure(mean=np.array([gap, 0.0]), cov=cov)
            )
            for gap in (0.0, 1.0, 2.0)
        ]
        assert vals[0] < vals[1] < vals[2]


class TestGeodesic:
    def test_endpoints(self):
        rng = np.random.default_rng(15)
        p = random_gaussian(rng, 3)
        q = random_gaussian(rng, 3)
        assert bures_w2(geodesic(p, q, 0.0), p) <= 1e-9
        assert bures_w2(geodesic(p, q, 1.0), q) <= 1e-9

    def test_commuting_eigenvalue_formula(self):
        # Closed form for commuting endpoints: ((1-t) + t sqrt(w2/w1))^2 w1.
        w1 = np.array([0.5, 2.0])
        w2 = np.array([1.5, 0.8])
        u = np.linalg.qr(np.random.default_rng(16).standard_normal((2, 2)))[0]
        p = GaussianMeasure(mean=np.zeros(2), cov=(u * w1) @ u.T)
        q = GaussianMeasure(mean=np.ones(2), cov=(u * w2) @ u.T)
        for t in (0.25, 0.5, 0.9):
            mid = geodesic(p, q, t)
            got = np.sort(np.linalg.eigvalsh((u.T @ mid.cov @ u)))
            expected = np.sort(((1 - t) + t * np.sqrt(w2 / w1)) ** 2 * w1)
            assert np.max(np.abs(np.diag(u.T @ mid.cov @ u) - ((1 - t) + t * np.sqrt(w2 / w1)) ** 2 * w1)) <= 1e-9
            assert np.max(np.abs(got - expected)) <= 1e-9

    def test_midpoint_metric_property(self):
        rng = np.random.default_rng(17)
        p = random_gaussian(rng, 4)
        q = random_gaussian(rng, 4)
        mid = geodesic(p, q, 0.5)
        assert bures_w2(p, mid) == pytest.approx(0.5 * bures_w2(p, q), abs=1e-7)

    def test_geodesic_cov_commutes_with_endpoints(self):
        rng = np.random.default_rng(18)
        u = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        p = GaussianMeasure(mean=np.zeros(3), cov=(u * [0.3, 1.0, 2.0]) @ u.T)
        q = GaussianMeasure(mean=np.ones(3), cov=(u * [1.1, 0.4, 0.9]) @ u.T)
        mid = geodesic(p, q, 0.3)
        for end in (p, q):
            comm = mid.cov @ end.cov - end.cov @ mid.cov
            assert np.linalg.norm(comm) <= 1e-8

    def test_domain_error(self):
        rng = np.random.default_rng(19)
        p = random_gaussian(rng, 2)
        q = random_gaussian(rng, 2)
        with pytest.raises(DomainError):
            geodesic(p, q, 1.5)


class TestCommutingFamily:
    def make_family(self, rng, n=6, d=4):
        u = np.linalg.qr(rng.standard_normal((d, d)))[0]
        spectra = rng.uniform(0.5, 2.0, size=(n, d))
        means = rng.standard_normal((n, d))
        return CommutingFamily(basis=u, spectra=spectra, means=means)

    def test_members_reconstruct(self):
        rng = np.random.default_rng(20)
        fam = self.make_family(rng)
        for i in range(fam.n):
            m = fam.member(i)
            w = np.sort(np.linalg.eigvalsh(m.cov))
            assert np.max(np.abs(w - np.sort(fam.spectra[i]))) <= 1e-9

    def test_fast_path_matches_dense(self):
        rng = np.random.default_rng(21)
        fam = self.make_family(rng, n=8, d=5)
        sq = np.sqrt(fam.spectra)
        mb = fam.means_in_basis
        for i in range(4):
            for j in range(4, 8):
                fast = spectral_w2_squared(mb[i], sq[i], mb[j], sq[j])
                dense = bures_w2_squared(fam.member(i), fam.member(j))
                assert fast == pytest.approx(dense, abs=1e-9 * max(1.0, dense))

    def test_coordinates_round_trip(self):
        rng = np.random.default_rng(22)
        fam = self.make_family(rng)
        p = fam.member(2)
        coords = fam.coordinates_of(p)
        assert coords is not None
        mean_b, spec = coords
        rebuilt = fam.measure_from_coordinates(mean_b, spec)
        assert bures_w2(p, rebuilt) <= 1e-9

    def test_non_member_detected(self):
        rng = np.random.default_rng(23)
        fam = self.make_family(rng)
        outsider = random_gaussian(rng, fam.dim)
        assert fam.coordinates_of(outsider) is None

    def test_rejects_non_orthogonal_basis(self):
        rng = np.random.default_rng(24)
        with pytest.raises(NumericError):
            CommutingFamily(
                basis=rng.standard_normal((3, 3)),
                spectra=np.ones((2, 3)),
                means=np.zeros((2, 3)),
            )
