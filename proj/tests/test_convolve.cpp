#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>
#include <set>

#include "flaglab/convolve.hpp"

using namespace flaglab;

namespace {

Grid point_grid(int N) {
    Grid g;
    for (int j = 0; j < N; ++j) g.axes.push_back({1.0, 1});
    return g;
}

Eigen::VectorXd vec3(double a, double b, double c) {
    Eigen::VectorXd x(3);
    x << a, b, c;
    return x;
}

/// Invariant field applied to a numerically evaluable function via 4th-order
/// central differences on the Euclidean derivatives.
double field_fd(const GroupSpec& g, Side side, int k, const PointFn& u,
                const Eigen::VectorXd& x, double h = 0.01) {
    const auto& P = invariant_fields(g, side);
    auto d_axis = [&](int l) {
        Eigen::VectorXd xp = x;
        auto at = [&](double t) {
            xp[l] = x[l] + t;
            return u(xp);
        };
        return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    };
    double v = d_axis(k);
    for (int l = 0; l < g.N; ++l) {
        if (P[k][l].terms.empty()) continue;
        const double c = P[k][l].eval(x);
        if (c != 0.0) v += c * d_axis(l);
    }
    return v;
}

/// All-Gaussian-axes closed-form family on p; axes listed in `derivs` carry a
/// first derivative (mean zero), so listing one per block gives strong
/// cancellation and listing every axis gives it relative to any partition.
BumpFamily gh_family(const Partition& p, const std::set<int>& derivs) {
    BumpFamily fam;
    fam.p = p;
    fam.mode = CancellationMode::Strong;
    const int N = p.N();
    fam.gh = [N, derivs](const MultiIndex&) {
        std::vector<GH1D> axes;
        for (int j = 0; j < N; ++j)
            axes.push_back(derivs.count(j) ? GH1D::dgaussian(1, 1.0, 1.0)
                                           : GH1D::gaussian(1.0, 1.0));
        return GHTensor::product(axes, 1.0);
    };
    return fam;
}

} // namespace

TEST_CASE("abelian convolution matches closed forms") {
    const GroupSpec g = make_abelian(1, {Rational(1)});
    const GH1D f1 = GH1D::gaussian(0.5, 1.0);
    const GH1D h1 = GH1D::gaussian(0.7, 1.0);
    const GH1D exact = f1.conv(h1); // gaussian with summed variance
    const PointFn f = [&](const Eigen::VectorXd& x) { return f1(x[0]); };
    const PointFn h = [&](const Eigen::VectorXd& x) { return h1(x[0]); };
    const Grid quad = Grid::uniform(1, 6.0, 193);
    const Grid out = Grid::uniform(1, 4.0, 65);

    SUBCASE("gaussian * gaussian has summed variance") {
        const GridFunction c = convolve(g, f, h, quad, out);
        GridFunction diff = c, ref = c;
        for (long k = 0; k < out.total(); ++k) {
            const double e = exact(out.point(out.unflat(k))[0]);
            ref.values[k] = e;
            diff.values[k] = c.values[k] - e;
        }
        CHECK(l2_norm(diff) / l2_norm(ref) < 1e-6);
    }

    SUBCASE("direct and DFT lattice paths agree") {
        const GridFunction fs = sample(out, f);
        const GridFunction hs = sample(out, h);
        const GridFunction cd = convolve_abelian_direct(fs, hs);
        const GridFunction cf = convolve_abelian_dft(fs, hs);
        CHECK((cd.values - cf.values).cwiseAbs().maxCoeff() < 1e-12);
        double worst = 0.0;
        for (long k = 0; k < out.total(); ++k)
            worst = std::max(worst,
                             std::abs(cf.values[k] - exact(out.point(out.unflat(k))[0])));
        CHECK(worst < 1e-8);
    }

    SUBCASE("Richardson half-spacing check") {
        Eigen::VectorXd x(1);
        x << 0.8;
        const double c1 = convolve_at(g, f, h, quad, x);
        const double c2 = convolve_at(g, f, h, quad.refined(2), x);
        CHECK(std::abs(c1 - c2) < 1e-8);
    }
}

TEST_CASE("near-delta mollifier approximates the identity") {
    const GroupSpec g = make_abelian(1, {Rational(1)});
    const PointFn f = [](const Eigen::VectorXd& x) {
        return std::exp(-0.5 * x[0] * x[0]) * (1.0 + 0.5 * x[0]);
    };
    const GH1D delta = GH1D::gaussian(1.0 / 32.0, 1.0); // mass one
    const PointFn h = [&](const Eigen::VectorXd& x) { return delta(x[0]); };
    const Grid quad = Grid::uniform(1, 0.3, 257);
    for (double p : {-1.5, -0.5, 0.0, 0.7, 2.0}) {
        Eigen::VectorXd x(1);
        x << p;
        CHECK(std::abs(convolve_at(g, f, h, quad, x) - f(x)) < 1e-3);
    }
}

TEST_CASE("heisenberg convolution is noncommutative yet associative") {
    const GroupSpec g = make_heisenberg();
    const Partition p({2, 1});

    SUBCASE("generic asymmetric pair does not commute") {
        const BumpSpec fb =
            bump_gaussian(3, 0.8, Poly::constant(3, 1.0) + Poly::var(3, 0), p);
        const BumpSpec hb = bump_gaussian(3, 0.8, Poly::constant(3, 1.0), p);
        const Grid quad = Grid::uniform(3, 4.8, 25);
        const Eigen::VectorXd x = vec3(0.4, 0.3, 0.2);
        const double fh = convolve_at(g, fb.closure(), hb.closure(), quad, x);
        const double hf = convolve_at(g, hb.closure(), fb.closure(), quad, x);
        CHECK(std::abs(fh - hf) > 1e-4);
        CHECK(std::abs(fh) > 1e-3); // values are genuinely nonzero
    }

    SUBCASE("sampled associativity") {
        const BumpSpec fb =
            bump_gaussian(3, 0.5, Poly::constant(3, 1.0) + Poly::var(3, 0), p);
        const BumpSpec hb = bump_gaussian(3, 0.5, Poly::constant(3, 1.0), p);
        const BumpSpec wb =
            bump_gaussian(3, 0.5, Poly::constant(3, 1.0) + Poly::var(3, 1), p);
        const Grid quad = Grid::uniform(3, 4.0, 21);
        const Grid quad_wide = Grid::uniform(3, 5.0, 27);
        const Eigen::VectorXd x = vec3(0.3, -0.2, 0.25);

        const GridFunction fh = convolve(g, fb.closure(), hb.closure(), quad, point_grid(3));
        const double lhs = convolve_at(g, fh.gen, wb.closure(), quad, x);
        const GridFunction hw = convolve(g, hb.closure(), wb.closure(), quad, point_grid(3));
        const double rhs = convolve_at(g, fb.closure(), hw.gen, quad_wide, x);
        CHECK(std::abs(lhs - rhs) < 1e-6 * std::abs(lhs));
    }
}

TEST_CASE("invariant fields thread through convolution") {
    const GroupSpec g = make_heisenberg();
    const Partition p({2, 1});
    const BumpSpec fb = bump_gaussian(3, 0.8, Poly::constant(3, 1.0) + Poly::var(3, 0), p);
    const BumpSpec hb = bump_gaussian(3, 0.8, Poly::constant(3, 1.0) + Poly::var(3, 1), p);
    const Grid quad = Grid::uniform(3, 5.6, 31);
    const Eigen::VectorXd x = vec3(0.3, -0.4, 0.5);

    const GridFunction fh = convolve(g, fb.closure(), hb.closure(), quad, point_grid(3));
    for (int k = 0; k < 3; ++k) {
        CAPTURE(k);
        // X_k (f*h) = f * (X_k h) for the left-invariant field
        const double lhs1 = field_fd(g, Side::Left, k, fh.gen, x);
        const PointFn Xh = [&](const Eigen::VectorXd& y) {
            return field_apply(g, Side::Left, k, hb, y);
        };
        const double rhs1 = convolve_at(g, fb.closure(), Xh, quad, x);
        CHECK(std::abs(lhs1 - rhs1) < 1e-6 * (1.0 + std::abs(lhs1)));

        // Xt_k (f*h) = (Xt_k f) * h for the right-invariant field
        const double lhs2 = field_fd(g, Side::Right, k, fh.gen, x);
        const PointFn Xtf = [&](const Eigen::VectorXd& y) {
            return field_apply(g, Side::Right, k, fb, y);
        };
        const double rhs2 = convolve_at(g, Xtf, hb.closure(), quad, x);
        CHECK(std::abs(lhs2 - rhs2) < 1e-6 * (1.0 + std::abs(lhs2)));

        // (X_k f) * h = f * (Xt_k h): the mixed identity
        const PointFn Xf = [&](const Eigen::VectorXd& y) {
            return field_apply(g, Side::Left, k, fb, y);
        };
        const PointFn Xth = [&](const Eigen::VectorXd& y) {
            return field_apply(g, Side::Right, k, hb, y);
        };
        const double lhs3 = convolve_at(g, Xf, hb.closure(), quad, x);
        const double rhs3 = convolve_at(g, fb.closure(), Xth, quad, x);
        CHECK(std::abs(lhs3 - rhs3) < 1e-6 * (1.0 + std::abs(lhs3)));
    }
}

TEST_CASE("support lemma") {
    SUBCASE("abelian unit bumps: Minkowski radius 2") {
        const GroupSpec g = make_abelian(1, {Rational(1)});
        const BumpSpec phi = bump_compact(1, 1.0);
        const auto rep = verify_support_lemma(g, Partition({1}), phi, phi, {0}, {0}, 41, 41, 2);
        CHECK(rep.pass);
        CHECK(rep.rho == doctest::Approx(1.0));
        CHECK(rep.radius <= 2.0 + 1e-9);
        CHECK(rep.radius >= 1.5);
        CHECK(rep.C <= 2.1);
        CHECK(rep.seminorm_ratio > 0.0);
        CHECK(rep.seminorm_ratio < 100.0);
    }

    SUBCASE("heisenberg: C stable over 20 random pairs") {
        const GroupSpec g = make_heisenberg();
        const Partition p({2, 1});
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> wdist(0.6, 1.0), cdist(-0.5, 0.5);
        for (int t = 0; t < 20; ++t) {
            const Poly pre1 = Poly::constant(3, 1.0) + Poly::constant(3, cdist(rng)) * Poly::var(3, 0);
            const Poly pre2 = Poly::constant(3, 1.0) + Poly::constant(3, cdist(rng)) * Poly::var(3, 1);
            const BumpSpec phi = bump_compact(3, wdist(rng), pre1, p);
            const BumpSpec psi = bump_compact(3, wdist(rng), pre2, p);
            const auto rep = verify_support_lemma(g, p, phi, psi, {0, 0}, {0, 0}, 13, 13);
            CAPTURE(t);
            CHECK(rep.pass);
            CHECK(rep.C <= 4.0);
            CHECK(rep.C > 0.0);
        }
    }

    SUBCASE("undilated radius uniform over the index lattice") {
        const GroupSpec g = make_heisenberg();
        const Partition p({2, 1});
        const BumpSpec phi = bump_compact(3, 0.8, Poly::constant(3, 1.0) + Poly::var(3, 0), p);
        const BumpSpec psi = bump_compact(3, 0.9, Poly::constant(3, 1.0), p);
        std::vector<std::pair<MultiIndex, MultiIndex>> sweep = {
            {{0, 0}, {0, 0}}, {{0, 2}, {1, 1}}, {{-1, 1}, {0, 0}}, {{0, 3}, {1, 1}}};
        double rho = 0.0;
        for (const auto& [I, J] : sweep) {
            const auto rep = verify_support_lemma(g, p, phi, psi, I, J, 13, 13);
            rho = rep.rho;
            CAPTURE(I[0]);
            CAPTURE(J[0]);
            CHECK(rep.pass);
            CHECK(rep.radius <= 4.0 * rho); // stays within the measured C
            CHECK(rep.radius >= 0.5 * rho);
        }
    }
}

TEST_CASE("cross-scale decay of convolutions") {
    const GH1D dphi = GH1D::dgaussian(1, 1.0, 1.0);

    SUBCASE("derivative bumps decay with the oracle exponent") {
        const auto rep = verify_decay(dphi, dphi, 6, 6);
        CHECK(rep.pass);
        CHECK(rep.eps_hat >= 0.8);
        CHECK(rep.eps_hat <= 1.2);
        CHECK(rep.r2 > 0.9);
    }

    SUBCASE("diagonal entries are shift invariant") {
        const auto rep = verify_decay(dphi, dphi, 6, 6);
        double lo = 1e300, hi = -1e300;
        for (size_t t = 0; t < rep.gaps.size(); ++t)
            if (rep.gaps[t] == 0.0) {
                lo = std::min(lo, rep.lognorms[t]);
                hi = std::max(hi, rep.lognorms[t]);
            }
        CHECK(hi - lo < 1e-6);
    }

    SUBCASE("no-cancellation control shows no gain") {
        const GH1D gphi = GH1D::gaussian(1.0, 1.0);
        const auto rep = verify_decay(gphi, gphi, 6, 6);
        CHECK(std::abs(rep.eps_hat) < 0.15);
    }
}

TEST_CASE("truncated width arithmetic") {
    const GroupSpec g = make_abelian(2, {Rational(1), Rational(1)}, {1, 1});
    const Partition p({1, 1});
    // truncated kernel of width ~1: only nonnegative (coarse) indices
    BumpFamily fam = gh_family(p, {0, 1});
    std::vector<MultiIndex> window;
    for (int i1 = 0; i1 <= 6; ++i1)
        for (int i2 = i1; i2 <= 6; ++i2) window.push_back({i1, i2});
    const GHTensor K = synthesize_gh(fam, g.dil, window);
    const auto samples = shell_samples(g, 6, 7u, -3, 0);

    SUBCASE("unit case passes the width a+b check") {
        const auto rep = truncated_width_arithmetic(g, p, K, 1.0, {1.0}, samples);
        CHECK(rep.base.pass);
    }

    SUBCASE("improvement factor is linear in the mollifier width") {
        const auto rep = truncated_width_arithmetic(g, p, K, 1.0, {0.5, 0.25, 0.125}, samples);
        CHECK(rep.pass);
        CHECK(rep.linearity <= 0.20);
        CHECK(rep.factors[0] > rep.factors[1]);
        CHECK(rep.factors[1] > rep.factors[2]);
    }

    SUBCASE("delta-like mollifier recovers width a") {
        const GHTensor moll = GHTensor::product({GH1D::gaussian(1e-3), GH1D::gaussian(1e-3)});
        const GHTensor Kd = K.conv(moll);
        auto c0 = [&](const GHTensor& T) {
            double c = 0.0;
            for (const auto& x : samples)
                c = std::max(c, std::abs(T(x)) / flag_rhs(g, p, x, {0, 0}, 1.0, false));
            return c;
        };
        CHECK(c0(Kd) == doctest::Approx(c0(K)).epsilon(1e-2));
    }
}

TEST_CASE("Cotlar-Stein cross norm table") {
    const GroupSpec g = make_abelian(1, {Rational(1)});
    const BumpFamily fam = gh_family(Partition({1}), {0});

    SUBCASE("strong family: decay, bounded row sums, flat diagonal") {
        const auto tab = cross_norm_table(g, fam, monotone_window(1, 5));
        CHECK(tab.pass);
        CHECK(tab.eps_hat > 0.3);
        const int F = static_cast<int>(tab.window.size());
        double diag = tab.l1_tilde_first(0, 0);
        for (int i = 0; i < F; ++i) {
            CHECK(tab.l1_tilde_first(i, i) == doctest::Approx(diag).epsilon(1e-6));
            for (int j = 0; j < F; ++j) {
                CHECK(tab.l1_tilde_first(i, j) >= 0.0);
                CHECK(tab.l1_tilde_second(i, j) >= 0.0);
            }
        }
        CHECK(tab.max_row_sum <= 8.0 * std::sqrt(diag));
    }

    SUBCASE("no-cancellation control: row sums grow with the window") {
        BumpFamily flat = gh_family(Partition({1}), {});
        flat.mode = CancellationMode::None;
        const auto small = cross_norm_table(g, flat, monotone_window(1, 2));
        const auto large = cross_norm_table(g, flat, monotone_window(1, 5));
        CHECK(std::abs(large.eps_hat) < 0.05);
        CHECK(large.max_row_sum > 1.5 * small.max_row_sum);
    }

    SUBCASE("window guard") {
        CHECK_THROWS(cross_norm_table(g, fam, monotone_window(1, 100)));
    }
}

TEST_CASE("composition of kernel families") {
    std::vector<Eigen::VectorXd> probes1;
    for (double t : {0.2, 0.7, 1.5}) {
        Eigen::VectorXd x(1);
        x << t;
        probes1.push_back(x);
    }

    SUBCASE("free-index sums are Cauchy") {
        const GroupSpec g1 = make_abelian(1, {Rational(1)});
        const BumpFamily fam = gh_family(Partition({1}), {0});
        const auto classes = compose_kernels_abelian(g1, fam, fam, 2, 64, probes1);
        CHECK(classes.size() == 2);
        for (const auto& cls : classes) CHECK(cls.cauchy_rel < 1e-8);
    }

    const GroupSpec g5 =
        make_abelian(5, std::vector<Rational>(5, Rational(1)), {1, 1, 1, 1, 1});
    std::mt19937 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Eigen::VectorXd> probes5;
    for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd x(5);
        for (int j = 0; j < 5; ++j) x[j] = nd(rng);
        probes5.push_back(x);
    }

    SUBCASE("(2,3) x (1,2,2) produces exactly the five partitions") {
        const BumpFamily famA = gh_family(Partition({2, 3}), {0, 1, 2, 3, 4});
        const BumpFamily famB = gh_family(Partition({1, 2, 2}), {0, 1, 2, 3, 4});
        const auto samples = shell_samples(g5, 4, 5u, -2, 2);
        const auto classes = compose_kernels_abelian(g5, famA, famB, 2, 2, probes5, samples);
        CHECK(classes.size() == 10); // C(5,2) shuffle classes
        std::set<std::vector<int>> partitions;
        for (const auto& cls : classes) {
            partitions.insert(cls.pattern.decomposition.a);
            CHECK(cls.size.pass);
            // fully mean-zero factors: every block marginal vanishes exactly
            for (double ms : cls.marginal_sup) CHECK(ms == 0.0);
        }
        const std::set<std::vector<int>> expected = {
            {2, 3}, {1, 2, 2}, {1, 1, 3}, {2, 1, 2}, {1, 1, 1, 2}};
        CHECK(partitions == expected);
    }

    SUBCASE("same-partition composition stays on (2,3)") {
        const BumpFamily famA = gh_family(Partition({2, 3}), {0, 1, 2, 3, 4});
        const auto classes = compose_kernels_abelian(g5, famA, famA, 1, 0, probes5);
        CHECK(!classes.empty());
        for (const auto& cls : classes)
            CHECK(cls.pattern.decomposition == Partition({2, 3}));
    }

    SUBCASE("composed multiplier is the product of factor multipliers") {
        const BumpFamily famA = gh_family(Partition({2, 3}), {0, 1, 2, 3, 4});
        const BumpFamily famB = gh_family(Partition({1, 2, 2}), {0, 1, 2, 3, 4});
        const auto classes = compose_kernels_abelian(g5, famA, famB, 2, 0, probes5);
        const GHTensor mA = synthesize_gh(famA, g5.dil, monotone_window(2, 2));
        const GHTensor mB = synthesize_gh(famB, g5.dil, monotone_window(3, 2));
        std::mt19937 rng2(17);
        std::normal_distribution<double> xi(0.0, 1.5);
        for (int t = 0; t < 6; ++t) {
            Eigen::VectorXd f(5);
            for (int j = 0; j < 5; ++j) f[j] = xi(rng2);
            std::complex<double> composed = 0.0;
            for (const auto& cls : classes)
                for (const auto& [K, tensor] : cls.kernels) composed += tensor.fourier(f);
            const std::complex<double> oracle = mA.fourier(f) * mB.fourier(f);
            CHECK(std::abs(composed - oracle) < 1e-6 * (1.0 + std::abs(oracle)));
        }
    }

    SUBCASE("marginal witness detects a shared mean-free axis") {
        // both families strong per-block, but axis 1 carries no derivative in
        // either factor, so singleton merged blocks at axis 1 see mass
        const BumpFamily famA = gh_family(Partition({2, 3}), {0, 2});
        const BumpFamily famB = gh_family(Partition({1, 2, 2}), {0, 2, 4});
        const auto classes = compose_kernels_abelian(g5, famA, famB, 1, 0, probes5);
        double witness = 0.0;
        for (const auto& cls : classes) {
            const Partition& dec = cls.pattern.decomposition;
            for (int blk = 0; blk < dec.n(); ++blk)
                if (dec.a[blk] == 1 && dec.block_start(blk) == 1)
                    witness = std::max(witness, cls.marginal_sup[blk]);
        }
        CHECK(witness > 1e-6);
    }
}
