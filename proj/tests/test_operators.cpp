#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "flaglab/operators.hpp"

using namespace flaglab;

namespace {

Eigen::VectorXd vec1(double a) {
    Eigen::VectorXd x(1);
    x << a;
    return x;
}

Eigen::VectorXd vec3(double a, double b, double c) {
    Eigen::VectorXd x(3);
    x << a, b, c;
    return x;
}

/// One-dimensional flag kernel truncated to the window |i| <= w: a sum of
/// mean-zero dilates of the derivative Gaussian.
GH1D flag_kernel_1d(int w) {
    GH1D K;
    for (int i = -w; i <= w; ++i) K = K + GH1D::dgaussian(1, 1.0, 1.0).dilate(1.0, i);
    return K;
}

std::vector<Eigen::VectorXd> singleton_tuples(const std::vector<double>& ts) {
    std::vector<Eigen::VectorXd> out;
    for (double t : ts) out.push_back(vec1(t));
    return out;
}

} // namespace

TEST_CASE("maximal function basics on abelian groups") {
    const GroupSpec g1 = make_abelian(1, {Rational(1)}, {1});
    const Partition p1({1});

    SUBCASE("acceptable tuples are the monotone lattice points") {
        CHECK(acceptable_scales(1, 0, 2).size() == 3);
        CHECK(acceptable_scales(2, 0, 2).size() == 6); // C(3+1, 2)
        for (const auto& s : acceptable_scales(3, -1, 1))
            for (int k = 0; k + 1 < 3; ++k) CHECK(s[k] <= s[k + 1]);
        CHECK(acceptable_scales(2, -2, 2, 2).size() == 45); // 9 refined values
        CHECK_THROWS(acceptable_scales(0, 0, 1));
    }

    SUBCASE("unit rectangle indicator averages to one at the origin") {
        const PointFn ind = [](const Eigen::VectorXd& x) {
            return std::abs(x[0]) <= 1.0 ? 1.0 : 0.0;
        };
        const auto sg = acceptable_scales(1, -2, 2);
        const double m = maximal_at(g1, p1, ind, sg, vec1(0.0), 101);
        CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
        // sup over all scales never exceeds the sup of the data
        CHECK(maximal_at(g1, p1, ind, sg, vec1(0.7), 101) <= 1.0 + 1e-12);
    }

    SUBCASE("positive homogeneity and sublinearity") {
        const GH1D f1 = GH1D::dgaussian(1, 1.0);
        const GH1D f2 = GH1D::gaussian(0.7);
        const PointFn a = [&](const Eigen::VectorXd& x) { return f1(x[0]); };
        const PointFn b = [&](const Eigen::VectorXd& x) { return f2(x[0]); };
        const PointFn sum = [&](const Eigen::VectorXd& x) { return f1(x[0]) + f2(x[0]); };
        const PointFn scaled = [&](const Eigen::VectorXd& x) { return 3.7 * f1(x[0]); };
        const auto sg = acceptable_scales(1, -3, 3);
        for (double x : {0.0, 0.8, -1.6}) {
            const double ma = maximal_at(g1, p1, a, sg, vec1(x), 201);
            const double mb = maximal_at(g1, p1, b, sg, vec1(x), 201);
            CHECK(maximal_at(g1, p1, scaled, sg, vec1(x), 201) ==
                  doctest::Approx(3.7 * ma).epsilon(1e-12));
            CHECK(maximal_at(g1, p1, sum, sg, vec1(x), 201) <= ma + mb + 1e-12);
        }
    }

    SUBCASE("line case matches the closed-form interval-average oracle") {
        const GH1D f1 = GH1D::gaussian(1.0);
        const PointFn f = [&](const Eigen::VectorXd& x) { return f1(x[0]); };
        auto cdf = [](double u) { return 0.5 * (1.0 + std::erf(u / std::sqrt(2.0))); };
        const std::vector<double> ss = {0.25, 0.5, 1.0, 2.0, 4.0};
        for (double x : {0.3, -1.2}) {
            double oracle = 0.0;
            for (double s : ss)
                oracle = std::max(oracle, (cdf(x + s) - cdf(x - s)) / (2.0 * s));
            const double m = maximal_at(g1, p1, f, singleton_tuples(ss), vec1(x), 800001);
            CHECK(m == doctest::Approx(oracle).epsilon(1e-10));
        }
    }

    SUBCASE("argument validation") {
        const PointFn z = [](const Eigen::VectorXd&) { return 0.0; };
        Eigen::VectorXd bad(2);
        bad << 1.0, 2.0;
        CHECK_THROWS(rectangle_average(g1, p1, z, bad, vec1(0.0), 9));
    }
}

TEST_CASE("lifted maximal functions and the composition bound") {
    const GroupSpec gh = make_heisenberg();
    const Partition p2({2, 1});
    const PointFn bump = [](const Eigen::VectorXd& x) {
        return std::exp(-0.5 * x.squaredNorm());
    };

    SUBCASE("last-block lifted maximal matches the one-dimensional slice") {
        // B^(2)(rho) only moves x3, and x . (0,0,u)^{-1} = (x1, x2, x3 - u)
        const Eigen::VectorXd x = vec3(0.4, -0.3, 0.2);
        const std::vector<double> rhos = {0.5, 1.0, 2.0};
        const int nodes = 201;
        double manual = 0.0;
        for (double rho : rhos) {
            const double half = rho * rho; // d_3 = 2
            double acc = 0.0;
            for (int i = 0; i < nodes; ++i) {
                const double u = half * (-1.0 + (2.0 * i + 1.0) / nodes);
                acc += std::abs(bump(vec3(x[0], x[1], x[2] - u)));
            }
            manual = std::max(manual, acc / nodes);
        }
        CHECK(lifted_maximal_at(gh, p2, bump, 1, rhos, x, nodes) ==
              doctest::Approx(manual).epsilon(1e-12));
    }

    SUBCASE("lifted maximal of the last block preserves earlier independence") {
        const PointFn f23 = [](const Eigen::VectorXd& x) {
            return std::exp(-0.5 * (x[1] * x[1] + x[2] * x[2]));
        };
        const std::vector<double> rhos = {0.5, 1.0, 2.0};
        const double a = lifted_maximal_at(gh, p2, f23, 1, rhos, vec3(0.4, 0.3, -0.6), 101);
        const double b = lifted_maximal_at(gh, p2, f23, 1, rhos, vec3(-1.1, 0.3, -0.6), 101);
        CHECK(a == doctest::Approx(b).epsilon(1e-13));
    }

    SUBCASE("single-block composition bound is an identity") {
        const GroupSpec g1 = make_abelian(1, {Rational(1)}, {1});
        const PointFn f = [](const Eigen::VectorXd& x) { return std::exp(-0.5 * x[0] * x[0]); };
        const auto rep = verify_composition_bound(g1, Partition({1}), f,
                                                  {vec1(0.0), vec1(0.7), vec1(-1.4)}, -3, 3, 51);
        CHECK(rep.pass);
        CHECK(rep.C == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rep.refined_C == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("constant data gives ratio one") {
        const PointFn one = [](const Eigen::VectorXd&) { return 1.0; };
        const auto rep =
            verify_composition_bound(gh, p2, one, {vec3(0.2, -0.1, 0.3)}, -2, 1, 5);
        CHECK(rep.pass);
        CHECK(rep.C == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("heisenberg sweep: bounded constant, stable under refinement") {
        std::mt19937 rng(21);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        std::vector<Eigen::VectorXd> xs;
        for (int i = 0; i < 50; ++i) xs.push_back(vec3(u(rng), u(rng), u(rng)));
        const auto rep = verify_composition_bound(gh, p2, bump, xs, -3, 2, 7);
        CHECK(rep.pass);
        CHECK(rep.C > 0.5);
        CHECK(rep.C < 100.0);
    }

    SUBCASE("iterated fixed-radius ball averages stay below the maximal function") {
        const auto sg = acceptable_scales(2, -3, 3);
        for (const auto& s : {std::pair{0.5, 1.0}, std::pair{1.0, 2.0}}) {
            for (const auto& x : {vec3(0.0, 0.0, 0.0), vec3(0.5, -0.4, 0.3)}) {
                const PointFn inner = [&](const Eigen::VectorXd& z) {
                    return lifted_maximal_at(gh, p2, bump, 0, {s.first}, z, 9);
                };
                const double iterated = lifted_maximal_at(gh, p2, inner, 1, {s.second}, x, 9);
                const double m = maximal_at(gh, p2, bump, sg, x, 9);
                CHECK(iterated <= 10.0 * std::max(m, 1e-300));
                CHECK(std::isfinite(iterated));
            }
        }
    }
}

TEST_CASE("comparison function gamma") {
    const GroupSpec g1 = make_abelian(1, {Rational(1)}, {1});
    const Partition p1({1});
    const GroupSpec gh = make_heisenberg();
    const Partition p2({2, 1});

    SUBCASE("line closed form") {
        CHECK(gamma_fn(g1, p1, vec1(1.0), vec1(1.0)) == doctest::Approx(0.25).epsilon(1e-15));
        // at the origin the formula collapses to t prod (tsum)^{-Q_k-1}
        CHECK(gamma_fn(g1, p1, vec1(2.0), vec1(0.0)) ==
              doctest::Approx(2.0 / std::pow(2.0, 2.0)).epsilon(1e-15));
        Eigen::VectorXd t(2);
        t << 0.5, 2.0;
        const double q1 = 2.0, q2 = 2.0; // heisenberg block dimensions
        const double manual =
            0.5 * 2.0 * std::pow(0.5, -(q1 + 1.0)) * std::pow(2.5, -(q2 + 1.0));
        CHECK(gamma_fn(gh, p2, t, vec3(0.0, 0.0, 0.0)) ==
              doctest::Approx(manual).epsilon(1e-14));
    }

    SUBCASE("joint homogeneity") {
        const double Q = 4.0; // heisenberg homogeneous dimension
        Eigen::VectorXd t(2);
        t << 0.7, 1.9;
        const Eigen::VectorXd x = vec3(0.3, -0.8, 0.5);
        for (double r : {0.5, 3.0}) {
            Eigen::VectorXd rt = r * t;
            const double lhs = gamma_fn(gh, p2, rt, dilate(gh, r, x));
            const double rhs = std::pow(r, -Q) * gamma_fn(gh, p2, t, x);
            CHECK(std::abs(lhs / rhs - 1.0) < 1e-12);
        }
    }

    SUBCASE("line convolution with gamma is dominated by the maximal function") {
        const GH1D f1 = GH1D::gaussian(1.0);
        const PointFn f = [&](const Eigen::VectorXd& x) { return f1(x[0]); };
        const auto ts = singleton_tuples({0.25, 0.5, 1.0, 2.0, 4.0});
        const std::vector<Eigen::VectorXd> xs = {vec1(0.0), vec1(0.5), vec1(1.0), vec1(2.0),
                                                 vec1(-1.0)};
        const auto rep = verify_gamma_comparison(g1, p1, f, ts, xs, 8.0, -4, 6, 401, 1025);
        CHECK(rep.pass);
        CHECK(rep.worst > 0.1);
        CHECK(rep.worst <= 8.0);
    }

    SUBCASE("heisenberg sweep over a non-monotone t grid stays bounded") {
        const PointFn f = [](const Eigen::VectorXd& x) {
            return std::exp(-0.5 * x.squaredNorm());
        };
        std::vector<Eigen::VectorXd> ts;
        for (double t1 : {0.25, 0.5, 1.0, 2.0, 4.0})
            for (double t2 : {0.25, 0.5, 1.0, 2.0, 4.0}) {
                Eigen::VectorXd t(2);
                t << t1, t2;
                ts.push_back(t);
            }
        std::mt19937 rng(9);
        std::uniform_real_distribution<double> u(-1.5, 1.5);
        std::vector<Eigen::VectorXd> xs;
        for (int i = 0; i < 50; ++i) xs.push_back(vec3(u(rng), u(rng), u(rng)));
        const auto rep = verify_gamma_comparison(gh, p2, f, ts, xs, 32.0, -3, 4, 7, 9);
        CHECK(rep.pass);
        CHECK(rep.per_tuple.size() == 25);
        // the huge-t entries carry almost no mass against the fixed bump
        CHECK(rep.per_tuple.back() < rep.worst);
    }
}

TEST_CASE("kernel against gamma") {
    const GroupSpec g1 = make_abelian(1, {Rational(1)}, {1});
    const Partition p1({1});

    SUBCASE("lifted product bump: closed form against quadrature, unit mass tail") {
        const GroupSpec g2 = make_abelian(2, {Rational(1), Rational(1)}, {1, 1});
        Eigen::VectorXd t(2);
        t << 0.5, 2.0;
        const GHTensor phi = lifted_phi_t(g2, t);
        CHECK(phi.mass() == doctest::Approx(0.0).epsilon(1e-12)); // mean zero
        const GHTensor control = lifted_phi_t(g2, t, false);
        CHECK(control.mass() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_THROWS(lifted_phi_t(make_heisenberg(), t));
    }

    SUBCASE("single bump at scale zero, t = 1: direct numeric check") {
        const GHTensor K = GHTensor::product({GH1D::dgaussian(1, 1.0)});
        const GHTensor phi = lifted_phi_t(g1, vec1(1.0));
        const GHTensor conv = K.conv(phi);
        // independent quadrature convolution of the two closed forms
        const PointFn a = [&](const Eigen::VectorXd& x) { return K(x); };
        const PointFn b = [&](const Eigen::VectorXd& x) { return phi(x); };
        const Grid quad = Grid::uniform(1, 8.0, 513);
        for (double x : {0.0, 0.7, -1.3})
            CHECK(convolve_at(g1, a, b, quad, vec1(x)) ==
                  doctest::Approx(conv(vec1(x))).epsilon(1e-8));
        const auto rep = verify_kernel_gamma(g1, p1, K, singleton_tuples({1.0}),
                                             {vec1(0.0), vec1(0.5), vec1(2.0)}, true, 10.0);
        CHECK(rep.pass);
    }

    SUBCASE("line flag kernel: mean-zero sweep bounded, control blows up") {
        const GHTensor K = GHTensor::product({flag_kernel_1d(6)});
        std::vector<double> tvals;
        for (int e = -4; e <= 4; ++e) tvals.push_back(std::pow(2.0, e));
        std::vector<Eigen::VectorXd> xs;
        for (int e = -4; e <= 4; ++e) {
            xs.push_back(vec1(std::pow(2.0, e)));
            xs.push_back(vec1(-std::pow(2.0, e)));
        }
        const auto rep =
            verify_kernel_gamma(g1, p1, K, singleton_tuples(tvals), xs, true, 16.0);
        CHECK(rep.pass);
        const auto bad = verify_kernel_gamma(g1, p1, K, singleton_tuples(tvals), xs, false, 16.0);
        // without the vanishing mean the small-t ratios run away
        CHECK(bad.per_tuple.front() > 8.0 * bad.per_tuple[4]);
    }

    SUBCASE("two-step abelian sweep with a non-monotone t grid") {
        const GroupSpec g2 = make_abelian(2, {Rational(1), Rational(1)}, {1, 1});
        const Partition p2({1, 1});
        BumpFamily fam;
        fam.p = p2;
        fam.mode = CancellationMode::Strong;
        fam.gh = [](const MultiIndex&) {
            return GHTensor::product(
                {GH1D::dgaussian(1, 1.0), GH1D::dgaussian(1, 1.0)});
        };
        const GHTensor K = synthesize_gh(fam, g2.dil, monotone_window(2, 4));
        std::vector<Eigen::VectorXd> ts;
        for (double t1 : {0.25, 1.0, 4.0})
            for (double t2 : {0.25, 1.0, 4.0}) {
                Eigen::VectorXd t(2);
                t << t1, t2;
                ts.push_back(t);
            }
        std::mt19937 rng(4);
        std::uniform_real_distribution<double> u(-4.0, 4.0);
        std::vector<Eigen::VectorXd> xs;
        for (int i = 0; i < 30; ++i) {
            Eigen::VectorXd x(2);
            x << u(rng), u(rng);
            xs.push_back(x);
        }
        const auto rep = verify_kernel_gamma(g2, p2, K, ts, xs, true, 64.0);
        CHECK(rep.pass);
        CHECK(rep.per_tuple.size() == 9);
    }
}

TEST_CASE("almost orthogonality on the line") {
    const GH1D K = flag_kernel_1d(5);
    const auto rep = verify_almost_orthogonality(K, calibrated_phi(), 5, 5u, 0.5);
    CHECK(rep.pass);
    CHECK(rep.delta_hat >= 0.5);
    CHECK(rep.r2 > 0.9);
    // equal scales: order-one constant
    CHECK(std::pow(2.0, rep.log2_gamma[0]) < 64.0);

    SUBCASE("two-step separations act like a product of single-step gains") {
        const GroupSpec g2 = make_abelian(2, {Rational(1), Rational(1)}, {1, 1});
        BumpFamily fam;
        fam.p = Partition({1, 1});
        fam.mode = CancellationMode::Strong;
        fam.gh = [](const MultiIndex&) {
            return GHTensor::product({GH1D::dgaussian(1, 1.0), GH1D::dgaussian(1, 1.0)});
        };
        const GHTensor K2 = synthesize_gh(fam, g2.dil, monotone_window(2, 4));
        auto gamma_l1 = [&](int a, int b) {
            Eigen::VectorXd s(2), t(2);
            s << std::pow(2.0, -a), std::pow(2.0, -b);
            t << 1.0, 1.0;
            const GHTensor theta =
                gh_reflect(lifted_phi_t(g2, s)).conv(K2).conv(lifted_phi_t(g2, t));
            return gh_l1(theta, 513);
        };
        const double g00 = gamma_l1(0, 0), g20 = gamma_l1(2, 0), g02 = gamma_l1(0, 2),
                     g22 = gamma_l1(2, 2);
        CHECK(g22 * g00 / (g20 * g02) == doctest::Approx(1.0).epsilon(0.3));
    }
}

TEST_CASE("square functions and the calibrated pair") {
    const GH1D phi = calibrated_phi();
    const auto tg = log_grid(1.0 / 16.0, 16.0, 8);

    SUBCASE("t grid resolution and the reproducing residual") {
        CHECK(static_cast<int>(tg.size()) >= 8 * 2); // at least 8 points per decade
        // the reproducing integral runs over all scales, so its grid extends
        // beyond the clipped sweep range until the band's tails are covered
        const double res = calderon_residual(phi, phi, log_grid(1.0 / 64.0, 64.0, 8), 0.25, 4.0);
        CHECK(res < 0.05);
    }

    SUBCASE("zero input gives zero square function") {
        CHECK(square_S_at(GH1D{}, phi, tg, 0.3) == 0.0);
    }

    SUBCASE("frame bounds on random mean-zero test functions") {
        std::mt19937 rng(13);
        std::uniform_real_distribution<double> usig(0.5, 2.0), ucoef(0.5, 1.5);
        std::uniform_int_distribution<int> uord(1, 3), usgn(0, 1);
        double lo = 10.0, hi = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            GH1D f;
            for (int k = 0; k < 3; ++k)
                f = f + GH1D::dgaussian(uord(rng), usig(rng),
                                        (usgn(rng) ? 1.0 : -1.0) * ucoef(rng));
            const auto rep = verify_plancherel(f, phi, tg);
            CHECK(rep.pass);
            lo = std::min(lo, rep.ratio);
            hi = std::max(hi, rep.ratio);
        }
        CHECK(lo > 0.5);
        CHECK(hi < 2.0);
    }

    SUBCASE("square function of Tf is dominated by the majorant square function") {
        const GH1D K = flag_kernel_1d(4);
        const GH1D f = GH1D::dgaussian(1, 1.0);
        const GH1D Tf = f.conv(K);
        double worst = 0.0;
        for (double x : {0.0, 0.5, 1.0, 2.0}) {
            const double s = square_S_at(Tf, phi, tg, x);
            const double fs = square_frakS_at(f, phi, tg, x);
            CHECK(fs > 0.0);
            worst = std::max(worst, s / fs);
        }
        CHECK(std::isfinite(worst));
        CHECK(worst < 8.0);
    }
}

TEST_CASE("operator L2 norms") {
    SUBCASE("identity-approximating kernel has norm one") {
        const GHTensor K = GHTensor::product({GH1D::gaussian(0.2)});
        const auto mult = l2_norm_multiplier(K, Grid::uniform(1, 20.0, 401));
        CHECK(mult.value == doctest::Approx(1.0).epsilon(1e-9));
        const GridFunction Ks =
            sample(Grid::uniform(1, 8.0, 257), [&](const Eigen::VectorXd& x) { return K(x); });
        const auto pw = l2_norm_power(Ks);
        CHECK(pw.converged);
        CHECK(pw.value == doctest::Approx(1.0).epsilon(0.02));
    }

    SUBCASE("flag kernel: the two estimates agree within five percent") {
        const GH1D K1 = flag_kernel_1d(2);
        const GHTensor K = GHTensor::product({K1});
        const auto mult = l2_norm_multiplier(K, Grid::uniform(1, 30.0, 1201));
        const GridFunction Ks = sample(Grid::uniform(1, 16.0, 513),
                                       [&](const Eigen::VectorXd& x) { return K1(x[0]); });
        const auto pw = l2_norm_power(Ks);
        CHECK(pw.converged);
        CHECK(std::abs(pw.value - mult.value) / mult.value < 0.05);
    }

    SUBCASE("norm is stable across nested truncation windows") {
        const Grid freq = Grid::uniform(1, 40.0, 1601);
        const double n2 = l2_norm_multiplier(GHTensor::product({flag_kernel_1d(2)}), freq).value;
        const double n4 = l2_norm_multiplier(GHTensor::product({flag_kernel_1d(4)}), freq).value;
        const double n6 = l2_norm_multiplier(GHTensor::product({flag_kernel_1d(6)}), freq).value;
        CHECK(std::abs(n4 - n6) / n6 < 0.05);
        CHECK(std::abs(n2 - n6) / n6 < 0.15);
    }

    SUBCASE("estimate traces are monotone nondecreasing") {
        const GHTensor K = GHTensor::product({flag_kernel_1d(2)});
        const auto mult = l2_norm_multiplier(K, Grid::uniform(1, 30.0, 801));
        for (std::size_t i = 0; i + 1 < mult.trace.size(); ++i)
            CHECK(mult.trace[i] <= mult.trace[i + 1] + 1e-15);
        const GridFunction Ks = sample(Grid::uniform(1, 16.0, 257),
                                       [&](const Eigen::VectorXd& x) { return K(x); });
        const auto pw = l2_norm_power(Ks);
        for (std::size_t i = 0; i + 1 < pw.trace.size(); ++i)
            CHECK(pw.trace[i] <= pw.trace[i + 1] + 1e-9 * pw.value);
    }

    SUBCASE("non-certifying Lp smoke test") {
        const GH1D K1 = flag_kernel_1d(2);
        const Grid grid = Grid::uniform(1, 16.0, 513);
        const GridFunction f =
            sample(grid, [](const Eigen::VectorXd& x) { return std::exp(-0.5 * x[0] * x[0]); });
        const GridFunction Ks =
            sample(grid, [&](const Eigen::VectorXd& x) { return K1(x[0]); });
        const GridFunction Tf = convolve_abelian_direct(f, Ks);
        for (double pexp : {1.5, 3.0}) {
            const double r = lp_norm(Tf, pexp) / lp_norm(f, pexp);
            CHECK(std::isfinite(r));
            CHECK(r > 0.0);
        }
        CHECK_THROWS(lp_norm(f, 0.5));
    }
}
