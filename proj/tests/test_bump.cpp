#include "doctest.h"

#include <cmath>
#include <random>

#include "flaglab/bump.hpp"
#include "flaglab/cancellation.hpp"
#include "flaglab/grid.hpp"
#include "flaglab/group.hpp"

using namespace flaglab;

namespace {

DilationStructure dil(std::vector<Rational> d) {
    DilationStructure s;
    s.d = std::move(d);
    return s;
}

} // namespace

TEST_CASE("grid: dump round-trips bit for bit") {
    Grid g = Grid::uniform(2, 3.0, 17);
    GridFunction f = sample(g, [](const Eigen::VectorXd& x) { return std::sin(x[0]) + x[1]; });
    std::stringstream ss;
    dump(f, ss);
    GridFunction back = load_dump(ss);
    REQUIRE(back.grid.N() == 2);
    CHECK(back.grid.axes[0].count == 17);
    CHECK((back.values - f.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dilate: zero index is the identity") {
    auto f = bump_gaussian(2, 1.0);
    auto d = dil({Rational(1), Rational(2)});
    auto g = dilate_index(f, {0}, d);
    Eigen::VectorXd x(2);
    x << 0.7, -1.3;
    CHECK(g(x) == f(x));
    CHECK(g.amplitude == f.amplitude);
}

TEST_CASE("dilate: L1 mass is preserved across 100 random cases") {
    std::mt19937 rng(20240817u);
    std::uniform_int_distribution<int> idist(-3, 3);
    std::uniform_real_distribution<double> wdist(0.5, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int N = 2 + trial % 2;
        Partition p = N == 2 ? Partition({1, 1}) : Partition({2, 1});
        std::vector<Rational> dv(N, Rational(1));
        dv[N - 1] = Rational(2);
        auto d = dil(dv);
        BumpSpec f = trial % 3 ? bump_gaussian(N, wdist(rng), Poly::constant(N, 1.0), p)
                               : bump_compact(N, wdist(rng), Poly::constant(N, 1.0), p);
        if (trial % 5 == 0) f.pre = Poly::var(N, 0) * Poly::var(N, 0);
        MultiIndex I(p.n());
        I[0] = idist(rng);
        for (int l = 1; l < p.n(); ++l) I[l] = I[l - 1] + std::abs(idist(rng));
        const double m0 = l1_mass(f);
        const double m1 = l1_mass(dilate_index(f, I, d));
        CHECK(std::abs(m1 - m0) < 1e-8 * m0);
    }
}

TEST_CASE("dilate: composition adds the exponents") {
    Partition p({1, 1});
    auto d = dil({Rational(1), Rational(2)});
    auto f = bump_gaussian(2, 1.0, Poly::var(2, 0), p);
    auto g1 = dilate_index(dilate_index(f, {1, 2}, d), {-2, 1}, d);
    auto g2 = dilate_index(f, {-1, 3}, d);
    CHECK(std::abs(g1.amplitude - g2.amplitude) < 1e-15 * std::abs(g2.amplitude));
    CHECK((g1.scale - g2.scale).cwiseAbs().maxCoeff() < 1e-15);
    Eigen::VectorXd x(2);
    x << 1.4, -0.3;
    CHECK(g1(x) == doctest::Approx(g2(x)).epsilon(1e-14));
}

TEST_CASE("seminorm: gaussian at order zero is its peak value") {
    auto f = bump_gaussian(2, 1.0);
    Grid g = Grid::standard(2, 8.0);
    CHECK(std::abs(seminorm(sample(f, g), 0) - 1.0) < 1e-12);
    CHECK(std::abs(seminorm(f, g, 0) - 1.0) < 1e-12);
}

TEST_CASE("seminorm: monotone in the order") {
    auto f = bump_gaussian(2, 1.0, Poly::var(2, 0), Partition({2}));
    Grid g = Grid::standard(2, 6.0);
    GridFunction fg = sample(f, g);
    double prev = 0.0;
    for (int m = 0; m <= 3; ++m) {
        const double s = seminorm(fg, m);
        CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("seminorm: schwartz weights stay finite for a gaussian") {
    auto f = bump_gaussian(1, 1.0);
    Grid g = Grid::uniform(1, 10.0, 257);
    const double s = seminorm(sample(f, g), 3, SeminormKind::Schwartz);
    CHECK(std::isfinite(s));
    CHECK(s > 1.0); // the weight (1+|x|)^3 dominates the peak
}

TEST_CASE("finite differences: calibrated against the analytic derivative") {
    // f(x) = x exp(-x^2); f'(0) = 1.
    auto f = bump_gaussian(1, 1.0 / std::sqrt(2.0), Poly::var(1, 0), Partition({1}));
    Grid g = Grid::uniform(1, 6.0, 2049);
    GridFunction d = deriv_axis(sample(f, g), 0);
    const long center = (g.total() - 1) / 2;
    CHECK(std::abs(d.values[center] - 1.0) < 1e-8);
    // Analytic path is exact at the same point.
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    CHECK(std::abs(f.deriv({1}, zero) - 1.0) < 1e-14);
    // Cross-validate grid vs analytic derivatives over the whole grid.
    double worst = 0.0;
    const long T = g.total();
    for (long t = 0; t < T; ++t) {
        const Eigen::VectorXd x = g.point(g.unflat(t));
        worst = std::max(worst, std::abs(d.values[t] - f.deriv({1}, x)));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("compact envelope: analytic first derivative matches differences") {
    auto f = bump_compact(1, 1.0);
    Grid g = Grid::uniform(1, 1.2, 4097);
    GridFunction d = deriv_axis(sample(f, g), 0);
    double worst = 0.0;
    const long T = g.total();
    for (long t = 0; t < T; ++t) {
        const Eigen::VectorXd x = g.point(g.unflat(t));
        worst = std::max(worst, std::abs(d.values[t] - f.deriv({1}, x)));
    }
    CHECK(worst < 1e-6); // the profile's higher derivatives blow up near |t|=1
}

TEST_CASE("marginal: odd factor integrates to zero") {
    auto f = bump_gaussian(2, 1.0, Poly::var(2, 0), Partition({1, 1}));
    GridFunction fg = sample(f, Grid::standard(2, 8.0));
    CHECK(sup_norm(block_marginal(fg, Partition({1, 1}), {0})) < 1e-10);
}

TEST_CASE("marginal: probability bump has total mass one") {
    auto f = bump_gaussian(2, 1.0);
    f.amplitude = 1.0 / (2.0 * M_PI);
    GridFunction fg = sample(f, Grid::standard(2, 8.5));
    GridFunction total = block_marginal(fg, Partition({1, 1}), {0, 1});
    REQUIRE(total.grid.N() == 0);
    REQUIRE(total.values.size() == 1);
    CHECK(std::abs(total.values[0] - 1.0) < 1e-8);
}

TEST_CASE("marginal: disjoint blocks commute") {
    auto f = bump_gaussian(3, 1.0, Poly::var(3, 1), Partition({1, 1, 1}));
    GridFunction fg = sample(f, Grid::standard(3, 7.0));
    GridFunction ab = marginal_axes(fg, {0, 2});
    GridFunction a_then_b = marginal_axes(marginal_axes(fg, {0}), {1}); // axis 2 shifts to 1
    GridFunction b_then_a = marginal_axes(marginal_axes(fg, {2}), {0});
    CHECK((ab.values - a_then_b.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ab.values - b_then_a.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("strong cancellation: odd factor per block passes") {
    Partition p({1, 2});
    auto f = bump_gaussian(3, 1.0, Poly::var(3, 0) * Poly::var(3, 2), p);
    auto rep = strong_cancellation(sample(f, Grid::standard(3, 8.0)), p);
    CHECK(rep.strong);
    REQUIRE(rep.block_marginal_sup.size() == 2);
}

TEST_CASE("strong cancellation: plain gaussian fails") {
    Partition p({1, 1});
    auto rep = strong_cancellation(sample(bump_gaussian(2, 1.0), Grid::standard(2, 8.0)), p);
    CHECK(!rep.strong);
}

TEST_CASE("strong cancellation: mixed derivative of a compact bump passes") {
    Partition p({1, 2});
    auto g = bump_compact(3, 1.0);
    Grid grid = Grid::standard(3, 1.1);
    GridFunction f = sample(grid, [&](const Eigen::VectorXd& x) { return g.deriv({1, 0, 1}, x); });
    auto rep = strong_cancellation(f, p);
    CHECK(rep.strong);
    for (double m : rep.block_marginal_sup) CHECK(m < 1e-8 * rep.sup);
}

TEST_CASE("weak cancellation: strong input saturates to +inf") {
    Partition p({1, 1});
    auto f = bump_gaussian(2, 1.0, Poly::var(2, 0) * Poly::var(2, 1), p);
    auto rep = weak_cancellation_fit(sample(f, Grid::standard(2, 8.0)), p, {0, 3});
    CHECK(std::isinf(rep.epsilon));
    CHECK(rep.epsilon > 0);
    CHECK(!rep.vacuous);
}

TEST_CASE("weak cancellation: planted 2^{-gap} marginal fits epsilon near one") {
    Partition p({1, 1});
    auto g = bump_gaussian(2, 1.0, Poly::var(2, 0), p); // strong part, odd in x1
    auto h = bump_gaussian(2, 1.0);                      // carries block-1 mass
    h.amplitude = 1.0 / std::sqrt(2.0 * M_PI);           // sup of its x1-marginal is 1
    Grid grid = Grid::standard(2, 8.0);
    auto fit = [&](int gap) {
        GridFunction f = sample(grid, [&](const Eigen::VectorXd& x) {
            return g(x) + std::exp2(-gap) * h(x);
        });
        return weak_cancellation_fit(f, p, {0, gap}).epsilon;
    };
    const double e6 = fit(6), e12 = fit(12);
    CHECK(std::abs(e12 - 1.0) < 0.25);
    CHECK(std::abs(e12 - 1.0) < std::abs(e6 - 1.0) + 1e-12);
}

TEST_CASE("weak cancellation: flat index is flagged vacuous") {
    Partition p({1, 1});
    auto rep = weak_cancellation_fit(sample(bump_gaussian(2, 1.0), Grid::standard(2, 8.0)), p,
                                     {2, 2});
    CHECK(rep.vacuous);
    CHECK(rep.note == "no gap");
}

TEST_CASE("weak cancellation: adding a strong component never decreases epsilon") {
    Partition p({1, 1});
    auto g = bump_gaussian(2, 1.0, Poly::var(2, 0), p);
    auto h = bump_gaussian(2, 1.0);
    Grid grid = Grid::standard(2, 8.0);
    GridFunction base = sample(grid, [&](const Eigen::VectorXd& x) {
        return 0.25 * g(x) + std::exp2(-4) * h(x);
    });
    GridFunction more = sample(grid, [&](const Eigen::VectorXd& x) {
        return 1.25 * g(x) + std::exp2(-4) * h(x);
    });
    const double e0 = weak_cancellation_fit(base, p, {0, 4}).epsilon;
    const double e1 = weak_cancellation_fit(more, p, {0, 4}).epsilon;
    // The strong component raises sup|f| without touching the marginal.
    CHECK(e1 >= e0 - 1e-12);
}

TEST_CASE("mollifier split: exact algebra") {
    Partition p({1, 1});
    auto f = bump_gaussian(2, 1.0, Poly::var(2, 1), p);
    GridFunction fg = sample(f, Grid::standard(2, 8.0));
    auto [L, M] = mollifier_split(fg, p, 0);
    SUBCASE("L + M = f to rounding") {
        CHECK((L.values + M.values - fg.values).cwiseAbs().maxCoeff() <
              1e-15 * sup_norm(fg));
    }
    SUBCASE("block marginal of L vanishes") {
        CHECK(sup_norm(block_marginal(L, p, {0})) < 1e-8 * sup_norm(fg));
    }
    SUBCASE("M is idempotent") {
        auto [L2, M2] = mollifier_split(M, p, 0);
        CHECK((M2.values - M.values).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("M keeps the block marginal") {
        GridFunction mf = block_marginal(fg, p, {0});
        GridFunction mm = block_marginal(M, p, {0});
        CHECK((mf.values - mm.values).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("mollifier split: zero block mass means M vanishes") {
    Partition p({1, 1});
    auto f = bump_gaussian(2, 1.0, Poly::var(2, 0), p); // odd in the block variable
    GridFunction fg = sample(f, Grid::standard(2, 8.0));
    auto [L, M] = mollifier_split(fg, p, 0);
    CHECK(sup_norm(M) < 1e-10 * sup_norm(fg));
}

TEST_CASE("mollifier split: distinct blocks commute") {
    Partition p({1, 1});
    auto f = bump_gaussian(2, 1.0, (Poly::var(2, 0) + Poly::constant(2, 0.5)) * Poly::var(2, 1),
                           p);
    GridFunction fg = sample(f, Grid::standard(2, 8.0));
    GridFunction l01 = mollifier_split(mollifier_split(fg, p, 0).first, p, 1).first;
    GridFunction l10 = mollifier_split(mollifier_split(fg, p, 1).first, p, 0).first;
    CHECK((l01.values - l10.values).cwiseAbs().maxCoeff() < 1e-10);
}
