#include "doctest.h"

#include <random>

#include <nlohmann/json.hpp>

#include "flaglab/group.hpp"

using namespace flaglab;

TEST_CASE("abelian group is vector addition") {
    auto g = make_abelian(2, {Rational(1), Rational(2)});
    Point x(2), y(2);
    x << 1, 2;
    y << 3, 4;
    const Point z = multiply(g, x, y);
    CHECK(z[0] == doctest::Approx(4.0));
    CHECK(z[1] == doctest::Approx(6.0));
    const Point xi = inverse(g, x);
    CHECK(xi[0] == doctest::Approx(-1.0));
    CHECK(xi[1] == doctest::Approx(-2.0));
}

TEST_CASE("heisenberg law and inverse") {
    auto g = make_heisenberg();
    Point x(3), y(3);
    x << 1, 0, 0;
    y << 0, 1, 0;
    const Point z = multiply(g, x, y);
    CHECK(z[2] == doctest::Approx(1.0)); // x_1 y_2 term
    Point w(3);
    w << 1, 1, 1;
    const Point wi = inverse(g, w);
    CHECK(wi[0] == doctest::Approx(-1.0));
    CHECK(wi[1] == doctest::Approx(-1.0));
    CHECK(wi[2] == doctest::Approx(0.0));
    CHECK(multiply(g, w, wi).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("identity element is two sided") {
    for (const auto& g : {make_heisenberg(), make_engel_step3()}) {
        Point x(g.N);
        for (int i = 0; i < g.N; ++i) x[i] = 0.3 * (i + 1);
        const Point e = Point::Zero(g.N);
        CHECK((multiply(g, x, e) - x).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((multiply(g, e, x) - x).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("built-in groups pass symbolic axioms") {
    CHECK_NOTHROW(verify_group_axioms(make_heisenberg()));
    CHECK_NOTHROW(verify_group_axioms(make_engel_step3()));
    CHECK_NOTHROW(verify_group_axioms(make_abelian(3, {Rational(1), Rational(1), Rational(2)})));
}

TEST_CASE("custom law violating triangularity is rejected") {
    // M_2 depending on x_2 must be rejected with a diagnostic.
    GroupLaw law;
    law.N = 2;
    law.M.assign(2, Poly(4));
    law.M[1] = Poly::var(4, 1) * Poly::var(4, 2); // x_2 * y_1
    CHECK_THROWS_WITH_AS(
        make_custom(2, {Rational(1), Rational(1)}, {2}, law), // degree also wrong, but
        doctest::Contains("triangularity"), std::invalid_argument);
}

TEST_CASE("custom law violating homogeneity is rejected") {
    GroupLaw law;
    law.N = 3;
    law.M.assign(3, Poly(6));
    law.M[2] = Poly::var(6, 0) * Poly::var(6, 3); // x_1 y_1, degree 2 for d_3 = 3
    CHECK_THROWS_WITH_AS(
        make_custom(3, {Rational(1), Rational(1), Rational(3)}, {2, 1}, law),
        doctest::Contains("homogeneous degree"), std::invalid_argument);
}

TEST_CASE("dilations are automorphisms") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    std::uniform_real_distribution<double> R(0.1, 4.0);
    for (const auto& g : {make_heisenberg(), make_engel_step3()}) {
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            Point x(g.N), y(g.N);
            for (int i = 0; i < g.N; ++i) {
                x[i] = U(rng);
                y[i] = U(rng);
            }
            const double r = R(rng);
            const Point a = dilate(g, r, multiply(g, x, y));
            const Point b = multiply(g, dilate(g, r, x), dilate(g, r, y));
            worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() /
                                        (1.0 + a.cwiseAbs().maxCoeff()));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("dilate formula and r = 1") {
    auto g = make_heisenberg();
    Point x(3);
    x << 1, 1, 1;
    const Point z = dilate(g, 2.0, x);
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(2.0));
    CHECK(z[2] == doctest::Approx(4.0));
    CHECK((dilate(g, 1.0, x) - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(dilate(g, -1.0, x), std::invalid_argument);
}

TEST_CASE("partial norm") {
    auto g = make_custom(1, {Rational(2)}, {1}, GroupLaw{1, {Poly(2)}}, "a1");
    Point x(1);
    x << 4.0;
    CHECK(partial_norm(g, x, 0) == doctest::Approx(2.0));
    x << 0.0;
    CHECK(partial_norm(g, x, 0) == 0.0);

    auto h = make_heisenberg();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        Point y(3);
        for (int i = 0; i < 3; ++i) y[i] = U(rng);
        const double r = 3.0;
        for (int l = 0; l < 2; ++l) {
            const double a = partial_norm(h, dilate(h, r, y), l);
            const double b = r * partial_norm(h, y, l);
            CHECK(std::abs(a - b) <= 1e-12 * (1.0 + std::abs(b)));
        }
    }
}

TEST_CASE("invariant fields of heisenberg") {
    auto g = make_heisenberg();
    const auto& P = invariant_fields(g, Side::Left);
    // X_1 = d_1, X_2 = d_2 + x_1 d_3, X_3 = d_3.
    CHECK(P[0][2].is_zero());
    CHECK(P[1][2].terms.size() == 1);
    CHECK(P[1][2].eval(Eigen::Vector3d(1.5, 0, 0)) == doctest::Approx(1.5));
    // Abelian: all coefficients vanish.
    auto a = make_abelian(3, {Rational(1), Rational(1), Rational(2)});
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) CHECK(invariant_fields(a, Side::Left)[k][l].is_zero());
}

TEST_CASE("commutator of X_1 and X_2 on heisenberg is d_3") {
    auto g = make_heisenberg();
    // Apply [X_1, X_2] to test polynomials and compare with d/dx_3.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Poly f = Poly::var(3, 0) * Poly::var(3, 1) * Poly::var(3, 2) +
             Poly::var(3, 2) * Poly::var(3, 2);
    Poly comm = apply_field(g, Side::Left, 0, apply_field(g, Side::Left, 1, f)) -
                apply_field(g, Side::Left, 1, apply_field(g, Side::Left, 0, f));
    Poly expect = f.deriv(2);
    for (int t = 0; t < 20; ++t) {
        Eigen::Vector3d x(U(rng), U(rng), U(rng));
        CHECK(comm.eval(x) == doctest::Approx(expect.eval(x)).epsilon(1e-12));
    }
}

TEST_CASE("euclid_in_fields inverts the field expansion") {
    auto g = make_engel_step3();
    const auto E = euclid_in_fields(g, Side::Left);
    // d_k f = sum_l E[k][l] Z_l f for polynomial test functions.
    Poly f = Poly::var(4, 0) * Poly::var(4, 2) + Poly::var(4, 3) +
             Poly::var(4, 1) * Poly::var(4, 1) * Poly::var(4, 2);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 4; ++k) {
        Poly lhs = f.deriv(k);
        Poly rhs(4);
        for (int l = 0; l < 4; ++l)
            if (!E[k][l].is_zero()) rhs = rhs + E[k][l] * apply_field(g, Side::Left, l, f);
        for (int t = 0; t < 10; ++t) {
            Eigen::VectorXd x(4);
            for (int i = 0; i < 4; ++i) x[i] = U(rng);
            CHECK(lhs.eval(x) == doctest::Approx(rhs.eval(x)).epsilon(1e-10));
        }
    }
}

TEST_CASE("heisenberg: d_2 = X_2 - x_1 X_3") {
    auto g = make_heisenberg();
    const auto terms = fields_from_euclid(g, {1});
    // Apply expansion to a test function and compare with the direct derivative.
    Poly f = Poly::var(3, 0) * Poly::var(3, 1) * Poly::var(3, 2);
    Poly direct = f.deriv(1);
    Poly via = apply_expansion(g, Side::Left, terms, f);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        Eigen::Vector3d x(U(rng), U(rng), U(rng));
        CHECK(via.eval(x) == doctest::Approx(direct.eval(x)).epsilon(1e-10));
    }
}

TEST_CASE("fields_from_euclid round trips to order 2 and 3") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const auto& g : {make_heisenberg(), make_engel_step3()}) {
        std::vector<std::vector<int>> cases = {{0, 1}, {1, 1}, {1, 2}, {0, 1, 2}};
        for (const auto& orders : cases) {
            bool ok = true;
            for (int v : orders) ok &= v < g.N;
            if (!ok) continue;
            const auto terms = fields_from_euclid(g, orders);
            for (int rep = 0; rep < 20; ++rep) {
                // Random polynomial test function of modest degree.
                Poly f(g.N);
                for (int t = 0; t < 6; ++t) {
                    Monomial m(g.N, 0);
                    for (int i = 0; i < g.N; ++i) m[i] = rng() % 3;
                    f.add_term(m, U(rng));
                }
                Poly direct = f;
                for (auto it = orders.rbegin(); it != orders.rend(); ++it)
                    direct = direct.deriv(*it);
                Poly via = apply_expansion(g, Side::Left, terms, f);
                Eigen::VectorXd x(g.N);
                for (int i = 0; i < g.N; ++i) x[i] = U(rng);
                const double a = direct.eval(x), b = via.eval(x);
                CHECK(std::abs(a - b) <= 1e-10 * (1.0 + std::abs(a)));
            }
        }
    }
}

TEST_CASE("abelian expansion is the identity") {
    auto g = make_abelian(3, {Rational(1), Rational(1), Rational(2)});
    const auto terms = fields_from_euclid(g, {2});
    REQUIRE(terms.size() == 1);
    CHECK(terms[0].js == std::vector<int>{2});
    CHECK(terms[0].coeff.eval(Eigen::Vector3d(0.3, 0.4, 0.5)) == doctest::Approx(1.0));
}

TEST_CASE("json round trip") {
    auto g = make_engel_step3();
    const auto j = group_to_json(g);
    auto g2 = group_from_json(j);
    CHECK(g2.N == g.N);
    CHECK(g2.blocks == g.blocks);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        Point x(4), y(4);
        for (int i = 0; i < 4; ++i) {
            x[i] = U(rng);
            y[i] = U(rng);
        }
        CHECK((multiply(g, x, y) - multiply(g2, x, y)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("non-isotropic in-block dilations are supported") {
    auto g = make_abelian(2, {Rational(1), Rational(2)}, {2});
    Point x(2);
    x << 3.0, 4.0;
    CHECK(partial_norm(g, x, 0) == doctest::Approx(3.0)); // max(3, 2)
    const Point z = dilate(g, 2.0, x);
    CHECK(z[0] == doctest::Approx(6.0));
    CHECK(z[1] == doctest::Approx(16.0));
}
