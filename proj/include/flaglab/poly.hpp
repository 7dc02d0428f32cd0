#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flaglab/rational.hpp"

namespace flaglab {

/// Exponent vector of a monomial: one nonnegative exponent per variable.
using Monomial = std::vector<int>;

/**
 * Sparse multivariate polynomial with double coefficients.
 *
 * Monomials map exponent vectors to coefficients; all monomials of a given
 * polynomial share the same variable count. This is the currency of the
 * symbolic layer (group laws, vector-field coefficients, operator calculus).
 */
class Poly {
public:
    int nvars = 0;
    std::map<Monomial, double> terms;

    Poly() = default;
    explicit Poly(int nv) : nvars(nv) {}

    static Poly constant(int nv, double c) {
        Poly p(nv);
        if (c != 0.0) p.terms[Monomial(nv, 0)] = c;
        return p;
    }
    /// The variable x_i (0-based) as a polynomial.
    static Poly var(int nv, int i) {
        Poly p(nv);
        Monomial m(nv, 0);
        m.at(i) = 1;
        p.terms[m] = 1.0;
        return p;
    }

    bool is_zero(double tol = 0.0) const {
        for (const auto& [m, c] : terms)
            if (std::abs(c) > tol) return false;
        return true;
    }

    void add_term(const Monomial& m, double c) {
        if (static_cast<int>(m.size()) != nvars)
            throw std::invalid_argument("Poly::add_term: variable count mismatch");
        double& slot = terms[m];
        slot += c;
        if (slot == 0.0) terms.erase(m);
    }

    void prune(double tol = 0.0) {
        for (auto it = terms.begin(); it != terms.end();)
            it = (std::abs(it->second) <= tol) ? terms.erase(it) : std::next(it);
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        Poly r = a;
        for (const auto& [m, c] : b.terms) r.add_term(m, c);
        return r;
    }
    friend Poly operator-(const Poly& a, const Poly& b) {
        Poly r = a;
        for (const auto& [m, c] : b.terms) r.add_term(m, -c);
        return r;
    }
    friend Poly operator*(double s, const Poly& a) {
        Poly r(a.nvars);
        if (s == 0.0) return r;
        for (const auto& [m, c] : a.terms) r.terms[m] = s * c;
        return r;
    }
    friend Poly operator*(const Poly& a, const Poly& b) {
        Poly r(a.nvars);
        for (const auto& [ma, ca] : a.terms)
            for (const auto& [mb, cb] : b.terms) {
                Monomial m = ma;
                for (int i = 0; i < r.nvars; ++i) m[i] += mb[i];
                r.add_term(m, ca * cb);
            }
        return r;
    }

    double eval(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (const auto& [m, c] : terms) {
            double t = c;
            for (int i = 0; i < nvars; ++i)
                for (int e = 0; e < m[i]; ++e) t *= x[i];
            s += t;
        }
        return s;
    }

    /// Partial derivative in variable i.
    Poly deriv(int i) const {
        Poly r(nvars);
        for (const auto& [m, c] : terms) {
            if (m[i] == 0) continue;
            Monomial mm = m;
            mm[i] -= 1;
            r.add_term(mm, c * m[i]);
        }
        return r;
    }

    /// Substitute each variable by a polynomial over a common variable set.
    Poly compose(const std::vector<Poly>& args) const {
        if (static_cast<int>(args.size()) != nvars)
            throw std::invalid_argument("Poly::compose: argument count mismatch");
        const int nv_out = args.empty() ? 0 : args.front().nvars;
        Poly r(nv_out);
        for (const auto& [m, c] : terms) {
            Poly t = Poly::constant(nv_out, c);
            for (int i = 0; i < nvars; ++i)
                for (int e = 0; e < m[i]; ++e) t = t * args[i];
            r = r + t;
        }
        return r;
    }

    /// Homogeneous degree of a monomial under per-variable weights d.
    static Rational weighted_degree(const Monomial& m, const std::vector<Rational>& d) {
        Rational deg(0);
        for (std::size_t i = 0; i < m.size(); ++i) deg = deg + m[i] * d[i];
        return deg;
    }

    /**
     * True iff every monomial has weighted degree equal to deg.
     * If offending is non-null, the first failing monomial is reported there.
     */
    bool is_homogeneous(const std::vector<Rational>& d, const Rational& deg,
                        Monomial* offending = nullptr) const {
        for (const auto& [m, c] : terms) {
            (void)c;
            if (weighted_degree(m, d) != deg) {
                if (offending) *offending = m;
                return false;
            }
        }
        return true;
    }

    std::string str(const std::string& stem = "x") const {
        if (terms.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [m, c] : terms) {
            if (!first) os << (c >= 0 ? " + " : " - ");
            else if (c < 0) os << "-";
            first = false;
            os << std::abs(c);
            for (int i = 0; i < nvars; ++i)
                if (m[i] > 0) {
                    os << "*" << stem << (i + 1);
                    if (m[i] > 1) os << "^" << m[i];
                }
        }
        return os.str();
    }
};

/**
 * A sparse polynomial with a declared homogeneous degree relative to a set of
 * dilation weights. A declared negative degree forces the zero polynomial
 * (monomials of negative homogeneous degree do not exist).
 */
struct HomoPolynomial {
    Poly poly;
    Rational degree{0};

    /// Validates homogeneity; throws with the offending monomial on failure.
    static HomoPolynomial checked(Poly p, Rational deg, const std::vector<Rational>& d) {
        if (deg < Rational(0) && !p.is_zero())
            throw std::invalid_argument(
                "HomoPolynomial: negative degree forces the zero polynomial");
        Monomial bad;
        if (!p.is_homogeneous(d, deg, &bad)) {
            std::ostringstream os;
            os << "HomoPolynomial: monomial (";
            for (std::size_t i = 0; i < bad.size(); ++i)
                os << (i ? "," : "") << bad[i];
            os << ") violates homogeneous degree " << deg.str();
            throw std::invalid_argument(os.str());
        }
        return HomoPolynomial{std::move(p), deg};
    }
};

} // namespace flaglab
