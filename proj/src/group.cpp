#include "flaglab/group.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace flaglab {

void DilationStructure::validate() const {
    if (d.empty()) throw std::invalid_argument("DilationStructure: empty exponent list");
    for (const auto& e : d)
        if (!(Rational(0) < e))
            throw std::invalid_argument("DilationStructure: exponents must be positive");
    for (std::size_t j = 1; j < d.size(); ++j)
        if (d[j] < d[j - 1])
            throw std::invalid_argument("DilationStructure: exponents must be nondecreasing");
}

int GroupSpec::block_start(int l) const {
    int s = 0;
    for (int i = 0; i < l; ++i) s += blocks[i];
    return s;
}

Rational GroupSpec::block_Q(int l) const {
    Rational q(0);
    const int s = block_start(l);
    for (int j = 0; j < blocks[l]; ++j) q = q + dil.d[s + j];
    return q;
}

bool GroupSpec::abelian() const {
    for (const auto& m : law.M)
        if (!m.is_zero()) return false;
    return true;
}

namespace {

/// Variables of the law polynomials: x_1..x_N are 0..N-1, y_1..y_N are N..2N-1.
void validate_law(int N, const std::vector<Rational>& d, const GroupLaw& law) {
    if (law.N != N || static_cast<int>(law.M.size()) != N)
        throw std::invalid_argument("GroupLaw: wrong dimension");
    std::vector<Rational> w(2 * N);
    for (int i = 0; i < N; ++i) w[i] = w[N + i] = d[i];
    for (int k = 0; k < N; ++k) {
        const Poly& m = law.M[k];
        if (m.nvars != 2 * N && !m.is_zero())
            throw std::invalid_argument("GroupLaw: M_k must live in 2N variables");
        for (const auto& [mono, c] : m.terms) {
            (void)c;
            for (int i = 0; i < 2 * N; ++i) {
                const int coord = i < N ? i : i - N;
                if (coord >= k && mono[i] > 0) {
                    std::ostringstream os;
                    os << "GroupLaw: M_" << (k + 1) << " monomial " << Poly::var(2 * N, i).str()
                       << "-dependent term violates triangularity (depends on coordinate "
                       << (coord + 1) << ")";
                    throw std::invalid_argument(os.str());
                }
            }
            if (Poly::weighted_degree(mono, w) != d[k]) {
                std::ostringstream os;
                os << "GroupLaw: M_" << (k + 1) << " contains a monomial of homogeneous degree "
                   << Poly::weighted_degree(mono, w).str() << " != d_" << (k + 1) << " = "
                   << d[k].str();
                throw std::invalid_argument(os.str());
            }
        }
    }
}

/// The product components as polynomials, given component polynomials for x and y.
std::vector<Poly> law_apply(const GroupLaw& law, const std::vector<Poly>& xs,
                            const std::vector<Poly>& ys) {
    const int N = law.N;
    std::vector<Poly> args;
    args.reserve(2 * N);
    for (const auto& p : xs) args.push_back(p);
    for (const auto& p : ys) args.push_back(p);
    std::vector<Poly> out(N);
    for (int k = 0; k < N; ++k) {
        Poly m = law.M[k].is_zero() ? Poly(args.front().nvars) : law.M[k].compose(args);
        out[k] = xs[k] + ys[k] + m;
    }
    return out;
}

std::vector<std::vector<Poly>> field_table(int N, const GroupLaw& law, Side side) {
    std::vector<std::vector<Poly>> P(N, std::vector<Poly>(N, Poly(N)));
    for (int l = 0; l < N; ++l) {
        for (int k = 0; k < l; ++k) {
            // Left: d/dy_k of M_l at y = 0; right: d/dx_k of M_l at x = 0.
            const Poly dm = law.M[l].is_zero()
                                ? Poly(2 * N)
                                : law.M[l].deriv(side == Side::Left ? N + k : k);
            Poly out(N);
            for (const auto& [mono, c] : dm.terms) {
                bool kill = false;
                Monomial red(N, 0);
                for (int i = 0; i < 2 * N; ++i) {
                    const bool kept_slot = (side == Side::Left) ? (i < N) : (i >= N);
                    if (kept_slot)
                        red[i < N ? i : i - N] = mono[i];
                    else if (mono[i] > 0)
                        kill = true; // evaluate the other slot at the origin
                }
                if (!kill) out.add_term(red, c);
            }
            P[k][l] = out;
        }
    }
    return P;
}

GroupSpec finish_group(int N, std::vector<Rational> d, std::vector<int> blocks,
                       GroupLaw law, std::string name) {
    GroupSpec g;
    g.N = N;
    g.dil.d = std::move(d);
    g.dil.validate();
    if (g.dil.N() != N) throw std::invalid_argument("GroupSpec: dilation size mismatch");
    if (blocks.empty()) blocks.assign(1, N);
    int sum = 0;
    for (int a : blocks) {
        if (a < 1) throw std::invalid_argument("GroupSpec: block sizes must be >= 1");
        sum += a;
    }
    if (sum != N) throw std::invalid_argument("GroupSpec: block sizes must sum to N");
    g.blocks = std::move(blocks);
    validate_law(N, g.dil.d, law);
    g.law = std::move(law);
    g.left_P = field_table(N, g.law, Side::Left);
    g.right_P = field_table(N, g.law, Side::Right);
    g.name = std::move(name);
    verify_group_axioms(g);
    return g;
}

} // namespace

GroupSpec make_abelian(int N, std::vector<Rational> d, std::vector<int> blocks) {
    GroupLaw law;
    law.N = N;
    law.M.assign(N, Poly(2 * N));
    return finish_group(N, std::move(d), std::move(blocks), std::move(law), "abelian");
}

GroupSpec make_heisenberg() {
    const int N = 3;
    GroupLaw law;
    law.N = N;
    law.M.assign(N, Poly(2 * N));
    // (x.y)_3 = x_3 + y_3 + x_1 y_2
    law.M[2] = Poly::var(2 * N, 0) * Poly::var(2 * N, N + 1);
    return finish_group(N, {Rational(1), Rational(1), Rational(2)}, {2, 1}, std::move(law),
                        "heisenberg");
}

GroupSpec make_engel_step3() {
    // Step-3 filiform algebra [e1,e2]=e3, [e1,e3]=e4 with the BCH product
    // truncated at brackets of length 3 (all longer brackets vanish).
    const int N = 4;
    const int V = 2 * N;
    auto x = [&](int i) { return Poly::var(V, i); };
    auto y = [&](int i) { return Poly::var(V, N + i); };
    GroupLaw law;
    law.N = N;
    law.M.assign(N, Poly(V));
    // z_3 = x_3 + y_3 + (1/2)(x_1 y_2 - x_2 y_1)
    law.M[2] = 0.5 * (x(0) * y(1) - x(1) * y(0));
    // z_4 = x_4 + y_4 + (1/2)(x_1 y_3 - x_3 y_1)
    //       + (1/12)(x_1^2 y_2 - x_1 x_2 y_1) + (1/12)(y_1^2 x_2 - y_1 y_2 x_1)
    law.M[3] = 0.5 * (x(0) * y(2) - x(2) * y(0)) +
               (1.0 / 12.0) * (x(0) * x(0) * y(1) - x(0) * x(1) * y(0)) +
               (1.0 / 12.0) * (y(0) * y(0) * x(1) - y(0) * y(1) * x(0));
    return finish_group(N, {Rational(1), Rational(1), Rational(2), Rational(3)}, {2, 1, 1},
                        std::move(law), "engel_step3");
}

GroupSpec make_custom(int N, std::vector<Rational> d, std::vector<int> blocks, GroupLaw law,
                      const std::string& name) {
    return finish_group(N, std::move(d), std::move(blocks), std::move(law), name);
}

Point multiply(const GroupSpec& g, const Point& x, const Point& y) {
    if (x.size() != g.N || y.size() != g.N)
        throw std::invalid_argument("multiply: dimension mismatch");
    Point z(g.N);
    Eigen::VectorXd args(2 * g.N);
    args.head(g.N) = x;
    args.tail(g.N) = y;
    for (int k = 0; k < g.N; ++k)
        z[k] = x[k] + y[k] + (g.law.M[k].is_zero() ? 0.0 : g.law.M[k].eval(args));
    return z;
}

Point inverse(const GroupSpec& g, const Point& x) {
    // Triangular back-substitution: y_k = -x_k - M_k(x, y) uses only y_j, j < k.
    Point y = Point::Zero(g.N);
    Eigen::VectorXd args(2 * g.N);
    args.head(g.N) = x;
    for (int k = 0; k < g.N; ++k) {
        args.tail(g.N) = y;
        y[k] = -x[k] - (g.law.M[k].is_zero() ? 0.0 : g.law.M[k].eval(args));
    }
    return y;
}

Point dilate(const GroupSpec& g, double r, const Point& x) {
    if (!(r > 0)) throw std::invalid_argument("dilate: r must be positive");
    Point z(g.N);
    for (int j = 0; j < g.N; ++j) z[j] = std::pow(r, g.dil.d[j].value()) * x[j];
    return z;
}

Point dilate_blocks(const GroupSpec& g, const Eigen::VectorXd& r_per_block, const Point& x) {
    if (r_per_block.size() != g.nblocks())
        throw std::invalid_argument("dilate_blocks: block count mismatch");
    Point z(g.N);
    for (int l = 0; l < g.nblocks(); ++l) {
        const double r = r_per_block[l];
        if (!(r > 0)) throw std::invalid_argument("dilate_blocks: r must be positive");
        const int s = g.block_start(l);
        for (int j = 0; j < g.blocks[l]; ++j)
            z[s + j] = std::pow(r, g.dil.d[s + j].value()) * x[s + j];
    }
    return z;
}

double partial_norm(const GroupSpec& g, const Point& x, int block_l) {
    if (block_l < 0 || block_l >= g.nblocks())
        throw std::invalid_argument("partial_norm: block index out of range");
    const int s = g.block_start(block_l);
    double v = 0.0;
    for (int j = 0; j < g.blocks[block_l]; ++j)
        v = std::max(v, std::pow(std::abs(x[s + j]), 1.0 / g.dil.d[s + j].value()));
    return v;
}

double homogeneous_norm(const GroupSpec& g, const Point& x) {
    double v = 0.0;
    for (int j = 0; j < g.N; ++j)
        v = std::max(v, std::pow(std::abs(x[j]), 1.0 / g.dil.d[j].value()));
    return v;
}

void verify_group_axioms(const GroupSpec& g, double tol) {
    const int N = g.N;
    // Identity, symbolically: M_k(x,0) = M_k(0,y) = 0.
    for (int k = 0; k < N; ++k) {
        for (const auto& [mono, c] : g.law.M[k].terms) {
            bool has_x = false, has_y = false;
            for (int i = 0; i < N; ++i) has_x |= mono[i] > 0;
            for (int i = N; i < 2 * N; ++i) has_y |= mono[i] > 0;
            if ((!has_x || !has_y) && std::abs(c) > tol)
                throw std::runtime_error("group axioms: origin is not a two-sided identity");
        }
    }
    // Associativity, symbolically over 3N variables (x, y, z).
    const int V = 3 * N;
    std::vector<Poly> xs, ys, zs;
    for (int i = 0; i < N; ++i) {
        xs.push_back(Poly::var(V, i));
        ys.push_back(Poly::var(V, N + i));
        zs.push_back(Poly::var(V, 2 * N + i));
    }
    const std::vector<Poly> xy_z = law_apply(g.law, law_apply(g.law, xs, ys), zs);
    const std::vector<Poly> x_yz = law_apply(g.law, xs, law_apply(g.law, ys, zs));
    for (int k = 0; k < N; ++k) {
        Poly diff = xy_z[k] - x_yz[k];
        diff.prune(tol);
        if (!diff.is_zero()) {
            std::ostringstream os;
            os << "group axioms: associativity fails in coordinate " << (k + 1) << ": residual "
               << diff.str();
            throw std::runtime_error(os.str());
        }
    }
    // Inverse: x . x^{-1} = 0 on a few deterministic sample points.
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int t = 0; t < 16; ++t) {
        Point x(N);
        for (int j = 0; j < N; ++j) x[j] = U(rng);
        const Point r = multiply(g, x, inverse(g, x));
        if (r.cwiseAbs().maxCoeff() > tol * (1.0 + x.cwiseAbs().maxCoeff()))
            throw std::runtime_error("group axioms: triangular inverse fails");
    }
    // Field coefficients are homogeneous of degree d_l - d_k and vanish for d_l <= d_k.
    for (Side side : {Side::Left, Side::Right}) {
        const auto& P = side == Side::Left ? g.left_P : g.right_P;
        for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l) {
                if (P[k][l].is_zero()) continue;
                if (!(g.dil.d[k] < g.dil.d[l]))
                    throw std::runtime_error("group axioms: field coefficient with d_l <= d_k");
                HomoPolynomial::checked(P[k][l], g.dil.d[l] - g.dil.d[k], g.dil.d);
            }
    }
}

const std::vector<std::vector<Poly>>& invariant_fields(const GroupSpec& g, Side side) {
    return side == Side::Left ? g.left_P : g.right_P;
}

std::vector<std::vector<Poly>> euclid_in_fields(const GroupSpec& g, Side side) {
    const int N = g.N;
    const auto& P = invariant_fields(g, side);
    // Z_k = sum_l A[k][l] d/dx_l with A = I + B, B[k][l] = P^l_k strictly triangular.
    // Inverting pointwise over the polynomial ring: E = sum_j (-B)^j.
    std::vector<std::vector<Poly>> E(N, std::vector<Poly>(N, Poly(N)));
    std::vector<std::vector<Poly>> power(N, std::vector<Poly>(N, Poly(N)));
    for (int k = 0; k < N; ++k) {
        E[k][k] = Poly::constant(N, 1.0);
        power[k][k] = Poly::constant(N, 1.0);
    }
    for (int j = 1; j < N; ++j) {
        std::vector<std::vector<Poly>> next(N, std::vector<Poly>(N, Poly(N)));
        bool any = false;
        for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l) {
                Poly s(N);
                for (int m = 0; m < N; ++m)
                    if (!power[k][m].is_zero() && !P[m][l].is_zero())
                        s = s + power[k][m] * (-1.0 * P[m][l]);
                next[k][l] = s;
                any |= !s.is_zero();
            }
        power.swap(next);
        if (!any) break;
        for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l) E[k][l] = E[k][l] + power[k][l];
    }
    return E;
}

Poly apply_field(const GroupSpec& g, Side side, int k, const Poly& f) {
    const auto& P = invariant_fields(g, side);
    Poly r = f.deriv(k);
    for (int l = 0; l < g.N; ++l)
        if (!P[k][l].is_zero()) r = r + P[k][l] * f.deriv(l);
    return r;
}

Poly apply_expansion(const GroupSpec& g, Side side,
                     const std::vector<FieldMonomialTerm>& terms, const Poly& f) {
    Poly out(g.N);
    for (const auto& t : terms) {
        Poly h = f;
        for (auto it = t.js.rbegin(); it != t.js.rend(); ++it)
            h = apply_field(g, side, *it, h);
        out = out + t.coeff * h;
    }
    return out;
}

namespace {

/// A differential operator sum_beta c_beta(x) d^beta in Euclidean form.
using DOp = std::map<Monomial, Poly>;

void dop_add(DOp& A, const Monomial& beta, const Poly& c) {
    auto it = A.find(beta);
    if (it == A.end())
        A.emplace(beta, c);
    else {
        it->second = it->second + c;
        it->second.prune(1e-14);
        if (it->second.is_zero()) A.erase(it);
    }
}

DOp field_as_op(const GroupSpec& g, Side side, int k) {
    const auto& P = invariant_fields(g, side);
    DOp op;
    Monomial ek(g.N, 0);
    ek[k] = 1;
    op.emplace(ek, Poly::constant(g.N, 1.0));
    for (int l = 0; l < g.N; ++l)
        if (!P[k][l].is_zero()) {
            Monomial el(g.N, 0);
            el[l] = 1;
            dop_add(op, el, P[k][l]);
        }
    return op;
}

void enumerate_sub(const Monomial& beta, Monomial& cur, std::size_t pos,
                   const std::function<void(const Monomial&)>& fn) {
    if (pos == beta.size()) {
        fn(cur);
        return;
    }
    for (int e = 0; e <= beta[pos]; ++e) {
        cur[pos] = e;
        enumerate_sub(beta, cur, pos + 1, fn);
    }
    cur[pos] = 0;
}

double multi_binom(const Monomial& beta, const Monomial& sub) {
    double b = 1.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        double c = 1.0;
        for (int j = 0; j < sub[i]; ++j) c = c * (beta[i] - j) / (j + 1);
        b *= c;
    }
    return b;
}

/// Operator composition (A o B) f = A (B f), with the Leibniz rule.
DOp dop_compose(const DOp& A, const DOp& B, int N) {
    DOp R;
    for (const auto& [beta, a] : A)
        for (const auto& [gamma, b] : B) {
            Monomial cur(N, 0);
            enumerate_sub(beta, cur, 0, [&](const Monomial& sub) {
                Poly db = b;
                for (int i = 0; i < N; ++i)
                    for (int e = 0; e < sub[i]; ++e) db = db.deriv(i);
                if (db.is_zero()) return;
                Monomial out(N, 0);
                for (int i = 0; i < N; ++i) out[i] = beta[i] - sub[i] + gamma[i];
                dop_add(R, out, multi_binom(beta, sub) * (a * db));
            });
        }
    return R;
}

} // namespace

std::vector<FieldMonomialTerm> fields_from_euclid(const GroupSpec& g,
                                                  const std::vector<int>& orders, Side side) {
    if (orders.size() > 4)
        throw std::invalid_argument("fields_from_euclid: at most 4 derivatives supported");
    const int N = g.N;
    for (int k : orders)
        if (k < 0 || k >= N) throw std::invalid_argument("fields_from_euclid: bad index");

    Monomial beta0(N, 0);
    for (int k : orders) beta0[k] += 1;
    DOp target;
    target.emplace(beta0, Poly::constant(N, 1.0));

    auto weight = [&](const Monomial& beta) {
        Rational w(0);
        for (int i = 0; i < N; ++i) w = w + beta[i] * g.dil.d[i];
        return w;
    };
    auto order_of = [](const Monomial& beta) {
        int s = 0;
        for (int e : beta) s += e;
        return s;
    };
    // Elimination order: weight ascending, then derivative order descending,
    // then lexicographic. Every correction introduced by eliminating a term is
    // strictly later in this order, so the loop terminates.
    auto earlier = [&](const Monomial& a, const Monomial& b) {
        const Rational wa = weight(a), wb = weight(b);
        if (wa != wb) return wa < wb;
        const int oa = order_of(a), ob = order_of(b);
        if (oa != ob) return oa > ob;
        return a < b;
    };

    std::vector<FieldMonomialTerm> out;
    for (int iter = 0; iter < 20000; ++iter) {
        for (auto it = target.begin(); it != target.end();) {
            it->second.prune(1e-12);
            it = it->second.is_zero() ? target.erase(it) : std::next(it);
        }
        if (target.empty()) return out;
        auto best = target.begin();
        for (auto it = target.begin(); it != target.end(); ++it)
            if (earlier(it->first, best->first)) best = it;
        const Monomial beta = best->first;
        const Poly coeff = best->second;
        std::vector<int> js;
        for (int i = 0; i < N; ++i)
            for (int e = 0; e < beta[i]; ++e) js.push_back(i);
        DOp z;
        z.emplace(Monomial(N, 0), Poly::constant(N, 1.0));
        // Composition in ascending index order: Z_{j1} o ... o Z_{js}.
        for (auto it = js.rbegin(); it != js.rend(); ++it)
            z = dop_compose(field_as_op(g, side, *it), z, N);
        out.push_back({js, coeff});
        for (const auto& [gmono, c] : z) dop_add(target, gmono, -1.0 * (coeff * c));
    }
    throw std::runtime_error("fields_from_euclid: elimination failed to terminate");
}

nlohmann::json group_to_json(const GroupSpec& g) {
    nlohmann::json j;
    j["N"] = g.N;
    auto& d = j["d"] = nlohmann::json::array();
    for (const auto& e : g.dil.d) {
        if (e.den == 1)
            d.push_back(e.num);
        else
            d.push_back(nlohmann::json::array({e.num, e.den}));
    }
    j["blocks"] = g.blocks;
    auto& law = j["law"] = nlohmann::json::array();
    for (int k = 0; k < g.N; ++k) {
        if (g.law.M[k].is_zero()) continue;
        nlohmann::json e;
        e["k"] = k + 1;
        auto& ms = e["monomials"] = nlohmann::json::array();
        for (const auto& [mono, c] : g.law.M[k].terms) {
            nlohmann::json t;
            t["c"] = c;
            t["ax"] = std::vector<int>(mono.begin(), mono.begin() + g.N);
            t["ay"] = std::vector<int>(mono.begin() + g.N, mono.end());
            ms.push_back(t);
        }
        law.push_back(e);
    }
    j["name"] = g.name;
    return j;
}

GroupSpec group_from_json(const nlohmann::json& j) {
    const int N = j.at("N").get<int>();
    std::vector<Rational> d;
    for (const auto& e : j.at("d")) {
        if (e.is_array())
            d.emplace_back(e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>());
        else
            d.emplace_back(e.get<std::int64_t>());
    }
    std::vector<int> blocks = j.value("blocks", std::vector<int>{});
    GroupLaw law;
    law.N = N;
    law.M.assign(N, Poly(2 * N));
    if (j.contains("law"))
        for (const auto& e : j.at("law")) {
            const int k = e.at("k").get<int>() - 1;
            for (const auto& t : e.at("monomials")) {
                const auto ax = t.at("ax").get<std::vector<int>>();
                const auto ay = t.at("ay").get<std::vector<int>>();
                Monomial m(2 * N, 0);
                for (int i = 0; i < N; ++i) {
                    m[i] = ax.at(i);
                    m[N + i] = ay.at(i);
                }
                law.M[k].add_term(m, t.at("c").get<double>());
            }
        }
    return make_custom(N, std::move(d), std::move(blocks), std::move(law),
                       j.value("name", std::string("custom")));
}

} // namespace flaglab
