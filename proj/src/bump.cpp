#include "flaglab/bump.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flaglab {

double bump_profile(double t) {
    const double u2 = t * t;
    if (u2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u2));
}

double bump_profile_deriv(double t) {
    const double u2 = t * t;
    if (u2 >= 1.0) return 0.0;
    const double d = 1.0 - u2;
    return bump_profile(t) * (-2.0 * t / (d * d));
}

double bump_profile_mass() {
    // One-time composite quadrature; the integrand is C^infinity with all
    // derivatives vanishing at the endpoints, so the trapezoid rule converges
    // faster than any power of the step.
    static const double mass = [] {
        const int n = 1 << 14;
        double s = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double t = -1.0 + 2.0 * k / n;
            const double w = (k == 0 || k == n) ? 0.5 : 1.0;
            s += w * bump_profile(t);
        }
        return s * (2.0 / n);
    }();
    return mass;
}

double smooth_step(double t) {
    auto e = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
    const double a = e(t), b = e(1.0 - t);
    return a / (a + b);
}

namespace {

std::vector<long long> norm_exponents(const DilationStructure& d, const std::vector<int>& axes) {
    long long P = 1;
    for (int j : axes) P = std::lcm(P, static_cast<long long>(d.d[j].num));
    std::vector<long long> e;
    e.push_back(2 * P); // stash 2P in front
    for (int j : axes) e.push_back(2 * P * d.d[j].den / d.d[j].num);
    return e;
}

} // namespace

double smooth_norm(const DilationStructure& d, const Eigen::VectorXd& x,
                   const std::vector<int>& axes) {
    const auto e = norm_exponents(d, axes);
    double s = 0.0;
    for (std::size_t k = 0; k < axes.size(); ++k)
        s += std::pow(std::abs(x[axes[k]]), static_cast<double>(e[k + 1]));
    return std::pow(s, 1.0 / static_cast<double>(e[0]));
}

double smooth_norm(const DilationStructure& d, const Eigen::VectorXd& x) {
    std::vector<int> all(x.size());
    for (int j = 0; j < x.size(); ++j) all[j] = j;
    return smooth_norm(d, x, all);
}

double BumpSpec::operator()(const Eigen::VectorXd& x) const {
    double v = amplitude;
    Eigen::VectorXd y = scale.cwiseProduct(x);
    for (int j = 0; j < N; ++j) {
        const double t = y[j] / width[j];
        v *= env == Envelope::Gaussian ? std::exp(-0.5 * t * t) : bump_profile(t);
        if (v == 0.0) return 0.0;
    }
    return v * pre.eval(y);
}

namespace {

// Richardson-extrapolated 4th-order central difference of g along axis j.
double fd_deriv(const std::function<double(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& x,
                int j, double h) {
    auto d4 = [&](double step) {
        Eigen::VectorXd p = x;
        auto at = [&](double off) {
            p[j] = x[j] + off;
            return g(p);
        };
        return (-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step);
    };
    return (16.0 * d4(h / 2) - d4(h)) / 15.0;
}

} // namespace

double BumpSpec::deriv(const std::vector<int>& alpha, const Eigen::VectorXd& x) const {
    int order = 0;
    for (int a : alpha) order += a;
    if (order == 0) return (*this)(x);

    if (env == Envelope::Gaussian) {
        // Symbolic reduction in base coordinates: d_j (P G) = (d_j P - y_j/w_j^2 P) G.
        Poly P = pre;
        double factor = 1.0;
        for (int j = 0; j < N; ++j)
            for (int r = 0; r < alpha[j]; ++r) {
                P = P.deriv(j) - (1.0 / (width[j] * width[j])) * (Poly::var(N, j) * P);
                factor *= scale[j];
            }
        BumpSpec g = *this;
        g.pre = P;
        g.amplitude *= factor;
        // Re-evaluate with the reduced prefactor; alpha is now exhausted.
        double v = g.amplitude;
        Eigen::VectorXd y = scale.cwiseProduct(x);
        for (int j = 0; j < N; ++j) {
            const double t = y[j] / width[j];
            v *= std::exp(-0.5 * t * t);
        }
        return v * P.eval(y);
    }

    // Compact envelope: analytic product rule at first order, Richardson
    // differences on the analytic closure beyond.
    int j = N - 1;
    while (j >= 0 && alpha[j] == 0) --j;
    if (order == 1) {
        Eigen::VectorXd y = scale.cwiseProduct(x);
        double envprod = amplitude;
        for (int k = 0; k < N; ++k) envprod *= bump_profile(y[k] / width[k]);
        if (envprod == 0.0) return 0.0;
        const double u = y[j] / width[j];
        const double logd = bump_profile_deriv(u) / bump_profile(u) / width[j];
        return scale[j] * envprod * (pre.deriv(j).eval(y) + pre.eval(y) * logd);
    }
    std::vector<int> rest = alpha;
    rest[j] -= 1;
    auto g = [this, rest](const Eigen::VectorXd& p) { return deriv(rest, p); };
    return fd_deriv(g, x, j, 0.02 * width[j] / scale[j]);
}

std::function<double(const Eigen::VectorXd&)> BumpSpec::closure() const {
    BumpSpec copy = *this;
    return [copy](const Eigen::VectorXd& x) { return copy(x); };
}

namespace {

BumpSpec make_spec(int N, Envelope env, double w, Poly pre, Partition part) {
    BumpSpec f;
    f.N = N;
    f.pre = std::move(pre);
    f.env = env;
    f.width = Eigen::VectorXd::Constant(N, w);
    f.scale = Eigen::VectorXd::Ones(N);
    f.amplitude = 1.0;
    f.part = part.a.empty() ? Partition({N}) : std::move(part);
    if (f.part.N() != N) throw std::invalid_argument("BumpSpec: partition does not cover R^N");
    return f;
}

} // namespace

BumpSpec bump_gaussian(int N, double sigma, Poly pre, Partition part) {
    return make_spec(N, Envelope::Gaussian, sigma, std::move(pre), std::move(part));
}
BumpSpec bump_gaussian(int N, double sigma) {
    return bump_gaussian(N, sigma, Poly::constant(N, 1.0), Partition({N}));
}
BumpSpec bump_compact(int N, double rho, Poly pre, Partition part) {
    return make_spec(N, Envelope::Compact, rho, std::move(pre), std::move(part));
}
BumpSpec bump_compact(int N, double rho) {
    return bump_compact(N, rho, Poly::constant(N, 1.0), Partition({N}));
}

BumpSpec dilate_index(const BumpSpec& f, const MultiIndex& I, const DilationStructure& d) {
    if (static_cast<int>(I.size()) != f.part.n())
        throw std::invalid_argument("dilate_index: index length must match partition blocks");
    if (!is_monotone(I)) throw std::invalid_argument("dilate_index: index not monotone");
    BumpSpec g = f;
    double qsum = 0.0;
    for (int l = 0; l < f.part.n(); ++l) {
        double Q = 0.0;
        for (int j = f.part.block_start(l); j < f.part.block_start(l) + f.part.a[l]; ++j) {
            g.scale[j] *= std::exp2(-d.d[j].value() * I[l]);
            Q += d.d[j].value();
        }
        qsum += Q * I[l];
    }
    g.amplitude *= std::exp2(-qsum);
    return g;
}

double l1_mass(const BumpSpec& f) {
    Grid g;
    const int count = f.N <= 3 ? 65 : (f.N == 4 ? 33 : 17);
    for (int j = 0; j < f.N; ++j) {
        const double R = (f.env == Envelope::Gaussian ? 8.5 : 1.0) * f.width[j] / f.scale[j];
        g.axes.push_back({2.0 * R / (count - 1), count});
    }
    GridFunction s = sample(g, [&](const Eigen::VectorXd& x) { return std::abs(f(x)); });
    return integral(s);
}

GridFunction sample(const BumpSpec& f, const Grid& g) {
    return sample(g, f.closure());
}

double seminorm(const BumpSpec& f, const Grid& g, int m, SeminormKind kind) {
    double best = 0.0;
    std::vector<int> alpha(f.N, 0);
    std::function<void(int, int)> rec = [&](int from, int order) {
        const long T = g.total();
        for (long t = 0; t < T; ++t) {
            const Eigen::VectorXd x = g.point(g.unflat(t));
            double w = 1.0;
            if (kind == SeminormKind::Schwartz) w = std::pow(1.0 + x.norm(), m - order);
            best = std::max(best, w * std::abs(f.deriv(alpha, x)));
        }
        if (order == m) return;
        for (int j = from; j < f.N; ++j) {
            ++alpha[j];
            rec(j, order + 1);
            --alpha[j];
        }
    };
    rec(0, 0);
    return best;
}

} // namespace flaglab
