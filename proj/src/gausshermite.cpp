#include "flaglab/gausshermite.hpp"

#include <cmath>
#include <stdexcept>

namespace flaglab {

double hermite_prob(int n, double x) {
    double h0 = 1.0, h1 = x;
    if (n == 0) return h0;
    for (int k = 1; k < n; ++k) {
        const double h2 = x * h1 - k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

GH1D GH1D::gaussian(double sigma, double coeff) { return {{{0, sigma, coeff}}}; }
GH1D GH1D::dgaussian(int order, double sigma, double coeff) { return {{{order, sigma, coeff}}}; }

double GH1D::operator()(double x) const {
    double v = 0.0;
    for (const auto& t : terms) {
        const double u = x / t.sigma;
        const double g = std::exp(-0.5 * u * u) / (t.sigma * std::sqrt(2.0 * M_PI));
        const double sign = t.a % 2 ? -1.0 : 1.0;
        v += t.coeff * sign * std::pow(t.sigma, -t.a) * hermite_prob(t.a, u) * g;
    }
    return v;
}

std::complex<double> GH1D::fourier(double xi) const {
    std::complex<double> v = 0.0;
    const std::complex<double> ix(0.0, xi);
    for (const auto& t : terms)
        v += t.coeff * std::pow(ix, t.a) * std::exp(-0.5 * t.sigma * t.sigma * xi * xi);
    return v;
}

GH1D GH1D::deriv() const {
    GH1D r = *this;
    for (auto& t : r.terms) t.a += 1;
    return r;
}

GH1D GH1D::dilate(double d, int i) const {
    // 2^{-di} f(2^{-di} x) for f = c d^a G_sigma equals c (sigma'/sigma)^a
    // d^a G_{sigma'} with sigma' = sigma 2^{di}: the width expands and the
    // coefficient absorbs the order (transform side: c (i xi)^a
    // exp(-sigma'^2 xi^2/2) = f-hat(2^{di} xi)).
    GH1D r = *this;
    for (auto& t : r.terms) {
        t.coeff *= std::exp2(static_cast<double>(t.a) * d * i);
        t.sigma *= std::exp2(d * i);
    }
    return r;
}

GH1D GH1D::operator*(double s) const {
    GH1D r = *this;
    for (auto& t : r.terms) t.coeff *= s;
    return r;
}

GH1D GH1D::operator+(const GH1D& o) const {
    GH1D r = *this;
    r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
    return r;
}

GH1D GH1D::conv(const GH1D& o) const {
    GH1D r;
    for (const auto& t : terms)
        for (const auto& u : o.terms)
            r.terms.push_back({t.a + u.a, std::hypot(t.sigma, u.sigma), t.coeff * u.coeff});
    return r;
}

double GH1D::mass() const {
    double m = 0.0;
    for (const auto& t : terms)
        if (t.a == 0) m += t.coeff;
    return m;
}

GHTensor GHTensor::product(const std::vector<GH1D>& axes, double coeff) {
    GHTensor r;
    r.N = static_cast<int>(axes.size());
    r.parts.push_back({coeff, axes});
    return r;
}

double GHTensor::operator()(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& p : parts) {
        double t = p.coeff;
        for (int j = 0; j < N; ++j) t *= p.axes[j](x[j]);
        v += t;
    }
    return v;
}

std::complex<double> GHTensor::fourier(const Eigen::VectorXd& xi) const {
    std::complex<double> v = 0.0;
    for (const auto& p : parts) {
        std::complex<double> t = p.coeff;
        for (int j = 0; j < N; ++j) t *= p.axes[j].fourier(xi[j]);
        v += t;
    }
    return v;
}

GHTensor GHTensor::conv(const GHTensor& o) const {
    if (N != o.N) throw std::invalid_argument("GHTensor::conv: dimension mismatch");
    GHTensor r;
    r.N = N;
    for (const auto& p : parts)
        for (const auto& q : o.parts) {
            GHSep s;
            s.coeff = p.coeff * q.coeff;
            for (int j = 0; j < N; ++j) s.axes.push_back(p.axes[j].conv(q.axes[j]));
            r.parts.push_back(std::move(s));
        }
    return r;
}

GHTensor GHTensor::deriv_axis(int j) const {
    GHTensor r = *this;
    for (auto& p : r.parts) p.axes[j] = p.axes[j].deriv();
    return r;
}

GHTensor GHTensor::operator+(const GHTensor& o) const {
    GHTensor r = *this;
    r.parts.insert(r.parts.end(), o.parts.begin(), o.parts.end());
    return r;
}

GHTensor GHTensor::scaled(double s) const {
    GHTensor r = *this;
    for (auto& p : r.parts) p.coeff *= s;
    return r;
}

GHTensor GHTensor::dilate(const std::vector<double>& d, const std::vector<int>& i) const {
    GHTensor r = *this;
    for (auto& p : r.parts)
        for (int j = 0; j < N; ++j) p.axes[j] = p.axes[j].dilate(d[j], i[j]);
    return r;
}

double GHTensor::mass() const {
    double m = 0.0;
    for (const auto& p : parts) {
        double t = p.coeff;
        for (int j = 0; j < N; ++j) t *= p.axes[j].mass();
        m += t;
    }
    return m;
}

} // namespace flaglab
