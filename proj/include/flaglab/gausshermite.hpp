#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace flaglab {

/**
 * Closed-form algebra of one-dimensional functions sum_t c_t d^{a_t} G_{s_t},
 * where G_s is the mass-one Gaussian of width s. The class is closed under
 * derivative, dyadic rescaling, and convolution:
 *   (d^a G_s) * (d^b G_r) = d^{a+b} G_{sqrt(s^2+r^2)}.
 * Used as an exact oracle against quadrature convolution and for abelian
 * Fourier checks: the transform of d^a G_s is (i xi)^a exp(-s^2 xi^2 / 2).
 */
struct GH1D {
    struct Term {
        int a = 0;          // derivative order
        double sigma = 1.0; // Gaussian width
        double coeff = 1.0;
    };
    std::vector<Term> terms;

    static GH1D gaussian(double sigma, double coeff = 1.0);
    static GH1D dgaussian(int order, double sigma, double coeff = 1.0);

    double operator()(double x) const;
    std::complex<double> fourier(double xi) const;
    GH1D deriv() const;
    /// L1-preserving dyadic dilate: f_i(x) = 2^{-d i} f(2^{-d i} x).
    GH1D dilate(double d, int i) const;
    GH1D operator*(double s) const;
    GH1D operator+(const GH1D& o) const;
    /// Group (abelian) convolution, exact.
    GH1D conv(const GH1D& o) const;
    /// Total integral (only the a = 0 terms contribute).
    double mass() const;
};

/// Probabilists' Hermite polynomial He_n(x).
double hermite_prob(int n, double x);

/**
 * Finite sums of separable products of GH1D factors on R^N; closed under the
 * same operations, with convolution acting per axis (abelian groups only).
 */
struct GHSep {
    double coeff = 1.0;
    std::vector<GH1D> axes;
};

struct GHTensor {
    int N = 0;
    std::vector<GHSep> parts;

    static GHTensor product(const std::vector<GH1D>& axes, double coeff = 1.0);
    double operator()(const Eigen::VectorXd& x) const;
    std::complex<double> fourier(const Eigen::VectorXd& xi) const;
    GHTensor conv(const GHTensor& o) const;
    GHTensor operator+(const GHTensor& o) const;
    /// Partial derivative along one axis (exact within the class).
    GHTensor deriv_axis(int j) const;
    GHTensor scaled(double s) const;
    /// Per-axis L1 dilate with exponents d (one entry per axis).
    GHTensor dilate(const std::vector<double>& d, const std::vector<int>& i_per_axis) const;
    double mass() const;
};

} // namespace flaglab
