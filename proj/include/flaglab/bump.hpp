#pragma once

#include <functional>

#include <Eigen/Dense>

#include "flaglab/combinatorics.hpp"
#include "flaglab/grid.hpp"
#include "flaglab/group.hpp"
#include "flaglab/poly.hpp"

namespace flaglab {

/// The fixed C^infinity profile exp(1 - 1/(1-t^2)) on |t| < 1 (value 1 at 0).
double bump_profile(double t);
/// d/dt of the profile.
double bump_profile_deriv(double t);
/// Its total integral (computed once to machine precision).
double bump_profile_mass();
/// Smooth transition: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t);

/**
 * Smooth homogeneous norm |x| = (sum_j |x_j|^{2P/d_j})^{1/(2P)} with P chosen
 * so every exponent is an even integer; |delta_r x| = r |x|. The overload with
 * `axes` restricts the norm to a subset of coordinates (block norms).
 */
double smooth_norm(const DilationStructure& d, const Eigen::VectorXd& x);
double smooth_norm(const DilationStructure& d, const Eigen::VectorXd& x,
                   const std::vector<int>& axes);

enum class Envelope { Gaussian, Compact };

/**
 * Closed-form test function: amplitude * pre(y) * prod_j env(y_j / width_j)
 * with y_j = scale_j * x_j. The scale/amplitude fields record dyadic dilations
 * so dilates are evaluated exactly (no resampling error). The Gaussian
 * envelope is exp(-t^2/2); the Compact envelope is the fixed bump profile,
 * so the support is the box |x_j| <= width_j / scale_j.
 */
struct BumpSpec {
    int N = 0;
    Poly pre;
    Envelope env = Envelope::Gaussian;
    Eigen::VectorXd width;
    Eigen::VectorXd scale;
    double amplitude = 1.0;
    Partition part;

    double operator()(const Eigen::VectorXd& x) const;
    /**
     * Partial derivative of order alpha at x. Gaussian envelopes are
     * differentiated symbolically (exact to machine precision); compact
     * envelopes analytically at first order and by Richardson-extrapolated
     * central differences beyond.
     */
    double deriv(const std::vector<int>& alpha, const Eigen::VectorXd& x) const;
    std::function<double(const Eigen::VectorXd&)> closure() const;
};

BumpSpec bump_gaussian(int N, double sigma, Poly pre, Partition part);
BumpSpec bump_gaussian(int N, double sigma);
BumpSpec bump_compact(int N, double rho, Poly pre, Partition part);
BumpSpec bump_compact(int N, double rho);

/**
 * Dyadic dilate [f]_I relative to the spec's partition: value factor
 * 2^{-sum_l Q_l i_l}, coordinate factors 2^{-d_j i_(block of j)}.
 */
BumpSpec dilate_index(const BumpSpec& f, const MultiIndex& I, const DilationStructure& d);

/// Quadrature L1 mass on a support-adapted grid (extents follow the dilation).
double l1_mass(const BumpSpec& f);

GridFunction sample(const BumpSpec& f, const Grid& g);

/// Analytic-derivative seminorm over grid nodes (preferred over the
/// finite-difference path when a closed form is available).
double seminorm(const BumpSpec& f, const Grid& g, int m,
                SeminormKind kind = SeminormKind::Compact);

} // namespace flaglab
