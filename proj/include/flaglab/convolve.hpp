#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flaglab/bump.hpp"
#include "flaglab/combinatorics.hpp"
#include "flaglab/gausshermite.hpp"
#include "flaglab/grid.hpp"
#include "flaglab/group.hpp"
#include "flaglab/kernel.hpp"

namespace flaglab {

using PointFn = std::function<double(const Eigen::VectorXd&)>;

/**
 * Group convolution (f*h)(x) = int f(x . y^{-1}) h(y) dy by product trapezoid
 * over the quadrature grid, whose box must cover h's effective support. The
 * h values are cached over the nodes once per call.
 */
double convolve_at(const GroupSpec& g, const PointFn& f, const PointFn& h, const Grid& quad,
                   const Eigen::VectorXd& x);
GridFunction convolve(const GroupSpec& g, const PointFn& f, const PointFn& h, const Grid& quad,
                      const Grid& out);

/// Direct lattice convolution of two sampled factors on a common abelian grid
/// (zero extension beyond the box).
GridFunction convolve_abelian_direct(const GridFunction& f, const GridFunction& h);
/// Same values via per-axis discrete Fourier transforms on the zero-padded
/// grid; agrees with the direct path to rounding.
GridFunction convolve_abelian_dft(const GridFunction& f, const GridFunction& h);

/// Invariant field Z_k (chosen side) applied pointwise to a closed-form bump.
double field_apply(const GroupSpec& g, Side side, int k, const BumpSpec& f,
                   const Eigen::VectorXd& x);

struct SupportReport {
    double rho = 0.0;            // common support radius of the factors
    double radius = 0.0;         // measured homogeneous support radius of theta
    double C = 0.0;              // radius / rho
    double seminorm_ratio = 0.0; // ||theta||_(m) / (||phi||_(m) ||psi||_(m))
    bool pass = false;
};

/**
 * Support lemma check: theta = [conv]_{-(I v J)} for compactly supported
 * factors of radius rho; measures the homogeneous radius of theta's support
 * (threshold 1e-8 of its sup) and, when seminorm_order >= 0, the m-seminorm
 * product ratio on the probe grid.
 */
SupportReport verify_support_lemma(const GroupSpec& g, const Partition& p, const BumpSpec& phi,
                                   const BumpSpec& psi, const MultiIndex& I, const MultiIndex& J,
                                   int quad_nodes = 21, int probe_nodes = 17,
                                   int seminorm_order = -1);

struct DecayReport {
    double eps_hat = 0.0;
    double r2 = 0.0;
    double prefactor = 0.0;
    std::vector<double> gaps;     // |i - j| per sweep entry
    std::vector<double> lognorms; // log2 sup|theta_ij|
    bool pass = false;
};

/**
 * Cross-scale decay sweep on the line: for |i - j| <= max_gap the undilated
 * convolution theta_ij = 2^{(i v j) Q} ([phi]_i * [psi]_j)(delta_{2^{i v j}} x)
 * is evaluated in closed form and log2 sup|theta_ij| is regressed against
 * -|i - j|. PASS iff the fitted exponent is positive with R^2 > 0.9.
 */
DecayReport verify_decay(const GH1D& phi, const GH1D& psi, int max_gap, int index_radius = 6);

struct TruncatedWidthReport {
    FlagEstimateReport base;     // width a+b size check of K * psi_b (plain)
    std::vector<double> bs;      // swept mollifier widths
    std::vector<double> c_plain; // C_0 vs width a+b, mass-one mollifier
    std::vector<double> c_zero;  // C_0 vs width a+b, mean-zero mollifier
    std::vector<double> factors; // c_zero / c_plain, the measured improvement
    double linearity = 0.0;      // max rel deviation of factors[t]/bs[t] from mean
    bool pass = false;
};

/**
 * Width arithmetic for truncated kernels on abelian groups (closed form):
 * K truncated of width a convolved with a width-b bump passes the width a+b
 * check, and the improvement factor gained by making the mollifier mean-zero
 * in its first axis scales linearly in b, checked within linearity_tol over
 * the swept widths.
 */
TruncatedWidthReport truncated_width_arithmetic(const GroupSpec& g, const Partition& p,
                                                const GHTensor& K, double a,
                                                const std::vector<double>& bs,
                                                const std::vector<Eigen::VectorXd>& samples,
                                                double linearity_tol = 0.20);

struct CrossNormTable {
    std::vector<MultiIndex> window;
    Eigen::MatrixXd l1_tilde_first;  // || [phi~]_J * [phi]_I ||_1
    Eigen::MatrixXd l1_tilde_second; // || [phi]_I * [phi~]_J ||_1
    double eps_hat = 0.0;
    double max_row_sum = 0.0; // max_I sum_J sqrt(entry)
    bool pass = false;
};

/// All pairwise L1 cross norms of a GH family over the window (|F| <= 200),
/// with the fitted gap exponent and the square-root row-sum witness.
CrossNormTable cross_norm_table(const GroupSpec& g, const BumpFamily& fam,
                                const std::vector<MultiIndex>& window);

struct CompositionClass {
    ShuffleClass mu;
    BlockPattern pattern;
    /// Embedded join tuple K (one value per coordinate) and the accumulated
    /// dilated kernel sum_{(I,J) in class, join K} [phi]_I * [psi]_J.
    std::vector<std::pair<std::vector<int>, GHTensor>> kernels;
    double cauchy_rel = 0.0;           // relative change when the free range halves
    std::vector<double> marginal_sup;  // per merged block: worst marginal sup over K
    FlagEstimateReport size;           // class kernel sized against its pattern
};

/**
 * Composition pipeline on an abelian group: every factor pair is convolved in
 * closed form, grouped by shuffle class and join; free indices extend
 * free_ext steps beyond the base window (the Cauchy check compares against
 * the half extension on the probe points). When size_samples is nonempty each
 * summed class kernel is sized against its block-pattern partition.
 */
std::vector<CompositionClass> compose_kernels_abelian(
    const GroupSpec& g, const BumpFamily& famA, const BumpFamily& famB, int window_radius,
    int free_ext, const std::vector<Eigen::VectorXd>& probes,
    const std::vector<Eigen::VectorXd>& size_samples = {});

/// Reflection phi~(x) = phi(-x) within the closed-form class.
GH1D gh_reflect(const GH1D& f);
GHTensor gh_reflect(const GHTensor& f);

/// L1 norm of a closed-form sum by adaptive-extent trapezoid per axis.
double gh_l1(const GHTensor& f, int nodes_per_axis = 2049);

} // namespace flaglab
