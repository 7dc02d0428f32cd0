#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flaglab/convolve.hpp"

namespace flaglab {

/// All acceptable (monotone nondecreasing) dyadic scale tuples with entries
/// 2^lo .. 2^hi; `per_octave` > 1 refines the dyadic lattice geometrically.
std::vector<Eigen::VectorXd> acceptable_scales(int n, int lo, int hi, int per_octave = 1);

/**
 * Rectangle average (1/|R_s|) int_{R_s} |f(x . y^{-1})| dy over the acceptable
 * rectangle |y_j| <= s_{block(j)}^{d_j}, midpoint product rule.
 */
double rectangle_average(const GroupSpec& g, const Partition& p, const PointFn& f,
                         const Eigen::VectorXd& s, const Eigen::VectorXd& x, int nodes = 9);

/// Maximal function over the given acceptable tuples at one point.
double maximal_at(const GroupSpec& g, const Partition& p, const PointFn& f,
                  const std::vector<Eigen::VectorXd>& s_grid, const Eigen::VectorXd& x,
                  int nodes = 9);

/**
 * Lifted one-parameter maximal function of block k: averages of |f| over the
 * automorphic balls B^{(k)}(rho) = { |y_j| <= rho^{d_j}, block(j) >= k } with
 * the earlier coordinates frozen, sup over the rho grid.
 */
double lifted_maximal_at(const GroupSpec& g, const Partition& p, const PointFn& f, int k,
                         const std::vector<double>& rho_grid, const Eigen::VectorXd& x,
                         int nodes = 9);

/// The composition M~_n o ... o M~_1 applied to f (M~_1 acts first).
double lifted_chain_at(const GroupSpec& g, const Partition& p, const PointFn& f,
                       const std::vector<double>& rho_grid, const Eigen::VectorXd& x,
                       int nodes = 9);

struct CompositionBoundReport {
    double C = 0.0;         // max over samples of M f / (M~_n o ... o M~_1) f
    double refined_C = 0.0; // same with a twice-denser scale lattice
    bool pass = false;
    std::string note;
};

/// Composition bound sweep: PASS iff the measured constant is finite and
/// stable within `tol` under refining the scale grids.
CompositionBoundReport verify_composition_bound(const GroupSpec& g, const Partition& p,
                                                const PointFn& f,
                                                const std::vector<Eigen::VectorXd>& samples,
                                                int lo, int hi, int nodes = 9,
                                                double tol = 0.10);

/// Comparison function t_1...t_n prod_k (t_1+...+t_k + N_1+...+N_k)^{-Q_k-1}.
double gamma_fn(const GroupSpec& g, const Partition& p, const Eigen::VectorXd& t,
                const Eigen::VectorXd& x);

struct GammaComparisonReport {
    double worst = 0.0;
    std::vector<double> per_tuple; // max ratio over samples, per t-tuple
    bool pass = false;
};

/**
 * sup_t |f| * Gamma_t <= C M f over the sample points; the t grid may contain
 * non-monotone tuples. PASS iff the worst ratio stays below `bound`.
 */
GammaComparisonReport verify_gamma_comparison(const GroupSpec& g, const Partition& p,
                                              const PointFn& f,
                                              const std::vector<Eigen::VectorXd>& t_tuples,
                                              const std::vector<Eigen::VectorXd>& samples,
                                              double bound, int slo = -4, int shi = 6,
                                              int mnodes = 201, int qnodes = 257);

/**
 * The lifted product bump Phi_t = phi~^(1)_{t_1} * ... * phi~^(n)_{t_n} in
 * closed form on an abelian group with singleton blocks: each phi^(k) is a
 * Gaussian product on the subgroup G_k, mean zero through a first derivative
 * on axis k (mean_zero=false drops the derivative — negative control).
 */
GHTensor lifted_phi_t(const GroupSpec& g, const Eigen::VectorXd& t, bool mean_zero = true);

struct KernelGammaReport {
    double worst = 0.0;              // alpha = 0 ratio
    std::vector<double> worst_deriv; // per axis k, with the (t_1+..+t_k)^{d_k} weight
    std::vector<double> per_tuple;   // alpha = 0 ratio per t-tuple
    bool pass = false;
};

/// |K * Phi_t| / Gamma_t bounded over the sweep, plus the scaled-derivative
/// variants; PASS iff every ratio stays below `bound`.
KernelGammaReport verify_kernel_gamma(const GroupSpec& g, const Partition& p, const GHTensor& K,
                                      const std::vector<Eigen::VectorXd>& t_tuples,
                                      const std::vector<Eigen::VectorXd>& xs, bool mean_zero,
                                      double bound);

struct OrthogonalityReport {
    std::vector<double> log2_sep;   // log2 of the scale separation per sweep step
    std::vector<double> log2_gamma; // measured log2 sup_x |P_t T P*_s f| / MMf
    double delta_hat = 0.0;
    double r2 = 0.0;
    bool pass = false;
};

/**
 * Almost-orthogonality sweep on the line: gamma(s,t) measured against
 * MM f = M(M f) for random closed-form f, regressed on the min(s/t,t/s)^delta
 * template. PASS iff the fitted delta reaches `delta_floor`.
 */
OrthogonalityReport verify_almost_orthogonality(const GH1D& K, const GH1D& phi, int max_log,
                                                unsigned seed, double delta_floor);

/// Midpoint-in-log t grid, `per_decade` points per decade covering [lo, hi].
std::vector<double> log_grid(double lo, double hi, int per_decade = 8);

/// The calibrated scalar Calderon function sqrt(2) dG_1: mean zero with
/// int_0^inf |phi^(t xi)|^2 dt/t = 1 for every xi != 0.
GH1D calibrated_phi();

/// One-parameter square function S f(x) = (sum_t |f * phi_t(x)|^2 dln t)^{1/2}.
double square_S_at(const GH1D& f, const GH1D& phi, const std::vector<double>& tg, double x);

/**
 * Majorant square function frak-S with MM = M o M applied to each Q_t f before
 * squaring (one-dimensional, grid-cached maximal evaluations).
 */
double square_frakS_at(const GH1D& f, const GH1D& psi, const std::vector<double>& tg, double x,
                       int slo = -4, int shi = 4, int mnodes = 101, double R = 24.0,
                       int grid_nodes = 481);

struct PlancherelReport {
    double ratio = 0.0; // ||S f||_2 / ||f||_2
    bool pass = false;
};

/// Frame-bound check ||S f||_2 / ||f||_2 within [1/C, C] on the sampling box.
PlancherelReport verify_plancherel(const GH1D& f, const GH1D& phi, const std::vector<double>& tg,
                                   double R = 12.0, int nodes = 257, double C = 2.0);

/// sup over the frequency band of |sum_a |phi^(a xi) psi^(a xi)| da/a - 1|
/// (L2 operator norm of the reproducing-identity residual on the band).
double calderon_residual(const GH1D& phi, const GH1D& psi, const std::vector<double>& ag,
                         double xi_lo, double xi_hi, int xi_nodes = 257);

struct OperatorNormEstimate {
    std::string method;
    double value = 0.0;
    std::vector<double> trace; // per-iteration (or per-node-batch) estimates
    bool converged = false;
};

/// Abelian multiplier sup over the frequency grid nodes.
OperatorNormEstimate l2_norm_multiplier(const GHTensor& K, const Grid& freq);

/// Power iteration on T*T for the discretized (lattice) convolution with the
/// sampled kernel; relative eigenvalue residual `tol`, at most `max_iter`.
OperatorNormEstimate l2_norm_power(const GridFunction& K, int max_iter = 500,
                                   double tol = 1e-6, unsigned seed = 1);

/// L^p norm on the grid (trapezoid); p >= 1.
double lp_norm(const GridFunction& f, double p);

} // namespace flaglab
