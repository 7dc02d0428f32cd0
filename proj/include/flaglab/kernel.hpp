#pragma once

#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flaglab/bump.hpp"
#include "flaglab/combinatorics.hpp"
#include "flaglab/gausshermite.hpp"
#include "flaglab/group.hpp"

namespace flaglab {

/**
 * Finite sum of closed-form bumps. Mollifier splits and telescoping rewrites
 * turn a single product bump into a short sum of products, so sums are the
 * natural currency for kernel families.
 */
using BumpSum = std::vector<BumpSpec>;

double eval_sum(const BumpSum& s, const Eigen::VectorXd& x);
double deriv_sum(const BumpSum& s, const std::vector<int>& alpha, const Eigen::VectorXd& x);
BumpSum dilate_sum(const BumpSum& s, const MultiIndex& I, const DilationStructure& d);

enum class CancellationMode { Strong, Weak, None };

/**
 * Uniform family of normalized bumps indexed by monotone tuples, with its
 * declared cancellation mode. `gen` must return uniformly seminorm-bounded
 * members; `gh` is an optional closed-form twin used by the abelian Fourier
 * and convolution oracles (null when unavailable).
 */
struct BumpFamily {
    Partition p;
    CancellationMode mode = CancellationMode::Strong;
    double epsilon = 0.0; // weak-mode defect exponent
    std::function<BumpSum(const MultiIndex&)> gen;
    std::function<GHTensor(const MultiIndex&)> gh;
};

/// All monotone tuples of length n with entries in [-k, k].
std::vector<MultiIndex> monotone_window(int n, int k);

/**
 * Finite dyadic sum K = sum_{I in F} [phi^I]_I. Terms are stored pre-dilated
 * so evaluation and differentiation are literal finite sums of closed forms.
 */
struct KernelApprox {
    GroupSpec g;
    Partition p;
    std::vector<MultiIndex> window;
    std::vector<BumpSpec> terms;

    double operator()(const Eigen::VectorXd& x) const;
    double deriv(const std::vector<int>& alpha, const Eigen::VectorXd& x) const;
};

KernelApprox synthesize(const GroupSpec& g, const BumpFamily& fam,
                        const std::vector<MultiIndex>& window);

/// Closed-form synthesized kernel for families carrying a GH twin (abelian).
GHTensor synthesize_gh(const BumpFamily& fam, const DilationStructure& dil,
                       const std::vector<MultiIndex>& window);

/**
 * Size-estimate right-hand side at x for the per-coordinate derivative order
 * alpha: prod_k (a + N_1 + ... + N_k)^{-Q_k - [[alpha_k]]} with block weights
 * [[alpha_k]] = sum_{j in block k} alpha_j d_j. The improved truncated mode
 * multiplies by a / (a + N_1).
 */
double flag_rhs(const GroupSpec& g, const Partition& p, const Eigen::VectorXd& x,
                const std::vector<int>& alpha, double a = 0.0, bool improved = false);

/**
 * Log-spaced shell sample: random directions on the homogeneous unit sphere
 * whose first-block norm stays >= 2^-6, rescaled to radii 2^lo .. 2^hi.
 */
std::vector<Eigen::VectorXd> shell_samples(const GroupSpec& g, int per_shell, unsigned seed,
                                           int shell_lo = -4, int shell_hi = 4);

struct FlagEstimateReport {
    std::vector<std::pair<std::vector<int>, double>> constants; // per alpha
    std::vector<double> trace; // C_0 per nested window (saturation)
    bool pass = false;
    std::string note;
};

/// Smallest constants C_alpha over the samples for all |alpha| <= m; the
/// callable dK(alpha, x) supplies derivative values.
FlagEstimateReport flag_size_constants(
    const GroupSpec& g, const Partition& p,
    const std::function<double(const std::vector<int>&, const Eigen::VectorXd&)>& dK, int m,
    const std::vector<Eigen::VectorXd>& samples, double a = 0.0, bool improved = false);
FlagEstimateReport flag_size_constants(const KernelApprox& K, int m,
                                       const std::vector<Eigen::VectorXd>& samples,
                                       double a = 0.0, bool improved = false);

/**
 * Size verification with a window-saturation sweep: synthesizes the family on
 * [-k, k] for each listed radius, records the C_0 trace, and passes iff every
 * step with k >= stable_after increases the trace by less than stability_tol.
 * Constants are reported for the largest window.
 */
FlagEstimateReport verify_flag_size(const GroupSpec& g, const BumpFamily& fam,
                                    const std::vector<int>& window_radii, int m,
                                    const std::vector<Eigen::VectorXd>& samples,
                                    int stable_after = 4, double stability_tol = 0.05);

/// Truncated-kernel size check: a + N_1 + ... + N_k denominators; improved
/// mode carries the extra a / (a + N_1) factor.
FlagEstimateReport verify_truncated(const KernelApprox& K, double a, bool improved, int m,
                                    const std::vector<Eigen::VectorXd>& samples);

struct PairingReport {
    std::vector<double> constants; // one per admitted R-tuple
    double spread = 0.0;           // max / min of the constants
    bool pass = false;
    std::string note;
};

/**
 * Scaled pairings K#(x) = int K(x) psi(delta_R x_L) dx_L over the blocks in L
 * (quadrature on a box adapted to psi's scaled support), size-checked as a
 * kernel on the remaining blocks. With restricted=true only nonincreasing
 * R-tuples are swept. PASS iff the constants stay within stability_tol of
 * each other across the sweep.
 */
PairingReport verify_cancellation(const KernelApprox& K, const BumpSpec& psi,
                                  const std::vector<int>& L,
                                  const std::vector<std::vector<double>>& R_tuples,
                                  bool restricted, const std::vector<Eigen::VectorXd>& samples,
                                  int quad_nodes = 33, double stability_tol = 0.10);

struct ChangedKernel {
    std::function<double(const Eigen::VectorXd&)> eval;
    FlagEstimateReport size;
    double ratio = 0.0; // transformed C_0 / original C_0
};

/**
 * Precompose K with the triangular map y_k = x_k + P_k(x). Each P_k may only
 * involve variables of strictly lower index and must be homogeneous of degree
 * d_k (throws with the offending monomial otherwise). The report sizes the
 * transformed kernel on the samples (finite-difference derivatives).
 */
ChangedKernel change_of_variables(const KernelApprox& K, const std::vector<Poly>& P, int m,
                                  const std::vector<Eigen::VectorXd>& samples);

struct MultiplierReport {
    double sup_m = 0.0;
    std::vector<double> window_trace; // sup |m| per window radius
    std::vector<std::pair<std::vector<int>, double>> constants;
    bool pass = false;
    std::string note;
};

/**
 * Multiplier verification on an abelian group with unit dilation weights:
 * m = sum_I FT([phi^I]_I) in closed form from the family's GH twin, checked
 * against |d^alpha m| <= C prod_j (|xi_j| + ... + |xi_n|)^{-[[alpha_j]]} on
 * dyadic frequency shells, with a sup|m| stability trace across windows.
 */
MultiplierReport multiplier_check_abelian(const GroupSpec& g, const BumpFamily& fam,
                                          const std::vector<int>& window_radii, int m_order,
                                          unsigned seed, double stability_tol = 0.05);

using FreqFn = std::function<std::complex<double>(const Eigen::VectorXd&)>;

/**
 * Frequency-side splitting of an abelian two-step multiplier: m0 lives where
 * the first block dominates (smooth ramp on ratio [10, 20]), the remainder is
 * the coarser part, and m0 is cut by an exact dyadic partition of unity into
 * per-index pieces whose inverse transforms have vanishing block means.
 */
struct FourierDecomposition {
    FreqFn m;      // full multiplier
    FreqFn m0;     // fine part (ratio-cut applied)
    FreqFn coarse; // m - m0
    std::vector<MultiIndex> piece_index;
    std::vector<FreqFn> pieces; // m0 * eta_I, aligned with piece_index
};

FourierDecomposition fourier_decompose_abelian(const GroupSpec& g, const BumpFamily& fam,
                                               int window_radius, int freq_radius);

/// Family realized as an explicit finite table of (index, bump-sum) terms.
struct IndexedFamily {
    Partition p;
    std::vector<std::pair<MultiIndex, BumpSum>> terms;

    double eval_dilated(const DilationStructure& d, const Eigen::VectorXd& x) const;
};

struct RewriteResult {
    std::vector<IndexedFamily> outputs; // fine partition first, merged second
    std::vector<int> telescoped;        // per input index, telescoped term count
    std::string note;
};

/**
 * Weak-to-strong rewriting for two-block families of Gaussian-envelope bumps:
 * each member splits into its first-block mollifier remainder (assigned to
 * the fine partition) plus a telescoped chain of mean-zero differences and a
 * diagonal term on the merged partition. The dilated outputs resum to the
 * input kernel exactly; the telescoped count for index gap g is g.
 */
RewriteResult rewrite_weak_to_strong(const GroupSpec& g, const BumpFamily& fam,
                                     const std::vector<MultiIndex>& window,
                                     double chi_width = 1.0);

/**
 * Exact Gaussian-envelope marginal product: the mass-one Gaussian profile of
 * width chi_width in the block variables tensored with the analytic integral
 * of f over that block. f - gaussian_block_product(f, ...) has vanishing
 * block marginal.
 */
BumpSpec gaussian_block_product(const BumpSpec& f, const Partition& p, int block,
                                double chi_width = 1.0);

/// Exact total integral of a Gaussian-envelope spec (Gaussian moments).
double gaussian_mass(const BumpSpec& f);

} // namespace flaglab
