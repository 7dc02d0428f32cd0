#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "flaglab/bump.hpp"
#include "flaglab/combinatorics.hpp"
#include "flaglab/grid.hpp"
#include "flaglab/group.hpp"

namespace flaglab {

/// Marginal over an arbitrary set of coordinate axes (tensor trapezoid).
GridFunction marginal_axes(const GridFunction& f, const std::vector<int>& axes);
/// Marginal over the listed blocks of the partition.
GridFunction block_marginal(const GridFunction& f, const Partition& p,
                            const std::vector<int>& blocks);

struct CancellationReport {
    std::vector<double> block_marginal_sup; // per block of the partition
    double sup = 0.0;                       // sup norm of f
    bool strong = false;

    struct WeakEntry {
        std::vector<int> B;    // integrated blocks (0-based)
        double ratio = 0.0;    // sup of the marginal / sup of f
        double gap = 0.0;      // sum of i_{k+1} - i_k over k in B
        double epsilon = 0.0;  // fitted exponent for this subset
    };
    std::vector<WeakEntry> weak;
    double epsilon = 0.0; // fitted parameter; +inf when every marginal vanishes
    bool vacuous = false; // the multi-index has no strict gap
    std::string note;
};

CancellationReport strong_cancellation(const GridFunction& f, const Partition& p,
                                       double tol = 1e-8);
CancellationReport weak_cancellation_fit(const GridFunction& f, const Partition& p,
                                         const MultiIndex& I, double tol = 1e-8);

/**
 * Primitive construction: given cancellation over the axis sets J1 and J2
 * (verified first; throws with the measured marginal norms otherwise),
 * returns psi_k per k in J1 with f = sum_k d_k psi_k, each psi_k retaining
 * the J2 cancellation. Pure grid computation: pass a refined grid for
 * quadrature headroom.
 */
std::vector<GridFunction> primitives(const GridFunction& f, const std::vector<int>& J1,
                                     const std::vector<int>& J2, double tol = 1e-8);

/// L_l / M_l mollifier pair for block l: L + M = f exactly, block-l marginal
/// of L vanishes, M has the same block-l marginal as f.
std::pair<GridFunction, GridFunction> mollifier_split(const GridFunction& f, const Partition& p,
                                                      int block);

/**
 * Annular decomposition of a Schwartz-type generator: psi(x) =
 * sum_k 2^{-kQ} psi^k(delta_{2^-k} x), each psi^k supported in the unit ball
 * of the smooth homogeneous norm. Terms are sampled on `unit_grid` and carry
 * generators for off-grid evaluation.
 */
std::vector<GridFunction> annular_decompose(const BumpSpec& psi, const DilationStructure& d,
                                            int nterms, const Grid& unit_grid);

/**
 * Cancellation-preserving variant: psi is first written as iterated block
 * derivatives of primitives (computed on `work_grid`), each primitive is cut
 * into annuli, and the derivatives are reapplied per term, so every psi^k
 * inherits the strong cancellation of psi. Requires work_grid and unit_grid
 * spacings to be equal (dyadic dilations then map nodes to nodes).
 */
std::vector<GridFunction> annular_decompose_strong(const BumpSpec& psi, const Partition& p,
                                                   const DilationStructure& d, int nterms,
                                                   const Grid& unit_grid, const Grid& work_grid);

/**
 * First-block decomposition of a compactly supported generator with
 * cancellation in block 1: phi = sum_{j<=0} 2^{-jQ1} phi^j(delta_{2^-j} x_1, rest);
 * each phi^j vanishes for |x_1| <= 1/8. Terms sampled on out_grid with
 * generators; jmin = -(nterms-1).
 */
std::vector<GridFunction> first_block_decompose(const BumpSpec& phi, const Partition& p,
                                                const DilationStructure& d, int nterms,
                                                const Grid& out_grid);

struct TensorTerm {
    std::vector<int> freq;        // per-axis integer frequency
    std::complex<double> coeff;
};

struct TensorExpansion {
    std::vector<TensorTerm> terms; // ordered by descending |coeff|
    double residual = 0.0;         // relative L2 on the grid
    double decay_slope = 0.0;      // fitted slope of log|c| vs log(1+|freq|_1)
    std::vector<double> box;       // half-periods per axis
};

/// Per-axis Fourier expansion of a compactly supported grid function.
TensorExpansion tensor_expand(const GridFunction& f, double tol, int budget = 4096);
/// Evaluate the truncated expansion at a point.
double tensor_eval(const TensorExpansion& e, const Eigen::VectorXd& x);
/// Fraction of energy carried by the top rank-1 separable term (N == 2).
double dominant_separable_energy(const GridFunction& f);

struct FieldIdentityReport {
    double residual = 0.0;              // sup |LHS - RHS| over the grid
    double scale = 0.0;                 // sup |LHS|
    std::vector<double> term_sups;      // sup of each error summand (by axis l)
    std::vector<double> term_gains;     // predicted factors 2^{-d_k (i_l - i_k)}
    bool pass = false;
};

/**
 * Verifies 2^{d_k i_k} Z_k [psi]_I = 2^{d_k i_k} d_k [psi]_I
 * + sum_{d_l > d_k} 2^{-d_k(i_l-i_k)} (2^{d_l i_l} d_l)[P^l_{k,I} psi]_I
 * on the grid, where I is an N-tuple in E_N and P^l_{k,I} rescales the
 * monomial coefficients of the invariant-field polynomial P^l_k.
 */
FieldIdentityReport scaled_field_identity(const GroupSpec& g, const BumpSpec& psi,
                                          const std::vector<int>& I, int k, const Grid& grid,
                                          double tol = 1e-8);

} // namespace flaglab
