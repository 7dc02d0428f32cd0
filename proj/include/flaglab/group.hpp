#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "flaglab/poly.hpp"
#include "flaglab/rational.hpp"

namespace flaglab {

/// A point of the group, identified with its global coordinates in R^N.
using Point = Eigen::VectorXd;

/**
 * One-parameter family of dilations delta_r[x]_j = r^{d_j} x_j with exact
 * rational exponents d_1 <= ... <= d_N. Q is the homogeneous dimension.
 */
struct DilationStructure {
    std::vector<Rational> d;

    int N() const { return static_cast<int>(d.size()); }
    Rational Q() const {
        Rational q(0);
        for (const auto& e : d) q = q + e;
        return q;
    }
    void validate() const;
};

/**
 * Polynomial group law: (x.y)_k = x_k + y_k + M_k(x,y).
 *
 * M[k] is a polynomial in 2N variables (x_1..x_N, y_1..y_N); triangularity
 * requires it to involve only x_1..x_{k-1} and y_1..y_{k-1} (0-based: indices
 * < k and N..N+k-1), and homogeneity requires every monomial to have weighted
 * degree d_k.
 */
struct GroupLaw {
    int N = 0;
    std::vector<Poly> M;
};

/**
 * A homogeneous nilpotent group: dimension, dilations, block partition, group
 * law, and the cached invariant vector-field coefficient tables.
 *
 * left_P[k][l] is the polynomial coefficient of d/dx_l in the left-invariant
 * field X_k = d/dx_k + sum_l P^l_k(x) d/dx_l (nonzero only for d_l > d_k);
 * right_P is the analogous table for right-invariant fields. Immutable after
 * construction; all operations on it are pure.
 */
struct GroupSpec {
    int N = 0;
    DilationStructure dil;
    std::vector<int> blocks; // block sizes a_1..a_n, summing to N
    GroupLaw law;
    std::vector<std::vector<Poly>> left_P;  // [k][l], N x N, polys in N vars
    std::vector<std::vector<Poly>> right_P; // [k][l]
    std::string name;

    int nblocks() const { return static_cast<int>(blocks.size()); }
    /// First coordinate (0-based) of block l.
    int block_start(int l) const;
    /// Homogeneous dimension of block l.
    Rational block_Q(int l) const;
    bool abelian() const;
};

/// Built-in groups and validated custom construction.
GroupSpec make_abelian(int N, std::vector<Rational> d, std::vector<int> blocks = {});
GroupSpec make_heisenberg();
GroupSpec make_engel_step3();
GroupSpec make_custom(int N, std::vector<Rational> d, std::vector<int> blocks,
                      GroupLaw law, const std::string& name = "custom");

Point multiply(const GroupSpec& g, const Point& x, const Point& y);
Point inverse(const GroupSpec& g, const Point& x);
Point dilate(const GroupSpec& g, double r, const Point& x);
/// Dilation by block: coordinate j of block l is scaled by r_l^{d_j}.
Point dilate_blocks(const GroupSpec& g, const Eigen::VectorXd& r_per_block, const Point& x);

/// The sup-form partial homogeneous norm N_l(x_l) = max_s |x_s|^{1/d_s} over block l.
double partial_norm(const GroupSpec& g, const Point& x, int block_l);
/// Global homogeneous norm max_j |x_j|^{1/d_j}.
double homogeneous_norm(const GroupSpec& g, const Point& x);

/**
 * Symbolic verification of the group axioms: both parenthesizations of
 * (x.y).z expand to identical polynomials (coefficients within tol), the
 * origin is a two-sided identity, and triangular inversion solves x.x^{-1}=0.
 * Throws on failure.
 */
void verify_group_axioms(const GroupSpec& g, double tol = 1e-12);

/// Coefficient table P^l_k of the left or right invariant fields.
enum class Side { Left, Right };
const std::vector<std::vector<Poly>>& invariant_fields(const GroupSpec& g, Side side);

/**
 * Triangular inversion (the Q^l_k of the paper): expresses d/dx_k in the
 * invariant-field basis, d/dx_k = Z_k + sum_{d_l > d_k} Q^l_k(x) Z_l.
 * Returned as an N x N polynomial matrix E with d/dx_k = sum_l E[k][l] Z_l.
 */
std::vector<std::vector<Poly>> euclid_in_fields(const GroupSpec& g, Side side);

/**
 * A differential operator written in the invariant-field basis:
 * sum of terms coeff(x) * Z_{j_1} o ... o Z_{j_s}.
 */
struct FieldMonomialTerm {
    std::vector<int> js; // 0-based field indices, composition order
    Poly coeff;          // polynomial in N variables
};

/**
 * Symbolic expansion of the Euclidean derivative composition
 * d/dx_{k_1} o ... o d/dx_{k_r} as a sum of invariant-field monomials with
 * polynomial multipliers (r <= 4 guard against symbolic blowup).
 */
std::vector<FieldMonomialTerm> fields_from_euclid(const GroupSpec& g,
                                                  const std::vector<int>& orders,
                                                  Side side = Side::Left);

/// Apply the first-order field Z_k (side as given) to a polynomial.
Poly apply_field(const GroupSpec& g, Side side, int k, const Poly& f);
/// Apply a field-monomial expansion to a polynomial test function.
Poly apply_expansion(const GroupSpec& g, Side side,
                     const std::vector<FieldMonomialTerm>& terms, const Poly& f);

/// JSON round trip per the documented schema.
nlohmann::json group_to_json(const GroupSpec& g);
GroupSpec group_from_json(const nlohmann::json& j);

} // namespace flaglab
