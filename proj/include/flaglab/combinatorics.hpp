#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flaglab {

/**
 * Partition of N coordinates into consecutive blocks of sizes a_1..a_n.
 * The interior cut points (prefix sums short of N) determine the partition;
 * finer/coarser comparisons and the common refinement act on cut sets.
 */
struct Partition {
    std::vector<int> a;

    Partition() = default;
    explicit Partition(std::vector<int> sizes);

    int N() const;
    int n() const { return static_cast<int>(a.size()); }
    /// Strictly increasing interior cut points (excludes 0 and N).
    std::vector<int> cuts() const;
    /// Block index (0-based) containing coordinate p (0-based).
    int block_of(int p) const;
    int block_start(int l) const;

    static Partition from_cuts(int N, const std::vector<int>& cuts);

    friend bool operator==(const Partition& x, const Partition& y) { return x.a == y.a; }
};

/// Monotone integer tuple (i_1 <= ... <= i_n), the index set E_n.
using MultiIndex = std::vector<int>;
bool is_monotone(const MultiIndex& I);

/// N-tuple obtained by repeating i_j over block j of the originating partition.
struct EmbeddedIndex {
    std::vector<int> v;
    Partition p;
};

EmbeddedIndex embed(const Partition& p, const MultiIndex& I);
/// Componentwise max; the semilattice join of embedded tuples.
EmbeddedIndex join(const EmbeddedIndex& a, const EmbeddedIndex& b);

/// True iff pA is finer than pB (cut points of pB contained in those of pA).
bool is_finer(const Partition& pA, const Partition& pB);
/// Coarsest partition finer than both (union of cut sets).
Partition common_refinement(const Partition& pA, const Partition& pB);
/// All partitions of N (compositions), for exhaustive lattice tests.
std::vector<Partition> all_partitions(int N);

/**
 * Order-preserving interleaving of n i-indices and m j-indices.
 * slots[pos] is the source occupying position pos: values 0..n-1 are
 * i_1..i_n, values n..n+m-1 are j_1..j_m. Both sources appear in their
 * internal order.
 */
struct ShuffleClass {
    int n = 0, m = 0;
    std::vector<int> slots;

    bool is_i(int source) const { return source < n; }
    /// Position of a source in the interleaving.
    int position_of(int source) const;
    /// "i1", "j2", ... (1-based display name of a source).
    std::string source_name(int source) const;
    /// Ordering string in the notation of the tables: "<" separates a j from
    /// an immediately following i, "<=" everywhere else. (Class membership on
    /// ties is governed by the classification rule, which puts the j to the
    /// left; the display convention is the tables'.)
    std::string ordering() const;
    /// Positions (1-based) occupied by the i-indices, as "{1,2} u {3,4,5}".
    std::string decomposition_string() const;
};

/// All C(n+m, n) shuffle classes, ordered lexicographically by i-position set.
std::vector<ShuffleClass> shuffles(int n, int m);

/**
 * The unique class whose interleaving matches the ordered rearrangement
 * L(I,J). Ties are resolved by the classification rule: when a j-value is
 * less than or equal to an i-value, the j-index goes to the left.
 */
ShuffleClass classify(const MultiIndex& I, const MultiIndex& J);

/**
 * The block pattern of K = embed(I) v embed(J) for pairs of class mu:
 * per global coordinate, the source achieving the max is the one occurring
 * later in the interleaving; consecutive equal-source coordinates merge.
 */
struct BlockPattern {
    Partition decomposition;       // of N, one block per merged run
    std::vector<int> tags;         // per merged block: the source id in K
    std::vector<int> free_sources; // sources absent from K, in display order
};

BlockPattern block_pattern(const ShuffleClass& mu, const Partition& pA, const Partition& pB);

/// One table row in the canonical ASCII rendering.
struct TableRow {
    std::string decomposition;
    std::string ordering;
    std::string k_pattern;
    std::string new_decomposition;
    std::string free_vars;
};

struct Table {
    std::vector<TableRow> rows;
    std::string csv() const;
    std::string text() const;
};

/// The shuffle-class table for a pair of partitions, in table order.
Table emit_tables(const Partition& pA, const Partition& pB);

/**
 * Geometric-sum specification: sum over I in Lambda(B), E_n-monotone,
 * truncated to [-T, T]^n, of prod_k 2^{-i_k alpha_k} /
 * (1 + sum_k 2^{-i_k} A_k)^M. Lambda(B) keeps indices with B_j <= 2^{i_j}.
 */
struct GeomSumSpec {
    int n = 1;
    Eigen::VectorXd alpha; // > 0
    Eigen::VectorXd A;     // > 0
    Eigen::VectorXd B;     // >= 0, nondecreasing
    double M = 2.0;        // > sum(alpha)
    int T = 60;
};

double geometric_sum(const GeomSumSpec& spec);
/// The product bound prod_j (A_1 + ... + A_j + B_j)^{-alpha_j}.
double geom_bound_rhs(const GeomSumSpec& spec);

struct GeomSweepReport {
    int specs = 0;
    double max_ratio = 0.0;
    double max_rel_change_on_doubling = 0.0;
    bool pass = false;
};

/// Randomized sweep of LHS/RHS ratios with a T-doubling stability check.
GeomSweepReport verify_geom_bound(int nspecs, int nmax, unsigned seed, int T = 60,
                                  double stability_tol = 0.05);

} // namespace flaglab
