#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flaglab {

/**
 * Uniform symmetric tensor grid. Each axis has an odd node count so that the
 * center node sits exactly at 0; nodes are (k - (count-1)/2) * h.
 * Flattened storage is row-major with x1 fastest.
 */
struct GridAxis {
    double h = 1.0;
    int count = 1;
};

struct Grid {
    std::vector<GridAxis> axes;

    int N() const { return static_cast<int>(axes.size()); }
    long total() const;
    double node(int axis, int k) const;
    /// Half-width of the axis: largest node coordinate.
    double extent(int axis) const;
    long stride(int axis) const; // stride(0) == 1 (x1-fastest)
    long flat(const std::vector<int>& idx) const;
    std::vector<int> unflat(long f) const;
    Eigen::VectorXd point(const std::vector<int>& idx) const;
    double cell_volume() const;

    /// Same extents with (count-1)*q + 1 nodes per axis.
    Grid refined(int q) const;
    /// Grid over the axes listed in `keep`, in order.
    Grid sub(const std::vector<int>& keep) const;

    static Grid uniform(int N, double R, int count);
    /// Default resolutions: 65 nodes/axis for N <= 3, 33 for N = 4, 17 for N >= 5.
    static Grid standard(int N, double R);

    std::string header_json() const;
};

/**
 * Values over a Grid, optionally backed by the closed-form generator that
 * produced them (used whenever a computation needs off-grid evaluations;
 * dilated evaluations always re-sample the generator).
 */
struct GridFunction {
    Grid grid;
    Eigen::VectorXd values;
    std::function<double(const Eigen::VectorXd&)> gen;
};

GridFunction sample(const Grid& g, const std::function<double(const Eigen::VectorXd&)>& f);

/// Tensor trapezoid rule over the whole grid.
double integral(const GridFunction& f);
double sup_norm(const GridFunction& f);
double l1_norm(const GridFunction& f);
double l2_norm(const GridFunction& f);

/// 4th-order central difference along one axis (values beyond the boundary
/// are treated as zero; grids are sized so the data has decayed there).
GridFunction deriv_axis(const GridFunction& f, int axis);
/// Repeated axis derivatives per the multi-index alpha.
GridFunction deriv_multi(const GridFunction& f, const std::vector<int>& alpha);

enum class SeminormKind { Compact, Schwartz };

/**
 * Finite-difference seminorm: sup over nodes and |alpha| <= m of |d^alpha f|;
 * the Schwartz kind weights each derivative by (1+|x|_e)^(m-|alpha|).
 * Requires at least m+5 nodes per axis.
 */
double seminorm(const GridFunction& f, int m, SeminormKind kind = SeminormKind::Compact);

/// Exact restriction of a refined-grid function to a coarser commensurate grid.
GridFunction restrict_to(const GridFunction& fine, const Grid& coarse);

/// One JSON header line, then raw little-endian 64-bit floats.
void dump(const GridFunction& f, std::ostream& os);
GridFunction load_dump(std::istream& is);

} // namespace flaglab
