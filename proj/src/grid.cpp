#include "flaglab/grid.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace flaglab {

long Grid::total() const {
    long t = 1;
    for (const auto& a : axes) t *= a.count;
    return t;
}

double Grid::node(int axis, int k) const {
    const auto& a = axes.at(axis);
    return (k - (a.count - 1) / 2) * a.h;
}

double Grid::extent(int axis) const {
    const auto& a = axes.at(axis);
    return (a.count - 1) / 2 * a.h;
}

long Grid::stride(int axis) const {
    long s = 1;
    for (int j = 0; j < axis; ++j) s *= axes[j].count;
    return s;
}

long Grid::flat(const std::vector<int>& idx) const {
    long f = 0, s = 1;
    for (int j = 0; j < N(); ++j) {
        f += idx[j] * s;
        s *= axes[j].count;
    }
    return f;
}

std::vector<int> Grid::unflat(long f) const {
    std::vector<int> idx(N());
    for (int j = 0; j < N(); ++j) {
        idx[j] = static_cast<int>(f % axes[j].count);
        f /= axes[j].count;
    }
    return idx;
}

Eigen::VectorXd Grid::point(const std::vector<int>& idx) const {
    Eigen::VectorXd x(N());
    for (int j = 0; j < N(); ++j) x[j] = node(j, idx[j]);
    return x;
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes) v *= a.h;
    return v;
}

Grid Grid::refined(int q) const {
    Grid g;
    for (const auto& a : axes) g.axes.push_back({a.h / q, (a.count - 1) * q + 1});
    return g;
}

Grid Grid::sub(const std::vector<int>& keep) const {
    Grid g;
    for (int j : keep) g.axes.push_back(axes.at(j));
    return g;
}

Grid Grid::uniform(int N, double R, int count) {
    if (count < 3 || count % 2 == 0) throw std::invalid_argument("Grid: odd count >= 3 required");
    Grid g;
    g.axes.assign(N, {2.0 * R / (count - 1), count});
    return g;
}

Grid Grid::standard(int N, double R) {
    const int count = N <= 3 ? 65 : (N == 4 ? 33 : 17);
    return uniform(N, R, count);
}

std::string Grid::header_json() const {
    nlohmann::json j;
    j["N"] = N();
    j["axes"] = nlohmann::json::array();
    for (const auto& a : axes) j["axes"].push_back({{"h", a.h}, {"count", a.count}});
    j["order"] = "row-major x1-fastest";
    return j.dump();
}

GridFunction sample(const Grid& g, const std::function<double(const Eigen::VectorXd&)>& f) {
    GridFunction out;
    out.grid = g;
    out.gen = f;
    out.values.resize(g.total());
    const long T = g.total();
    for (long t = 0; t < T; ++t) out.values[t] = f(g.point(g.unflat(t)));
    return out;
}

namespace {

double trapezoid_weight(const Grid& g, const std::vector<int>& idx) {
    double w = 1.0;
    for (int j = 0; j < g.N(); ++j)
        if (idx[j] == 0 || idx[j] == g.axes[j].count - 1) w *= 0.5;
    return w;
}

} // namespace

double integral(const GridFunction& f) {
    const long T = f.grid.total();
    double s = 0.0;
    for (long t = 0; t < T; ++t) s += trapezoid_weight(f.grid, f.grid.unflat(t)) * f.values[t];
    return s * f.grid.cell_volume();
}

double sup_norm(const GridFunction& f) {
    return f.values.size() ? f.values.cwiseAbs().maxCoeff() : 0.0;
}

double l1_norm(const GridFunction& f) {
    GridFunction a = f;
    a.values = f.values.cwiseAbs();
    a.gen = nullptr;
    return integral(a);
}

double l2_norm(const GridFunction& f) {
    GridFunction a = f;
    a.values = f.values.cwiseAbs2();
    a.gen = nullptr;
    return std::sqrt(integral(a));
}

GridFunction deriv_axis(const GridFunction& f, int axis) {
    GridFunction out;
    out.grid = f.grid;
    out.values.resize(f.values.size());
    const long stride = f.grid.stride(axis);
    const int n = f.grid.axes[axis].count;
    const double h = f.grid.axes[axis].h;
    const long T = f.grid.total();
    auto at = [&](long base, int k) -> double {
        if (k < 0 || k >= n) return 0.0;
        return f.values[base + static_cast<long>(k) * stride];
    };
    for (long t = 0; t < T; ++t) {
        auto idx = f.grid.unflat(t);
        const int k = idx[axis];
        const long base = t - static_cast<long>(k) * stride;
        out.values[t] =
            (-at(base, k + 2) + 8.0 * at(base, k + 1) - 8.0 * at(base, k - 1) + at(base, k - 2)) /
            (12.0 * h);
    }
    return out;
}

GridFunction deriv_multi(const GridFunction& f, const std::vector<int>& alpha) {
    GridFunction out = f;
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
        for (int r = 0; r < alpha[j]; ++r) out = deriv_axis(out, j);
    return out;
}

namespace {

void enumerate_alphas(int N, int m, std::vector<int>& cur, int from,
                      const std::function<void(const std::vector<int>&)>& cb) {
    cb(cur);
    for (int j = from; j < N; ++j) {
        int total = 0;
        for (int v : cur) total += v;
        if (total >= m) break;
        ++cur[j];
        enumerate_alphas(N, m, cur, j, cb);
        --cur[j];
    }
}

} // namespace

double seminorm(const GridFunction& f, int m, SeminormKind kind) {
    for (const auto& a : f.grid.axes)
        if (a.count < m + 5)
            throw std::invalid_argument("seminorm: grid under-resolved for requested order");
    double best = 0.0;
    std::vector<int> alpha(f.grid.N(), 0);
    enumerate_alphas(f.grid.N(), m, alpha, 0, [&](const std::vector<int>& a) {
        int order = 0;
        for (int v : a) order += v;
        GridFunction d = deriv_multi(f, a);
        if (kind == SeminormKind::Compact) {
            best = std::max(best, sup_norm(d));
        } else {
            const long T = d.grid.total();
            for (long t = 0; t < T; ++t) {
                const Eigen::VectorXd x = d.grid.point(d.grid.unflat(t));
                const double w = std::pow(1.0 + x.norm(), m - order);
                best = std::max(best, w * std::abs(d.values[t]));
            }
        }
    });
    return best;
}

GridFunction restrict_to(const GridFunction& fine, const Grid& coarse) {
    if (fine.grid.N() != coarse.N()) throw std::invalid_argument("restrict_to: dimension mismatch");
    std::vector<int> q(coarse.N());
    for (int j = 0; j < coarse.N(); ++j) {
        const double ratio = coarse.axes[j].h / fine.grid.axes[j].h;
        q[j] = static_cast<int>(std::lround(ratio));
        if (std::abs(ratio - q[j]) > 1e-9 ||
            (coarse.axes[j].count - 1) * q[j] + 1 > fine.grid.axes[j].count + 0)
            throw std::invalid_argument("restrict_to: grids not commensurate");
    }
    GridFunction out;
    out.grid = coarse;
    out.gen = fine.gen;
    out.values.resize(coarse.total());
    const long T = coarse.total();
    for (long t = 0; t < T; ++t) {
        auto idx = coarse.unflat(t);
        std::vector<int> fidx(coarse.N());
        for (int j = 0; j < coarse.N(); ++j) {
            // Center nodes coincide; offsets scale by the refinement factor.
            const int c0 = (coarse.axes[j].count - 1) / 2;
            const int f0 = (fine.grid.axes[j].count - 1) / 2;
            fidx[j] = f0 + (idx[j] - c0) * q[j];
        }
        out.values[t] = fine.values[fine.grid.flat(fidx)];
    }
    return out;
}

void dump(const GridFunction& f, std::ostream& os) {
    os << f.grid.header_json() << "\n";
    static_assert(sizeof(double) == 8);
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

GridFunction load_dump(std::istream& is) {
    std::string header;
    std::getline(is, header);
    nlohmann::json j = nlohmann::json::parse(header);
    GridFunction out;
    for (const auto& a : j.at("axes"))
        out.grid.axes.push_back({a.at("h").get<double>(), a.at("count").get<int>()});
    if (j.at("N").get<int>() != out.grid.N())
        throw std::runtime_error("grid dump: axis count does not match N");
    out.values.resize(out.grid.total());
    is.read(reinterpret_cast<char*>(out.values.data()),
            static_cast<std::streamsize>(out.values.size() * sizeof(double)));
    if (!is) throw std::runtime_error("grid dump: truncated value payload");
    return out;
}

} // namespace flaglab
