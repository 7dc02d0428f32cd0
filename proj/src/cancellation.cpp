#include "flaglab/cancellation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

namespace flaglab {

namespace {

std::vector<int> block_axes(const Partition& p, int l) {
    std::vector<int> axes;
    for (int j = p.block_start(l); j < p.block_start(l) + p.a[l]; ++j) axes.push_back(j);
    return axes;
}

std::vector<int> kept_axes(int N, const std::vector<int>& removed) {
    std::vector<int> keep;
    for (int j = 0; j < N; ++j)
        if (std::find(removed.begin(), removed.end(), j) == removed.end()) keep.push_back(j);
    return keep;
}

/// Broadcast a reduced-grid function (over `keep` axes of `full`) back to full.
Eigen::VectorXd lift(const GridFunction& reduced, const Grid& full, const std::vector<int>& keep) {
    Eigen::VectorXd out(full.total());
    const long T = full.total();
    for (long t = 0; t < T; ++t) {
        auto idx = full.unflat(t);
        std::vector<int> ridx;
        ridx.reserve(keep.size());
        for (int j : keep) ridx.push_back(idx[j]);
        out[t] = reduced.values[reduced.grid.flat(ridx)];
    }
    return out;
}

/// Fixed mollifier profile along one grid axis: support [-A, A] with A the
/// axis extent, normalized so the axis trapezoid quadrature gives mass exactly
/// one (this keeps the split/primitive algebra exact on the grid).
std::vector<double> axis_chi(const Grid& g, int axis) {
    const int n = g.axes[axis].count;
    const double A = g.extent(axis);
    std::vector<double> c(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        c[i] = bump_profile(g.node(axis, i) / A);
        s += (i == 0 || i == n - 1 ? 0.5 : 1.0) * c[i];
    }
    s *= g.axes[axis].h;
    for (double& v : c) v /= s;
    return c;
}

/// 4th-order cumulative integral along one axis, starting at the left edge.
GridFunction cumulative_axis(const GridFunction& f, int axis) {
    GridFunction out;
    out.grid = f.grid;
    out.values.resize(f.values.size());
    const long stride = f.grid.stride(axis);
    const int n = f.grid.axes[axis].count;
    const double h = f.grid.axes[axis].h;
    const long T = f.grid.total();
    std::vector<double> line(n), acc(n);
    for (long t = 0; t < T; ++t) {
        auto idx = f.grid.unflat(t);
        if (idx[axis] != 0) continue;
        const long base = t;
        for (int i = 0; i < n; ++i) line[i] = f.values[base + static_cast<long>(i) * stride];
        acc[0] = 0.0;
        for (int i = 1; i < n; ++i) {
            double inc;
            if (i == 1)
                inc = (9 * line[0] + 19 * line[1] - 5 * line[2] + line[3]) / 24.0;
            else if (i == n - 1)
                inc = (9 * line[n - 1] + 19 * line[n - 2] - 5 * line[n - 3] + line[n - 4]) / 24.0;
            else
                inc = (-line[i - 2] + 13 * line[i - 1] + 13 * line[i] - line[i + 1]) / 24.0;
            acc[i] = acc[i - 1] + h * inc;
        }
        for (int i = 0; i < n; ++i) out.values[base + static_cast<long>(i) * stride] = acc[i];
    }
    return out;
}

} // namespace

GridFunction marginal_axes(const GridFunction& f, const std::vector<int>& axes) {
    std::vector<int> rm = axes;
    std::sort(rm.begin(), rm.end());
    const auto keep = kept_axes(f.grid.N(), rm);
    GridFunction out;
    out.grid = f.grid.sub(keep);
    out.values = Eigen::VectorXd::Zero(out.grid.total());
    double vol = 1.0;
    for (int j : rm) vol *= f.grid.axes[j].h;
    const long T = f.grid.total();
    for (long t = 0; t < T; ++t) {
        auto idx = f.grid.unflat(t);
        double w = 1.0;
        for (int j : rm)
            if (idx[j] == 0 || idx[j] == f.grid.axes[j].count - 1) w *= 0.5;
        std::vector<int> ridx;
        ridx.reserve(keep.size());
        for (int j : keep) ridx.push_back(idx[j]);
        out.values[out.grid.flat(ridx)] += w * f.values[t];
    }
    out.values *= vol;
    return out;
}

GridFunction block_marginal(const GridFunction& f, const Partition& p,
                            const std::vector<int>& blocks) {
    std::vector<int> axes;
    for (int l : blocks)
        for (int j : block_axes(p, l)) axes.push_back(j);
    return marginal_axes(f, axes);
}

CancellationReport strong_cancellation(const GridFunction& f, const Partition& p, double tol) {
    CancellationReport rep;
    rep.sup = sup_norm(f);
    rep.strong = true;
    for (int l = 0; l < p.n(); ++l) {
        const double m = sup_norm(block_marginal(f, p, {l}));
        rep.block_marginal_sup.push_back(m);
        if (m >= tol * rep.sup) rep.strong = false;
    }
    return rep;
}

CancellationReport weak_cancellation_fit(const GridFunction& f, const Partition& p,
                                         const MultiIndex& I, double tol) {
    const int n = p.n();
    if (static_cast<int>(I.size()) != n)
        throw std::invalid_argument("weak_cancellation_fit: index length mismatch");
    if (!is_monotone(I)) throw std::invalid_argument("weak_cancellation_fit: index not monotone");
    CancellationReport rep;
    rep.sup = sup_norm(f);
    const double inf = std::numeric_limits<double>::infinity();
    rep.epsilon = inf;
    bool any_gap = false;
    // All nonempty integrated sets B that avoid the last block.
    for (int mask = 1; mask < (1 << (n - 1)); ++mask) {
        CancellationReport::WeakEntry e;
        for (int k = 0; k + 1 < n; ++k)
            if (mask & (1 << k)) {
                e.B.push_back(k);
                e.gap += I[k + 1] - I[k];
            }
        e.ratio = sup_norm(block_marginal(f, p, e.B)) / rep.sup;
        if (e.gap > 0) {
            any_gap = true;
            e.epsilon = e.ratio < tol ? inf : (e.ratio >= 1.0 ? -inf : -std::log2(e.ratio) / e.gap);
        } else {
            e.epsilon = inf; // bound is trivially 1; no constraint
        }
        rep.epsilon = std::min(rep.epsilon, e.epsilon);
        rep.weak.push_back(std::move(e));
    }
    if (!any_gap) {
        rep.vacuous = true;
        rep.note = "no gap";
    }
    return rep;
}

std::vector<GridFunction> primitives(const GridFunction& f, const std::vector<int>& J1,
                                     const std::vector<int>& J2, double tol) {
    const double sup = sup_norm(f);
    for (const auto* J : {&J1, &J2}) {
        if (J->empty()) continue;
        const double m = sup_norm(marginal_axes(f, *J));
        if (m >= tol * sup) {
            std::ostringstream os;
            os << "primitives: cancellation precondition fails; marginal sup " << m
               << " vs bound " << tol * sup;
            throw std::runtime_error(os.str());
        }
    }
    const int k = static_cast<int>(J1.size());
    // Prefix integrals S_t = integral of f over the first t axes of J1,
    // broadcast back to the full grid.
    std::vector<Eigen::VectorXd> S(k + 1);
    S[0] = f.values;
    {
        GridFunction cur = f;
        std::vector<int> removed;
        for (int t = 1; t <= k; ++t) {
            removed.push_back(J1[t - 1]);
            std::sort(removed.begin(), removed.end());
            GridFunction red = marginal_axes(f, removed);
            S[t] = lift(red, f.grid, kept_axes(f.grid.N(), removed));
        }
    }
    // chi factors per J1 axis, evaluated along that axis.
    const long T = f.grid.total();
    std::vector<Eigen::VectorXd> chi(k);
    for (int t = 0; t < k; ++t) {
        const int axis = J1[t];
        const auto prof = axis_chi(f.grid, axis);
        chi[t].resize(T);
        for (long i = 0; i < T; ++i) chi[t][i] = prof[f.grid.unflat(i)[axis]];
    }
    std::vector<GridFunction> psis;
    Eigen::VectorXd chiprod = Eigen::VectorXd::Ones(T);
    for (int t = 1; t <= k; ++t) {
        GridFunction phi;
        phi.grid = f.grid;
        // phi_t = [prod_{l<t} chi_l] S_{t-1} - [prod_{l<=t} chi_l] S_t.
        phi.values = chiprod.cwiseProduct(S[t - 1]) -
                     chiprod.cwiseProduct(chi[t - 1]).cwiseProduct(S[t]);
        chiprod = chiprod.cwiseProduct(chi[t - 1]);
        psis.push_back(cumulative_axis(phi, J1[t - 1]));
    }
    return psis;
}

std::pair<GridFunction, GridFunction> mollifier_split(const GridFunction& f, const Partition& p,
                                                      int block) {
    const auto axes = block_axes(p, block);
    GridFunction red = marginal_axes(f, axes);
    Eigen::VectorXd marg = lift(red, f.grid, kept_axes(f.grid.N(), axes));
    const long T = f.grid.total();
    std::vector<std::vector<double>> prof;
    for (int j : axes) prof.push_back(axis_chi(f.grid, j));
    Eigen::VectorXd chil(T);
    for (long t = 0; t < T; ++t) {
        auto idx = f.grid.unflat(t);
        double c = 1.0;
        for (std::size_t a = 0; a < axes.size(); ++a) c *= prof[a][idx[axes[a]]];
        chil[t] = c;
    }
    GridFunction M;
    M.grid = f.grid;
    M.values = chil.cwiseProduct(marg);
    GridFunction L;
    L.grid = f.grid;
    L.values = f.values - M.values;
    return {std::move(L), std::move(M)};
}

namespace {

// Dyadic annular cutoffs built from a smooth step by telescoping, so the
// partition of unity is exact: eta0(t) + sum_{k>=1} eta(2^{-k} t) = 1.
double ann_u(double s) { return smooth_step((1.0 - s) / 0.75); } // 1 for s<=1/4, 0 for s>=1
double ann_eta0(double t) { return ann_u(std::abs(t)); }
double ann_eta(double t) { return ann_u(std::abs(t)) - ann_u(2.0 * std::abs(t)); }

} // namespace

std::vector<GridFunction> annular_decompose(const BumpSpec& psi, const DilationStructure& d,
                                            int nterms, const Grid& unit_grid) {
    const double Q = d.Q().value();
    auto base = psi.closure();
    std::vector<GridFunction> terms;
    for (int k = 0; k < nterms; ++k) {
        auto gen = [base, d, Q, k](const Eigen::VectorXd& x) {
            const double r = smooth_norm(d, x);
            const double cut = k == 0 ? ann_eta0(r) : ann_eta(r);
            if (cut == 0.0) return 0.0;
            Eigen::VectorXd y(x.size());
            for (int j = 0; j < x.size(); ++j)
                y[j] = std::exp2(k * d.d[j].value()) * x[j];
            return std::exp2(k * Q) * base(y) * cut;
        };
        terms.push_back(sample(unit_grid, gen));
    }
    return terms;
}

namespace {

/// Exact node lookup on a centered uniform grid; zero outside the extents.
double node_value(const GridFunction& f, const std::vector<long>& offsets) {
    std::vector<int> idx(f.grid.N());
    for (int j = 0; j < f.grid.N(); ++j) {
        const long c = (f.grid.axes[j].count - 1) / 2;
        const long k = c + offsets[j];
        if (k < 0 || k >= f.grid.axes[j].count) return 0.0;
        idx[j] = static_cast<int>(k);
    }
    return f.values[f.grid.flat(idx)];
}

} // namespace

std::vector<GridFunction> annular_decompose_strong(const BumpSpec& psi, const Partition& p,
                                                   const DilationStructure& d, int nterms,
                                                   const Grid& unit_grid, const Grid& work_grid) {
    for (int j = 0; j < d.N(); ++j)
        if (d.d[j].den != 1)
            throw std::invalid_argument(
                "annular_decompose_strong: integer dilation exponents required");
    for (int j = 0; j < unit_grid.N(); ++j)
        if (std::abs(unit_grid.axes[j].h - work_grid.axes[j].h) > 1e-12 * work_grid.axes[j].h)
            throw std::invalid_argument(
                "annular_decompose_strong: unit and work grids must share spacing");
    const double Q = d.Q().value();
    GridFunction f0 = sample(psi, work_grid);

    // Iterated primitives: one derivative axis per block, preserving the
    // cancellation of the remaining blocks at each round.
    struct Term {
        std::vector<int> js;
        GridFunction fn;
    };
    std::vector<Term> terms{{{}, f0}};
    for (int l = 0; l < p.n(); ++l) {
        const auto J1 = block_axes(p, l);
        std::vector<int> J2;
        for (int m = l + 1; m < p.n(); ++m)
            for (int j : block_axes(p, m)) J2.push_back(j);
        std::vector<Term> next;
        for (auto& t : terms) {
            auto psis = primitives(t.fn, J1, J2, 1e-5);
            for (std::size_t a = 0; a < psis.size(); ++a) {
                Term nt;
                nt.js = t.js;
                nt.js.push_back(J1[a]);
                nt.fn = std::move(psis[a]);
                next.push_back(std::move(nt));
            }
        }
        terms = std::move(next);
    }

    // Cut each primitive into the k-th annulus in the original coordinates
    // (where one grid spacing resolves everything), differentiate there, and
    // read the dilated nodes: psi^k(u) = 2^{kQ} sum_t (d^{js} c_k)(delta_{2^k} u)
    // with c_k(x) = psi_t(x) eta(2^{-k}|x|). Because the finite difference is
    // applied at a single spacing, the k-sum telescopes exactly through it.
    std::vector<GridFunction> out;
    const long Tw = work_grid.total();
    for (int k = 0; k < nterms; ++k) {
        GridFunction acc;
        acc.grid = work_grid;
        acc.values = Eigen::VectorXd::Zero(Tw);
        for (const auto& t : terms) {
            GridFunction cut;
            cut.grid = work_grid;
            cut.values.resize(Tw);
            for (long i = 0; i < Tw; ++i) {
                const double r =
                    std::exp2(-k) * smooth_norm(d, work_grid.point(work_grid.unflat(i)));
                const double c = k == 0 ? ann_eta0(r) : ann_eta(r);
                cut.values[i] = c == 0.0 ? 0.0 : t.fn.values[i] * c;
            }
            GridFunction der = cut;
            for (int j : t.js) der = deriv_axis(der, j);
            acc.values += der.values;
        }
        GridFunction term;
        term.grid = unit_grid;
        term.values.resize(unit_grid.total());
        const long Tu = unit_grid.total();
        for (long i = 0; i < Tu; ++i) {
            auto idx = unit_grid.unflat(i);
            std::vector<long> off(unit_grid.N());
            for (int j = 0; j < unit_grid.N(); ++j) {
                const long o = idx[j] - (unit_grid.axes[j].count - 1) / 2;
                off[j] = o << (k * d.d[j].num);
            }
            term.values[i] = std::exp2(k * Q) * node_value(acc, off);
        }
        out.push_back(std::move(term));
    }
    return out;
}

namespace {

// First-block cutoffs: u7 = 1 for s <= 1, 0 for s >= 2; eta7 telescopes so
// that sum_{l<=0} eta7(2^{-l} t) = 1 for 0 < t <= 1.
double fb_u(double s) { return smooth_step(2.0 - s); }
double fb_eta(double t) { return fb_u(t) - fb_u(2.0 * t); }

} // namespace

std::vector<GridFunction> first_block_decompose(const BumpSpec& phi, const Partition& p,
                                                const DilationStructure& d, int nterms,
                                                const Grid& out_grid) {
    const auto B1 = block_axes(p, 0);
    const double Q1 = [&] {
        double q = 0.0;
        for (int j : B1) q += d.d[j].value();
        return q;
    }();
    auto base = phi.closure();

    // Block-1 quadrature lattice over [-2,2]^{a1} (the support of eta7 o |.|).
    const int qn = 41;
    Grid qg = Grid::uniform(static_cast<int>(B1.size()), 2.0, qn);

    // c0 = integral of eta7(|u|_1); c_j = 2^{jQ1} c0 by homogeneity.
    const double c0 = [&] {
        GridFunction s = sample(qg, [&](const Eigen::VectorXd& u) {
            Eigen::VectorXd full = Eigen::VectorXd::Zero(phi.N);
            for (std::size_t t = 0; t < B1.size(); ++t) full[B1[t]] = u[t];
            return fb_eta(smooth_norm(d, full, B1));
        });
        return integral(s);
    }();

    struct Tables {
        std::map<std::pair<int, std::vector<double>>, double> a; // a_j(rest)
    };
    auto tables = std::make_shared<Tables>();
    const int N = phi.N;
    std::vector<int> rest_axes = kept_axes(N, B1);

    auto a_j = [base, tables, qg, B1, rest_axes, d, Q1, N](int j, const Eigen::VectorXd& rest) {
        std::vector<double> key(rest.data(), rest.data() + rest.size());
        auto it = tables->a.find({j, key});
        if (it != tables->a.end()) return it->second;
        // a_j = 2^{jQ1} integral phi(delta_{2^j} u, rest) eta7(|u|) du.
        double s = 0.0;
        const long T = qg.total();
        Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
        for (std::size_t t = 0; t < rest_axes.size(); ++t) x[rest_axes[t]] = rest[t];
        for (long t = 0; t < T; ++t) {
            auto idx = qg.unflat(t);
            Eigen::VectorXd u = qg.point(idx);
            Eigen::VectorXd full = Eigen::VectorXd::Zero(N);
            for (std::size_t a = 0; a < B1.size(); ++a) full[B1[a]] = u[a];
            const double eta = fb_eta(smooth_norm(d, full, B1));
            if (eta == 0.0) continue;
            double w = 1.0;
            for (int a = 0; a < qg.N(); ++a)
                if (idx[a] == 0 || idx[a] == qg.axes[a].count - 1) w *= 0.5;
            for (std::size_t a = 0; a < B1.size(); ++a)
                x[B1[a]] = std::exp2(j * d.d[B1[a]].value()) * u[a];
            s += w * base(x) * eta;
        }
        const double val = std::exp2(j * Q1) * s * qg.cell_volume();
        tables->a[{j, key}] = val;
        return val;
    };

    std::vector<GridFunction> out;
    for (int term = 0; term < nterms; ++term) {
        const int j = -term;
        auto gen = [base, a_j, B1, rest_axes, d, Q1, c0, j, N](const Eigen::VectorXd& x) {
            // phi^j(x) = 2^{jQ1} phitilde_j(delta_{2^j} x_1, rest).
            Eigen::VectorXd y = x;
            for (int a : B1) y[a] = std::exp2(j * d.d[a].value()) * x[a];
            Eigen::VectorXd rest(rest_axes.size());
            for (std::size_t t = 0; t < rest_axes.size(); ++t) rest[t] = y[rest_axes[t]];
            const double r1 = smooth_norm(d, y, B1);
            const double chij = fb_eta(std::exp2(-j) * r1);
            const double chijm1 = fb_eta(std::exp2(-(j - 1)) * r1);
            const double cj = std::exp2(j * Q1) * c0;
            const double cjm1 = std::exp2((j - 1) * Q1) * c0;
            double aj = 0.0, Aj = 0.0;
            if (chij != 0.0 || chijm1 != 0.0) {
                aj = a_j(j, rest);
                for (int s = j; s <= 0; ++s) Aj += a_j(s, rest);
            }
            double v = 0.0;
            if (chij != 0.0) v += base(y) * chij - (chij / cj) * aj;
            v += (chij / cj - chijm1 / cjm1) * Aj;
            return std::exp2(j * Q1) * v;
        };
        out.push_back(sample(out_grid, gen));
    }
    return out;
}

TensorExpansion tensor_expand(const GridFunction& f, double tol, int budget) {
    const int N = f.grid.N();
    TensorExpansion e;
    std::vector<int> counts(N), half(N);
    long P = 1;
    for (int j = 0; j < N; ++j) {
        counts[j] = f.grid.axes[j].count - 1; // periodic nodes (drop duplicate endpoint)
        half[j] = counts[j] / 2;
        e.box.push_back(f.grid.extent(j));
        P *= counts[j];
    }
    // Full DFT coefficient tensor (grids are small).
    std::vector<std::pair<double, TensorTerm>> all;
    std::vector<int> freq(N, 0);
    std::function<void(int)> rec = [&](int axis) {
        if (axis == N) {
            std::complex<double> c = 0.0;
            const long T = f.grid.total();
            for (long t = 0; t < T; ++t) {
                auto idx = f.grid.unflat(t);
                bool dup = false;
                for (int j = 0; j < N; ++j)
                    if (idx[j] == counts[j]) dup = true;
                if (dup) continue;
                double phase = 0.0;
                for (int j = 0; j < N; ++j)
                    phase += M_PI * freq[j] * f.grid.point(idx)[j] / e.box[j];
                c += f.values[t] * std::polar(1.0, -phase);
            }
            c /= static_cast<double>(P);
            TensorTerm term;
            term.freq = freq;
            term.coeff = c;
            all.push_back({std::abs(c), std::move(term)});
            return;
        }
        for (int m = -half[axis]; m < counts[axis] - half[axis]; ++m) {
            freq[axis] = m;
            rec(axis + 1);
        }
    };
    rec(0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    const double fl2 = l2_norm(f) + 1e-300;
    TensorExpansion probe;
    probe.box = e.box;
    for (const auto& [mag, term] : all) {
        probe.terms.push_back(term);
        e.terms.push_back(term);
        if (static_cast<int>(e.terms.size()) >= budget) break;
        if (e.terms.size() % 16 == 0 || mag == 0.0) {
            double err = 0.0;
            const long T = f.grid.total();
            GridFunction r = f;
            for (long t = 0; t < T; ++t)
                r.values[t] = f.values[t] - tensor_eval(probe, f.grid.point(f.grid.unflat(t)));
            err = l2_norm(r) / fl2;
            if (err < tol) {
                e.residual = err;
                break;
            }
        }
    }
    {
        GridFunction r = f;
        const long T = f.grid.total();
        for (long t = 0; t < T; ++t)
            r.values[t] = f.values[t] - tensor_eval(e, f.grid.point(f.grid.unflat(t)));
        e.residual = l2_norm(r) / fl2;
    }
    if (e.residual > tol)
        throw std::runtime_error("tensor_expand: tolerance unreachable within coefficient budget");
    // Decay regression on the retained nonzero coefficients.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& t : e.terms) {
        const double a = std::abs(t.coeff);
        if (a < 1e-300) continue;
        int l1 = 0;
        for (int m : t.freq) l1 += std::abs(m);
        const double x = std::log(1.0 + l1), y = std::log(a);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    e.decay_slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx + 1e-300) : 0.0;
    return e;
}

double tensor_eval(const TensorExpansion& e, const Eigen::VectorXd& x) {
    std::complex<double> s = 0.0;
    for (const auto& t : e.terms) {
        double phase = 0.0;
        for (std::size_t j = 0; j < t.freq.size(); ++j)
            phase += M_PI * t.freq[j] * x[j] / e.box[j];
        s += t.coeff * std::polar(1.0, phase);
    }
    return s.real();
}

double dominant_separable_energy(const GridFunction& f) {
    if (f.grid.N() != 2)
        throw std::invalid_argument("dominant_separable_energy: two-dimensional grids only");
    const int r = f.grid.axes[0].count, c = f.grid.axes[1].count;
    Eigen::Map<const Eigen::MatrixXd> M(f.values.data(), r, c);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    return s[0] * s[0] / s.squaredNorm();
}

FieldIdentityReport scaled_field_identity(const GroupSpec& g, const BumpSpec& psi,
                                          const std::vector<int>& I, int k, const Grid& grid,
                                          double tol) {
    const int N = g.N;
    if (static_cast<int>(I.size()) != N)
        throw std::invalid_argument("scaled_field_identity: I must have one entry per coordinate");
    for (int j = 1; j < N; ++j)
        if (I[j] < I[j - 1])
            throw std::invalid_argument("scaled_field_identity: I must be monotone");
    BumpSpec base = psi;
    base.part = Partition(std::vector<int>(N, 1));
    const BumpSpec fI = dilate_index(base, I, g.dil);
    const double dk = g.dil.d[k].value();

    auto partial = [&](const BumpSpec& s, int axis, const Eigen::VectorXd& x) {
        std::vector<int> alpha(N, 0);
        alpha[axis] = 1;
        return s.deriv(alpha, x);
    };

    // Error summands: 2^{-d_k(i_l-i_k)} (2^{d_l i_l} d_l)[P^l_{k,I} psi]_I.
    struct ErrTerm {
        int l;
        double gain;
        BumpSpec spec;
        double outer;
    };
    std::vector<ErrTerm> errs;
    for (int l = k + 1; l < N; ++l) {
        if (!(g.dil.d[k] < g.dil.d[l])) continue;
        const Poly& P = g.left_P[k][l];
        if (P.is_zero()) continue;
        Poly PI(N);
        for (const auto& [mono, c] : P.terms) {
            double shift = 0.0;
            for (int m = 0; m < N; ++m) shift += mono[m] * g.dil.d[m].value() * (I[l] - I[m]);
            PI.add_term(mono, c * std::exp2(-shift));
        }
        ErrTerm e;
        e.l = l;
        e.gain = std::exp2(-dk * (I[l] - I[k]));
        BumpSpec scaled = base;
        scaled.pre = PI * base.pre;
        e.spec = dilate_index(scaled, I, g.dil);
        e.outer = e.gain * std::exp2(g.dil.d[l].value() * I[l]);
        errs.push_back(std::move(e));
    }

    FieldIdentityReport rep;
    rep.term_sups.assign(errs.size(), 0.0);
    for (const auto& e : errs) rep.term_gains.push_back(e.gain);
    const long T = grid.total();
    for (long t = 0; t < T; ++t) {
        const Eigen::VectorXd x = grid.point(grid.unflat(t));
        // LHS: 2^{d_k i_k} Z_k [psi]_I with Z_k = d_k + sum_{l>k} P^l_k d_l.
        double zk = partial(fI, k, x);
        for (int l = k + 1; l < N; ++l)
            if (!g.left_P[k][l].is_zero()) zk += g.left_P[k][l].eval(x) * partial(fI, l, x);
        const double lhs = std::exp2(dk * I[k]) * zk;
        double rhs = std::exp2(dk * I[k]) * partial(fI, k, x);
        for (std::size_t m = 0; m < errs.size(); ++m) {
            const double v = errs[m].outer * partial(errs[m].spec, errs[m].l, x);
            rep.term_sups[m] = std::max(rep.term_sups[m], std::abs(v));
            rhs += v;
        }
        rep.residual = std::max(rep.residual, std::abs(lhs - rhs));
        rep.scale = std::max(rep.scale, std::abs(lhs));
    }
    rep.pass = rep.residual <= tol * std::max(rep.scale, 1e-300);
    return rep;
}

} // namespace flaglab
