#include "flaglab/convolve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <complex>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flaglab {

namespace {

struct QuadCache {
    std::vector<Eigen::VectorXd> yinv; // group inverses of nodes with h != 0
    std::vector<double> wh;            // trapezoid weight * h(y)
};

QuadCache build_cache(const GroupSpec& g, const PointFn& h, const Grid& quad) {
    QuadCache c;
    const long M = quad.total();
    const double vol = quad.cell_volume();
    for (long f = 0; f < M; ++f) {
        const auto idx = quad.unflat(f);
        const Eigen::VectorXd y = quad.point(idx);
        const double hv = h(y);
        if (hv == 0.0) continue;
        double w = vol;
        for (int a = 0; a < quad.N(); ++a)
            if (quad.axes[a].count > 1 && (idx[a] == 0 || idx[a] == quad.axes[a].count - 1))
                w *= 0.5;
        c.yinv.push_back(inverse(g, y));
        c.wh.push_back(w * hv);
    }
    return c;
}

double conv_cached(const GroupSpec& g, const PointFn& f, const QuadCache& c,
                   const Eigen::VectorXd& x) {
    double s = 0.0;
    for (size_t i = 0; i < c.wh.size(); ++i) s += f(multiply(g, x, c.yinv[i])) * c.wh[i];
    return s;
}

} // namespace

double convolve_at(const GroupSpec& g, const PointFn& f, const PointFn& h, const Grid& quad,
                   const Eigen::VectorXd& x) {
    return conv_cached(g, f, build_cache(g, h, quad), x);
}

GridFunction convolve(const GroupSpec& g, const PointFn& f, const PointFn& h, const Grid& quad,
                      const Grid& out) {
    auto cache = std::make_shared<QuadCache>(build_cache(g, h, quad));
    GridFunction r;
    r.grid = out;
    r.gen = [g, f, cache](const Eigen::VectorXd& x) { return conv_cached(g, f, *cache, x); };
    const long M = out.total();
    r.values.resize(M);
    for (long k = 0; k < M; ++k) r.values[k] = r.gen(out.point(out.unflat(k)));
    return r;
}

namespace {

void require_same_grid(const GridFunction& f, const GridFunction& h) {
    if (f.grid.N() != h.grid.N())
        throw std::invalid_argument("abelian convolution: dimension mismatch");
    for (int a = 0; a < f.grid.N(); ++a)
        if (f.grid.axes[a].count != h.grid.axes[a].count ||
            f.grid.axes[a].h != h.grid.axes[a].h)
            throw std::invalid_argument("abelian convolution: factors need a common grid");
}

} // namespace

GridFunction convolve_abelian_direct(const GridFunction& f, const GridFunction& h) {
    require_same_grid(f, h);
    const Grid& grid = f.grid;
    const int N = grid.N();
    const long M = grid.total();
    const double vol = grid.cell_volume();
    GridFunction r;
    r.grid = grid;
    r.values = Eigen::VectorXd::Zero(M);
    std::vector<int> center(N);
    for (int a = 0; a < N; ++a) center[a] = (grid.axes[a].count - 1) / 2;
    for (long k = 0; k < M; ++k) {
        const auto ki = grid.unflat(k);
        double s = 0.0;
        for (long j = 0; j < M; ++j) {
            if (h.values[j] == 0.0) continue;
            const auto ji = grid.unflat(j);
            bool in = true;
            std::vector<int> fi(N);
            for (int a = 0; a < N; ++a) {
                fi[a] = ki[a] - ji[a] + center[a];
                if (fi[a] < 0 || fi[a] >= grid.axes[a].count) {
                    in = false;
                    break;
                }
            }
            if (in) s += f.values[grid.flat(fi)] * h.values[j];
        }
        r.values[k] = s * vol;
    }
    return r;
}

namespace {

using CVec = std::vector<std::complex<double>>;

/// Naive DFT matrix of size P (sign = -1 forward, +1 inverse without the 1/P).
Eigen::MatrixXcd dft_matrix(int P, int sign) {
    Eigen::MatrixXcd W(P, P);
    for (int r = 0; r < P; ++r)
        for (int c = 0; c < P; ++c) {
            const double ang = sign * 2.0 * M_PI * r * c / P;
            W(r, c) = std::complex<double>(std::cos(ang), std::sin(ang));
        }
    return W;
}

/// Apply a PxP matrix along one axis of a row-major (axis-0 fastest) tensor
/// with identical extent P on every axis.
void apply_axis(CVec& data, const Eigen::MatrixXcd& W, int axis, int N, int P) {
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= P;
    long total = 1;
    for (int a = 0; a < N; ++a) total *= P;
    Eigen::VectorXcd line(P);
    for (long base = 0; base < total; ++base) {
        // visit each line once: require the axis coordinate of `base` to be 0
        if ((base / stride) % P != 0) continue;
        for (int t = 0; t < P; ++t) line[t] = data[base + t * stride];
        Eigen::VectorXcd out = W * line;
        for (int t = 0; t < P; ++t) data[base + t * stride] = out[t];
    }
}

} // namespace

GridFunction convolve_abelian_dft(const GridFunction& f, const GridFunction& h) {
    require_same_grid(f, h);
    const Grid& grid = f.grid;
    const int N = grid.N();
    int L = 0;
    for (int a = 0; a < N; ++a) L = std::max(L, grid.axes[a].count);
    for (int a = 0; a < N; ++a)
        if (grid.axes[a].count != L)
            throw std::invalid_argument("convolve_abelian_dft: equal axis counts required");
    const int P = 2 * L - 1;
    long total = 1;
    for (int a = 0; a < N; ++a) total *= P;

    auto lift = [&](const GridFunction& u) {
        CVec d(total, 0.0);
        for (long k = 0; k < u.grid.total(); ++k) {
            const auto idx = u.grid.unflat(k);
            long flat = 0, s = 1;
            for (int a = 0; a < N; ++a) {
                flat += idx[a] * s;
                s *= P;
            }
            d[flat] = u.values[k];
        }
        return d;
    };

    CVec F = lift(f), H = lift(h);
    const Eigen::MatrixXcd Wf = dft_matrix(P, -1);
    const Eigen::MatrixXcd Wi = dft_matrix(P, +1);
    for (int a = 0; a < N; ++a) {
        apply_axis(F, Wf, a, N, P);
        apply_axis(H, Wf, a, N, P);
    }
    for (long k = 0; k < total; ++k) F[k] *= H[k];
    for (int a = 0; a < N; ++a) apply_axis(F, Wi, a, N, P);
    const double inv = 1.0 / std::pow(static_cast<double>(P), N);

    GridFunction r;
    r.grid = grid;
    r.values.resize(grid.total());
    const int c = (L - 1) / 2;
    const double vol = grid.cell_volume();
    for (long k = 0; k < grid.total(); ++k) {
        const auto idx = grid.unflat(k);
        long flat = 0, s = 1;
        for (int a = 0; a < N; ++a) {
            flat += (idx[a] + c) * s; // linear-convolution offset
            s *= P;
        }
        r.values[k] = F[flat].real() * inv * vol;
    }
    return r;
}

double field_apply(const GroupSpec& g, Side side, int k, const BumpSpec& f,
                   const Eigen::VectorXd& x) {
    const auto& P = invariant_fields(g, side);
    std::vector<int> alpha(g.N, 0);
    alpha[k] = 1;
    double v = f.deriv(alpha, x);
    alpha[k] = 0;
    for (int l = 0; l < g.N; ++l) {
        if (P[k][l].terms.empty()) continue;
        const double c = P[k][l].eval(x);
        if (c == 0.0) continue;
        alpha[l] = 1;
        v += c * f.deriv(alpha, x);
        alpha[l] = 0;
    }
    return v;
}

SupportReport verify_support_lemma(const GroupSpec& g, const Partition& p, const BumpSpec& phi,
                                   const BumpSpec& psi, const MultiIndex& I, const MultiIndex& J,
                                   int quad_nodes, int probe_nodes, int seminorm_order) {
    if (phi.env != Envelope::Compact || psi.env != Envelope::Compact)
        throw std::invalid_argument("verify_support_lemma: compact factors required");
    SupportReport rep;

    auto hom_radius = [&](const BumpSpec& b) {
        double r = 0.0;
        for (int j = 0; j < g.N; ++j)
            r = std::max(r, std::pow(b.width[j] / b.scale[j], 1.0 / g.dil.d[j].value()));
        return r;
    };
    rep.rho = std::max(hom_radius(phi), hom_radius(psi));

    const BumpSpec fI = dilate_index(phi, I, g.dil);
    const BumpSpec hJ = dilate_index(psi, J, g.dil);
    MultiIndex K(I.size());
    for (size_t l = 0; l < I.size(); ++l) K[l] = std::max(I[l], J[l]);

    // quadrature box = support box of the dilated second factor
    Grid quad;
    for (int j = 0; j < g.N; ++j) {
        const double half = hJ.width[j] / hJ.scale[j];
        quad.axes.push_back({2.0 * half / (quad_nodes - 1), quad_nodes});
    }
    const QuadCache cache = build_cache(g, hJ.closure(), quad);
    auto fI_fn = fI.closure();

    // theta = [conv]_{-K}: probe on a box covering the candidate support
    const double guard = 6.0;
    double volfac = 1.0;
    std::vector<double> kscale(g.N);
    for (int j = 0; j < g.N; ++j) {
        const int l = p.block_of(j);
        kscale[j] = std::exp2(g.dil.d[j].value() * K[l]);
    }
    for (int l = 0; l < p.n(); ++l) volfac *= std::exp2(g.block_Q(l).value() * K[l]);
    Grid probe;
    for (int j = 0; j < g.N; ++j) {
        const double half = std::pow(guard * rep.rho, g.dil.d[j].value());
        probe.axes.push_back({2.0 * half / (probe_nodes - 1), probe_nodes});
    }
    auto theta = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd y = x;
        for (int j = 0; j < g.N; ++j) y[j] *= kscale[j];
        return volfac * conv_cached(g, fI_fn, cache, y);
    };

    GridFunction tg;
    tg.grid = probe;
    tg.values.resize(probe.total());
    double sup = 0.0;
    for (long k = 0; k < probe.total(); ++k) {
        tg.values[k] = theta(probe.point(probe.unflat(k)));
        sup = std::max(sup, std::abs(tg.values[k]));
    }
    rep.pass = sup > 0.0;
    for (long k = 0; k < probe.total(); ++k)
        if (std::abs(tg.values[k]) > 1e-8 * sup)
            rep.radius = std::max(rep.radius,
                                  homogeneous_norm(g, probe.point(probe.unflat(k))));
    rep.C = rep.rho > 0.0 ? rep.radius / rep.rho : 0.0;

    if (seminorm_order >= 0) {
        const double st = seminorm(tg, seminorm_order);
        Grid box;
        for (int j = 0; j < g.N; ++j) {
            const double half = 1.25 * std::pow(rep.rho, g.dil.d[j].value());
            box.axes.push_back({2.0 * half / (probe_nodes - 1), probe_nodes});
        }
        const double sp = seminorm(phi, box, seminorm_order);
        const double sq = seminorm(psi, box, seminorm_order);
        rep.seminorm_ratio = st / (sp * sq);
    }
    return rep;
}

namespace {

double gh_sup(const GH1D& f, int nodes = 4097) {
    double smax = 1e-12;
    for (const auto& t : f.terms) smax = std::max(smax, t.sigma);
    double sup = 0.0;
    const double R = 8.0 * smax;
    for (int k = 0; k < nodes; ++k) {
        const double x = -R + 2.0 * R * k / (nodes - 1);
        sup = std::max(sup, std::abs(f(x)));
    }
    return sup;
}

/// Least-squares line y = a + b t; returns {a, b, r2}.
std::array<double, 3> fit_line(const std::vector<double>& t, const std::vector<double>& y) {
    const double n = static_cast<double>(t.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (size_t k = 0; k < t.size(); ++k) {
        st += t[k];
        sy += y[k];
        stt += t[k] * t[k];
        sty += t[k] * y[k];
    }
    const double denom = n * stt - st * st;
    const double b = denom != 0.0 ? (n * sty - st * sy) / denom : 0.0;
    const double a = (sy - b * st) / n;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / n;
    for (size_t k = 0; k < t.size(); ++k) {
        const double fit = a + b * t[k];
        ss_res += (y[k] - fit) * (y[k] - fit);
        ss_tot += (y[k] - ybar) * (y[k] - ybar);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return {a, b, r2};
}

} // namespace

DecayReport verify_decay(const GH1D& phi, const GH1D& psi, int max_gap, int index_radius) {
    DecayReport rep;
    for (int i = -index_radius; i <= index_radius; ++i)
        for (int j = -index_radius; j <= index_radius; ++j) {
            if (std::abs(i - j) > max_gap) continue;
            const GH1D conv = phi.dilate(1.0, i).conv(psi.dilate(1.0, j));
            const double sup = gh_sup(conv);
            if (sup <= 0.0) continue;
            // undilated normalization theta_ij = 2^{(i v j) Q} conv(delta x)
            rep.gaps.push_back(static_cast<double>(std::abs(i - j)));
            rep.lognorms.push_back(std::max(i, j) + std::log2(sup));
        }
    if (rep.gaps.size() < 3) return rep;
    const auto [a, b, r2] = fit_line(rep.gaps, rep.lognorms);
    rep.eps_hat = -b;
    rep.r2 = r2;
    rep.prefactor = std::exp2(a);
    rep.pass = rep.eps_hat > 0.0 && rep.r2 > 0.9;
    return rep;
}

namespace {

FlagEstimateReport gh_size_report(const GroupSpec& g, const Partition& p, const GHTensor& K,
                                  int m, const std::vector<Eigen::VectorXd>& samples,
                                  double width) {
    auto dK = [&K](const std::vector<int>& alpha, const Eigen::VectorXd& x) {
        GHTensor d = K;
        for (size_t j = 0; j < alpha.size(); ++j)
            for (int r = 0; r < alpha[j]; ++r) d = d.deriv_axis(static_cast<int>(j));
        return d(x);
    };
    return flag_size_constants(g, p, dK, m, samples, width, false);
}

} // namespace

TruncatedWidthReport truncated_width_arithmetic(const GroupSpec& g, const Partition& p,
                                                const GHTensor& K, double a,
                                                const std::vector<double>& bs,
                                                const std::vector<Eigen::VectorXd>& samples,
                                                double linearity_tol) {
    if (!g.abelian())
        throw std::invalid_argument("truncated_width_arithmetic: abelian group required");
    TruncatedWidthReport rep;
    rep.bs = bs;

    auto mollifier = [&](double b, bool mean_zero) {
        std::vector<GH1D> axes;
        for (int j = 0; j < g.N; ++j) {
            if (mean_zero && j == 0)
                // coefficient b keeps the L1 norm of the derivative bump
                // independent of the width
                axes.push_back(GH1D::dgaussian(1, b, b));
            else
                axes.push_back(GH1D::gaussian(b, 1.0));
        }
        return GHTensor::product(axes, 1.0);
    };

    std::vector<double> ratios;
    for (size_t t = 0; t < bs.size(); ++t) {
        const double b = bs[t];
        const GHTensor Kplain = K.conv(mollifier(b, false));
        const GHTensor Kzero = K.conv(mollifier(b, true));
        if (t == 0) rep.base = gh_size_report(g, p, Kplain, 1, samples, a + b);
        rep.c_plain.push_back(
            gh_size_report(g, p, Kplain, 0, samples, a + b).constants.at(0).second);
        rep.c_zero.push_back(
            gh_size_report(g, p, Kzero, 0, samples, a + b).constants.at(0).second);
        rep.factors.push_back(rep.c_zero.back() / rep.c_plain.back());
        ratios.push_back(rep.factors.back() / b);
    }
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    for (double r : ratios) rep.linearity = std::max(rep.linearity, std::abs(r - mean) / mean);
    rep.pass = rep.base.pass && rep.linearity <= linearity_tol;
    return rep;
}

GH1D gh_reflect(const GH1D& f) {
    GH1D r = f;
    for (auto& t : r.terms)
        if (t.a % 2) t.coeff = -t.coeff;
    return r;
}

GHTensor gh_reflect(const GHTensor& f) {
    GHTensor r = f;
    for (auto& part : r.parts)
        for (auto& axis : part.axes) axis = gh_reflect(axis);
    return r;
}

double gh_l1(const GHTensor& f, int nodes_per_axis) {
    const int N = f.N;
    int nodes = nodes_per_axis;
    if (N == 2) nodes = std::min(nodes, 257);
    if (N >= 3) nodes = std::min(nodes, 65);
    Grid grid;
    for (int j = 0; j < N; ++j) {
        double smax = 1e-12;
        for (const auto& part : f.parts)
            for (const auto& t : part.axes[j].terms) smax = std::max(smax, t.sigma);
        const double R = 10.0 * smax;
        grid.axes.push_back({2.0 * R / (nodes - 1), nodes});
    }
    double s = 0.0;
    const double vol = grid.cell_volume();
    Eigen::VectorXd x(N);
    for (long k = 0; k < grid.total(); ++k) {
        const auto idx = grid.unflat(k);
        for (int j = 0; j < N; ++j) x[j] = grid.node(j, idx[j]);
        double w = vol;
        for (int j = 0; j < N; ++j)
            if (idx[j] == 0 || idx[j] == nodes - 1) w *= 0.5;
        s += w * std::abs(f(x));
    }
    return s;
}

CrossNormTable cross_norm_table(const GroupSpec& g, const BumpFamily& fam,
                                const std::vector<MultiIndex>& window) {
    if (window.size() > 200)
        throw std::invalid_argument("cross_norm_table: window exceeds the 200-entry guard");
    if (!fam.gh) throw std::invalid_argument("cross_norm_table: closed-form family required");
    CrossNormTable tab;
    tab.window = window;
    const int F = static_cast<int>(window.size());
    tab.l1_tilde_first.resize(F, F);
    tab.l1_tilde_second.resize(F, F);

    std::vector<double> dvec(g.N);
    for (int j = 0; j < g.N; ++j) dvec[j] = g.dil.d[j].value();
    std::vector<GHTensor> dilated;
    dilated.reserve(window.size());
    for (const auto& I : window)
        dilated.push_back(fam.gh(I).dilate(dvec, embed(fam.p, I).v));

    std::vector<double> gaps, lognorms;
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < F; ++j) {
            const double first = gh_l1(gh_reflect(dilated[j]).conv(dilated[i]));
            const double second = gh_l1(dilated[i].conv(gh_reflect(dilated[j])));
            tab.l1_tilde_first(i, j) = first;
            tab.l1_tilde_second(i, j) = second;
            int gap = 0;
            for (size_t k = 0; k < window[i].size(); ++k)
                gap = std::max(gap, std::abs(window[i][k] - window[j][k]));
            if (first > 0.0) {
                gaps.push_back(static_cast<double>(gap));
                lognorms.push_back(std::log2(first));
            }
        }
    if (gaps.size() >= 3) {
        const auto [a, b, r2] = fit_line(gaps, lognorms);
        (void)a;
        (void)r2;
        tab.eps_hat = -b;
    }
    for (int i = 0; i < F; ++i) {
        double row = 0.0;
        for (int j = 0; j < F; ++j) row += std::sqrt(tab.l1_tilde_first(i, j));
        tab.max_row_sum = std::max(tab.max_row_sum, row);
    }
    tab.pass = tab.eps_hat > 0.0;
    return tab;
}

namespace {

/// All monotone tuples of length n with entries in [lo, hi].
void monotone_range_rec(int n, int lo, int hi, MultiIndex& cur,
                        std::vector<MultiIndex>& out) {
    if (static_cast<int>(cur.size()) == n) {
        out.push_back(cur);
        return;
    }
    const int start = cur.empty() ? lo : cur.back();
    for (int v = start; v <= hi; ++v) {
        cur.push_back(v);
        monotone_range_rec(n, lo, hi, cur, out);
        cur.pop_back();
    }
}

std::vector<MultiIndex> monotone_range(int n, int lo, int hi) {
    std::vector<MultiIndex> out;
    MultiIndex cur;
    monotone_range_rec(n, lo, hi, cur, out);
    return out;
}

using ClassKey = std::pair<std::vector<int>, std::vector<int>>; // (slots, K)

std::map<ClassKey, GHTensor> accumulate_composition(const GroupSpec& g, const BumpFamily& famA,
                                                    const BumpFamily& famB, int k, int ext) {
    std::vector<double> dvec(g.N);
    for (int j = 0; j < g.N; ++j) dvec[j] = g.dil.d[j].value();
    const auto WA = monotone_range(famA.p.n(), -k - ext, k);
    const auto WB = monotone_range(famB.p.n(), -k - ext, k);

    std::map<ClassKey, GHTensor> acc;
    for (const auto& I : WA) {
        const EmbeddedIndex eI = embed(famA.p, I);
        const GHTensor tI = famA.gh(I).dilate(dvec, eI.v);
        for (const auto& J : WB) {
            const EmbeddedIndex eJ = embed(famB.p, J);
            const EmbeddedIndex K = join(eI, eJ);
            bool inside = true;
            for (int v : K.v)
                if (v < -k || v > k) inside = false;
            if (!inside) continue;
            const ShuffleClass mu = classify(I, J);
            const GHTensor conv = tI.conv(famB.gh(J).dilate(dvec, eJ.v));
            const ClassKey key{mu.slots, K.v};
            auto it = acc.find(key);
            if (it == acc.end())
                acc.emplace(key, conv);
            else
                it->second = it->second + conv;
        }
    }
    return acc;
}

} // namespace

std::vector<CompositionClass> compose_kernels_abelian(
    const GroupSpec& g, const BumpFamily& famA, const BumpFamily& famB, int window_radius,
    int free_ext, const std::vector<Eigen::VectorXd>& probes,
    const std::vector<Eigen::VectorXd>& size_samples) {
    if (!g.abelian())
        throw std::invalid_argument("compose_kernels_abelian: abelian group required");
    if (!famA.gh || !famB.gh)
        throw std::invalid_argument("compose_kernels_abelian: closed-form families required");

    const auto full = accumulate_composition(g, famA, famB, window_radius, free_ext);
    const auto half = accumulate_composition(g, famA, famB, window_radius, free_ext / 2);

    // group keys by shuffle class (slots)
    std::map<std::vector<int>, CompositionClass> classes;
    for (const auto& [key, tensor] : full) {
        auto it = classes.find(key.first);
        if (it == classes.end()) {
            CompositionClass c;
            c.mu.n = famA.p.n();
            c.mu.m = famB.p.n();
            c.mu.slots = key.first;
            c.pattern = block_pattern(c.mu, famA.p, famB.p);
            it = classes.emplace(key.first, std::move(c)).first;
        }
        it->second.kernels.emplace_back(key.second, tensor);
    }

    for (auto& [slots, cls] : classes) {
        // Cauchy stability: halving the free extension must not move the
        // accumulated kernels on the probe points
        double worst = 0.0;
        for (const auto& [K, tensor] : cls.kernels) {
            double supf = 0.0, diff = 0.0;
            const auto hit = half.find(ClassKey{slots, K});
            for (const auto& x : probes) {
                const double vf = tensor(x);
                supf = std::max(supf, std::abs(vf));
                const double vh = hit != half.end() ? hit->second(x) : 0.0;
                diff = std::max(diff, std::abs(vf - vh));
            }
            if (supf > 0.0) worst = std::max(worst, diff / supf);
        }
        cls.cauchy_rel = worst;

        // weak-cancellation witness: sup of the closed-form marginal over each
        // merged block, maximized over the K tuples and probe points
        const Partition& dec = cls.pattern.decomposition;
        cls.marginal_sup.assign(dec.n(), 0.0);
        for (int blk = 0; blk < dec.n(); ++blk) {
            const int s0 = dec.block_start(blk);
            const int s1 = s0 + dec.a[blk];
            for (const auto& [K, tensor] : cls.kernels) {
                (void)K;
                for (const auto& x : probes) {
                    double v = 0.0;
                    for (const auto& part : tensor.parts) {
                        double t = part.coeff;
                        for (int j = 0; j < tensor.N; ++j)
                            t *= (j >= s0 && j < s1) ? part.axes[j].mass()
                                                     : part.axes[j](x[j]);
                        v += t;
                    }
                    cls.marginal_sup[blk] = std::max(cls.marginal_sup[blk], std::abs(v));
                }
            }
        }

        if (!size_samples.empty()) {
            GHTensor total = cls.kernels.front().second;
            for (size_t t = 1; t < cls.kernels.size(); ++t)
                total = total + cls.kernels[t].second;
            cls.size = gh_size_report(g, cls.pattern.decomposition, total, 0, size_samples, 0.0);
        }
    }

    std::vector<CompositionClass> out;
    out.reserve(classes.size());
    for (auto& [slots, cls] : classes) out.push_back(std::move(cls));
    return out;
}

} // namespace flaglab
