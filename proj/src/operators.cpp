#include "flaglab/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>
#include <stdexcept>

namespace flaglab {

namespace {

constexpr double kTiny = 1e-300;

struct LinFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

LinFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const int n = static_cast<int>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    LinFit out;
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-14) return out;
    out.slope = (n * sxy - sx * sy) / det;
    out.intercept = (sy - out.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean = sy / n;
    for (int i = 0; i < n; ++i) {
        const double fit = out.intercept + out.slope * xs[i];
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - mean) * (ys[i] - mean);
    }
    out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

/// L1-preserving continuous dilate f_r(x) = r^{-1} f(x / r).
GH1D cont_dilate(const GH1D& f, double r) {
    GH1D out = f;
    for (auto& t : out.terms) {
        t.coeff *= std::pow(r, t.a);
        t.sigma *= r;
    }
    return out;
}

/// Midpoint average of |f(x . y^{-1})| over the box |y_j| <= half[j] for the
/// axes listed in `axes` (the remaining coordinates of y stay zero).
double box_average(const GroupSpec& g, const PointFn& f, const std::vector<int>& axes,
                   const std::vector<double>& half, const Eigen::VectorXd& x, int nodes) {
    const int dims = static_cast<int>(axes.size());
    std::vector<int> digit(dims, 0);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(g.N);
    double sum = 0.0;
    long total = 1;
    for (int s = 0; s < dims; ++s) total *= nodes;
    for (long it = 0; it < total; ++it) {
        for (int s = 0; s < dims; ++s)
            y[axes[s]] = half[s] * (-1.0 + (2.0 * digit[s] + 1.0) / nodes);
        sum += std::abs(f(multiply(g, x, inverse(g, y))));
        for (int s = 0; s < dims; ++s) {
            if (++digit[s] < nodes) break;
            digit[s] = 0;
        }
    }
    return sum / static_cast<double>(total);
}

void scale_tuples_rec(int n, int lo_e, int hi_e, int per_octave, int pos, int min_e,
                      std::vector<int>& cur, std::vector<Eigen::VectorXd>& out) {
    if (pos == n) {
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i) s[i] = std::pow(2.0, cur[i] / double(per_octave));
        out.push_back(s);
        return;
    }
    for (int e = min_e; e <= hi_e; ++e) {
        cur[pos] = e;
        scale_tuples_rec(n, lo_e, hi_e, per_octave, pos + 1, e, cur, out);
    }
}

double partial_norm_p(const GroupSpec& g, const Partition& p, const Eigen::VectorXd& x, int l) {
    double best = 0.0;
    const int s = p.block_start(l);
    for (int j = s; j < s + p.a[l]; ++j)
        best = std::max(best, std::pow(std::abs(x[j]), 1.0 / g.dil.d[j].value()));
    return best;
}

double block_Q_p(const GroupSpec& g, const Partition& p, int l) {
    double q = 0.0;
    const int s = p.block_start(l);
    for (int j = s; j < s + p.a[l]; ++j) q += g.dil.d[j].value();
    return q;
}

/// Linear interpolation of a cached 1-D profile on [-R, R], edge-clamped.
double interp1(const std::vector<double>& vals, double R, double x) {
    const int n = static_cast<int>(vals.size());
    const double h = 2.0 * R / (n - 1);
    double u = (x + R) / h;
    if (u <= 0) return vals.front();
    if (u >= n - 1) return vals.back();
    const int i = static_cast<int>(u);
    const double w = u - i;
    return (1 - w) * vals[i] + w * vals[i + 1];
}

} // namespace

std::vector<Eigen::VectorXd> acceptable_scales(int n, int lo, int hi, int per_octave) {
    if (n < 1 || per_octave < 1 || hi < lo) throw std::invalid_argument("acceptable_scales");
    std::vector<Eigen::VectorXd> out;
    std::vector<int> cur(n, 0);
    scale_tuples_rec(n, lo * per_octave, hi * per_octave, per_octave, 0, lo * per_octave, cur,
                     out);
    return out;
}

double rectangle_average(const GroupSpec& g, const Partition& p, const PointFn& f,
                         const Eigen::VectorXd& s, const Eigen::VectorXd& x, int nodes) {
    if (s.size() != p.n()) throw std::invalid_argument("rectangle_average: tuple length");
    std::vector<int> axes(g.N);
    std::iota(axes.begin(), axes.end(), 0);
    std::vector<double> half(g.N);
    for (int j = 0; j < g.N; ++j)
        half[j] = std::pow(s[p.block_of(j)], g.dil.d[j].value());
    return box_average(g, f, axes, half, x, nodes);
}

double maximal_at(const GroupSpec& g, const Partition& p, const PointFn& f,
                  const std::vector<Eigen::VectorXd>& s_grid, const Eigen::VectorXd& x,
                  int nodes) {
    double best = 0.0;
    for (const auto& s : s_grid) best = std::max(best, rectangle_average(g, p, f, s, x, nodes));
    return best;
}

double lifted_maximal_at(const GroupSpec& g, const Partition& p, const PointFn& f, int k,
                         const std::vector<double>& rho_grid, const Eigen::VectorXd& x,
                         int nodes) {
    const int start = p.block_start(k);
    std::vector<int> axes;
    for (int j = start; j < g.N; ++j) axes.push_back(j);
    double best = 0.0;
    std::vector<double> half(axes.size());
    for (double rho : rho_grid) {
        for (std::size_t s = 0; s < axes.size(); ++s)
            half[s] = std::pow(rho, g.dil.d[axes[s]].value());
        best = std::max(best, box_average(g, f, axes, half, x, nodes));
    }
    return best;
}

double lifted_chain_at(const GroupSpec& g, const Partition& p, const PointFn& f,
                       const std::vector<double>& rho_grid, const Eigen::VectorXd& x,
                       int nodes) {
    PointFn cur = [f](const Eigen::VectorXd& z) { return std::abs(f(z)); };
    for (int k = 0; k < p.n(); ++k) {
        PointFn prev = cur;
        cur = [&g, &p, prev, k, &rho_grid, nodes](const Eigen::VectorXd& z) {
            return lifted_maximal_at(g, p, prev, k, rho_grid, z, nodes);
        };
    }
    return cur(x);
}

CompositionBoundReport verify_composition_bound(const GroupSpec& g, const Partition& p,
                                                const PointFn& f,
                                                const std::vector<Eigen::VectorXd>& samples,
                                                int lo, int hi, int nodes, double tol) {
    CompositionBoundReport rep;
    const auto run = [&](int per_octave) {
        const auto s_grid = acceptable_scales(p.n(), lo, hi, per_octave);
        std::vector<double> rho;
        for (int e = lo * per_octave; e <= hi * per_octave; ++e)
            rho.push_back(std::pow(2.0, e / double(per_octave)));
        double worst = 0.0;
        for (const auto& x : samples) {
            const double m = maximal_at(g, p, f, s_grid, x, nodes);
            const double chain = lifted_chain_at(g, p, f, rho, x, nodes);
            worst = std::max(worst, m / std::max(chain, kTiny));
        }
        return worst;
    };
    rep.C = run(1);
    rep.refined_C = run(2);
    const double drift = std::abs(rep.refined_C - rep.C) / std::max(rep.C, kTiny);
    rep.pass = std::isfinite(rep.C) && std::isfinite(rep.refined_C) && drift <= tol;
    rep.note = "drift " + std::to_string(drift);
    return rep;
}

double gamma_fn(const GroupSpec& g, const Partition& p, const Eigen::VectorXd& t,
                const Eigen::VectorXd& x) {
    const int n = p.n();
    if (t.size() != n) throw std::invalid_argument("gamma_fn: tuple length");
    double val = 1.0, tsum = 0.0, nsum = 0.0;
    for (int k = 0; k < n; ++k) val *= t[k];
    for (int k = 0; k < n; ++k) {
        tsum += t[k];
        nsum += partial_norm_p(g, p, x, k);
        val *= std::pow(tsum + nsum, -(block_Q_p(g, p, k) + 1.0));
    }
    return val;
}

GammaComparisonReport verify_gamma_comparison(const GroupSpec& g, const Partition& p,
                                              const PointFn& f,
                                              const std::vector<Eigen::VectorXd>& t_tuples,
                                              const std::vector<Eigen::VectorXd>& samples,
                                              double bound, int slo, int shi, int mnodes,
                                              int qnodes) {
    GammaComparisonReport rep;
    const auto s_grid = acceptable_scales(p.n(), slo, shi);
    std::vector<double> mf(samples.size());
    const PointFn fabsfn = [&f](const Eigen::VectorXd& z) { return std::abs(f(z)); };
    for (std::size_t i = 0; i < samples.size(); ++i)
        mf[i] = maximal_at(g, p, fabsfn, s_grid, samples[i], mnodes);

    for (const auto& t : t_tuples) {
        // composite quadrature over dyadic homogeneous shells: the inner
        // radius sits below the smallest comparison scale (where Gamma_t is
        // flat) and the outer covers the test function's effective support,
        // so each shell resolves the features living at its own scale
        const double tmin = t.minCoeff();
        const double tsum = t.sum();
        const int m_lo = static_cast<int>(std::floor(std::log2(tmin))) - 2;
        const int m_hi = static_cast<int>(std::ceil(std::log2(16.0 * tsum + 8.0)));
        const PointFn integrand = [&](const Eigen::VectorXd& z) {
            return std::abs(f(z)) * gamma_fn(g, p, t, z);
        };
        double worst_t = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            double conv = 0.0;
            for (int m = m_lo; m <= m_hi; ++m) {
                const double R = std::pow(2.0, m);
                const double Rin = (m == m_lo) ? 0.0 : std::pow(2.0, m - 1);
                std::vector<double> half(g.N), hole(g.N);
                double cell = 1.0;
                for (int j = 0; j < g.N; ++j) {
                    half[j] = std::pow(R, g.dil.d[j].value());
                    hole[j] = Rin > 0.0 ? std::pow(Rin, g.dil.d[j].value()) : 0.0;
                    cell *= 2.0 * half[j] / qnodes;
                }
                std::vector<int> digit(g.N, 0);
                Eigen::VectorXd y(g.N);
                long total = 1;
                for (int j = 0; j < g.N; ++j) total *= qnodes;
                for (long it = 0; it < total; ++it) {
                    bool inner = Rin > 0.0;
                    for (int j = 0; j < g.N; ++j) {
                        y[j] = half[j] * (-1.0 + (2.0 * digit[j] + 1.0) / qnodes);
                        inner = inner && std::abs(y[j]) <= hole[j];
                    }
                    if (!inner)
                        conv += cell * integrand(multiply(g, samples[i], inverse(g, y)));
                    for (int j = 0; j < g.N; ++j) {
                        if (++digit[j] < qnodes) break;
                        digit[j] = 0;
                    }
                }
            }
            worst_t = std::max(worst_t, conv / std::max(mf[i], kTiny));
        }
        rep.per_tuple.push_back(worst_t);
        rep.worst = std::max(rep.worst, worst_t);
    }
    rep.pass = std::isfinite(rep.worst) && rep.worst <= bound;
    return rep;
}

GHTensor lifted_phi_t(const GroupSpec& g, const Eigen::VectorXd& t, bool mean_zero) {
    if (!g.abelian()) throw std::invalid_argument("lifted_phi_t: abelian groups only");
    for (int b : g.blocks)
        if (b != 1) throw std::invalid_argument("lifted_phi_t: singleton blocks only");
    const int n = g.N;
    if (t.size() != n) throw std::invalid_argument("lifted_phi_t: tuple length");
    std::vector<GH1D> axes;
    for (int j = 0; j < n; ++j) {
        // axis j collects the j-th factor of every phi^(k) with k <= j: the
        // block-j bump of phi^(j) itself plus the mass-one tails of the
        // earlier lifted factors, each at its own scale
        GH1D axis = cont_dilate(mean_zero ? GH1D::dgaussian(1, 1.0) : GH1D::gaussian(1.0),
                                t[j]);
        for (int k = 0; k < j; ++k) axis = axis.conv(cont_dilate(GH1D::gaussian(1.0), t[k]));
        axes.push_back(axis);
    }
    return GHTensor::product(axes);
}

KernelGammaReport verify_kernel_gamma(const GroupSpec& g, const Partition& p, const GHTensor& K,
                                      const std::vector<Eigen::VectorXd>& t_tuples,
                                      const std::vector<Eigen::VectorXd>& xs, bool mean_zero,
                                      double bound) {
    KernelGammaReport rep;
    rep.worst_deriv.assign(g.N, 0.0);
    for (const auto& t_in : t_tuples) {
        Eigen::VectorXd t = t_in;
        for (int k = 0; k < t.size(); ++k) t[k] = std::clamp(t[k], 1.0 / 16.0, 16.0);
        const GHTensor conv = K.conv(lifted_phi_t(g, t, mean_zero));
        std::vector<GHTensor> dconv;
        for (int k = 0; k < g.N; ++k) dconv.push_back(conv.deriv_axis(k));
        double worst_t = 0.0;
        for (const auto& x : xs) {
            const double gam = std::max(gamma_fn(g, p, t, x), kTiny);
            worst_t = std::max(worst_t, std::abs(conv(x)) / gam);
            double tsum = 0.0;
            for (int k = 0; k < g.N; ++k) {
                tsum += t[k];
                const double w = std::pow(tsum, g.dil.d[k].value());
                rep.worst_deriv[k] =
                    std::max(rep.worst_deriv[k], std::abs(dconv[k](x)) * w / gam);
            }
        }
        rep.per_tuple.push_back(worst_t);
        rep.worst = std::max(rep.worst, worst_t);
    }
    rep.pass = std::isfinite(rep.worst) && rep.worst <= bound;
    for (double w : rep.worst_deriv) rep.pass = rep.pass && std::isfinite(w) && w <= bound;
    return rep;
}

OrthogonalityReport verify_almost_orthogonality(const GH1D& K, const GH1D& phi, int max_log,
                                                unsigned seed, double delta_floor) {
    OrthogonalityReport rep;
    const GroupSpec g1 = make_abelian(1, {Rational(1)}, {1});
    const Partition p({1});
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> usig(0.6, 1.8), ucoef(0.5, 1.5);
    std::uniform_int_distribution<int> uord(1, 2), usgn(0, 1);

    const auto s_grid = acceptable_scales(1, -4, 4);
    const double R = 20.0;
    const int ngrid = 401, mnodes = 151;
    const std::vector<double> xs = {0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0};

    std::vector<GH1D> fs;
    std::vector<std::vector<double>> mmf; // MMf over the sample points, per f
    for (int rep_f = 0; rep_f < 2; ++rep_f) {
        GH1D f;
        for (int term = 0; term < 4; ++term) {
            const double c = (usgn(rng) ? 1.0 : -1.0) * ucoef(rng);
            f = f + GH1D::dgaussian(uord(rng), usig(rng), c);
        }
        const PointFn fa = [f](const Eigen::VectorXd& z) { return std::abs(f(z[0])); };
        std::vector<double> cache(ngrid);
        for (int i = 0; i < ngrid; ++i) {
            Eigen::VectorXd z(1);
            z[0] = -R + 2.0 * R * i / (ngrid - 1);
            cache[i] = maximal_at(g1, p, fa, s_grid, z, mnodes);
        }
        const PointFn mfi = [cache, R](const Eigen::VectorXd& z) {
            return interp1(cache, R, z[0]);
        };
        std::vector<double> vals;
        for (double x : xs) {
            Eigen::VectorXd z(1);
            z[0] = x;
            vals.push_back(maximal_at(g1, p, mfi, s_grid, z, mnodes));
        }
        fs.push_back(f);
        mmf.push_back(vals);
    }

    for (int j = 0; j <= max_log; ++j) {
        const double s = std::pow(2.0, -j);
        const GH1D theta = cont_dilate(phi, s).conv(K).conv(phi);
        double gam = 0.0;
        for (std::size_t fi = 0; fi < fs.size(); ++fi) {
            const GH1D out = fs[fi].conv(theta);
            for (std::size_t xi = 0; xi < xs.size(); ++xi)
                gam = std::max(gam, std::abs(out(xs[xi])) / std::max(mmf[fi][xi], kTiny));
        }
        rep.log2_sep.push_back(static_cast<double>(j));
        rep.log2_gamma.push_back(std::log2(std::max(gam, kTiny)));
    }
    const LinFit fit = fit_line(rep.log2_sep, rep.log2_gamma);
    rep.delta_hat = -fit.slope;
    rep.r2 = fit.r2;
    rep.pass = rep.delta_hat >= delta_floor;
    return rep;
}

std::vector<double> log_grid(double lo, double hi, int per_decade) {
    if (!(hi > lo) || lo <= 0 || per_decade < 1) throw std::invalid_argument("log_grid");
    std::vector<double> out;
    const int count = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
    for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(10.0, (i + 0.5) / per_decade));
    return out;
}

GH1D calibrated_phi() { return GH1D::dgaussian(1, 1.0, std::sqrt(2.0)); }

double square_S_at(const GH1D& f, const GH1D& phi, const std::vector<double>& tg, double x) {
    const double w = std::log(tg[1] / tg[0]);
    double acc = 0.0;
    for (double t : tg) {
        const double v = f.conv(cont_dilate(phi, t))(x);
        acc += v * v * w;
    }
    return std::sqrt(acc);
}

double square_frakS_at(const GH1D& f, const GH1D& psi, const std::vector<double>& tg, double x,
                       int slo, int shi, int mnodes, double R, int grid_nodes) {
    const GroupSpec g1 = make_abelian(1, {Rational(1)}, {1});
    const Partition p({1});
    const auto s_grid = acceptable_scales(1, slo, shi);
    const double w = std::log(tg[1] / tg[0]);
    double acc = 0.0;
    for (double t : tg) {
        const GH1D q = f.conv(cont_dilate(psi, t));
        const PointFn qa = [q](const Eigen::VectorXd& z) { return std::abs(q(z[0])); };
        std::vector<double> cache(grid_nodes);
        for (int i = 0; i < grid_nodes; ++i) {
            Eigen::VectorXd z(1);
            z[0] = -R + 2.0 * R * i / (grid_nodes - 1);
            cache[i] = maximal_at(g1, p, qa, s_grid, z, mnodes);
        }
        const PointFn mq = [cache, R](const Eigen::VectorXd& z) {
            return interp1(cache, R, z[0]);
        };
        Eigen::VectorXd z(1);
        z[0] = x;
        const double mm = maximal_at(g1, p, mq, s_grid, z, mnodes);
        acc += mm * mm * w;
    }
    return std::sqrt(acc);
}

PlancherelReport verify_plancherel(const GH1D& f, const GH1D& phi, const std::vector<double>& tg,
                                   double R, int nodes, double C) {
    PlancherelReport rep;
    const double h = 2.0 * R / (nodes - 1);
    double s2 = 0.0, f2 = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double x = -R + i * h;
        const double wt = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
        const double sv = square_S_at(f, phi, tg, x);
        const double fv = f(x);
        s2 += wt * sv * sv * h;
        f2 += wt * fv * fv * h;
    }
    rep.ratio = std::sqrt(s2 / std::max(f2, kTiny));
    rep.pass = rep.ratio >= 1.0 / C && rep.ratio <= C;
    return rep;
}

double calderon_residual(const GH1D& phi, const GH1D& psi, const std::vector<double>& ag,
                         double xi_lo, double xi_hi, int xi_nodes) {
    const double w = std::log(ag[1] / ag[0]);
    double worst = 0.0;
    for (int i = 0; i < xi_nodes; ++i) {
        const double xi =
            xi_lo * std::pow(xi_hi / xi_lo, i / static_cast<double>(xi_nodes - 1));
        std::complex<double> acc = 0.0;
        for (double a : ag) acc += phi.fourier(a * xi) * std::conj(psi.fourier(a * xi)) * w;
        worst = std::max(worst, std::abs(acc - std::complex<double>(1.0)));
    }
    return worst;
}

OperatorNormEstimate l2_norm_multiplier(const GHTensor& K, const Grid& freq) {
    OperatorNormEstimate est;
    est.method = "multiplier-sup";
    const long total = freq.total();
    const long batch = std::max<long>(1, total / 16);
    double sup = 0.0;
    for (long idx = 0; idx < total; ++idx) {
        sup = std::max(sup, std::abs(K.fourier(freq.point(freq.unflat(idx)))));
        if ((idx + 1) % batch == 0 || idx + 1 == total) est.trace.push_back(sup);
    }
    est.value = sup;
    est.converged = true;
    return est;
}

OperatorNormEstimate l2_norm_power(const GridFunction& K, int max_iter, double tol,
                                   unsigned seed) {
    OperatorNormEstimate est;
    est.method = "power-iteration";
    GridFunction Krev{K.grid, K.values, nullptr};
    for (long idx = 0; idx < K.grid.total(); ++idx) {
        auto mi = K.grid.unflat(idx);
        for (int j = 0; j < K.grid.N(); ++j) mi[j] = K.grid.axes[j].count - 1 - mi[j];
        Krev.values[idx] = K.values[K.grid.flat(mi)];
    }
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    GridFunction v{K.grid, Eigen::VectorXd(K.grid.total()), nullptr};
    for (long i = 0; i < K.grid.total(); ++i) v.values[i] = nd(rng);

    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const GridFunction w = convolve_abelian_direct(convolve_abelian_direct(v, K), Krev);
        const double num = v.values.dot(w.values);
        const double den = v.values.squaredNorm();
        const double next = num / std::max(den, kTiny);
        est.trace.push_back(std::sqrt(std::max(next, 0.0)));
        const bool settled = it > 0 && std::abs(next - lambda) <= tol * std::abs(next);
        lambda = next;
        if (settled) {
            est.converged = true;
            break;
        }
        v.values = w.values / std::max(w.values.norm(), kTiny);
    }
    est.value = std::sqrt(std::max(lambda, 0.0));
    return est;
}

double lp_norm(const GridFunction& f, double p) {
    if (p < 1.0) throw std::invalid_argument("lp_norm: p >= 1 required");
    double acc = 0.0;
    for (long idx = 0; idx < f.grid.total(); ++idx) {
        const auto mi = f.grid.unflat(idx);
        double wt = f.grid.cell_volume();
        for (int j = 0; j < f.grid.N(); ++j)
            if (mi[j] == 0 || mi[j] == f.grid.axes[j].count - 1) wt *= 0.5;
        acc += wt * std::pow(std::abs(f.values[idx]), p);
    }
    return std::pow(acc, 1.0 / p);
}

} // namespace flaglab
