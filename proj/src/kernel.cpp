#include "flaglab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace flaglab {

namespace {

/// All per-coordinate derivative orders with |alpha| <= m, by total order.
std::vector<std::vector<int>> all_orders(int N, int m) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(N, 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == N) {
            out.push_back(cur);
            return;
        }
        for (int e = 0; e <= left; ++e) {
            cur[axis] = e;
            rec(axis + 1, left - e);
        }
        cur[axis] = 0;
    };
    rec(0, m);
    std::stable_sort(out.begin(), out.end(),
                     [](const std::vector<int>& a, const std::vector<int>& b) {
                         int sa = 0, sb = 0;
                         for (int v : a) sa += v;
                         for (int v : b) sb += v;
                         return sa < sb;
                     });
    return out;
}

/// Central fourth-order finite difference of a scalar closure, iterated per
/// the multi-order alpha with per-axis steps h.
double fd_deriv(const std::function<double(const Eigen::VectorXd&)>& f,
                const std::vector<int>& alpha, const Eigen::VectorXd& x,
                const Eigen::VectorXd& h) {
    int axis = -1;
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
        if (alpha[j] > 0) {
            axis = j;
            break;
        }
    if (axis < 0) return f(x);
    std::vector<int> rest = alpha;
    rest[axis] -= 1;
    auto g = [&](double t) {
        Eigen::VectorXd y = x;
        y[axis] = t;
        return fd_deriv(f, rest, y, h);
    };
    const double t = x[axis], s = h[axis];
    return (-g(t + 2 * s) + 8 * g(t + s) - 8 * g(t - s) + g(t - 2 * s)) / (12 * s);
}

std::complex<double> fd_deriv_c(const std::function<std::complex<double>(const Eigen::VectorXd&)>& f,
                                const std::vector<int>& alpha, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& h) {
    int axis = -1;
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
        if (alpha[j] > 0) {
            axis = j;
            break;
        }
    if (axis < 0) return f(x);
    std::vector<int> rest = alpha;
    rest[axis] -= 1;
    auto g = [&](double t) {
        Eigen::VectorXd y = x;
        y[axis] = t;
        return fd_deriv_c(f, rest, y, h);
    };
    const double t = x[axis], s = h[axis];
    return (-g(t + 2 * s) + 8.0 * g(t + s) - 8.0 * g(t - s) + g(t - 2 * s)) / (12 * s);
}

/// Euclidean norm of the coordinates of one block (unit-weight groups).
double block_euclid(const Partition& p, const Eigen::VectorXd& xi, int block) {
    double s = 0.0;
    const int b = p.block_start(block);
    for (int j = 0; j < p.a[static_cast<std::size_t>(block)]; ++j) s += xi[b + j] * xi[b + j];
    return std::sqrt(s);
}

void require_unit_weights(const GroupSpec& g) {
    if (!g.abelian()) throw std::invalid_argument("frequency-side checks require an abelian group");
    for (const auto& e : g.dil.d)
        if (e != Rational(1))
            throw std::invalid_argument("frequency-side checks require unit dilation weights");
}

/// Gaussian moment int y^k exp(-y^2 / 2w^2) dy.
double gauss_moment(int k, double w) {
    if (k % 2 == 1) return 0.0;
    double v = w * std::sqrt(2.0 * M_PI);
    for (int j = k - 1; j >= 1; j -= 2) v *= j * w * w;
    return v;
}

} // namespace

double eval_sum(const BumpSum& s, const Eigen::VectorXd& x) {
    double v = 0.0;
    for (const auto& f : s) v += f(x);
    return v;
}

double deriv_sum(const BumpSum& s, const std::vector<int>& alpha, const Eigen::VectorXd& x) {
    double v = 0.0;
    for (const auto& f : s) v += f.deriv(alpha, x);
    return v;
}

BumpSum dilate_sum(const BumpSum& s, const MultiIndex& I, const DilationStructure& d) {
    BumpSum out;
    out.reserve(s.size());
    for (const auto& f : s) out.push_back(dilate_index(f, I, d));
    return out;
}

std::vector<MultiIndex> monotone_window(int n, int k) {
    std::vector<MultiIndex> out;
    MultiIndex cur(static_cast<std::size_t>(n));
    std::function<void(int, int)> rec = [&](int pos, int lo) {
        if (pos == n) {
            out.push_back(cur);
            return;
        }
        for (int v = lo; v <= k; ++v) {
            cur[static_cast<std::size_t>(pos)] = v;
            rec(pos + 1, v);
        }
    };
    rec(0, -k);
    return out;
}

double KernelApprox::operator()(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& t : terms) v += t(x);
    return v;
}

double KernelApprox::deriv(const std::vector<int>& alpha, const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& t : terms) v += t.deriv(alpha, x);
    return v;
}

KernelApprox synthesize(const GroupSpec& g, const BumpFamily& fam,
                        const std::vector<MultiIndex>& window) {
    KernelApprox K;
    K.g = g;
    K.p = fam.p;
    K.window = window;
    for (const auto& I : window) {
        if (static_cast<int>(I.size()) != fam.p.n() || !is_monotone(I))
            throw std::invalid_argument("synthesize: window entries must be monotone tuples");
        for (const auto& f : fam.gen(I)) K.terms.push_back(dilate_index(f, I, g.dil));
    }
    return K;
}

GHTensor synthesize_gh(const BumpFamily& fam, const DilationStructure& dil,
                       const std::vector<MultiIndex>& window) {
    if (!fam.gh) throw std::invalid_argument("synthesize_gh: family has no closed-form twin");
    GHTensor acc;
    acc.N = dil.N();
    std::vector<double> dvec(static_cast<std::size_t>(dil.N()));
    for (int j = 0; j < dil.N(); ++j) dvec[static_cast<std::size_t>(j)] = dil.d[static_cast<std::size_t>(j)].value();
    for (const auto& I : window) {
        const EmbeddedIndex e = embed(fam.p, I);
        acc = acc + fam.gh(I).dilate(dvec, e.v);
    }
    return acc;
}

double flag_rhs(const GroupSpec& g, const Partition& p, const Eigen::VectorXd& x,
                const std::vector<int>& alpha, double a, bool improved) {
    double cum = a, rhs = 1.0;
    for (int k = 0; k < p.n(); ++k) {
        cum += partial_norm(g, x, k);
        double w = g.block_Q(k).value();
        const int b = p.block_start(k);
        for (int j = 0; j < p.a[static_cast<std::size_t>(k)]; ++j)
            w += alpha[static_cast<std::size_t>(b + j)] * g.dil.d[static_cast<std::size_t>(b + j)].value();
        rhs *= std::pow(cum, -w);
    }
    if (improved) rhs *= a / (a + partial_norm(g, x, 0));
    return rhs;
}

std::vector<Eigen::VectorXd> shell_samples(const GroupSpec& g, int per_shell, unsigned seed,
                                           int shell_lo, int shell_hi) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    for (int e = shell_lo; e <= shell_hi; ++e) {
        const double r = std::exp2(static_cast<double>(e));
        for (int s = 0; s < per_shell; ++s) {
            Eigen::VectorXd u(g.N);
            for (int tries = 0;; ++tries) {
                for (int j = 0; j < g.N; ++j) u[j] = unif(rng);
                const double nrm = homogeneous_norm(g, u);
                if (nrm < 1e-6) continue;
                u = dilate(g, 1.0 / nrm, u);
                if (partial_norm(g, u, 0) >= std::exp2(-6.0)) break;
                if (tries > 10000)
                    throw std::runtime_error("shell_samples: direction rejection stalled");
            }
            out.push_back(dilate(g, r, u));
        }
    }
    return out;
}

FlagEstimateReport flag_size_constants(
    const GroupSpec& g, const Partition& p,
    const std::function<double(const std::vector<int>&, const Eigen::VectorXd&)>& dK, int m,
    const std::vector<Eigen::VectorXd>& samples, double a, bool improved) {
    FlagEstimateReport rep;
    for (const auto& x : samples)
        if (partial_norm(g, x, 0) < std::exp2(-7.0) * homogeneous_norm(g, x))
            throw std::invalid_argument("flag_size_constants: sample too close to the singular set");
    bool ok = true;
    for (const auto& alpha : all_orders(g.N, m)) {
        double c = 0.0;
        for (const auto& x : samples) {
            const double rhs = flag_rhs(g, p, x, alpha, a, improved);
            c = std::max(c, std::abs(dK(alpha, x)) / rhs);
        }
        if (!std::isfinite(c)) ok = false;
        rep.constants.emplace_back(alpha, c);
    }
    rep.pass = ok;
    return rep;
}

FlagEstimateReport flag_size_constants(const KernelApprox& K, int m,
                                       const std::vector<Eigen::VectorXd>& samples, double a,
                                       bool improved) {
    return flag_size_constants(
        K.g, K.p,
        [&](const std::vector<int>& alpha, const Eigen::VectorXd& x) { return K.deriv(alpha, x); },
        m, samples, a, improved);
}

FlagEstimateReport verify_flag_size(const GroupSpec& g, const BumpFamily& fam,
                                    const std::vector<int>& window_radii, int m,
                                    const std::vector<Eigen::VectorXd>& samples, int stable_after,
                                    double stability_tol) {
    FlagEstimateReport rep;
    KernelApprox K;
    for (const int k : window_radii) {
        K = synthesize(g, fam, monotone_window(fam.p.n(), k));
        const auto c0 = flag_size_constants(K, 0, samples);
        rep.trace.push_back(c0.constants.front().second);
    }
    const auto full = flag_size_constants(K, m, samples);
    rep.constants = full.constants;
    rep.pass = full.pass;
    std::ostringstream note;
    for (std::size_t i = 1; i < rep.trace.size(); ++i) {
        if (window_radii[i] <= stable_after) continue;
        const double growth = rep.trace[i] / rep.trace[i - 1] - 1.0;
        if (growth > stability_tol) {
            rep.pass = false;
            note << "trace grows " << growth * 100 << "% at radius " << window_radii[i] << "; ";
        }
    }
    rep.note = note.str();
    return rep;
}

FlagEstimateReport verify_truncated(const KernelApprox& K, double a, bool improved, int m,
                                    const std::vector<Eigen::VectorXd>& samples) {
    if (!(a > 0.0)) throw std::invalid_argument("verify_truncated: width must be positive");
    return flag_size_constants(K, m, samples, a, improved);
}

PairingReport verify_cancellation(const KernelApprox& K, const BumpSpec& psi,
                                  const std::vector<int>& L,
                                  const std::vector<std::vector<double>>& R_tuples,
                                  bool restricted, const std::vector<Eigen::VectorXd>& samples,
                                  int quad_nodes, double stability_tol) {
    const GroupSpec& g = K.g;
    const Partition& p = K.p;
    std::vector<int> Ls = L;
    std::sort(Ls.begin(), Ls.end());
    std::vector<int> lcoords; // global coordinates scaled out, in order
    for (int b : Ls) {
        const int s = p.block_start(b);
        for (int j = 0; j < p.a[static_cast<std::size_t>(b)]; ++j) lcoords.push_back(s + j);
    }
    if (psi.N != static_cast<int>(lcoords.size()))
        throw std::invalid_argument("verify_cancellation: psi dimension mismatch");
    std::vector<int> rem; // remaining blocks
    for (int b = 0; b < p.n(); ++b)
        if (std::find(Ls.begin(), Ls.end(), b) == Ls.end()) rem.push_back(b);

    PairingReport rep;
    for (const auto& R : R_tuples) {
        if (R.size() != Ls.size())
            throw std::invalid_argument("verify_cancellation: R-tuple length mismatch");
        if (restricted) {
            bool mono = true;
            for (std::size_t i = 1; i < R.size(); ++i) mono = mono && R[i] <= R[i - 1];
            if (!mono) continue;
        }
        // Quadrature box: the support (or 8-sigma box) of psi(delta_R x_L).
        std::vector<double> extent(lcoords.size()), scale(lcoords.size());
        for (std::size_t q = 0; q < lcoords.size(); ++q) {
            const int j = lcoords[q];
            const double dj = g.dil.d[static_cast<std::size_t>(j)].value();
            const double rl = R[static_cast<std::size_t>(
                std::find(Ls.begin(), Ls.end(), p.block_of(j)) - Ls.begin())];
            scale[q] = std::pow(rl, dj);
            const double half = psi.width[static_cast<int>(q)] / psi.scale[static_cast<int>(q)];
            extent[q] = (psi.env == Envelope::Compact ? half : 8.0 * half) / scale[q];
        }
        auto pairing = [&](const Eigen::VectorXd& xr) {
            // Tensor trapezoid over the scaled box.
            double acc = 0.0;
            std::vector<int> idx(lcoords.size(), 0);
            const int n1 = quad_nodes;
            long total = 1;
            for (std::size_t q = 0; q < lcoords.size(); ++q) total *= n1;
            Eigen::VectorXd x = xr, yl(psi.N);
            for (long f = 0; f < total; ++f) {
                long r = f;
                double w = 1.0;
                for (std::size_t q = 0; q < lcoords.size(); ++q) {
                    const int i = static_cast<int>(r % n1);
                    r /= n1;
                    const double h = 2.0 * extent[q] / (n1 - 1);
                    const double t = -extent[q] + i * h;
                    w *= h * ((i == 0 || i == n1 - 1) ? 0.5 : 1.0);
                    x[lcoords[q]] = t;
                    yl[static_cast<int>(q)] = scale[q] * t;
                }
                acc += w * K(x) * psi(yl);
            }
            return acc;
        };
        double c = 0.0;
        std::vector<Eigen::VectorXd> pts = samples;
        if (pts.empty()) pts.push_back(Eigen::VectorXd::Zero(g.N));
        for (const auto& xr : pts) {
            double rhs = 1.0, cum = 0.0;
            for (int b : rem) {
                cum += partial_norm(g, xr, b);
                rhs *= std::pow(cum, -g.block_Q(b).value());
            }
            c = std::max(c, std::abs(pairing(xr)) / rhs);
        }
        rep.constants.push_back(c);
    }
    if (!rep.constants.empty()) {
        const double hi = *std::max_element(rep.constants.begin(), rep.constants.end());
        const double lo = *std::min_element(rep.constants.begin(), rep.constants.end());
        rep.spread = hi / std::max(lo, 1e-300);
        rep.pass = std::isfinite(hi) && rep.spread <= 1.0 + stability_tol;
    }
    return rep;
}

ChangedKernel change_of_variables(const KernelApprox& K, const std::vector<Poly>& P, int m,
                                  const std::vector<Eigen::VectorXd>& samples) {
    const GroupSpec& g = K.g;
    if (static_cast<int>(P.size()) != g.N)
        throw std::invalid_argument("change_of_variables: one polynomial per coordinate required");
    for (int k = 0; k < g.N; ++k) {
        for (const auto& [mon, c] : P[static_cast<std::size_t>(k)].terms) {
            (void)c;
            for (int j = k; j < g.N; ++j)
                if (mon[static_cast<std::size_t>(j)] > 0) {
                    std::ostringstream os;
                    os << "change_of_variables: P_" << (k + 1)
                       << " involves a variable of index >= " << (k + 1) << " in monomial (";
                    for (std::size_t q = 0; q < mon.size(); ++q)
                        os << (q ? "," : "") << mon[q];
                    os << ")";
                    throw std::invalid_argument(os.str());
                }
            if (Poly::weighted_degree(mon, g.dil.d) != g.dil.d[static_cast<std::size_t>(k)]) {
                std::ostringstream os;
                os << "change_of_variables: P_" << (k + 1) << " monomial (";
                for (std::size_t q = 0; q < mon.size(); ++q) os << (q ? "," : "") << mon[q];
                os << ") violates homogeneous degree "
                   << g.dil.d[static_cast<std::size_t>(k)].str();
                throw std::invalid_argument(os.str());
            }
        }
    }
    ChangedKernel out;
    KernelApprox base = K;
    std::vector<Poly> Pc = P;
    out.eval = [base, Pc](const Eigen::VectorXd& x) {
        Eigen::VectorXd y = x;
        for (int k = 0; k < base.g.N; ++k) y[k] = x[k] + Pc[static_cast<std::size_t>(k)].eval(x);
        return base(y);
    };
    auto dK = [&](const std::vector<int>& alpha, const Eigen::VectorXd& x) {
        int tot = 0;
        for (int v : alpha) tot += v;
        if (tot == 0) return out.eval(x);
        Eigen::VectorXd h(g.N);
        for (int j = 0; j < g.N; ++j) h[j] = 1e-3 * (1.0 + std::abs(x[j]));
        return fd_deriv(out.eval, alpha, x, h);
    };
    out.size = flag_size_constants(g, K.p, dK, m, samples);
    const auto ref = flag_size_constants(K, 0, samples);
    out.ratio = out.size.constants.front().second / std::max(ref.constants.front().second, 1e-300);
    return out;
}

MultiplierReport multiplier_check_abelian(const GroupSpec& g, const BumpFamily& fam,
                                          const std::vector<int>& window_radii, int m_order,
                                          unsigned seed, double stability_tol) {
    require_unit_weights(g);
    MultiplierReport rep;
    const auto freq = shell_samples(g, 8, seed);
    GHTensor last;
    for (const int k : window_radii) {
        last = synthesize_gh(fam, g.dil, monotone_window(fam.p.n(), k));
        double s = 0.0;
        for (const auto& xi : freq) s = std::max(s, std::abs(last.fourier(xi)));
        rep.window_trace.push_back(s);
    }
    rep.sup_m = rep.window_trace.back();
    const GHTensor mker = last;
    auto m_fn = [&mker](const Eigen::VectorXd& xi) { return mker.fourier(xi); };
    const Partition& p = fam.p;
    for (const auto& alpha : all_orders(g.N, m_order)) {
        double c = 0.0;
        for (const auto& xi : freq) {
            // Suffix block norms |xi_j| + ... + |xi_n| and the weights
            // [[alpha_j]] they carry.
            Eigen::VectorXd h(g.N);
            double rhs = 1.0;
            for (int b = 0; b < p.n(); ++b) {
                double tail = 0.0;
                for (int b2 = b; b2 < p.n(); ++b2) tail += block_euclid(p, xi, b2);
                int w = 0;
                const int s = p.block_start(b);
                for (int j = 0; j < p.a[static_cast<std::size_t>(b)]; ++j) {
                    w += alpha[static_cast<std::size_t>(s + j)];
                    h[s + j] = 1e-3 * tail + 1e-12;
                }
                rhs *= std::pow(tail, -static_cast<double>(w));
            }
            const double v = std::abs(fd_deriv_c(m_fn, alpha, xi, h));
            c = std::max(c, v / rhs);
        }
        rep.constants.emplace_back(alpha, c);
    }
    rep.pass = true;
    if (rep.window_trace.size() >= 2) {
        const double a = rep.window_trace[rep.window_trace.size() - 2];
        const double b = rep.window_trace.back();
        if (std::abs(b - a) > stability_tol * std::max(a, b)) {
            rep.pass = false;
            rep.note = "sup|m| not stable across the last window doubling";
        }
    }
    for (const auto& [alpha, c] : rep.constants) {
        (void)alpha;
        if (!std::isfinite(c)) rep.pass = false;
    }
    return rep;
}

FourierDecomposition fourier_decompose_abelian(const GroupSpec& g, const BumpFamily& fam,
                                               int window_radius, int freq_radius) {
    require_unit_weights(g);
    if (fam.p.n() != 2)
        throw std::invalid_argument("fourier_decompose_abelian: two-block partitions only");
    const Partition p = fam.p;
    const GHTensor ker = synthesize_gh(fam, g.dil, monotone_window(2, window_radius));
    FourierDecomposition dec;
    dec.m = [ker](const Eigen::VectorXd& xi) { return ker.fourier(xi); };
    // Ramp on the block-norm ratio: 0 below 10, 1 above 20.
    auto theta = [p](const Eigen::VectorXd& xi) {
        const double n1 = block_euclid(p, xi, 0), n2 = block_euclid(p, xi, 1);
        if (n1 == 0.0) return 0.0;
        if (n2 == 0.0) return 1.0;
        return smooth_step(n1 / n2 / 10.0 - 1.0);
    };
    auto m_fn = dec.m;
    dec.m0 = [m_fn, theta](const Eigen::VectorXd& xi) { return m_fn(xi) * theta(xi); };
    auto m0 = dec.m0;
    dec.coarse = [m_fn, m0](const Eigen::VectorXd& xi) { return m_fn(xi) - m0(xi); };
    // Exact dyadic partition of unity supported on [1/2, 4]:
    // eta(t) = (u(t/2) - u(2t)) / 2 with u = 1 on [0,1], 0 beyond 2; the
    // shifted sum telescopes to exactly 1 for t > 0.
    auto eta = [](double t) {
        auto u = [](double s) { return smooth_step(2.0 - s); };
        return 0.5 * (u(t / 2.0) - u(2.0 * t));
    };
    for (const auto& I : monotone_window(2, freq_radius)) {
        const int i1 = I[0], i2 = I[1];
        dec.piece_index.push_back(I);
        dec.pieces.push_back([m0, eta, p, i1, i2](const Eigen::VectorXd& xi) {
            return m0(xi) * eta(std::exp2(i1) * block_euclid(p, xi, 0)) *
                   eta(std::exp2(i2) * block_euclid(p, xi, 1));
        });
    }
    return dec;
}

double IndexedFamily::eval_dilated(const DilationStructure& d, const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& [I, s] : terms) v += eval_sum(dilate_sum(s, I, d), x);
    return v;
}

BumpSpec gaussian_block_product(const BumpSpec& f, const Partition& p, int block,
                                double chi_width) {
    if (f.env != Envelope::Gaussian)
        throw std::invalid_argument("gaussian_block_product: Gaussian envelopes only");
    BumpSpec out = f;
    const int b = p.block_start(block);
    const int a = p.a[static_cast<std::size_t>(block)];
    Poly np(f.N);
    for (const auto& [mon, c] : f.pre.terms) {
        double cc = c;
        Monomial nm = mon;
        for (int j = b; j < b + a; ++j) {
            cc *= gauss_moment(mon[static_cast<std::size_t>(j)], f.width[j]) / f.scale[j];
            nm[static_cast<std::size_t>(j)] = 0;
        }
        if (cc != 0.0) np.add_term(nm, cc);
    }
    out.pre = np;
    for (int j = b; j < b + a; ++j) {
        out.width[j] = chi_width;
        out.scale[j] = 1.0;
        out.amplitude /= chi_width * std::sqrt(2.0 * M_PI);
    }
    if (np.is_zero()) out.amplitude = 0.0;
    return out;
}

double gaussian_mass(const BumpSpec& f) {
    if (f.env != Envelope::Gaussian)
        throw std::invalid_argument("gaussian_mass: Gaussian envelopes only");
    double m = 0.0;
    for (const auto& [mon, c] : f.pre.terms) {
        double t = c;
        for (int j = 0; j < f.N; ++j)
            t *= gauss_moment(mon[static_cast<std::size_t>(j)], f.width[j]) / f.scale[j];
        m += t;
    }
    return f.amplitude * m;
}

RewriteResult rewrite_weak_to_strong(const GroupSpec& g, const BumpFamily& fam,
                                     const std::vector<MultiIndex>& window, double chi_width) {
    if (fam.p.n() != 2)
        throw std::invalid_argument("rewrite_weak_to_strong: two-block partitions only");
    if (fam.mode == CancellationMode::None)
        throw std::invalid_argument("rewrite_weak_to_strong: input declares no cancellation");
    if (fam.mode == CancellationMode::Weak && !(fam.epsilon > 0.0))
        throw std::invalid_argument("rewrite_weak_to_strong: weak defect exponent must be positive");

    std::map<MultiIndex, BumpSum> fine, merged;
    RewriteResult res;
    std::ostringstream note;
    for (const auto& I : window) {
        if (!is_monotone(I) || I.size() != 2)
            throw std::invalid_argument("rewrite_weak_to_strong: window entries must be monotone pairs");
        const BumpSum phi = fam.gen(I);
        int count = 0;
        for (const auto& f : phi) {
            if (std::abs(gaussian_mass(f)) > 1e-10 * std::abs(f.amplitude))
                note << "input member has nonzero total mass; merged output is not mean-zero; ";
            BumpSpec tau = gaussian_block_product(f, fam.p, 0, chi_width);
            if (tau.amplitude == 0.0) {
                fine[I].push_back(f); // already block-1 mean-zero
                continue;
            }
            // Mollifier remainder f - chi (x) marginal: block-1 mean-zero.
            fine[I].push_back(f);
            BumpSpec neg = tau;
            neg.amplitude = -neg.amplitude;
            fine[I].push_back(neg);
            // Telescope the product term down the first-block scale:
            // [tau]_(i1,i2) = sum_s [tau - tau']_(s,i2) + [tau]_(i2,i2).
            BumpSpec taup = tau; // block-1 dilation by one step, negated
            for (int j = fam.p.block_start(0); j < fam.p.block_start(0) + fam.p.a[0]; ++j) {
                const double dj = g.dil.d[static_cast<std::size_t>(j)].value();
                taup.scale[j] *= std::exp2(-dj);
                taup.amplitude *= std::exp2(-dj);
            }
            taup.amplitude = -taup.amplitude;
            for (int s = I[0]; s < I[1]; ++s) {
                MultiIndex J{s, I[1]};
                fine[J].push_back(tau);
                fine[J].push_back(taup);
                ++count;
            }
            BumpSpec diag = tau;
            diag.part = Partition({g.N});
            merged[{I[1]}].push_back(diag);
        }
        res.telescoped.push_back(count);
    }
    IndexedFamily ffine{fam.p, {}};
    for (auto& [I, s] : fine) ffine.terms.emplace_back(I, std::move(s));
    res.outputs.push_back(std::move(ffine));
    if (!merged.empty()) {
        IndexedFamily fmerged{Partition({g.N}), {}};
        for (auto& [I, s] : merged) fmerged.terms.emplace_back(I, std::move(s));
        res.outputs.push_back(std::move(fmerged));
    }
    res.note = note.str();
    return res;
}

} // namespace flaglab
