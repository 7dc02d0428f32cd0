#include "flaglab/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace flaglab {

Partition::Partition(std::vector<int> sizes) : a(std::move(sizes)) {
    for (int s : a)
        if (s < 1) throw std::invalid_argument("Partition: block sizes must be >= 1");
}

int Partition::N() const { return std::accumulate(a.begin(), a.end(), 0); }

std::vector<int> Partition::cuts() const {
    std::vector<int> c;
    int s = 0;
    for (std::size_t j = 0; j + 1 < a.size(); ++j) {
        s += a[j];
        c.push_back(s);
    }
    return c;
}

int Partition::block_of(int p) const {
    int s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        s += a[j];
        if (p < s) return static_cast<int>(j);
    }
    throw std::out_of_range("Partition::block_of");
}

int Partition::block_start(int l) const {
    int s = 0;
    for (int j = 0; j < l; ++j) s += a[j];
    return s;
}

Partition Partition::from_cuts(int N, const std::vector<int>& cuts) {
    std::vector<int> sizes;
    int prev = 0;
    for (int c : cuts) {
        if (c <= prev || c >= N) throw std::invalid_argument("Partition::from_cuts: bad cut");
        sizes.push_back(c - prev);
        prev = c;
    }
    sizes.push_back(N - prev);
    return Partition(sizes);
}

bool is_monotone(const MultiIndex& I) {
    for (std::size_t j = 1; j < I.size(); ++j)
        if (I[j] < I[j - 1]) return false;
    return true;
}

EmbeddedIndex embed(const Partition& p, const MultiIndex& I) {
    if (static_cast<int>(I.size()) != p.n())
        throw std::invalid_argument("embed: block-count mismatch");
    if (!is_monotone(I)) throw std::invalid_argument("embed: index not monotone");
    EmbeddedIndex e;
    e.p = p;
    for (int j = 0; j < p.n(); ++j)
        for (int r = 0; r < p.a[j]; ++r) e.v.push_back(I[j]);
    return e;
}

EmbeddedIndex join(const EmbeddedIndex& a, const EmbeddedIndex& b) {
    if (a.v.size() != b.v.size()) throw std::invalid_argument("join: length mismatch");
    EmbeddedIndex r;
    r.p = common_refinement(a.p, b.p);
    r.v.resize(a.v.size());
    for (std::size_t i = 0; i < a.v.size(); ++i) r.v[i] = std::max(a.v[i], b.v[i]);
    return r;
}

bool is_finer(const Partition& pA, const Partition& pB) {
    if (pA.N() != pB.N()) throw std::invalid_argument("is_finer: dimension mismatch");
    const auto ca = pA.cuts(), cb = pB.cuts();
    return std::includes(ca.begin(), ca.end(), cb.begin(), cb.end());
}

Partition common_refinement(const Partition& pA, const Partition& pB) {
    if (pA.N() != pB.N()) throw std::invalid_argument("common_refinement: dimension mismatch");
    const auto ca = pA.cuts(), cb = pB.cuts();
    std::vector<int> u;
    std::set_union(ca.begin(), ca.end(), cb.begin(), cb.end(), std::back_inserter(u));
    return Partition::from_cuts(pA.N(), u);
}

std::vector<Partition> all_partitions(int N) {
    std::vector<Partition> out;
    // Each subset of the N-1 interior cut positions yields a composition.
    for (int mask = 0; mask < (1 << (N - 1)); ++mask) {
        std::vector<int> cuts;
        for (int c = 1; c < N; ++c)
            if (mask & (1 << (c - 1))) cuts.push_back(c);
        out.push_back(Partition::from_cuts(N, cuts));
    }
    return out;
}

int ShuffleClass::position_of(int source) const {
    for (std::size_t p = 0; p < slots.size(); ++p)
        if (slots[p] == source) return static_cast<int>(p);
    throw std::out_of_range("ShuffleClass::position_of");
}

std::string ShuffleClass::source_name(int source) const {
    std::ostringstream os;
    if (source < n)
        os << "i" << (source + 1);
    else
        os << "j" << (source - n + 1);
    return os.str();
}

std::string ShuffleClass::ordering() const {
    std::ostringstream os;
    for (std::size_t p = 0; p < slots.size(); ++p) {
        if (p > 0) {
            const bool j_then_i = slots[p - 1] >= n && slots[p] < n;
            os << (j_then_i ? "<" : "<=");
        }
        os << source_name(slots[p]);
    }
    return os.str();
}

std::string ShuffleClass::decomposition_string() const {
    std::vector<int> ipos, jpos;
    for (std::size_t p = 0; p < slots.size(); ++p)
        (slots[p] < n ? ipos : jpos).push_back(static_cast<int>(p) + 1);
    auto set_str = [](const std::vector<int>& v) {
        std::ostringstream os;
        os << "{";
        for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << v[k];
        os << "}";
        return os.str();
    };
    return set_str(ipos) + " u " + set_str(jpos);
}

std::vector<ShuffleClass> shuffles(int n, int m) {
    if (n > 8 || m > 8) throw std::invalid_argument("shuffles: n, m <= 8 enumeration guard");
    std::vector<ShuffleClass> out;
    // Choose the i-position sets in lexicographic order (the tables' order).
    std::vector<int> pick(n);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            ShuffleClass mu;
            mu.n = n;
            mu.m = m;
            mu.slots.assign(n + m, -1);
            for (int t = 0; t < n; ++t) mu.slots[pick[t]] = t;
            int b = n;
            for (int p = 0; p < n + m; ++p)
                if (mu.slots[p] < 0) mu.slots[p] = b++;
            out.push_back(std::move(mu));
            return;
        }
        for (int p = start; p < n + m; ++p) {
            pick[depth] = p;
            rec(p + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

ShuffleClass classify(const MultiIndex& I, const MultiIndex& J) {
    if (!is_monotone(I) || !is_monotone(J))
        throw std::invalid_argument("classify: inputs must be monotone");
    const int n = static_cast<int>(I.size()), m = static_cast<int>(J.size());
    ShuffleClass mu;
    mu.n = n;
    mu.m = m;
    // Two-pointer merge with the tie rule: a j-value <= an i-value goes left.
    int a = 0, b = 0;
    while (a < n || b < m) {
        if (a == n)
            mu.slots.push_back(n + b++);
        else if (b == m)
            mu.slots.push_back(a++);
        else if (J[b] <= I[a])
            mu.slots.push_back(n + b++);
        else
            mu.slots.push_back(a++);
    }
    return mu;
}

BlockPattern block_pattern(const ShuffleClass& mu, const Partition& pA, const Partition& pB) {
    if (pA.n() != mu.n || pB.n() != mu.m)
        throw std::invalid_argument("block_pattern: partition/shuffle mismatch");
    const int N = pA.N();
    if (pB.N() != N) throw std::invalid_argument("block_pattern: dimension mismatch");
    // Tag each global coordinate with the source achieving the max in K:
    // of the i- and j-source covering it, the one later in the interleaving.
    std::vector<int> tag(N);
    for (int p = 0; p < N; ++p) {
        const int src_i = pA.block_of(p);
        const int src_j = mu.n + pB.block_of(p);
        tag[p] = mu.position_of(src_i) > mu.position_of(src_j) ? src_i : src_j;
    }
    BlockPattern bp;
    std::vector<int> sizes;
    for (int p = 0; p < N; ++p) {
        if (p > 0 && tag[p] == tag[p - 1])
            ++sizes.back();
        else {
            sizes.push_back(1);
            bp.tags.push_back(tag[p]);
        }
    }
    bp.decomposition = Partition(sizes);
    // Free sources: i's then j's, each in internal order, absent from K.
    for (int s = 0; s < mu.n + mu.m; ++s)
        if (std::find(bp.tags.begin(), bp.tags.end(), s) == bp.tags.end())
            bp.free_sources.push_back(s);
    return bp;
}

namespace {

std::string k_pattern_string(const ShuffleClass& mu, const Partition& pA, const Partition& pB) {
    const int N = pA.N();
    std::ostringstream os;
    os << "{";
    for (int p = 0; p < N; ++p) {
        const int src_i = pA.block_of(p);
        const int src_j = mu.n + pB.block_of(p);
        const int t = mu.position_of(src_i) > mu.position_of(src_j) ? src_i : src_j;
        os << (p ? "," : "") << mu.source_name(t);
    }
    os << "}";
    return os.str();
}

std::string decomposition_fmt(const Partition& p) {
    std::ostringstream os;
    for (int j = 0; j < p.n(); ++j) {
        if (j) os << "+";
        os << "R";
        if (p.a[j] > 1) os << "^" << p.a[j];
    }
    return os.str();
}

} // namespace

Table emit_tables(const Partition& pA, const Partition& pB) {
    Table t;
    for (const auto& mu : shuffles(pA.n(), pB.n())) {
        const BlockPattern bp = block_pattern(mu, pA, pB);
        TableRow row;
        row.decomposition = mu.decomposition_string();
        row.ordering = mu.ordering();
        row.k_pattern = k_pattern_string(mu, pA, pB);
        row.new_decomposition = decomposition_fmt(bp.decomposition);
        std::ostringstream fv;
        for (std::size_t k = 0; k < bp.free_sources.size(); ++k)
            fv << (k ? "," : "") << mu.source_name(bp.free_sources[k]);
        row.free_vars = fv.str();
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string Table::csv() const {
    std::ostringstream os;
    os << "decomposition,ordering,K_pattern,new_decomposition,free_vars\n";
    for (const auto& r : rows)
        os << "\"" << r.decomposition << "\",\"" << r.ordering << "\",\"" << r.k_pattern
           << "\",\"" << r.new_decomposition << "\",\"" << r.free_vars << "\"\n";
    return os.str();
}

std::string Table::text() const {
    const std::vector<std::string> head = {"Decomposition", "Ordering", "K",
                                           "New Decomposition", "Free"};
    std::vector<std::size_t> w(5);
    for (int c = 0; c < 5; ++c) w[c] = head[c].size();
    auto cell = [](const TableRow& r, int c) -> const std::string& {
        switch (c) {
            case 0: return r.decomposition;
            case 1: return r.ordering;
            case 2: return r.k_pattern;
            case 3: return r.new_decomposition;
            default: return r.free_vars;
        }
    };
    for (const auto& r : rows)
        for (int c = 0; c < 5; ++c) w[c] = std::max(w[c], cell(r, c).size());
    std::ostringstream os;
    auto line = [&](auto get) {
        for (int c = 0; c < 5; ++c) {
            if (c) os << "  ";
            const std::string& s = get(c);
            os << s << std::string(w[c] - s.size(), ' ');
        }
        os << "\n";
    };
    line([&](int c) -> const std::string& { return head[c]; });
    for (const auto& r : rows) line([&](int c) -> const std::string& { return cell(r, c); });
    return os.str();
}

double geometric_sum(const GeomSumSpec& spec) {
    const int n = spec.n;
    std::vector<int> lo(n), I(n);
    for (int k = 0; k < n; ++k) {
        // Lambda(B): B_k <= 2^{i_k}, i.e. i_k >= ceil(log2 B_k) (no floor if B_k = 0).
        lo[k] = -spec.T;
        if (spec.B[k] > 0.0)
            lo[k] = std::max(lo[k], static_cast<int>(std::ceil(std::log2(spec.B[k]) - 1e-12)));
    }
    double total = 0.0;
    std::function<void(int, int)> rec = [&](int k, int minv) {
        if (k == n) {
            double num = 1.0, den = 1.0;
            for (int j = 0; j < n; ++j) {
                num *= std::pow(2.0, -static_cast<double>(I[j]) * spec.alpha[j]);
                den += std::pow(2.0, -static_cast<double>(I[j])) * spec.A[j];
            }
            total += num / std::pow(den, spec.M);
            return;
        }
        for (int v = std::max(minv, lo[k]); v <= spec.T; ++v) {
            I[k] = v;
            rec(k + 1, v);
        }
    };
    rec(0, -spec.T);
    return total;
}

double geom_bound_rhs(const GeomSumSpec& spec) {
    double r = 1.0, acc = 0.0;
    for (int j = 0; j < spec.n; ++j) {
        acc += spec.A[j];
        r *= std::pow(acc + spec.B[j], -spec.alpha[j]);
    }
    return r;
}

GeomSweepReport verify_geom_bound(int nspecs, int nmax, unsigned seed, int T,
                                  double stability_tol) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> Ua(0.2, 1.5);
    std::uniform_real_distribution<double> Uw(0.1, 8.0);
    std::uniform_int_distribution<int> Un(1, nmax);
    GeomSweepReport rep;
    rep.specs = nspecs;
    for (int s = 0; s < nspecs; ++s) {
        GeomSumSpec spec;
        spec.n = Un(rng);
        spec.alpha.resize(spec.n);
        spec.A.resize(spec.n);
        spec.B.resize(spec.n);
        double asum = 0.0;
        for (int k = 0; k < spec.n; ++k) {
            spec.alpha[k] = Ua(rng);
            asum += spec.alpha[k];
            spec.A[k] = Uw(rng);
        }
        double b = 0.0;
        for (int k = 0; k < spec.n; ++k) {
            // Nondecreasing floors, some of them zero.
            if (rng() % 2) b += Uw(rng);
            spec.B[k] = b;
        }
        spec.M = asum + 0.5 + Ua(rng); // M - sum(alpha) >= 0.5
        spec.T = T;
        const double lhs = geometric_sum(spec);
        GeomSumSpec twice = spec;
        twice.T = 2 * T;
        const double lhs2 = geometric_sum(twice);
        const double rel = std::abs(lhs2 - lhs) / (std::abs(lhs2) + 1e-300);
        rep.max_rel_change_on_doubling = std::max(rep.max_rel_change_on_doubling, rel);
        rep.max_ratio = std::max(rep.max_ratio, lhs2 / geom_bound_rhs(spec));
    }
    rep.pass = std::isfinite(rep.max_ratio) && rep.max_rel_change_on_doubling < stability_tol;
    return rep;
}

} // namespace flaglab
