#pragma once

#include <compare>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "classb/errors.hpp"
#include "classb/eval.hpp"
#include "classb/families.hpp"

namespace classb {

/// k = (k_1, ..., k_m). Ordered by total order |k|, then lexicographically.
class MultiIndex {
  public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<unsigned> k) : k_(std::move(k)) {}
    MultiIndex(std::initializer_list<unsigned> k) : k_(k) {}

    static MultiIndex zero(std::size_t dim) { return MultiIndex(std::vector<unsigned>(dim, 0)); }
    static MultiIndex unit(std::size_t dim, std::size_t i) {
        MultiIndex e = zero(dim);
        e.k_[i] = 1;
        return e;
    }

    std::size_t dim() const noexcept { return k_.size(); }
    unsigned operator[](std::size_t i) const { return k_[i]; }
    const std::vector<unsigned>& entries() const noexcept { return k_; }
    unsigned order() const { return std::accumulate(k_.begin(), k_.end(), 0u); }

    MultiIndex plus(std::size_t i) const {
        MultiIndex r = *this;
        ++r.k_[i];
        return r;
    }
    MultiIndex minus(std::size_t i) const {
        if (k_[i] == 0) throw ArgumentError("MultiIndex: coordinate already zero");
        MultiIndex r = *this;
        --r.k_[i];
        return r;
    }

    /// Lowest coordinate with a positive entry; the generation order steps along it.
    std::size_t lead() const {
        for (std::size_t i = 0; i < k_.size(); ++i)
            if (k_[i] > 0) return i;
        throw ArgumentError("MultiIndex: zero index has no lead coordinate");
    }

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < k_.size(); ++i) s += (i ? "," : "") + std::to_string(k_[i]);
        return s + ")";
    }

    friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) {
        if (auto c = a.order() <=> b.order(); c != 0) return c;
        return a.k_ <=> b.k_;
    }
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

  private:
    std::vector<unsigned> k_;
};

/// Every multi-index of dimension `dim` with |k| <= max_order, in table order.
inline std::vector<MultiIndex> indices_up_to(std::size_t dim, unsigned max_order) {
    std::vector<MultiIndex> out;
    std::vector<unsigned> k(dim, 0);
    auto rec = [&](auto&& self, std::size_t pos, unsigned remaining) -> void {
        if (pos == dim) {
            out.emplace_back(k);
            return;
        }
        for (unsigned v = 0; v <= remaining; ++v) {
            k[pos] = v;
            self(self, pos + 1, remaining - v);
        }
        k[pos] = 0;
    };
    rec(rec, 0, max_order);
    std::sort(out.begin(), out.end());
    return out;
}

enum class MomentKind { raw, central, cumulant };

inline std::string to_string(MomentKind k) {
    switch (k) {
        case MomentKind::raw: return "raw";
        case MomentKind::central: return "central";
        case MomentKind::cumulant: return "cumulant";
    }
    return "?";
}

inline MomentKind parse_moment_kind(const std::string& s) {
    if (s == "raw") return MomentKind::raw;
    if (s == "central") return MomentKind::central;
    if (s == "cumulant" || s == "cumulants") return MomentKind::cumulant;
    throw ArgumentError("unknown moment kind '" + s + "' (expected raw, central or cumulant)");
}

struct MomentTable {
    MomentKind kind = MomentKind::raw;
    FamilySpec family;
    std::map<MultiIndex, Expr> entries;
    unsigned max_order = 0;

    const Expr& at(const MultiIndex& k) const {
        auto it = entries.find(k);
        if (it == entries.end()) throw ArgumentError(to_string(kind) + " table has no entry " + k.str());
        return it->second;
    }
    /// Univariate shorthand.
    const Expr& at(unsigned k) const { return at(MultiIndex{k}); }
};

namespace detail {

// One recursion step from k to k + e_i.
inline Expr moment_step(const FamilySpec& f, MomentKind kind, const std::map<MultiIndex, Expr>& entries,
                        const MultiIndex& k, std::size_t i) {
    const Expr& prev = entries.at(k);
    Expr acc = Expr::num(0);
    for (std::size_t j = 0; j < f.dim; ++j) {
        const Expr& vij = f.variance(i, j);
        if (vij.is_zero()) continue;
        Expr inner = f.d_dmean(prev, j);
        if (kind == MomentKind::central && k[j] > 0)
            inner = inner + Expr::num(k[j]) * entries.at(k.minus(j));
        acc = acc + vij * inner;
    }
    if (kind == MomentKind::raw) acc = acc + Expr::var(f.mean_vars[i]) * prev;
    return acc;
}

}  // namespace detail

/// Grows `t` in place to every |k| <= max_order.
inline void extend(MomentTable& t, unsigned max_order) {
    const FamilySpec& f = t.family;
    const std::size_t m = f.dim;
    if (t.entries.empty()) {
        if (t.kind != MomentKind::cumulant) t.entries.emplace(MultiIndex::zero(m), Expr::num(1));
        for (std::size_t i = 0; i < m; ++i)
            t.entries.emplace(MultiIndex::unit(m, i),
                              t.kind == MomentKind::central ? Expr::num(0) : Expr::var(f.mean_vars[i]));
        t.max_order = 1;
    }
    for (const MultiIndex& k : indices_up_to(m, max_order)) {
        if (k.order() <= 1 || t.entries.count(k)) continue;
        const std::size_t i = k.lead();
        t.entries.emplace(k, detail::moment_step(f, t.kind, t.entries, k.minus(i), i));
    }
    t.max_order = std::max(t.max_order, max_order);
}

inline MomentTable build_table(const FamilySpec& f, MomentKind kind, unsigned max_order) {
    MomentTable t;
    t.kind = kind;
    t.family = f;
    extend(t, max_order);
    return t;
}

/// a_k for |k| <= K via a_{k+e_i} = sum_j V_ij da_k/dx_j + x_i a_k.
inline MomentTable raw_moments(const FamilySpec& f, unsigned K) {
    if (K < 1) throw ArgumentError("raw_moments: order must be >= 1");
    return build_table(f, MomentKind::raw, K);
}

/// beta_k for |k| <= K via beta_{k+e_i} = sum_j V_ij (dbeta_k/dx_j + k_j beta_{k-e_j}).
inline MomentTable central_moments(const FamilySpec& f, unsigned K) {
    if (K < 2) throw ArgumentError("central_moments: order must be >= 2");
    return build_table(f, MomentKind::central, K);
}

/// Cumulants for 1 <= |k| <= K via sigma_{k+e_i} = sum_j V_ij dsigma_k/dx_j.
inline MomentTable cumulants(const FamilySpec& f, unsigned K) {
    if (K < 1) throw ArgumentError("cumulants: order must be >= 1");
    return build_table(f, MomentKind::cumulant, K);
}

/// a_k computed along an explicit path of coordinate increments from a_0 = 1.
inline Expr raw_moment_along(const FamilySpec& f, const std::vector<std::size_t>& path) {
    std::map<MultiIndex, Expr> entries;
    MultiIndex k = MultiIndex::zero(f.dim);
    entries.emplace(k, Expr::num(1));
    for (std::size_t i : path) {
        if (i >= f.dim) throw ArgumentError("raw_moment_along: coordinate out of range");
        Expr next = detail::moment_step(f, MomentKind::raw, entries, k, i);
        k = k.plus(i);
        entries[k] = next;
    }
    return entries.at(k);
}

/// beta_k = sum_{p <= k} (-1)^{|k-p|} C(k,p) a_p x^{k-p}.
inline MomentTable central_from_raw(const MomentTable& raw) {
    if (raw.kind != MomentKind::raw) throw ArgumentError("central_from_raw: input is not a raw table");
    const FamilySpec& f = raw.family;
    const std::size_t m = f.dim;
    MomentTable out;
    out.kind = MomentKind::central;
    out.family = f;
    out.max_order = raw.max_order;
    auto binom = [](unsigned n, unsigned k) {
        std::int64_t c = 1;
        for (unsigned i = 1; i <= k; ++i) c = c * (n - k + i) / i;
        return c;
    };
    for (const MultiIndex& k : indices_up_to(m, raw.max_order)) {
        Expr acc = Expr::num(0);
        for (const MultiIndex& p : indices_up_to(m, k.order())) {
            bool below = true;
            for (std::size_t i = 0; i < m; ++i) below = below && p[i] <= k[i];
            if (!below) continue;
            auto it = raw.entries.find(p);
            if (it == raw.entries.end())
                throw ArgumentError("central_from_raw: raw table is missing entry " + p.str());
            std::int64_t coeff = 1;
            Expr mono = Expr::num(1);
            for (std::size_t i = 0; i < m; ++i) {
                coeff *= binom(k[i], p[i]);
                mono = mono * pow(Expr::var(f.mean_vars[i]), static_cast<std::int64_t>(k[i] - p[i]));
            }
            if ((k.order() - p.order()) % 2 == 1) coeff = -coeff;
            acc = acc + Expr::num(coeff) * it->second * mono;
        }
        out.entries.emplace(k, acc);
    }
    return out;
}

/// Numeric table at fixed bindings (family constants are added automatically).
inline std::map<MultiIndex, double> evaluate_table(const MomentTable& t, const Bindings& bindings) {
    Bindings b = bindings;
    for (const auto& [k, v] : t.family.constants) b.emplace(k, v);
    Evaluator ev(b);
    std::map<MultiIndex, double> out;
    for (const auto& [k, e] : t.entries) out.emplace(k, ev(e));
    return out;
}

/// Numeric table at mean x (charted families solve for their chart variables).
inline std::map<MultiIndex, double> evaluate_table_at(const MomentTable& t, std::span<const double> x) {
    return evaluate_table(t, t.family.bind_mean(x));
}

/// Memoizes symbolic tables per (family, kind); later requests extend the stored table.
class MomentCache {
  public:
    MomentTable get(const FamilySpec& f, MomentKind kind, unsigned max_order) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(f.fingerprint(), kind);
        auto it = tables_.find(key);
        if (it == tables_.end()) it = tables_.emplace(key, build_table(f, kind, std::max(1u, max_order))).first;
        else if (it->second.max_order < max_order) extend(it->second, max_order);
        MomentTable copy = it->second;
        for (auto e = copy.entries.begin(); e != copy.entries.end();)
            e = e->first.order() > max_order ? copy.entries.erase(e) : std::next(e);
        copy.max_order = max_order;
        return copy;
    }

  private:
    std::mutex mutex_;
    std::map<std::pair<std::string, MomentKind>, MomentTable> tables_;
};

}  // namespace classb
