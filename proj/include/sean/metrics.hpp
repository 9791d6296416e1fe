#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sean/corpus.hpp"
#include "sean/error.hpp"
#include "sean/types.hpp"

namespace sean {

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Predicted positive means p >= threshold.
inline Confusion confusion(std::span<const double> preds, std::span<const int> labels, double threshold) {
    if (preds.size() != labels.size()) throw std::invalid_argument("preds and labels differ in length");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
    Confusion c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pos = preds[i] >= threshold;
        if (labels[i]) (pos ? c.tp : c.fn)++;
        else (pos ? c.fp : c.tn)++;
    }
    return c;
}

/// F1 at a threshold; nullopt on empty input, 0 when precision + recall is 0.
inline std::optional<double> f1(std::span<const double> preds, std::span<const int> labels, double threshold = 0.5) {
    const auto c = confusion(preds, labels, threshold);
    if (preds.empty()) return std::nullopt;
    const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    if (c.tp == 0 || denom == 0.0) return 0.0;
    return 2.0 * static_cast<double>(c.tp) / denom;
}

/// Rank-sum AUC with mid-ranks for ties; nullopt unless both classes occur.
inline std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // rank sums doubled so mid-ranks stay integral
    std::uint64_t pos_rank2 = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t mid2 = static_cast<std::uint64_t>(i + 1 + j);  // 2 * average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) pos_rank2 += mid2;
        i = j;
    }
    const std::uint64_t base2 = static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
    const double wins2 = static_cast<double>(pos_rank2 - base2);
    return wins2 / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Gini coefficient sum((2i - n - 1) x_(i)) / (n sum x) over ascending ranks.
/// nullopt for empty or all-zero input.
inline std::optional<double> gini(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return std::nullopt;
    std::vector<double> x(values.begin(), values.end());
    for (double v : x)
        if (!(v >= 0.0)) throw std::invalid_argument("gini requires nonnegative values");
    std::stable_sort(x.begin(), x.end());
    double total = 0.0, weighted = 0.0;
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        total += x[i];
        weighted += (2.0 * static_cast<double>(i + 1) - nn - 1.0) * x[i];
    }
    if (total == 0.0) return std::nullopt;
    return weighted / (nn * total);
}

/// Harmonic mean of F1 and 1 - Gini.
inline double cc(double f1_value, double gini_value) {
    const double eq = 1.0 - gini_value;
    const double denom = eq + f1_value;
    if (denom == 0.0) return 0.0;
    return 2.0 * eq * f1_value / denom;
}

/// Recommendation impressions per creator.
class ImpressionLedger {
public:
    void touch(UserId creator) { counts_.try_emplace(creator, 0); }
    void add(UserId creator, std::uint64_t n = 1) { counts_[creator] += n; }

    void merge(const ImpressionLedger& other) {
        for (auto [c, n] : other.counts_) counts_[c] += n;
    }

    std::uint64_t count(UserId creator) const {
        auto it = counts_.find(creator);
        return it == counts_.end() ? 0 : it->second;
    }

    std::size_t size() const { return counts_.size(); }
    const std::map<UserId, std::uint64_t>& counts() const { return counts_; }

    std::vector<double> values() const {
        std::vector<double> v;
        v.reserve(counts_.size());
        for (auto [c, n] : counts_) v.push_back(static_cast<double>(n));
        return v;
    }

    std::optional<double> gini() const {
        auto v = values();
        return sean::gini(v);
    }

    void write(std::ostream& out, const UserRegistry& users) const {
        for (auto [c, n] : counts_) out << users.name(c) << '\t' << n << '\n';
    }

private:
    std::map<UserId, std::uint64_t> counts_;
};

/// Counts one impression per predicted-positive sample for the document's
/// creator. Every creator with a document among `samples` appears, possibly with 0.
inline ImpressionLedger record_impressions(std::span<const Sample> samples, std::span<const double> preds,
                                           const DocumentStore& docs, std::size_t n_users, double threshold = 0.5) {
    if (samples.size() != preds.size()) throw std::invalid_argument("samples and preds differ in length");
    ImpressionLedger ledger;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].doc >= docs.size()) throw DataError("sample references unknown document");
        UserId creator = docs[samples[i].doc].creator;
        if (creator.index() >= n_users) throw DataError("document creator is not a known user");
        ledger.touch(creator);
        if (preds[i] >= threshold) ledger.add(creator);
    }
    return ledger;
}

} // namespace sean
