#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sean/corpus.hpp"
#include "sean/error.hpp"
#include "sean/social_graph.hpp"
#include "sean/types.hpp"

namespace sean {

enum class RewardSource { RsF1, Spr, Dpr, Payout };

inline std::string_view to_string(RewardSource s) {
    switch (s) {
    case RewardSource::RsF1: return "RS-F1";
    case RewardSource::Spr: return "SPR";
    case RewardSource::Dpr: return "DPR";
    case RewardSource::Payout: return "Payout";
    }
    return "?";
}

/// Per-user exploitation values. Users beyond the table read as 0.
struct RewardTable {
    RewardSource source = RewardSource::RsF1;
    std::vector<double> values;

    double operator[](UserId u) const { return u.index() < values.size() ? values[u.index()] : 0.0; }
    std::size_t size() const { return values.size(); }
};

inline void write_reward_table(std::ostream& out, const RewardTable& table, const UserRegistry& users) {
    char buf[64];
    for (std::size_t i = 0; i < table.values.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), table.values[i]);
        out << users.name(UserId(static_cast<std::uint32_t>(i))) << '\t' << std::string_view(buf, end - buf) << '\n';
    }
}

struct PageRankOptions {
    double damping = 0.9;
    double tol = 1e-8;
    int max_iter = 200;
};

/// Power iteration on an edge list over n nodes. Dangling mass is spread
/// uniformly; iteration stops once the L1 change drops below tol.
inline std::vector<double> pagerank(std::size_t n, const std::vector<std::vector<UserId>>& out_edges,
                                    const PageRankOptions& opt) {
    if (n == 0) throw DataError("pagerank on empty graph");
    if (!(opt.damping > 0.0 && opt.damping < 1.0)) throw ConfigError("pagerank damping must lie in (0, 1)");
    if (!(opt.tol > 0.0)) throw ConfigError("pagerank tolerance must be positive");
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> rank(n, inv_n), next(n);
    for (int it = 0; it < opt.max_iter; ++it) {
        double dangling = 0.0;
        for (std::size_t u = 0; u < n; ++u)
            if (out_edges[u].empty()) dangling += rank[u];
        const double base = (1.0 - opt.damping) * inv_n + opt.damping * dangling * inv_n;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t u = 0; u < n; ++u) {
            const auto& outs = out_edges[u];
            if (outs.empty()) continue;
            const double share = opt.damping * rank[u] / static_cast<double>(outs.size());
            for (UserId v : outs) next[v.index()] += share;
        }
        double delta = 0.0;
        for (std::size_t u = 0; u < n; ++u) delta += std::abs(next[u] - rank[u]);
        rank.swap(next);
        if (delta < opt.tol) break;
    }
    double total = 0.0;
    for (double r : rank) total += r;
    for (double& r : rank) r /= total;
    return rank;
}

namespace detail {
inline std::vector<std::vector<UserId>> adjacency_of(const SocialGraph& g) {
    std::vector<std::vector<UserId>> adj(g.size());
    for (std::size_t u = 0; u < g.size(); ++u) adj[u] = g.neighbors(UserId(static_cast<std::uint32_t>(u)));
    return adj;
}
} // namespace detail

inline RewardTable static_pagerank(const SocialGraph& g, const PageRankOptions& opt = {}) {
    return {RewardSource::Spr, pagerank(g.size(), detail::adjacency_of(g), opt)};
}

/// Consumer -> creator edges per day, derived from comment logs.
class ActivityNetwork {
public:
    ActivityNetwork() = default;

    ActivityNetwork(const InteractionIndex& logs, const DocumentStore& docs, std::size_t n_users)
        : n_users_(n_users), days_(static_cast<std::size_t>(logs.n_days())) {
        for (int day = 0; day < logs.n_days(); ++day) {
            auto& edges = days_[static_cast<std::size_t>(day)];
            for (auto [u, d] : logs.pairs(day)) {
                UserId creator = docs[d].creator;
                if (creator != u) edges.emplace_back(u, creator);
            }
            std::sort(edges.begin(), edges.end());
            edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        }
    }

    std::size_t n_users() const { return n_users_; }
    int n_days() const { return static_cast<int>(days_.size()); }

    const std::vector<std::pair<UserId, UserId>>& edges(int day) const {
        if (day < 0 || day >= n_days()) throw RangeError("activity day " + std::to_string(day) + " outside dataset");
        return days_[static_cast<std::size_t>(day)];
    }

private:
    std::size_t n_users_ = 0;
    std::vector<std::vector<std::pair<UserId, UserId>>> days_;
};

/// PageRank over one day's activity edges; a day without activity yields the uniform table.
inline RewardTable dynamic_pagerank(int day, const ActivityNetwork& activity, const PageRankOptions& opt = {}) {
    const auto& edges = activity.edges(day);
    const std::size_t n = activity.n_users();
    if (n == 0) throw DataError("pagerank on empty graph");
    if (edges.empty()) return {RewardSource::Dpr, std::vector<double>(n, 1.0 / static_cast<double>(n))};
    std::vector<std::vector<UserId>> adj(n);
    for (auto [src, dst] : edges) adj[src.index()].push_back(dst);
    return {RewardSource::Dpr, pagerank(n, adj, opt)};
}

/// Per-user payout series with prefix sums for cumulative or windowed lookups.
class PayoutTable {
public:
    void add(UserId u, int day, double amount) {
        if (!(amount >= 0.0) || !std::isfinite(amount)) throw DataError("payout must be finite and >= 0");
        if (u.index() >= series_.size()) series_.resize(u.index() + 1);
        series_[u.index()].push_back({day, amount, 0.0});
        dirty_ = true;
    }

    /// Sum of payouts with day in (day - window, day]; window 0 means cumulative.
    double payout(UserId u, int day, int window_days = 0) const {
        finalize();
        if (u.index() >= series_.size()) return 0.0;
        const auto& s = series_[u.index()];
        auto upto = [&](int d) {
            auto it = std::upper_bound(s.begin(), s.end(), d, [](int x, const Entry& e) { return x < e.day; });
            return it == s.begin() ? 0.0 : std::prev(it)->prefix;
        };
        double total = upto(day);
        if (window_days > 0) total -= upto(day - window_days);
        return std::max(total, 0.0);
    }

    RewardTable table(int day, std::size_t n_users, int window_days = 0) const {
        RewardTable t{RewardSource::Payout, std::vector<double>(n_users, 0.0)};
        for (std::size_t u = 0; u < n_users; ++u) t.values[u] = payout(UserId(static_cast<std::uint32_t>(u)), day, window_days);
        return t;
    }

private:
    struct Entry {
        int day;
        double amount;
        double prefix;
    };

    void finalize() const {
        if (!dirty_) return;
        for (auto& s : series_) {
            std::stable_sort(s.begin(), s.end(), [](const Entry& a, const Entry& b) { return a.day < b.day; });
            double acc = 0.0;
            for (auto& e : s) e.prefix = acc += e.amount;
        }
        dirty_ = false;
    }

    mutable std::vector<std::vector<Entry>> series_;
    mutable bool dirty_ = false;
};

/// Reads `user<TAB>day<TAB>payout` lines; users are registered on first sight.
inline PayoutTable read_payouts(std::istream& in, UserRegistry& users) {
    PayoutTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || t1 == 0)
            throw ParseError("payout line " + std::to_string(line_no) + ": expected user<TAB>day<TAB>payout");
        std::string_view sv(line);
        auto day_s = sv.substr(t1 + 1, t2 - t1 - 1);
        auto amt_s = sv.substr(t2 + 1);
        int day = 0;
        double amount = 0;
        auto r1 = std::from_chars(day_s.data(), day_s.data() + day_s.size(), day);
        auto r2 = std::from_chars(amt_s.data(), amt_s.data() + amt_s.size(), amount);
        if (r1.ec != std::errc() || r1.ptr != day_s.data() + day_s.size() || r2.ec != std::errc() ||
            r2.ptr != amt_s.data() + amt_s.size())
            throw ParseError("payout line " + std::to_string(line_no) + ": bad number");
        try {
            table.add(users.intern(sv.substr(0, t1)), day, amount);
        } catch (const DataError& e) {
            throw ParseError("payout line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return table;
}

inline PayoutTable load_payouts(const std::string& path, UserRegistry& users) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open payout file: " + path);
    return read_payouts(in, users);
}

} // namespace sean
