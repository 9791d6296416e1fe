#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sean/error.hpp"
#include "sean/rewards.hpp"
#include "sean/social_graph.hpp"
#include "sean/types.hpp"

namespace sean {

/// A friend path; element 0 is the owner.
using Path = std::vector<UserId>;

struct FriendSelection {
    UserId owner;
    std::vector<Path> paths;

    /// All path members except the owner, in path order (duplicates kept).
    std::vector<UserId> friends() const {
        std::vector<UserId> out;
        for (const auto& p : paths) out.insert(out.end(), p.begin() + (p.empty() ? 0 : 1), p.end());
        return out;
    }
};

/// Per-user visit counts N, exploitation values Q and the current friend paths.
class ExplorationState {
public:
    ExplorationState() = default;
    ExplorationState(std::size_t n_users, double lambda)
        : visits_(n_users, 0.0), q_sum_(n_users, 0.0), q_count_(n_users, 0), paths_(n_users), lambda_(lambda) {}

    std::size_t size() const { return visits_.size(); }
    double lambda() const { return lambda_; }
    void set_lambda(double l) { lambda_ = l; }

    double visits(UserId u) const { return u.index() < visits_.size() ? visits_[u.index()] : 0.0; }
    void add_visits(UserId u, double amount) { visits_.at(u.index()) += amount; }

    /// Running mean of recorded RS-F1 signals; 0 before the first one.
    double value(UserId u) const {
        if (u.index() >= q_count_.size() || q_count_[u.index()] == 0) return 0.0;
        return q_sum_[u.index()] / static_cast<double>(q_count_[u.index()]);
    }
    std::uint64_t signal_count(UserId u) const { return q_count_.at(u.index()); }

    void add_signal(UserId u, double signal) {
        q_sum_.at(u.index()) += signal;
        ++q_count_.at(u.index());
    }

    const std::vector<Path>& paths(UserId u) const { return paths_.at(u.index()); }
    void set_paths(UserId u, std::vector<Path> p) { paths_.at(u.index()) = std::move(p); }

    RewardTable rs_f1_table() const {
        RewardTable t{RewardSource::RsF1, std::vector<double>(size())};
        for (std::size_t i = 0; i < size(); ++i) t.values[i] = value(UserId(static_cast<std::uint32_t>(i)));
        return t;
    }

    friend bool operator==(const ExplorationState&, const ExplorationState&) = default;

    void write(std::ostream& out, const UserRegistry& users) const;
    static ExplorationState read(std::istream& in, const UserRegistry& users, double lambda);

private:
    std::vector<double> visits_;
    std::vector<double> q_sum_;
    std::vector<std::uint64_t> q_count_;
    std::vector<std::vector<Path>> paths_;
    double lambda_ = 1.0;
};

/// sqrt(ln N(parent) / (N(v) + 1)); zero while the parent has fewer than one visit.
inline double exploration_utility(UserId parent, UserId v, const ExplorationState& state) {
    const double np = state.visits(parent);
    if (np < 1.0) return 0.0;
    return std::sqrt(std::log(np) / (state.visits(v) + 1.0));
}

inline double ucb1_score(UserId v, UserId parent, const ExplorationState& state, const RewardTable& rewards) {
    return rewards[v] + state.lambda() * exploration_utility(parent, v, state);
}

using EdgeScore = std::function<double(UserId parent, UserId v)>;

/// Beam search over friend paths of depth L.
///
/// Every depth pools the candidates (T_b + score(tail_b, v)) for the unused
/// neighbors v of each growing beam's tail. The best candidates, ranked by
/// score then lowest user id then lowest beam index, become the next beams;
/// identical extended paths are taken once. A beam with no unused neighbor
/// stops growing and keeps its slot. If the pool has fewer distinct
/// candidates than free slots, chosen paths are repeated in rank order.
inline FriendSelection beam_search(UserId u, int B, int L, const SocialGraph& g, const EdgeScore& score) {
    if (B < 1 || L < 1) throw ConfigError("beam width and depth must be >= 1");
    if (!g.contains(u)) throw LookupError("user id " + std::to_string(u.value) + " not in graph");

    struct Beam {
        Path path;
        double total = 0.0;
        bool stopped = false;
    };
    struct Candidate {
        double score;
        UserId v;
        std::size_t beam;
    };

    std::vector<Beam> beams(static_cast<std::size_t>(B), Beam{Path{u}, 0.0, false});
    std::vector<Candidate> pool;
    for (int depth = 0; depth < L; ++depth) {
        pool.clear();
        for (std::size_t b = 0; b < beams.size(); ++b) {
            auto& beam = beams[b];
            if (beam.stopped) continue;
            const UserId tail = beam.path.back();
            bool any = false;
            for (UserId v : g.neighbors(tail)) {
                if (std::find(beam.path.begin(), beam.path.end(), v) != beam.path.end()) continue;
                pool.push_back({beam.total + score(tail, v), v, b});
                any = true;
            }
            if (!any) beam.stopped = true;
        }
        if (pool.empty()) break;
        std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.v != b.v) return a.v < b.v;
            return a.beam < b.beam;
        });

        std::vector<Beam> next;
        for (const auto& beam : beams)
            if (beam.stopped) next.push_back(beam);
        const std::size_t slots = beams.size() - next.size();
        std::vector<Beam> grown;
        for (const auto& c : pool) {
            if (grown.size() == slots) break;
            const auto& parent = beams[c.beam].path;
            bool duplicate = std::any_of(grown.begin(), grown.end(), [&](const Beam& g2) {
                return g2.path.back() == c.v && std::equal(parent.begin(), parent.end(), g2.path.begin());
            });
            if (duplicate) continue;
            Beam nb{parent, c.score, false};
            nb.path.push_back(c.v);
            grown.push_back(std::move(nb));
        }
        for (std::size_t i = 0; grown.size() < slots; ++i) grown.push_back(grown[i]);
        next.insert(next.end(), grown.begin(), grown.end());
        beams = std::move(next);
    }

    FriendSelection sel{u, {}};
    sel.paths.reserve(beams.size());
    for (auto& b : beams) sel.paths.push_back(std::move(b.path));
    return sel;
}

/// Beam-constrained UCB1 friend search for user u.
inline FriendSelection select_friends(UserId u, int B, int L, const SocialGraph& g, const ExplorationState& state,
                                      const RewardTable& rewards) {
    return beam_search(u, B, L, g, [&](UserId parent, UserId v) { return ucb1_score(v, parent, state, rewards); });
}

/// Each non-owner path member gains 1/B per path it appears in.
inline void record_selection(const FriendSelection& sel, ExplorationState& state) {
    if (sel.paths.empty()) return;
    const double inc = 1.0 / static_cast<double>(sel.paths.size());
    for (const auto& p : sel.paths)
        for (std::size_t i = 1; i < p.size(); ++i) state.add_visits(p[i], inc);
}

inline void update_exploitation(UserId u, double signal, ExplorationState& state) { state.add_signal(u, signal); }

enum class PathInit { RandomSelect, RandomWalk };

/// Random paths used before the search has statistics, and by the random
/// exploration baselines. random_select ignores edges; random_walk follows them.
inline std::vector<Path> init_paths(UserId u, int B, int L, PathInit mode, const SocialGraph& g, std::uint64_t seed) {
    if (B < 1 || L < 1) throw ConfigError("beam width and depth must be >= 1");
    if (!g.contains(u)) throw LookupError("user id " + std::to_string(u.value) + " not in graph");
    std::seed_seq seq{seed, static_cast<std::uint64_t>(u.value), std::uint64_t{0x5eed}};
    std::mt19937_64 rng(seq);
    std::vector<Path> out;
    out.reserve(static_cast<std::size_t>(B));
    std::vector<std::uint32_t> pool;
    for (int b = 0; b < B; ++b) {
        Path p{u};
        if (mode == PathInit::RandomSelect) {
            pool.clear();
            for (std::uint32_t i = 0; i < g.size(); ++i)
                if (i != u.value) pool.push_back(i);
            const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(L), pool.size());
            for (std::size_t i = 0; i < take; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
                std::swap(pool[i], pool[pick(rng)]);
                p.push_back(UserId(pool[i]));
            }
        } else {
            UserId cur = u;
            for (int step = 0; step < L; ++step) {
                std::vector<UserId> options;
                for (UserId v : g.neighbors(cur))
                    if (v != u) options.push_back(v);
                if (options.empty()) break;
                std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
                cur = options[pick(rng)];
                p.push_back(cur);
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// One path holding up to L direct neighbors in adjacency order.
inline FriendSelection one_hop_selection(UserId u, int L, const SocialGraph& g) {
    Path p{u};
    for (UserId v : g.neighbors(u)) {
        if (static_cast<int>(p.size()) > L) break;
        p.push_back(v);
    }
    return {u, {std::move(p)}};
}

// --- checkpoint ----------------------------------------------------------------

inline void ExplorationState::write(std::ostream& out, const UserRegistry& users) const {
    for (std::size_t i = 0; i < size(); ++i) {
        UserId u(static_cast<std::uint32_t>(i));
        nlohmann::json j;
        j["user"] = users.name(u);
        j["N"] = visits_[i];
        j["Q"] = value(u);
        j["Q_sum"] = q_sum_[i];
        j["Q_count"] = q_count_[i];
        auto paths = nlohmann::json::array();
        for (const auto& p : paths_[i]) {
            auto jp = nlohmann::json::array();
            for (UserId v : p) jp.push_back(users.name(v));
            paths.push_back(std::move(jp));
        }
        j["paths"] = std::move(paths);
        out << j.dump() << '\n';
    }
}

inline ExplorationState ExplorationState::read(std::istream& in, const UserRegistry& users, double lambda) {
    ExplorationState st(users.size(), lambda);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        try {
            auto j = nlohmann::json::parse(line);
            UserId u = users.at(j.at("user").get<std::string>());
            st.visits_[u.index()] = j.at("N").get<double>();
            if (j.contains("Q_count")) {
                st.q_sum_[u.index()] = j.at("Q_sum").get<double>();
                st.q_count_[u.index()] = j.at("Q_count").get<std::uint64_t>();
            } else if (double q = j.at("Q").get<double>(); q != 0.0) {
                st.q_sum_[u.index()] = q;
                st.q_count_[u.index()] = 1;
            }
            std::vector<Path> paths;
            for (const auto& jp : j.at("paths")) {
                Path p;
                for (const auto& name : jp) p.push_back(users.at(name.get<std::string>()));
                paths.push_back(std::move(p));
            }
            st.paths_[u.index()] = std::move(paths);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("explorer checkpoint line " + std::to_string(line_no) + ": " + e.what());
        } catch (const LookupError& e) {
            throw DataError("explorer checkpoint line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return st;
}

} // namespace sean
