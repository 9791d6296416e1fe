#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sean/explorer.hpp"
#include "oracles.hpp"

using namespace sean;
using sean::oracle::beam_by_popping;
using sean::oracle::graph_from;
using sean::oracle::random_edges;

namespace {

UserId id(int v) { return UserId(static_cast<std::uint32_t>(v)); }

Path path(std::initializer_list<int> ids) {
    Path p;
    for (int v : ids) p.push_back(id(v));
    return p;
}

// Nodes 1..9 of the worked example; node 0 is unused.
SocialGraph example_graph() {
    return graph_from(10, {{1, 2}, {1, 3}, {1, 4}, {1, 5}, {2, 6}, {3, 6}, {3, 7}, {4, 8}, {4, 9}, {5, 9}});
}

RewardTable table(std::vector<double> v) { return RewardTable{RewardSource::RsF1, std::move(v)}; }

} // namespace

TEST(Utility, HandValues) {
    ExplorationState st(3, 1.0);
    EXPECT_EQ(exploration_utility(id(0), id(1), st), 0.0);  // parent never visited
    st.add_visits(id(0), 1.0);
    EXPECT_EQ(exploration_utility(id(0), id(1), st), 0.0);  // ln 1
    st.add_visits(id(0), 9.0);
    EXPECT_NEAR(exploration_utility(id(0), id(1), st), 1.5174, 5e-5);
    st.add_visits(id(1), 9.0);
    EXPECT_NEAR(exploration_utility(id(0), id(1), st), 0.4799, 5e-5);
}

TEST(Ucb1, ExplorationCanDominate) {
    ExplorationState st(3, 1.0);
    st.add_visits(id(0), 10.0);
    st.add_visits(id(1), 3.0);
    auto r = table({0.0, 0.5, 0.2});
    EXPECT_NEAR(ucb1_score(id(1), id(0), st, r), 1.2587, 5e-5);
    EXPECT_NEAR(ucb1_score(id(2), id(0), st, r), 1.7174, 5e-5);
    st.set_lambda(0.0);
    EXPECT_EQ(ucb1_score(id(1), id(0), st, r), 0.5);
    EXPECT_EQ(ucb1_score(id(7), id(0), st, r), 0.0);  // outside the table
}

TEST(Ucb1, EqualRewardsPreferLeastSelected) {
    auto g = graph_from(4, {{0, 1}, {0, 2}, {0, 3}});
    ExplorationState st(4, 1.0);
    st.add_visits(id(0), 5.0);
    st.add_visits(id(1), 2.0);
    st.add_visits(id(2), 0.5);
    st.add_visits(id(3), 1.0);
    auto sel = select_friends(id(0), 1, 1, g, st, table({0.3, 0.3, 0.3, 0.3}));
    EXPECT_EQ(sel.paths, std::vector<Path>{path({0, 2})});
}

TEST(Beam, WorkedExamplePaths) {
    auto g = example_graph();
    ExplorationState st(10, 0.0);
    std::vector<double> q(10, 0.1);
    q[3] = 0.9;
    q[4] = 0.8;
    q[7] = 0.7;
    q[8] = 0.6;
    auto sel = select_friends(id(1), 2, 2, g, st, table(q));
    ASSERT_EQ(sel.paths.size(), 2u);
    EXPECT_EQ(sel.paths[0], path({1, 3, 7}));
    EXPECT_EQ(sel.paths[1], path({1, 4, 8}));
    EXPECT_EQ(sel.friends(), (std::vector<UserId>{id(3), id(7), id(4), id(8)}));
}

TEST(Beam, OneBeamWithoutExplorationIsGreedyWalk) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = graph_from(8, random_edges(8, 0.4, rng));
        std::vector<double> q(8);
        for (double& x : q) x = u(rng);
        ExplorationState st(8, 0.0);
        auto sel = select_friends(id(0), 1, 3, g, st, table(q));
        Path greedy{id(0)};
        for (int d = 0; d < 3; ++d) {
            UserId best;
            double best_q = -1.0;
            for (UserId v : g.neighbors(greedy.back()))
                if (std::find(greedy.begin(), greedy.end(), v) == greedy.end() && q[v.index()] > best_q) {
                    best_q = q[v.index()];
                    best = v;
                }
            if (best_q < 0.0) break;
            greedy.push_back(best);
        }
        EXPECT_EQ(sel.paths, std::vector<Path>{greedy});
    }
}

TEST(Beam, MatchesPoppingSimulatorOnSmallGraphs) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 2 + rng() % 7;
        auto g = graph_from(n, random_edges(n, 0.2 + 0.6 * u(rng), rng));
        std::vector<double> w(n * n);
        for (double& x : w) x = u(rng);
        auto score = [&](UserId p, UserId v) { return w[p.index() * n + v.index()]; };
        int B = 1 + static_cast<int>(rng() % 4), L = 1 + static_cast<int>(rng() % 3);
        UserId root = id(static_cast<int>(rng() % n));
        auto sel = beam_search(root, B, L, g, score);
        EXPECT_EQ(sel.paths, beam_by_popping(root, B, L, g, score)) << "trial " << trial;
    }
}

TEST(Beam, PathsAreWalksWithoutRepeats) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = graph_from(12, random_edges(12, 0.25, rng));
        std::vector<double> q(12);
        for (double& x : q) x = u(rng);
        ExplorationState st(12, 1.0);
        for (int i = 0; i < 12; ++i) st.add_visits(id(i), 3.0 * u(rng));
        auto sel = select_friends(id(0), 3, 4, g, st, table(q));
        ASSERT_EQ(sel.paths.size(), 3u);
        for (const auto& p : sel.paths) {
            ASSERT_FALSE(p.empty());
            EXPECT_EQ(p.front(), id(0));
            EXPECT_LE(p.size(), 5u);
            for (std::size_t i = 1; i < p.size(); ++i) {
                EXPECT_TRUE(g.has_edge(p[i - 1], p[i]));
                EXPECT_EQ(std::count(p.begin(), p.end(), p[i]), 1);
            }
        }
    }
}

TEST(Beam, IsolatedOwnerAndBadArguments) {
    auto g = graph_from(3, {{1, 2}});
    ExplorationState st(3, 1.0);
    auto sel = select_friends(id(0), 3, 2, g, st, table({0, 0, 0}));
    EXPECT_EQ(sel.paths, (std::vector<Path>(3, path({0}))));
    EXPECT_TRUE(sel.friends().empty());
    EXPECT_THROW(select_friends(id(0), 0, 2, g, st, table({})), ConfigError);
    EXPECT_THROW(select_friends(id(0), 1, 0, g, st, table({})), ConfigError);
    EXPECT_THROW(select_friends(id(9), 1, 1, g, st, table({})), LookupError);
}

TEST(Selection, RecordsOneOverB) {
    ExplorationState st(6, 1.0);
    FriendSelection sel{id(0), {path({0, 1, 2}), path({0, 1, 3}), path({0, 4})}};
    record_selection(sel, st);
    EXPECT_NEAR(st.visits(id(1)), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(st.visits(id(2)), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(st.visits(id(4)), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(st.visits(id(0)), 0.0);
    FriendSelection same{id(0), {path({0, 5}), path({0, 5}), path({0, 5})}};
    record_selection(same, st);
    EXPECT_NEAR(st.visits(id(5)), 1.0, 1e-15);
}

TEST(Selection, TotalIncrementMatchesCount) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = graph_from(10, random_edges(10, 0.3, rng));
        ExplorationState st(10, 1.0);
        int B = 1 + static_cast<int>(rng() % 5);
        auto sel = select_friends(id(0), B, 3, g, st, table(std::vector<double>(10, 0.0)));
        record_selection(sel, st);
        double total = 0.0, expected = 0.0;
        for (int i = 0; i < 10; ++i) total += st.visits(id(i));
        for (const auto& p : sel.paths) expected += static_cast<double>(p.size() - 1) / B;
        EXPECT_NEAR(total, expected, 1e-12);
    }
}

TEST(Exploitation, RunningMean) {
    ExplorationState st(2, 1.0);
    EXPECT_EQ(st.value(id(0)), 0.0);
    update_exploitation(id(0), 0.4, st);
    update_exploitation(id(0), 0.6, st);
    EXPECT_NEAR(st.value(id(0)), 0.5, 1e-15);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> history;
    for (int i = 0; i < 100; ++i) {
        history.push_back(u(rng));
        update_exploitation(id(1), history.back(), st);
    }
    double mean = 0.0;
    for (double x : history) mean += x / 100.0;
    EXPECT_NEAR(st.value(id(1)), mean, 1e-12);
    EXPECT_EQ(st.rs_f1_table()[id(1)], st.value(id(1)));
}

TEST(InitPaths, RandomWalkFollowsEdges) {
    std::mt19937_64 rng(5);
    auto g = graph_from(15, random_edges(15, 0.2, rng));
    auto a = init_paths(id(0), 4, 5, PathInit::RandomWalk, g, 99);
    EXPECT_EQ(a, init_paths(id(0), 4, 5, PathInit::RandomWalk, g, 99));
    ASSERT_EQ(a.size(), 4u);
    for (const auto& p : a) {
        EXPECT_EQ(p.front(), id(0));
        EXPECT_LE(p.size(), 6u);
        for (std::size_t i = 1; i < p.size(); ++i) {
            EXPECT_TRUE(g.has_edge(p[i - 1], p[i]));
            EXPECT_NE(p[i], id(0));
        }
    }
}

TEST(InitPaths, RandomSelectDrawsDistinctUsers) {
    auto g = graph_from(8, {});
    auto a = init_paths(id(3), 2, 4, PathInit::RandomSelect, g, 1);
    ASSERT_EQ(a.size(), 2u);
    for (const auto& p : a) {
        ASSERT_EQ(p.size(), 5u);
        Path sorted(p.begin(), p.end());
        std::sort(sorted.begin(), sorted.end());
        EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    }
    EXPECT_NE(a, init_paths(id(3), 2, 4, PathInit::RandomSelect, g, 2));
    auto tiny = init_paths(id(0), 1, 5, PathInit::RandomSelect, graph_from(3, {}), 1);
    EXPECT_EQ(tiny[0].size(), 3u);
}

TEST(OneHop, TakesDirectNeighborsInOrder) {
    auto g = example_graph();
    auto sel = one_hop_selection(id(1), 3, g);
    EXPECT_EQ(sel.paths, std::vector<Path>{path({1, 2, 3, 4})});
    EXPECT_EQ(one_hop_selection(id(1), 10, g).paths[0].size(), 5u);
}

TEST(Checkpoint, RoundTrip) {
    UserRegistry users;
    for (int i = 0; i < 5; ++i) users.intern("user" + std::to_string(i));
    ExplorationState st(5, 0.7);
    st.add_visits(id(1), 1.0 / 3.0);
    st.add_visits(id(2), 2.5);
    update_exploitation(id(2), 0.1, st);
    update_exploitation(id(2), 0.35, st);
    st.set_paths(id(0), {path({0, 1, 2}), path({0, 3})});
    std::stringstream buf;
    buf << "# a comment line\n";
    st.write(buf, users);
    auto back = ExplorationState::read(buf, users, 0.7);
    EXPECT_EQ(back, st);
    std::stringstream again;
    back.write(again, users);
    std::stringstream first;
    st.write(first, users);
    EXPECT_EQ(again.str(), first.str());
}

TEST(Checkpoint, Errors) {
    UserRegistry users;
    users.intern("a");
    std::istringstream bad("{not json}\n");
    EXPECT_THROW(ExplorationState::read(bad, users, 1.0), ParseError);
    std::istringstream unknown(R"({"user":"zz","N":1,"Q":0,"paths":[]})" "\n");
    EXPECT_THROW(ExplorationState::read(unknown, users, 1.0), DataError);
}
