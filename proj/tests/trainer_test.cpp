#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sean/report.hpp"
#include "sean/synth.hpp"
#include "sean/trainer.hpp"
#include "test_util.hpp"

using namespace sean;
namespace fs = std::filesystem;

namespace {

const World& tiny_world() {
    static const World w = [] {
        auto dir = test::scratch_dir("trainer_world");
        WorldConfig c;
        c.n_consumers = 30;
        c.n_creators = 10;
        c.n_days = 4;
        c.topics = 3;
        c.docs_per_day = 6;
        c.vocab_per_topic = 10;
        c.shared_vocab = 10;
        c.embed_dim = 6;
        c.out_degree = 4;
        c.active_prob = 1.0;
        c.read_prob_own_topic = 0.8;
        c.min_sentences = 2;
        c.max_sentences = 3;
        c.min_tokens = 3;
        c.max_tokens = 5;
        generate_world(c, dir);
        return load_world(DataPaths::in_dir(dir));
    }();
    return w;
}

RunConfig tiny_config() {
    RunConfig c;
    c.hidden = 4;
    c.filters = 3;
    c.windows = {1, 2};
    c.batch_size = 16;
    c.epochs_per_day = 2;
    c.lr = 0.01;
    c.beam_width = 2;
    c.depth = 2;
    return c;
}

std::string reports_text(const std::vector<DailyReport>& reports) {
    std::string s;
    for (const auto& r : reports) s += r.to_json().dump() + "\n";
    return s;
}

std::string params_text(const SeanParams& p) {
    std::ostringstream out;
    write_params(out, p);
    return out.str();
}

std::string explorer_text(const StreamTrainer& t) {
    std::ostringstream out;
    t.explorer().write(out, tiny_world().users);
    return out.str();
}

} // namespace

TEST(Loss, BinaryCrossEntropy) {
    EXPECT_NEAR(bce_loss(0.8, 1), -std::log(0.8), 1e-15);
    EXPECT_NEAR(bce_loss(0.8, 0), -std::log(0.2), 1e-12);
    std::vector<double> p{0.8, 0.8};
    std::vector<int> y{1, 0};
    EXPECT_NEAR(bce_loss(p, y), 0.5 * (-std::log(0.8) - std::log(0.2)), 1e-12);
    EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
    EXPECT_THROW(bce_loss(p, std::vector<int>{1}), std::invalid_argument);
}

TEST(Stream, TrainsOnEachDayAndTestsOnTheNext) {
    StreamTrainer t(tiny_world(), tiny_config());
    auto reports = t.run();
    ASSERT_EQ(reports.size(), 3u);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        EXPECT_EQ(reports[i].train_day, static_cast<int>(i));
        EXPECT_EQ(reports[i].test_day, static_cast<int>(i) + 1);
        EXPECT_EQ(reports[i].epoch_loss.size(), 2u);
        EXPECT_GT(reports[i].samples, 0u);
        if (reports[i].f1) {
            EXPECT_GE(*reports[i].f1, 0.0);
            EXPECT_LE(*reports[i].f1, 1.0);
        }
    }
    auto s = summarize(reports);
    EXPECT_EQ(s.days, 3u);
    ASSERT_TRUE(s.auc.has_value());
}

TEST(Stream, DaysLimitShortensTheStream) {
    auto c = tiny_config();
    c.days = 2;
    StreamTrainer t(tiny_world(), c);
    EXPECT_EQ(t.run().size(), 1u);
}

TEST(Stream, SameSeedSameEverything) {
    StreamTrainer a(tiny_world(), tiny_config()), b(tiny_world(), tiny_config());
    auto ra = a.run(), rb = b.run();
    EXPECT_EQ(reports_text(ra), reports_text(rb));
    EXPECT_EQ(params_text(a.params()), params_text(b.params()));
    EXPECT_EQ(explorer_text(a), explorer_text(b));

    auto c = tiny_config();
    c.seed = 2;
    StreamTrainer other(tiny_world(), c);
    other.run();
    EXPECT_NE(params_text(a.params()), params_text(other.params()));
}

TEST(Stream, EvaluationLeavesStateAlone) {
    StreamTrainer t(tiny_world(), tiny_config());
    t.train_day(0);
    const auto params = params_text(t.params());
    const auto explorer = explorer_text(t);
    auto first = t.evaluate_day(1);
    auto second = t.evaluate_day(1);
    EXPECT_EQ(params_text(t.params()), params);
    EXPECT_EQ(explorer_text(t), explorer);
    EXPECT_EQ(first.to_json().dump(), second.to_json().dump());
}

TEST(Stream, EpochLossFallsWithinADay) {
    auto c = tiny_config();
    c.epochs_per_day = 8;
    c.dropout = 0.0;
    StreamTrainer t(tiny_world(), c);
    auto losses = t.train_day(0);
    ASSERT_EQ(losses.size(), 8u);
    EXPECT_LT(losses.back(), losses.front());
}

TEST(Explorer, InitialPathsAreRecorded) {
    auto c = tiny_config();
    StreamTrainer t(tiny_world(), c);
    double total = 0.0, expected = 0.0;
    for (std::uint32_t i = 0; i < tiny_world().n_users(); ++i) {
        total += t.explorer().visits(UserId(i));
        const auto& paths = t.explorer().paths(UserId(i));
        EXPECT_EQ(paths.size(), 2u);
        for (const auto& p : paths) expected += static_cast<double>(p.size() - 1) / 2.0;
    }
    EXPECT_NEAR(total, expected, 1e-9);
}

TEST(Explorer, RsF1FeedsValidationF1Back) {
    StreamTrainer t(tiny_world(), tiny_config());
    t.train_day(0);
    std::size_t with_signal = 0;
    for (std::uint32_t i = 0; i < tiny_world().n_users(); ++i) {
        UserId u(i);
        if (t.explorer().signal_count(u) == 0) continue;
        ++with_signal;
        EXPECT_EQ(t.explorer().signal_count(u), 1u);
        EXPECT_GE(t.explorer().value(u), 0.0);
        EXPECT_LE(t.explorer().value(u), 1.0);
    }
    EXPECT_GT(with_signal, 0u);
}

TEST(Explorer, OtherStrategiesLeaveQUntouched) {
    auto c = tiny_config();
    c.strategy = Strategy::Spr;
    StreamTrainer t(tiny_world(), c);
    t.train_day(0);
    for (std::uint32_t i = 0; i < tiny_world().n_users(); ++i) EXPECT_EQ(t.explorer().signal_count(UserId(i)), 0u);
}

TEST(Explorer, SelectedPathsFollowTheGraph) {
    StreamTrainer t(tiny_world(), tiny_config());
    t.train_day(0);
    const auto& g = tiny_world().graph;
    for (const auto& s : t.day_samples(0)) {
        const auto& paths = t.explorer().paths(s.user);
        ASSERT_EQ(paths.size(), 2u);
        for (const auto& p : paths) {
            EXPECT_EQ(p.front(), s.user);
            for (std::size_t k = 1; k < p.size(); ++k) EXPECT_TRUE(g.has_edge(p[k - 1], p[k]));
        }
    }
}

TEST(Ablation, NoSocialAddsNoVisits) {
    auto c = tiny_config();
    c.no_social = true;
    StreamTrainer t(tiny_world(), c);
    t.train_day(0);
    for (const auto& s : t.day_samples(0)) EXPECT_EQ(t.explorer().paths(s.user), std::vector<Path>{Path{s.user}});
    StreamTrainer fresh(tiny_world(), c);
    double v0 = 0, v1 = 0;
    for (std::uint32_t i = 0; i < tiny_world().n_users(); ++i) {
        v0 += fresh.explorer().visits(UserId(i));
        v1 += t.explorer().visits(UserId(i));
    }
    EXPECT_EQ(v0, v1);
}

TEST(Ablation, ColdStartRetrainsFromScratch) {
    auto c = tiny_config();
    c.no_social = true;
    c.warm_start = false;
    StreamTrainer a(tiny_world(), c), b(tiny_world(), c);
    a.train_day(0);
    a.train_day(1);
    b.train_day(1);
    EXPECT_EQ(params_text(a.params()), params_text(b.params()));
}

TEST(Ablation, EveryVariantAndStrategyRuns) {
    std::vector<std::function<void(RunConfig&)>> variants{
        [](RunConfig& c) { c.no_social = true; },
        [](RunConfig& c) { c.no_social_attention = true; },
        [](RunConfig& c) { c.one_hop = true; },
        [](RunConfig& c) { c.no_cnn = true; },
        [](RunConfig& c) { c.no_gru = true; },
        [](RunConfig& c) { c.strategy = Strategy::Spr; },
        [](RunConfig& c) { c.strategy = Strategy::Dpr; },
        [](RunConfig& c) { c.strategy = Strategy::Payout; },
        [](RunConfig& c) { c.strategy = Strategy::RandomSelect; },
        [](RunConfig& c) { c.strategy = Strategy::RandomWalk; },
        [](RunConfig& c) { c.init = PathInit::RandomWalk; },
        [](RunConfig& c) { c.neg_cap_per_user_day = 1; },
    };
    for (std::size_t i = 0; i < variants.size(); ++i) {
        auto c = tiny_config();
        c.days = 3;
        c.epochs_per_day = 1;
        variants[i](c);
        StreamTrainer t(tiny_world(), c);
        auto reports = t.run();
        ASSERT_EQ(reports.size(), 2u) << "variant " << i;
        for (const auto& r : reports) EXPECT_TRUE(std::isfinite(r.epoch_loss.at(0))) << "variant " << i;
    }
}

TEST(Ablation, NegativeCapShrinksSamples) {
    auto c = tiny_config();
    StreamTrainer full(tiny_world(), c);
    c.neg_cap_per_user_day = 1;
    StreamTrainer capped(tiny_world(), c);
    auto a = full.day_samples(0), b = capped.day_samples(0);
    EXPECT_LT(b.size(), a.size());
    std::size_t pa = 0, pb = 0;
    for (const auto& s : a) pa += static_cast<std::size_t>(s.label);
    for (const auto& s : b) pb += static_cast<std::size_t>(s.label);
    EXPECT_EQ(pa, pb);
}

TEST(Outputs, EveryArtifactCarriesTheConfig) {
    auto dir = test::scratch_dir("trainer_outputs");
    auto c = tiny_config();
    c.seed = 77;
    StreamTrainer t(tiny_world(), c);
    auto reports = t.run();
    write_run_outputs(dir, c, tiny_world(), t, reports);
    for (const char* f : {"config.txt", "summary.csv", "daily.csv", "reports.jsonl", "impressions.tsv", "explorer.jsonl",
                          "params.txt"}) {
        std::ifstream in(dir / f);
        std::stringstream ss;
        ss << in.rdbuf();
        EXPECT_NE(ss.str().find("seed"), std::string::npos) << f;
        EXPECT_NE(ss.str().find("77"), std::string::npos) << f;
    }

    auto summary = load_summary_csv((dir / "summary.csv").string());
    EXPECT_EQ(summary.get("days"), "3");
    EXPECT_EQ(summary.get("f1"), fmt_metric(summarize(reports).f1));

    SeanParams back = t.params().zeros_like();
    std::ifstream pin(dir / "params.txt");
    read_params(pin, back);
    EXPECT_EQ(params_text(back), params_text(t.params()));

    std::ifstream ein(dir / "explorer.jsonl");
    auto st = ExplorationState::read(ein, tiny_world().users, c.lambda);
    EXPECT_EQ(st, t.explorer());
}
