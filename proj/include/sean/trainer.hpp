#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "sean/config.hpp"
#include "sean/corpus.hpp"
#include "sean/explorer.hpp"
#include "sean/metrics.hpp"
#include "sean/optimizer.hpp"
#include "sean/rewards.hpp"
#include "sean/seanet.hpp"
#include "sean/world.hpp"

namespace sean {

/// Mean clamped BCE over a batch.
inline double bce_loss(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size()) throw std::invalid_argument("probabilities and labels differ in length");
    if (p.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += bce_loss(p[i], y[i]);
    return s / static_cast<double>(p.size());
}

struct DailyReport {
    int train_day = 0;
    int test_day = 0;
    std::size_t samples = 0;
    std::size_t positives = 0;
    std::optional<double> auc, f1, gini, cc;
    ImpressionLedger impressions;
    std::vector<double> epoch_loss;  // mean training loss per epoch of train_day
    bool flagged = false;            // some metric undefined on this day

    nlohmann::json to_json() const {
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
        std::uint64_t total = 0;
        for (auto [c, n] : impressions.counts()) total += n;
        return {{"train_day", train_day},
                {"test_day", test_day},
                {"samples", samples},
                {"positives", positives},
                {"auc", opt(auc)},
                {"f1", opt(f1)},
                {"gini", opt(gini)},
                {"cc", opt(cc)},
                {"impressions", total},
                {"active_creators", impressions.size()},
                {"epoch_loss", epoch_loss},
                {"flagged", flagged}};
    }
};

/// Stream-level averages; days with a null metric are left out of that metric's mean.
struct StreamSummary {
    std::size_t days = 0;
    std::optional<double> auc, f1, gini_daily, cc_daily;
    std::optional<double> gini_cumulative, cc_cumulative;
    ImpressionLedger impressions;
};

inline StreamSummary summarize(const std::vector<DailyReport>& reports) {
    StreamSummary s;
    s.days = reports.size();
    auto mean = [&](auto get) -> std::optional<double> {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : reports)
            if (auto v = get(r)) {
                sum += *v;
                ++n;
            }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    };
    s.auc = mean([](const DailyReport& r) { return r.auc; });
    s.f1 = mean([](const DailyReport& r) { return r.f1; });
    s.gini_daily = mean([](const DailyReport& r) { return r.gini; });
    s.cc_daily = mean([](const DailyReport& r) { return r.cc; });
    for (const auto& r : reports) s.impressions.merge(r.impressions);
    s.gini_cumulative = s.impressions.gini();
    if (s.f1 && s.gini_cumulative) s.cc_cumulative = cc(*s.f1, *s.gini_cumulative);
    return s;
}

/// Day-by-day training and evaluation over one World.
///
/// train_day(t) picks friends for every user with samples on day t, records
/// the selections, trains on the day's training split and feeds per-user
/// validation F1 back to the explorer. evaluate_day(t) scores day t without
/// touching parameters or explorer state.
class StreamTrainer {
public:
    StreamTrainer(const World& world, RunConfig cfg)
        : world_(world), cfg_(std::move(cfg)), net_(make_dims(world, cfg_), cfg_.model_options()) {
        cfg_.validate();
        if (world_.n_users() == 0) throw DataError("world has no users");
        reset_model();
        explorer_ = ExplorationState(world_.n_users(), cfg_.lambda);
        spr_ = static_pagerank(world_.graph, {cfg_.pagerank_damping, 1e-8, 200});
        for (std::uint32_t i = 0; i < world_.n_users(); ++i) {
            UserId u(i);
            FriendSelection sel{u, init_paths(u, cfg_.beam_width, cfg_.depth, cfg_.init, world_.graph, cfg_.seed)};
            record_selection(sel, explorer_);
            explorer_.set_paths(u, std::move(sel.paths));
        }
    }

    static ModelDims make_dims(const World& w, const RunConfig& c) {
        ModelDims d;
        d.n_users = w.n_users();
        d.embed = w.vocab.width();
        d.hidden = c.hidden;
        d.filters = c.filters;
        d.windows = c.windows;
        return d;
    }

    const RunConfig& config() const { return cfg_; }
    const SeanParams& params() const { return params_; }
    SeanParams& params() { return params_; }
    const ExplorationState& explorer() const { return explorer_; }
    ExplorationState& explorer() { return explorer_; }
    const Adam& optimizer() const { return adam_; }

    /// Number of days the stream covers.
    int stream_days() const { return cfg_.days > 0 ? std::min(cfg_.days, world_.n_days) : world_.n_days; }

    std::vector<Sample> day_samples(int day) const {
        if (day < 0 || day >= world_.n_days) throw RangeError("day " + std::to_string(day) + " outside dataset");
        return build_day_samples(day, world_.interactions, world_.graph,
                                 {cfg_.neg_cap_per_user_day, cfg_.seed ^ 0x9e3779b97f4a7c15ULL});
    }

    /// Exploitation values used by the search on a given day.
    RewardTable rewards(int day) const {
        switch (cfg_.strategy) {
        case Strategy::Spr: return spr_;
        case Strategy::Dpr: return dynamic_pagerank(day, world_.activity, {cfg_.pagerank_damping, 1e-8, 200});
        case Strategy::Payout: return world_.payouts.table(day, world_.n_users(), cfg_.payout_window_days);
        default: return explorer_.rs_f1_table();
        }
    }

    /// Friend paths for u on `day`; never mutates the explorer.
    FriendSelection select(UserId u, int day, const RewardTable& table) const {
        if (cfg_.no_social) return {u, {Path{u}}};
        if (cfg_.one_hop) return one_hop_selection(u, cfg_.depth, world_.graph);
        if (!uses_search(cfg_.strategy)) {
            auto mode = cfg_.strategy == Strategy::RandomSelect ? PathInit::RandomSelect : PathInit::RandomWalk;
            std::uint64_t day_seed = cfg_.seed * 1000003ULL + static_cast<std::uint64_t>(day) + 1;
            return {u, init_paths(u, cfg_.beam_width, cfg_.depth, mode, world_.graph, day_seed)};
        }
        return select_friends(u, cfg_.beam_width, cfg_.depth, world_.graph, explorer_, table);
    }

    static std::vector<std::vector<UserId>> friend_lists(const FriendSelection& sel) {
        std::vector<std::vector<UserId>> out;
        for (const auto& p : sel.paths) out.emplace_back(p.begin() + (p.empty() ? 0 : 1), p.end());
        return out;
    }

    /// Trains on day t. Returns the mean training loss of every epoch.
    std::vector<double> train_day(int t) {
        auto samples = day_samples(t);
        if (!cfg_.warm_start) reset_model();
        if (samples.empty()) return {};
        auto [train, val] = split_train_val(samples, cfg_.split_ratio, mix(cfg_.seed, t, 0x51));

        // friend selection and visit bookkeeping, serialized in user order
        std::vector<UserId> users;
        for (const auto& s : samples) users.push_back(s.user);
        users.erase(std::unique(users.begin(), users.end()), users.end());
        const RewardTable table = rewards(t);
        std::map<UserId, std::vector<std::vector<UserId>>> friends;
        for (UserId u : users) {
            auto sel = select(u, t, table);
            record_selection(sel, explorer_);
            friends[u] = friend_lists(sel);
            explorer_.set_paths(u, std::move(sel.paths));
        }

        std::vector<double> epoch_loss;
        std::mt19937_64 rng(mix(cfg_.seed, t, 0x7a));
        SeanParams grads = params_.zeros_like();
        std::vector<std::size_t> order(train.size());
        for (int epoch = 0; epoch < cfg_.epochs_per_day; ++epoch) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            double loss_sum = 0.0;
            for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
                grads.zero();
                for (std::size_t k = start; k < end; ++k) {
                    const Sample& s = train[order[k]];
                    double p = net_.forward(params_, world_.vocab, world_.encoded[s.doc], s.user, friends[s.user], &rng);
                    loss_sum += bce_loss(p, s.label);
                    net_.backward(params_, world_.vocab, s.label, grads);
                }
                const double scale = 1.0 / static_cast<double>(end - start);
                grads.visit([&](const std::string&, Tensor& g) {
                    for (double& x : g.data) x *= scale;
                });
                adam_.step(params_, grads);
            }
            epoch_loss.push_back(train.empty() ? 0.0 : loss_sum / static_cast<double>(train.size()));
        }

        if (cfg_.strategy == Strategy::RsF1) {
            std::map<UserId, std::pair<std::vector<double>, std::vector<int>>> per_user;
            for (const auto& s : val) {
                auto& [p, y] = per_user[s.user];
                p.push_back(net_.forward(params_, world_.vocab, world_.encoded[s.doc], s.user, friends[s.user]));
                y.push_back(s.label);
            }
            for (const auto& [u, py] : per_user)
                if (auto f = f1(py.first, py.second, cfg_.threshold)) update_exploitation(u, *f, explorer_);
        }
        return epoch_loss;
    }

    /// Predictions for day t's samples with read-only friend selection.
    std::vector<double> predict_day(int t, const std::vector<Sample>& samples) {
        const RewardTable table = rewards(std::max(t - 1, 0));
        std::vector<double> preds;
        preds.reserve(samples.size());
        UserId current(~0u);
        std::vector<std::vector<UserId>> lists;
        for (const auto& s : samples) {
            if (s.user != current) {
                current = s.user;
                FriendSelection sel = (uses_search(cfg_.strategy) || cfg_.no_social || cfg_.one_hop)
                                          ? select(s.user, t, table)
                                          : FriendSelection{s.user, explorer_.paths(s.user)};
                lists = friend_lists(sel);
            }
            preds.push_back(net_.forward(params_, world_.vocab, world_.encoded[s.doc], s.user, lists));
        }
        return preds;
    }

    DailyReport evaluate_day(int t) {
        DailyReport r;
        r.test_day = t;
        r.train_day = t - 1;
        auto samples = day_samples(t);
        r.samples = samples.size();
        std::vector<int> labels;
        for (const auto& s : samples) labels.push_back(s.label);
        r.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
        auto preds = predict_day(t, samples);
        r.auc = auc(preds, labels);
        r.f1 = f1(preds, labels, cfg_.threshold);
        r.impressions = record_impressions(samples, preds, world_.docs, world_.n_users(), cfg_.threshold);
        r.gini = r.impressions.gini();
        if (r.f1 && r.gini) r.cc = cc(*r.f1, *r.gini);
        r.flagged = !(r.auc && r.f1 && r.gini);
        return r;
    }

    /// Train on day t, test on day t + 1, for every t of the stream.
    std::vector<DailyReport> run(const std::function<void(const DailyReport&)>& on_day = {}) {
        std::vector<DailyReport> reports;
        const int T = stream_days();
        for (int t = 0; t + 1 < T; ++t) {
            auto losses = train_day(t);
            auto r = evaluate_day(t + 1);
            r.epoch_loss = std::move(losses);
            if (on_day) on_day(r);
            reports.push_back(std::move(r));
        }
        return reports;
    }

private:
    static std::uint64_t mix(std::uint64_t seed, int day, std::uint64_t salt) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(day), salt};
        std::uint64_t out[1];
        seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out) + 2);
        return out[0];
    }

    void reset_model() {
        params_ = init_params(make_dims(world_, cfg_), cfg_.model_options(), cfg_.seed, cfg_.user_init_std);
        adam_ = Adam(params_, {cfg_.lr, 0.9, 0.999, 1e-8});
    }

    const World& world_;
    RunConfig cfg_;
    SeanNet net_;
    SeanParams params_;
    Adam adam_;
    ExplorationState explorer_;
    RewardTable spr_;
};

} // namespace sean
