#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sean/error.hpp"

namespace sean {

/// Knobs of the synthetic topic world.
///
/// Every user has a latent topic. Follow edges stay within the topic with
/// probability `homophily` and are uniform otherwise. A consumer reads a doc of
/// its own topic with read_prob_own_topic, a doc matching the topic of someone
/// it follows with read_prob_own_topic * friend_topic_damping, anything else
/// with read_prob_other_topic. Consumer activity is Pareto skewed so that many
/// users have thin histories of their own.
struct WorldConfig {
    std::size_t n_consumers = 300;
    std::size_t n_creators = 200;
    int n_days = 20;
    std::size_t topics = 8;
    double homophily = 0.8;
    std::size_t docs_per_day = 50;
    std::size_t vocab_per_topic = 60;
    double read_prob_own_topic = 0.3;
    double read_prob_other_topic = 0.01;
    std::uint64_t seed = 1;

    double friend_topic_damping = 0.8;
    std::size_t out_degree = 8;
    std::size_t creator_out_degree = 2;
    double active_prob = 0.3;              // mean daily chance a consumer shows up
    double activity_skew = 1.5;            // Pareto shape of per-consumer activity
    double creator_popularity_skew = 0.8;  // Zipf exponent of posting frequency
    double topic_skew = 0.0;               // Zipf exponent of topic sizes among consumers
    std::size_t shared_vocab = 80;
    double shared_token_prob = 0.35;
    double zipf_exponent = 1.1;
    std::size_t min_sentences = 3, max_sentences = 7;
    std::size_t min_tokens = 6, max_tokens = 12;
    std::size_t embed_dim = 32;
    double embed_noise = 0.6;  // spread around a topic centroid before normalization
    double payout_per_comment = 1.0;
    double payout_noise = 0.1;  // relative std of multiplicative payout noise

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (n_consumers < 2) throw ConfigError("need at least two consumers");
        if (n_creators < 1) throw ConfigError("need at least one creator");
        if (n_days < 2) throw ConfigError("need at least two days");
        if (topics < 1) throw ConfigError("need at least one topic");
        if (docs_per_day < 1) throw ConfigError("docs_per_day must be >= 1");
        if (vocab_per_topic < 1 || embed_dim < 1) throw ConfigError("vocabulary and embedding sizes must be >= 1");
        if (!prob(homophily)) throw ConfigError("homophily must lie in [0, 1]");
        if (!prob(read_prob_own_topic) || !prob(read_prob_other_topic))
            throw ConfigError("read probabilities must lie in [0, 1]");
        if (!prob(friend_topic_damping)) throw ConfigError("friend_topic_damping must lie in [0, 1]");
        if (!(active_prob > 0.0 && active_prob <= 1.0)) throw ConfigError("active_prob must lie in (0, 1]");
        if (topic_skew < 0.0) throw ConfigError("topic_skew must be >= 0");
        if (!(activity_skew > 1.0)) throw ConfigError("activity_skew must be > 1");
        if (!prob(shared_token_prob) || (shared_vocab == 0 && shared_token_prob > 0.0))
            throw ConfigError("shared_token_prob must lie in [0, 1] and needs a shared vocabulary");
        if (out_degree < 1 || out_degree >= n_consumers) throw ConfigError("out_degree must lie in [1, n_consumers)");
        if (min_sentences < 1 || min_sentences > max_sentences) throw ConfigError("bad sentence range");
        if (min_tokens < 1 || min_tokens > max_tokens) throw ConfigError("bad token range");
        if (payout_per_comment < 0.0 || payout_noise < 0.0) throw ConfigError("payout settings must be >= 0");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(WorldConfig, n_consumers, n_creators, n_days, topics, homophily,
                                                docs_per_day, vocab_per_topic, read_prob_own_topic,
                                                read_prob_other_topic, seed, friend_topic_damping, out_degree,
                                                creator_out_degree, active_prob, activity_skew,
                                                creator_popularity_skew, topic_skew, shared_vocab, shared_token_prob,
                                                zipf_exponent, min_sentences, max_sentences, min_tokens, max_tokens,
                                                embed_dim, embed_noise, payout_per_comment, payout_noise)

/// Overrides fields of `base` from a JSON object; unknown keys are rejected.
inline WorldConfig world_config_from_json(const nlohmann::json& j, const WorldConfig& base = {}) {
    if (!j.is_object()) throw ConfigError("world config must be a JSON object");
    nlohmann::json merged = base;
    for (const auto& [k, v] : j.items()) {
        if (!merged.contains(k)) throw ConfigError("unknown world config key '" + k + "'");
        merged[k] = v;
    }
    try {
        return merged.get<WorldConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad world config value: ") + e.what());
    }
}

/// Sets one field from its textual value, e.g. ("homophily", "0.8").
inline void set_world_value(WorldConfig& cfg, const std::string& key, const std::string& value) {
    nlohmann::json v;
    try {
        v = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + key + "': '" + value + "'");
    }
    cfg = world_config_from_json({{key, v}}, cfg);
}

struct WorldStats {
    std::size_t users = 0;
    std::size_t edges = 0;
    std::size_t within_topic_edges = 0;
    std::size_t documents = 0;
    std::size_t interactions = 0;
    std::size_t vocabulary = 0;
};

namespace detail {

inline std::string consumer_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%05zu", i);
    return buf;
}

inline std::string creator_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%05zu", i);
    return buf;
}

inline std::vector<double> zipf_weights(std::size_t n, double s) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
    return w;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

} // namespace detail

/// Writes documents.jsonl, interactions.jsonl, graph.tsv, payouts.tsv,
/// embeddings.txt and meta.json into `dir`. Same config, same bytes.
/// meta.json also records every user's latent topic.
inline WorldStats generate_world(const WorldConfig& cfg, const std::filesystem::path& dir) {
    cfg.validate();
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t K = cfg.topics;
    WorldStats stats;
    stats.users = cfg.n_consumers + cfg.n_creators;

    std::vector<std::size_t> consumer_topic(cfg.n_consumers), creator_topic(cfg.n_creators);
    {
        // topic sizes by largest remainder over Zipf weights; uniform when topic_skew is 0
        auto w = detail::zipf_weights(K, cfg.topic_skew);
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        std::vector<std::size_t> count(K);
        std::vector<std::pair<double, std::size_t>> rem;
        std::size_t used = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const double exact = w[k] / total * static_cast<double>(cfg.n_consumers);
            count[k] = static_cast<std::size_t>(exact);
            used += count[k];
            rem.emplace_back(-(exact - static_cast<double>(count[k])), k);
        }
        std::stable_sort(rem.begin(), rem.end());
        for (std::size_t j = 0; used < cfg.n_consumers; ++j, ++used) ++count[rem[j % K].second];
        std::size_t i = 0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t c = 0; c < count[k]; ++c) consumer_topic[i++] = k;
    }
    for (std::size_t i = 0; i < cfg.n_creators; ++i) creator_topic[i] = i % K;
    std::shuffle(consumer_topic.begin(), consumer_topic.end(), rng);
    std::shuffle(creator_topic.begin(), creator_topic.end(), rng);
    std::vector<std::vector<std::size_t>> consumers_by_topic(K), creators_by_topic(K);
    for (std::size_t i = 0; i < cfg.n_consumers; ++i) consumers_by_topic[consumer_topic[i]].push_back(i);
    for (std::size_t i = 0; i < cfg.n_creators; ++i) creators_by_topic[creator_topic[i]].push_back(i);

    // follow edges: same topic with probability homophily, uniform otherwise
    auto draw_follows = [&](std::size_t self, std::size_t degree, std::size_t population,
                            const std::vector<std::size_t>& same) {
        std::vector<std::size_t> f;
        const std::size_t cap = std::min(degree, population - 1);
        std::size_t guard = 0;
        while (f.size() < cap && guard++ < 200 * cap) {
            std::size_t v;
            if (unit(rng) < cfg.homophily) {
                if (same.size() < 2) break;
                v = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
            } else {
                v = std::uniform_int_distribution<std::size_t>(0, population - 1)(rng);
            }
            if (v != self && std::find(f.begin(), f.end(), v) == f.end()) f.push_back(v);
        }
        return f;
    };
    std::vector<std::vector<std::size_t>> follows(cfg.n_consumers), creator_follows(cfg.n_creators);
    for (std::size_t i = 0; i < cfg.n_consumers; ++i)
        follows[i] = draw_follows(i, cfg.out_degree, cfg.n_consumers, consumers_by_topic[consumer_topic[i]]);
    if (cfg.n_creators > 1)
        for (std::size_t c = 0; c < cfg.n_creators; ++c)
            creator_follows[c] = draw_follows(c, cfg.creator_out_degree, cfg.n_creators, creators_by_topic[creator_topic[c]]);

    // read probability of consumer i for a doc of topic k
    std::vector<std::vector<double>> read_prob(cfg.n_consumers, std::vector<double>(K, cfg.read_prob_other_topic));
    for (std::size_t i = 0; i < cfg.n_consumers; ++i) {
        const double via_friend = cfg.read_prob_own_topic * cfg.friend_topic_damping;
        for (std::size_t v : follows[i])
            read_prob[i][consumer_topic[v]] = std::max(read_prob[i][consumer_topic[v]], via_friend);
        read_prob[i][consumer_topic[i]] = std::max(read_prob[i][consumer_topic[i]], cfg.read_prob_own_topic);
    }

    std::vector<double> activity(cfg.n_consumers);
    for (double& a : activity) a = std::pow(1.0 - unit(rng), -1.0 / cfg.activity_skew);
    {
        // scale so that the mean after clipping at 1 is active_prob
        auto clipped_mean = [&](double s) {
            double m = 0.0;
            for (double a : activity) m += std::min(1.0, a * s);
            return m / static_cast<double>(activity.size());
        };
        double lo = 0.0, hi = 1.0;
        while (clipped_mean(hi) < cfg.active_prob && hi < 1e12) hi *= 2.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (clipped_mean(mid) < cfg.active_prob ? lo : hi) = mid;
        }
        for (double& a : activity) a = std::min(1.0, a * hi);
    }

    std::vector<double> post_weight(cfg.n_creators);
    {
        auto z = detail::zipf_weights(cfg.n_creators, cfg.creator_popularity_skew);
        std::vector<std::size_t> perm(cfg.n_creators);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < cfg.n_creators; ++i) post_weight[perm[i]] = z[i];
    }

    auto topic_token = [](std::size_t k, std::size_t j) { return "t" + std::to_string(k) + "_" + std::to_string(j); };
    auto shared_token = [](std::size_t j) { return "s" + std::to_string(j); };

    {
        auto out = detail::open_out(dir / "embeddings.txt");
        std::vector<std::vector<double>> centroid(K, std::vector<double>(cfg.embed_dim));
        for (auto& c : centroid) {
            for (double& x : c) x = gauss(rng);
            const double n = std::sqrt(std::inner_product(c.begin(), c.end(), c.begin(), 0.0));
            for (double& x : c) x /= n;
        }
        std::vector<double> v(cfg.embed_dim);
        auto emit = [&](const std::string& tok, const std::vector<double>* center) {
            double norm = 0.0;
            do {
                for (std::size_t d = 0; d < cfg.embed_dim; ++d) {
                    const double noise = gauss(rng) / std::sqrt(static_cast<double>(cfg.embed_dim));
                    v[d] = center ? (*center)[d] + cfg.embed_noise * noise : noise;
                }
                norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
            } while (norm == 0.0);
            out << tok;
            char buf[32];
            for (double x : v) {
                std::snprintf(buf, sizeof buf, " %.6f", x / norm);
                out << buf;
            }
            out << '\n';
            ++stats.vocabulary;
        };
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < cfg.vocab_per_topic; ++j) emit(topic_token(k, j), &centroid[k]);
        for (std::size_t j = 0; j < cfg.shared_vocab; ++j) emit(shared_token(j), nullptr);
    }

    {
        auto out = detail::open_out(dir / "graph.tsv");
        for (std::size_t i = 0; i < cfg.n_consumers; ++i)
            for (std::size_t v : follows[i]) {
                out << detail::consumer_name(i) << '\t' << detail::consumer_name(v) << '\n';
                ++stats.edges;
                if (consumer_topic[i] == consumer_topic[v]) ++stats.within_topic_edges;
            }
        for (std::size_t c = 0; c < cfg.n_creators; ++c)
            for (std::size_t v : creator_follows[c]) {
                out << detail::creator_name(c) << '\t' << detail::creator_name(v) << '\n';
                ++stats.edges;
                if (creator_topic[c] == creator_topic[v]) ++stats.within_topic_edges;
            }
    }

    auto make_zipf = [&](std::size_t n) {
        auto w = detail::zipf_weights(std::max<std::size_t>(n, 1), cfg.zipf_exponent);
        return std::discrete_distribution<std::size_t>(w.begin(), w.end());
    };
    auto topic_word = make_zipf(cfg.vocab_per_topic);
    auto shared_word = make_zipf(cfg.shared_vocab);
    std::discrete_distribution<std::size_t> pick_creator(post_weight.begin(), post_weight.end());
    std::uniform_int_distribution<std::size_t> n_sent(cfg.min_sentences, cfg.max_sentences);
    std::uniform_int_distribution<std::size_t> n_tok(cfg.min_tokens, cfg.max_tokens);

    auto docs_out = detail::open_out(dir / "documents.jsonl");
    auto logs_out = detail::open_out(dir / "interactions.jsonl");
    auto pay_out = detail::open_out(dir / "payouts.tsv");
    std::size_t doc_counter = 0;
    std::size_t total_tokens = 0;

    for (int day = 0; day < cfg.n_days; ++day) {
        std::vector<std::pair<std::string, std::size_t>> posted;  // doc id, creator
        for (std::size_t n = 0; n < cfg.docs_per_day; ++n) {
            const std::size_t c = pick_creator(rng);
            std::string id = "d" + std::to_string(doc_counter++);
            nlohmann::json sentences = nlohmann::json::array();
            const std::size_t S = n_sent(rng);
            for (std::size_t s = 0; s < S; ++s) {
                nlohmann::json toks = nlohmann::json::array();
                const std::size_t T = n_tok(rng);
                for (std::size_t t = 0; t < T; ++t) {
                    if (unit(rng) < cfg.shared_token_prob)
                        toks.push_back(shared_token(shared_word(rng)));
                    else
                        toks.push_back(topic_token(creator_topic[c], topic_word(rng)));
                }
                total_tokens += T;
                sentences.push_back(std::move(toks));
            }
            nlohmann::json doc = {{"doc_id", id}, {"creator", detail::creator_name(c)}, {"day", day}, {"sentences", sentences}};
            docs_out << doc.dump() << '\n';
            posted.emplace_back(std::move(id), c);
        }
        stats.documents += posted.size();

        std::vector<std::uint64_t> received(cfg.n_creators, 0);
        for (std::size_t i = 0; i < cfg.n_consumers; ++i) {
            if (unit(rng) >= activity[i]) continue;
            for (const auto& [id, c] : posted) {
                if (unit(rng) >= read_prob[i][creator_topic[c]]) continue;
                nlohmann::json log = {{"day", day}, {"user", detail::consumer_name(i)}, {"doc_id", id}};
                logs_out << log.dump() << '\n';
                ++received[c];
                ++stats.interactions;
            }
        }
        for (std::size_t c = 0; c < cfg.n_creators; ++c) {
            if (received[c] == 0) continue;
            const double noise = std::max(0.0, 1.0 + cfg.payout_noise * gauss(rng));
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(received[c]) * cfg.payout_per_comment * noise);
            pay_out << detail::creator_name(c) << '\t' << day << '\t' << buf << '\n';
        }
    }

    nlohmann::json topics = nlohmann::json::object();
    for (std::size_t i = 0; i < cfg.n_consumers; ++i) topics[detail::consumer_name(i)] = consumer_topic[i];
    for (std::size_t c = 0; c < cfg.n_creators; ++c) topics[detail::creator_name(c)] = creator_topic[c];
    nlohmann::json m = {{"config", nlohmann::json(cfg)},
                        {"users", stats.users},
                        {"edges", stats.edges},
                        {"within_topic_edges", stats.within_topic_edges},
                        {"documents", stats.documents},
                        {"mean_doc_tokens", static_cast<double>(total_tokens) / static_cast<double>(stats.documents)},
                        {"interactions", stats.interactions},
                        {"vocabulary", stats.vocabulary},
                        {"user_topics", topics}};
    auto meta = detail::open_out(dir / "meta.json");
    meta << m.dump(2) << '\n';
    return stats;
}

} // namespace sean
