#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "sean/corpus.hpp"
#include "sean/error.hpp"
#include "sean/explorer.hpp"
#include "sean/world.hpp"

namespace sean {

enum class Strategy { RsF1, Spr, Dpr, Payout, RandomSelect, RandomWalk };

inline std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::RsF1: return "rs-f1";
    case Strategy::Spr: return "spr";
    case Strategy::Dpr: return "dpr";
    case Strategy::Payout: return "payout";
    case Strategy::RandomSelect: return "random-select";
    case Strategy::RandomWalk: return "random-walk";
    }
    return "?";
}

inline Strategy parse_strategy(std::string_view s) {
    for (auto st : {Strategy::RsF1, Strategy::Spr, Strategy::Dpr, Strategy::Payout, Strategy::RandomSelect,
                    Strategy::RandomWalk})
        if (to_string(st) == s) return st;
    throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

/// True for the UCB1 beam-search strategies.
inline bool uses_search(Strategy s) { return s != Strategy::RandomSelect && s != Strategy::RandomWalk; }

inline std::string_view to_string(PathInit p) { return p == PathInit::RandomSelect ? "random-select" : "random-walk"; }

inline PathInit parse_path_init(std::string_view s) {
    if (s == "random-select") return PathInit::RandomSelect;
    if (s == "random-walk") return PathInit::RandomWalk;
    throw ConfigError("unknown path init '" + std::string(s) + "'");
}

/// Resolved settings of one stream run. Defaults follow the reference setup
/// (B=3, L=10, lambda=1, h=64, six kernels of 50 filters, 3 epochs a day).
struct RunConfig {
    DataPaths data;
    CorpusLimits limits;

    int days = 0;  // 0: every day of the dataset
    int epochs_per_day = 3;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    double split_ratio = 0.9;
    double threshold = 0.5;
    bool warm_start = true;

    int beam_width = 3;
    int depth = 10;
    double lambda = 1.0;
    Strategy strategy = Strategy::RsF1;
    PathInit init = PathInit::RandomSelect;
    double pagerank_damping = 0.9;
    int payout_window_days = 0;

    std::size_t hidden = 64;
    std::size_t filters = 50;
    std::vector<std::size_t> windows{1, 2, 3, 4, 5, 6};
    double dropout = 0.2;
    double user_init_std = 1.0;
    std::size_t neg_cap_per_user_day = 0;

    bool no_social = false;
    bool no_social_attention = false;
    bool one_hop = false;
    bool no_cnn = false;
    bool no_gru = false;

    std::uint64_t seed = 1;

    void validate() const {
        if (epochs_per_day < 1) throw ConfigError("epochs_per_day must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (beam_width < 1 || depth < 1) throw ConfigError("B and L must be >= 1");
        if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
        if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
        if (hidden == 0 || filters == 0 || windows.empty()) throw ConfigError("model sizes must be positive");
        if (no_social && (one_hop || no_social_attention))
            throw ConfigError("no_social conflicts with one_hop / no_social_attention");
        if (days == 1) throw ConfigError("a stream needs at least 2 days");
    }

    ModelOptions model_options() const {
        ModelOptions o;
        o.social = !no_social;
        o.social_attention = !no_social_attention;
        o.cnn = !no_cnn;
        o.gru = !no_gru;
        o.dropout = dropout;
        return o;
    }
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("bad value for '" + std::string(key) + "': '" + std::string(v) + "'");
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for '" + std::string(key) + "': '" + std::string(v) + "'");
}

inline std::string fmt_double(double d) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, end);
}

struct ConfigField {
    std::string key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define SEAN_NUM_FIELD(name, member, T)                                                                           \
    ConfigField{name, [](RunConfig& c, std::string_view v) { c.member = parse_number<T>(name, v); },             \
                [](const RunConfig& c) {                                                                          \
                    if constexpr (std::is_floating_point_v<T>) return fmt_double(static_cast<double>(c.member)); \
                    else return std::to_string(c.member);                                                        \
                }}
#define SEAN_BOOL_FIELD(name, member)                                                              \
    ConfigField{name, [](RunConfig& c, std::string_view v) { c.member = parse_bool(name, v); }, \
                [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define SEAN_STR_FIELD(name, member)                                                                 \
    ConfigField{name, [](RunConfig& c, std::string_view v) { c.member = std::string(v); },           \
                [](const RunConfig& c) { return c.member; }}

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields{
        SEAN_NUM_FIELD("days", days, int),
        SEAN_NUM_FIELD("epochs_per_day", epochs_per_day, int),
        SEAN_NUM_FIELD("batch_size", batch_size, std::size_t),
        SEAN_NUM_FIELD("lr", lr, double),
        SEAN_NUM_FIELD("split_ratio", split_ratio, double),
        SEAN_NUM_FIELD("threshold", threshold, double),
        SEAN_BOOL_FIELD("warm_start", warm_start),
        SEAN_NUM_FIELD("B", beam_width, int),
        SEAN_NUM_FIELD("L", depth, int),
        SEAN_NUM_FIELD("lambda", lambda, double),
        ConfigField{"strategy", [](RunConfig& c, std::string_view v) { c.strategy = parse_strategy(v); },
                    [](const RunConfig& c) { return std::string(to_string(c.strategy)); }},
        ConfigField{"init", [](RunConfig& c, std::string_view v) { c.init = parse_path_init(v); },
                    [](const RunConfig& c) { return std::string(to_string(c.init)); }},
        SEAN_NUM_FIELD("pagerank_damping", pagerank_damping, double),
        SEAN_NUM_FIELD("payout_window_days", payout_window_days, int),
        SEAN_NUM_FIELD("hidden", hidden, std::size_t),
        SEAN_NUM_FIELD("filters", filters, std::size_t),
        ConfigField{"windows",
                    [](RunConfig& c, std::string_view v) {
                        c.windows.clear();
                        std::size_t start = 0;
                        while (start <= v.size()) {
                            auto comma = v.find(',', start);
                            auto part = v.substr(start, comma == std::string_view::npos ? v.npos : comma - start);
                            c.windows.push_back(parse_number<std::size_t>("windows", part));
                            if (comma == std::string_view::npos) break;
                            start = comma + 1;
                        }
                    },
                    [](const RunConfig& c) {
                        std::string s;
                        for (std::size_t i = 0; i < c.windows.size(); ++i) s += (i ? "," : "") + std::to_string(c.windows[i]);
                        return s;
                    }},
        ConfigField{"kernels",
                    [](RunConfig& c, std::string_view v) {
                        auto k = parse_number<std::size_t>("kernels", v);
                        c.windows.clear();
                        for (std::size_t g = 1; g <= k; ++g) c.windows.push_back(g);
                    },
                    nullptr},
        SEAN_NUM_FIELD("dropout", dropout, double),
        SEAN_NUM_FIELD("user_init_std", user_init_std, double),
        SEAN_NUM_FIELD("neg_cap_per_user_day", neg_cap_per_user_day, std::size_t),
        SEAN_NUM_FIELD("max_sentences", limits.max_sentences, std::size_t),
        SEAN_NUM_FIELD("max_tokens", limits.max_tokens, std::size_t),
        SEAN_BOOL_FIELD("no_social", no_social),
        SEAN_BOOL_FIELD("no_social_attention", no_social_attention),
        SEAN_BOOL_FIELD("one_hop", one_hop),
        SEAN_BOOL_FIELD("no_cnn", no_cnn),
        SEAN_BOOL_FIELD("no_gru", no_gru),
        SEAN_NUM_FIELD("seed", seed, std::uint64_t),
        SEAN_STR_FIELD("documents", data.documents),
        SEAN_STR_FIELD("interactions", data.interactions),
        SEAN_STR_FIELD("graph", data.graph),
        SEAN_STR_FIELD("payouts", data.payouts),
        SEAN_STR_FIELD("embeddings", data.embeddings),
        ConfigField{"data_dir", [](RunConfig& c, std::string_view v) { c.data = DataPaths::in_dir(std::string(v)); },
                    nullptr},
    };
    return fields;
}

#undef SEAN_NUM_FIELD
#undef SEAN_BOOL_FIELD
#undef SEAN_STR_FIELD

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Every key accepted by set_config_value, in serialisation order.
inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : detail::config_fields()) keys.push_back(f.key);
    return keys;
}

inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& f : detail::config_fields()) {
        if (f.key == key) {
            f.set(cfg, detail::trim(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// `key = value` lines; '#' starts a comment.
inline void read_config(std::istream& in, RunConfig& cfg) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = line;
        if (auto hash = sv.find('#'); hash != sv.npos) sv = sv.substr(0, hash);
        sv = detail::trim(sv);
        if (sv.empty()) continue;
        auto eq = sv.find('=');
        if (eq == sv.npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        set_config_value(cfg, detail::trim(sv.substr(0, eq)), detail::trim(sv.substr(eq + 1)));
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    read_config(in, cfg);
    return cfg;
}

/// Resolved key/value pairs in a stable order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : detail::config_fields())
        if (f.get) out.emplace_back(f.key, f.get(cfg));
    return out;
}

inline void write_config(std::ostream& out, const RunConfig& cfg, std::string_view prefix = "") {
    for (const auto& [k, v] : config_entries(cfg)) out << prefix << k << " = " << v << '\n';
}

} // namespace sean
