#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sean/error.hpp"
#include "sean/social_graph.hpp"
#include "sean/types.hpp"

namespace sean {

using DocIndex = std::uint32_t;
using Sentence = std::vector<std::string>;

struct CorpusLimits {
    std::size_t max_sentences = 30;
    std::size_t max_tokens = 100;
};

struct Document {
    std::string doc_id;
    UserId creator;
    int day = 0;
    std::vector<Sentence> sentences;
};

/// Keeps the first max_sentences sentences and the first max_tokens tokens of each.
inline void truncate(Document& doc, const CorpusLimits& limits) {
    if (doc.sentences.size() > limits.max_sentences) doc.sentences.resize(limits.max_sentences);
    for (auto& s : doc.sentences) {
        if (s.size() > limits.max_tokens) s.resize(limits.max_tokens);
    }
}

class DocumentStore {
public:
    DocIndex add(Document doc) {
        if (doc.sentences.empty()) throw DataError("document '" + doc.doc_id + "' has no sentences");
        if (doc.day < 0) throw DataError("document '" + doc.doc_id + "' has negative day");
        auto [it, inserted] = index_.emplace(doc.doc_id, static_cast<DocIndex>(docs_.size()));
        if (!inserted) throw DataError("duplicate doc_id '" + doc.doc_id + "'");
        max_day_ = std::max(max_day_, doc.day);
        docs_.push_back(std::move(doc));
        return it->second;
    }

    std::optional<DocIndex> find(const std::string& doc_id) const {
        auto it = index_.find(doc_id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    DocIndex index_of(const std::string& doc_id) const {
        auto idx = find(doc_id);
        if (!idx) throw LookupError("unknown doc_id '" + doc_id + "'");
        return *idx;
    }

    const Document& operator[](DocIndex i) const { return docs_[i]; }
    const Document& at(DocIndex i) const { return docs_.at(i); }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    int max_day() const { return max_day_; }

    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, DocIndex> index_;
    int max_day_ = -1;
};

namespace detail {

inline std::string id_string(const nlohmann::json& v, const char* field) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(std::string("field '") + field + "' must be a string or integer");
}

inline int day_value(const nlohmann::json& v) {
    if (!v.is_number_integer()) throw ParseError("field 'day' must be an integer");
    auto d = v.get<long long>();
    if (d < 0 || d > 1'000'000) throw ParseError("field 'day' out of range");
    return static_cast<int>(d);
}

inline std::string line_context(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

} // namespace detail

/// Parses one document record. Empty sentences are dropped; a record whose
/// sentence list ends up empty is rejected.
inline Document parse_document(const std::string& line, UserRegistry& users, const CorpusLimits& limits) {
    auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw ParseError("record is not an object");
    for (const char* key : {"doc_id", "creator", "day", "sentences"}) {
        if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    }
    Document doc;
    doc.doc_id = detail::id_string(j["doc_id"], "doc_id");
    doc.creator = users.intern(detail::id_string(j["creator"], "creator"));
    doc.day = detail::day_value(j["day"]);
    const auto& sents = j["sentences"];
    if (!sents.is_array()) throw ParseError("field 'sentences' must be an array");
    for (const auto& s : sents) {
        if (!s.is_array()) throw ParseError("each sentence must be an array of tokens");
        Sentence sentence;
        sentence.reserve(s.size());
        for (const auto& tok : s) {
            if (!tok.is_string()) throw ParseError("tokens must be strings");
            auto t = tok.get<std::string>();
            if (t.empty()) throw ParseError("empty token");
            sentence.push_back(std::move(t));
        }
        if (!sentence.empty()) doc.sentences.push_back(std::move(sentence));
    }
    if (doc.sentences.empty()) throw ParseError("document '" + doc.doc_id + "' has no sentences");
    truncate(doc, limits);
    return doc;
}

inline DocumentStore read_documents(std::istream& in, UserRegistry& users, const CorpusLimits& limits = {}) {
    DocumentStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        Document doc;
        try {
            doc = parse_document(line, users, limits);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(detail::line_context(line_no) + e.what());
        } catch (const ParseError& e) {
            throw ParseError(detail::line_context(line_no) + e.what());
        }
        try {
            store.add(std::move(doc));
        } catch (const DataError& e) {
            throw DataError(detail::line_context(line_no) + e.what());
        }
    }
    return store;
}

inline DocumentStore load_documents(const std::string& path, UserRegistry& users, const CorpusLimits& limits = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open documents file: " + path);
    return read_documents(in, users, limits);
}

// --- interactions ----------------------------------------------------------

struct InteractionLog {
    int day = 0;
    UserId user;
    DocIndex doc = 0;
};

/// Users must already be registered (the graph file is the user universe).
inline std::vector<InteractionLog> read_interactions(std::istream& in, const UserRegistry& users,
                                                     const DocumentStore& docs) {
    std::vector<InteractionLog> logs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        try {
            auto j = nlohmann::json::parse(line);
            for (const char* key : {"day", "user", "doc_id"}) {
                if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
            }
            InteractionLog log;
            log.day = detail::day_value(j["day"]);
            auto user = detail::id_string(j["user"], "user");
            if (!users.contains(user)) throw DataError("unknown user '" + user + "'");
            log.user = users.at(user);
            auto doc_id = detail::id_string(j["doc_id"], "doc_id");
            auto idx = docs.find(doc_id);
            if (!idx) throw DataError("unknown doc_id '" + doc_id + "'");
            log.doc = *idx;
            logs.push_back(log);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(detail::line_context(line_no) + e.what());
        } catch (const ParseError& e) {
            throw ParseError(detail::line_context(line_no) + e.what());
        } catch (const DataError& e) {
            throw DataError(detail::line_context(line_no) + e.what());
        }
    }
    return logs;
}

inline std::vector<InteractionLog> load_interactions(const std::string& path, const UserRegistry& users,
                                                     const DocumentStore& docs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open interactions file: " + path);
    return read_interactions(in, users, docs);
}

/// Comment pairs grouped by day, deduplicated.
class InteractionIndex {
public:
    InteractionIndex() = default;

    InteractionIndex(const std::vector<InteractionLog>& logs, int n_days) : by_day_(static_cast<std::size_t>(n_days)) {
        for (const auto& log : logs) {
            if (log.day < 0 || log.day >= n_days) throw RangeError("interaction day outside dataset");
            by_day_[static_cast<std::size_t>(log.day)].emplace_back(log.user, log.doc);
        }
        for (auto& day : by_day_) {
            std::sort(day.begin(), day.end());
            day.erase(std::unique(day.begin(), day.end()), day.end());
        }
    }

    int n_days() const { return static_cast<int>(by_day_.size()); }

    /// Sorted (user, doc) pairs of a day.
    const std::vector<std::pair<UserId, DocIndex>>& pairs(int day) const {
        if (day < 0 || day >= n_days()) throw RangeError("day " + std::to_string(day) + " outside dataset");
        return by_day_[static_cast<std::size_t>(day)];
    }

    bool responded(int day, UserId u, DocIndex d) const {
        const auto& p = pairs(day);
        return std::binary_search(p.begin(), p.end(), std::make_pair(u, d));
    }

private:
    std::vector<std::vector<std::pair<UserId, DocIndex>>> by_day_;
};

// --- vocabulary --------------------------------------------------------------

/// Token ids into a frozen embedding matrix. Row 0 is the all-zero OOV row.
class Vocabulary {
public:
    explicit Vocabulary(std::size_t width = 0) : width_(width), rows_(width, 0.0) {}

    std::size_t width() const { return width_; }
    /// Number of rows including the OOV row.
    std::size_t size() const { return count_; }

    std::int32_t index(const std::string& token) const {
        auto it = ids_.find(token);
        return it == ids_.end() ? 0 : it->second;
    }

    const double* row(std::int32_t id) const { return rows_.data() + static_cast<std::size_t>(id) * width_; }

    std::int32_t add(const std::string& token, const std::vector<double>& vec) {
        if (vec.size() != width_) throw ParseError("embedding width mismatch for token '" + token + "'");
        auto [it, inserted] = ids_.emplace(token, static_cast<std::int32_t>(size()));
        if (inserted) {
            rows_.insert(rows_.end(), vec.begin(), vec.end());
            ++count_;
        }
        return it->second;
    }

    std::vector<std::vector<std::int32_t>> encode(const Document& doc) const {
        std::vector<std::vector<std::int32_t>> out;
        out.reserve(doc.sentences.size());
        for (const auto& s : doc.sentences) {
            std::vector<std::int32_t> ids;
            ids.reserve(s.size());
            for (const auto& tok : s) ids.push_back(index(tok));
            out.push_back(std::move(ids));
        }
        return out;
    }

private:
    std::size_t width_;
    std::size_t count_ = 1;
    std::vector<double> rows_;
    std::unordered_map<std::string, std::int32_t> ids_;
};

/// Reads `token v1 ... vD` lines, keeping only tokens present in `docs`.
/// Indices follow the order of the embeddings file.
inline Vocabulary read_vocab(const DocumentStore& docs, std::istream& in) {
    std::unordered_set<std::string> wanted;
    for (const auto& d : docs)
        for (const auto& s : d.sentences) wanted.insert(s.begin(), s.end());

    std::optional<Vocabulary> vocab;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> vec;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        vec.clear();
        std::string field;
        while (ls >> field) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
                throw ParseError("embeddings line " + std::to_string(line_no) + ": bad number '" + field + "'");
            vec.push_back(v);
        }
        if (vec.empty()) throw ParseError("embeddings line " + std::to_string(line_no) + ": no vector");
        if (!vocab) vocab.emplace(vec.size());
        if (vec.size() != vocab->width())
            throw ParseError("embeddings line " + std::to_string(line_no) + ": width " + std::to_string(vec.size()) +
                             " != " + std::to_string(vocab->width()));
        if (wanted.count(token)) vocab->add(token, vec);
    }
    if (!vocab) throw ParseError("embeddings file has no vectors");
    return std::move(*vocab);
}

inline Vocabulary build_vocab(const DocumentStore& docs, const std::string& embeddings_path) {
    std::ifstream in(embeddings_path);
    if (!in) throw IoError("cannot open embeddings file: " + embeddings_path);
    return read_vocab(docs, in);
}

// --- samples -----------------------------------------------------------------

struct Sample {
    UserId user;
    DocIndex doc = 0;
    int label = 0;
    int day = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleOptions {
    /// 0 means unlimited.
    std::size_t neg_cap_per_user_day = 0;
    std::uint64_t seed = 0;
};

/// Positives are the day's comment pairs. Negatives are (u, d) with no
/// response from u while some out-neighbor of u responded to d that day.
/// Output is sorted by (user, doc).
inline std::vector<Sample> build_day_samples(int day, const InteractionIndex& logs, const SocialGraph& graph,
                                             const SampleOptions& opt = {}) {
    const auto& pairs = logs.pairs(day);
    std::vector<std::vector<DocIndex>> responded(graph.size());
    for (auto [u, d] : pairs) {
        if (!graph.contains(u)) throw LookupError("interaction user missing from graph");
        responded[u.index()].push_back(d);
    }

    std::vector<Sample> out;
    std::vector<DocIndex> negs;
    for (std::size_t ui = 0; ui < graph.size(); ++ui) {
        UserId u(static_cast<std::uint32_t>(ui));
        const auto& own = responded[ui];
        negs.clear();
        for (UserId v : graph.neighbors(u)) {
            for (DocIndex d : responded[v.index()]) {
                if (!std::binary_search(own.begin(), own.end(), d)) negs.push_back(d);
            }
        }
        std::sort(negs.begin(), negs.end());
        negs.erase(std::unique(negs.begin(), negs.end()), negs.end());
        if (opt.neg_cap_per_user_day > 0 && negs.size() > opt.neg_cap_per_user_day) {
            std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(day), static_cast<std::uint64_t>(ui)};
            std::mt19937_64 rng(seq);
            std::shuffle(negs.begin(), negs.end(), rng);
            negs.resize(opt.neg_cap_per_user_day);
            std::sort(negs.begin(), negs.end());
        }
        // merge positives and negatives in doc order
        std::size_t a = 0, b = 0;
        while (a < own.size() || b < negs.size()) {
            if (b == negs.size() || (a < own.size() && own[a] < negs[b])) {
                out.push_back({u, own[a++], 1, day});
            } else {
                out.push_back({u, negs[b++], 0, day});
            }
        }
    }
    return out;
}

/// Seeded shuffle split. Both halves keep the input's relative order.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_train_val(const std::vector<Sample>& samples,
                                                                           double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(samples.size())));
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    out.first.reserve(n_train);
    out.second.reserve(samples.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
    return out;
}

} // namespace sean
