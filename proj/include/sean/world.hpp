#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sean/corpus.hpp"
#include "sean/rewards.hpp"
#include "sean/seanet.hpp"
#include "sean/social_graph.hpp"
#include "sean/types.hpp"

namespace sean {

struct DataPaths {
    std::string documents;
    std::string interactions;
    std::string graph;
    std::string payouts;
    std::string embeddings;

    /// Standard file names inside one dataset directory.
    static DataPaths in_dir(const std::filesystem::path& dir) {
        return {(dir / "documents.jsonl").string(), (dir / "interactions.jsonl").string(), (dir / "graph.tsv").string(),
                (dir / "payouts.tsv").string(), (dir / "embeddings.txt").string()};
    }
};

/// Everything the stream needs, loaded once and then read-only.
struct World {
    UserRegistry users;
    SocialGraph graph;
    DocumentStore docs;
    std::vector<InteractionLog> logs;
    InteractionIndex interactions;
    ActivityNetwork activity;
    PayoutTable payouts;
    Vocabulary vocab;
    std::vector<EncodedDoc> encoded;
    int n_days = 0;

    std::size_t n_users() const { return users.size(); }
};

/// The graph file defines the user universe; creators and payout recipients
/// missing from it are added as isolated nodes. Interaction users must exist.
inline World load_world(const DataPaths& paths, const CorpusLimits& limits = {}) {
    World w;
    w.graph = load_graph(paths.graph, w.users);
    w.docs = load_documents(paths.documents, w.users, limits);
    if (!paths.payouts.empty() && std::filesystem::exists(paths.payouts)) w.payouts = load_payouts(paths.payouts, w.users);
    w.graph.resize(w.users.size());
    w.logs = load_interactions(paths.interactions, w.users, w.docs);
    int max_day = w.docs.max_day();
    for (const auto& l : w.logs) max_day = std::max(max_day, l.day);
    w.n_days = max_day + 1;
    w.interactions = InteractionIndex(w.logs, w.n_days);
    w.activity = ActivityNetwork(w.interactions, w.docs, w.users.size());
    w.vocab = build_vocab(w.docs, paths.embeddings);
    w.encoded.reserve(w.docs.size());
    for (const auto& d : w.docs) w.encoded.push_back(w.vocab.encode(d));
    return w;
}

} // namespace sean
