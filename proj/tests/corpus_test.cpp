#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "sean/corpus.hpp"
#include "sean/social_graph.hpp"
#include "test_util.hpp"

using namespace sean;

namespace {

std::string doc_line(const std::string& id, const std::string& creator, int day, const std::string& sentences) {
    return R"({"doc_id":")" + id + R"(","creator":")" + creator + R"(","day":)" + std::to_string(day) +
           R"(,"sentences":)" + sentences + "}";
}

std::string sentences_json(std::size_t n_sent, std::size_t n_tok) {
    std::string s = "[";
    for (std::size_t i = 0; i < n_sent; ++i) {
        s += i ? ",[" : "[";
        for (std::size_t j = 0; j < n_tok; ++j) s += (j ? ",\"w" : "\"w") + std::to_string(i * 1000 + j) + "\"";
        s += "]";
    }
    return s + "]";
}

} // namespace

TEST(Documents, LoadTwoRecordsAndLookup) {
    UserRegistry users;
    std::istringstream in(doc_line("a", "alice", 0, R"([["x","y"]])") + "\n" +
                          doc_line("b", "bob", 2, R"([["z"],["x"]])") + "\n");
    auto store = read_documents(in, users);
    ASSERT_EQ(store.size(), 2u);
    EXPECT_EQ(store[store.index_of("b")].sentences.size(), 2u);
    EXPECT_EQ(store[store.index_of("a")].creator, users.at("alice"));
    EXPECT_EQ(store.max_day(), 2);
    EXPECT_FALSE(store.find("nope").has_value());
    EXPECT_THROW(store.index_of("nope"), LookupError);
}

TEST(Documents, TruncatesToFirstSentencesAndTokens) {
    UserRegistry users;
    std::istringstream in(doc_line("a", "alice", 0, sentences_json(40, 120)));
    auto store = read_documents(in, users);
    const auto& d = store[0];
    ASSERT_EQ(d.sentences.size(), 30u);
    for (const auto& s : d.sentences) EXPECT_EQ(s.size(), 100u);
    EXPECT_EQ(d.sentences[29][99], "w29099");

    // already truncated input is unchanged by a second pass
    Document again = d;
    truncate(again, {});
    EXPECT_EQ(again.sentences, d.sentences);
}

TEST(Documents, CustomLimits) {
    UserRegistry users;
    std::istringstream in(doc_line("a", "alice", 0, sentences_json(5, 5)));
    auto store = read_documents(in, users, {2, 3});
    EXPECT_EQ(store[0].sentences.size(), 2u);
    EXPECT_EQ(store[0].sentences[1].size(), 3u);
}

TEST(Documents, RejectsMalformedRecords) {
    UserRegistry users;
    auto expect_parse_error = [&](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        try {
            read_documents(in, users);
            FAIL() << "no error for " << text;
        } catch (const ParseError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_parse_error(doc_line("a", "u", 0, "[]"), "line 1");
    expect_parse_error(doc_line("a", "u", 0, "[[]]"), "no sentences");
    expect_parse_error(doc_line("a", "u", 0, R"([["ok"]])") + "\n{not json", "line 2");
    expect_parse_error(R"({"doc_id":"a","creator":"u","sentences":[["x"]]})", "day");
    expect_parse_error(doc_line("a", "u", 0, R"([[""]])"), "empty token");
    expect_parse_error(doc_line("a", "u", -1, R"([["x"]])"), "line 1");
}

TEST(Documents, DropsEmptySentences) {
    UserRegistry users;
    std::istringstream in(doc_line("a", "u", 0, R"([[],["x"],[]])"));
    auto store = read_documents(in, users);
    ASSERT_EQ(store[0].sentences.size(), 1u);
}

TEST(Documents, RejectsDuplicateIds) {
    UserRegistry users;
    std::istringstream in(doc_line("a", "u", 0, R"([["x"]])") + "\n" + doc_line("a", "v", 1, R"([["y"]])"));
    EXPECT_THROW(read_documents(in, users), DataError);
}

TEST(Documents, MissingFileNamesPath) {
    UserRegistry users;
    try {
        load_documents("/no/such/documents.jsonl", users);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/no/such/documents.jsonl"), std::string::npos);
    }
}

TEST(Interactions, ResolveUsersAndDocs) {
    UserRegistry users;
    users.intern("u1");
    std::istringstream docs_in(doc_line("d1", "c", 0, R"([["x"]])"));
    auto docs = read_documents(docs_in, users);
    std::istringstream in(R"({"day":0,"user":"u1","doc_id":"d1"})");
    auto logs = read_interactions(in, users, docs);
    ASSERT_EQ(logs.size(), 1u);
    EXPECT_EQ(logs[0].user, users.at("u1"));
    EXPECT_EQ(logs[0].doc, 0u);

    std::istringstream bad_user(R"({"day":0,"user":"ghost","doc_id":"d1"})");
    EXPECT_THROW(read_interactions(bad_user, users, docs), DataError);
    std::istringstream bad_doc(R"({"day":0,"user":"u1","doc_id":"d9"})");
    EXPECT_THROW(read_interactions(bad_doc, users, docs), DataError);
}

TEST(Interactions, IndexDeduplicatesAndChecksRange) {
    std::vector<InteractionLog> logs{{0, UserId(1), 0}, {0, UserId(1), 0}, {1, UserId(0), 2}};
    InteractionIndex idx(logs, 2);
    EXPECT_EQ(idx.pairs(0).size(), 1u);
    EXPECT_TRUE(idx.responded(1, UserId(0), 2));
    EXPECT_FALSE(idx.responded(1, UserId(1), 2));
    EXPECT_THROW(idx.pairs(2), RangeError);
    EXPECT_THROW(idx.pairs(-1), RangeError);
    EXPECT_THROW(InteractionIndex(logs, 1), RangeError);
}

TEST(Vocab, OovRuleAndWidth) {
    UserRegistry users;
    std::istringstream docs_in(doc_line("d", "c", 0, R"([["a","c"]])"));
    auto docs = read_documents(docs_in, users);
    std::istringstream emb("a 1 0\nb 0 1\n");
    auto vocab = read_vocab(docs, emb);
    EXPECT_EQ(vocab.width(), 2u);
    EXPECT_EQ(vocab.index("a"), 1);
    EXPECT_EQ(vocab.index("c"), 0);
    EXPECT_EQ(vocab.index("b"), 0);  // not used by any document
    EXPECT_EQ(vocab.size(), 2u);
    EXPECT_EQ(vocab.row(0)[0], 0.0);
    EXPECT_EQ(vocab.row(0)[1], 0.0);
    EXPECT_EQ(vocab.row(1)[0], 1.0);
    auto enc = vocab.encode(docs[0]);
    EXPECT_EQ(enc, (std::vector<std::vector<std::int32_t>>{{1, 0}}));
}

TEST(Vocab, EmptyDocsGiveOnlyOovRow) {
    DocumentStore docs;
    std::istringstream emb("a 1 0 0\n");
    auto vocab = read_vocab(docs, emb);
    EXPECT_EQ(vocab.size(), 1u);
    EXPECT_EQ(vocab.width(), 3u);
}

TEST(Vocab, RejectsInconsistentWidths) {
    DocumentStore docs;
    std::istringstream emb("a 1 0\nb 1 0 0\n");
    EXPECT_THROW(read_vocab(docs, emb), ParseError);
    std::istringstream bad("a 1 x\n");
    EXPECT_THROW(read_vocab(docs, bad), ParseError);
    std::istringstream empty("");
    EXPECT_THROW(read_vocab(docs, empty), ParseError);
}

TEST(Vocab, TotalityOverLoadedDocuments) {
    UserRegistry users;
    std::istringstream docs_in(doc_line("d", "c", 0, sentences_json(3, 4)));
    auto docs = read_documents(docs_in, users);
    std::istringstream emb("w0 1 2\nw1001 3 4\n");
    auto vocab = read_vocab(docs, emb);
    for (const auto& s : vocab.encode(docs[0]))
        for (auto id : s) {
            EXPECT_GE(id, 0);
            EXPECT_LT(static_cast<std::size_t>(id), vocab.size());
        }
}

TEST(Samples, FriendResponseBecomesNegative) {
    // u1 follows u2; u1 comments d1, u2 comments d2
    SocialGraph g;
    g.resize(2);
    g.add_edge(UserId(0), UserId(1));
    std::vector<InteractionLog> logs{{0, UserId(0), 0}, {0, UserId(1), 1}};
    InteractionIndex idx(logs, 1);
    auto s = build_day_samples(0, idx, g);
    std::vector<Sample> expect{{UserId(0), 0, 1, 0}, {UserId(0), 1, 0, 0}, {UserId(1), 1, 1, 0}};
    EXPECT_EQ(s, expect);
}

TEST(Samples, FriendlessUserGetsOnlyPositive) {
    SocialGraph g;
    g.resize(1);
    std::vector<InteractionLog> logs{{0, UserId(0), 3}};
    InteractionIndex idx(logs, 1);
    auto s = build_day_samples(0, idx, g);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].label, 1);
    EXPECT_THROW(build_day_samples(1, idx, g), RangeError);
}

TEST(Samples, MatchBruteForceOnToyWorlds) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5, n_docs = 6;
        SocialGraph g;
        g.resize(n);
        for (std::uint32_t a = 0; a < n; ++a)
            for (std::uint32_t b = 0; b < n; ++b)
                if (a != b && rng() % 3 == 0) g.add_edge(UserId(a), UserId(b));
        std::vector<InteractionLog> logs;
        for (int day = 0; day < 2; ++day)
            for (std::uint32_t u = 0; u < n; ++u)
                for (DocIndex d = 0; d < n_docs; ++d)
                    if (rng() % 4 == 0) logs.push_back({day, UserId(u), d});
        InteractionIndex idx(logs, 2);
        for (int day = 0; day < 2; ++day) {
            std::set<std::tuple<std::uint32_t, DocIndex, int>> expect;
            for (std::uint32_t u = 0; u < n; ++u)
                for (DocIndex d = 0; d < n_docs; ++d) {
                    const bool own = idx.responded(day, UserId(u), d);
                    bool friend_did = false;
                    for (std::uint32_t v = 0; v < n; ++v)
                        if (g.has_edge(UserId(u), UserId(v)) && idx.responded(day, UserId(v), d)) friend_did = true;
                    if (own) expect.emplace(u, d, 1);
                    else if (friend_did) expect.emplace(u, d, 0);
                }
            std::set<std::tuple<std::uint32_t, DocIndex, int>> got;
            for (const auto& s : build_day_samples(day, idx, g)) got.emplace(s.user.value, s.doc, s.label);
            EXPECT_EQ(got, expect);
        }
    }
}

TEST(Samples, NegativeCapIsSeededSubset) {
    SocialGraph g;
    g.resize(4);
    for (std::uint32_t v = 1; v < 4; ++v) g.add_edge(UserId(0), UserId(v));
    std::vector<InteractionLog> logs;
    for (std::uint32_t v = 1; v < 4; ++v)
        for (DocIndex d = 0; d < 5; ++d) logs.push_back({0, UserId(v), d * 3 + v});
    InteractionIndex idx(logs, 1);
    auto full = build_day_samples(0, idx, g);
    auto capped = build_day_samples(0, idx, g, {4, 99});
    auto again = build_day_samples(0, idx, g, {4, 99});
    EXPECT_EQ(capped, again);
    std::size_t negs = 0;
    for (const auto& s : capped)
        if (s.user == UserId(0)) {
            EXPECT_EQ(s.label, 0);
            EXPECT_NE(std::find(full.begin(), full.end(), s), full.end());
            ++negs;
        }
    EXPECT_EQ(negs, 4u);
}

TEST(Split, ProportionsAndDeterminism) {
    std::vector<Sample> s;
    for (DocIndex d = 0; d < 10; ++d) s.push_back({UserId(0), d, 1, 0});
    auto [train, val] = split_train_val(s, 0.9, 3);
    EXPECT_EQ(train.size(), 9u);
    EXPECT_EQ(val.size(), 1u);
    auto [train2, val2] = split_train_val(s, 0.9, 3);
    EXPECT_EQ(train, train2);
    EXPECT_EQ(val, val2);

    std::vector<Sample> two(s.begin(), s.begin() + 2);
    auto [a, b] = split_train_val(two, 0.5, 1);
    EXPECT_EQ(a.size(), 1u);
    EXPECT_EQ(b.size(), 1u);

    auto [e1, e2] = split_train_val({}, 0.9, 1);
    EXPECT_TRUE(e1.empty());
    EXPECT_TRUE(e2.empty());
    EXPECT_THROW(split_train_val(s, 1.0, 1), ConfigError);
}

TEST(Split, DisjointCover) {
    std::vector<Sample> s;
    for (DocIndex d = 0; d < 37; ++d) s.push_back({UserId(d % 3), d, static_cast<int>(d % 2), 0});
    auto [train, val] = split_train_val(s, 0.7, 8);
    std::multiset<DocIndex> seen;
    for (const auto& x : train) seen.insert(x.doc);
    for (const auto& x : val) seen.insert(x.doc);
    EXPECT_EQ(seen.size(), 37u);
    EXPECT_EQ(std::set<DocIndex>(seen.begin(), seen.end()).size(), 37u);
    EXPECT_LE(std::abs(static_cast<double>(train.size()) - 0.7 * 37), 1.0);
}

TEST(Files, RoundTripThroughDisk) {
    auto dir = test::scratch_dir("corpus_files");
    {
        std::ofstream(dir / "docs.jsonl") << doc_line("d1", "c", 0, R"([["a"]])") << "\n";
        std::ofstream(dir / "emb.txt") << "a 0.5 0.25\n";
    }
    UserRegistry users;
    auto docs = load_documents((dir / "docs.jsonl").string(), users);
    auto vocab = build_vocab(docs, (dir / "emb.txt").string());
    EXPECT_EQ(vocab.row(vocab.index("a"))[1], 0.25);
    EXPECT_THROW(build_vocab(docs, (dir / "missing.txt").string()), IoError);
}
