#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "sean/error.hpp"
#include "sean/types.hpp"

namespace sean {

/// Directed follow graph over registered users. Neighbor lists keep file
/// insertion order, drop duplicates and self-loops.
class SocialGraph {
public:
    SocialGraph() = default;
    explicit SocialGraph(std::size_t n_users) : adjacency_(n_users) {}

    std::size_t size() const { return adjacency_.size(); }

    /// Grows the node set so that ids below n are valid.
    void resize(std::size_t n) {
        if (n > adjacency_.size()) adjacency_.resize(n);
    }

    /// Returns false when the edge was a self-loop or already present.
    bool add_edge(UserId src, UserId dst) {
        resize(std::max(src.index(), dst.index()) + 1);
        if (src == dst) return false;
        auto& list = adjacency_[src.index()];
        if (std::find(list.begin(), list.end(), dst) != list.end()) return false;
        list.push_back(dst);
        ++edges_;
        return true;
    }

    bool contains(UserId u) const { return u.index() < adjacency_.size(); }

    const std::vector<UserId>& neighbors(UserId u) const {
        if (!contains(u)) throw LookupError("user id " + std::to_string(u.value) + " not in graph");
        return adjacency_[u.index()];
    }

    bool has_edge(UserId src, UserId dst) const {
        const auto& list = neighbors(src);
        return std::find(list.begin(), list.end(), dst) != list.end();
    }

    std::size_t edge_count() const { return edges_; }

private:
    std::vector<std::vector<UserId>> adjacency_;
    std::size_t edges_ = 0;
};

/// Reads `src<TAB>dst` lines. Blank lines and lines starting with '#' are skipped.
inline SocialGraph read_graph(std::istream& in, UserRegistry& users) {
    SocialGraph g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
            line.find('\t', tab + 1) != std::string::npos) {
            throw ParseError("graph line " + std::to_string(line_no) + ": expected src<TAB>dst");
        }
        UserId src = users.intern(std::string_view(line).substr(0, tab));
        UserId dst = users.intern(std::string_view(line).substr(tab + 1));
        g.add_edge(src, dst);
    }
    g.resize(users.size());
    return g;
}

inline SocialGraph load_graph(const std::string& path, UserRegistry& users) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open graph file: " + path);
    return read_graph(in, users);
}

} // namespace sean
