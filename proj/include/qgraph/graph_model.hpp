#pragma once

#include "qgraph/error.hpp"
#include "qgraph/linalg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace qgraph {

/// Edge j runs from `tail` to `head`; arc length t_j in [0, l_j] increases toward the head.
struct Edge {
    std::size_t tail = 0;
    std::size_t head = 0;

    [[nodiscard]] bool is_loop() const noexcept { return tail == head; }
};

/// One end of an edge as seen from a vertex.
struct EdgeEnd {
    std::size_t edge = 0;
    bool at_head = false; ///< true: the t_j = l_j end; false: the t_j = 0 end
};

/**
 * Connected compact metric graph. Edges are identified by their index, which
 * is also the coordinate index of z and l everywhere downstream. Parallel
 * edges and loops are allowed; a loop contributes two incidences to the
 * degree of its vertex.
 */
class MetricGraph {
public:
    static MetricGraph create(std::vector<std::string> vertex_names, std::vector<Edge> edges,
                              std::vector<double> lengths) {
        if (edges.empty()) throw ValidationError("graph has no edges");
        if (edges.size() != lengths.size()) {
            throw ValidationError("edge count and length count differ");
        }
        std::set<std::string> seen;
        for (const auto& name : vertex_names) {
            if (!seen.insert(name).second) throw ValidationError("duplicate vertex '" + name + "'");
        }
        for (const auto& e : edges) {
            if (e.tail >= vertex_names.size() || e.head >= vertex_names.size()) {
                throw ValidationError("unknown vertex reference");
            }
        }
        for (std::size_t j = 0; j < lengths.size(); ++j) {
            if (!(lengths[j] > 0.0) || !std::isfinite(lengths[j])) {
                throw ValidationError("non-positive length on edge " + std::to_string(j));
            }
        }
        MetricGraph g;
        g.names_ = std::move(vertex_names);
        g.edges_ = std::move(edges);
        g.lengths_ = std::move(lengths);
        g.ends_.resize(g.names_.size());
        for (std::size_t j = 0; j < g.edges_.size(); ++j) {
            g.ends_[g.edges_[j].tail].push_back({j, false});
            g.ends_[g.edges_[j].head].push_back({j, true});
        }
        if (!g.connected()) throw ValidationError("disconnected graph");
        return g;
    }

    [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
    [[nodiscard]] std::size_t vertex_count() const noexcept { return names_.size(); }
    [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
    [[nodiscard]] const Edge& edge(std::size_t j) const { return edges_.at(j); }
    [[nodiscard]] const std::vector<std::string>& vertex_names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<double>& lengths() const noexcept { return lengths_; }
    [[nodiscard]] const std::vector<EdgeEnd>& ends_at(std::size_t v) const { return ends_.at(v); }
    [[nodiscard]] std::size_t degree(std::size_t v) const { return ends_.at(v).size(); }

    [[nodiscard]] RVector length_vector() const {
        return Eigen::Map<const RVector>(lengths_.data(), static_cast<Eigen::Index>(lengths_.size()));
    }
    [[nodiscard]] double total_length() const {
        return std::accumulate(lengths_.begin(), lengths_.end(), 0.0);
    }

    /// Same topology and orientation, new edge lengths.
    [[nodiscard]] MetricGraph with_lengths(std::vector<double> lengths) const {
        return create(names_, edges_, std::move(lengths));
    }
    [[nodiscard]] MetricGraph with_lengths(const RVector& lengths) const {
        return with_lengths(std::vector<double>(lengths.data(), lengths.data() + lengths.size()));
    }

private:
    MetricGraph() = default;

    [[nodiscard]] bool connected() const {
        if (names_.empty()) return false;
        std::vector<bool> visited(names_.size(), false);
        std::vector<std::size_t> stack{0};
        visited[0] = true;
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            for (const auto& end : ends_[v]) {
                const auto& e = edges_[end.edge];
                const auto other = end.at_head ? e.tail : e.head;
                if (!visited[other]) {
                    visited[other] = true;
                    stack.push_back(other);
                }
            }
        }
        return std::all_of(visited.begin(), visited.end(), [](bool b) { return b; });
    }

    std::vector<std::string> names_;
    std::vector<Edge> edges_;
    std::vector<double> lengths_;
    std::vector<std::vector<EdgeEnd>> ends_;
};

/// Structural flags and the standing-assumption verdict.
struct GraphClass {
    bool satisfies_assumption = false;
    std::vector<std::string> violation_reasons;
    std::vector<std::size_t> loop_edges;
    bool is_mandarin = false;
    bool is_flower = false;

    [[nodiscard]] bool has_loops() const noexcept { return !loop_edges.empty(); }
};

inline constexpr const char* reason_degree_two = "degree-two vertex";
inline constexpr const char* reason_single_cycle = "single cycle";

inline GraphClass classify(const MetricGraph& g) {
    GraphClass c;
    for (std::size_t j = 0; j < g.edge_count(); ++j) {
        if (g.edge(j).is_loop()) c.loop_edges.push_back(j);
    }
    c.is_flower = g.vertex_count() == 1;
    c.is_mandarin = g.vertex_count() == 2 && g.edge_count() >= 2 && c.loop_edges.empty();

    bool any_degree_two = false;
    bool all_degree_two = true;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        any_degree_two = any_degree_two || g.degree(v) == 2;
        all_degree_two = all_degree_two && g.degree(v) == 2;
    }
    if (all_degree_two) c.violation_reasons.emplace_back(reason_single_cycle);
    if (any_degree_two) c.violation_reasons.emplace_back(reason_degree_two);
    c.satisfies_assumption = c.violation_reasons.empty();
    return c;
}

/// Throws ValidationError naming every violated standing assumption.
inline void require_assumption(const GraphClass& c) {
    if (c.satisfies_assumption) return;
    std::string msg = "graph violates the standing assumption (no degree-two vertices, not a cycle):";
    for (const auto& r : c.violation_reasons) msg += " " + r + ";";
    throw ValidationError(msg);
}

// Graph description document:
//   {"vertices": ["v0", "v1"],
//    "edges": [{"id": 0, "tail": "v0", "head": "v1", "length": 3.14}]}
// ids must be a permutation of 0..N-1.

inline MetricGraph graph_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("edges")) {
        throw ValidationError("parse failure: expected fields 'vertices' and 'edges'");
    }
    const auto& jv = doc.at("vertices");
    const auto& je = doc.at("edges");
    if (!jv.is_array() || !je.is_array()) {
        throw ValidationError("parse failure: 'vertices' and 'edges' must be lists");
    }
    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& v : jv) {
        if (!v.is_string()) throw ValidationError("parse failure: vertex identifiers must be strings");
        index.emplace(v.get<std::string>(), names.size());
        names.push_back(v.get<std::string>());
    }
    const std::size_t n = je.size();
    std::vector<std::optional<Edge>> edges(n);
    std::vector<double> lengths(n, 0.0);
    for (const auto& rec : je) {
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("tail") || !rec.contains("head") ||
            !rec.contains("length")) {
            throw ValidationError("parse failure: edge records need id, tail, head, length");
        }
        if (!rec.at("id").is_number_integer() || !rec.at("tail").is_string() ||
            !rec.at("head").is_string() || !rec.at("length").is_number()) {
            throw ValidationError("parse failure: edge record field has the wrong type");
        }
        const auto id = rec.at("id").get<long long>();
        if (id < 0 || static_cast<std::size_t>(id) >= n || edges[static_cast<std::size_t>(id)]) {
            throw ValidationError("parse failure: edge ids must be 0..N-1 without repeats");
        }
        const auto tail = index.find(rec.at("tail").get<std::string>());
        const auto head = index.find(rec.at("head").get<std::string>());
        if (tail == index.end() || head == index.end()) throw ValidationError("unknown vertex reference");
        edges[static_cast<std::size_t>(id)] = Edge{tail->second, head->second};
        lengths[static_cast<std::size_t>(id)] = rec.at("length").get<double>();
    }
    std::vector<Edge> out;
    out.reserve(n);
    for (auto& e : edges) out.push_back(*e);
    return MetricGraph::create(std::move(names), std::move(out), std::move(lengths));
}

inline MetricGraph load_graph(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("parse failure: ") + e.what());
    }
    return graph_from_json(doc);
}

inline MetricGraph load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open graph file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_graph(ss.str());
}

inline nlohmann::json graph_to_json(const MetricGraph& g) {
    nlohmann::json doc;
    doc["vertices"] = g.vertex_names();
    doc["edges"] = nlohmann::json::array();
    for (std::size_t j = 0; j < g.edge_count(); ++j) {
        doc["edges"].push_back({{"id", j},
                                {"tail", g.vertex_names()[g.edge(j).tail]},
                                {"head", g.vertex_names()[g.edge(j).head]},
                                {"length", g.lengths()[j]}});
    }
    return doc;
}

/// Small builders for the standard families. Lengths default to 1.
namespace graphs {

inline MetricGraph interval(double length = 1.0) {
    return MetricGraph::create({"v0", "v1"}, {{0, 1}}, {length});
}

/// Center vertex 0, leaves 1..n, edges oriented center -> leaf.
inline MetricGraph star(std::vector<double> lengths) {
    std::vector<std::string> names{"c"};
    std::vector<Edge> edges;
    for (std::size_t j = 0; j < lengths.size(); ++j) {
        names.push_back("leaf" + std::to_string(j));
        edges.push_back({0, j + 1});
    }
    return MetricGraph::create(std::move(names), std::move(edges), std::move(lengths));
}

/// Two vertices, every edge from vertex 0 to vertex 1.
inline MetricGraph mandarin(std::vector<double> lengths) {
    std::vector<Edge> edges(lengths.size(), Edge{0, 1});
    return MetricGraph::create({"u", "v"}, std::move(edges), std::move(lengths));
}

/// One vertex, every edge a loop.
inline MetricGraph flower(std::vector<double> lengths) {
    std::vector<Edge> edges(lengths.size(), Edge{0, 0});
    return MetricGraph::create({"v"}, std::move(edges), std::move(lengths));
}

/// Edge 0 is a loop at v, edge 1 a tail v -> u.
inline MetricGraph lasso(double loop_length, double tail_length) {
    return MetricGraph::create({"v", "u"}, {{0, 0}, {0, 1}}, {loop_length, tail_length});
}

/// Edge 0 a loop at v, edges 1 and 2 tails from v to two leaves.
inline MetricGraph lasso_split_tail(std::vector<double> lengths) {
    return MetricGraph::create({"v", "a", "b"}, {{0, 0}, {0, 1}, {0, 2}}, std::move(lengths));
}

/// Edge 0 a loop at v, edge 1 the bar v -> u, edge 2 a loop at u.
inline MetricGraph dumbbell(std::vector<double> lengths) {
    return MetricGraph::create({"v", "u"}, {{0, 0}, {0, 1}, {1, 1}}, std::move(lengths));
}

} // namespace graphs

} // namespace qgraph
