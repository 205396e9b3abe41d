#include "sneq/graphs.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sneq/rng.hpp"

namespace sneq {
namespace {

[[noreturn]] void parse_fail(const std::string& name, int line, const std::string& what) {
    std::ostringstream os;
    os << name << ":" << line << ": " << what;
    throw std::runtime_error(os.str());
}

/// Reads the next non-empty line; returns false at EOF.
bool next_line(std::istream& in, std::string& out, int& line_no) {
    while (std::getline(in, out)) {
        ++line_no;
        if (!out.empty() && out.back() == '\r') out.pop_back();
        bool blank = true;
        for (char c : out)
            if (c != ' ' && c != '\t') blank = false;
        if (!blank) return true;
    }
    return false;
}

}  // namespace

void require_adjacency(const EquivariantTensor& t, const std::string& context) {
    const auto fail = [&](const std::string& what) {
        throw std::invalid_argument(context + ": " + what);
    };
    if (t.order() != 2 || t.channels() != 1) fail("adjacency must be a one-channel order-2 tensor");
    for (int i = 0; i < t.n(); ++i)
        for (int j = 0; j < t.n(); ++j) {
            const double v = t.at(i, j, 0);
            if (v != 0.0 && v != 1.0) fail("adjacency entries must be 0 or 1");
            if (v != t.at(j, i, 0)) fail("adjacency must be symmetric");
            if (i == j && v != 0.0) fail("adjacency diagonal must be zero");
        }
}

EquivariantTensor parse_graph(std::istream& in, const std::string& name) {
    int line_no = 0;
    std::string line;
    if (!next_line(in, line, line_no)) parse_fail(name, 1, "missing header line \"n m\"");

    int n = 0;
    long m = 0;
    {
        std::istringstream hs(line);
        std::string extra;
        if (!(hs >> n >> m) || (hs >> extra))
            parse_fail(name, line_no, "header must be \"n m\"");
        if (n < 1) parse_fail(name, line_no, "vertex count must be at least 1");
        if (m < 0) parse_fail(name, line_no, "edge count must be non-negative");
    }

    EquivariantTensor adj(n, 2, 1);
    std::set<std::pair<int, int>> seen;
    for (long e = 0; e < m; ++e) {
        if (!next_line(in, line, line_no))
            parse_fail(name, line_no + 1, "expected " + std::to_string(m) + " edge lines, got " +
                                              std::to_string(e));
        int i = 0, j = 0;
        std::istringstream es(line);
        std::string extra;
        if (!(es >> i >> j) || (es >> extra)) parse_fail(name, line_no, "edge line must be \"i j\"");
        if (i < 1 || i > n || j < 1 || j > n)
            parse_fail(name, line_no, "vertex id out of range 1.." + std::to_string(n));
        if (i == j) parse_fail(name, line_no, "self-loops are not allowed");
        const auto key = std::minmax(i, j);
        if (!seen.insert(key).second) parse_fail(name, line_no, "duplicate edge");
        adj.at(i - 1, j - 1, 0) = 1.0;
        adj.at(j - 1, i - 1, 0) = 1.0;
    }
    if (next_line(in, line, line_no)) parse_fail(name, line_no, "unexpected content after the edge list");
    return adj;
}

EquivariantTensor load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    return parse_graph(in, path);
}

void write_graph(const EquivariantTensor& adjacency, std::ostream& out) {
    require_adjacency(adjacency, "write_graph");
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < adjacency.n(); ++i)
        for (int j = i + 1; j < adjacency.n(); ++j)
            if (adjacency.at(i, j, 0) == 1.0) edges.emplace_back(i + 1, j + 1);
    out << adjacency.n() << " " << edges.size() << "\n";
    for (const auto& [i, j] : edges) out << i << " " << j << "\n";
}

void save_graph(const EquivariantTensor& adjacency, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    write_graph(adjacency, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

EquivariantTensor random_graph(int n, double edge_prob, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("random_graph: n must be at least 1");
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0))
        throw std::invalid_argument("random_graph: edge probability must lie in [0, 1]");
    RandomStream rs(seed);
    EquivariantTensor adj(n, 2, 1);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rs.uniform() < edge_prob) adj.at(i, j, 0) = adj.at(j, i, 0) = 1.0;
    return adj;
}

std::int64_t edge_count(const EquivariantTensor& adjacency) {
    require_adjacency(adjacency, "edge_count");
    std::int64_t count = 0;
    for (int i = 0; i < adjacency.n(); ++i)
        for (int j = i + 1; j < adjacency.n(); ++j)
            if (adjacency.at(i, j, 0) == 1.0) ++count;
    return count;
}

int largest_component_size(const EquivariantTensor& adjacency) {
    require_adjacency(adjacency, "largest_component_size");
    const int n = adjacency.n();
    std::vector<int> root(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) root[static_cast<std::size_t>(i)] = i;
    const auto find = [&](int v) {
        while (root[static_cast<std::size_t>(v)] != v) {
            root[static_cast<std::size_t>(v)] = root[static_cast<std::size_t>(root[static_cast<std::size_t>(v)])];
            v = root[static_cast<std::size_t>(v)];
        }
        return v;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (adjacency.at(i, j, 0) == 1.0) root[static_cast<std::size_t>(find(i))] = find(j);
    std::vector<int> size(static_cast<std::size_t>(n), 0);
    int best = 0;
    for (int i = 0; i < n; ++i) best = std::max(best, ++size[static_cast<std::size_t>(find(i))]);
    return best;
}

}  // namespace sneq
