#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "sneq/tensor.hpp"

namespace sneq {

/// Throws invalid_argument unless t is an undirected simple-graph adjacency:
/// order 2, one channel, entries 0/1, symmetric, zero diagonal.  The context
/// string prefixes the error message.
void require_adjacency(const EquivariantTensor& t, const std::string& context);

/// Plain-text graph format: header line "n m", then m lines "i j" with
/// 1-based endpoints.  Parse errors carry the file name and line number.
EquivariantTensor parse_graph(std::istream& in, const std::string& name);
EquivariantTensor load_graph(const std::string& path);
void write_graph(const EquivariantTensor& adjacency, std::ostream& out);
void save_graph(const EquivariantTensor& adjacency, const std::string& path);

/// Each unordered pair carries an edge independently with probability
/// edge_prob; deterministic per seed.
EquivariantTensor random_graph(int n, double edge_prob, std::uint64_t seed);

std::int64_t edge_count(const EquivariantTensor& adjacency);
int largest_component_size(const EquivariantTensor& adjacency);

}  // namespace sneq
