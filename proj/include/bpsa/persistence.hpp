#pragma once

#include <string>

#include "bpsa/rrt.hpp"

namespace bpsa {

// JSON with an explicit format_version; matrices row-major at full binary64
// precision so that load(save(g)) is bit-identical.
std::string graph_to_json(const BPGraph& g);
BPGraph graph_from_json(const std::string& text);

// Throws IoError.
void save_graph(const BPGraph& g, const std::string& path);
// Throws IoError, ParseError, FormatVersionMismatch.
BPGraph load_graph(const std::string& path);

}  // namespace bpsa
