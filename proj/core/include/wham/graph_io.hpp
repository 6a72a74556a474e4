#pragma once

#include <filesystem>
#include <string>

#include "wham/graph.hpp"

namespace wham {

// Graph file format (JSON):
//   {"name": str,
//    "batch_size": int (optional, default 1),
//    "ops": [{"id": str, "kind": "gemm|conv|vector",
//             "m": int, "n": int, "k": int   (gemm/conv)
//             OR "elements": int,            (vector)
//             "param_bytes": int, "activation_bytes": int}],
//    "edges": [[src, dst], ...]}
//
// Only the FORWARD subgraph is accepted; pass tags and core affinity are
// derived from the kind. Throws ParseError / UnknownNodeError / CycleError.
OperatorGraph load_forward_graph(const std::string& json_text);
OperatorGraph load_forward_graph_file(const std::filesystem::path& path);

// Serialization of a forward graph back to the same format.
std::string forward_graph_to_json(const OperatorGraph& g);

}  // namespace wham
