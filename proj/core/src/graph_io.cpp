#include "wham/graph_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wham {

namespace {

using nlohmann::json;

Count require_count(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key) || !obj[key].is_number_integer()) {
    throw ParseError(ctx + ": missing or non-integer field '" + key + "'");
  }
  return obj[key].get<Count>();
}

Bytes optional_bytes(const json& obj, const char* key) {
  if (!obj.contains(key)) return 0;
  if (!obj[key].is_number_integer()) {
    throw ParseError("field '" + std::string(key) + "' must be an integer");
  }
  return obj[key].get<Bytes>();
}

}  // namespace

OperatorGraph load_forward_graph(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("ops") || !doc["ops"].is_array()) {
    throw ParseError("graph file must be an object with an 'ops' array");
  }

  std::string name = doc.value("name", std::string("unnamed"));
  Count batch = 1;
  if (doc.contains("batch_size")) {
    if (!doc["batch_size"].is_number_integer()) {
      throw ParseError("'batch_size' must be an integer");
    }
    batch = doc["batch_size"].get<Count>();
  }

  std::vector<Operator> ops;
  for (const json& jop : doc["ops"]) {
    if (!jop.is_object() || !jop.contains("id") || !jop["id"].is_string()) {
      throw ParseError("every op needs a string 'id'");
    }
    Operator op;
    op.id = jop["id"].get<std::string>();
    const std::string ctx = "op '" + op.id + "'";
    std::string kind = jop.value("kind", std::string());
    if (kind == "gemm" || kind == "conv") {
      op.kind = kind == "gemm" ? OpKind::Gemm : OpKind::Conv;
      op.affinity = CoreAffinity::Tensor;
      if (jop.contains("elements")) {
        throw ParseError(ctx + ": tensor op carries 'elements'");
      }
      op.shape = TensorShape{require_count(jop, "m", ctx),
                             require_count(jop, "n", ctx),
                             require_count(jop, "k", ctx)};
    } else if (kind == "vector") {
      op.kind = OpKind::Vector;
      op.affinity = CoreAffinity::Vector;
      if (jop.contains("m") || jop.contains("n") || jop.contains("k")) {
        throw ParseError(ctx + ": vector op carries tensor dims");
      }
      op.elements = require_count(jop, "elements", ctx);
    } else {
      throw ParseError(ctx + ": kind must be gemm|conv|vector, got '" + kind +
                       "'");
    }
    op.pass = Pass::Forward;
    op.param_bytes = optional_bytes(jop, "param_bytes");
    op.activation_bytes = optional_bytes(jop, "activation_bytes");
    ops.push_back(std::move(op));
  }

  std::vector<OperatorGraph::Edge> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw ParseError("'edges' must be an array");
    for (const json& je : doc["edges"]) {
      if (!je.is_array() || je.size() != 2 || !je[0].is_string() ||
          !je[1].is_string()) {
        throw ParseError("each edge must be a [src, dst] string pair");
      }
      edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
    }
  }
  return OperatorGraph(std::move(name), std::move(ops), std::move(edges),
                       batch);
}

OperatorGraph load_forward_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open graph file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_forward_graph(buf.str());
}

std::string forward_graph_to_json(const OperatorGraph& g) {
  json doc;
  doc["name"] = g.name();
  doc["batch_size"] = g.batch_size();
  doc["ops"] = json::array();
  for (const Operator& op : g.operators()) {
    json jop;
    jop["id"] = op.id;
    jop["kind"] = to_string(op.kind);
    if (op.shape) {
      jop["m"] = op.shape->m;
      jop["n"] = op.shape->n;
      jop["k"] = op.shape->k;
    }
    if (op.elements) jop["elements"] = *op.elements;
    jop["param_bytes"] = op.param_bytes;
    jop["activation_bytes"] = op.activation_bytes;
    doc["ops"].push_back(std::move(jop));
  }
  doc["edges"] = json::array();
  for (const auto& [src, dst] : g.edges()) {
    doc["edges"].push_back(json::array({src, dst}));
  }
  return doc.dump(2) + "\n";
}

}  // namespace wham
