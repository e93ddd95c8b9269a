#include <set>
#include <string>

#include "json.hpp"
#include "logbel/error.hpp"
#include "logbel/model.hpp"

namespace logbel {

namespace {

using nlohmann::json;

std::vector<double> read_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kParseError, what + " must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::vector<double>> read_matrix(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, what + " must be an array of rows");
  std::vector<std::vector<double>> out;
  out.reserve(j.size());
  for (const auto& row : j) out.push_back(read_vector(row, what + " row"));
  return out;
}

}  // namespace

NetworkSpec parse_network_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "network file must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "nodes") throw Error(ErrorCode::kParseError, "unknown top-level key '" + key + "'");
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw Error(ErrorCode::kParseError, "network file needs a \"nodes\" array");
  }

  static const std::set<std::string> kKeys{"id", "domain", "parent", "cpt", "prior", "evidence"};
  NetworkSpec spec;
  for (const auto& jn : doc["nodes"]) {
    if (!jn.is_object()) throw Error(ErrorCode::kParseError, "each node must be an object");
    for (const auto& [key, _] : jn.items()) {
      if (!kKeys.count(key)) throw Error(ErrorCode::kParseError, "unknown node key '" + key + "'");
    }
    if (!jn.contains("id") || !jn["id"].is_string()) throw Error(ErrorCode::kParseError, "node needs a string \"id\"");
    NodeSpec s;
    s.id = jn["id"].get<std::string>();
    if (!jn.contains("domain") || !jn["domain"].is_number_integer() || jn["domain"].get<long long>() < 1) {
      throw Error(ErrorCode::kParseError, "node '" + s.id + "' needs a positive integer \"domain\"");
    }
    s.domain = jn["domain"].get<std::size_t>();
    if (!jn.contains("parent")) throw Error(ErrorCode::kParseError, "node '" + s.id + "' needs a \"parent\" (string or null)");
    const auto& parent = jn["parent"];
    if (parent.is_string()) {
      s.parent = parent.get<std::string>();
    } else if (!parent.is_null()) {
      throw Error(ErrorCode::kParseError, "\"parent\" of '" + s.id + "' must be a string or null");
    }
    if (jn.contains("cpt")) s.cpt = read_matrix(jn["cpt"], "cpt of '" + s.id + "'");
    if (jn.contains("prior")) s.prior = read_vector(jn["prior"], "prior of '" + s.id + "'");
    if (jn.contains("evidence")) s.evidence = read_vector(jn["evidence"], "evidence of '" + s.id + "'");
    if (s.parent && !jn.contains("cpt")) throw Error(ErrorCode::kInvalidNetwork, "non-root '" + s.id + "' needs a \"cpt\"");
    if (!s.parent && !jn.contains("prior")) throw Error(ErrorCode::kInvalidNetwork, "root '" + s.id + "' needs a \"prior\"");
    spec.nodes.push_back(std::move(s));
  }
  return spec;
}

CausalTree parse_network(std::string_view json_text) { return build_tree(parse_network_spec(json_text)); }

std::string serialize_network(const CausalTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["domain"] = n.domain;
    if (n.parent == kNoNode) {
      jn["parent"] = nullptr;
      jn["prior"] = n.prior;
    } else {
      jn["parent"] = tree.node(n.parent).id;
      jn["cpt"] = n.cpt.to_rows();
    }
    if (n.children.empty()) jn["evidence"] = n.evidence;
    nodes.push_back(std::move(jn));
  }
  json doc;
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

}  // namespace logbel
