#include "eyetrans/ast_io.hpp"

#include <istream>
#include <ostream>

#include "eyetrans/errors.hpp"

namespace eyetrans {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

Ast ingest_ast(const json& document) {
  if (!document.is_object()) throw ValidationError("AST document must be a JSON object");
  if (auto v = document.find("format_version"); v != document.end() && *v != kAstFormatVersion) {
    throw ValidationError("unsupported format_version " + v->dump());
  }
  const json& nodes_json = require(document, "nodes");
  if (!nodes_json.is_array()) throw ValidationError("'nodes' must be an array");
  if (static_cast<int>(nodes_json.size()) > kMaxTokens) {
    throw TooLarge("size cap: " + std::to_string(nodes_json.size()) + " nodes exceeds " +
                   std::to_string(kMaxTokens));
  }
  std::vector<AstNode> nodes;
  nodes.reserve(nodes_json.size());
  try {
    for (const json& nj : nodes_json) {
      AstNode n;
      n.id = require(nj, "id").get<NodeId>();
      const std::string cat = require(nj, "category").get<std::string>();
      auto c = category_from_name(cat);
      if (!c) throw ValidationError("unknown category '" + cat + "' on node " + std::to_string(n.id));
      n.category = *c;
      if (auto ch = nj.find("children"); ch != nj.end()) n.children = ch->get<std::vector<NodeId>>();
      nodes.push_back(std::move(n));
    }
    std::string method_id = document.value("method_id", std::string{});
    NodeId root = require(document, "root").get<NodeId>();
    std::optional<int> label;
    if (auto l = document.find("label_class"); l != document.end() && !l->is_null()) label = l->get<int>();
    std::vector<std::string> summary;
    if (auto s = document.find("summary"); s != document.end() && !s->is_null()) {
      summary = s->get<std::vector<std::string>>();
    }
    return Ast(std::move(method_id), root, std::move(nodes), label, std::move(summary));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed AST document: ") + e.what());
  }
}

json export_ast(const Ast& ast) {
  json nodes = json::array();
  for (const auto& [id, n] : ast.nodes()) {
    nodes.push_back({{"id", id}, {"category", std::string(category_name(n.category))}, {"children", n.children}});
  }
  json doc = {{"format_version", kAstFormatVersion},
              {"method_id", ast.method_id()},
              {"root", ast.root()},
              {"nodes", std::move(nodes)}};
  if (ast.label_class()) doc["label_class"] = *ast.label_class();
  if (!ast.summary().empty()) doc["summary"] = ast.summary();
  return doc;
}

std::vector<Ast> read_ast_jsonl(std::istream& in) {
  std::vector<Ast> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ingest_ast(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const TooLarge& e) {
      throw TooLarge("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_ast_jsonl(std::ostream& out, const std::vector<Ast>& asts) {
  for (const Ast& a : asts) out << export_ast(a).dump() << '\n';
}

}  // namespace eyetrans
