#include <set>
#include <sstream>

#include "doctest.h"
#include "eyetrans/ast.hpp"
#include "eyetrans/ast_io.hpp"
#include "eyetrans/errors.hpp"
#include "eyetrans/java_parser.hpp"
#include "support.hpp"

using namespace eyetrans;
using testing::make_tree;
using SC = SemanticCategory;

namespace {

bool has_ancestor(const Ast& a, NodeId id, SC cat) {
  for (auto p = a.parent(id); p; p = a.parent(*p))
    if (a.node(*p).category == cat) return true;
  return false;
}

std::vector<NodeId> of_category(const Ast& a, SC cat) {
  std::vector<NodeId> out;
  for (const auto& [id, n] : a.nodes())
    if (n.category == cat) out.push_back(id);
  return out;
}

}  // namespace

TEST_CASE("taxonomy has 19 contiguous categories") {
  CHECK(kNumCategories == 19);
  std::set<std::string_view> names;
  for (int i = 0; i < kNumCategories; ++i) {
    auto c = category_from_id(i);
    REQUIRE(c);
    CHECK(category_id(*c) == i);
    CHECK(category_from_name(category_name(*c)) == c);
    names.insert(category_name(*c));
  }
  CHECK(names.size() == 19);
  CHECK_FALSE(category_from_id(19));
  CHECK_FALSE(category_from_id(-1));
  CHECK_FALSE(category_from_name("lambda"));
  // every category appears exactly once in the priority table
  std::set<SC> ranked(kCategoryPriority.begin(), kCategoryPriority.end());
  CHECK(ranked.size() == 19);
}

TEST_CASE("declarations outrank operators in role resolution") {
  std::vector<SC> roles{SC::operator_, SC::variable_declaration};
  CHECK(resolve_roles(roles) == SC::variable_declaration);
  std::vector<SC> none;
  CHECK(resolve_roles(none) == SC::other);
  std::vector<SC> flow{SC::method_call, SC::loop_body};
  CHECK(resolve_roles(flow) == SC::loop_body);
}

TEST_CASE("parse: return of a parameter") {
  Ast a = parse_java_subset("int f(int x){return x;}");
  CHECK(a.node(a.root()).category == SC::method_declaration);
  CHECK(a.method_id() == "f");
  auto params = of_category(a, SC::parameter);
  auto rets = of_category(a, SC::return_statement);
  REQUIRE(params.size() == 1);
  REQUIRE(rets.size() == 1);
  CHECK(has_ancestor(a, params[0], SC::method_declaration));
  CHECK(has_ancestor(a, rets[0], SC::method_declaration));
}

TEST_CASE("parse: empty and malformed input raise SyntaxError with a position") {
  CHECK_THROWS_AS(parse_java_subset(""), SyntaxError);
  try {
    parse_java_subset("int f(int x) {\n  return x +;\n}");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() > 0);
  }
  CHECK_THROWS_AS(parse_java_subset("int f() { switch (x) { } }"), SyntaxError);
}

TEST_CASE("parse: if nested in for sits under loop_body") {
  Ast a = parse_java_subset(
      "void g(int n){ int s = 0; for (int i = 0; i < n; i++) { if (i > 2) { s = s + i; } } }");
  auto conds = of_category(a, SC::conditional_statement);
  REQUIRE(conds.size() == 1);
  CHECK(has_ancestor(a, conds[0], SC::loop_body));
  CHECK(has_ancestor(a, conds[0], SC::loop_statement));
}

TEST_CASE("parse: category priority on '=' and '{'") {
  const std::string src = "void g(int n){ int s = 0; for (int i = 0; i < n; i++) { s = s + i; } }";
  auto pm = parse_java_method(src);
  auto category_at = [&](std::size_t col) {
    for (const auto& [id, span] : pm.spans)
      if (span.row == 0 && span.col == static_cast<int>(col)) return pm.ast.node(id).category;
    FAIL("no token at column " << col);
    return SC::other;
  };
  CHECK(category_at(src.find("s = 0") + 2) == SC::variable_declaration);
  CHECK(category_at(src.find("s = s") + 2) == SC::assignment);
  CHECK(category_at(src.find("{ s =")) == SC::loop_body);
}

TEST_CASE("parse: literals are discarded into placeholders") {
  auto pm = parse_java_method("String h(){ int k = 42; return \"abc\" + k; }");
  auto lits = of_category(pm.ast, SC::literal_placeholder);
  CHECK(lits.size() == 2);
  std::ostringstream os;
  write_ast_jsonl(os, {pm.ast});
  CHECK(os.str().find("42") == std::string::npos);
  CHECK(os.str().find("abc") == std::string::npos);
}

TEST_CASE("parse: deterministic") {
  const std::string src = "int m(int[] a){ int b = a[0]; for (int i = 1; i < a.length; i++) { if (a[i] > b) { b = a[i]; } } return b; }";
  CHECK(parse_java_subset(src) == parse_java_subset(src));
}

TEST_CASE("parse: oversize methods are rejected") {
  std::string body;
  for (int i = 0; i < 60; ++i) body += "x = x + 1;";
  CHECK_THROWS_AS(parse_java_subset("void big(int x){" + body + "}"), TooLarge);
}

TEST_CASE("ingest: single node") {
  nlohmann::json doc = {{"method_id", "m"}, {"root", 0}, {"nodes", {{{"id", 0}, {"category", "other"}}}}};
  Ast a = ingest_ast(doc);
  CHECK(a.size() == 1);
  CHECK(a.node(0).height == 0);
}

TEST_CASE("ingest: violations name the invariant") {
  auto doc = [](nlohmann::json nodes, int root = 0) {
    return nlohmann::json{{"method_id", "m"}, {"root", root}, {"nodes", nodes}};
  };
  auto message = [&](const nlohmann::json& d) {
    try {
      ingest_ast(d);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const nlohmann::json cycle = {{{"id", 0}, {"category", "other"}, {"children", {1}}},
                                {{"id", 1}, {"category", "other"}, {"children", {0}}}};
  CHECK(message(doc(cycle)).find("cycle") != std::string::npos);
  const nlohmann::json orphan = {{{"id", 0}, {"category", "other"}}, {{"id", 1}, {"category", "other"}}};
  CHECK(message(doc(orphan)).find("orphan") != std::string::npos);
  const nlohmann::json unknown = {{{"id", 0}, {"category", "lambda"}}};
  CHECK(message(doc(unknown)).find("unknown category") != std::string::npos);

  nlohmann::json big = nlohmann::json::array();
  for (int i = 0; i < 201; ++i) {
    nlohmann::json n = {{"id", i}, {"category", "variable_use"}};
    n["children"] = i + 1 < 201 && i < 40 ? nlohmann::json::array({i + 1}) : nlohmann::json::array();
    big.push_back(n);
  }
  CHECK_THROWS_AS(ingest_ast(doc(big)), TooLarge);
  try {
    ingest_ast(doc(big));
  } catch (const TooLarge& e) {
    CHECK(std::string(e.what()).find("size cap") != std::string::npos);
  }
}

TEST_CASE("ingest: heights are recomputed, not trusted") {
  nlohmann::json doc = {{"method_id", "m"},
                        {"root", 5},
                        {"nodes",
                         {{{"id", 5}, {"category", "method_declaration"}, {"children", {9}}, {"height", 7}},
                          {{"id", 9}, {"category", "parameter"}, {"height", 0}}}}};
  Ast a = ingest_ast(doc);
  CHECK(a.node(5).height == 0);
  CHECK(a.node(9).height == 1);
}

TEST_CASE("height cap of 50") {
  std::map<NodeId, std::vector<NodeId>> chain;
  for (int i = 0; i < 50; ++i) chain[i] = {i + 1};
  chain[50] = {};
  CHECK(make_tree(chain).node(50).height == 50);
  chain[50] = {51};
  chain[51] = {};
  CHECK_THROWS_AS(make_tree(chain), ValidationError);
}

TEST_CASE("bfs_serialize examples") {
  // a=0, b=1, c=2, d=3
  Ast t = make_tree({{0, {1, 2}}, {1, {3}}});
  auto s = bfs_serialize(t);
  CHECK(s.node_ids == std::vector<NodeId>{0, 1, 2, 3});
  CHECK(s.heights == std::vector<int>{0, 1, 1, 2});

  Ast single = make_tree({{4, {}}}, {}, 4);
  auto one = bfs_serialize(single);
  CHECK(one.node_ids == std::vector<NodeId>{4});
  CHECK(one.heights == std::vector<int>{0});

  Ast swapped = make_tree({{0, {2, 1}}, {1, {3}}});
  CHECK(bfs_serialize(swapped).node_ids == std::vector<NodeId>{0, 2, 1, 3});
}

TEST_CASE("property: serialization, heights and round trip on random trees") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> size(1, 120);
    Ast a = testing::random_tree(rng, size(rng));
    auto s = bfs_serialize(a);
    REQUIRE(s.size() == a.size());
    std::set<NodeId> seen(s.node_ids.begin(), s.node_ids.end());
    CHECK(seen.size() == a.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      int depth = 0;
      for (auto p = a.parent(s.node_ids[i]); p; p = a.parent(*p)) ++depth;
      CHECK(s.heights[i] == depth);
      CHECK(s.heights[i] <= kMaxHeight);
      if (i > 0) CHECK(s.heights[i] >= s.heights[i - 1]);
    }
    CHECK(ingest_ast(export_ast(a)) == a);
  }
}

TEST_CASE("jsonl round trip and versioning") {
  std::vector<Ast> asts{make_tree({{0, {1, 2}}}, {{0, SC::method_declaration}}),
                        make_tree({{3, {4}}}, {}, 3, 7)};
  std::ostringstream os;
  write_ast_jsonl(os, asts);
  std::istringstream is(os.str() + "\n\n");
  CHECK(read_ast_jsonl(is) == asts);
  CHECK(export_ast(asts[0])["format_version"] == kAstFormatVersion);
  auto doc = export_ast(asts[0]);
  doc["format_version"] = 99;
  CHECK_THROWS_AS(ingest_ast(doc), ValidationError);
}
