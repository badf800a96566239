#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eyetrans/ast.hpp"
#include "json.hpp"

namespace eyetrans {

inline constexpr int kAstFormatVersion = 1;

// Validates a structured AST record. Heights in the input, if any, are
// ignored and recomputed.
Ast ingest_ast(const nlohmann::json& document);
nlohmann::json export_ast(const Ast& ast);

// One document per line; blank lines are skipped.
std::vector<Ast> read_ast_jsonl(std::istream& in);
void write_ast_jsonl(std::ostream& out, const std::vector<Ast>& asts);

}  // namespace eyetrans
