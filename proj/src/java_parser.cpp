#include "eyetrans/java_parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "eyetrans/errors.hpp"

namespace eyetrans {

namespace {

using C = SemanticCategory;

enum class TokKind { identifier, keyword, number, string, character, op, end };

struct Token {
  TokKind kind;
  std::string text;
  int row;  // zero-based
  int col;  // zero-based
};

const std::set<std::string, std::less<>> kKeywords = {
    "abstract", "boolean", "break",  "byte",      "case",   "char",   "continue", "do",
    "double",   "else",    "false",  "final",     "float",  "for",    "if",       "instanceof",
    "int",      "long",    "new",    "null",      "private", "protected", "public", "return",
    "short",    "static",  "synchronized", "this", "throws", "true",  "void",     "while",
    "native",   "switch",  "try",    "catch",     "class",  "interface", "import", "package"};

const std::set<std::string, std::less<>> kPrimitiveTypes = {
    "boolean", "byte", "char", "double", "float", "int", "long", "short", "void"};

const std::set<std::string, std::less<>> kModifiers = {
    "public", "private", "protected", "static", "final", "abstract", "synchronized", "native"};

// Keywords that parse but fall outside the supported subset.
const std::set<std::string, std::less<>> kUnsupported = {
    "switch", "case", "try", "catch", "class", "interface", "import", "package"};

std::vector<Token> lex(std::string_view src) {
  static const std::vector<std::string> ops = {
      ">>>=", "<<=", ">>=", ">>>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
      "*=",   "/=",  "%=",  "&=",  "|=", "^=", "<<", ">>", "->"};
  std::vector<Token> out;
  int row = 0;
  int col = 0;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++row;
        col = 0;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char ch = src[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      advance(1);
      continue;
    }
    if (src.substr(i, 2) == "//") {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (src.substr(i, 2) == "/*") {
      int r = row, c = col;
      auto end = src.find("*/", i + 2);
      if (end == std::string_view::npos) throw SyntaxError("unterminated comment", r + 1, c + 1);
      advance(end + 2 - i);
      continue;
    }
    Token t{TokKind::op, "", row, col};
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_' || ch == '$') {
      while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_' || src[i] == '$')) {
        advance(1);
      }
      t.text = std::string(src.substr(start, i - start));
      t.kind = kKeywords.count(t.text) ? TokKind::keyword : TokKind::identifier;
    } else if (std::isdigit(static_cast<unsigned char>(ch)) ||
               (ch == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '.' || src[i] == '_')) {
        advance(1);
      }
      t.text = std::string(src.substr(start, i - start));
      t.kind = TokKind::number;
    } else if (ch == '"' || ch == '\'') {
      char quote = ch;
      advance(1);
      while (i < src.size() && src[i] != quote) {
        if (src[i] == '\n') throw SyntaxError("unterminated literal", t.row + 1, t.col + 1);
        advance(src[i] == '\\' ? 2 : 1);
      }
      if (i >= src.size()) throw SyntaxError("unterminated literal", t.row + 1, t.col + 1);
      advance(1);
      t.text = std::string(src.substr(start, i - start));
      t.kind = quote == '"' ? TokKind::string : TokKind::character;
    } else {
      std::string matched;
      for (const auto& op : ops) {
        if (src.substr(i, op.size()) == op) {
          matched = op;
          break;
        }
      }
      if (matched.empty()) {
        static const std::string singles = "{}()[];,.=<>!~?:+-*/&|^%@";
        if (singles.find(ch) == std::string::npos) {
          throw SyntaxError(std::string("unexpected character '") + ch + "'", row + 1, col + 1);
        }
        matched = std::string(1, ch);
      }
      advance(matched.size());
      t.text = matched;
    }
    out.push_back(std::move(t));
  }
  out.push_back({TokKind::end, "", row, col});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  ParseTree parse_method() {
    if (peek().kind == TokKind::end) fail("empty input: expected a method declaration");
    std::vector<int> modifiers;
    while (true) {
      if (is_op("@")) {  // annotations are skipped
        next();
        expect_identifier();
        continue;
      }
      if (peek().kind == TokKind::keyword && kModifiers.count(peek().text)) {
        modifiers.push_back(leaf(next(), {C::other}));
        continue;
      }
      break;
    }
    int ret_type = parse_type();
    const Token& name = expect_identifier();
    int method = make_node(name, {C::method_declaration});
    tree_.method_name = name.text;
    for (int m : modifiers) add_child(method, m);
    add_child(method, ret_type);
    expect_op("(");
    if (!is_op(")")) {
      do {
        add_child(method, parse_parameter());
      } while (accept_op(","));
    }
    expect_op(")");
    if (accept_keyword("throws")) {
      do {
        add_child(method, parse_type());
      } while (accept_op(","));
    }
    if (!is_op("{")) fail("expected method body");
    add_child(method, parse_block({}));
    if (peek().kind != TokKind::end) fail("trailing input after method body");
    tree_.root = method;
    return finish(method);
  }

 private:
  // Nodes are created in arbitrary order; finish() renumbers them in preorder.
  ParseTree finish(int root) {
    ParseTree out;
    out.method_name = tree_.method_name;
    std::vector<int> order;
    std::vector<int> stack{root};
    while (!stack.empty()) {
      int n = stack.back();
      stack.pop_back();
      order.push_back(n);
      const auto& ch = tree_.nodes[static_cast<std::size_t>(n)].children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    std::vector<int> remap(tree_.nodes.size(), -1);
    for (std::size_t i = 0; i < order.size(); ++i) remap[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    out.nodes.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      ParseNode n = tree_.nodes[static_cast<std::size_t>(order[i])];
      for (int& c : n.children) c = remap[static_cast<std::size_t>(c)];
      out.nodes[i] = std::move(n);
    }
    out.root = 0;
    return out;
  }

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_op(std::string_view s, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokKind::op && t.text == s;
  }
  bool is_keyword(std::string_view s) const {
    return peek().kind == TokKind::keyword && peek().text == s;
  }
  bool accept_op(std::string_view s) {
    if (!is_op(s)) return false;
    next();
    return true;
  }
  bool accept_keyword(std::string_view s) {
    if (!is_keyword(s)) return false;
    next();
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string near = t.kind == TokKind::end ? "end of input" : "'" + t.text + "'";
    throw SyntaxError(msg + " near " + near, t.row + 1, t.col + 1);
  }
  const Token& expect_op(std::string_view s) {
    if (!is_op(s)) fail("expected '" + std::string(s) + "'");
    return next();
  }
  const Token& expect_identifier() {
    if (peek().kind != TokKind::identifier) fail("expected identifier");
    return next();
  }

  int make_node(const Token& t, std::vector<SemanticCategory> roles) {
    ParseNode n;
    n.roles = std::move(roles);
    n.span = {t.row, t.col, static_cast<int>(t.text.size())};
    tree_.nodes.push_back(std::move(n));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }
  int leaf(const Token& t, std::vector<SemanticCategory> roles) { return make_node(t, std::move(roles)); }
  void add_child(int parent, int child) {
    tree_.nodes[static_cast<std::size_t>(parent)].children.push_back(child);
  }
  void add_role(int node, SemanticCategory c) {
    tree_.nodes[static_cast<std::size_t>(node)].roles.push_back(c);
  }

  bool at_type_start() const {
    const Token& t = peek();
    return (t.kind == TokKind::keyword && kPrimitiveTypes.count(t.text)) || t.kind == TokKind::identifier;
  }

  // type := (primitive | Ident ('.' Ident)*) ('[' ']')*
  // Anchored at the last name segment.
  int parse_type() {
    const Token* anchor = nullptr;
    if (peek().kind == TokKind::keyword && kPrimitiveTypes.count(peek().text)) {
      anchor = &next();
    } else if (peek().kind == TokKind::identifier) {
      anchor = &next();
      while (is_op(".") && peek(1).kind == TokKind::identifier) {
        next();
        anchor = &next();
      }
    } else {
      fail("expected type");
    }
    if (is_op("<")) fail("generic types are not supported");
    while (is_op("[") && is_op("]", 1)) {
      next();
      next();
    }
    return leaf(*anchor, {C::type_reference});
  }

  // Speculative check: a type followed by an identifier starts a declaration.
  bool looks_like_declaration() {
    if (!at_type_start()) return false;
    std::size_t save = pos_;
    std::size_t nodes_before = tree_.nodes.size();
    bool ok = true;
    try {
      parse_type();
      ok = peek().kind == TokKind::identifier;
    } catch (const SyntaxError&) {
      ok = false;
    }
    pos_ = save;
    tree_.nodes.resize(nodes_before);
    return ok;
  }

  int parse_parameter() {
    while (accept_keyword("final")) {
    }
    int type = parse_type();
    const Token& name = expect_identifier();
    while (is_op("[") && is_op("]", 1)) {
      next();
      next();
    }
    int p = make_node(name, {C::parameter});
    add_child(p, type);
    return p;
  }

  int parse_block(std::vector<SemanticCategory> context) {
    const Token& open = expect_op("{");
    std::vector<SemanticCategory> roles{C::block_delimiter};
    roles.insert(roles.end(), context.begin(), context.end());
    int block = make_node(open, std::move(roles));
    while (!is_op("}")) {
      if (peek().kind == TokKind::end) fail("unterminated block");
      for (int s : parse_statement()) add_child(block, s);
    }
    next();
    return block;
  }

  // A statement body: blocks pick up the context role; bare statements keep theirs.
  std::vector<int> parse_body(SemanticCategory context) {
    if (is_op("{")) return {parse_block({context})};
    return parse_statement();
  }

  std::vector<int> parse_statement() {
    const Token& t = peek();
    if (is_op("{")) return {parse_block({})};
    if (is_op(";")) {
      next();
      return {};
    }
    if (t.kind == TokKind::keyword) {
      if (kUnsupported.count(t.text)) fail("unsupported construct '" + t.text + "'");
      if (t.text == "if") return {parse_if()};
      if (t.text == "while") {
        int loop = leaf(next(), {C::loop_statement});
        expect_op("(");
        add_child(loop, parse_expression());
        expect_op(")");
        for (int s : parse_body(C::loop_body)) add_child(loop, s);
        return {loop};
      }
      if (t.text == "do") {
        int loop = leaf(next(), {C::loop_statement});
        for (int s : parse_body(C::loop_body)) add_child(loop, s);
        if (!accept_keyword("while")) fail("expected 'while' after do body");
        expect_op("(");
        add_child(loop, parse_expression());
        expect_op(")");
        expect_op(";");
        return {loop};
      }
      if (t.text == "for") return {parse_for()};
      if (t.text == "return") {
        int ret = leaf(next(), {C::return_statement});
        if (!is_op(";")) add_child(ret, parse_expression());
        expect_op(";");
        return {ret};
      }
      if (t.text == "break" || t.text == "continue") {
        int n = leaf(next(), {C::other});
        expect_op(";");
        return {n};
      }
    }
    if (is_keyword("final")) next();
    if (looks_like_declaration()) {
      auto decls = parse_local_declaration();
      expect_op(";");
      return decls;
    }
    int e = parse_expression();
    expect_op(";");
    return {e};
  }

  int parse_if() {
    int cond = leaf(next(), {C::conditional_statement});
    expect_op("(");
    add_child(cond, parse_expression());
    expect_op(")");
    for (int s : parse_body(C::conditional_block)) add_child(cond, s);
    if (is_keyword("else")) {
      int els = leaf(next(), {C::conditional_statement});
      if (is_keyword("if")) {
        add_child(els, parse_if());
      } else {
        for (int s : parse_body(C::conditional_block)) add_child(els, s);
      }
      add_child(cond, els);
    }
    return cond;
  }

  int parse_for() {
    int loop = leaf(next(), {C::loop_statement});
    expect_op("(");
    if (!is_op(";")) {
      if (looks_like_declaration()) {
        for (int d : parse_local_declaration()) add_child(loop, d);
      } else {
        do {
          add_child(loop, parse_expression());
        } while (accept_op(","));
      }
    }
    expect_op(";");
    if (!is_op(";")) add_child(loop, parse_expression());
    expect_op(";");
    if (!is_op(")")) {
      do {
        add_child(loop, parse_expression());
      } while (accept_op(","));
    }
    expect_op(")");
    for (int s : parse_body(C::loop_body)) add_child(loop, s);
    return loop;
  }

  // `T a = e, b;` yields one variable_declaration node per declarator; the
  // type hangs off the first one and the `=` carries the declaration role.
  std::vector<int> parse_local_declaration() {
    int type = parse_type();
    std::vector<int> decls;
    do {
      const Token& name = expect_identifier();
      while (is_op("[") && is_op("]", 1)) {
        next();
        next();
      }
      int decl = make_node(name, {C::variable_declaration});
      if (decls.empty()) add_child(decl, type);
      if (is_op("=")) {
        int eq = leaf(next(), {C::operator_, C::variable_declaration});
        add_child(eq, is_op("{") ? parse_array_initializer() : parse_expression());
        add_child(decl, eq);
      }
      decls.push_back(decl);
    } while (accept_op(","));
    return decls;
  }

  int parse_array_initializer() {
    int init = leaf(expect_op("{"), {C::other});
    if (!is_op("}")) {
      do {
        add_child(init, is_op("{") ? parse_array_initializer() : parse_expression());
      } while (accept_op(","));
    }
    expect_op("}");
    return init;
  }

  int parse_expression() { return parse_assignment(); }

  int parse_assignment() {
    int lhs = parse_ternary();
    static const std::set<std::string, std::less<>> assign_ops = {
        "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="};
    if (peek().kind == TokKind::op && assign_ops.count(peek().text)) {
      int op = leaf(next(), {C::operator_, C::assignment});
      add_child(op, lhs);
      add_child(op, parse_assignment());
      return op;
    }
    return lhs;
  }

  int parse_ternary() {
    int cond = parse_binary(0);
    if (is_op("?")) {
      int op = leaf(next(), {C::operator_});
      add_child(op, cond);
      add_child(op, parse_assignment());
      expect_op(":");
      add_child(op, parse_ternary());
      return op;
    }
    return cond;
  }

  static int precedence(const Token& t) {
    if (t.kind == TokKind::keyword && t.text == "instanceof") return 7;
    if (t.kind != TokKind::op) return -1;
    static const std::vector<std::pair<std::string, int>> table = {
        {"||", 1}, {"&&", 2}, {"|", 3},  {"^", 4},  {"&", 5},  {"==", 6}, {"!=", 6},
        {"<", 7},  {">", 7},  {"<=", 7}, {">=", 7}, {"<<", 8}, {">>", 8}, {">>>", 8},
        {"+", 9},  {"-", 9},  {"*", 10}, {"/", 10}, {"%", 10}};
    for (const auto& [op, p] : table) {
      if (t.text == op) return p;
    }
    return -1;
  }

  int parse_binary(int min_prec) {
    int lhs = parse_unary();
    while (true) {
      int p = precedence(peek());
      if (p < 0 || p < min_prec) return lhs;
      const Token& op_tok = next();
      int op = leaf(op_tok, {C::operator_});
      int rhs = op_tok.text == "instanceof" ? parse_type() : parse_binary(p + 1);
      add_child(op, lhs);
      add_child(op, rhs);
      lhs = op;
    }
  }

  int parse_unary() {
    const Token& t = peek();
    if (t.kind == TokKind::op &&
        (t.text == "!" || t.text == "-" || t.text == "+" || t.text == "~" || t.text == "++" || t.text == "--")) {
      int op = leaf(next(), {C::operator_});
      add_child(op, parse_unary());
      return op;
    }
    // Primitive casts only: `(int) x`.
    if (is_op("(") && peek(1).kind == TokKind::keyword && kPrimitiveTypes.count(peek(1).text) && is_op(")", 2)) {
      next();
      int cast = leaf(next(), {C::type_reference, C::operator_});
      next();
      add_child(cast, parse_unary());
      return cast;
    }
    return parse_postfix(parse_primary());
  }

  int parse_arguments(int call) {
    expect_op("(");
    if (!is_op(")")) {
      do {
        int a = parse_expression();
        add_role(a, C::argument);
        add_child(call, a);
      } while (accept_op(","));
    }
    expect_op(")");
    return call;
  }

  int parse_postfix(int expr) {
    while (true) {
      if (is_op(".")) {
        next();
        const Token& name = expect_identifier();
        if (is_op("(")) {
          int call = make_node(name, {C::method_call});
          add_child(call, expr);
          expr = parse_arguments(call);
        } else {
          int field = make_node(name, {C::field_access});
          add_child(field, expr);
          expr = field;
        }
      } else if (is_op("[")) {
        int idx = leaf(next(), {C::array_access});
        add_child(idx, expr);
        add_child(idx, parse_expression());
        expect_op("]");
        expr = idx;
      } else if (is_op("++") || is_op("--")) {
        int op = leaf(next(), {C::operator_});
        add_child(op, expr);
        expr = op;
      } else {
        return expr;
      }
    }
  }

  int parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::number:
      case TokKind::string:
      case TokKind::character:
        return leaf(next(), {C::literal_placeholder});
      case TokKind::identifier: {
        const Token& name = next();
        if (is_op("(")) return parse_arguments(make_node(name, {C::method_call}));
        return leaf(name, {C::variable_use});
      }
      case TokKind::keyword:
        if (t.text == "true" || t.text == "false" || t.text == "null") {
          return leaf(next(), {C::literal_placeholder});
        }
        if (t.text == "this") return leaf(next(), {C::variable_use});
        if (t.text == "new") return parse_new();
        fail("unexpected keyword in expression");
      case TokKind::op:
        if (t.text == "(") {
          next();
          int inner = parse_expression();
          expect_op(")");
          return inner;
        }
        fail("unexpected token in expression");
      case TokKind::end:
        fail("unexpected end of input in expression");
    }
    fail("unexpected token");
  }

  int parse_new() {
    const Token& kw = next();
    const Token* anchor = nullptr;
    if (peek().kind == TokKind::identifier ||
        (peek().kind == TokKind::keyword && kPrimitiveTypes.count(peek().text))) {
      anchor = &next();
      while (is_op(".") && peek(1).kind == TokKind::identifier) {
        next();
        anchor = &next();
      }
    } else {
      fail("expected type after 'new'");
    }
    if (is_op("<")) fail("generic types are not supported");
    int type = leaf(*anchor, {C::type_reference});
    if (is_op("(")) {
      int call = make_node(kw, {C::method_call});
      add_child(call, type);
      return parse_arguments(call);
    }
    int arr = make_node(kw, {C::array_access});
    add_child(arr, type);
    bool any = false;
    while (is_op("[")) {
      next();
      if (!is_op("]")) add_child(arr, parse_expression());
      expect_op("]");
      any = true;
    }
    if (!any) fail("expected '(' or '[' after 'new' type");
    if (is_op("{")) add_child(arr, parse_array_initializer());
    return arr;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ParseTree tree_;
};

}  // namespace

SemanticCategory resolve_roles(std::span<const SemanticCategory> roles) {
  if (roles.empty()) return SemanticCategory::other;
  return *std::min_element(roles.begin(), roles.end(), [](SemanticCategory a, SemanticCategory b) {
    return category_rank(a) < category_rank(b);
  });
}

std::vector<SemanticCategory> assign_semantic_categories(const ParseTree& tree) {
  std::vector<SemanticCategory> out;
  out.reserve(tree.nodes.size());
  for (const ParseNode& n : tree.nodes) out.push_back(resolve_roles(n.roles));
  return out;
}

ParseTree parse_java_tree(std::string_view source) {
  return Parser(lex(source)).parse_method();
}

ParsedMethod parse_java_method(std::string_view source) {
  ParseTree tree = parse_java_tree(source);
  if (static_cast<int>(tree.nodes.size()) > kMaxTokens) {
    throw TooLarge("method has " + std::to_string(tree.nodes.size()) + " tokens, cap is " +
                   std::to_string(kMaxTokens));
  }
  std::vector<SemanticCategory> cats = assign_semantic_categories(tree);
  std::vector<AstNode> nodes;
  std::map<NodeId, TokenSpan> spans;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    AstNode n;
    n.id = static_cast<NodeId>(i);
    n.category = cats[i];
    n.children = tree.nodes[i].children;
    nodes.push_back(std::move(n));
    spans[static_cast<NodeId>(i)] = tree.nodes[i].span;
  }
  return {Ast(tree.method_name, tree.root, std::move(nodes)), std::move(spans)};
}

Ast parse_java_subset(std::string_view source) { return parse_java_method(source).ast; }

}  // namespace eyetrans
