#pragma once

#include <cctype>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "grammar.hpp"
#include "scene.hpp"

namespace nlvr {

/// Derivation tree node: the action applied here plus one subtree per child type.
struct Node {
  ActionId action = 0;
  std::vector<Node> children;

  friend bool operator==(const Node&, const Node&) = default;
};

/// A typed program: its derivation tree and the linearized action sequence
/// (pre-order over the tree, the order the decoder emits actions in).
struct Program {
  Node root;
  std::vector<ActionId> actions;

  std::size_t length() const { return actions.size(); }
  friend bool operator==(const Program& a, const Program& b) { return a.actions == b.actions; }
};

inline void linearize_into(const Node& n, std::vector<ActionId>& out) {
  out.push_back(n.action);
  for (const auto& c : n.children) linearize_into(c, out);
}

inline std::vector<ActionId> linearize(const Node& root) {
  std::vector<ActionId> out;
  linearize_into(root, out);
  return out;
}

inline Program make_program(Node root) {
  Program p;
  p.actions = linearize(root);
  p.root = std::move(root);
  return p;
}

namespace detail {

class ActionParser {
public:
  ActionParser(const Grammar& g, std::span<const ActionId> seq) : g_(g), seq_(seq) {}

  Node parse(TypeId expected) {
    if (pos_ >= seq_.size())
      throw DataError("truncated action sequence: expected " + g_.type_str(expected) + " at step " +
                      std::to_string(pos_ + 1));
    const std::size_t step = pos_ + 1;  // 1-based, as in z^1..z^T
    const ActionId a = seq_[pos_++];
    if (a >= g_.size()) throw DataError("unknown action id at step " + std::to_string(step));
    const auto& act = g_.action(a);
    if (act.lhs != expected)
      throw DataError("ill-typed action at step " + std::to_string(step) + ": expected " +
                      g_.type_str(expected) + ", got " + g_.type_str(act.lhs) + " ('" + act.id + "')");
    Node n{a, {}};
    n.children.reserve(act.children.size());
    for (TypeId c : act.children) n.children.push_back(parse(c));
    return n;
  }

  std::size_t position() const { return pos_; }

private:
  const Grammar& g_;
  std::span<const ActionId> seq_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Rebuilds the derivation tree from a linearized action sequence. `root`
/// defaults to the grammar's root type (bool); other types parse sub-programs.
inline Program parse_actions(const Grammar& g, std::span<const ActionId> seq, std::optional<TypeId> root = {}) {
  if (seq.empty()) throw DataError("empty action sequence");
  detail::ActionParser parser(g, seq);
  Node n = parser.parse(root.value_or(g.root()));
  if (parser.position() != seq.size())
    throw DataError("trailing actions after step " + std::to_string(parser.position()) + " (" +
                    std::to_string(seq.size() - parser.position()) + " unused)");
  Program p;
  p.root = std::move(n);
  p.actions.assign(seq.begin(), seq.end());
  return p;
}

/// Action ids of a sequence written one "lhs -> rhs" per line. Blank lines are skipped.
inline std::vector<ActionId> parse_action_lines(const Grammar& g, std::string_view text) {
  std::vector<ActionId> seq;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    auto id = std::string_view(line).substr(b, e - b + 1);
    auto a = g.find_action(id);
    if (!a) throw DataError("line " + std::to_string(lineno) + ": unknown action '" + std::string(id) + "'");
    seq.push_back(*a);
  }
  return seq;
}

inline std::string format_action_lines(const Grammar& g, std::span<const ActionId> seq) {
  std::string out;
  for (ActionId a : seq) out += g.action(a).id + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Textual syntax: identifier(arg, ...) with nesting
// ---------------------------------------------------------------------------

inline void pretty_print_into(const Grammar& g, const Node& n, std::string& out) {
  const auto& a = g.action(n.action);
  if (a.kind == ActionKind::Terminal) {
    out += a.name;
    return;
  }
  // Apply prints f(args...), Curry prints f(n), Compose prints f(g)
  pretty_print_into(g, n.children[0], out);
  out += '(';
  for (std::size_t i = 1; i < n.children.size(); ++i) {
    if (i > 1) out += ", ";
    pretty_print_into(g, n.children[i], out);
  }
  out += ')';
}

inline std::string pretty_print(const Grammar& g, const Node& n) {
  std::string out;
  pretty_print_into(g, n, out);
  return out;
}

inline std::string pretty_print(const Grammar& g, const Program& p) { return pretty_print(g, p.root); }

namespace detail {

struct Expr {
  std::string name;  // identifier or digit string; empty for calls
  std::size_t offset = 0;
  std::unique_ptr<Expr> head;  // calls only
  std::vector<Expr> args;
};

class TextParser {
public:
  TextParser(const Grammar& g, std::string_view src) : g_(g), src_(src) {}

  Node parse(std::optional<TypeId> root) {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input", pos_);
    auto [node, type] = resolve(e);
    TypeId want = root.value_or(g_.root());
    if (type != want)
      fail("program has type " + g_.type_str(type) + ", expected " + g_.type_str(want), e.offset);
    return node;
  }

private:
  [[noreturn]] void fail(const std::string& msg, std::size_t offset) const {
    throw DataError("offset " + std::to_string(offset) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  Expr parse_expr() {
    skip_ws();
    Expr e;
    e.offset = pos_;
    auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (pos_ < src_.size() && is_ident(src_[pos_])) e.name.push_back(src_[pos_++]);
    if (e.name.empty()) {
      if (pos_ >= src_.size()) fail("unexpected end of input", pos_);
      fail(std::string("unexpected character '") + src_[pos_] + "'", pos_);
    }
    for (skip_ws(); pos_ < src_.size() && src_[pos_] == '('; skip_ws()) {
      Expr call;
      call.offset = e.offset;
      ++pos_;
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == ')') fail("empty argument list", pos_);
      while (true) {
        call.args.push_back(parse_expr());
        skip_ws();
        if (pos_ >= src_.size()) fail("unterminated argument list", pos_);
        if (src_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (src_[pos_] == ')') {
          ++pos_;
          break;
        }
        fail(std::string("expected ',' or ')' but found '") + src_[pos_] + "'", pos_);
      }
      call.head = std::make_unique<Expr>(std::move(e));
      e = std::move(call);
    }
    return e;
  }

  std::pair<Node, TypeId> resolve(const Expr& e) {
    if (!e.head) {
      auto a = g_.find_terminal(e.name);
      if (!a) fail("unknown function or constant '" + e.name + "' in the " +
                       std::string(to_string(g_.variant())) + " language",
                   e.offset);
      return {Node{*a, {}}, g_.action(*a).lhs};
    }
    auto [head, ftype] = resolve(*e.head);
    std::vector<Node> nodes{std::move(head)};
    std::vector<TypeId> child_types{ftype};
    for (const auto& arg : e.args) {
      auto [n, t] = resolve(arg);
      nodes.push_back(std::move(n));
      child_types.push_back(t);
    }
    const SemType& f = g_.type(ftype);
    if (!f.is_func()) fail("'" + g_.type_str(ftype) + "' value cannot be called", e.offset);
    std::optional<ActionId> act;
    if (child_types.size() - 1 == f.params().size()) {
      coerce_filters(f, nodes, child_types);
      act = g_.find_production(ActionKind::Apply, child_types);
    }
    if (!act && child_types.size() == 2) {
      act = g_.find_production(ActionKind::Curry, child_types);
      if (!act) act = g_.find_production(ActionKind::Compose, child_types);
    }
    if (!act) {
      std::string got;
      for (std::size_t i = 1; i < child_types.size(); ++i) got += (i > 1 ? ", " : "") + g_.type_str(child_types[i]);
      fail("cannot apply " + g_.type_str(ftype) + " to (" + got + ")", e.offset);
    }
    return {Node{*act, std::move(nodes)}, g_.action(*act).lhs};
  }

  // An object filter passed where an object predicate is expected reads as
  // "some object survives the filter": f becomes objExists * f.
  void coerce_filters(const SemType& f, std::vector<Node>& nodes, std::vector<TypeId>& child_types) const {
    const auto filter = g_.find_type(types::obj_filter());
    const auto pred = g_.find_type(types::obj_pred());
    const auto exists = g_.find_terminal("objExists");
    if (!filter || !pred || !exists) return;
    auto params = f.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (child_types[i + 1] != *filter || !(params[i] == g_.type(*pred))) continue;
      const TypeId compose_children[] = {*pred, *filter};
      auto compose = g_.find_production(ActionKind::Compose, compose_children);
      if (!compose) continue;
      nodes[i + 1] = Node{*compose, {Node{*exists, {}}, std::move(nodes[i + 1])}};
      child_types[i + 1] = *pred;
    }
  }

  const Grammar& g_;
  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the textual program syntax, resolving each call by type into an
/// application, a currying of the leading int argument, or a composition.
inline Program parse_text(const Grammar& g, std::string_view text, std::optional<TypeId> root = {}) {
  detail::TextParser parser(g, text);
  return make_program(parser.parse(root));
}

}  // namespace nlvr
