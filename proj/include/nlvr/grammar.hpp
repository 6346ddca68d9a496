#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nlvr {

// ---------------------------------------------------------------------------
// Type algebra
// ---------------------------------------------------------------------------

enum class Prim : std::uint8_t { Bool, Int, Color, Shape, Size, ObjSet, BoxSet };

/// A primitive type or a function type <args...:ret>. Compared structurally.
class SemType {
public:
  SemType(Prim p) : prim_(p) {}  // NOLINT(google-explicit-constructor)

  static SemType func(std::vector<SemType> args, SemType ret) {
    if (args.empty()) throw std::invalid_argument("function type needs at least one argument");
    SemType t(Prim::Bool);
    t.parts_ = std::move(args);
    t.parts_.push_back(std::move(ret));
    return t;
  }

  bool is_func() const { return !parts_.empty(); }
  Prim prim() const { return prim_; }
  std::span<const SemType> params() const { return {parts_.data(), parts_.size() - 1}; }
  const SemType& ret() const { return parts_.back(); }

  std::string str() const {
    if (!is_func()) {
      switch (prim_) {
        case Prim::Bool: return "bool";
        case Prim::Int: return "int";
        case Prim::Color: return "Color";
        case Prim::Shape: return "Shape";
        case Prim::Size: return "Size";
        case Prim::ObjSet: return "Set[Object]";
        case Prim::BoxSet: return "Set[Box]";
      }
    }
    std::string s = "<";
    auto ps = params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (i) s += ",";
      s += ps[i].str();
    }
    return s + ":" + ret().str() + ">";
  }

  friend bool operator==(const SemType& a, const SemType& b) {
    if (a.is_func() != b.is_func()) return false;
    return a.is_func() ? a.parts_ == b.parts_ : a.prim_ == b.prim_;
  }

private:
  Prim prim_;
  std::vector<SemType> parts_;  // params..., ret; empty for primitives
};

// ---------------------------------------------------------------------------
// Builtin function inventory
// ---------------------------------------------------------------------------

enum class Builtin : std::uint8_t {
  IntLiteral,
  AllObjs,
  AllBoxes,
  Black, Blue, Yellow,
  Triangle, Square, Circle,
  Small, Medium, Large,
  Top, Bottom, Above, Below,
  ObjExists,
  ObjectCountEq, ObjectCountGtEq, ObjectCountLtEq,
  ObjColorCountEq, ObjColorCountGrtEq,
  ObjShapeCountEq, ObjShapeCountGrtEq,
  BoxFilter,
  BoxExists,
  BoxCountEq, BoxCountGtEq, BoxCountLtEq,
  AndBool, OrBool, NotBool,
  // macros of the original language
  MemberColorCountGrtEq, MemberObjCountEq, MemberObjExists,
};

enum class LanguageVariant : std::uint8_t { Old, New };

inline std::string_view to_string(LanguageVariant v) { return v == LanguageVariant::Old ? "old" : "new"; }

inline std::optional<LanguageVariant> parse_variant(std::string_view s) {
  if (s == "old" || s == "OLD") return LanguageVariant::Old;
  if (s == "new" || s == "NEW") return LanguageVariant::New;
  return std::nullopt;
}

struct TerminalSpec {
  std::string name;
  SemType type;
  Builtin fn;
  int literal = 0;
};

namespace types {
inline SemType obj_set() { return Prim::ObjSet; }
inline SemType box_set() { return Prim::BoxSet; }
inline SemType obj_filter() { return SemType::func({Prim::ObjSet}, Prim::ObjSet); }
inline SemType obj_pred() { return SemType::func({Prim::ObjSet}, Prim::Bool); }
inline SemType count_pred() { return SemType::func({Prim::Int, Prim::ObjSet}, Prim::Bool); }
}  // namespace types

/// Function inventory of a language variant. Both variants share everything
/// except the box-level operators: boxFilter (new) versus member* macros (old).
inline std::vector<TerminalSpec> terminal_inventory(LanguageVariant variant) {
  using namespace types;
  std::vector<TerminalSpec> t;
  t.push_back({"allObjs", obj_set(), Builtin::AllObjs});
  t.push_back({"allBoxes", box_set(), Builtin::AllBoxes});
  for (int n = 1; n <= 9; ++n) t.push_back({std::to_string(n), Prim::Int, Builtin::IntLiteral, n});

  const std::pair<const char*, Builtin> filters[] = {
      {"black", Builtin::Black},   {"blue", Builtin::Blue},     {"yellow", Builtin::Yellow},
      {"triangle", Builtin::Triangle}, {"square", Builtin::Square}, {"circle", Builtin::Circle},
      {"small", Builtin::Small},   {"medium", Builtin::Medium}, {"large", Builtin::Large},
      {"top", Builtin::Top},       {"bottom", Builtin::Bottom}, {"above", Builtin::Above},
      {"below", Builtin::Below}};
  for (const auto& [name, fn] : filters) t.push_back({name, obj_filter(), fn});

  t.push_back({"objExists", obj_pred(), Builtin::ObjExists});
  const std::pair<const char*, Builtin> counts[] = {
      {"objectCountEq", Builtin::ObjectCountEq},         {"objectCountGtEq", Builtin::ObjectCountGtEq},
      {"objectCountLtEq", Builtin::ObjectCountLtEq},     {"objColorCountEq", Builtin::ObjColorCountEq},
      {"objColorCountGrtEq", Builtin::ObjColorCountGrtEq}, {"objShapeCountEq", Builtin::ObjShapeCountEq},
      {"objShapeCountGrtEq", Builtin::ObjShapeCountGrtEq}};
  for (const auto& [name, fn] : counts) t.push_back({name, count_pred(), fn});

  t.push_back({"boxExists", SemType::func({Prim::BoxSet}, Prim::Bool), Builtin::BoxExists});
  const auto box_count = SemType::func({Prim::Int, Prim::BoxSet}, Prim::Bool);
  t.push_back({"boxCountEq", box_count, Builtin::BoxCountEq});
  t.push_back({"boxCountGtEq", box_count, Builtin::BoxCountGtEq});
  t.push_back({"boxCountLtEq", box_count, Builtin::BoxCountLtEq});

  t.push_back({"andBool", SemType::func({Prim::Bool, Prim::Bool}, Prim::Bool), Builtin::AndBool});
  t.push_back({"orBool", SemType::func({Prim::Bool, Prim::Bool}, Prim::Bool), Builtin::OrBool});
  t.push_back({"notBool", SemType::func({Prim::Bool}, Prim::Bool), Builtin::NotBool});

  if (variant == LanguageVariant::New) {
    t.push_back({"boxFilter", SemType::func({box_set(), obj_pred()}, box_set()), Builtin::BoxFilter});
  } else {
    const auto member_count = SemType::func({Prim::Int, Prim::BoxSet}, Prim::BoxSet);
    t.push_back({"memberColorCountGrtEq", member_count, Builtin::MemberColorCountGrtEq});
    t.push_back({"memberObjCountEq", member_count, Builtin::MemberObjCountEq});
    t.push_back({"memberObjExists", SemType::func({obj_filter(), box_set()}, box_set()),
                 Builtin::MemberObjExists});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Grammar
// ---------------------------------------------------------------------------

using TypeId = std::uint16_t;
using ActionId = std::uint16_t;

enum class ActionKind : std::uint8_t {
  Terminal,  // lhs -> name
  Apply,     // lhs -> [F, args...], saturating F
  Curry,     // lhs -> [F, int], binding F's leading int argument
  Compose,   // lhs -> [*, f, g], (f * g)(s) = f(g(s))
};

struct GrammarAction {
  std::string id;  // "lhs -> rhs", the action's identity everywhere
  ActionKind kind = ActionKind::Terminal;
  TypeId lhs = 0;
  std::vector<TypeId> children;  // Apply/Curry: [F, args...]; Compose: [f, g]
  // Terminal payload
  std::string name;
  Builtin fn = Builtin::IntLiteral;
  int literal = 0;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

class Grammar {
public:
  LanguageVariant variant() const { return variant_; }
  TypeId root() const { return root_; }

  std::size_t num_types() const { return types_.size(); }
  const SemType& type(TypeId t) const { return types_[t]; }
  std::optional<TypeId> find_type(const SemType& t) const {
    for (std::size_t i = 0; i < types_.size(); ++i)
      if (types_[i] == t) return static_cast<TypeId>(i);
    return std::nullopt;
  }
  std::string type_str(TypeId t) const { return types_[t].str(); }

  std::size_t size() const { return actions_.size(); }
  const GrammarAction& action(ActionId a) const { return actions_[a]; }
  const std::vector<GrammarAction>& actions() const { return actions_; }
  /// Actions whose left-hand side is `t`, ascending by id.
  std::span<const ActionId> expansions(TypeId t) const { return by_lhs_[t]; }

  std::optional<ActionId> find_action(std::string_view id) const {
    auto it = std::lower_bound(actions_.begin(), actions_.end(), id,
                               [](const GrammarAction& a, std::string_view s) { return a.id < s; });
    if (it == actions_.end() || it->id != id) return std::nullopt;
    return static_cast<ActionId>(it - actions_.begin());
  }
  std::optional<ActionId> find_terminal(std::string_view name) const {
    auto it = terminal_by_name_.find(std::string(name));
    if (it == terminal_by_name_.end()) return std::nullopt;
    return it->second;
  }
  /// Non-terminal production with the given lhs, kind and children, if present.
  std::optional<ActionId> find_production(ActionKind kind, std::span<const TypeId> children) const {
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      const auto& a = actions_[i];
      if (a.kind == kind && std::ranges::equal(a.children, children)) return static_cast<ActionId>(i);
    }
    return std::nullopt;
  }

  /// Fewest actions needed to complete a derivation of type `t`.
  int min_length(TypeId t) const { return min_len_[t]; }

  friend Grammar build_grammar(LanguageVariant variant);

private:
  LanguageVariant variant_ = LanguageVariant::New;
  TypeId root_ = 0;
  std::vector<SemType> types_;
  std::vector<GrammarAction> actions_;
  std::vector<std::vector<ActionId>> by_lhs_;
  std::map<std::string, ActionId> terminal_by_name_;
  std::vector<int> min_len_;
};

namespace detail {

inline std::vector<int> compute_min_lengths(const Grammar& g, const std::vector<bool>* allowed) {
  std::vector<int> len(g.num_types(), kUnreachable);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (allowed && !(*allowed)[i]) continue;
      const auto& a = g.action(static_cast<ActionId>(i));
      long total = 1;
      for (TypeId c : a.children) total += len[c];
      if (total < len[a.lhs]) {
        len[a.lhs] = static_cast<int>(total);
        changed = true;
      }
    }
  }
  return len;
}

inline std::string production_rhs(const Grammar& g, ActionKind kind, const std::vector<TypeId>& children) {
  std::string s = "[";
  if (kind == ActionKind::Compose) s += "*, ";
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (i) s += ", ";
    s += g.type_str(children[i]);
  }
  return s + "]";
}

}  // namespace detail

/// Builds the typed action grammar for a language variant: one terminal action
/// per inventory entry, one saturating application per function type, the
/// int-currying of object count predicates and the two composition actions.
inline Grammar build_grammar(LanguageVariant variant) {
  Grammar g;
  g.variant_ = variant;
  auto intern = [&g](const SemType& t) -> TypeId {
    if (auto id = g.find_type(t)) return *id;
    g.types_.push_back(t);
    return static_cast<TypeId>(g.types_.size() - 1);
  };
  for (Prim p : {Prim::Bool, Prim::Int, Prim::Color, Prim::Shape, Prim::Size, Prim::ObjSet, Prim::BoxSet})
    intern(p);
  g.root_ = intern(Prim::Bool);

  std::vector<GrammarAction> acts;
  std::vector<SemType> func_types;
  for (auto& spec : terminal_inventory(variant)) {
    GrammarAction a;
    a.kind = ActionKind::Terminal;
    a.lhs = intern(spec.type);
    a.name = spec.name;
    a.fn = spec.fn;
    a.literal = spec.literal;
    a.id = spec.type.str() + " -> " + spec.name;
    acts.push_back(std::move(a));
    if (spec.type.is_func() && std::ranges::find(func_types, spec.type) == func_types.end())
      func_types.push_back(spec.type);
  }
  // composed and curried functions are applied like any other function value
  for (const auto& t : {types::obj_filter(), types::obj_pred()})
    if (std::ranges::find(func_types, t) == func_types.end()) func_types.push_back(t);

  auto add_production = [&](ActionKind kind, const SemType& lhs, const std::vector<SemType>& children) {
    GrammarAction a;
    a.kind = kind;
    a.lhs = intern(lhs);
    for (const auto& c : children) a.children.push_back(intern(c));
    acts.push_back(std::move(a));
  };
  for (const auto& f : func_types) {
    std::vector<SemType> children{f};
    for (const auto& p : f.params()) children.push_back(p);
    add_production(ActionKind::Apply, f.ret(), children);
  }
  add_production(ActionKind::Curry, types::obj_pred(), {types::count_pred(), Prim::Int});
  add_production(ActionKind::Compose, types::obj_pred(), {types::obj_pred(), types::obj_filter()});
  add_production(ActionKind::Compose, types::obj_filter(), {types::obj_filter(), types::obj_filter()});

  for (auto& a : acts)
    if (a.kind != ActionKind::Terminal)
      a.id = g.type_str(a.lhs) + " -> " + detail::production_rhs(g, a.kind, a.children);

  std::ranges::sort(acts, {}, &GrammarAction::id);
  g.actions_ = std::move(acts);
  g.by_lhs_.assign(g.types_.size(), {});
  for (std::size_t i = 0; i < g.actions_.size(); ++i) {
    const auto& a = g.actions_[i];
    g.by_lhs_[a.lhs].push_back(static_cast<ActionId>(i));
    if (a.kind == ActionKind::Terminal) g.terminal_by_name_[a.name] = static_cast<ActionId>(i);
  }
  g.min_len_ = detail::compute_min_lengths(g, nullptr);
  return g;
}

// ---------------------------------------------------------------------------
// Action spaces: a grammar with some terminals switched off
// ---------------------------------------------------------------------------

/// The set of actions a search may use. Productions (Apply/Curry/Compose) are
/// always available; terminals can be masked out.
class ActionSpace {
public:
  explicit ActionSpace(const Grammar& g) : g_(&g), allowed_(g.size(), true) { refresh(); }
  ActionSpace(const Grammar& g, std::vector<bool> allowed_terminals) : g_(&g), allowed_(std::move(allowed_terminals)) {
    if (allowed_.size() != g.size()) throw std::invalid_argument("ActionSpace: mask size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.action(static_cast<ActionId>(i)).kind != ActionKind::Terminal) allowed_[i] = true;
    refresh();
  }

  const Grammar& grammar() const { return *g_; }
  bool allowed(ActionId a) const { return allowed_[a]; }
  int min_length(TypeId t) const { return min_len_[t]; }
  int min_completion(ActionId a) const { return completion_[a]; }

private:
  void refresh() {
    min_len_ = detail::compute_min_lengths(*g_, &allowed_);
    completion_.assign(g_->size(), kUnreachable);
    for (std::size_t i = 0; i < g_->size(); ++i) {
      if (!allowed_[i]) continue;
      long total = 1;
      for (TypeId c : g_->action(static_cast<ActionId>(i)).children) total += min_len_[c];
      completion_[i] = static_cast<int>(std::min<long>(total, kUnreachable));
    }
  }

  const Grammar* g_;
  std::vector<bool> allowed_;
  std::vector<int> min_len_;
  std::vector<int> completion_;  // min actions to finish a subtree opened by this action
};

}  // namespace nlvr
