#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>

#include "grammar.hpp"
#include "program.hpp"
#include "scene.hpp"

namespace nlvr {

using ObjMask = std::uint32_t;  // bit (box * 8 + i) selects object i of box `box`
using BoxMask = std::uint32_t;  // bit b selects box b

/// Bitmask view of a scene, built once and shared by every program executed on it.
class SceneIndex {
public:
  explicit SceneIndex(const Scene& scene) {
    for (int b = 0; b < static_cast<int>(scene.boxes.size()) && b < kBoxesPerScene; ++b) {
      const auto& objs = scene.boxes[b].objects;
      int min_y = kCoordMax + 1, max_y = -1;
      for (const auto& o : objs) {
        min_y = std::min(min_y, o.y);
        max_y = std::max(max_y, o.y);
      }
      for (int i = 0; i < static_cast<int>(objs.size()) && i < kMaxObjectsPerBox; ++i) {
        const int bit = b * kMaxObjectsPerBox + i;
        const ObjMask m = ObjMask{1} << bit;
        const auto& o = objs[i];
        box_objs_[b] |= m;
        color_[static_cast<int>(o.color)] |= m;
        shape_[static_cast<int>(o.shape)] |= m;
        size_[static_cast<int>(o.size)] |= m;
        y_[bit] = o.y;
        box_of_[bit] = b;
        if (o.y == min_y) top_ |= m;
        if (o.y == max_y) bottom_ |= m;
      }
      all_objs_ |= box_objs_[b];
    }
    for (int bit = 0; bit < kSlots; ++bit) {
      if (!(all_objs_ >> bit & 1)) continue;
      for (int other = 0; other < kSlots; ++other) {
        if (!(box_objs_[box_of_[bit]] >> other & 1)) continue;
        if (y_[other] > y_[bit]) lower_[bit] |= ObjMask{1} << other;
        if (y_[other] < y_[bit]) higher_[bit] |= ObjMask{1} << other;
      }
    }
  }

  ObjMask all_objects() const { return all_objs_; }
  ObjMask box_objects(int b) const { return box_objs_[b]; }
  BoxMask all_boxes() const { return (BoxMask{1} << kBoxesPerScene) - 1; }
  ObjMask color(Color c) const { return color_[static_cast<int>(c)]; }
  ObjMask shape(Shape s) const { return shape_[static_cast<int>(s)]; }
  ObjMask size(Size s) const { return size_[static_cast<int>(s)]; }
  ObjMask top() const { return top_; }
  ObjMask bottom() const { return bottom_; }

  /// Objects in `universe` lying above some member of `s` in the same box.
  ObjMask above(ObjMask s, ObjMask universe) const {
    ObjMask out = 0;
    for (ObjMask u = universe; u; u &= u - 1) {
      int bit = std::countr_zero(u);
      if (lower_[bit] & s) out |= ObjMask{1} << bit;
    }
    return out;
  }
  ObjMask below(ObjMask s, ObjMask universe) const {
    ObjMask out = 0;
    for (ObjMask u = universe; u; u &= u - 1) {
      int bit = std::countr_zero(u);
      if (higher_[bit] & s) out |= ObjMask{1} << bit;
    }
    return out;
  }
  int distinct_colors(ObjMask s) const {
    int n = 0;
    for (auto m : color_) n += (m & s) != 0;
    return n;
  }
  int distinct_shapes(ObjMask s) const {
    int n = 0;
    for (auto m : shape_) n += (m & s) != 0;
    return n;
  }

private:
  static constexpr int kSlots = kBoxesPerScene * kMaxObjectsPerBox;
  ObjMask all_objs_ = 0;
  std::array<ObjMask, kBoxesPerScene> box_objs_{};
  std::array<ObjMask, 3> color_{}, shape_{}, size_{};
  ObjMask top_ = 0, bottom_ = 0;
  std::array<int, kSlots> y_{};
  std::array<int, kSlots> box_of_{};
  std::array<ObjMask, kSlots> lower_{}, higher_{};  // same-box objects with larger / smaller y
};

/// Evaluates programs against a scene. Every value is packed into 32 bits:
/// bool as 0/1, ints as themselves, object and box sets as masks. Function
/// values are never materialized; a function-typed subtree is applied to its
/// arguments directly.
class Executor {
public:
  Executor(const Grammar& g, const SceneIndex& scene) : g_(g), s_(scene) {}

  bool run(const Program& p) const { return eval(p.root, s_.all_objects()) != 0; }

  std::uint32_t eval(const Node& n, ObjMask universe) const {
    const auto& a = g_.action(n.action);
    switch (a.kind) {
      case ActionKind::Terminal:
        if (a.fn == Builtin::IntLiteral) return static_cast<std::uint32_t>(a.literal);
        if (a.fn == Builtin::AllObjs) return universe;
        if (a.fn == Builtin::AllBoxes) return s_.all_boxes();
        return 0;  // bare function values are only reached through apply()
      case ActionKind::Apply: {
        if (auto ho = higher_order(n, universe)) return *ho;
        std::array<std::uint32_t, 3> args{};
        const std::size_t argc = n.children.size() - 1;
        for (std::size_t i = 0; i < argc; ++i) args[i] = eval(n.children[i + 1], universe);
        return apply(n.children[0], std::span(args.data(), argc), universe);
      }
      case ActionKind::Curry:
      case ActionKind::Compose:
        return 0;
    }
    return 0;
  }

  std::uint32_t apply(const Node& fn, std::span<const std::uint32_t> args, ObjMask universe) const {
    const auto& a = g_.action(fn.action);
    if (a.kind == ActionKind::Curry) {
      std::array<std::uint32_t, 3> full{eval(fn.children[1], universe)};
      for (std::size_t i = 0; i < args.size(); ++i) full[i + 1] = args[i];
      return apply(fn.children[0], std::span(full.data(), args.size() + 1), universe);
    }
    if (a.kind == ActionKind::Compose) {
      std::uint32_t inner = apply(fn.children[1], args, universe);
      return apply(fn.children[0], std::span(&inner, 1), universe);
    }
    if (a.kind == ActionKind::Apply) {
      // no function-returning functions in the inventory
      return 0;
    }
    return builtin(a.fn, args, universe);
  }

private:
  std::uint32_t builtin(Builtin fn, std::span<const std::uint32_t> args, ObjMask universe) const {
    auto cmp_eq = [](int lhs, std::uint32_t n) -> std::uint32_t { return lhs == static_cast<int>(n); };
    auto cmp_ge = [](int lhs, std::uint32_t n) -> std::uint32_t { return lhs >= static_cast<int>(n); };
    auto cmp_le = [](int lhs, std::uint32_t n) -> std::uint32_t { return lhs <= static_cast<int>(n); };
    switch (fn) {
      case Builtin::Black: return args[0] & s_.color(Color::Black);
      case Builtin::Blue: return args[0] & s_.color(Color::Blue);
      case Builtin::Yellow: return args[0] & s_.color(Color::Yellow);
      case Builtin::Triangle: return args[0] & s_.shape(Shape::Triangle);
      case Builtin::Square: return args[0] & s_.shape(Shape::Square);
      case Builtin::Circle: return args[0] & s_.shape(Shape::Circle);
      case Builtin::Small: return args[0] & s_.size(Size::Small);
      case Builtin::Medium: return args[0] & s_.size(Size::Medium);
      case Builtin::Large: return args[0] & s_.size(Size::Large);
      case Builtin::Top: return args[0] & s_.top();
      case Builtin::Bottom: return args[0] & s_.bottom();
      case Builtin::Above: return s_.above(args[0], universe);
      case Builtin::Below: return s_.below(args[0], universe);
      case Builtin::ObjExists: return args[0] != 0;
      case Builtin::ObjectCountEq: return cmp_eq(std::popcount(args[1]), args[0]);
      case Builtin::ObjectCountGtEq: return cmp_ge(std::popcount(args[1]), args[0]);
      case Builtin::ObjectCountLtEq: return cmp_le(std::popcount(args[1]), args[0]);
      case Builtin::ObjColorCountEq: return cmp_eq(s_.distinct_colors(args[1]), args[0]);
      case Builtin::ObjColorCountGrtEq: return cmp_ge(s_.distinct_colors(args[1]), args[0]);
      case Builtin::ObjShapeCountEq: return cmp_eq(s_.distinct_shapes(args[1]), args[0]);
      case Builtin::ObjShapeCountGrtEq: return cmp_ge(s_.distinct_shapes(args[1]), args[0]);
      case Builtin::BoxExists: return args[0] != 0;
      case Builtin::BoxCountEq: return cmp_eq(std::popcount(args[1]), args[0]);
      case Builtin::BoxCountGtEq: return cmp_ge(std::popcount(args[1]), args[0]);
      case Builtin::BoxCountLtEq: return cmp_le(std::popcount(args[1]), args[0]);
      case Builtin::AndBool: return args[0] & args[1];
      case Builtin::OrBool: return args[0] | args[1];
      case Builtin::NotBool: return args[0] ^ 1u;
      case Builtin::MemberColorCountGrtEq:
        return filter_boxes(args[1], [&](ObjMask objs) { return s_.distinct_colors(objs) >= static_cast<int>(args[0]); });
      case Builtin::MemberObjCountEq:
        return filter_boxes(args[1], [&](ObjMask objs) { return std::popcount(objs) == static_cast<int>(args[0]); });
      default: return 0;
    }
  }

  template <typename Pred>
  BoxMask filter_boxes(BoxMask boxes, Pred pred) const {
    BoxMask out = 0;
    for (int b = 0; b < kBoxesPerScene; ++b)
      if ((boxes >> b & 1) && pred(s_.box_objects(b))) out |= BoxMask{1} << b;
    return out;
  }

  // boxFilter and memberObjExists take a function argument, which is applied
  // per box with allObjs rebound to that box's objects.
  std::optional<std::uint32_t> higher_order(const Node& n, ObjMask universe) const {
    const auto& head = g_.action(n.children[0].action);
    if (head.kind != ActionKind::Terminal) return std::nullopt;
    if (head.fn == Builtin::BoxFilter) {
      const Node& pred = n.children[2];
      return filter_boxes(eval(n.children[1], universe), [&](ObjMask objs) {
        std::uint32_t arg = objs;
        return apply(pred, std::span(&arg, 1), objs) != 0;
      });
    }
    if (head.fn == Builtin::MemberObjExists) {
      const Node& filter = n.children[1];
      return filter_boxes(eval(n.children[2], universe), [&](ObjMask objs) {
        std::uint32_t arg = objs;
        return apply(filter, std::span(&arg, 1), objs) != 0;
      });
    }
    return std::nullopt;
  }

  const Grammar& g_;
  const SceneIndex& s_;
};

inline bool execute(const Grammar& g, const Program& p, const SceneIndex& scene) {
  return Executor(g, scene).run(p);
}

inline bool execute(const Grammar& g, const Program& p, const Scene& scene) {
  SceneIndex index(scene);
  return Executor(g, index).run(p);
}

}  // namespace nlvr
