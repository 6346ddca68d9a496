#pragma once

#include <algorithm>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "nlvr.hpp"

namespace nlvr::testing {

inline Obj obj(int x, int y, Color c, Shape s = Shape::Square, Size z = Size::Small) { return Obj{x, y, c, s, z}; }

/// Scene from three explicit boxes.
inline Scene scene_of(std::vector<Obj> b0, std::vector<Obj> b1, std::vector<Obj> b2, std::string id = "s") {
  Scene s;
  s.id = std::move(id);
  s.boxes = {Box{std::move(b0)}, Box{std::move(b1)}, Box{std::move(b2)}};
  return s;
}

inline Scene random_scene(Rng& rng, int max_objects = kMaxObjectsPerBox) {
  GeneratorConfig cfg;
  cfg.min_objects = 1;
  cfg.max_objects = max_objects;
  return nlvr::random_scene(rng, cfg, "r");
}

/// Smallest tree depth that completes each type.
inline std::vector<int> min_depths(const Grammar& g) {
  std::vector<int> d(g.num_types(), kUnreachable);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& a : g.actions()) {
      int depth = 1;
      for (TypeId c : a.children) depth = std::max(depth, d[c] == kUnreachable ? kUnreachable : d[c] + 1);
      if (depth < d[a.lhs]) {
        d[a.lhs] = depth;
        changed = true;
      }
    }
  }
  return d;
}

/// Uniformly chooses among the actions that still fit in `depth` levels.
class RandomProgramGen {
public:
  explicit RandomProgramGen(const Grammar& g) : g_(g), depth_(min_depths(g)) {}

  Node node(TypeId t, int depth, Rng& rng) const {
    std::vector<ActionId> fits;
    for (ActionId a : g_.expansions(t)) {
      int need = 1;
      for (TypeId c : g_.action(a).children) need = std::max(need, depth_[c] + 1);
      if (need <= depth) fits.push_back(a);
    }
    const ActionId a = fits[std::uniform_int_distribution<std::size_t>(0, fits.size() - 1)(rng)];
    Node n{a, {}};
    for (TypeId c : g_.action(a).children) n.children.push_back(node(c, depth - 1, rng));
    return n;
  }

  Program program(int max_depth, Rng& rng) const { return make_program(node(g_.root(), max_depth, rng)); }

private:
  const Grammar& g_;
  std::vector<int> depth_;
};

inline int tree_depth(const Node& n) {
  int d = 0;
  for (const auto& c : n.children) d = std::max(d, tree_depth(c));
  return d + 1;
}

inline ScorerParams random_params(const Grammar& g, std::span<const std::string> tokens, Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ScorerParams p = ScorerParams::zeros(g);
  for (auto& w : p.rule) w = u(rng);
  for (auto& w : p.prev) w = u(rng);
  for (const auto& t : tokens)
    for (auto& w : p.align_row(t)) w = u(rng);
  return p;
}

inline double dot(const ScorerParams& a, const ScorerParams& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rule.size(); ++i) s += a.rule[i] * b.rule[i];
  for (std::size_t i = 0; i < a.prev.size(); ++i) s += a.prev[i] * b.prev[i];
  for (const auto& [tok, row] : a.align)
    if (const auto* other = b.find_align(tok))
      for (std::size_t i = 0; i < row.size(); ++i) s += row[i] * (*other)[i];
  return s;
}

/// Central difference of f along direction v, step h.
template <class F>
double directional_fd(const ScorerParams& at, const ScorerParams& v, F&& f, double h = 1e-5) {
  ScorerParams plus = at, minus = at;
  plus.add_scaled(v, h);
  minus.add_scaled(v, -h);
  return (f(plus) - f(minus)) / (2 * h);
}

/// |a - b| relative to the larger magnitude; derivatives below `floor` are
/// compared on an absolute scale of `floor`.
inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nlvr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nlvr::testing
