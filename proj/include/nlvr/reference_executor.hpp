#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "grammar.hpp"
#include "program.hpp"
#include "scene.hpp"

namespace nlvr::reference {

// Naive interpreter used as a test oracle for Executor. Sets are explicit
// vectors of object records, functions are closures, and builtins are looked
// up by their surface name.

struct ObjRef {
  int box;
  int index;
  Obj obj;
};

struct Value;
using Fn = std::function<Value(const std::vector<Value>&)>;
using ObjList = std::vector<ObjRef>;
using BoxList = std::vector<int>;

struct Value {
  std::variant<bool, int, ObjList, BoxList, std::shared_ptr<Fn>> v;

  bool as_bool() const { return std::get<bool>(v); }
  int as_int() const { return std::get<int>(v); }
  const ObjList& as_objs() const { return std::get<ObjList>(v); }
  const BoxList& as_boxes() const { return std::get<BoxList>(v); }
  Value call(const std::vector<Value>& args) const { return (*std::get<std::shared_ptr<Fn>>(v))(args); }
};

inline Value fn_value(Fn f) { return Value{std::make_shared<Fn>(std::move(f))}; }

class Interpreter {
public:
  Interpreter(const Grammar& g, const Scene& scene) : g_(g), scene_(scene) {}

  bool run(const Program& p) {
    ObjList everything;
    for (int b = 0; b < static_cast<int>(scene_.boxes.size()); ++b) {
      const auto& box = scene_.boxes[b];
      for (int i = 0; i < static_cast<int>(box.objects.size()); ++i) everything.push_back({b, i, box.objects[i]});
    }
    universe_ = std::make_shared<ObjList>(std::move(everything));
    return eval(p.root).as_bool();
  }

private:
  Value eval(const Node& n) {
    const auto& a = g_.action(n.action);
    if (a.kind == ActionKind::Terminal) return terminal(a.name);
    if (a.kind == ActionKind::Apply) {
      Value f = eval(n.children[0]);
      std::vector<Value> args;
      for (std::size_t i = 1; i < n.children.size(); ++i) args.push_back(eval(n.children[i]));
      return f.call(args);
    }
    if (a.kind == ActionKind::Curry) {
      Value f = eval(n.children[0]);
      Value bound = eval(n.children[1]);
      return fn_value([f, bound](const std::vector<Value>& rest) {
        std::vector<Value> all{bound};
        all.insert(all.end(), rest.begin(), rest.end());
        return f.call(all);
      });
    }
    Value f = eval(n.children[0]);
    Value g = eval(n.children[1]);
    return fn_value([f, g](const std::vector<Value>& args) { return f.call({g.call(args)}); });
  }

  ObjList box_contents(int b) const {
    ObjList out;
    const auto& box = scene_.boxes[b];
    for (int i = 0; i < static_cast<int>(box.objects.size()); ++i) out.push_back({b, i, box.objects[i]});
    return out;
  }

  static Value keep(const ObjList& in, const std::function<bool(const Obj&)>& pred) {
    ObjList out;
    for (const auto& o : in)
      if (pred(o.obj)) out.push_back(o);
    return Value{out};
  }

  static int count_distinct(const ObjList& objs, const std::function<int(const Obj&)>& key) {
    std::set<int> seen;
    for (const auto& o : objs) seen.insert(key(o.obj));
    return static_cast<int>(seen.size());
  }

  Fn relative(bool want_above) {
    // reads the universe at call time so boxFilter's rebinding applies
    return [this, want_above](const std::vector<Value>& args) {
      const ObjList& anchors = args[0].as_objs();
      ObjList out;
      for (const auto& o : *universe_) {
        bool hit = false;
        for (const auto& a : anchors) {
          if (a.box != o.box) continue;
          if (want_above ? o.obj.y < a.obj.y : o.obj.y > a.obj.y) hit = true;
        }
        if (hit) out.push_back(o);
      }
      return Value{out};
    };
  }

  Fn extreme(bool want_top) const {
    const Scene* scene = &scene_;
    return [scene, want_top](const std::vector<Value>& args) {
      ObjList out;
      for (const auto& o : args[0].as_objs()) {
        bool extreme = true;
        for (const auto& other : scene->boxes[o.box].objects)
          if (want_top ? other.y < o.obj.y : other.y > o.obj.y) extreme = false;
        if (extreme) out.push_back(o);
      }
      return Value{out};
    };
  }

  Fn box_select(std::function<bool(const ObjList&)> keep_box) {
    return [this, keep_box](const std::vector<Value>& args) {
      BoxList out;
      for (int b : args.back().as_boxes())
        if (keep_box(box_contents(b))) out.push_back(b);
      return Value{out};
    };
  }

  // Applies a Set[Object] function with allObjs rebound to one box.
  bool within_box(const Value& f, int b, const std::function<bool(const Value&)>& test) {
    auto saved = universe_;
    universe_ = std::make_shared<ObjList>(box_contents(b));
    bool r = test(f.call({Value{*universe_}}));
    universe_ = saved;
    return r;
  }

  Value terminal(const std::string& name) {
    if (name.size() == 1 && name[0] >= '0' && name[0] <= '9') return Value{name[0] - '0'};
    if (name == "allObjs") return Value{*universe_};
    if (name == "allBoxes") {
      BoxList all;
      for (int b = 0; b < static_cast<int>(scene_.boxes.size()); ++b) all.push_back(b);
      return Value{all};
    }
    for (int c = 0; c < 3; ++c)
      if (name == kColorNames[c])
        return fn_value([c](const std::vector<Value>& a) {
          return keep(a[0].as_objs(), [c](const Obj& o) { return static_cast<int>(o.color) == c; });
        });
    for (int s = 0; s < 3; ++s)
      if (name == kShapeNames[s])
        return fn_value([s](const std::vector<Value>& a) {
          return keep(a[0].as_objs(), [s](const Obj& o) { return static_cast<int>(o.shape) == s; });
        });
    for (int s = 0; s < 3; ++s)
      if (name == kSizeNames[s])
        return fn_value([s](const std::vector<Value>& a) {
          return keep(a[0].as_objs(), [s](const Obj& o) { return static_cast<int>(o.size) == s; });
        });
    if (name == "above") return fn_value(relative(true));
    if (name == "below") return fn_value(relative(false));
    if (name == "top") return fn_value(extreme(true));
    if (name == "bottom") return fn_value(extreme(false));
    if (name == "objExists") return fn_value([](const std::vector<Value>& a) { return Value{!a[0].as_objs().empty()}; });
    if (name == "boxExists") return fn_value([](const std::vector<Value>& a) { return Value{!a[0].as_boxes().empty()}; });

    auto compare = [](const std::string& suffix) -> std::function<bool(int, int)> {
      if (suffix == "Eq") return [](int x, int n) { return x == n; };
      if (suffix == "GtEq" || suffix == "GrtEq") return [](int x, int n) { return x >= n; };
      if (suffix == "LtEq") return [](int x, int n) { return x <= n; };
      throw std::logic_error("bad comparison suffix " + suffix);
    };
    auto strip = [&](const std::string& prefix) -> std::optional<std::string> {
      if (name.rfind(prefix, 0) == 0) return name.substr(prefix.size());
      return std::nullopt;
    };
    if (auto suf = strip("objectCount")) {
      auto cmp = compare(*suf);
      return fn_value([cmp](const std::vector<Value>& a) {
        return Value{cmp(static_cast<int>(a[1].as_objs().size()), a[0].as_int())};
      });
    }
    if (auto suf = strip("objColorCount")) {
      auto cmp = compare(*suf);
      return fn_value([cmp](const std::vector<Value>& a) {
        return Value{cmp(count_distinct(a[1].as_objs(), [](const Obj& o) { return static_cast<int>(o.color); }),
                         a[0].as_int())};
      });
    }
    if (auto suf = strip("objShapeCount")) {
      auto cmp = compare(*suf);
      return fn_value([cmp](const std::vector<Value>& a) {
        return Value{cmp(count_distinct(a[1].as_objs(), [](const Obj& o) { return static_cast<int>(o.shape); }),
                         a[0].as_int())};
      });
    }
    if (auto suf = strip("boxCount")) {
      auto cmp = compare(*suf);
      return fn_value([cmp](const std::vector<Value>& a) {
        return Value{cmp(static_cast<int>(a[1].as_boxes().size()), a[0].as_int())};
      });
    }
    if (name == "andBool") return fn_value([](const std::vector<Value>& a) { return Value{a[0].as_bool() && a[1].as_bool()}; });
    if (name == "orBool") return fn_value([](const std::vector<Value>& a) { return Value{a[0].as_bool() || a[1].as_bool()}; });
    if (name == "notBool") return fn_value([](const std::vector<Value>& a) { return Value{!a[0].as_bool()}; });
    if (name == "boxFilter")
      return fn_value([this](const std::vector<Value>& a) {
        BoxList out;
        for (int b : a[0].as_boxes())
          if (within_box(a[1], b, [](const Value& r) { return r.as_bool(); })) out.push_back(b);
        return Value{out};
      });
    if (name == "memberObjExists")
      return fn_value([this](const std::vector<Value>& a) {
        BoxList out;
        for (int b : a[1].as_boxes())
          if (within_box(a[0], b, [](const Value& r) { return !r.as_objs().empty(); })) out.push_back(b);
        return Value{out};
      });
    if (name == "memberObjCountEq")
      return fn_value([this](const std::vector<Value>& a) {
        int n = a[0].as_int();
        return box_select([n](const ObjList& objs) { return static_cast<int>(objs.size()) == n; })(a);
      });
    if (name == "memberColorCountGrtEq")
      return fn_value([this](const std::vector<Value>& a) {
        int n = a[0].as_int();
        return box_select([n](const ObjList& objs) {
          return count_distinct(objs, [](const Obj& o) { return static_cast<int>(o.color); }) >= n;
        })(a);
      });
    throw std::logic_error("reference interpreter: no builtin named '" + name + "'");
  }

  const Grammar& g_;
  const Scene& scene_;
  std::shared_ptr<ObjList> universe_;
};

inline bool reference_execute(const Grammar& g, const Program& p, const Scene& scene) {
  return Interpreter(g, scene).run(p);
}

}  // namespace nlvr::reference
