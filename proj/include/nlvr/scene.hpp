#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace nlvr {

/// Raised for malformed input data (corpus, pairs, checkpoints, program text).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Color : std::uint8_t { Black, Blue, Yellow };
enum class Shape : std::uint8_t { Triangle, Square, Circle };
enum class Size : std::uint8_t { Small, Medium, Large };

inline constexpr std::array<std::string_view, 3> kColorNames{"black", "blue", "yellow"};
inline constexpr std::array<std::string_view, 3> kShapeNames{"triangle", "square", "circle"};
inline constexpr std::array<std::string_view, 3> kSizeNames{"small", "medium", "large"};

inline constexpr int kBoxesPerScene = 3;
inline constexpr int kMaxObjectsPerBox = 8;
inline constexpr int kCoordMax = 99;

inline std::string_view to_string(Color c) { return kColorNames[static_cast<int>(c)]; }
inline std::string_view to_string(Shape s) { return kShapeNames[static_cast<int>(s)]; }
inline std::string_view to_string(Size s) { return kSizeNames[static_cast<int>(s)]; }

namespace detail {
template <typename Enum, std::size_t N>
std::optional<Enum> lookup_enum(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  return std::nullopt;
}
}  // namespace detail

inline std::optional<Color> parse_color(std::string_view s) { return detail::lookup_enum<Color>(kColorNames, s); }
inline std::optional<Shape> parse_shape(std::string_view s) { return detail::lookup_enum<Shape>(kShapeNames, s); }
inline std::optional<Size> parse_size(std::string_view s) { return detail::lookup_enum<Size>(kSizeNames, s); }

// y grows downward: smaller y is higher in the box.
struct Obj {
  int x = 0;
  int y = 0;
  Color color = Color::Black;
  Shape shape = Shape::Square;
  Size size = Size::Small;

  friend bool operator==(const Obj&, const Obj&) = default;
};

struct Box {
  std::vector<Obj> objects;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Scene {
  std::string id;
  std::vector<Box> boxes;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct LabeledScene {
  Scene scene;
  bool denotation = false;

  friend bool operator==(const LabeledScene&, const LabeledScene&) = default;
};

struct Example {
  std::string id;
  std::string text;                 // raw utterance as stored in the corpus
  std::vector<std::string> tokens;  // tokenize(text)
  std::vector<LabeledScene> scenes;

  friend bool operator==(const Example&, const Example&) = default;
};

using Corpus = std::vector<Example>;

/// Lowercases, splits on whitespace and strips leading/trailing punctuation
/// from each token. Digits stay as digit tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    while (b < e && is_punct(cur[b])) ++b;
    while (e > b && is_punct(cur[e - 1])) --e;
    if (e > b) out.emplace_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

/// Throws DataError naming `where` when the scene breaks the 3-box / 1..8-object rules.
inline void validate_scene(const Scene& scene, const std::string& where) {
  if (scene.boxes.size() != kBoxesPerScene)
    throw DataError(where + ": scene has " + std::to_string(scene.boxes.size()) + " boxes, expected 3");
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const auto& objs = scene.boxes[b].objects;
    if (objs.empty() || objs.size() > kMaxObjectsPerBox)
      throw DataError(where + ": box " + std::to_string(b) + " has " + std::to_string(objs.size()) +
                      " objects, expected 1-8");
    for (const auto& o : objs)
      if (o.x < 0 || o.x > kCoordMax || o.y < 0 || o.y > kCoordMax)
        throw DataError(where + ": box " + std::to_string(b) + " has an object outside [0,99]");
  }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Obj& o) {
  return nlohmann::json{{"x", o.x},
                        {"y", o.y},
                        {"color", std::string(to_string(o.color))},
                        {"shape", std::string(to_string(o.shape))},
                        {"size", std::string(to_string(o.size))}};
}

inline nlohmann::json boxes_to_json(const Scene& scene) {
  auto boxes = nlohmann::json::array();
  for (const auto& box : scene.boxes) {
    auto objs = nlohmann::json::array();
    for (const auto& o : box.objects) objs.push_back(to_json(o));
    boxes.push_back(std::move(objs));
  }
  return boxes;
}

inline nlohmann::json to_json(const Example& ex) {
  auto scenes = nlohmann::json::array();
  for (const auto& ls : ex.scenes) {
    nlohmann::json s{{"denotation", ls.denotation}, {"boxes", boxes_to_json(ls.scene)}};
    if (!ls.scene.id.empty()) s["id"] = ls.scene.id;
    scenes.push_back(std::move(s));
  }
  return nlohmann::json{{"id", ex.id}, {"utterance", ex.text}, {"scenes", std::move(scenes)}};
}

inline nlohmann::json to_json(const Corpus& corpus) {
  auto arr = nlohmann::json::array();
  for (const auto& ex : corpus) arr.push_back(to_json(ex));
  return arr;
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline Obj obj_from_json(const nlohmann::json& j, const std::string& where) {
  Obj o;
  const auto& x = require(j, "x", where);
  const auto& y = require(j, "y", where);
  if (!x.is_number_integer() || !y.is_number_integer())
    throw DataError(where + ": x/y must be integers");
  o.x = x.get<int>();
  o.y = y.get<int>();
  auto enum_field = [&](const char* key, auto parse) {
    const auto& v = require(j, key, where);
    if (!v.is_string()) throw DataError(where + ": field '" + key + "' must be a string");
    auto parsed = parse(v.template get<std::string>());
    if (!parsed) throw DataError(where + ": bad " + key + " '" + v.template get<std::string>() + "'");
    return *parsed;
  };
  o.color = enum_field("color", parse_color);
  o.shape = enum_field("shape", parse_shape);
  o.size = enum_field("size", parse_size);
  return o;
}

}  // namespace detail

/// Parses the "boxes" array of a scene. Does not validate box counts.
inline Scene scene_from_json(const nlohmann::json& boxes, const std::string& where) {
  if (!boxes.is_array()) throw DataError(where + ": 'boxes' must be an array");
  Scene scene;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const auto& jb = boxes[b];
    if (!jb.is_array()) throw DataError(where + ": box " + std::to_string(b) + " must be an array");
    Box box;
    for (std::size_t i = 0; i < jb.size(); ++i)
      box.objects.push_back(detail::obj_from_json(
          jb[i], where + " box " + std::to_string(b) + " object " + std::to_string(i)));
    scene.boxes.push_back(std::move(box));
  }
  return scene;
}

inline Example example_from_json(const nlohmann::json& j, std::size_t index) {
  std::string where = "example #" + std::to_string(index);
  if (!j.is_object()) throw DataError(where + ": expected an object");
  const auto& id = detail::require(j, "id", where);
  if (!id.is_string()) throw DataError(where + ": 'id' must be a string");
  Example ex;
  ex.id = id.get<std::string>();
  where = "example '" + ex.id + "'";
  const auto& utt = detail::require(j, "utterance", where);
  if (!utt.is_string()) throw DataError(where + ": 'utterance' must be a string");
  ex.text = utt.get<std::string>();
  ex.tokens = tokenize(ex.text);
  if (ex.tokens.empty()) throw DataError(where + ": utterance has no tokens");
  const auto& scenes = detail::require(j, "scenes", where);
  if (!scenes.is_array()) throw DataError(where + ": 'scenes' must be an array");
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    std::string swhere = where + " scene " + std::to_string(s);
    const auto& js = scenes[s];
    const auto& den = detail::require(js, "denotation", swhere);
    if (!den.is_boolean()) throw DataError(swhere + ": 'denotation' must be a boolean");
    LabeledScene ls;
    ls.denotation = den.get<bool>();
    ls.scene = scene_from_json(detail::require(js, "boxes", swhere), swhere);
    if (js.contains("id") && js.at("id").is_string()) ls.scene.id = js.at("id").get<std::string>();
    validate_scene(ls.scene, swhere);
    ex.scenes.push_back(std::move(ls));
  }
  return ex;
}

inline Corpus corpus_from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (!j.is_array()) throw DataError("corpus: top-level value must be an array");
  Corpus corpus;
  corpus.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) corpus.push_back(example_from_json(j[i], i));
  return corpus;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
}

/// Parses JSON text, reporting line/column on syntax errors.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // locate the byte offset reported by the parser
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw DataError(what + ": JSON parse error at line " + std::to_string(line) + ", column " +
                    std::to_string(col) + ": " + e.what());
  }
}

/// Empty (or whitespace-only) files load as an empty corpus.
inline Corpus load_corpus(const std::string& path) {
  std::string text = read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  return corpus_from_json(parse_json_text(text, path));
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  write_file(path, to_json(corpus).dump(1) + "\n");
}

inline std::string serialize_scene(const Scene& scene) {
  nlohmann::json j{{"boxes", boxes_to_json(scene)}};
  if (!scene.id.empty()) j["id"] = scene.id;
  return j.dump();
}

inline Scene deserialize_scene(std::string_view text) {
  auto j = nlohmann::json::parse(text);
  Scene scene = scene_from_json(detail::require(j, "boxes", "scene"), "scene");
  if (j.contains("id")) scene.id = j.at("id").get<std::string>();
  validate_scene(scene, "scene");
  return scene;
}

inline Scene scene_round_trip(const Scene& scene) { return deserialize_scene(serialize_scene(scene)); }

}  // namespace nlvr
