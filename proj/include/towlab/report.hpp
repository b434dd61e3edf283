#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace towlab::report {

// "%.17g" so that repeated runs and golden files compare byte-for-byte and
// every double round-trips exactly.
std::string fmt17(double v);

// Minimal JSON value with insertion-ordered object keys and fmt17 floats;
// guarantees byte-stable dumps across runs and thread counts.
class Json {
 public:
  static Json object();
  static Json array();
  static Json number(double v);
  static Json integer(std::int64_t v);
  static Json str(std::string v);
  static Json boolean(bool v);
  static Json null();

  Json& set(const std::string& key, Json v);  // object only
  Json& push(Json v);                         // array only

  std::string dump(int indent = 2) const;

 private:
  enum class Type { Null, Bool, Int, Dbl, Str, Arr, Obj };
  Type type_ = Type::Null;
  bool bool_ = false;
  std::int64_t int_ = 0;
  double dbl_ = 0.0;
  std::string str_;
  std::vector<Json> arr_;
  std::vector<std::pair<std::string, Json>> obj_;

  void dump_to(std::string& out, int indent, int depth) const;
};

void write_file(const std::string& path, const std::string& content);

}  // namespace towlab::report
