#include "towlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "towlab/common.hpp"

namespace towlab::report {

std::string fmt17(double v) {
  if (!std::isfinite(v)) {
    if (std::isnan(v)) return "null";
    return v > 0 ? "1e999" : "-1e999";
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json Json::object() {
  Json j;
  j.type_ = Type::Obj;
  return j;
}

Json Json::array() {
  Json j;
  j.type_ = Type::Arr;
  return j;
}

Json Json::number(double v) {
  Json j;
  j.type_ = Type::Dbl;
  j.dbl_ = v;
  return j;
}

Json Json::integer(std::int64_t v) {
  Json j;
  j.type_ = Type::Int;
  j.int_ = v;
  return j;
}

Json Json::str(std::string v) {
  Json j;
  j.type_ = Type::Str;
  j.str_ = std::move(v);
  return j;
}

Json Json::boolean(bool v) {
  Json j;
  j.type_ = Type::Bool;
  j.bool_ = v;
  return j;
}

Json Json::null() { return Json{}; }

Json& Json::set(const std::string& key, Json v) {
  if (type_ != Type::Obj) throw Error("Json::set on a non-object");
  obj_.emplace_back(key, std::move(v));
  return *this;
}

Json& Json::push(Json v) {
  if (type_ != Type::Arr) throw Error("Json::push on a non-array");
  arr_.push_back(std::move(v));
  return *this;
}

namespace {

void escape_into(std::string& out, const std::string& s) {
  out += '"';
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

}  // namespace

void Json::dump_to(std::string& out, int indent, int depth) const {
  const std::string pad(static_cast<size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<size_t>(indent) * depth, ' ');
  switch (type_) {
    case Type::Null: out += "null"; break;
    case Type::Bool: out += bool_ ? "true" : "false"; break;
    case Type::Int: out += std::to_string(int_); break;
    case Type::Dbl: out += fmt17(dbl_); break;
    case Type::Str: escape_into(out, str_); break;
    case Type::Arr: {
      if (arr_.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (size_t i = 0; i < arr_.size(); ++i) {
        out += pad;
        arr_[i].dump_to(out, indent, depth + 1);
        if (i + 1 < arr_.size()) out += ',';
        out += '\n';
      }
      out += close_pad + "]";
      break;
    }
    case Type::Obj: {
      if (obj_.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      for (size_t i = 0; i < obj_.size(); ++i) {
        out += pad;
        escape_into(out, obj_[i].first);
        out += ": ";
        obj_[i].second.dump_to(out, indent, depth + 1);
        if (i + 1 < obj_.size()) out += ',';
        out += '\n';
      }
      out += close_pad + "}";
      break;
    }
  }
}

std::string Json::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  out += '\n';
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << content;
  if (!f) throw Error("failed writing: " + path);
}

}  // namespace towlab::report
