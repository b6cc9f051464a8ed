#include "masersim/json_writer.hpp"

#include <cmath>
#include <cstdio>

namespace masersim {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

JsonValue JsonValue::object() {
  JsonValue v;
  v.kind_ = Kind::object;
  return v;
}

JsonValue JsonValue::array() {
  JsonValue v;
  v.kind_ = Kind::array;
  return v;
}

JsonValue::JsonValue(std::span<const double> values) : kind_(Kind::array) {
  arr_.reserve(values.size());
  for (double v : values) arr_.emplace_back(v);
}

JsonValue& JsonValue::set(std::string key, JsonValue v) {
  if (kind_ != Kind::object) *this = object();
  obj_.emplace_back(std::move(key), std::move(v));
  return *this;
}

JsonValue& JsonValue::push(JsonValue v) {
  if (kind_ != Kind::array) *this = array();
  arr_.push_back(std::move(v));
  return *this;
}

void JsonValue::write_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void JsonValue::write(std::string& out, int indent, int depth) const {
  const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
  const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  switch (kind_) {
    case Kind::null:
      out += "null";
      break;
    case Kind::boolean:
      out += bool_ ? "true" : "false";
      break;
    case Kind::number:
      out += std::isfinite(num_) ? format_double(num_) : "null";
      break;
    case Kind::integer:
      out += std::to_string(int_);
      break;
    case Kind::unsigned_integer:
      out += std::to_string(uint_);
      break;
    case Kind::string:
      write_escaped(out, str_);
      break;
    case Kind::array: {
      if (arr_.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < arr_.size(); ++i) {
        out += pad_in;
        arr_[i].write(out, indent, depth + 1);
        if (i + 1 < arr_.size()) out += ',';
        out += '\n';
      }
      out += pad;
      out += ']';
      break;
    }
    case Kind::object: {
      if (obj_.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      for (std::size_t i = 0; i < obj_.size(); ++i) {
        out += pad_in;
        write_escaped(out, obj_[i].first);
        out += ": ";
        obj_[i].second.write(out, indent, depth + 1);
        if (i + 1 < obj_.size()) out += ',';
        out += '\n';
      }
      out += pad;
      out += '}';
      break;
    }
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  write(out, indent, 0);
  out += '\n';
  return out;
}

}  // namespace masersim
