#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace masersim {

// Fixed 17-significant-digit rendering (%.17g): enough digits to make the
// text round-trip to the identical double on read-back.
std::string format_double(double v);

// Minimal JSON document builder with insertion-ordered object keys and the
// fixed float format above, so identical data serializes to byte-identical
// text on every platform. Non-finite numbers render as null.
class JsonValue {
 public:
  static JsonValue object();
  static JsonValue array();

  JsonValue() : kind_(Kind::null) {}
  JsonValue(bool b) : kind_(Kind::boolean), bool_(b) {}
  JsonValue(double v) : kind_(Kind::number), num_(v) {}
  JsonValue(int v) : kind_(Kind::integer), int_(v) {}
  JsonValue(std::int64_t v) : kind_(Kind::integer), int_(v) {}
  JsonValue(std::uint64_t v) : kind_(Kind::unsigned_integer), uint_(v) {}
  JsonValue(std::string s) : kind_(Kind::string), str_(std::move(s)) {}
  JsonValue(const char* s) : kind_(Kind::string), str_(s) {}
  JsonValue(std::span<const double> values);

  // Object insert; keys keep insertion order. Returns *this for chaining.
  JsonValue& set(std::string key, JsonValue v);
  // Array append.
  JsonValue& push(JsonValue v);

  std::string dump(int indent = 2) const;

 private:
  enum class Kind {
    null,
    boolean,
    number,
    integer,
    unsigned_integer,
    string,
    array,
    object
  };

  void write(std::string& out, int indent, int depth) const;
  static void write_escaped(std::string& out, const std::string& s);

  Kind kind_;
  bool bool_ = false;
  double num_ = 0.0;
  std::int64_t int_ = 0;
  std::uint64_t uint_ = 0;
  std::string str_;
  std::vector<JsonValue> arr_;
  std::vector<std::pair<std::string, JsonValue>> obj_;
};

}  // namespace masersim
