#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace mvfr {

// Flat key-value tree read from a small TOML-style file:
//   # comment
//   [section]            -> keys below become "section.key"
//   count = 3            -> int64
//   rate = 1.5e-2        -> double
//   on = true            -> bool
//   name = "text"        -> string
//   dims = [1, 2, 3]     -> homogeneous array (ints promote to double when mixed)
// to_string() emits the same format deterministically (sorted sections/keys), and
// parse(to_string(t)) reproduces t, which is what config snapshots rely on.
class ConfigTree {
 public:
  using Value = std::variant<std::int64_t, double, bool, std::string,
                             std::vector<std::int64_t>, std::vector<double>,
                             std::vector<std::string>>;

  static ConfigTree parse_file(const std::string& path);
  static ConfigTree parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;  // accepts ints
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<std::int64_t> get_int_array(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;  // accepts int arrays & scalars
  std::vector<std::string> get_string_array(const std::string& key) const;

  std::int64_t get_int_or(const std::string& key, std::int64_t dflt) const;
  double get_double_or(const std::string& key, double dflt) const;
  bool get_bool_or(const std::string& key, bool dflt) const;
  std::string get_string_or(const std::string& key, const std::string& dflt) const;

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }
  void erase(const std::string& key) { values_.erase(key); }

  std::vector<std::string> keys() const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  std::string to_string() const;
  void write_file(const std::string& path) const;

  bool operator==(const ConfigTree& other) const { return values_ == other.values_; }

 private:
  const Value& require(const std::string& key) const;
  std::map<std::string, Value> values_;
};

}  // namespace mvfr
