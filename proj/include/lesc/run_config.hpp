#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lesc {

// Flat key=value run configuration. Every key has a declared type and a
// default; unknown keys and ill-typed values are rejected on assignment.
class RunConfig {
 public:
  enum class Type { kString, kInt, kReal, kBool, kPath };

  struct Key {
    std::string name;
    Type type;
    std::string default_value;
    std::string help;
  };

  RunConfig();

  static const std::vector<Key>& schema();

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);
  // Flat JSON object of scalars.
  void merge_file(const std::filesystem::path& path);

  bool explicitly_set(const std::string& key) const;
  const std::string& raw(const std::string& key) const;
  std::string str(const std::string& key) const { return raw(key); }
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::filesystem::path path(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;

  // Throws naming the key when a path value is empty or does not exist.
  void require_existing(const std::string& key) const;

  // Resolved configuration as a JSON document with typed values.
  std::string to_json() const;

 private:
  const Key& key(const std::string& name) const;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace lesc
