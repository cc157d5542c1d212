#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lsnm/pipeline.hpp"

namespace lsnm {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Flat `key = value` text. Blank lines and lines starting with '#' are skipped.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(std::string_view text, std::string_view context = "config");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Throws ConfigInvalid naming the first key not in `known`.
  void reject_unknown(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& bytes() const { return bytes_; }
  std::uint64_t digest() const { return fnv1a64(bytes_); }

 private:
  std::map<std::string, std::string> values_;
  std::string bytes_;
};

/// Every key a config file may contain.
const std::vector<std::string>& config_keys();

/// A full study: the shared model settings plus the replicate grid.
struct StudyPlan {
  StudyConfig base;
  std::vector<Scenario> scenarios;
  int replicates = 50;
  std::uint64_t seed = 1;
};

/// Apply every key present; absent keys keep their defaults.
StudyPlan study_plan_from(const KeyValueConfig& config);

/// Seed of replicate k of the given scenario under master seed `seed`.
std::uint64_t replicate_seed(std::uint64_t seed, Scenario scenario, int k);

}  // namespace lsnm
