#pragma once

// Experiment configuration: a flat "key = value" text format with one
// [section] per subcommand plus an unnamed top section for shared keys.
//
//   # comment
//   output_dir = runs
//   [train]
//   arch = mrn, monolithic
//   seeds = 100, 200
//
// Only keys declared in the schema are accepted. Later assignments (files
// first, then --set overrides) replace earlier ones.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrn/gcrl.hpp"
#include "mrn/toyworld.hpp"

namespace mrn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string section;  // "" for the shared top section
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every accepted key with its default.
const std::vector<ConfigKey>& config_schema();

class ExperimentConfig {
 public:
  /// All schema keys at their defaults.
  ExperimentConfig();

  /// Parses config text; `source` names it in diagnostics ("file:line: ...").
  void merge_text(const std::string& text, const std::string& source = "<config>");
  void merge_file(const std::string& path);
  /// One "section.key=value" (or "key=value" for the top section) override.
  void set(const std::string& assignment);
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& get(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
  std::vector<std::uint64_t> get_seeds(const std::string& section, const std::string& key) const;

  /// Resolved config in the same text format: the top section followed by
  /// the named sections (all sections when empty), keys in schema order.
  std::string to_text(const std::vector<std::string>& sections = {}) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Settings of one point-mass run from the [train] section. Sizing keys
/// left at "default" follow default_sizing(arch).
TrainConfig make_train_config(const ExperimentConfig& config, const std::string& arch, std::uint64_t seed);

/// The [train] section without arch and seeds: runs that agree on it may
/// be aggregated together.
std::string train_config_id(const ExperimentConfig& config);

/// Toy regression settings for one arch from the [toy] section.
RegressionConfig make_toy_regression(const ExperimentConfig& config, const std::string& arch, std::uint64_t seed);

/// "float" or "double"; anything else is a ConfigError.
bool uses_double(const ExperimentConfig& config, const std::string& section);

}  // namespace mrn
