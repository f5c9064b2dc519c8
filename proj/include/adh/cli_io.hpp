#pragma once

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adh/experiments.hpp"
#include "adh/meanfield.hpp"
#include "adh/network.hpp"
#include "adh/stationary.hpp"

namespace adh::cli {

inline constexpr const char* kLibraryVersion = "0.3.0";

struct CouplingSection {
  /// per-population overrides for the second run; unset entries repeat the first
  std::vector<std::optional<InitialSignal>> initial_signals;
  std::vector<std::optional<AgeLaw>> initial_ages;
  bool independent_age_draws = true;
  std::size_t replicates = 100;
};

struct ExperimentSection {
  std::vector<int> chaos_sizes{50, 100, 200, 400};
  std::size_t chaos_replicates = 20;
  int chaos_tagged = 1;
  std::vector<double> truncations;
  std::size_t weight_replicates = 20;
};

/// Everything a config file can carry. Only `network` is required.
struct RunConfig {
  NetworkConfig network;
  MeanFieldOptions meanfield;
  FixedPointOptions stationary;
  CouplingSection coupling;
  ExperimentSection experiments;
};

/// Parses a JSON document in strict mode. Every problem is reported with its
/// JSON path in one ConfigError.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Second coupling run built from the overrides.
NetworkConfig coupling_partner(const RunConfig& rc);

/// 17 significant digits, exponent without sign padding: 1 -> "1.0000000000000000e0".
std::string format_real(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& add(double v);
  template <std::integral T>
  CsvTable& add(T v) {
    row_.push_back(std::to_string(v));
    return *this;
  }
  CsvTable& add(const std::string& v);
  /// closes the current row; throws if it has the wrong width
  void end_row();
  std::string str() const;
  std::size_t rows() const { return rows_; }

 private:
  std::vector<std::string> header_;
  std::string body_;
  std::vector<std::string> row_;
  std::size_t rows_ = 0;
};

std::string sha256_hex(const std::string& bytes);

/// Writes the table and returns the SHA-256 of the written bytes.
std::string emit_csv(const CsvTable& table, const std::filesystem::path& path);

struct RunManifest {
  std::string subcommand;
  std::string config_sha256;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string library_version = kLibraryVersion;
  double wall_clock_seconds = 0.0;
  std::map<std::string, std::string> outputs;
  std::string to_json() const;
};

/// Runs the command line and returns the process exit code:
/// 0 success, 2 config error, 3 model-contract violation, 4 non-convergence.
int run(int argc, char** argv);

}  // namespace adh::cli
