#ifndef GENCOV_REPORT_JSON_HPP
#define GENCOV_REPORT_JSON_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gencov/case_control.hpp"
#include "gencov/estimator.hpp"
#include "gencov/simulation.hpp"

namespace gencov {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

// Provenance block attached to every report. Two runs with identical
// manifests (wall clock aside) produce identical reports.
struct RunManifest {
  std::string command_line;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  double wall_clock_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> input_digests;
};

std::uint64_t fnv1a(const std::string& bytes);
std::string hex_digest(const std::string& bytes);
std::string file_digest(const std::string& path);

ordered_json to_json(const RunManifest& manifest);
ordered_json to_json(const CovarianceReport& report);
ordered_json to_json(const WeightedReport& report);
ordered_json to_json(const CoverageReport& report, const SimulationConfig& config);

ordered_json config_to_json(const SimulationConfig& config);
SimulationConfig config_from_json(const ordered_json& doc);

void write_replicates_csv(const CoverageReport& report,
                          const std::string& path);

// Minimal structural validation against the JSON-schema subset shipped in
// schemas/: type, required, properties, items, enum.
void validate_against_schema(const ordered_json& doc,
                             const ordered_json& schema,
                             const std::string& where = "$");

}  // namespace gencov

#endif
