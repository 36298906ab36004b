#pragma once

// Run configuration: experiment ground truth plus analysis parameters, with a
// JSON representation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twinbeam/core_model.hpp"
#include "twinbeam/simulator.hpp"
#include "twinbeam/statistics.hpp"

namespace twinbeam {

struct AnalysisConfig {
  Region signal_region{{1, 1}, {5, 8}, Side::signal};
  bool search_cs = true;
  Pixel search_extent{2, 2};
  int cs_search_frames = 20;
  Pixel cs_shift;  // used when search_cs is false
  // Area scan. An empty list scans eight nested areas up to signal_region;
  // no center means the center of signal_region.
  std::vector<GridSize> areas;
  std::optional<Point> area_center;
  // Z repeats of N PDC and M background frames.
  int z = 4;
  int n = 250;
  int m = 250;
  double cosmic_k = 10.0;
  double transmittance = 1.0;
  VarianceConvention variance = VarianceConvention::unbiased;
  unsigned workers = 0;  // 0: one per hardware thread

  std::size_t pdc_frames() const noexcept { return static_cast<std::size_t>(z) * n; }
  std::size_t background_frames() const noexcept { return static_cast<std::size_t>(z) * m; }
  unsigned resolved_workers() const noexcept;

  void validate() const;
  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct RunConfig {
  ExperimentConfig experiment;
  AnalysisConfig analysis;

  RunConfig();

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses a JSON document. Missing keys take their defaults; unknown keys,
/// wrong types and invalid values raise ErrorCode::config with the JSON path
/// (and line, for syntax errors).
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Full JSON form (every field written), pretty-printed with 2-space indent.
std::string to_json(const RunConfig& cfg);

/// FNV-1a 64 of the compact JSON form of the experiment section. Identifies
/// the generating configuration of a frame stack.
std::uint64_t experiment_digest(const ExperimentConfig& cfg);

std::string hex_digest(std::uint64_t digest);

}  // namespace twinbeam
