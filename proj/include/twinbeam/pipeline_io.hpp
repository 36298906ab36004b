#pragma once

// Frame-stack files and CSV result tables.
//
// Stack file layout (little-endian):
//   0  char[4]  magic "TBFS"
//   4  u16      format version (1)
//   6  u8       frame kind (0 pdc_on, 1 background)
//   7  u8       reserved, 0
//   8  u32      rows
//   12 u32      cols
//   16 u64      frame count
//   24 u64      experiment digest
//   32 u32[count][rows][cols] counts
// A JSON sidecar at "<path>.json" carries the full run config and the digest.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twinbeam/calibration.hpp"
#include "twinbeam/run_config.hpp"
#include "twinbeam/simulator.hpp"

namespace twinbeam {

inline constexpr std::size_t kStackHeaderBytes = 32;
inline constexpr std::uint16_t kStackVersion = 1;

struct StackFile {
  FrameKind kind = FrameKind::pdc_on;
  int rows = 0;
  int cols = 0;
  std::uint64_t digest = 0;
  RunConfig config;  // from the sidecar
  std::vector<Frame> frames;
};

std::string sidecar_path(const std::string& stack_path);

/// Writes the stack and its sidecar. All frames must share dimensions and kind.
void write_stack(const std::string& path, std::span<const Frame> frames, const RunConfig& config);

/// Reads a stack and verifies it against its sidecar. Throws corrupt_header,
/// truncated_payload, digest_mismatch or io; never returns a partial stack.
StackFile read_stack(const std::string& path);

/// Formats with 9 significant digits.
std::string format_number(double value);

// Each writer produces a complete CSV file with a header row.
void write_calibration_summary(const std::string& path, const CalibrationResult& r);
void write_calibration_detail(const std::string& path, const CalibrationResult& r);
void write_batches(const std::string& path, const RepeatResult& r);
void write_area_scan(const std::string& path, const std::vector<AreaScanPoint>& points);
/// Bare matrix: one row per row shift, one column per column shift.
void write_cs_map(const std::string& path, const SigmaSpatialMap& map);
void write_cs_search(const std::string& path, const CsSearchResult& cs);
void write_table1(const std::string& path, const Table1Report& report);

/// Writes calibration_summary.csv, calibration_detail.csv, batches.csv and,
/// when a CS search ran, cs_map.csv into `dir` (created if missing).
void emit_tables(const std::string& dir, const CalibrationResult& r);

}  // namespace twinbeam
