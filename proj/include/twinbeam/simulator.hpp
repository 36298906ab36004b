#pragma once

// Synthetic twin-beam CCD frames with known ground truth.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "twinbeam/core_model.hpp"
#include "twinbeam/rng.hpp"

namespace twinbeam {

enum class FrameKind : std::uint8_t { pdc_on = 0, background = 1 };

const char* to_string(FrameKind kind) noexcept;

/// Everything needed to generate frames; equal configs give equal stacks.
struct ExperimentConfig {
  ChannelEfficiencies channel{0.6, 0.6};
  ModeStructure modes;
  PulseModel pulse;
  BackgroundModel background;
  FrameGeometry geometry;
  Point cs_offset;  // idler misalignment, superpixels
  double cosmic_ray_rate = 0.0;
  std::uint64_t master_seed = 1;

  /// Signal-half block covered by the emission grid.
  Region emission_region() const;
  /// Checks parameter ranges and that every idler deposition stays inside
  /// the idler half.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// One laser shot (or one background exposure). Counts are row-major.
struct Frame {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint32_t> counts;
  std::uint64_t pulse_index = 0;
  double pulse_energy = 1.0;  // NaN when unknown (frames read back from disk)
  FrameKind kind = FrameKind::pdc_on;
  int cosmic_rays = 0;        // ground truth, not persisted

  Frame() = default;
  Frame(int r, int c) : rows(r), cols(c), counts(static_cast<std::size_t>(r) * c, 0u) {}

  std::uint32_t at(int r, int c) const { return counts[static_cast<std::size_t>(r) * cols + c]; }
  std::uint32_t& at(int r, int c) { return counts[static_cast<std::size_t>(r) * cols + c]; }
};

struct PulseSample {
  double energy = 1.0;
  double mu = 0.0;
};

/// Relative pulse energy ~ N(1, jitter) restricted to energy > 0 by
/// rejection; mu follows from the gain map.
PulseSample sample_pulse(const PulseModel& pulse, Engine& rng);

struct CellPair {
  std::int64_t signal = 0;
  std::int64_t idler = 0;
};

/// Detected counts of one conjugate cell pair. The pre-detection photon number
/// is shared by both arms (negative binomial with `modes` thermal modes of
/// mean `mu`) and then thinned independently with eta_s and eta_i.
CellPair sample_cell_pair(double mu, std::int64_t modes, const ChannelEfficiencies& ch,
                          Engine& rng);

Frame render_frame(const ExperimentConfig& cfg, FrameKind kind, std::uint64_t pulse_index,
                   Engine& rng);

/// Renders frame `pulse_index` of the stack of kind `kind` on its own stream.
Frame render_indexed_frame(const ExperimentConfig& cfg, FrameKind kind, std::uint64_t pulse_index);

/// Frames 0..count-1. Output is identical for any worker count.
std::vector<Frame> generate_stack(const ExperimentConfig& cfg, std::size_t count, FrameKind kind,
                                  unsigned workers = 1);

/// Streams frames in index order without holding the whole stack in memory.
void for_each_frame(const ExperimentConfig& cfg, std::size_t count, FrameKind kind,
                    unsigned workers, const std::function<void(const Frame&)>& sink);

/// Adds one single-superpixel spike at a uniformly random position. The
/// amplitude is 20x the frame's maximum count (at least 20), hence at least
/// 20x its median.
Frame inject_cosmic_ray(Frame frame, Engine& rng);

}  // namespace twinbeam
