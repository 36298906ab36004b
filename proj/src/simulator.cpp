#include "twinbeam/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

namespace twinbeam {

const char* to_string(FrameKind kind) noexcept {
  return kind == FrameKind::pdc_on ? "pdc_on" : "background";
}

namespace {

constexpr std::uint64_t kStreamDomainBase = 0x7462'0000ULL;  // "tb"
constexpr double kMaxStackBytes = 32.0 * 1024 * 1024 * 1024;
constexpr int kMaxFrameSide = 1 << 16;

std::int64_t binomial(std::int64_t n, double p, Engine& rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return boost::random::binomial_distribution<std::int64_t, double>(n, p)(rng);
}

std::int64_t poisson(double mean, Engine& rng) {
  if (mean <= 0.0) return 0;
  return boost::random::poisson_distribution<std::int64_t, double>(mean)(rng);
}

// Uniform multinomial split of `n` photons over the cells of a square block.
void deposit_block(std::vector<double>& acc, int frame_cols, Pixel origin, int side, std::int64_t n,
                   Engine& rng) {
  const int bins = side * side;
  std::int64_t remaining = n;
  for (int b = 0; b < bins; ++b) {
    const std::int64_t take =
        (b == bins - 1) ? remaining : binomial(remaining, 1.0 / static_cast<double>(bins - b), rng);
    remaining -= take;
    const int r = origin.row + b / side;
    const int c = origin.col + b % side;
    acc[static_cast<std::size_t>(r) * frame_cols + c] += static_cast<double>(take);
  }
}

// Top-left superpixel of the idler block conjugate to the signal block at `signal_origin`.
Pixel idler_block_origin(const ExperimentConfig& cfg, Pixel signal_origin) {
  const int px = cfg.modes.coherence_cell_px;
  const Point far{static_cast<double>(signal_origin.row + px - 1),
                  static_cast<double>(signal_origin.col + px - 1)};
  const Point image = cfg.geometry.conjugate(far);
  return {round_half_away_from(image.row + cfg.cs_offset.row, cfg.geometry.cs.row),
          round_half_away_from(image.col + cfg.cs_offset.col, cfg.geometry.cs.col)};
}

void check_stack_size(const ExperimentConfig& cfg, std::size_t count) {
  const auto& g = cfg.geometry;
  require(g.rows <= kMaxFrameSide && g.cols <= kMaxFrameSide, ErrorCode::resource,
          "frame dimensions exceed " + std::to_string(kMaxFrameSide) + " superpixels");
  const double bytes = 4.0 * g.rows * g.cols * static_cast<double>(count);
  require(bytes <= kMaxStackBytes, ErrorCode::resource,
          "stack of " + std::to_string(count) + " frames would need more than 32 GiB");
}

}  // namespace

Region ExperimentConfig::emission_region() const {
  const int px = modes.coherence_cell_px;
  return Region{geometry.emission_origin, {modes.grid.rows * px, modes.grid.cols * px},
                Side::signal};
}

void ExperimentConfig::validate() const {
  channel.validate();
  modes.validate();
  pulse.validate();
  background.validate();
  geometry.validate();
  require(std::isfinite(cs_offset.row) && std::isfinite(cs_offset.col), ErrorCode::domain,
          "cs_offset must be finite");
  require(std::isfinite(cosmic_ray_rate) && cosmic_ray_rate >= 0.0, ErrorCode::domain,
          "cosmic_ray_rate must be >= 0");

  const Region emission = emission_region();
  require(geometry.in_signal_half(emission), ErrorCode::geometry,
          "emission grid does not fit inside the signal half");
  // The idler image of the emission grid is a rigid mirror of it, so
  // checking its extreme corners covers every cell.
  const int px = modes.coherence_cell_px;
  const Pixel first = emission.origin;
  const Pixel last{emission.row_end() - px, emission.col_end() - px};
  const Pixel a = idler_block_origin(*this, first);
  const Pixel b = idler_block_origin(*this, last);
  const Region image{{std::min(a.row, b.row), std::min(a.col, b.col)},
                     {std::abs(a.row - b.row) + px, std::abs(a.col - b.col) + px},
                     Side::idler};
  require(geometry.in_idler_half(image), ErrorCode::geometry,
          "conjugate cells fall outside the idler half (check cs and cs_offset)");
}

PulseSample sample_pulse(const PulseModel& pulse, Engine& rng) {
  PulseSample out;
  if (pulse.relative_energy_jitter > 0.0) {
    std::normal_distribution<double> energy(1.0, pulse.relative_energy_jitter);
    do {
      out.energy = energy(rng);
    } while (out.energy <= 0.0);
  }
  out.mu = pulse.mu_for_energy(out.energy);
  return out;
}

CellPair sample_cell_pair(double mu, std::int64_t modes, const ChannelEfficiencies& ch,
                          Engine& rng) {
  require(std::isfinite(mu) && mu > 0.0, ErrorCode::domain, "mu must be > 0");
  require(modes >= 1, ErrorCode::domain, "mode count must be >= 1");
  ch.validate();
  // Sum of `modes` geometric variates of mean mu == Poisson-Gamma mixture.
  std::gamma_distribution<double> intensity(static_cast<double>(modes), mu);
  const std::int64_t photons = poisson(intensity(rng), rng);
  return {binomial(photons, ch.eta_s, rng), binomial(photons, ch.eta_i, rng)};
}

Frame render_frame(const ExperimentConfig& cfg, FrameKind kind, std::uint64_t pulse_index,
                   Engine& rng) {
  const auto& g = cfg.geometry;
  const int px = cfg.modes.coherence_cell_px;
  std::vector<double> acc(static_cast<std::size_t>(g.rows) * g.cols, 0.0);

  const PulseSample pulse = sample_pulse(cfg.pulse, rng);

  if (kind == FrameKind::pdc_on) {
    const std::int64_t modes = cfg.modes.modes_per_cell();
    for (int gr = 0; gr < cfg.modes.grid.rows; ++gr) {
      for (int gc = 0; gc < cfg.modes.grid.cols; ++gc) {
        const Pixel s{g.emission_origin.row + gr * px, g.emission_origin.col + gc * px};
        const Pixel i = idler_block_origin(cfg, s);
        if (i.row < 0 || i.row + px > g.rows || i.col < g.split_col || i.col + px > g.cols) {
          fail(ErrorCode::geometry, "conjugate cell falls outside the idler half");
        }
        const CellPair pair = sample_cell_pair(pulse.mu, modes, cfg.channel, rng);
        if (px == 1) {
          acc[static_cast<std::size_t>(s.row) * g.cols + s.col] += static_cast<double>(pair.signal);
          acc[static_cast<std::size_t>(i.row) * g.cols + i.col] += static_cast<double>(pair.idler);
        } else {
          deposit_block(acc, g.cols, s, px, pair.signal, rng);
          deposit_block(acc, g.cols, i, px, pair.idler, rng);
        }
      }
    }
  }

  const auto& bg = cfg.background;
  const double stray =
      bg.straylight_mean * (bg.straylight_tracks_pulse ? pulse.energy : 1.0);
  const double read_sd = std::sqrt(bg.read_variance_per_superpixel());
  std::normal_distribution<double> read(0.0, read_sd > 0.0 ? read_sd : 1.0);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      double& v = acc[static_cast<std::size_t>(r) * g.cols + c];
      const double mean = c < g.split_col ? stray : stray * bg.straylight_idler_scale;
      v += static_cast<double>(poisson(mean, rng));
      if (read_sd > 0.0) v += read(rng);
    }
  }

  Frame frame(g.rows, g.cols);
  frame.pulse_index = pulse_index;
  frame.pulse_energy = pulse.energy;
  frame.kind = kind;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    const double q = std::round(acc[k]);
    frame.counts[k] = q <= 0.0 ? 0u : static_cast<std::uint32_t>(std::min(q, 4294967295.0));
  }

  if (cfg.cosmic_ray_rate > 0.0) {
    const std::int64_t hits = poisson(cfg.cosmic_ray_rate, rng);
    for (std::int64_t h = 0; h < hits; ++h) frame = inject_cosmic_ray(std::move(frame), rng);
  }
  return frame;
}

Frame render_indexed_frame(const ExperimentConfig& cfg, FrameKind kind, std::uint64_t pulse_index) {
  Engine rng = derive_stream(cfg.master_seed, kStreamDomainBase + static_cast<std::uint64_t>(kind),
                             pulse_index);
  return render_frame(cfg, kind, pulse_index, rng);
}

std::vector<Frame> generate_stack(const ExperimentConfig& cfg, std::size_t count, FrameKind kind,
                                  unsigned workers) {
  require(count >= 1, ErrorCode::invalid_argument, "frame count must be >= 1");
  cfg.validate();
  check_stack_size(cfg, count);

  std::vector<Frame> frames(count);
  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (n_workers == 1) {
    for (std::size_t k = 0; k < count; ++k) frames[k] = render_indexed_frame(cfg, kind, k);
    return frames;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  std::vector<std::exception_ptr> errors(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < count; k += n_workers) {
          frames[k] = render_indexed_frame(cfg, kind, k);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return frames;
}

void for_each_frame(const ExperimentConfig& cfg, std::size_t count, FrameKind kind,
                    unsigned workers, const std::function<void(const Frame&)>& sink) {
  cfg.validate();
  const unsigned n_workers = std::max(1u, workers);
  if (n_workers == 1) {
    for (std::size_t k = 0; k < count; ++k) sink(render_indexed_frame(cfg, kind, k));
    return;
  }
  const std::size_t chunk = static_cast<std::size_t>(n_workers) * 16;
  std::vector<Frame> buffer;
  for (std::size_t start = 0; start < count; start += chunk) {
    const std::size_t n = std::min(chunk, count - start);
    buffer.assign(n, Frame{});
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < n; k += n_workers) {
            buffer[k] = render_indexed_frame(cfg, kind, start + k);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (const Frame& f : buffer) sink(f);
  }
}

Frame inject_cosmic_ray(Frame frame, Engine& rng) {
  if (frame.counts.empty()) return frame;
  std::vector<std::uint32_t> sorted = frame.counts;
  auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double median = *mid;
  const double peak = *std::max_element(frame.counts.begin(), frame.counts.end());
  const double amplitude = 20.0 * std::max({median, peak, 1.0});

  std::uniform_int_distribution<std::size_t> where(0, frame.counts.size() - 1);
  std::uint32_t& target = frame.counts[where(rng)];
  target = static_cast<std::uint32_t>(std::min(4294967295.0, target + amplitude));
  ++frame.cosmic_rays;
  return frame;
}

}  // namespace twinbeam
