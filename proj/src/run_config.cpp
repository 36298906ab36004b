#include "twinbeam/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>

#include <json.hpp>

namespace twinbeam {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorCode::config, (path.empty() ? std::string("/") : path) + ": " + what);
}

// Walks one JSON object, type-checking fields and rejecting unknown keys.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_, "expected an object");
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path_of(const char* key) const { return path_ + "/" + key; }

  void number(const char* key, double& out) {
    if (const Json* v = child(key)) {
      if (!v->is_number()) config_error(path_of(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) config_error(path_of(key), "expected a finite number");
    }
  }

  template <class Int>
  void integer(const char* key, Int& out) {
    if (const Json* v = child(key)) {
      if (!v->is_number_integer()) config_error(path_of(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (!v->is_number_unsigned()) config_error(path_of(key), "expected a non-negative integer");
        const auto raw = v->get<std::uint64_t>();
        if (raw > std::numeric_limits<Int>::max()) config_error(path_of(key), "integer out of range");
        out = static_cast<Int>(raw);
      } else {
        const auto raw = v->get<std::int64_t>();
        if (raw < std::numeric_limits<Int>::min() || raw > std::numeric_limits<Int>::max()) {
          config_error(path_of(key), "integer out of range");
        }
        out = static_cast<Int>(raw);
      }
    }
  }

  void boolean(const char* key, bool& out) {
    if (const Json* v = child(key)) {
      if (!v->is_boolean()) config_error(path_of(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  template <class Enum, std::size_t K>
  void choice(const char* key, Enum& out, const std::pair<const char*, Enum> (&names)[K]) {
    if (const Json* v = child(key)) {
      if (v->is_string()) {
        for (const auto& [name, value] : names) {
          if (v->get<std::string>() == name) {
            out = value;
            return;
          }
        }
      }
      std::string allowed;
      for (const auto& [name, value] : names) allowed += std::string(allowed.empty() ? "" : ", ") + name;
      config_error(path_of(key), "expected one of: " + allowed);
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) config_error(path_ + "/" + key, "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr std::pair<const char*, GainMap> kGainMaps[] = {{"linear", GainMap::linear},
                                                         {"sinh2", GainMap::sinh2}};
constexpr std::pair<const char*, Readout> kReadouts[] = {
    {"per_physical_pixel", Readout::per_physical_pixel}, {"per_superpixel", Readout::per_superpixel}};
constexpr std::pair<const char*, VarianceConvention> kConventions[] = {
    {"unbiased", VarianceConvention::unbiased}, {"biased", VarianceConvention::biased}};

template <class Enum, std::size_t K>
const char* name_of(Enum value, const std::pair<const char*, Enum> (&names)[K]) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "unknown";
}

void read_pixel(ObjectReader& parent, const char* key, Pixel& out) {
  if (const Json* v = parent.child(key)) {
    ObjectReader r(*v, parent.path_of(key));
    r.integer("row", out.row);
    r.integer("col", out.col);
    r.finish();
  }
}

void read_point(ObjectReader& parent, const char* key, Point& out) {
  if (const Json* v = parent.child(key)) {
    ObjectReader r(*v, parent.path_of(key));
    r.number("row", out.row);
    r.number("col", out.col);
    r.finish();
  }
}

void read_size(const Json& j, const std::string& path, GridSize& out) {
  ObjectReader r(j, path);
  r.integer("rows", out.rows);
  r.integer("cols", out.cols);
  r.finish();
}

void read_experiment(const Json& j, ExperimentConfig& e) {
  ObjectReader r(j, "/experiment");
  if (const Json* v = r.child("channel")) {
    ObjectReader c(*v, "/experiment/channel");
    c.number("eta_s", e.channel.eta_s);
    c.number("eta_i", e.channel.eta_i);
    c.finish();
  }
  if (const Json* v = r.child("modes")) {
    ObjectReader m(*v, "/experiment/modes");
    m.integer("temporal_modes", e.modes.temporal_modes);
    m.integer("areas_per_cell", e.modes.areas_per_cell);
    m.integer("coherence_cell_px", e.modes.coherence_cell_px);
    if (const Json* g = m.child("grid")) read_size(*g, "/experiment/modes/grid", e.modes.grid);
    m.finish();
  }
  if (const Json* v = r.child("pulse")) {
    ObjectReader p(*v, "/experiment/pulse");
    p.number("mean_mu", e.pulse.mean_mu);
    p.number("relative_energy_jitter", e.pulse.relative_energy_jitter);
    p.choice("gain_map", e.pulse.gain_map, kGainMaps);
    p.number("gain_constant", e.pulse.gain_constant);
    p.finish();
  }
  if (const Json* v = r.child("background")) {
    ObjectReader b(*v, "/experiment/background");
    b.number("straylight_mean", e.background.straylight_mean);
    b.number("straylight_idler_scale", e.background.straylight_idler_scale);
    b.boolean("straylight_tracks_pulse", e.background.straylight_tracks_pulse);
    b.number("read_noise_std", e.background.read_noise_std);
    b.integer("binning", e.background.binning);
    b.choice("readout", e.background.readout, kReadouts);
    b.finish();
  }
  if (const Json* v = r.child("geometry")) {
    // rows/cols alone describe a symmetric frame; split_col and cs default
    // to the middle of the frame.
    ObjectReader g(*v, "/experiment/geometry");
    FrameGeometry& geo = e.geometry;
    g.integer("rows", geo.rows);
    g.integer("cols", geo.cols);
    geo.split_col = geo.cols / 2;
    geo.cs = {0.5 * (geo.rows - 1), 0.5 * (geo.cols - 1)};
    g.integer("split_col", geo.split_col);
    read_point(g, "cs", geo.cs);
    read_pixel(g, "emission_origin", geo.emission_origin);
    g.finish();
  }
  read_point(r, "cs_offset", e.cs_offset);
  r.number("cosmic_ray_rate", e.cosmic_ray_rate);
  r.integer("master_seed", e.master_seed);
  r.finish();
}

void read_analysis(const Json& j, AnalysisConfig& a) {
  ObjectReader r(j, "/analysis");
  if (const Json* v = r.child("signal_region")) {
    ObjectReader s(*v, "/analysis/signal_region");
    read_pixel(s, "origin", a.signal_region.origin);
    if (const Json* e = s.child("extent")) read_size(*e, "/analysis/signal_region/extent", a.signal_region.extent);
    s.finish();
  }
  r.boolean("search_cs", a.search_cs);
  read_pixel(r, "search_extent", a.search_extent);
  r.integer("cs_search_frames", a.cs_search_frames);
  read_pixel(r, "cs_shift", a.cs_shift);
  if (const Json* v = r.child("areas")) {
    if (!v->is_array()) config_error("/analysis/areas", "expected an array");
    a.areas.clear();
    for (std::size_t k = 0; k < v->size(); ++k) {
      GridSize g;
      read_size((*v)[k], "/analysis/areas/" + std::to_string(k), g);
      a.areas.push_back(g);
    }
  }
  if (const Json* v = r.child("area_center")) {
    if (v->is_null()) {
      a.area_center.reset();
    } else {
      Point p;
      ObjectReader c(*v, "/analysis/area_center");
      c.number("row", p.row);
      c.number("col", p.col);
      c.finish();
      a.area_center = p;
    }
  }
  r.integer("z", a.z);
  r.integer("n", a.n);
  r.integer("m", a.m);
  r.number("cosmic_k", a.cosmic_k);
  r.number("transmittance", a.transmittance);
  r.choice("variance", a.variance, kConventions);
  r.integer("workers", a.workers);
  r.finish();
}

Json pixel_json(Pixel p) { return Json{{"row", p.row}, {"col", p.col}}; }
Json point_json(Point p) { return Json{{"row", p.row}, {"col", p.col}}; }
Json size_json(GridSize g) { return Json{{"rows", g.rows}, {"cols", g.cols}}; }

Json experiment_json(const ExperimentConfig& e) {
  Json j;
  j["channel"] = {{"eta_s", e.channel.eta_s}, {"eta_i", e.channel.eta_i}};
  j["modes"] = {{"temporal_modes", e.modes.temporal_modes},
                {"areas_per_cell", e.modes.areas_per_cell},
                {"coherence_cell_px", e.modes.coherence_cell_px},
                {"grid", size_json(e.modes.grid)}};
  j["pulse"] = {{"mean_mu", e.pulse.mean_mu},
                {"relative_energy_jitter", e.pulse.relative_energy_jitter},
                {"gain_map", name_of(e.pulse.gain_map, kGainMaps)},
                {"gain_constant", e.pulse.gain_constant}};
  j["background"] = {{"straylight_mean", e.background.straylight_mean},
                     {"straylight_idler_scale", e.background.straylight_idler_scale},
                     {"straylight_tracks_pulse", e.background.straylight_tracks_pulse},
                     {"read_noise_std", e.background.read_noise_std},
                     {"binning", e.background.binning},
                     {"readout", name_of(e.background.readout, kReadouts)}};
  j["geometry"] = {{"rows", e.geometry.rows},
                   {"cols", e.geometry.cols},
                   {"split_col", e.geometry.split_col},
                   {"cs", point_json(e.geometry.cs)},
                   {"emission_origin", pixel_json(e.geometry.emission_origin)}};
  j["cs_offset"] = point_json(e.cs_offset);
  j["cosmic_ray_rate"] = e.cosmic_ray_rate;
  j["master_seed"] = e.master_seed;
  return j;
}

Json analysis_json(const AnalysisConfig& a) {
  Json j;
  j["signal_region"] = {{"origin", pixel_json(a.signal_region.origin)},
                        {"extent", size_json(a.signal_region.extent)}};
  j["search_cs"] = a.search_cs;
  j["search_extent"] = pixel_json(a.search_extent);
  j["cs_search_frames"] = a.cs_search_frames;
  j["cs_shift"] = pixel_json(a.cs_shift);
  Json areas = Json::array();
  for (const GridSize& g : a.areas) areas.push_back(size_json(g));
  j["areas"] = areas;
  j["area_center"] = a.area_center ? point_json(*a.area_center) : Json(nullptr);
  j["z"] = a.z;
  j["n"] = a.n;
  j["m"] = a.m;
  j["cosmic_k"] = a.cosmic_k;
  j["transmittance"] = a.transmittance;
  j["variance"] = name_of(a.variance, kConventions);
  j["workers"] = a.workers;
  return j;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

unsigned AnalysisConfig::resolved_workers() const noexcept {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

void AnalysisConfig::validate() const {
  require(signal_region.extent.rows >= 1 && signal_region.extent.cols >= 1,
          ErrorCode::config, "signal_region must cover at least one superpixel");
  require(search_extent.row >= 0 && search_extent.col >= 0, ErrorCode::config,
          "search_extent must be non-negative");
  require(cs_search_frames >= 1, ErrorCode::config, "cs_search_frames must be >= 1");
  long long previous = 0;
  for (const GridSize& g : areas) {
    require(g.rows >= 1 && g.cols >= 1, ErrorCode::config, "area sizes must be >= 1");
    require(g.area() >= previous, ErrorCode::config, "areas must be sorted by increasing area");
    previous = g.area();
  }
  if (area_center) {
    require(std::isfinite(area_center->row) && std::isfinite(area_center->col), ErrorCode::config,
            "area_center must be finite");
  }
  require(z >= 2, ErrorCode::config, "z must be >= 2");
  require(n >= 2 && m >= 2, ErrorCode::config, "n and m must be >= 2");
  require(std::isfinite(cosmic_k) && cosmic_k > 0.0, ErrorCode::config, "cosmic_k must be > 0");
  require(std::isfinite(transmittance) && transmittance > 0.0 && transmittance <= 1.0,
          ErrorCode::config, "transmittance must lie in (0, 1]");
}

RunConfig::RunConfig() {
  experiment.modes.grid = {5, 8};
  experiment.geometry = FrameGeometry::symmetric(9, 12, {2, 2});
  analysis.signal_region = Region{{2, 2}, {5, 8}, Side::signal};
}

void RunConfig::validate() const {
  experiment.validate();
  analysis.validate();
  require(experiment.geometry.in_signal_half(analysis.signal_region), ErrorCode::config,
          "signal_region lies outside the signal half");
}

RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::config, "line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  RunConfig cfg;
  ObjectReader root(j, "");
  if (const Json* v = root.child("experiment")) read_experiment(*v, cfg.experiment);
  if (const Json* v = root.child("analysis")) read_analysis(*v, cfg.analysis);
  root.finish();
  try {
    cfg.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    fail(ErrorCode::config, std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_run_config(text.str());
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::string to_json(const RunConfig& cfg) {
  Json j;
  j["experiment"] = experiment_json(cfg.experiment);
  j["analysis"] = analysis_json(cfg.analysis);
  return j.dump(2) + "\n";
}

std::uint64_t experiment_digest(const ExperimentConfig& cfg) {
  const std::string text = experiment_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace twinbeam
