#include "twinbeam/twinbeam.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "twinbeam/calibration.hpp"
#include "twinbeam/pipeline_io.hpp"
#include "twinbeam/selftest.hpp"

using namespace twinbeam;

struct tb_config {
  RunConfig cfg;
};

struct tb_stack {
  RunConfig config;
  FrameKind kind = FrameKind::pdc_on;
  int rows = 0;
  int cols = 0;
  std::uint64_t digest = 0;
  std::vector<Frame> frames;
};

namespace {

thread_local std::string g_last_error;

tb_status set_error(tb_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
tb_status guarded(F&& body) {
  try {
    body();
    return TB_OK;
  } catch (const Error& e) {
    return set_error(static_cast<tb_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(TB_RESOURCE, "out of memory");
  } catch (const std::exception& e) {
    return set_error(TB_INTERNAL, e.what());
  } catch (...) {
    return set_error(TB_INTERNAL, "unknown error");
  }
}

#define TB_REQUIRE_ARG(cond, what)                        \
  do {                                                    \
    if (!(cond)) return set_error(TB_INVALID_ARGUMENT, what); \
  } while (0)

std::string output_dir(const char* dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::io, std::string("cannot create output directory ") + dir);
  return dir;
}

std::string join(const std::string& dir, const char* file) {
  return (std::filesystem::path(dir) / file).string();
}

void fill_calibration(const CalibrationResult& r, tb_calibration* out) {
  out->eta_s = r.eta_s;
  out->eta_i = r.eta_i;
  out->alpha_b = r.alpha_b;
  out->sigma_ab = r.sigma_ab;
  out->u_eta_s = r.u_eta_s;
  out->u_alpha_b = r.u_alpha_b;
  out->u_sigma_ab = r.u_sigma_ab;
  out->sem_eta_s = r.sem_eta_s;
  out->u_combined = r.u_combined;
  out->eta_s_detector = r.eta_s_detector;
  out->excess_noise = r.excess_noise;
  out->z_repeats = r.z_repeats;
  out->cs_shift_row = r.cs_shift.row;
  out->cs_shift_col = r.cs_shift.col;
  out->discarded = r.discarded();
  out->flags = (r.sigma_negative ? TB_FLAG_SIGMA_NEGATIVE : 0) |
               (r.eta_out_of_range ? TB_FLAG_ETA_OUT_OF_RANGE : 0) |
               (r.detector_out_of_range ? TB_FLAG_DETECTOR_OUT_OF_RANGE : 0) |
               (r.background_exceeds_signal ? TB_FLAG_BACKGROUND_EXCEEDS_SIGNAL : 0);
}

tb_status predictor(double* out, double (*fn)(double, double, double, double), double a, double b,
                    double c, double d) {
  TB_REQUIRE_ARG(out, "out must not be NULL");
  return guarded([&] { *out = fn(a, b, c, d); });
}

}  // namespace

extern "C" {

TB_API const char* tb_version(void) { return "1.0.0"; }

TB_API const char* tb_status_name(tb_status status) {
  switch (status) {
    case TB_OK: return "ok";
    case TB_SELFTEST_FAILED: return "selftest-failed";
    case TB_INTERNAL: return "internal";
    default: break;
  }
  if (status >= TB_INVALID_ARGUMENT && status <= TB_RESOURCE) {
    return to_string(static_cast<ErrorCode>(status));
  }
  return "unknown";
}

TB_API const char* tb_last_error(void) { return g_last_error.c_str(); }

TB_API tb_status tb_config_default(tb_config** out) {
  TB_REQUIRE_ARG(out, "out must not be NULL");
  return guarded([&] { *out = new tb_config{}; });
}

TB_API tb_status tb_config_table1(tb_config** out) {
  TB_REQUIRE_ARG(out, "out must not be NULL");
  return guarded([&] { *out = new tb_config{table1_run_config()}; });
}

TB_API tb_status tb_config_load(const char* path, tb_config** out) {
  TB_REQUIRE_ARG(path && out, "path and out must not be NULL");
  return guarded([&] { *out = new tb_config{load_run_config(path)}; });
}

TB_API tb_status tb_config_parse(const char* json_text, tb_config** out) {
  TB_REQUIRE_ARG(json_text && out, "json_text and out must not be NULL");
  return guarded([&] { *out = new tb_config{parse_run_config(json_text)}; });
}

TB_API void tb_config_free(tb_config* cfg) { delete cfg; }

TB_API tb_status tb_config_set_seed(tb_config* cfg, uint64_t seed) {
  TB_REQUIRE_ARG(cfg, "cfg must not be NULL");
  cfg->cfg.experiment.master_seed = seed;
  return TB_OK;
}

TB_API tb_status tb_config_seed(const tb_config* cfg, uint64_t* out) {
  TB_REQUIRE_ARG(cfg && out, "cfg and out must not be NULL");
  *out = cfg->cfg.experiment.master_seed;
  return TB_OK;
}

TB_API tb_status tb_config_digest(const tb_config* cfg, uint64_t* out) {
  TB_REQUIRE_ARG(cfg && out, "cfg and out must not be NULL");
  return guarded([&] { *out = experiment_digest(cfg->cfg.experiment); });
}

TB_API tb_status tb_config_frame_counts(const tb_config* cfg, uint64_t* pdc, uint64_t* background) {
  TB_REQUIRE_ARG(cfg && pdc && background, "arguments must not be NULL");
  *pdc = cfg->cfg.analysis.pdc_frames();
  *background = cfg->cfg.analysis.background_frames();
  return TB_OK;
}

TB_API tb_status tb_config_to_json(const tb_config* cfg, char* buf, size_t capacity, size_t* needed) {
  TB_REQUIRE_ARG(cfg && needed, "cfg and needed must not be NULL");
  return guarded([&] {
    const std::string text = to_json(cfg->cfg);
    *needed = text.size() + 1;
    if (buf && capacity >= *needed) std::memcpy(buf, text.c_str(), *needed);
  });
}

TB_API tb_status tb_stack_generate(const tb_config* cfg, tb_frame_kind kind, uint64_t count,
                                   tb_stack** out) {
  TB_REQUIRE_ARG(cfg && out, "cfg and out must not be NULL");
  TB_REQUIRE_ARG(kind == TB_PDC_ON || kind == TB_BACKGROUND, "unknown frame kind");
  return guarded([&] {
    auto s = std::make_unique<tb_stack>();
    s->config = cfg->cfg;
    s->kind = static_cast<FrameKind>(kind);
    s->frames = generate_stack(cfg->cfg.experiment, count, s->kind,
                               cfg->cfg.analysis.resolved_workers());
    s->rows = cfg->cfg.experiment.geometry.rows;
    s->cols = cfg->cfg.experiment.geometry.cols;
    s->digest = experiment_digest(cfg->cfg.experiment);
    *out = s.release();
  });
}

TB_API tb_status tb_stack_write(const tb_stack* stack, const char* path) {
  TB_REQUIRE_ARG(stack && path, "stack and path must not be NULL");
  return guarded([&] { write_stack(path, stack->frames, stack->config); });
}

TB_API tb_status tb_stack_read(const char* path, tb_stack** out) {
  TB_REQUIRE_ARG(path && out, "path and out must not be NULL");
  return guarded([&] {
    StackFile f = read_stack(path);
    auto s = std::make_unique<tb_stack>();
    s->config = std::move(f.config);
    s->kind = f.kind;
    s->rows = f.rows;
    s->cols = f.cols;
    s->digest = f.digest;
    s->frames = std::move(f.frames);
    *out = s.release();
  });
}

TB_API void tb_stack_free(tb_stack* stack) { delete stack; }

TB_API uint64_t tb_stack_count(const tb_stack* stack) { return stack ? stack->frames.size() : 0; }
TB_API int tb_stack_rows(const tb_stack* stack) { return stack ? stack->rows : 0; }
TB_API int tb_stack_cols(const tb_stack* stack) { return stack ? stack->cols : 0; }
TB_API tb_frame_kind tb_stack_kind(const tb_stack* stack) {
  return stack ? static_cast<tb_frame_kind>(stack->kind) : TB_PDC_ON;
}
TB_API uint64_t tb_stack_digest(const tb_stack* stack) { return stack ? stack->digest : 0; }

TB_API tb_status tb_stack_frame(const tb_stack* stack, uint64_t index, const uint32_t** counts) {
  TB_REQUIRE_ARG(stack && counts, "stack and counts must not be NULL");
  TB_REQUIRE_ARG(index < stack->frames.size(), "frame index out of range");
  *counts = stack->frames[index].counts.data();
  return TB_OK;
}

TB_API tb_status tb_stack_pulse_energy_std(const tb_stack* stack, double* out) {
  TB_REQUIRE_ARG(stack && out, "stack and out must not be NULL");
  if (stack->frames.size() < 2) {
    *out = std::numeric_limits<double>::quiet_NaN();
    return TB_OK;
  }
  std::vector<double> e;
  e.reserve(stack->frames.size());
  for (const Frame& f : stack->frames) e.push_back(f.pulse_energy);
  return guarded([&] { *out = std::sqrt(variance(e)); });
}

TB_API tb_status tb_stack_config(const tb_stack* stack, tb_config** out) {
  TB_REQUIRE_ARG(stack && out, "stack and out must not be NULL");
  return guarded([&] { *out = new tb_config{stack->config}; });
}

TB_API tb_status tb_find_cs(const tb_config* cfg, const tb_stack* pdc, const char* out_dir,
                            tb_cs_result* out) {
  TB_REQUIRE_ARG(cfg && pdc && out, "cfg, pdc and out must not be NULL");
  return guarded([&] {
    cfg->cfg.validate();
    const CsSearchResult cs = find_cs(cfg->cfg, pdc->frames);
    out->shift_row = cs.shift.row;
    out->shift_col = cs.shift.col;
    out->searched = cs.searched ? 1 : 0;
    out->ties = cs.searched ? cs.map.ties : 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out->min_value = cs.searched ? cs.map.min_value : nan;
    const int d = std::min(3, std::max(cs.map.extent.row, cs.map.extent.col));
    out->plateau = cs.searched && d > 0 ? cs.map.plateau(d) : nan;
    out->curvature_row = cs.searched ? cs.map.curvature_row : nan;
    out->curvature_col = cs.searched ? cs.map.curvature_col : nan;
    if (out_dir) {
      const std::string dir = output_dir(out_dir);
      write_cs_search(join(dir, "cs_search.csv"), cs);
      if (cs.searched) write_cs_map(join(dir, "cs_map.csv"), cs.map);
    }
  });
}

TB_API tb_status tb_area_scan(const tb_config* cfg, const tb_stack* pdc, const tb_stack* background,
                              const char* out_dir, size_t* points) {
  TB_REQUIRE_ARG(cfg && pdc, "cfg and pdc must not be NULL");
  return guarded([&] {
    const std::vector<Frame> none;
    const AreaScanResult r =
        run_area_scan(cfg->cfg, pdc->frames, background ? background->frames : none);
    if (points) *points = r.points.size();
    if (out_dir) write_area_scan(join(output_dir(out_dir), "area_scan.csv"), r.points);
  });
}

TB_API tb_status tb_calibrate(const tb_config* cfg, const tb_stack* pdc, const tb_stack* background,
                              const char* out_dir, tb_calibration* out) {
  TB_REQUIRE_ARG(cfg && pdc && background, "cfg, pdc and background must not be NULL");
  return guarded([&] {
    const CalibrationResult r = calibrate(cfg->cfg, pdc->frames, background->frames);
    if (out) fill_calibration(r, out);
    if (out_dir) emit_tables(output_dir(out_dir), r);
  });
}

TB_API tb_status tb_reproduce_table1(const tb_config* cfg, const char* out_dir, tb_calibration* out) {
  return guarded([&] {
    const RunConfig run = cfg ? cfg->cfg : table1_run_config();
    const Table1Report report = reproduce_table1(run);
    if (out) fill_calibration(report.calibration, out);
    if (out_dir) {
      const std::string dir = output_dir(out_dir);
      emit_tables(dir, report.calibration);
      write_table1(join(dir, "table1.csv"), report);
    }
  });
}

TB_API tb_status tb_selftest(tb_line_callback on_line, void* user, int* failures) {
  int failed = 0;
  const tb_status st = guarded([&] {
    run_selftest([&](const SelftestCheck& c) {
      if (!c.passed) ++failed;
      if (on_line) {
        const std::string line = std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail;
        on_line(line.c_str(), user);
      }
    });
  });
  if (failures) *failures = failed;
  if (st != TB_OK) return st;
  if (failed > 0) return set_error(TB_SELFTEST_FAILED, std::to_string(failed) + " selftest check(s) failed");
  return TB_OK;
}

TB_API tb_status tb_predict_variance(double mu, double eta, double m_tot, double* out) {
  return predictor(out, [](double a, double b, double c, double) { return predict_variance(a, b, c); },
                   mu, eta, m_tot, 0.0);
}

TB_API tb_status tb_predict_covariance(double mu, double eta_s, double eta_i, double m_tot, double* out) {
  return predictor(out, [](double a, double b, double c, double d) { return predict_covariance(a, b, c, d); },
                   mu, eta_s, eta_i, m_tot);
}

TB_API tb_status tb_predict_sigma(double eta_s, double eta_i, double mu, double m_tot, double* out) {
  return predictor(out,
                   [](double a, double b, double c, double d) { return predict_sigma({a, b}, c, d); },
                   eta_s, eta_i, mu, m_tot);
}

TB_API tb_status tb_predict_sigma_with_jitter(double eta_s, double eta_i, double mu_bar, double var_mu,
                                              double m_tot, double* out) {
  TB_REQUIRE_ARG(out, "out must not be NULL");
  return guarded([&] { *out = predict_sigma_with_jitter({eta_s, eta_i}, mu_bar, var_mu, m_tot); });
}

TB_API tb_status tb_predict_sigma_alpha(double alpha, double eta_s, double* out) {
  return predictor(out, [](double a, double b, double, double) { return predict_sigma_alpha(a, b); },
                   alpha, eta_s, 0.0, 0.0);
}

}  // extern "C"
