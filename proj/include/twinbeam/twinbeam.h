/* C interface to the twin-beam calibration library.
 *
 * Objects are opaque handles released with their _free function. Every call
 * that can fail returns a tb_status; on failure tb_last_error() describes the
 * problem for the calling thread until its next failing call. */
#ifndef TWINBEAM_H
#define TWINBEAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(TWINBEAM_BUILDING_LIBRARY)
#define TB_API __attribute__((visibility("default")))
#else
#define TB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tb_status {
  TB_OK = 0,
  TB_INVALID_ARGUMENT = 1,
  TB_DOMAIN = 2,
  TB_GEOMETRY = 3,
  TB_DEGENERATE = 4,
  TB_CONFIG = 5,
  TB_CORRUPT_HEADER = 6,
  TB_TRUNCATED_PAYLOAD = 7,
  TB_DIGEST_MISMATCH = 8,
  TB_IO = 9,
  TB_RESOURCE = 10,
  TB_SELFTEST_FAILED = 20,
  TB_INTERNAL = 99
} tb_status;

typedef enum tb_frame_kind { TB_PDC_ON = 0, TB_BACKGROUND = 1 } tb_frame_kind;

typedef struct tb_config tb_config;
typedef struct tb_stack tb_stack;

TB_API const char* tb_version(void);
TB_API const char* tb_status_name(tb_status status);
TB_API const char* tb_last_error(void);

/* Configuration */
TB_API tb_status tb_config_default(tb_config** out);
TB_API tb_status tb_config_table1(tb_config** out);
TB_API tb_status tb_config_load(const char* path, tb_config** out);
TB_API tb_status tb_config_parse(const char* json_text, tb_config** out);
TB_API void tb_config_free(tb_config* cfg);
TB_API tb_status tb_config_set_seed(tb_config* cfg, uint64_t seed);
TB_API tb_status tb_config_seed(const tb_config* cfg, uint64_t* out);
TB_API tb_status tb_config_digest(const tb_config* cfg, uint64_t* out);
/* PDC and background frame totals (Z*N and Z*M). */
TB_API tb_status tb_config_frame_counts(const tb_config* cfg, uint64_t* pdc, uint64_t* background);
/* Copies the JSON form into buf (NUL-terminated) when capacity allows;
 * *needed receives the size including the terminator. */
TB_API tb_status tb_config_to_json(const tb_config* cfg, char* buf, size_t capacity, size_t* needed);

/* Frame stacks */
TB_API tb_status tb_stack_generate(const tb_config* cfg, tb_frame_kind kind, uint64_t count,
                                   tb_stack** out);
TB_API tb_status tb_stack_write(const tb_stack* stack, const char* path);
TB_API tb_status tb_stack_read(const char* path, tb_stack** out);
TB_API void tb_stack_free(tb_stack* stack);
TB_API uint64_t tb_stack_count(const tb_stack* stack);
TB_API int tb_stack_rows(const tb_stack* stack);
TB_API int tb_stack_cols(const tb_stack* stack);
TB_API tb_frame_kind tb_stack_kind(const tb_stack* stack);
TB_API uint64_t tb_stack_digest(const tb_stack* stack);
/* Row-major counts of frame `index`, valid until the stack is freed. */
TB_API tb_status tb_stack_frame(const tb_stack* stack, uint64_t index, const uint32_t** counts);
/* Sample standard deviation of the relative pulse energies (NaN when unknown). */
TB_API tb_status tb_stack_pulse_energy_std(const tb_stack* stack, double* out);
/* Copy of the configuration the stack was generated from. */
TB_API tb_status tb_stack_config(const tb_stack* stack, tb_config** out);

/* Analyses. out_dir may be NULL to skip writing CSV tables. */
typedef struct tb_cs_result {
  int shift_row;
  int shift_col;
  int searched;
  int ties;
  double min_value;
  double plateau;
  double curvature_row;
  double curvature_col;
} tb_cs_result;

TB_API tb_status tb_find_cs(const tb_config* cfg, const tb_stack* pdc, const char* out_dir,
                            tb_cs_result* out);

/* `background` may be NULL. */
TB_API tb_status tb_area_scan(const tb_config* cfg, const tb_stack* pdc, const tb_stack* background,
                              const char* out_dir, size_t* points);

typedef struct tb_calibration {
  double eta_s;
  double eta_i;
  double alpha_b;
  double sigma_ab;
  double u_eta_s;
  double u_alpha_b;
  double u_sigma_ab;
  double sem_eta_s;
  double u_combined;
  double eta_s_detector;
  double excess_noise;
  int z_repeats;
  int cs_shift_row;
  int cs_shift_col;
  uint64_t discarded;
  int flags; /* TB_FLAG_* bits */
} tb_calibration;

enum {
  TB_FLAG_SIGMA_NEGATIVE = 1,
  TB_FLAG_ETA_OUT_OF_RANGE = 2,
  TB_FLAG_DETECTOR_OUT_OF_RANGE = 4,
  TB_FLAG_BACKGROUND_EXCEEDS_SIGNAL = 8
};

TB_API tb_status tb_calibrate(const tb_config* cfg, const tb_stack* pdc, const tb_stack* background,
                              const char* out_dir, tb_calibration* out);

/* Simulates and calibrates the configured run (the Table 1 configuration
 * when cfg is NULL) and writes table1.csv next to the calibration tables. */
TB_API tb_status tb_reproduce_table1(const tb_config* cfg, const char* out_dir, tb_calibration* out);

typedef void (*tb_line_callback)(const char* line, void* user);

/* Runs the built-in check suite; TB_SELFTEST_FAILED when any check fails. */
TB_API tb_status tb_selftest(tb_line_callback on_line, void* user, int* failures);

/* Closed-form predictors. */
TB_API tb_status tb_predict_variance(double mu, double eta, double m_tot, double* out);
TB_API tb_status tb_predict_covariance(double mu, double eta_s, double eta_i, double m_tot, double* out);
TB_API tb_status tb_predict_sigma(double eta_s, double eta_i, double mu, double m_tot, double* out);
TB_API tb_status tb_predict_sigma_with_jitter(double eta_s, double eta_i, double mu_bar, double var_mu,
                                              double m_tot, double* out);
TB_API tb_status tb_predict_sigma_alpha(double alpha, double eta_s, double* out);

#ifdef __cplusplus
}
#endif

#endif /* TWINBEAM_H */
