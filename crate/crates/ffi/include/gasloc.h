#ifndef GASLOC_H
#define GASLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GaslocStatus {
  GASLOC_STATUS_OK = 0,
  GASLOC_STATUS_NULL_POINTER = 1,
  GASLOC_STATUS_INVALID_PARAMETER = 2,
  GASLOC_STATUS_OUT_OF_SCOPE = 3,
  GASLOC_STATUS_MODEL_DOMAIN = 4,
  GASLOC_STATUS_DEGENERATE_GEOMETRY = 5,
  GASLOC_STATUS_NOT_CONVERGED = 6,
  GASLOC_STATUS_ESTIMATION_FAILED = 7,
  GASLOC_STATUS_FILTER_DESIGN = 8,
  GASLOC_STATUS_PARSE = 9,
  GASLOC_STATUS_IO = 10,
  GASLOC_STATUS_BUFFER_TOO_SMALL = 11,
  GASLOC_STATUS_PANIC = 12,
} GaslocStatus;

typedef enum GaslocScheme {
  GASLOC_SCHEME_AMPLITUDE = 0,
  GASLOC_SCHEME_ENERGY = 1,
} GaslocScheme;

/**
 * Opaque experiment configuration.
 */
typedef struct GaslocConfig GaslocConfig;

/**
 * Opaque result of a localisation run.
 */
typedef struct GaslocEstimate GaslocEstimate;

/**
 * Opaque linear-phase low-pass filter.
 */
typedef struct GaslocFilter GaslocFilter;

/**
 * Opaque sensor grid.
 */
typedef struct GaslocGrid GaslocGrid;

/**
 * Sensor response curve and divider circuit.
 */
typedef struct GaslocSensitivity {
  double a1;
  double b1;
  double d1;
  double v_in;
  double r_load;
  double r_o;
} GaslocSensitivity;

/**
 * A puff released on the ground.
 */
typedef struct GaslocPuff {
  /**
   * kg.
   */
  double mass;
  double source_x;
  double source_y;
  double wind_x;
  double wind_y;
  double sigma_x;
  double sigma_y;
  double sigma_z;
} GaslocPuff;

typedef struct GaslocDetectionConfig {
  enum GaslocScheme scheme;
  /**
   * V.
   */
  double amplitude_threshold;
  /**
   * J.
   */
  double energy_threshold;
  size_t window;
  size_t offset_window;
  /**
   * Ω.
   */
  double r_load;
} GaslocDetectionConfig;

/**
 * Detection outcome at one node. Rows and columns are 1-based.
 */
typedef struct GaslocDetection {
  size_t row;
  size_t col;
  bool detected;
  /**
   * s; NaN when nothing was detected.
   */
  double t;
  /**
   * V; NaN when nothing was detected.
   */
  double gamma;
  double rho_o;
} GaslocDetection;

typedef struct GaslocEstimationConfig {
  double sigma_x;
  double sigma_y;
  double sigma_z;
  /**
   * Evaporating surface, m².
   */
  double area;
  /**
   * s.
   */
  double emission_time;
  /**
   * Subtract each node's offset from its detection voltage before
   * inverting the sensor curve.
   */
  bool remove_offset;
} GaslocEstimationConfig;

/**
 * One location estimate produced by a node pair.
 */
typedef struct GaslocLocation {
  /**
   * 1 to 4.
   */
  uint8_t cluster;
  /**
   * 1-based pair index within the cluster.
   */
  size_t pair;
  double x;
  double y;
  bool complex;
} GaslocLocation;

typedef struct GaslocFilterSpec {
  /**
   * Hz.
   */
  double passband_edge;
  /**
   * Hz.
   */
  double stopband_edge;
  /**
   * Hz.
   */
  double sample_rate;
  /**
   * Even; zero picks the order from the ripple targets.
   */
  size_t order;
  /**
   * dB.
   */
  double passband_ripple;
  /**
   * dB.
   */
  double stopband_attenuation;
} GaslocFilterSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string. `*needed` receives the full length including the
 * terminator, so a caller can size the buffer with a first call that passes
 * a null `buf`.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes; `needed` must be null or valid.
 */
enum GaslocStatus gasloc_last_error(char *buf, size_t cap, size_t *needed);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gasloc_version(void);

struct GaslocSensitivity gasloc_sensitivity_default(void);

/**
 * # Safety
 * `sensor` and `volts` must be valid pointers.
 */
enum GaslocStatus gasloc_voltage_from_concentration(double concentration,
                                                    const struct GaslocSensitivity *sensor,
                                                    double *volts);

/**
 * # Safety
 * `sensor` and `concentration` must be valid pointers.
 */
enum GaslocStatus gasloc_concentration_from_voltage(double volts,
                                                    const struct GaslocSensitivity *sensor,
                                                    double *concentration);

/**
 * Output voltage the sensor produces at `concentration`. Unlike
 * `gasloc_voltage_from_concentration` this accepts any non-negative input:
 * it saturates above the detection scope and follows the curve below it.
 *
 * # Safety
 * `sensor` and `volts` must be valid pointers.
 */
enum GaslocStatus gasloc_sensed_voltage(double concentration,
                                        const struct GaslocSensitivity *sensor,
                                        double *volts);

/**
 * Ground-level concentration at `(x, y)` and time `t` after release.
 *
 * # Safety
 * `puff` and `concentration` must be valid pointers.
 */
enum GaslocStatus gasloc_sensor_concentration(const struct GaslocPuff *puff,
                                              double x,
                                              double y,
                                              double t,
                                              double *concentration);

struct GaslocDetectionConfig gasloc_detection_config_default(void);

/**
 * Runs the configured detector on one voltage trace from node `(row, col)`.
 *
 * # Safety
 * `samples` must be valid for `len` values; `config` and `out` must be valid.
 */
enum GaslocStatus gasloc_detect(size_t row,
                                size_t col,
                                const double *samples,
                                size_t len,
                                double sample_rate,
                                const struct GaslocDetectionConfig *config,
                                struct GaslocDetection *out);

/**
 * The 5 × 5 grid at 0.15 m spacing with the centre node holding the transmitter.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GaslocStatus gasloc_grid_default(struct GaslocGrid **out);

/**
 * Rectangular grid with its first node at `(origin_x, origin_y)`. Excluded
 * nodes are given as parallel row and column arrays.
 *
 * # Safety
 * `excluded_rows` and `excluded_cols` must be valid for `excluded_len`
 * values; `out` must be valid.
 */
enum GaslocStatus gasloc_grid_new(size_t rows,
                                  size_t cols,
                                  double spacing,
                                  double origin_x,
                                  double origin_y,
                                  const size_t *excluded_rows,
                                  const size_t *excluded_cols,
                                  size_t excluded_len,
                                  struct GaslocGrid **out);

/**
 * Number of sensing nodes.
 *
 * # Safety
 * `grid` must come from a grid constructor; `count` must be valid.
 */
enum GaslocStatus gasloc_grid_node_count(const struct GaslocGrid *grid, size_t *count);

/**
 * # Safety
 * `grid` must be null or come from a grid constructor, and must not be used
 * afterwards.
 */
void gasloc_grid_free(struct GaslocGrid *grid);

struct GaslocEstimationConfig gasloc_estimation_config_default(void);

/**
 * Estimates the source from the detections of every grid node.
 *
 * # Safety
 * `detections` must be valid for `len` entries; the other pointers must be
 * valid. The result must be released with `gasloc_estimate_free`.
 */
enum GaslocStatus gasloc_localize(const struct GaslocGrid *grid,
                                  const struct GaslocDetection *detections,
                                  size_t len,
                                  const struct GaslocSensitivity *sensor,
                                  const struct GaslocEstimationConfig *config,
                                  struct GaslocEstimate **out);

/**
 * # Safety
 * `estimate` must come from `gasloc_localize`; `count` must be valid.
 */
enum GaslocStatus gasloc_estimate_count(const struct GaslocEstimate *estimate, size_t *count);

/**
 * # Safety
 * `estimate` must come from `gasloc_localize`; `location` must be valid.
 */
enum GaslocStatus gasloc_estimate_get(const struct GaslocEstimate *estimate,
                                      size_t index,
                                      struct GaslocLocation *location);

/**
 * Signed wind velocity and released mass inferred during localisation.
 *
 * # Safety
 * `estimate` must come from `gasloc_localize`; the outputs must be valid.
 */
enum GaslocStatus gasloc_estimate_wind(const struct GaslocEstimate *estimate,
                                       double *ux,
                                       double *uy,
                                       double *mass);

/**
 * # Safety
 * `estimate` must be null or come from `gasloc_localize`, and must not be
 * used afterwards.
 */
void gasloc_estimate_free(struct GaslocEstimate *estimate);

struct GaslocFilterSpec gasloc_filter_spec_default(void);

/**
 * # Safety
 * `spec` and `out` must be valid. Release the filter with `gasloc_filter_free`.
 */
enum GaslocStatus gasloc_filter_design(const struct GaslocFilterSpec *spec,
                                       struct GaslocFilter **out);

/**
 * Copies the taps into `taps`. `*len` always receives the tap count.
 *
 * # Safety
 * `filter` must come from `gasloc_filter_design`; `taps` must be null or
 * valid for `cap` values; `len` must be valid.
 */
enum GaslocStatus gasloc_filter_taps(const struct GaslocFilter *filter,
                                     double *taps,
                                     size_t cap,
                                     size_t *len);

/**
 * Measured passband deviation from unity and stopband peak.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GaslocStatus gasloc_filter_ripple(const struct GaslocFilter *filter,
                                       double *passband,
                                       double *stopband);

/**
 * Delay-compensated filtering of `input` into `output`, both of length `len`.
 *
 * # Safety
 * `filter` must come from `gasloc_filter_design`; `input` and `output` must
 * be valid for `len` values and may not overlap.
 */
enum GaslocStatus gasloc_filter_apply(const struct GaslocFilter *filter,
                                      const double *input,
                                      double *output,
                                      size_t len);

/**
 * # Safety
 * `filter` must be null or come from `gasloc_filter_design`, and must not be
 * used afterwards.
 */
void gasloc_filter_free(struct GaslocFilter *filter);

/**
 * # Safety
 * `out` must be valid. Release with `gasloc_config_free`.
 */
enum GaslocStatus gasloc_config_default(struct GaslocConfig **out);

/**
 * Reads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum GaslocStatus gasloc_config_load(const char *path, struct GaslocConfig **out);

/**
 * # Safety
 * `config` must come from a config constructor.
 */
enum GaslocStatus gasloc_config_set_seed(struct GaslocConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must come from a config constructor.
 */
enum GaslocStatus gasloc_config_set_measurements(struct GaslocConfig *config, size_t measurements);

/**
 * Simulates, detects and localises every measurement and writes the report
 * CSV files into `out_dir`. `*failures` receives the number of measurements
 * without a location estimate.
 *
 * # Safety
 * `config` must come from a config constructor; `out_dir` must be a
 * NUL-terminated string; `failures` must be null or valid.
 */
enum GaslocStatus gasloc_run_experiment(const struct GaslocConfig *config,
                                        const char *out_dir,
                                        size_t *failures);

/**
 * # Safety
 * `config` must be null or come from a config constructor, and must not be
 * used afterwards.
 */
void gasloc_config_free(struct GaslocConfig *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GASLOC_H */
