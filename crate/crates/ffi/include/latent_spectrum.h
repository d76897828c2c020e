#ifndef LATENT_SPECTRUM_H
#define LATENT_SPECTRUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_CONFIG = 3,
  LS_STATUS_CONTRACT = 4,
  LS_STATUS_TRAINING = 5,
  LS_STATUS_MISSING_UPSTREAM = 6,
  LS_STATUS_WOULD_OVERWRITE = 7,
  LS_STATUS_PARSE = 8,
  LS_STATUS_IO = 9,
  LS_STATUS_PANIC = 10,
} LsStatus;

/**
 * Parsed run configuration.
 */
typedef struct LsRunConfig LsRunConfig;

/**
 * Tabulated spectrum for modes `1..=M`.
 */
typedef struct LsSpectrumTable LsSpectrumTable;

/**
 * Physical configuration of the box. `textbook_coupling` selects
 * energy-denominator weighting of the expansion coefficients.
 */
typedef struct LsBoxSpec {
  double length;
  double kinetic;
  uint32_t frequency;
  double alpha;
  size_t modes;
  bool textbook_coupling;
} LsBoxSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL.
 */
size_t ls_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the number of bytes written excluding the NUL.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
size_t ls_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to an `LsBoxSpec`.
 */
enum LsStatus ls_box_spec_default(struct LsBoxSpec *out);

/**
 * Unperturbed energy `E⁰(n)` for real `n`.
 *
 * # Safety
 * `spec` and `out` must be valid pointers.
 */
enum LsStatus ls_e0(const struct LsBoxSpec *spec, double n, double *out);

/**
 * First-order correction `E¹(n)` for real `n`.
 *
 * # Safety
 * `spec` and `out` must be valid pointers.
 */
enum LsStatus ls_e1(const struct LsBoxSpec *spec, double n, double *out);

/**
 * Matrix element `⟨φₘ|V|φₙ⟩` for integer modes `m, n ≥ 1`.
 *
 * # Safety
 * `spec` and `out` must be valid pointers.
 */
enum LsStatus ls_coupling(const struct LsBoxSpec *spec, uint32_t m, uint32_t n, double *out);

/**
 * Continuous quantum number from `psi` at `z_box`. `corrected` selects the
 * exact inverse of φₙ; otherwise the literal `asin(L ψ² / 2)` form is used.
 *
 * # Safety
 * `spec` and `out` must be valid pointers.
 */
enum LsStatus ls_quantum_number(const struct LsBoxSpec *spec,
                                double psi,
                                double z_box,
                                bool corrected,
                                double *out);

/**
 * Builds the spectrum table for `spec`.
 *
 * # Safety
 * `spec` and `out` must be valid pointers. Release the handle with
 * [`ls_spectrum_table_free`].
 */
enum LsStatus ls_spectrum_table_new(const struct LsBoxSpec *spec, struct LsSpectrumTable **out);

/**
 * # Safety
 * `table` must be null or a handle from [`ls_spectrum_table_new`] that has
 * not been freed.
 */
void ls_spectrum_table_free(struct LsSpectrumTable *table);

/**
 * Number of modes in the table (0 for a null handle).
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t ls_spectrum_table_modes(const struct LsSpectrumTable *table);

/**
 * `E⁰ₙ` and `E¹ₙ` for mode `n` in `1..=M`.
 *
 * # Safety
 * `table`, `e0` and `e1` must be valid pointers.
 */
enum LsStatus ls_spectrum_table_energy(const struct LsSpectrumTable *table,
                                       size_t n,
                                       double *e0,
                                       double *e1);

/**
 * Tabulated `⟨φₘ|V|φₙ⟩` for `m, n` in `1..=M`.
 *
 * # Safety
 * `table` and `out` must be valid pointers.
 */
enum LsStatus ls_spectrum_table_coupling(const struct LsSpectrumTable *table,
                                         size_t m,
                                         size_t n,
                                         double *out);

/**
 * Orthogonal alignment score of two row-major `rows × cols` point clouds.
 *
 * # Safety
 * `a` and `b` must each point to `rows * cols` doubles; `out` must be valid.
 */
enum LsStatus ls_alignment(const double *a, const double *b, size_t rows, size_t cols, double *out);

/**
 * Distance between two class-mean spectra of length `len`.
 *
 * # Safety
 * `a` and `b` must each point to `len` doubles; `out` must be valid.
 */
enum LsStatus ls_spectrum_distance(const double *a, const double *b, size_t len, double *out);

/**
 * Parses a run configuration from text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer. Release
 * the handle with [`ls_config_free`].
 */
enum LsStatus ls_config_parse(const char *text, struct LsRunConfig **out);

/**
 * Loads a run configuration from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LsStatus ls_config_load(const char *path, struct LsRunConfig **out);

/**
 * Replaces the run seed.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum LsStatus ls_config_set_seed(struct LsRunConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be null or a live handle.
 */
void ls_config_free(struct LsRunConfig *config);

/**
 * Runs the configured stages into `out_dir`, or into the config's own
 * output directory when `out_dir` is null.
 *
 * # Safety
 * `config` must be a live handle; `out_dir` null or a NUL-terminated string.
 */
enum LsStatus ls_run_pipeline(const struct LsRunConfig *config,
                              const char *out_dir,
                              bool overwrite);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATENT_SPECTRUM_H */
