#ifndef HEMTKIT_H
#define HEMTKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HkStatus {
  HK_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or an out-of-range argument.
  HK_STATUS_INVALID_ARGUMENT = 1,
  // File could not be read or written.
  HK_STATUS_IO = 2,
  // Input parsed but is not a valid problem or data set.
  HK_STATUS_INVALID_INPUT = 3,
  // A numerical step failed.
  HK_STATUS_NUMERICAL = 4,
  // Iteration limit reached; the handle still holds the best iterate.
  HK_STATUS_NOT_CONVERGED = 5,
  // Requested item does not exist.
  HK_STATUS_NOT_FOUND = 6,
  // Internal panic caught at the boundary.
  HK_STATUS_PANIC = 7,
} HkStatus;

// Opaque band-diagram solution.
typedef struct HkBandSolution HkBandSolution;

// Opaque extraction report.
typedef struct HkReport HkReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Release with
// [`hk_string_free`].
char *hk_last_error_message(void);

// # Safety
// `s` is null or was returned by this library and not yet freed.
void hk_string_free(char *s);

// Library version, static storage.
const char *hk_version(void);

// Every extraction the fixture directory supports.
//
// # Safety
// `dir` is a valid string; `out` is a valid pointer.
enum HkStatus hk_extract_device_dir(const char *dir, struct HkReport **out);

// Transfer-family extraction with default smoothing. `region` is an
// [`HkRegion`] value.
//
// # Safety
// `csv` and `meta` are valid strings; `out` is a valid pointer.
enum HkStatus hk_extract_transfer(const char *csv,
                                  const char *meta,
                                  int region,
                                  struct HkReport **out);

// Number of entries, including failed ones.
//
// # Safety
// `report` is null or a live handle.
size_t hk_report_entry_count(const struct HkReport *report);

// Value of the first entry called `name`, optionally restricted to entries
// whose condition `cond_key` equals `cond_value`. Pass a null `cond_key` to
// match any conditions.
//
// # Safety
// `report` is a live handle, `name` a valid string, `cond_key` null or a
// valid string, `value` a valid pointer.
enum HkStatus hk_report_value(const struct HkReport *report,
                              const char *name,
                              const char *cond_key,
                              double cond_value,
                              double *value);

// Report as JSON. Release with [`hk_string_free`]; null if `report` is null.
//
// # Safety
// `report` is null or a live handle.
char *hk_report_to_json(const struct HkReport *report);

// # Safety
// `report` is null or a live handle, not used afterwards.
void hk_report_free(struct HkReport *report);

// Drain current of the compact model, A. `params_json` is a ground-truth
// parameter document; null selects the built-in reference device.
//
// # Safety
// `params_json` is null or a valid string; `out` is a valid pointer.
enum HkStatus hk_model_current(const char *params_json,
                               double vgs,
                               double vds,
                               double temperature_k,
                               double *out);

// Writes a fixture with the reference bias plan into `dir`.
//
// # Safety
// `params_json` is null or a valid string; `dir` and `device_id` are valid
// strings.
enum HkStatus hk_generate_fixture(const char *params_json, const char *dir, const char *device_id);

// Solves a stack given as JSON. On [`HkStatus::NotConverged`] `out` still
// receives the best iterate.
//
// # Safety
// `stack_json` is a valid string; `out` is a valid pointer.
enum HkStatus hk_band_solve(const char *stack_json, int quantum, struct HkBandSolution **out);

// Number of grid nodes, 0 for a null handle.
//
// # Safety
// `s` is null or a live handle.
size_t hk_band_len(const struct HkBandSolution *s);

// Sheet density, cm⁻²; NaN for a null handle.
//
// # Safety
// `s` is null or a live handle.
double hk_band_sheet_density(const struct HkBandSolution *s);

// Number of bound states, 0 for classical solves.
//
// # Safety
// `s` is null or a live handle.
size_t hk_band_state_count(const struct HkBandSolution *s);

// Copies z (nm), E_c (eV) and n (cm⁻³) into caller buffers of `len`
// elements each, which must equal [`hk_band_len`]. Any buffer may be null.
// `energies` receives up to `energies_len` subband energies (eV).
//
// # Safety
// `s` is a live handle; non-null buffers hold at least the stated lengths.
enum HkStatus hk_band_copy(const struct HkBandSolution *s,
                           double *z,
                           double *ec,
                           double *n,
                           size_t len,
                           double *energies,
                           size_t energies_len);

// # Safety
// `s` is null or a live handle, not used afterwards.
void hk_band_free(struct HkBandSolution *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEMTKIT_H */
