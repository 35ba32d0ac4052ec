#ifndef PHASORNET_H
#define PHASORNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PnStatus {
  PN_STATUS_OK = 0,
  PN_STATUS_NULL_POINTER = 1,
  PN_STATUS_INVALID_ARGUMENT = 2,
  PN_STATUS_LENGTH_MISMATCH = 3,
  PN_STATUS_IO = 4,
  PN_STATUS_MALFORMED_MODEL = 5,
  // Temporal run produced no output spikes.
  PN_STATUS_SILENT = 6,
  PN_STATUS_PANIC = 7,
} PnStatus;

// Opaque trained model.
typedef struct PnModel PnModel;

// Resonate-and-fire parameters; fill with [`pn_rf_params_default`].
typedef struct PnRfParams {
  double period;
  double leakage;
  double box_width;
  double threshold;
  double refractory;
  size_t steps_per_cycle;
  size_t n_cycles;
} PnRfParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty if none. The pointer is
// valid until the next failing call on the same thread.
const char *pn_last_error(void);

// Loads a model JSON file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum PnStatus pn_model_load(const char *path, struct PnModel **out);

// Releases a model; null is ignored.
//
// # Safety
// `model` must come from [`pn_model_load`] and not be freed twice.
void pn_model_free(struct PnModel *model);

// Input (pixel) count and class count of a model.
//
// # Safety
// `model` must be a live handle; `input_dim` and `n_classes` writable.
enum PnStatus pn_model_dims(const struct PnModel *model, size_t *input_dim, size_t *n_classes);

// Atemporal inference on one image of intensities in [0, 1]. Writes the
// output phases (`n_classes` values) when `phases_out` is non-null and the
// predicted class to `class_out`.
//
// # Safety
// `img` must hold `len` doubles; `phases_out` room for `n_classes`.
enum PnStatus pn_predict_atemporal(const struct PnModel *model,
                                   const double *img,
                                   size_t len,
                                   double *phases_out,
                                   size_t *class_out);

// Default resonate-and-fire parameters.
struct PnRfParams pn_rf_params_default(void);

// Spiking inference on one image. The decoded output phases go to
// `phases_out` (NaN for neurons that never fired) and the total synaptic
// operation count to `synops_out`, both optional. Returns
// `PN_STATUS_SILENT` when no output neuron fired.
//
// # Safety
// As [`pn_predict_atemporal`]; `params` must be readable.
enum PnStatus pn_simulate(const struct PnModel *model,
                          const double *img,
                          size_t len,
                          const struct PnRfParams *params,
                          double *phases_out,
                          uint64_t *synops_out,
                          size_t *class_out);

// Phasor activation of one neuron: the normalized angle of `Σ wᵢ·e^{iπxᵢ}`.
//
// # Safety
// `x` and `w` must each hold `n` doubles; `out` writable.
enum PnStatus pn_activate(const double *x, const double *w, size_t n, double *out);

// `Σ wᵢ·e^{−iπxᵢ}`, the potential after one lossless cycle of weighted
// impulses; real and imaginary parts go to `re` and `im`.
//
// # Safety
// `x` and `w` must each hold `n` doubles; `re` and `im` writable.
enum PnStatus pn_impulse_closed_form(const double *x,
                                     const double *w,
                                     size_t n,
                                     double *re,
                                     double *im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASORNET_H */
