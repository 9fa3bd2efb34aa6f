/* C interface to the patch-based MLP denoiser.
 *
 * Every fallible call returns mlpd_status; on anything but MLPD_OK the
 * out-parameters are untouched and mlpd_last_error() describes what went
 * wrong (thread-local, valid until the next failing call on that thread).
 * Handles are created by the library and must be released with the matching
 * _destroy function. Pointers returned by accessor functions stay valid until
 * their handle is destroyed or mutated.
 */

#ifndef MLPDENOISE_H
#define MLPDENOISE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mlpd_status {
  MLPD_OK = 0,
  MLPD_ERR_ARG = 1,      /* invalid argument, bad parse, bad shape */
  MLPD_ERR_IO = 2,       /* file missing, unreadable, malformed */
  MLPD_ERR_NUMERIC = 3,  /* non-finite values, divergence, no convergence */
  MLPD_ERR_INTERNAL = 4, /* anything else; indicates a bug */
} mlpd_status;

const char* mlpd_last_error(void);

/* ---- random streams ---- */

typedef struct mlpd_rng mlpd_rng;

mlpd_rng* mlpd_rng_create(uint64_t seed);
/* Independent stream derived from the parent's seed; the parent is not
 * advanced. */
mlpd_rng* mlpd_rng_split(const mlpd_rng* rng, uint64_t index);
void mlpd_rng_destroy(mlpd_rng* rng);

uint64_t mlpd_rng_next_u64(mlpd_rng* rng);
double mlpd_rng_uniform(mlpd_rng* rng); /* [0,1) */
mlpd_status mlpd_rng_gaussian(mlpd_rng* rng, double mean, double stddev,
                              double* out);
const char* mlpd_rng_algorithm(const mlpd_rng* rng);

/* ---- images ---- */

typedef struct mlpd_image mlpd_image;

/* pixels: row-major doubles in [0,255] pixel units, or NULL for all-zero.
 * Values outside the range are allowed (noisy images are not clipped). */
mlpd_status mlpd_image_create(size_t width, size_t height,
                              const double* pixels, mlpd_image** out);
mlpd_status mlpd_image_load(const char* path, mlpd_image** out);
/* Format picked by extension: .pgm or .png. */
mlpd_status mlpd_image_save(const mlpd_image* img, const char* path);
void mlpd_image_destroy(mlpd_image* img);

size_t mlpd_image_width(const mlpd_image* img);
size_t mlpd_image_height(const mlpd_image* img);
const double* mlpd_image_pixels(const mlpd_image* img);

mlpd_status mlpd_psnr(const mlpd_image* a, const mlpd_image* b, double* out);

/* kind: "awg", "salt_pepper", "stripe" or "jpeg_block". Parameters not used
 * by the kind are ignored. The rng is advanced. */
mlpd_status mlpd_apply_noise(const mlpd_image* img, const char* kind,
                             double sigma, double p, double sigma_s,
                             int quality, mlpd_rng* rng, mlpd_image** out);

/* Grid of equally sized patches, each rescaled to full contrast, separated by
 * mid-gray gutters of `pad` pixels. patches: n * patch_len doubles,
 * patch_len a perfect square. */
mlpd_status mlpd_montage(const double* patches, size_t n, size_t patch_len,
                         size_t cols, size_t pad, mlpd_image** out);

/* ---- networks ---- */

typedef struct mlpd_mlp mlpd_mlp;

/* arch examples: "(39,4x2047,17)", "(17,4x2047)",
 * "(39,14x13,4x2047,13)" (block matching). */
mlpd_status mlpd_mlp_init(const char* arch, uint64_t seed, mlpd_mlp** out);
mlpd_status mlpd_mlp_load(const char* path, mlpd_mlp** out);
mlpd_status mlpd_mlp_save(const mlpd_mlp* mlp, const char* path);
void mlpd_mlp_destroy(mlpd_mlp* mlp);

const char* mlpd_mlp_arch(const mlpd_mlp* mlp);
const char* mlpd_mlp_rng_algorithm(const mlpd_mlp* mlp);
size_t mlpd_mlp_layer_count(const mlpd_mlp* mlp);
size_t mlpd_mlp_input_dim(const mlpd_mlp* mlp);
size_t mlpd_mlp_output_dim(const mlpd_mlp* mlp);
size_t mlpd_mlp_parameter_count(const mlpd_mlp* mlp);
uint64_t mlpd_mlp_update_count(const mlpd_mlp* mlp);
mlpd_status mlpd_mlp_layer_shape(const mlpd_mlp* mlp, size_t layer,
                                 size_t* rows, size_t* cols);
/* Row-major weight matrix of one layer. */
const double* mlpd_mlp_weights(const mlpd_mlp* mlp, size_t layer);
const double* mlpd_mlp_biases(const mlpd_mlp* mlp, size_t layer);

/* x: input_dim normalized values, y: room for output_dim values. */
mlpd_status mlpd_mlp_forward(const mlpd_mlp* mlp, const double* x, size_t n,
                             double* y, size_t y_capacity);

/* Slides the net over the image, averaging overlapping predictions. stride
 * must not exceed the output patch edge. bm_candidate_stride is the search
 * grid spacing of block-matching nets (ignored otherwise). */
mlpd_status mlpd_denoise(const mlpd_mlp* mlp, const mlpd_image* noisy,
                         size_t stride, size_t bm_candidate_stride,
                         mlpd_image** out);

/* ---- training ---- */

typedef struct mlpd_train_config mlpd_train_config;

mlpd_train_config* mlpd_train_config_create(void);
void mlpd_train_config_destroy(mlpd_train_config* cfg);
/* Same keys as the config file: corpus_dir, test_dir, arch, noise, sigma, p,
 * sigma_s, quality, lr_initial, lr_finetune, switch_update, batch,
 * max_updates, report_every, train_window, test_stride, seed. */
mlpd_status mlpd_train_config_set(mlpd_train_config* cfg, const char* key,
                                  const char* value);
/* Replaces the config with the `key = value` lines of a file ('#' comments
 * allowed; arch is required). Call _set afterwards for overrides. */
mlpd_status mlpd_train_config_load(mlpd_train_config* cfg, const char* path);

typedef void (*mlpd_progress_fn)(uint64_t update, double train_psnr,
                                 double test_psnr, double lr,
                                 double wall_seconds, void* user);

/* Runs SGD training. out_dir receives progress.csv, checkpoint.mlpd and
 * final.mlpd ("" disables file output). progress may be NULL. On success
 * *final (if non-NULL) receives the trained net. */
mlpd_status mlpd_train(const mlpd_train_config* cfg, const char* out_dir,
                       mlpd_progress_fn progress, void* user,
                       mlpd_mlp** final_net);

/* Indices i where test_psnr[i] dropped more than drop_db below the best
 * earlier value. Writes at most capacity indices, count gets the total. */
mlpd_status mlpd_degradation_alarm(const double* test_psnr, size_t n,
                                   double drop_db, size_t* out_indices,
                                   size_t capacity, size_t* count);

/* ---- introspection ---- */

typedef struct mlpd_activations mlpd_activations;

/* Records pre/post activations of one layer over `samples` random patches.
 * images + n_images > 0: patches are drawn from those images, degraded per
 * noise_kind (NULL = clean). n_images == 0: inputs are pure noise patches,
 * pixels i.i.d. gaussian around mid-gray with the given sigma. */
mlpd_status mlpd_collect_activations(const mlpd_mlp* mlp,
                                     const mlpd_image* const* images,
                                     size_t n_images, const char* noise_kind,
                                     double sigma, double p, double sigma_s,
                                     int quality, size_t layer, size_t samples,
                                     uint64_t seed, mlpd_activations** out);
void mlpd_activations_destroy(mlpd_activations* acts);

size_t mlpd_activations_units(const mlpd_activations* acts);
size_t mlpd_activations_samples(const mlpd_activations* acts);
/* Row-major units x samples. */
const double* mlpd_activations_pre(const mlpd_activations* acts);
const double* mlpd_activations_post(const mlpd_activations* acts);

/* Per-unit mean / variance / entropy in bits (4 bins over [-1,1]); each
 * output array has `units` entries, any may be NULL. */
mlpd_status mlpd_unit_stats(const mlpd_activations* acts, double* mean,
                            double* variance, double* entropy);
/* Fraction of post-activations with |a| > tau. */
mlpd_status mlpd_binarity(const mlpd_activations* acts, double tau,
                          double* out);
/* Covariance of the m most variable units: units gets m indices, cov m*m
 * values row-major. */
mlpd_status mlpd_covariance(const mlpd_activations* acts, size_t m,
                            size_t* units, double* cov);

/* Singular values of one weight matrix, descending; count gets the number
 * written (min(rows, cols)). */
mlpd_status mlpd_weight_spectrum(const mlpd_mlp* mlp, size_t layer,
                                 double* out, size_t capacity, size_t* count);

/* Output image of one hidden unit at full activation; count gets output_dim. */
mlpd_status mlpd_output_pattern(const mlpd_mlp* mlp, size_t layer, size_t unit,
                                double* out, size_t capacity, size_t* count);

/* Gradient ascent on a unit's pre-activation over the input. pattern needs
 * input_dim doubles, trajectory (optional) steps+1. */
mlpd_status mlpd_activation_maximization(const mlpd_mlp* mlp, size_t layer,
                                         size_t unit, uint64_t seed,
                                         size_t steps, double step_size,
                                         double* pattern, double* trajectory);

/* Strongest-|activation| input patches for one unit. patches needs
 * top * input_dim doubles; image_idx/rows/cols/activation need top entries
 * each (any may be NULL). count gets the number found (<= top). */
mlpd_status mlpd_max_activating_patches(const mlpd_mlp* mlp, size_t layer,
                                        size_t unit,
                                        const mlpd_image* const* images,
                                        size_t n_images, size_t top,
                                        size_t scan_stride, double* patches,
                                        size_t* image_idx, size_t* rows,
                                        size_t* cols, double* activation,
                                        size_t* count);

/* Denoise with the hidden nonlinearity replaced: mode is "with_tanh",
 * "bypass_tanh", "hard_threshold" or "hard_threshold_raw"; tau is the
 * zeroing threshold of the hard modes. Single-hidden-layer nets only. */
mlpd_status mlpd_saturation_denoise(const mlpd_mlp* mlp,
                                    const mlpd_image* noisy, size_t stride,
                                    const char* mode, double tau,
                                    mlpd_image** out);

/* Keeps random detector subsets, flattens the rest and measures mean test
 * PSNR. mean_psnr/kept need one entry per first-layer row. */
mlpd_status mlpd_detector_importance(const mlpd_mlp* mlp,
                                     const mlpd_image* const* clean,
                                     size_t n_images, const char* noise_kind,
                                     double sigma, double p, double sigma_s,
                                     int quality, size_t stride,
                                     size_t subset_size, size_t iterations,
                                     uint64_t seed, double* mean_psnr,
                                     uint64_t* kept, double* baseline);

/* ---- sparse dictionary ---- */

typedef struct mlpd_dictionary mlpd_dictionary;

/* The net's last weight matrix as a patch dictionary (columns = atoms). */
mlpd_status mlpd_dictionary_extract(const mlpd_mlp* mlp,
                                    mlpd_dictionary** out);
mlpd_status mlpd_dictionary_normalize(const mlpd_dictionary* dict,
                                      mlpd_dictionary** out);
void mlpd_dictionary_destroy(mlpd_dictionary* dict);

size_t mlpd_dictionary_dim(const mlpd_dictionary* dict);
size_t mlpd_dictionary_size(const mlpd_dictionary* dict);
const double* mlpd_dictionary_atoms(const mlpd_dictionary* dict);
const double* mlpd_dictionary_bias(const mlpd_dictionary* dict);

/* u64 rows | u64 cols | atoms row-major f64 | bias f64, little-endian. */
mlpd_status mlpd_dictionary_save(const mlpd_dictionary* dict,
                                 const char* path);

/* Least squares with every coefficient clamped to [-1,1]; coeffs needs one
 * entry per atom. objective/iterations may be NULL. */
mlpd_status mlpd_box_ls(const mlpd_dictionary* dict, const double* x, size_t n,
                        size_t max_iters, double tol, double* coeffs,
                        double* objective, size_t* iterations);

/* Patch-wise box-constrained reconstruction of an image. psnr (optional)
 * gets the fidelity against the input. */
mlpd_status mlpd_dict_approx(const mlpd_dictionary* dict,
                             const mlpd_image* img, size_t stride,
                             size_t max_iters, double tol, mlpd_image** out,
                             double* psnr);

/* Orthogonal matching pursuit on one vector (unit-norm atoms required).
 * stop_reason: 0 residual small enough, 1 atom budget, 2 stalled. */
mlpd_status mlpd_omp(const mlpd_dictionary* dict, const double* x, size_t n,
                     size_t max_atoms, double epsilon, double* coeffs,
                     size_t* support, size_t support_capacity,
                     size_t* support_count, double* residual_norm2,
                     int* stop_reason);
const char* mlpd_omp_stop_name(int stop_reason);

/* Patch-wise OMP denoising; the residual target per patch is
 * n * (c * sigma / 255)^2. */
mlpd_status mlpd_omp_denoise(const mlpd_dictionary* dict,
                             const mlpd_image* noisy, double sigma,
                             size_t stride, size_t max_atoms, double c,
                             mlpd_image** out);

#ifdef __cplusplus
}
#endif

#endif /* MLPDENOISE_H */
