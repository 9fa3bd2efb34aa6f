#include "mlpdenoise.h"

#include <cstring>
#include <string>
#include <vector>

#include "core/block_matching.hpp"
#include "core/errors.hpp"
#include "core/image.hpp"
#include "core/introspect.hpp"
#include "core/mlp.hpp"
#include "core/noise.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"
#include "core/sparse_dict.hpp"
#include "core/trainer.hpp"

struct mlpd_rng {
  mlpd::Rng rng;
};

struct mlpd_image {
  mlpd::ImageBuffer img;
};

struct mlpd_mlp {
  mlpd::Mlp mlp;
  std::string arch_cache;
};

struct mlpd_train_config {
  mlpd::TrainConfig cfg;
};

struct mlpd_activations {
  mlpd::ActivationSample sample;
};

struct mlpd_dictionary {
  mlpd::Dictionary dict;
};

namespace {

thread_local std::string g_error;

template <class F>
mlpd_status wrap(F&& f) noexcept {
  try {
    f();
    return MLPD_OK;
  } catch (const mlpd::invalid_argument& e) {
    g_error = e.what();
    return MLPD_ERR_ARG;
  } catch (const mlpd::io_error& e) {
    g_error = e.what();
    return MLPD_ERR_IO;
  } catch (const mlpd::numeric_error& e) {
    g_error = e.what();
    return MLPD_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_error = e.what();
    return MLPD_ERR_INTERNAL;
  } catch (...) {
    g_error = "unknown error";
    return MLPD_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw mlpd::invalid_argument(what);
}

mlpd::NoiseSpec make_noise_spec(const char* kind, double sigma, double p,
                                double sigma_s, int quality) {
  mlpd::NoiseSpec spec;
  spec.kind = mlpd::noise_kind_from_string(kind);
  spec.sigma = sigma;
  spec.p = p;
  spec.sigma_s = sigma_s;
  spec.quality = quality;
  spec.validate();
  return spec;
}

std::vector<mlpd::ImageBuffer> gather_images(const mlpd_image* const* images,
                                             size_t n) {
  require(images != nullptr || n == 0, "null image array");
  std::vector<mlpd::ImageBuffer> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    require(images[i] != nullptr, "null image in array");
    out.push_back(images[i]->img);
  }
  return out;
}

mlpd_mlp* new_mlp_handle(mlpd::Mlp&& mlp) {
  auto* handle = new mlpd_mlp{std::move(mlp), {}};
  handle->arch_cache = handle->mlp.arch.to_string();
  return handle;
}

}  // namespace

extern "C" {

const char* mlpd_last_error(void) { return g_error.c_str(); }

/* ---- rng ---- */

mlpd_rng* mlpd_rng_create(uint64_t seed) { return new mlpd_rng{mlpd::Rng(seed)}; }

mlpd_rng* mlpd_rng_split(const mlpd_rng* rng, uint64_t index) {
  if (!rng) return nullptr;
  return new mlpd_rng{rng->rng.split(index)};
}

void mlpd_rng_destroy(mlpd_rng* rng) { delete rng; }

uint64_t mlpd_rng_next_u64(mlpd_rng* rng) { return rng->rng.next_u64(); }

double mlpd_rng_uniform(mlpd_rng* rng) { return rng->rng.uniform(); }

mlpd_status mlpd_rng_gaussian(mlpd_rng* rng, double mean, double stddev,
                              double* out) {
  return wrap([&] {
    require(rng && out, "null argument");
    *out = rng->rng.gaussian(mean, stddev);
  });
}

const char* mlpd_rng_algorithm(const mlpd_rng* rng) {
  return rng ? rng->rng.algorithm_name() : "";
}

/* ---- images ---- */

mlpd_status mlpd_image_create(size_t width, size_t height,
                              const double* pixels, mlpd_image** out) {
  return wrap([&] {
    require(out != nullptr, "null output");
    require(width > 0 && height > 0, "empty image");
    auto handle = new mlpd_image{mlpd::ImageBuffer(width, height)};
    if (pixels)
      std::memcpy(handle->img.data.data(), pixels,
                  width * height * sizeof(double));
    *out = handle;
  });
}

mlpd_status mlpd_image_load(const char* path, mlpd_image** out) {
  return wrap([&] {
    require(path && out, "null argument");
    *out = new mlpd_image{mlpd::load_image(path)};
  });
}

mlpd_status mlpd_image_save(const mlpd_image* img, const char* path) {
  return wrap([&] {
    require(img && path, "null argument");
    mlpd::save_image(img->img, path);
  });
}

void mlpd_image_destroy(mlpd_image* img) { delete img; }

size_t mlpd_image_width(const mlpd_image* img) {
  return img ? img->img.width : 0;
}

size_t mlpd_image_height(const mlpd_image* img) {
  return img ? img->img.height : 0;
}

const double* mlpd_image_pixels(const mlpd_image* img) {
  return img ? img->img.data.data() : nullptr;
}

mlpd_status mlpd_psnr(const mlpd_image* a, const mlpd_image* b, double* out) {
  return wrap([&] {
    require(a && b && out, "null argument");
    *out = mlpd::psnr(a->img, b->img);
  });
}

mlpd_status mlpd_apply_noise(const mlpd_image* img, const char* kind,
                             double sigma, double p, double sigma_s,
                             int quality, mlpd_rng* rng, mlpd_image** out) {
  return wrap([&] {
    require(img && kind && rng && out, "null argument");
    mlpd::NoiseSpec spec = make_noise_spec(kind, sigma, p, sigma_s, quality);
    *out = new mlpd_image{mlpd::apply_noise(img->img, spec, rng->rng)};
  });
}

mlpd_status mlpd_montage(const double* patches, size_t n, size_t patch_len,
                         size_t cols, size_t pad, mlpd_image** out) {
  return wrap([&] {
    require(patches && out, "null argument");
    require(n > 0 && patch_len > 0, "empty montage");
    size_t edge = 0;
    while (edge * edge < patch_len) ++edge;
    require(edge * edge == patch_len, "patch length is not a perfect square");
    std::vector<std::vector<double>> list(n);
    for (size_t i = 0; i < n; ++i)
      list[i].assign(patches + i * patch_len, patches + (i + 1) * patch_len);
    *out = new mlpd_image{mlpd::render_montage(list, edge, cols, pad)};
  });
}

/* ---- networks ---- */

mlpd_status mlpd_mlp_init(const char* arch, uint64_t seed, mlpd_mlp** out) {
  return wrap([&] {
    require(arch && out, "null argument");
    mlpd::Architecture parsed = mlpd::parse_architecture(arch);
    mlpd::Rng rng(seed);
    *out = new_mlp_handle(mlpd::init_mlp(parsed, rng));
  });
}

mlpd_status mlpd_mlp_load(const char* path, mlpd_mlp** out) {
  return wrap([&] {
    require(path && out, "null argument");
    *out = new_mlp_handle(mlpd::load_mlp(path));
  });
}

mlpd_status mlpd_mlp_save(const mlpd_mlp* mlp, const char* path) {
  return wrap([&] {
    require(mlp && path, "null argument");
    mlpd::save_mlp(mlp->mlp, path);
  });
}

void mlpd_mlp_destroy(mlpd_mlp* mlp) { delete mlp; }

const char* mlpd_mlp_arch(const mlpd_mlp* mlp) {
  return mlp ? mlp->arch_cache.c_str() : "";
}

const char* mlpd_mlp_rng_algorithm(const mlpd_mlp* mlp) {
  return mlp ? mlp->mlp.rng_algorithm.c_str() : "";
}

size_t mlpd_mlp_layer_count(const mlpd_mlp* mlp) {
  return mlp ? mlp->mlp.layer_count() : 0;
}

size_t mlpd_mlp_input_dim(const mlpd_mlp* mlp) {
  return mlp ? mlp->mlp.input_dim() : 0;
}

size_t mlpd_mlp_output_dim(const mlpd_mlp* mlp) {
  return mlp ? mlp->mlp.output_dim() : 0;
}

size_t mlpd_mlp_parameter_count(const mlpd_mlp* mlp) {
  return mlp ? mlp->mlp.parameter_count() : 0;
}

uint64_t mlpd_mlp_update_count(const mlpd_mlp* mlp) {
  return mlp ? mlp->mlp.update_count : 0;
}

mlpd_status mlpd_mlp_layer_shape(const mlpd_mlp* mlp, size_t layer,
                                 size_t* rows, size_t* cols) {
  return wrap([&] {
    require(mlp != nullptr, "null network");
    require(layer < mlp->mlp.layer_count(), "layer out of range");
    if (rows) *rows = mlp->mlp.weights[layer].rows;
    if (cols) *cols = mlp->mlp.weights[layer].cols;
  });
}

const double* mlpd_mlp_weights(const mlpd_mlp* mlp, size_t layer) {
  if (!mlp || layer >= mlp->mlp.layer_count()) return nullptr;
  return mlp->mlp.weights[layer].data.data();
}

const double* mlpd_mlp_biases(const mlpd_mlp* mlp, size_t layer) {
  if (!mlp || layer >= mlp->mlp.layer_count()) return nullptr;
  return mlp->mlp.biases[layer].data();
}

mlpd_status mlpd_mlp_forward(const mlpd_mlp* mlp, const double* x, size_t n,
                             double* y, size_t y_capacity) {
  return wrap([&] {
    require(mlp && x && y, "null argument");
    require(n == mlp->mlp.input_dim(), "input size does not match the network");
    require(y_capacity >= mlp->mlp.output_dim(), "output buffer too small");
    std::vector<double> in(x, x + n);
    std::vector<double> result = mlpd::forward(mlp->mlp, in);
    std::memcpy(y, result.data(), result.size() * sizeof(double));
  });
}

mlpd_status mlpd_denoise(const mlpd_mlp* mlp, const mlpd_image* noisy,
                         size_t stride, size_t bm_candidate_stride,
                         mlpd_image** out) {
  return wrap([&] {
    require(mlp && noisy && out, "null argument");
    mlpd::PatchGeometry g = mlpd::geometry_for(mlp->mlp.arch, stride);
    *out = new mlpd_image{
        mlpd::denoise_image(mlp->mlp, noisy->img, g, bm_candidate_stride)};
  });
}

/* ---- training ---- */

mlpd_train_config* mlpd_train_config_create(void) {
  return new mlpd_train_config{};
}

void mlpd_train_config_destroy(mlpd_train_config* cfg) { delete cfg; }

mlpd_status mlpd_train_config_set(mlpd_train_config* cfg, const char* key,
                                  const char* value) {
  return wrap([&] {
    require(cfg && key && value, "null argument");
    mlpd::apply_config_kv(&cfg->cfg, key, value);
  });
}

mlpd_status mlpd_train_config_load(mlpd_train_config* cfg, const char* path) {
  return wrap([&] {
    require(cfg && path, "null argument");
    cfg->cfg = mlpd::load_train_config(path);
  });
}

mlpd_status mlpd_train(const mlpd_train_config* cfg, const char* out_dir,
                       mlpd_progress_fn progress, void* user,
                       mlpd_mlp** final_net) {
  return wrap([&] {
    require(cfg && out_dir, "null argument");
    mlpd::ProgressFn on_report;
    if (progress) {
      on_report = [progress, user](const mlpd::ProgressRecord& r) {
        progress(r.update, r.train_psnr, r.test_psnr, r.lr, r.wall_seconds,
                 user);
      };
    }
    mlpd::TrainResult result = mlpd::train(cfg->cfg, out_dir, on_report);
    if (final_net) *final_net = new_mlp_handle(std::move(result.mlp));
  });
}

mlpd_status mlpd_degradation_alarm(const double* test_psnr, size_t n,
                                   double drop_db, size_t* out_indices,
                                   size_t capacity, size_t* count) {
  return wrap([&] {
    require((test_psnr != nullptr || n == 0) && count != nullptr,
            "null argument");
    std::vector<mlpd::ProgressRecord> log(n);
    for (size_t i = 0; i < n; ++i) log[i].test_psnr = test_psnr[i];
    std::vector<size_t> hits = mlpd::degradation_alarm(log, drop_db);
    *count = hits.size();
    if (out_indices) {
      size_t write = hits.size() < capacity ? hits.size() : capacity;
      for (size_t i = 0; i < write; ++i) out_indices[i] = hits[i];
    }
  });
}

/* ---- introspection ---- */

mlpd_status mlpd_collect_activations(const mlpd_mlp* mlp,
                                     const mlpd_image* const* images,
                                     size_t n_images, const char* noise_kind,
                                     double sigma, double p, double sigma_s,
                                     int quality, size_t layer, size_t samples,
                                     uint64_t seed, mlpd_activations** out) {
  return wrap([&] {
    require(mlp && out, "null argument");
    mlpd::Rng rng(seed);
    if (n_images == 0) {
      mlpd::PatchProvider source =
          mlpd::make_noise_patch_source(mlp->mlp.arch, 127.5, sigma, rng);
      *out = new mlpd_activations{
          mlpd::collect_activations(mlp->mlp, source, layer, samples)};
      return;
    }
    std::vector<mlpd::ImageBuffer> corpus = gather_images(images, n_images);
    mlpd::NoiseSpec spec;
    const mlpd::NoiseSpec* spec_ptr = nullptr;
    if (noise_kind) {
      spec = make_noise_spec(noise_kind, sigma, p, sigma_s, quality);
      spec_ptr = &spec;
    }
    mlpd::PatchProvider source =
        mlpd::make_corpus_patch_source(corpus, mlp->mlp.arch, spec_ptr, rng);
    *out = new mlpd_activations{
        mlpd::collect_activations(mlp->mlp, source, layer, samples)};
  });
}

void mlpd_activations_destroy(mlpd_activations* acts) { delete acts; }

size_t mlpd_activations_units(const mlpd_activations* acts) {
  return acts ? acts->sample.post.rows : 0;
}

size_t mlpd_activations_samples(const mlpd_activations* acts) {
  return acts ? acts->sample.post.cols : 0;
}

const double* mlpd_activations_pre(const mlpd_activations* acts) {
  return acts ? acts->sample.pre.data.data() : nullptr;
}

const double* mlpd_activations_post(const mlpd_activations* acts) {
  return acts ? acts->sample.post.data.data() : nullptr;
}

mlpd_status mlpd_unit_stats(const mlpd_activations* acts, double* mean,
                            double* variance, double* entropy) {
  return wrap([&] {
    require(acts != nullptr, "null activations");
    std::vector<mlpd::UnitStats> stats = mlpd::unit_stats(acts->sample);
    for (size_t u = 0; u < stats.size(); ++u) {
      if (mean) mean[u] = stats[u].mean;
      if (variance) variance[u] = stats[u].variance;
      if (entropy) entropy[u] = stats[u].entropy_bits;
    }
  });
}

mlpd_status mlpd_binarity(const mlpd_activations* acts, double tau,
                          double* out) {
  return wrap([&] {
    require(acts && out, "null argument");
    *out = mlpd::binarity_fraction(acts->sample.post, tau);
  });
}

mlpd_status mlpd_covariance(const mlpd_activations* acts, size_t m,
                            size_t* units, double* cov) {
  return wrap([&] {
    require(acts && units && cov, "null argument");
    mlpd::CovarianceResult result =
        mlpd::activation_covariance(acts->sample, m);
    for (size_t i = 0; i < m; ++i) units[i] = result.units[i];
    std::memcpy(cov, result.cov.data.data(), m * m * sizeof(double));
  });
}

mlpd_status mlpd_weight_spectrum(const mlpd_mlp* mlp, size_t layer,
                                 double* out, size_t capacity, size_t* count) {
  return wrap([&] {
    require(mlp && out && count, "null argument");
    std::vector<double> sv = mlpd::weight_spectrum(mlp->mlp, layer);
    require(capacity >= sv.size(), "output buffer too small");
    std::memcpy(out, sv.data(), sv.size() * sizeof(double));
    *count = sv.size();
  });
}

mlpd_status mlpd_output_pattern(const mlpd_mlp* mlp, size_t layer, size_t unit,
                                double* out, size_t capacity, size_t* count) {
  return wrap([&] {
    require(mlp && out && count, "null argument");
    std::vector<double> pattern = mlpd::output_pattern(mlp->mlp, layer, unit);
    require(capacity >= pattern.size(), "output buffer too small");
    std::memcpy(out, pattern.data(), pattern.size() * sizeof(double));
    *count = pattern.size();
  });
}

mlpd_status mlpd_activation_maximization(const mlpd_mlp* mlp, size_t layer,
                                         size_t unit, uint64_t seed,
                                         size_t steps, double step_size,
                                         double* pattern, double* trajectory) {
  return wrap([&] {
    require(mlp && pattern, "null argument");
    mlpd::Rng rng(seed);
    mlpd::ActMaxResult result =
        mlpd::activation_maximization(mlp->mlp, layer, unit, rng, steps,
                                      step_size);
    std::memcpy(pattern, result.pattern.data(),
                result.pattern.size() * sizeof(double));
    if (trajectory)
      std::memcpy(trajectory, result.trajectory.data(),
                  result.trajectory.size() * sizeof(double));
  });
}

mlpd_status mlpd_max_activating_patches(const mlpd_mlp* mlp, size_t layer,
                                        size_t unit,
                                        const mlpd_image* const* images,
                                        size_t n_images, size_t top,
                                        size_t scan_stride, double* patches,
                                        size_t* image_idx, size_t* rows,
                                        size_t* cols, double* activation,
                                        size_t* count) {
  return wrap([&] {
    require(mlp && patches && count, "null argument");
    std::vector<mlpd::ImageBuffer> corpus = gather_images(images, n_images);
    std::vector<mlpd::RankedPatch> ranked = mlpd::max_activating_patches(
        mlp->mlp, layer, unit, corpus, top, scan_stride);
    size_t len = mlp->mlp.input_dim();
    for (size_t i = 0; i < ranked.size(); ++i) {
      std::memcpy(patches + i * len, ranked[i].patch.data(),
                  len * sizeof(double));
      if (image_idx) image_idx[i] = ranked[i].image;
      if (rows) rows[i] = ranked[i].row;
      if (cols) cols[i] = ranked[i].col;
      if (activation) activation[i] = ranked[i].activation;
    }
    *count = ranked.size();
  });
}

mlpd_status mlpd_saturation_denoise(const mlpd_mlp* mlp,
                                    const mlpd_image* noisy, size_t stride,
                                    const char* mode, double tau,
                                    mlpd_image** out) {
  return wrap([&] {
    require(mlp && noisy && mode && out, "null argument");
    mlpd::SaturationMode m = mlpd::saturation_mode_from_string(mode);
    *out = new mlpd_image{
        mlpd::saturation_denoise_image(mlp->mlp, noisy->img, stride, m, tau)};
  });
}

mlpd_status mlpd_detector_importance(const mlpd_mlp* mlp,
                                     const mlpd_image* const* clean,
                                     size_t n_images, const char* noise_kind,
                                     double sigma, double p, double sigma_s,
                                     int quality, size_t stride,
                                     size_t subset_size, size_t iterations,
                                     uint64_t seed, double* mean_psnr,
                                     uint64_t* kept, double* baseline) {
  return wrap([&] {
    require(mlp && noise_kind && mean_psnr, "null argument");
    std::vector<mlpd::ImageBuffer> corpus = gather_images(clean, n_images);
    mlpd::NoiseSpec spec = make_noise_spec(noise_kind, sigma, p, sigma_s,
                                           quality);
    mlpd::Rng rng(seed);
    mlpd::ImportanceResult result = mlpd::detector_importance(
        mlp->mlp, corpus, spec, stride, subset_size, iterations, rng);
    std::memcpy(mean_psnr, result.mean_psnr.data(),
                result.mean_psnr.size() * sizeof(double));
    if (kept)
      std::memcpy(kept, result.kept.data(),
                  result.kept.size() * sizeof(uint64_t));
    if (baseline) *baseline = result.baseline;
  });
}

/* ---- sparse dictionary ---- */

mlpd_status mlpd_dictionary_extract(const mlpd_mlp* mlp,
                                    mlpd_dictionary** out) {
  return wrap([&] {
    require(mlp && out, "null argument");
    *out = new mlpd_dictionary{mlpd::extract_dictionary(mlp->mlp)};
  });
}

mlpd_status mlpd_dictionary_normalize(const mlpd_dictionary* dict,
                                      mlpd_dictionary** out) {
  return wrap([&] {
    require(dict && out, "null argument");
    *out = new mlpd_dictionary{mlpd::normalize_columns(dict->dict)};
  });
}

void mlpd_dictionary_destroy(mlpd_dictionary* dict) { delete dict; }

size_t mlpd_dictionary_dim(const mlpd_dictionary* dict) {
  return dict ? dict->dict.dim() : 0;
}

size_t mlpd_dictionary_size(const mlpd_dictionary* dict) {
  return dict ? dict->dict.size() : 0;
}

const double* mlpd_dictionary_atoms(const mlpd_dictionary* dict) {
  return dict ? dict->dict.atoms.data.data() : nullptr;
}

const double* mlpd_dictionary_bias(const mlpd_dictionary* dict) {
  return dict ? dict->dict.bias.data() : nullptr;
}

mlpd_status mlpd_dictionary_save(const mlpd_dictionary* dict,
                                 const char* path) {
  return wrap([&] {
    require(dict && path, "null argument");
    mlpd::save_dictionary(dict->dict, path);
  });
}

mlpd_status mlpd_box_ls(const mlpd_dictionary* dict, const double* x, size_t n,
                        size_t max_iters, double tol, double* coeffs,
                        double* objective, size_t* iterations) {
  return wrap([&] {
    require(dict && x && coeffs, "null argument");
    std::span<const double> xs(x, n);
    mlpd::BoxLsResult result =
        mlpd::box_ls_approx(dict->dict, xs, max_iters, tol);
    std::memcpy(coeffs, result.coeffs.data(),
                result.coeffs.size() * sizeof(double));
    if (objective) *objective = result.objective;
    if (iterations) *iterations = result.iterations;
  });
}

mlpd_status mlpd_dict_approx(const mlpd_dictionary* dict,
                             const mlpd_image* img, size_t stride,
                             size_t max_iters, double tol, mlpd_image** out,
                             double* psnr) {
  return wrap([&] {
    require(dict && img && out, "null argument");
    mlpd::ApproxResult result =
        mlpd::approx_image(dict->dict, img->img, stride, max_iters, tol);
    *out = new mlpd_image{std::move(result.image)};
    if (psnr) *psnr = result.psnr;
  });
}

mlpd_status mlpd_omp(const mlpd_dictionary* dict, const double* x, size_t n,
                     size_t max_atoms, double epsilon, double* coeffs,
                     size_t* support, size_t support_capacity,
                     size_t* support_count, double* residual_norm2,
                     int* stop_reason) {
  return wrap([&] {
    require(dict && x && coeffs, "null argument");
    std::span<const double> xs(x, n);
    mlpd::OmpResult result = mlpd::omp(dict->dict, xs, max_atoms, epsilon);
    std::memcpy(coeffs, result.coeffs.data(),
                result.coeffs.size() * sizeof(double));
    if (support) {
      size_t write = result.support.size() < support_capacity
                         ? result.support.size()
                         : support_capacity;
      for (size_t i = 0; i < write; ++i) support[i] = result.support[i];
    }
    if (support_count) *support_count = result.support.size();
    if (residual_norm2) *residual_norm2 = result.residual_norm2;
    if (stop_reason) *stop_reason = static_cast<int>(result.stop_reason);
  });
}

const char* mlpd_omp_stop_name(int stop_reason) {
  switch (stop_reason) {
    case 0: return "residual";
    case 1: return "max_atoms";
    case 2: return "stalled";
  }
  return "unknown";
}

mlpd_status mlpd_omp_denoise(const mlpd_dictionary* dict,
                             const mlpd_image* noisy, double sigma,
                             size_t stride, size_t max_atoms, double c,
                             mlpd_image** out) {
  return wrap([&] {
    require(dict && noisy && out, "null argument");
    *out = new mlpd_image{mlpd::omp_denoise_image(dict->dict, noisy->img,
                                                  sigma, stride, max_atoms,
                                                  c)};
  });
}

}  // extern "C"
