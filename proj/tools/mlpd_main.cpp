// Command-line front end. Talks to the core exclusively through the C API so
// the same surface every other consumer gets is what ships here.

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlpdenoise.h"

namespace {

namespace fs = std::filesystem;

// Library failures terminate the process with the status value as exit code:
// 1 bad arguments, 2 I/O, 3 numerics, 4 internal.
void check(mlpd_status status) {
  if (status == MLPD_OK) return;
  std::fprintf(stderr, "error: %s\n", mlpd_last_error());
  std::exit(static_cast<int>(status));
}

void fail_usage(const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  std::exit(1);
}

mlpd_mlp* load_model(const std::string& path) {
  mlpd_mlp* mlp = nullptr;
  check(mlpd_mlp_load(path.c_str(), &mlp));
  return mlp;
}

mlpd_image* load_image(const std::string& path) {
  mlpd_image* img = nullptr;
  check(mlpd_image_load(path.c_str(), &img));
  return img;
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> paths;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".pgm" || ext == ".png" || ext == ".ppm")
      paths.push_back(entry.path().string());
  }
  if (ec) fail_usage("cannot read directory '" + dir + "': " + ec.message());
  if (paths.empty()) {
    std::fprintf(stderr, "error: no images (.pgm/.png/.ppm) in '%s'\n",
                 dir.c_str());
    std::exit(2);
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

std::vector<mlpd_image*> load_image_dir(const std::string& dir) {
  std::vector<mlpd_image*> images;
  for (const std::string& p : list_images(dir)) images.push_back(load_image(p));
  return images;
}

struct NoiseOpts {
  std::string kind = "awg";
  double sigma = 25.0;
  double p = 0.1;
  double sigma_s = 25.0;
  int quality = 50;

  void attach(CLI::App* app, bool required_kind = false) {
    auto* opt = app->add_option("--noise", kind,
                                "noise kind: awg, salt_pepper, stripe, jpeg_block");
    if (required_kind)
      opt->required();
    else
      opt->capture_default_str();
    app->add_option("--sigma", sigma, "awg stddev in pixel units")
        ->capture_default_str();
    app->add_option("--p", p, "salt_pepper corruption probability")
        ->capture_default_str();
    app->add_option("--sigma-s", sigma_s, "stripe row-offset stddev")
        ->capture_default_str();
    app->add_option("--quality", quality, "jpeg_block quality 1..100")
        ->capture_default_str();
  }
};

void save_and_destroy(mlpd_image* img, const std::string& path) {
  check(mlpd_image_save(img, path.c_str()));
  mlpd_image_destroy(img);
}

// Parses "unit,unit,unit"; empty selects 0..count-1 capped at cap.
std::vector<std::size_t> parse_units(const std::string& csv, std::size_t count,
                                     std::size_t cap) {
  std::vector<std::size_t> units;
  if (csv.empty()) {
    for (std::size_t u = 0; u < count && u < cap; ++u) units.push_back(u);
    return units;
  }
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      units.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      fail_usage("bad unit list entry '" + item + "'");
    }
  }
  if (units.empty()) fail_usage("empty unit list");
  return units;
}

/* ---- train ---- */

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool quiet = false;
};

void run_train(const TrainArgs& args) {
  mlpd_train_config* cfg = mlpd_train_config_create();
  if (!args.config.empty()) check(mlpd_train_config_load(cfg, args.config.c_str()));
  for (const std::string& kv : args.overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      fail_usage("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    check(mlpd_train_config_set(cfg, key.c_str(), value.c_str()));
  }

  bool quiet = args.quiet;
  if (!quiet)
    std::printf("update,train_psnr,test_psnr,lr,wall_seconds\n");
  auto progress = [](uint64_t update, double train_psnr, double test_psnr,
                     double lr, double wall_seconds, void* user) {
    if (*static_cast<bool*>(user)) return;
    std::printf("%" PRIu64 ",%.6f,%.6f,%g,%.3f\n", update, train_psnr,
                test_psnr, lr, wall_seconds);
    std::fflush(stdout);
  };

  mlpd_mlp* final_net = nullptr;
  check(mlpd_train(cfg, args.out_dir.c_str(), progress, &quiet, &final_net));
  std::fprintf(stderr, "trained %s (%" PRIu64 " updates) -> %s\n",
               mlpd_mlp_arch(final_net), mlpd_mlp_update_count(final_net),
               args.out_dir.c_str());
  mlpd_mlp_destroy(final_net);
  mlpd_train_config_destroy(cfg);
}

/* ---- denoise ---- */

struct DenoiseArgs {
  std::string model, input, output, reference;
  std::size_t stride = 1;
  std::size_t bm_stride = 1;
};

void run_denoise(const DenoiseArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  mlpd_image* noisy = load_image(args.input);
  mlpd_image* result = nullptr;
  check(mlpd_denoise(mlp, noisy, args.stride, args.bm_stride, &result));
  check(mlpd_image_save(result, args.output.c_str()));
  if (!args.reference.empty()) {
    mlpd_image* clean = load_image(args.reference);
    double before = 0, after = 0;
    check(mlpd_psnr(clean, noisy, &before));
    check(mlpd_psnr(clean, result, &after));
    std::printf("noisy_psnr,%.4f\ndenoised_psnr,%.4f\n", before, after);
  }
}

/* ---- evaluate ---- */

struct EvaluateArgs {
  std::string model, clean_dir, save_dir;
  NoiseOpts noise;
  std::size_t stride = 3;
  std::uint64_t seed = 0;
};

void run_evaluate(const EvaluateArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  std::vector<std::string> paths = list_images(args.clean_dir);
  mlpd_rng* rng = mlpd_rng_create(args.seed);

  std::printf("# model %s  noise %s  seed %" PRIu64 "  stride %zu\n",
              mlpd_mlp_arch(mlp), args.noise.kind.c_str(), args.seed,
              args.stride);
  std::printf("image,noisy_psnr,denoised_psnr\n");
  double sum_before = 0, sum_after = 0;
  for (const std::string& path : paths) {
    mlpd_image* clean = load_image(path);
    mlpd_image* noisy = nullptr;
    check(mlpd_apply_noise(clean, args.noise.kind.c_str(), args.noise.sigma,
                           args.noise.p, args.noise.sigma_s,
                           args.noise.quality, rng, &noisy));
    mlpd_image* result = nullptr;
    check(mlpd_denoise(mlp, noisy, args.stride, 1, &result));
    double before = 0, after = 0;
    check(mlpd_psnr(clean, noisy, &before));
    check(mlpd_psnr(clean, result, &after));
    sum_before += before;
    sum_after += after;
    std::printf("%s,%.4f,%.4f\n", fs::path(path).filename().c_str(), before,
                after);
    if (!args.save_dir.empty()) {
      fs::create_directories(args.save_dir);
      fs::path out = fs::path(args.save_dir) / fs::path(path).filename();
      out.replace_extension(".png");
      check(mlpd_image_save(result, out.c_str()));
    }
    mlpd_image_destroy(result);
    mlpd_image_destroy(noisy);
    mlpd_image_destroy(clean);
  }
  double n = static_cast<double>(paths.size());
  std::printf("mean,%.4f,%.4f\n", sum_before / n, sum_after / n);
  mlpd_rng_destroy(rng);
  mlpd_mlp_destroy(mlp);
}

/* ---- info ---- */

void run_info(const std::string& model) {
  mlpd_mlp* mlp = load_model(model);
  std::printf("arch %s\n", mlpd_mlp_arch(mlp));
  std::printf("layers %zu\n", mlpd_mlp_layer_count(mlp));
  for (std::size_t l = 0; l < mlpd_mlp_layer_count(mlp); ++l) {
    std::size_t rows = 0, cols = 0;
    check(mlpd_mlp_layer_shape(mlp, l, &rows, &cols));
    std::printf("layer %zu: %zu x %zu\n", l, rows, cols);
  }
  std::printf("parameters %zu\n", mlpd_mlp_parameter_count(mlp));
  std::printf("updates %" PRIu64 "\n", mlpd_mlp_update_count(mlp));
  std::printf("rng %s\n", mlpd_mlp_rng_algorithm(mlp));
  mlpd_mlp_destroy(mlp);
}

/* ---- noise ---- */

struct NoiseArgs {
  std::string input, output;
  NoiseOpts noise;
  std::uint64_t seed = 0;
};

void run_noise(const NoiseArgs& args) {
  mlpd_image* img = load_image(args.input);
  mlpd_rng* rng = mlpd_rng_create(args.seed);
  mlpd_image* out = nullptr;
  check(mlpd_apply_noise(img, args.noise.kind.c_str(), args.noise.sigma,
                         args.noise.p, args.noise.sigma_s, args.noise.quality,
                         rng, &out));
  save_and_destroy(out, args.output);
  mlpd_rng_destroy(rng);
  mlpd_image_destroy(img);
}

/* ---- analyze ---- */

struct ActivationArgs {
  std::string model, image_dir, noise_kind;
  double sigma = 25.0, p = 0.1, sigma_s = 25.0;
  int quality = 50;
  double pure_sigma = -1.0;  // >= 0 selects the pure-noise source
  std::size_t layer = 0;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
};

mlpd_activations* collect(const ActivationArgs& a, mlpd_mlp* mlp,
                          std::vector<mlpd_image*>* corpus) {
  mlpd_activations* acts = nullptr;
  if (a.pure_sigma >= 0) {
    check(mlpd_collect_activations(mlp, nullptr, 0, nullptr, a.pure_sigma, 0,
                                   0, 0, a.layer, a.samples, a.seed, &acts));
    return acts;
  }
  if (a.image_dir.empty())
    fail_usage("need --images DIR or --pure-sigma S as the patch source");
  *corpus = load_image_dir(a.image_dir);
  const char* kind = a.noise_kind.empty() ? nullptr : a.noise_kind.c_str();
  check(mlpd_collect_activations(
      mlp, const_cast<const mlpd_image* const*>(corpus->data()),
      corpus->size(), kind, a.sigma, a.p, a.sigma_s, a.quality, a.layer,
      a.samples, a.seed, &acts));
  return acts;
}

void attach_activation_opts(CLI::App* app, ActivationArgs* a) {
  app->add_option("--model", a->model, "checkpoint to inspect")->required();
  app->add_option("--images", a->image_dir, "directory of source images");
  app->add_option("--noise", a->noise_kind,
                  "degrade sampled patches: awg, salt_pepper, stripe, jpeg_block");
  app->add_option("--sigma", a->sigma, "awg stddev")->capture_default_str();
  app->add_option("--p", a->p, "salt_pepper probability")->capture_default_str();
  app->add_option("--sigma-s", a->sigma_s, "stripe stddev")->capture_default_str();
  app->add_option("--quality", a->quality, "jpeg_block quality")->capture_default_str();
  app->add_option("--pure-sigma", a->pure_sigma,
                  "sample pure gaussian noise patches with this stddev instead");
  app->add_option("--layer", a->layer, "weight layer index")->capture_default_str();
  app->add_option("--samples", a->samples, "patches to sample")->capture_default_str();
  app->add_option("--seed", a->seed, "sampling seed")->capture_default_str();
}

void run_units(const ActivationArgs& a, double tau) {
  mlpd_mlp* mlp = load_model(a.model);
  std::vector<mlpd_image*> corpus;
  mlpd_activations* acts = collect(a, mlp, &corpus);
  std::size_t units = mlpd_activations_units(acts);
  std::vector<double> mean(units), variance(units), entropy(units);
  check(mlpd_unit_stats(acts, mean.data(), variance.data(), entropy.data()));
  double binarity = 0;
  check(mlpd_binarity(acts, tau, &binarity));
  std::printf("# layer %zu  samples %zu  seed %" PRIu64 "\n", a.layer,
              mlpd_activations_samples(acts), a.seed);
  std::printf("# binarity(|a|>%g) %.6f\n", tau, binarity);
  std::printf("unit,mean,variance,entropy_bits\n");
  for (std::size_t u = 0; u < units; ++u)
    std::printf("%zu,%.6f,%.6f,%.6f\n", u, mean[u], variance[u], entropy[u]);
  mlpd_activations_destroy(acts);
}

void run_covariance(const ActivationArgs& a, std::size_t m) {
  mlpd_mlp* mlp = load_model(a.model);
  std::vector<mlpd_image*> corpus;
  mlpd_activations* acts = collect(a, mlp, &corpus);
  std::vector<std::size_t> units(m);
  std::vector<double> cov(m * m);
  check(mlpd_covariance(acts, m, units.data(), cov.data()));
  std::printf("# layer %zu  samples %zu  seed %" PRIu64 "\n", a.layer,
              mlpd_activations_samples(acts), a.seed);
  std::printf("units");
  for (std::size_t u : units) std::printf(",%zu", u);
  std::printf("\n");
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c)
      std::printf(c ? ",%.6f" : "%.6f", cov[r * m + c]);
    std::printf("\n");
  }
  mlpd_activations_destroy(acts);
}

void run_spectrum(const std::string& model, std::size_t layer) {
  mlpd_mlp* mlp = load_model(model);
  std::size_t rows = 0, cols = 0;
  check(mlpd_mlp_layer_shape(mlp, layer, &rows, &cols));
  std::vector<double> sv(std::min(rows, cols));
  std::size_t count = 0;
  check(mlpd_weight_spectrum(mlp, layer, sv.data(), sv.size(), &count));
  std::printf("index,singular_value\n");
  for (std::size_t i = 0; i < count; ++i) std::printf("%zu,%.8g\n", i, sv[i]);
  mlpd_mlp_destroy(mlp);
}

struct FiltersArgs {
  std::string model, out;
  std::string which = "detectors";
  std::size_t cols = 0;
  std::size_t pad = 1;
};

void run_filters(const FiltersArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  std::size_t layers = mlpd_mlp_layer_count(mlp);
  std::size_t rows = 0, cols = 0;
  std::vector<double> patches;
  std::size_t n = 0, patch_len = 0;
  if (args.which == "detectors") {
    check(mlpd_mlp_layer_shape(mlp, 0, &rows, &cols));
    n = rows;
    patch_len = cols;
    const double* w = mlpd_mlp_weights(mlp, 0);
    patches.assign(w, w + rows * cols);
  } else if (args.which == "generators") {
    check(mlpd_mlp_layer_shape(mlp, layers - 1, &rows, &cols));
    n = cols;
    patch_len = rows;
    const double* w = mlpd_mlp_weights(mlp, layers - 1);
    patches.resize(n * patch_len);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r)
        patches[c * patch_len + r] = w[r * cols + c];
  } else {
    fail_usage("--which must be detectors or generators");
  }
  std::size_t grid_cols = args.cols;
  if (grid_cols == 0)
    grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(double(n))));
  mlpd_image* montage = nullptr;
  check(mlpd_montage(patches.data(), n, patch_len, grid_cols, args.pad,
                     &montage));
  save_and_destroy(montage, args.out);
  std::printf("%zu %s of %zu values -> %s\n", n, args.which.c_str(), patch_len,
              args.out.c_str());
  mlpd_mlp_destroy(mlp);
}

struct PatternArgs {
  std::string model, out, units_csv;
  std::size_t layer = 0;
  std::size_t count = 64;
  std::size_t cols = 0;
  std::size_t pad = 1;
};

void run_output_patterns(const PatternArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  std::size_t rows = 0, cols = 0;
  check(mlpd_mlp_layer_shape(mlp, args.layer, &rows, &cols));
  std::vector<std::size_t> units = parse_units(args.units_csv, rows, args.count);
  std::size_t dim = mlpd_mlp_output_dim(mlp);
  std::vector<double> patches(units.size() * dim);
  for (std::size_t i = 0; i < units.size(); ++i) {
    std::size_t written = 0;
    check(mlpd_output_pattern(mlp, args.layer, units[i],
                              patches.data() + i * dim, dim, &written));
  }
  std::size_t grid_cols = args.cols;
  if (grid_cols == 0)
    grid_cols = static_cast<std::size_t>(
        std::ceil(std::sqrt(double(units.size()))));
  mlpd_image* montage = nullptr;
  check(mlpd_montage(patches.data(), units.size(), dim, grid_cols, args.pad,
                     &montage));
  save_and_destroy(montage, args.out);
  std::printf("%zu output patterns (layer %zu) -> %s\n", units.size(),
              args.layer, args.out.c_str());
  mlpd_mlp_destroy(mlp);
}

struct ActMaxArgs {
  std::string model, out;
  std::size_t layer = 0;
  std::size_t unit = 0;
  std::size_t steps = 200;
  double step_size = 0.1;
  std::uint64_t seed = 0;
};

void run_actmax(const ActMaxArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  std::size_t dim = mlpd_mlp_input_dim(mlp);
  std::vector<double> pattern(dim), trajectory(args.steps + 1);
  check(mlpd_activation_maximization(mlp, args.layer, args.unit, args.seed,
                                     args.steps, args.step_size,
                                     pattern.data(), trajectory.data()));
  std::printf("step,pre_activation\n");
  for (std::size_t s = 0; s < trajectory.size(); ++s)
    std::printf("%zu,%.8g\n", s, trajectory[s]);
  if (!args.out.empty()) {
    mlpd_image* img = nullptr;
    check(mlpd_montage(pattern.data(), 1, dim, 1, 0, &img));
    save_and_destroy(img, args.out);
  }
  mlpd_mlp_destroy(mlp);
}

struct PatchesArgs {
  std::string model, image_dir, out;
  std::size_t layer = 0;
  std::size_t unit = 0;
  std::size_t top = 16;
  std::size_t scan_stride = 1;
  std::size_t pad = 1;
};

void run_patches(const PatchesArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  std::vector<mlpd_image*> corpus = load_image_dir(args.image_dir);
  std::size_t dim = mlpd_mlp_input_dim(mlp);
  std::vector<double> patches(args.top * dim);
  std::vector<std::size_t> image_idx(args.top), rows(args.top), cols(args.top);
  std::vector<double> activation(args.top);
  std::size_t count = 0;
  check(mlpd_max_activating_patches(
      mlp, args.layer, args.unit,
      const_cast<const mlpd_image* const*>(corpus.data()), corpus.size(),
      args.top, args.scan_stride, patches.data(), image_idx.data(),
      rows.data(), cols.data(), activation.data(), &count));
  std::printf("rank,image,row,col,pre_activation\n");
  for (std::size_t i = 0; i < count; ++i)
    std::printf("%zu,%zu,%zu,%zu,%.8g\n", i, image_idx[i], rows[i], cols[i],
                activation[i]);
  if (!args.out.empty()) {
    std::size_t grid =
        static_cast<std::size_t>(std::ceil(std::sqrt(double(count))));
    mlpd_image* img = nullptr;
    check(mlpd_montage(patches.data(), count, dim, grid, args.pad, &img));
    save_and_destroy(img, args.out);
  }
  mlpd_mlp_destroy(mlp);
}

struct ImportanceArgs {
  std::string model, clean_dir;
  NoiseOpts noise;
  std::size_t stride = 3;
  std::size_t subset = 1;
  std::size_t iterations = 16;
  std::uint64_t seed = 0;
};

void run_importance(const ImportanceArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  std::vector<mlpd_image*> corpus = load_image_dir(args.clean_dir);
  std::size_t detectors = 0;
  check(mlpd_mlp_layer_shape(mlp, 0, &detectors, nullptr));
  std::vector<double> mean_psnr(detectors);
  std::vector<std::uint64_t> kept(detectors);
  double baseline = 0;
  check(mlpd_detector_importance(
      mlp, const_cast<const mlpd_image* const*>(corpus.data()), corpus.size(),
      args.noise.kind.c_str(), args.noise.sigma, args.noise.p,
      args.noise.sigma_s, args.noise.quality, args.stride, args.subset,
      args.iterations, args.seed, mean_psnr.data(), kept.data(), &baseline));
  std::printf("# baseline_psnr %.4f  subset %zu  iterations %zu  seed %" PRIu64
              "\n",
              baseline, args.subset, args.iterations, args.seed);
  std::printf("detector,kept,mean_psnr\n");
  for (std::size_t d = 0; d < detectors; ++d)
    std::printf("%zu,%" PRIu64 ",%.4f\n", d, kept[d], mean_psnr[d]);
  mlpd_mlp_destroy(mlp);
}

struct SaturationArgs {
  std::string model, input, output, reference;
  std::string mode = "hard_threshold";
  double tau = 1.0;
  std::size_t stride = 1;
};

void run_saturation(const SaturationArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  mlpd_image* noisy = load_image(args.input);
  mlpd_image* out = nullptr;
  check(mlpd_saturation_denoise(mlp, noisy, args.stride, args.mode.c_str(),
                                args.tau, &out));
  check(mlpd_image_save(out, args.output.c_str()));
  if (!args.reference.empty()) {
    mlpd_image* clean = load_image(args.reference);
    double score = 0;
    check(mlpd_psnr(clean, out, &score));
    std::printf("mode,%s\npsnr,%.4f\n", args.mode.c_str(), score);
  }
  mlpd_image_destroy(out);
  mlpd_image_destroy(noisy);
  mlpd_mlp_destroy(mlp);
}

struct AlarmArgs {
  std::string progress;
  double drop = 1.0;
};

void run_alarm(const AlarmArgs& args) {
  std::ifstream in(args.progress);
  if (!in) {
    std::fprintf(stderr, "error: cannot open '%s'\n", args.progress.c_str());
    std::exit(2);
  }
  std::vector<double> updates, psnr;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("update,", 0) == 0)
      continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3) fail_usage("malformed progress row: " + line);
    try {
      updates.push_back(std::stod(cells[0]));
      psnr.push_back(std::stod(cells[2]));
    } catch (const std::exception&) {
      fail_usage("malformed progress row: " + line);
    }
  }
  std::vector<std::size_t> hits(psnr.size());
  std::size_t count = 0;
  check(mlpd_degradation_alarm(psnr.data(), psnr.size(), args.drop,
                               hits.data(), hits.size(), &count));
  std::printf("report,update,test_psnr\n");
  for (std::size_t i = 0; i < count; ++i)
    std::printf("%zu,%.0f,%.6f\n", hits[i], updates[hits[i]], psnr[hits[i]]);
  if (count == 0)
    std::fprintf(stderr, "no degradation beyond %.2f dB in %zu reports\n",
                 args.drop, psnr.size());
}

/* ---- dict ---- */

struct DictApproxArgs {
  std::string model, input, output;
  std::size_t stride = 1;
  std::size_t iters = 2000;
  double tol = 1e-12;
};

void run_dict_approx(const DictApproxArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  mlpd_dictionary* dict = nullptr;
  check(mlpd_dictionary_extract(mlp, &dict));
  mlpd_image* img = load_image(args.input);
  mlpd_image* out = nullptr;
  double score = 0;
  check(mlpd_dict_approx(dict, img, args.stride, args.iters, args.tol, &out,
                         &score));
  save_and_destroy(out, args.output);
  std::printf("approx_psnr,%.4f\n", score);
  mlpd_image_destroy(img);
  mlpd_dictionary_destroy(dict);
  mlpd_mlp_destroy(mlp);
}

struct OmpDenoiseArgs {
  std::string model, input, output, reference;
  double sigma = 25.0;
  std::size_t stride = 1;
  std::size_t max_atoms = 32;
  double c = 1.05;
};

void run_omp_denoise(const OmpDenoiseArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  mlpd_dictionary* raw = nullptr;
  check(mlpd_dictionary_extract(mlp, &raw));
  mlpd_dictionary* dict = nullptr;
  check(mlpd_dictionary_normalize(raw, &dict));
  mlpd_image* noisy = load_image(args.input);
  mlpd_image* out = nullptr;
  check(mlpd_omp_denoise(dict, noisy, args.sigma, args.stride, args.max_atoms,
                         args.c, &out));
  check(mlpd_image_save(out, args.output.c_str()));
  if (!args.reference.empty()) {
    mlpd_image* clean = load_image(args.reference);
    double score = 0;
    check(mlpd_psnr(clean, out, &score));
    std::printf("denoised_psnr,%.4f\n", score);
  }
  mlpd_image_destroy(out);
  mlpd_image_destroy(noisy);
  mlpd_dictionary_destroy(dict);
  mlpd_dictionary_destroy(raw);
  mlpd_mlp_destroy(mlp);
}

struct DictExportArgs {
  std::string model, out, montage;
  bool normalize = false;
  std::size_t cols = 0;
  std::size_t pad = 1;
};

void run_dict_export(const DictExportArgs& args) {
  mlpd_mlp* mlp = load_model(args.model);
  mlpd_dictionary* dict = nullptr;
  check(mlpd_dictionary_extract(mlp, &dict));
  if (args.normalize) {
    mlpd_dictionary* normalized = nullptr;
    check(mlpd_dictionary_normalize(dict, &normalized));
    mlpd_dictionary_destroy(dict);
    dict = normalized;
  }
  if (!args.out.empty()) {
    check(mlpd_dictionary_save(dict, args.out.c_str()));
    std::printf("%zu atoms of %zu values -> %s\n", mlpd_dictionary_size(dict),
                mlpd_dictionary_dim(dict), args.out.c_str());
  }
  if (!args.montage.empty()) {
    std::size_t dim = mlpd_dictionary_dim(dict);
    std::size_t n = mlpd_dictionary_size(dict);
    const double* atoms = mlpd_dictionary_atoms(dict);
    std::vector<double> patches(n * dim);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r = 0; r < dim; ++r)
        patches[c * dim + r] = atoms[r * n + c];
    std::size_t grid = args.cols;
    if (grid == 0)
      grid = static_cast<std::size_t>(std::ceil(std::sqrt(double(n))));
    mlpd_image* img = nullptr;
    check(mlpd_montage(patches.data(), n, dim, grid, args.pad, &img));
    save_and_destroy(img, args.montage);
  }
  mlpd_dictionary_destroy(dict);
  mlpd_mlp_destroy(mlp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patch-based MLP image denoiser"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run SGD training");
  train->add_option("--config", train_args.config, "config file (key = value lines)");
  train->add_option("--set", train_args.overrides,
                    "override a config key, e.g. --set sigma=25")
      ->take_all();
  train->add_option("--out", train_args.out_dir,
                    "directory for progress.csv and checkpoints")
      ->required();
  train->add_flag("--quiet", train_args.quiet, "suppress progress rows");
  train->callback([&] { run_train(train_args); });

  DenoiseArgs denoise_args;
  auto* denoise = app.add_subcommand("denoise", "denoise one image");
  denoise->add_option("--model", denoise_args.model, "checkpoint")->required();
  denoise->add_option("--input", denoise_args.input, "noisy image")->required();
  denoise->add_option("--output", denoise_args.output, "where to write the result")
      ->required();
  denoise->add_option("--stride", denoise_args.stride, "slide step")
      ->capture_default_str();
  denoise->add_option("--bm-stride", denoise_args.bm_stride,
                      "block-matching candidate grid step")
      ->capture_default_str();
  denoise->add_option("--reference", denoise_args.reference,
                      "clean image; prints PSNR before/after");
  denoise->callback([&] { run_denoise(denoise_args); });

  EvaluateArgs eval_args;
  auto* evaluate =
      app.add_subcommand("evaluate", "corrupt a clean set and score the net");
  evaluate->add_option("--model", eval_args.model, "checkpoint")->required();
  evaluate->add_option("--clean-dir", eval_args.clean_dir, "clean test images")
      ->required();
  eval_args.noise.attach(evaluate);
  evaluate->add_option("--stride", eval_args.stride, "slide step")
      ->capture_default_str();
  evaluate->add_option("--seed", eval_args.seed, "noise seed")
      ->capture_default_str();
  evaluate->add_option("--save-dir", eval_args.save_dir,
                       "also write denoised images here");
  evaluate->callback([&] { run_evaluate(eval_args); });

  std::string info_model;
  auto* info = app.add_subcommand("info", "describe a checkpoint");
  info->add_option("model", info_model, "checkpoint path")->required();
  info->callback([&] { run_info(info_model); });

  NoiseArgs noise_args;
  auto* noise = app.add_subcommand("noise", "corrupt an image");
  noise->add_option("--input", noise_args.input, "source image")->required();
  noise->add_option("--output", noise_args.output, "destination")->required();
  noise_args.noise.attach(noise);
  noise->add_option("--seed", noise_args.seed, "noise seed")
      ->capture_default_str();
  noise->callback([&] { run_noise(noise_args); });

  auto* analyze = app.add_subcommand("analyze", "inspect a trained net");
  analyze->require_subcommand(1);

  ActivationArgs units_args;
  double units_tau = 0.8;
  auto* units = analyze->add_subcommand(
      "units", "per-unit activation statistics over sampled patches");
  attach_activation_opts(units, &units_args);
  units->add_option("--tau", units_tau, "binarity threshold")
      ->capture_default_str();
  units->callback([&] { run_units(units_args, units_tau); });

  ActivationArgs cov_args;
  std::size_t cov_m = 16;
  auto* covariance = analyze->add_subcommand(
      "covariance", "covariance of the most variable units");
  attach_activation_opts(covariance, &cov_args);
  covariance->add_option("--m", cov_m, "units to report")->capture_default_str();
  covariance->callback([&] { run_covariance(cov_args, cov_m); });

  std::string spectrum_model;
  std::size_t spectrum_layer = 0;
  auto* spectrum =
      analyze->add_subcommand("spectrum", "singular values of a weight matrix");
  spectrum->add_option("--model", spectrum_model, "checkpoint")->required();
  spectrum->add_option("--layer", spectrum_layer, "weight layer index")
      ->capture_default_str();
  spectrum->callback([&] { run_spectrum(spectrum_model, spectrum_layer); });

  FiltersArgs filters_args;
  auto* filters = analyze->add_subcommand(
      "filters", "montage of detector rows or generator columns");
  filters->add_option("--model", filters_args.model, "checkpoint")->required();
  filters->add_option("--which", filters_args.which, "detectors | generators")
      ->capture_default_str();
  filters->add_option("--out", filters_args.out, "montage image path")
      ->required();
  filters->add_option("--cols", filters_args.cols, "montage columns (0 = square)");
  filters->add_option("--pad", filters_args.pad, "separator pixels")
      ->capture_default_str();
  filters->callback([&] { run_filters(filters_args); });

  PatternArgs pattern_args;
  auto* patterns = analyze->add_subcommand(
      "output-patterns", "output image each hidden unit produces alone");
  patterns->add_option("--model", pattern_args.model, "checkpoint")->required();
  patterns->add_option("--layer", pattern_args.layer, "hidden layer index")
      ->capture_default_str();
  patterns->add_option("--units", pattern_args.units_csv,
                       "comma separated unit list (default: first --count)");
  patterns->add_option("--count", pattern_args.count,
                       "how many units when --units is not given")
      ->capture_default_str();
  patterns->add_option("--out", pattern_args.out, "montage image path")
      ->required();
  patterns->add_option("--cols", pattern_args.cols, "montage columns (0 = square)");
  patterns->add_option("--pad", pattern_args.pad, "separator pixels")
      ->capture_default_str();
  patterns->callback([&] { run_output_patterns(pattern_args); });

  ActMaxArgs actmax_args;
  auto* actmax = analyze->add_subcommand(
      "actmax", "gradient-ascend the input that excites one unit");
  actmax->add_option("--model", actmax_args.model, "checkpoint")->required();
  actmax->add_option("--layer", actmax_args.layer, "weight layer index")
      ->capture_default_str();
  actmax->add_option("--unit", actmax_args.unit, "unit index")
      ->capture_default_str();
  actmax->add_option("--steps", actmax_args.steps, "ascent steps")
      ->capture_default_str();
  actmax->add_option("--step-size", actmax_args.step_size, "ascent step size")
      ->capture_default_str();
  actmax->add_option("--seed", actmax_args.seed, "init seed")
      ->capture_default_str();
  actmax->add_option("--out", actmax_args.out, "write the input pattern image");
  actmax->callback([&] { run_actmax(actmax_args); });

  PatchesArgs patches_args;
  auto* patches = analyze->add_subcommand(
      "patches", "corpus patches that excite one unit most");
  patches->add_option("--model", patches_args.model, "checkpoint")->required();
  patches->add_option("--images", patches_args.image_dir, "corpus directory")
      ->required();
  patches->add_option("--layer", patches_args.layer, "weight layer index")
      ->capture_default_str();
  patches->add_option("--unit", patches_args.unit, "unit index")
      ->capture_default_str();
  patches->add_option("--top", patches_args.top, "patches to keep")
      ->capture_default_str();
  patches->add_option("--scan-stride", patches_args.scan_stride,
                      "scan grid step")
      ->capture_default_str();
  patches->add_option("--out", patches_args.out, "montage image path");
  patches->callback([&] { run_patches(patches_args); });

  ImportanceArgs importance_args;
  auto* importance = analyze->add_subcommand(
      "importance", "PSNR credit of random detector subsets");
  importance->add_option("--model", importance_args.model, "checkpoint")
      ->required();
  importance->add_option("--clean-dir", importance_args.clean_dir,
                         "clean test images")
      ->required();
  importance_args.noise.attach(importance);
  importance->add_option("--stride", importance_args.stride, "denoise stride")
      ->capture_default_str();
  importance->add_option("--subset", importance_args.subset,
                         "detectors kept per trial")
      ->required();
  importance->add_option("--iterations", importance_args.iterations,
                         "random subsets to try")
      ->capture_default_str();
  importance->add_option("--seed", importance_args.seed, "subset seed")
      ->capture_default_str();
  importance->callback([&] { run_importance(importance_args); });

  SaturationArgs saturation_args;
  auto* saturation = analyze->add_subcommand(
      "saturation", "denoise with the hidden nonlinearity replaced");
  saturation->add_option("--model", saturation_args.model, "checkpoint")
      ->required();
  saturation->add_option("--input", saturation_args.input, "noisy image")
      ->required();
  saturation->add_option("--output", saturation_args.output, "result path")
      ->required();
  saturation
      ->add_option("--mode", saturation_args.mode,
                   "with_tanh | bypass_tanh | hard_threshold | hard_threshold_raw")
      ->capture_default_str();
  saturation->add_option("--tau", saturation_args.tau, "zeroing threshold")
      ->capture_default_str();
  saturation->add_option("--stride", saturation_args.stride, "slide step")
      ->capture_default_str();
  saturation->add_option("--reference", saturation_args.reference,
                         "clean image; prints PSNR");
  saturation->callback([&] { run_saturation(saturation_args); });

  AlarmArgs alarm_args;
  auto* alarm = analyze->add_subcommand(
      "alarm", "reports where test PSNR degraded in a training log");
  alarm->add_option("--progress", alarm_args.progress, "progress.csv path")
      ->required();
  alarm->add_option("--drop", alarm_args.drop, "alert threshold in dB")
      ->capture_default_str();
  alarm->callback([&] { run_alarm(alarm_args); });

  auto* dict = app.add_subcommand("dict", "sparse-coding view of the last layer");
  dict->require_subcommand(1);

  DictApproxArgs dict_approx_args;
  auto* dict_approx = dict->add_subcommand(
      "approx", "reconstruct an image with box-constrained least squares");
  dict_approx->add_option("--model", dict_approx_args.model, "checkpoint")
      ->required();
  dict_approx->add_option("--input", dict_approx_args.input, "image to encode")
      ->required();
  dict_approx->add_option("--output", dict_approx_args.output, "reconstruction")
      ->required();
  dict_approx->add_option("--stride", dict_approx_args.stride, "tile step")
      ->capture_default_str();
  dict_approx->add_option("--iters", dict_approx_args.iters,
                          "max solver iterations")
      ->capture_default_str();
  dict_approx->add_option("--tol", dict_approx_args.tol,
                          "solver stop tolerance")
      ->capture_default_str();
  dict_approx->callback([&] { run_dict_approx(dict_approx_args); });

  OmpDenoiseArgs omp_args;
  auto* omp = dict->add_subcommand(
      "omp-denoise", "denoise by matching pursuit on the dictionary");
  omp->add_option("--model", omp_args.model, "checkpoint")->required();
  omp->add_option("--input", omp_args.input, "noisy image")->required();
  omp->add_option("--output", omp_args.output, "result path")->required();
  omp->add_option("--sigma", omp_args.sigma, "noise stddev the image carries")
      ->capture_default_str();
  omp->add_option("--stride", omp_args.stride, "tile step")
      ->capture_default_str();
  omp->add_option("--max-atoms", omp_args.max_atoms, "atoms per patch")
      ->capture_default_str();
  omp->add_option("--c", omp_args.c, "residual slack factor")
      ->capture_default_str();
  omp->add_option("--reference", omp_args.reference,
                  "clean image; prints PSNR");
  omp->callback([&] { run_omp_denoise(omp_args); });

  DictExportArgs dict_export_args;
  auto* dict_export =
      dict->add_subcommand("export", "write the dictionary to a file");
  dict_export->add_option("--model", dict_export_args.model, "checkpoint")
      ->required();
  dict_export->add_option("--out", dict_export_args.out, "binary dictionary path");
  dict_export->add_flag("--normalize", dict_export_args.normalize,
                        "unit-norm the atoms first");
  dict_export->add_option("--montage", dict_export_args.montage,
                          "also render the atoms to an image");
  dict_export->add_option("--cols", dict_export_args.cols,
                          "montage columns (0 = square)");
  dict_export->add_option("--pad", dict_export_args.pad, "separator pixels")
      ->capture_default_str();
  dict_export->callback([&] {
    if (dict_export_args.out.empty() && dict_export_args.montage.empty())
      fail_usage("dict export needs --out and/or --montage");
    run_dict_export(dict_export_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}
