#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/mlp.hpp"
#include "core/noise.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"

namespace mlpd {

// Produces one network input vector per call (already normalized/assembled).
using PatchProvider = std::function<std::vector<double>()>;

// Inputs sampled like training does: uniform image, uniform position,
// optional fresh noise. Keeps `corpus` and `rng` by reference.
PatchProvider make_corpus_patch_source(const std::vector<ImageBuffer>& corpus,
                                       const Architecture& arch,
                                       const NoiseSpec* noise, Rng& rng);

// Inputs whose pixels are i.i.d. N(mean, sigma) in raw pixel units, for
// probing how a net responds to pure noise.
PatchProvider make_noise_patch_source(const Architecture& arch, double mean,
                                      double sigma, Rng& rng);

// pre/post of one layer for n sampled inputs; rows = units, cols = samples.
// `layer` is the weight-layer index (layer_count()-1 is the linear output).
struct ActivationSample {
  std::size_t layer = 0;
  Matrix pre;
  Matrix post;
};

ActivationSample collect_activations(const Mlp& mlp,
                                     const PatchProvider& source,
                                     std::size_t layer, std::size_t n);

// Entropy in bits over four equal bins of [-1,1]. Values may exceed the range
// by at most 1e-9 (clamped); beyond that it throws. Flat distributions give
// 0, the uniform one gives 2.
double unit_entropy(std::span<const double> values);

// Fraction of activations with |a| > tau.
double binarity_fraction(std::span<const double> values, double tau);
double binarity_fraction(const Matrix& activations, double tau);

// Singular values of one weight matrix, descending.
std::vector<double> weight_spectrum(const Mlp& mlp, std::size_t layer);

struct CovarianceResult {
  std::vector<std::size_t> units;  // selected unit indices, variance order
  Matrix cov;                      // m x m sample covariance (n-1 divisor)
};

// Covariance between the m units with the highest post-activation variance
// (ties resolved toward the lower index).
CovarianceResult activation_covariance(const ActivationSample& sample,
                                       std::size_t m);

// Rows of the first weight matrix / columns of the last one.
std::vector<std::vector<double>> feature_detectors(const Mlp& mlp);
std::vector<std::vector<double>> feature_generators(const Mlp& mlp);

// Output-layer image of a single hidden unit: a one-hot post-activation at
// `layer` is pushed through the remaining layers (later biases included,
// earlier layers ignored). For the last hidden layer this is the unit's
// feature generator plus the output bias.
std::vector<double> output_pattern(const Mlp& mlp, std::size_t layer,
                                   std::size_t unit);

struct ActMaxResult {
  std::vector<double> pattern;     // final input, normalized units
  std::vector<double> trajectory;  // pre-activation per step, initial first
};

// Gradient ascent on the pre-activation of (layer, unit) over the input,
// starting from N(0,1) pixels and rescaling back whenever the input norm
// exceeds its initial value.
ActMaxResult activation_maximization(const Mlp& mlp, std::size_t layer,
                                     std::size_t unit, Rng& rng,
                                     std::size_t steps,
                                     double step_size = 0.1);

struct RankedPatch {
  std::vector<double> patch;  // raw pixels of the input footprint
  std::size_t image = 0;      // corpus index
  std::size_t row = 0;        // top-left corner
  std::size_t col = 0;
  double activation = 0;      // pre-activation of the probed unit
};

// Corpus patches sorted by |pre-activation| of (layer, unit), strongest
// first; scan order breaks ties so results are reproducible.
std::vector<RankedPatch> max_activating_patches(
    const Mlp& mlp, std::size_t layer, std::size_t unit,
    const std::vector<ImageBuffer>& corpus, std::size_t top,
    std::size_t scan_stride = 1);

enum class SaturationMode {
  with_tanh,           // ordinary forward
  bypass_tanh,         // hidden activation used raw
  hard_threshold,      // |pre| < tau zeroed, then tanh
  hard_threshold_raw,  // |pre| < tau zeroed, tanh skipped
};

// Forward pass of a single-hidden-layer net with the hidden nonlinearity
// replaced per `mode` (nets with more hidden layers are rejected).
std::vector<double> saturation_forward(const Mlp& mlp,
                                       std::span<const double> x,
                                       SaturationMode mode, double tau = 1.0);

const char* to_string(SaturationMode mode);
SaturationMode saturation_mode_from_string(const std::string& name);

// Whole-image variant of saturation_forward: same padding, sliding and
// overlap averaging as ordinary denoising. Block-matching nets are rejected.
ImageBuffer saturation_denoise_image(const Mlp& mlp, const ImageBuffer& noisy,
                                     std::size_t stride, SaturationMode mode,
                                     double tau = 1.0);

// Copy of the net with every detector (first-layer row) outside `keep`
// flattened to its own mean value; biases untouched.
Mlp with_detector_subset(const Mlp& mlp, const std::vector<bool>& keep);

struct ImportanceResult {
  std::vector<double> mean_psnr;       // NaN for never-kept detectors
  std::vector<std::uint64_t> kept;     // how often each detector was kept
  double baseline = 0;                 // all detectors active
};

// Repeatedly keeps a random subset of detectors, flattens the rest, measures
// mean test PSNR and credits it to every kept detector.
ImportanceResult detector_importance(const Mlp& mlp,
                                     const std::vector<ImageBuffer>& test_clean,
                                     const NoiseSpec& noise,
                                     std::size_t denoise_stride,
                                     std::size_t subset_size,
                                     std::size_t iterations, Rng& rng);

struct UnitStats {
  std::size_t unit = 0;
  double mean = 0;
  double variance = 0;  // n-1 divisor
  double entropy_bits = 0;
};

// Per-unit summary of post-activations. Entropy is NaN for units whose values
// leave [-1,1] (the linear output layer); elsewhere it is unit_entropy.
std::vector<UnitStats> unit_stats(const ActivationSample& sample);

}  // namespace mlpd
