#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/architecture.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"

namespace mlpd {

// Per-sample forward bookkeeping reused by backprop and the introspection
// ops. pre[l]/post[l] are the affine result and the activation of layer l;
// the last layer is linear so pre.back() == post.back().
struct ForwardTrace {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

struct Gradients {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;

  void scale(double f);
  void add(const Gradients& other);
};

// Fully-connected tanh net with a linear output layer. Layer l maps
// dims[l] -> dims[l+1] via weights[l] (rows = dims[l+1]) and biases[l].
struct Mlp {
  Architecture arch;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::uint64_t update_count = 0;
  std::string rng_algorithm;  // generator used for init/training, for records

  std::size_t layer_count() const { return weights.size(); }
  std::size_t input_dim() const { return arch.input_dim(); }
  std::size_t output_dim() const { return arch.output_dim(); }
  std::size_t parameter_count() const;
};

// tanh with the result nudged off exact +-1.0 (IEEE tanh rounds to 1.0 for
// large inputs, which would break the strict open-interval contract that the
// introspection ops rely on).
double tanh_strict(double x);

// Uniform init on +-sqrt(6/(fan_in+fan_out)), zero biases.
Mlp init_mlp(const Architecture& arch, Rng& rng);

std::vector<double> forward(const Mlp& mlp, std::span<const double> x,
                            ForwardTrace* trace = nullptr);

// Mean-squared-error loss over output components; fills grads (resized as
// needed) and returns the loss value for the traced sample.
double backward(const Mlp& mlp, const ForwardTrace& trace,
                std::span<const double> target, Gradients* grads);

// theta -= lr * grad; bumps update_count. Throws numeric_error on non-finite
// gradients or resulting weights so training aborts loudly instead of
// poisoning checkpoints.
void sgd_step(Mlp* mlp, const Gradients& grads, double lr);

// Binary checkpoint, fixed little-endian layout:
//   "MLPD" | u8 version=1 | u64 len + architecture string |
//   u64 layer count | per layer: u64 rows, u64 cols, rows*cols f64 weights
//   (row-major), rows f64 biases | u64 update counter |
//   u64 len + rng algorithm name
void save_mlp(const Mlp& mlp, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace mlpd
