#include "core/introspect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "core/block_matching.hpp"
#include "core/errors.hpp"

namespace mlpd {

namespace {

std::string msg(const char* fmt, unsigned long long a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), fmt, a);
  return buf;
}

}  // namespace

PatchProvider make_corpus_patch_source(const std::vector<ImageBuffer>& corpus,
                                       const Architecture& arch,
                                       const NoiseSpec* noise, Rng& rng) {
  if (corpus.empty()) throw invalid_argument("patch source needs at least one image");
  const std::size_t in = arch.input_edge;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].width < in || corpus[i].height < in)
      throw invalid_argument(msg("corpus image %llu is smaller than the input window", i));
  }
  NoiseSpec noise_copy;
  bool noisy = noise != nullptr;
  if (noisy) {
    noise_copy = *noise;
    noise_copy.validate();
  }
  return [&corpus, &rng, arch, noise_copy, noisy, in]() {
    std::size_t idx = rng.uniform_below(corpus.size());
    const ImageBuffer& img = corpus[idx];
    std::size_t row = rng.uniform_below(img.height - in + 1);
    std::size_t col = rng.uniform_below(img.width - in + 1);
    ImageBuffer window(in, in);
    for (std::size_t r = 0; r < in; ++r)
      for (std::size_t c = 0; c < in; ++c)
        window.at(r, c) = img.at(row + r, col + c);
    if (noisy) window = apply_noise(window, noise_copy, rng);
    if (arch.bm) {
      BmSpec spec{arch.bm->k, arch.bm->patch_edge, arch.bm->window_edge, 1};
      std::size_t margin = (spec.window_edge - spec.patch_edge) / 2;
      auto neighbors = find_neighbors(window, {margin, margin}, spec);
      return assemble_bm_input(window, neighbors, spec.patch_edge);
    }
    return extract_patch_normalized(window, 0, 0, in);
  };
}

PatchProvider make_noise_patch_source(const Architecture& arch, double mean,
                                      double sigma, Rng& rng) {
  if (sigma < 0) throw invalid_argument("noise patch source needs sigma >= 0");
  const std::size_t in = arch.input_edge;
  Architecture arch_copy = arch;
  return [arch_copy, mean, sigma, &rng, in]() {
    ImageBuffer window(in, in);
    for (double& v : window.data) v = rng.gaussian(mean, sigma);
    if (arch_copy.bm) {
      BmSpec spec{arch_copy.bm->k, arch_copy.bm->patch_edge,
                  arch_copy.bm->window_edge, 1};
      std::size_t margin = (spec.window_edge - spec.patch_edge) / 2;
      auto neighbors = find_neighbors(window, {margin, margin}, spec);
      return assemble_bm_input(window, neighbors, spec.patch_edge);
    }
    return extract_patch_normalized(window, 0, 0, in);
  };
}

ActivationSample collect_activations(const Mlp& mlp,
                                     const PatchProvider& source,
                                     std::size_t layer, std::size_t n) {
  if (layer >= mlp.layer_count())
    throw invalid_argument(msg("layer %llu out of range", layer));
  if (n == 0) throw invalid_argument("need at least one sample");
  std::size_t units = mlp.weights[layer].rows;
  ActivationSample out;
  out.layer = layer;
  out.pre = Matrix(units, n);
  out.post = Matrix(units, n);
  ForwardTrace trace;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> x = source();
    forward(mlp, x, &trace);
    for (std::size_t u = 0; u < units; ++u) {
      out.pre.at(u, j) = trace.pre[layer][u];
      out.post.at(u, j) = trace.post[layer][u];
    }
  }
  return out;
}

double unit_entropy(std::span<const double> values) {
  if (values.empty()) throw invalid_argument("entropy of an empty sample");
  constexpr double slack = 1e-9;
  std::size_t counts[4] = {0, 0, 0, 0};
  for (double v : values) {
    if (!std::isfinite(v) || v < -1.0 - slack || v > 1.0 + slack)
      throw invalid_argument("entropy input outside [-1,1]");
    double c = std::clamp(v, -1.0, 1.0);
    int bin = static_cast<int>(std::floor((c + 1.0) * 2.0));
    if (bin > 3) bin = 3;  // v == 1.0 lands in the top bin
    ++counts[bin];
  }
  double n = static_cast<double>(values.size());
  double h = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    if (counts[b] == 0) continue;
    double p = static_cast<double>(counts[b]) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double binarity_fraction(std::span<const double> values, double tau) {
  if (values.empty()) throw invalid_argument("binarity of an empty sample");
  std::size_t hits = 0;
  for (double v : values)
    if (std::abs(v) > tau) ++hits;
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

double binarity_fraction(const Matrix& activations, double tau) {
  return binarity_fraction(std::span<const double>(activations.data), tau);
}

std::vector<double> weight_spectrum(const Mlp& mlp, std::size_t layer) {
  if (layer >= mlp.layer_count())
    throw invalid_argument(msg("layer %llu out of range", layer));
  return singular_values(mlp.weights[layer]);
}

CovarianceResult activation_covariance(const ActivationSample& sample,
                                       std::size_t m) {
  std::size_t units = sample.post.rows;
  std::size_t n = sample.post.cols;
  if (m == 0 || m > units)
    throw invalid_argument("covariance unit count out of range");
  if (n < 2) throw invalid_argument("covariance needs at least two samples");

  std::vector<double> means(units, 0.0);
  std::vector<double> vars(units, 0.0);
  for (std::size_t u = 0; u < units; ++u) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += sample.post.at(u, j);
    means[u] = s / static_cast<double>(n);
    double q = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = sample.post.at(u, j) - means[u];
      q += d * d;
    }
    vars[u] = q / static_cast<double>(n - 1);
  }

  std::vector<std::size_t> order(units);
  for (std::size_t u = 0; u < units; ++u) order[u] = u;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vars[a] > vars[b]; });
  order.resize(m);

  CovarianceResult out;
  out.units = order;
  out.cov = Matrix(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j)
        s += (sample.post.at(order[a], j) - means[order[a]]) *
             (sample.post.at(order[b], j) - means[order[b]]);
      double c = s / static_cast<double>(n - 1);
      out.cov.at(a, b) = c;
      out.cov.at(b, a) = c;
    }
  }
  return out;
}

std::vector<std::vector<double>> feature_detectors(const Mlp& mlp) {
  const Matrix& w = mlp.weights.front();
  std::vector<std::vector<double>> rows(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) {
    auto row = w.row(r);
    rows[r].assign(row.begin(), row.end());
  }
  return rows;
}

std::vector<std::vector<double>> feature_generators(const Mlp& mlp) {
  const Matrix& w = mlp.weights.back();
  std::vector<std::vector<double>> cols(w.cols);
  for (std::size_t c = 0; c < w.cols; ++c) {
    cols[c].resize(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) cols[c][r] = w.at(r, c);
  }
  return cols;
}

std::vector<double> output_pattern(const Mlp& mlp, std::size_t layer,
                                   std::size_t unit) {
  std::size_t last = mlp.layer_count() - 1;
  if (layer >= last)
    throw invalid_argument("output pattern is defined for hidden layers only");
  if (unit >= mlp.weights[layer].rows)
    throw invalid_argument(msg("unit %llu out of range", unit));

  std::vector<double> act(mlp.weights[layer].rows, 0.0);
  act[unit] = 1.0;
  for (std::size_t l = layer + 1; l <= last; ++l) {
    std::vector<double> next(mlp.weights[l].rows);
    mat_vec_mul_into(mlp.weights[l], act, next);
    for (std::size_t r = 0; r < next.size(); ++r) next[r] += mlp.biases[l][r];
    if (l < last)
      for (double& v : next) v = tanh_strict(v);
    act = std::move(next);
  }
  return act;
}

ActMaxResult activation_maximization(const Mlp& mlp, std::size_t layer,
                                     std::size_t unit, Rng& rng,
                                     std::size_t steps, double step_size) {
  if (layer >= mlp.layer_count())
    throw invalid_argument(msg("layer %llu out of range", layer));
  if (unit >= mlp.weights[layer].rows)
    throw invalid_argument(msg("unit %llu out of range", unit));
  if (steps == 0) throw invalid_argument("need at least one step");
  if (!(step_size > 0)) throw invalid_argument("step size must be positive");

  std::size_t dim = mlp.input_dim();
  std::vector<double> x = gaussian(rng, dim, 0.0, 1.0);
  double norm0 = 0;
  for (double v : x) norm0 += v * v;
  norm0 = std::sqrt(norm0);

  ActMaxResult out;
  out.trajectory.reserve(steps + 1);
  ForwardTrace trace;
  std::vector<double> delta, below;

  for (std::size_t step = 0; step <= steps; ++step) {
    forward(mlp, x, &trace);
    out.trajectory.push_back(trace.pre[layer][unit]);
    if (step == steps) break;

    // d(pre[layer][unit]) / dx by backprop through the layers below.
    delta.assign(mlp.weights[layer].rows, 0.0);
    delta[unit] = 1.0;
    for (std::size_t l = layer; l-- > 0;) {
      std::vector<double> prev(mlp.weights[l].rows);
      mat_tvec_mul_into(mlp.weights[l + 1], delta, prev);
      for (std::size_t r = 0; r < prev.size(); ++r) {
        double post = trace.post[l][r];
        prev[r] *= 1.0 - post * post;
      }
      delta = std::move(prev);
    }
    below.resize(dim);
    mat_tvec_mul_into(mlp.weights[0], delta, below);
    if (layer == 0) below.assign(mlp.weights[0].row(unit).begin(),
                                 mlp.weights[0].row(unit).end());

    for (std::size_t i = 0; i < dim; ++i) x[i] += step_size * below[i];
    double norm = 0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > norm0 && norm > 0) {
      double scale = norm0 / norm;
      for (double& v : x) v *= scale;
    }
  }
  out.pattern = std::move(x);
  return out;
}

std::vector<RankedPatch> max_activating_patches(
    const Mlp& mlp, std::size_t layer, std::size_t unit,
    const std::vector<ImageBuffer>& corpus, std::size_t top,
    std::size_t scan_stride) {
  if (layer >= mlp.layer_count())
    throw invalid_argument(msg("layer %llu out of range", layer));
  if (unit >= mlp.weights[layer].rows)
    throw invalid_argument(msg("unit %llu out of range", unit));
  if (top == 0) throw invalid_argument("need at least one patch");
  if (scan_stride == 0) throw invalid_argument("scan stride must be positive");
  if (mlp.arch.bm)
    throw invalid_argument("patch ranking does not support block-matching nets");

  const std::size_t in = mlp.arch.input_edge;
  std::vector<RankedPatch> all;
  ForwardTrace trace;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const ImageBuffer& img = corpus[i];
    if (img.width < in || img.height < in) continue;
    for (std::size_t r = 0; r + in <= img.height; r += scan_stride) {
      for (std::size_t c = 0; c + in <= img.width; c += scan_stride) {
        std::vector<double> x = extract_patch_normalized(img, r, c, in);
        forward(mlp, x, &trace);
        RankedPatch p;
        p.patch = extract_patch(img, r, c, in);
        p.image = i;
        p.row = r;
        p.col = c;
        p.activation = trace.pre[layer][unit];
        all.push_back(std::move(p));
      }
    }
  }
  if (all.empty()) throw invalid_argument("no image is large enough to scan");
  std::stable_sort(all.begin(), all.end(), [](const RankedPatch& a, const RankedPatch& b) {
    return std::abs(a.activation) > std::abs(b.activation);
  });
  if (all.size() > top) all.resize(top);
  return all;
}

std::vector<double> saturation_forward(const Mlp& mlp,
                                       std::span<const double> x,
                                       SaturationMode mode, double tau) {
  if (mlp.layer_count() != 2)
    throw invalid_argument("saturation probe needs exactly one hidden layer");
  if (x.size() != mlp.input_dim())
    throw invalid_argument("input size does not match the network");
  if (!(tau >= 0)) throw invalid_argument("threshold must be non-negative");

  std::vector<double> hidden(mlp.weights[0].rows);
  std::vector<double> xv(x.begin(), x.end());
  mat_vec_mul_into(mlp.weights[0], xv, hidden);
  for (std::size_t r = 0; r < hidden.size(); ++r) hidden[r] += mlp.biases[0][r];

  switch (mode) {
    case SaturationMode::with_tanh:
      for (double& v : hidden) v = tanh_strict(v);
      break;
    case SaturationMode::bypass_tanh:
      break;
    case SaturationMode::hard_threshold:
      for (double& v : hidden) {
        if (std::abs(v) < tau) v = 0;
        v = tanh_strict(v);
      }
      break;
    case SaturationMode::hard_threshold_raw:
      for (double& v : hidden)
        if (std::abs(v) < tau) v = 0;
      break;
  }

  std::vector<double> out(mlp.weights[1].rows);
  mat_vec_mul_into(mlp.weights[1], hidden, out);
  for (std::size_t r = 0; r < out.size(); ++r) out[r] += mlp.biases[1][r];
  return out;
}

const char* to_string(SaturationMode mode) {
  switch (mode) {
    case SaturationMode::with_tanh: return "with_tanh";
    case SaturationMode::bypass_tanh: return "bypass_tanh";
    case SaturationMode::hard_threshold: return "hard_threshold";
    case SaturationMode::hard_threshold_raw: return "hard_threshold_raw";
  }
  return "unknown";
}

SaturationMode saturation_mode_from_string(const std::string& name) {
  if (name == "with_tanh" || name == "tanh") return SaturationMode::with_tanh;
  if (name == "bypass_tanh" || name == "bypass") return SaturationMode::bypass_tanh;
  if (name == "hard_threshold" || name == "hard") return SaturationMode::hard_threshold;
  if (name == "hard_threshold_raw" || name == "hard_raw")
    return SaturationMode::hard_threshold_raw;
  throw invalid_argument("unknown saturation mode '" + name + "'");
}

ImageBuffer saturation_denoise_image(const Mlp& mlp, const ImageBuffer& noisy,
                                     std::size_t stride, SaturationMode mode,
                                     double tau) {
  if (mlp.arch.bm)
    throw invalid_argument("saturation probe does not support block-matching nets");
  if (mlp.layer_count() != 2)
    throw invalid_argument("saturation probe needs exactly one hidden layer");
  PatchGeometry geometry = geometry_for(mlp.arch, stride);
  geometry.validate();
  if (geometry.stride > geometry.output_edge)
    throw invalid_argument("stride larger than the output patch would skip pixels");

  std::size_t in = geometry.input_edge, out_edge = geometry.output_edge;
  std::size_t off = (in - out_edge) / 2;
  std::size_t pad = off + out_edge - 1;
  ImageBuffer padded = mirror_pad(noisy, pad);

  auto positions = [&](std::size_t padded_dim) {
    std::vector<std::size_t> pos;
    std::size_t last = padded_dim - in;
    for (std::size_t p = 0; p < last; p += geometry.stride) pos.push_back(p);
    pos.push_back(last);
    return pos;
  };
  auto row_pos = positions(padded.height);
  auto col_pos = positions(padded.width);

  ImageBuffer sum(padded.width, padded.height);
  ImageBuffer count(padded.width, padded.height);
  for (std::size_t r : row_pos) {
    for (std::size_t c : col_pos) {
      std::vector<double> x = extract_patch_normalized(padded, r, c, in);
      std::vector<double> y = saturation_forward(mlp, x, mode, tau);
      for (std::size_t pr = 0; pr < out_edge; ++pr) {
        for (std::size_t pc = 0; pc < out_edge; ++pc) {
          sum.at(r + off + pr, c + off + pc) +=
              denormalize_pixel(y[pr * out_edge + pc]);
          count.at(r + off + pr, c + off + pc) += 1.0;
        }
      }
    }
  }

  ImageBuffer result(noisy.width, noisy.height);
  for (std::size_t r = 0; r < noisy.height; ++r)
    for (std::size_t c = 0; c < noisy.width; ++c)
      result.at(r, c) = sum.at(r + pad, c + pad) / count.at(r + pad, c + pad);
  return result;
}

Mlp with_detector_subset(const Mlp& mlp, const std::vector<bool>& keep) {
  if (keep.size() != mlp.weights[0].rows)
    throw invalid_argument("keep mask size does not match detector count");
  Mlp copy = mlp;
  Matrix& w = copy.weights[0];
  for (std::size_t r = 0; r < w.rows; ++r) {
    if (keep[r]) continue;
    auto row = w.row(r);
    double mean = 0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(w.cols);
    for (double& v : row) v = mean;
  }
  return copy;
}

ImportanceResult detector_importance(const Mlp& mlp,
                                     const std::vector<ImageBuffer>& test_clean,
                                     const NoiseSpec& noise,
                                     std::size_t denoise_stride,
                                     std::size_t subset_size,
                                     std::size_t iterations, Rng& rng) {
  std::size_t detectors = mlp.weights[0].rows;
  if (subset_size == 0 || subset_size > detectors)
    throw invalid_argument("subset size out of range");
  if (iterations == 0) throw invalid_argument("need at least one iteration");
  if (test_clean.empty()) throw invalid_argument("need at least one test image");
  noise.validate();

  // One fixed noisy realization so every subset faces the same task.
  std::vector<ImageBuffer> noisy;
  noisy.reserve(test_clean.size());
  for (const ImageBuffer& img : test_clean)
    noisy.push_back(apply_noise(img, noise, rng));

  ImportanceResult out;
  out.mean_psnr.assign(detectors, 0.0);
  out.kept.assign(detectors, 0);
  out.baseline = mean_test_psnr(mlp, test_clean, noisy, denoise_stride);

  std::vector<std::size_t> pool(detectors);
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    for (std::size_t i = 0; i < detectors; ++i) pool[i] = i;
    // Partial Fisher-Yates: the first subset_size entries become the subset.
    for (std::size_t i = 0; i < subset_size; ++i) {
      std::size_t j = i + rng.uniform_below(detectors - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<bool> keep(detectors, false);
    for (std::size_t i = 0; i < subset_size; ++i) keep[pool[i]] = true;

    Mlp reduced = with_detector_subset(mlp, keep);
    double score = mean_test_psnr(reduced, test_clean, noisy, denoise_stride);
    for (std::size_t i = 0; i < subset_size; ++i) {
      out.mean_psnr[pool[i]] += score;
      ++out.kept[pool[i]];
    }
  }

  for (std::size_t d = 0; d < detectors; ++d) {
    if (out.kept[d] > 0)
      out.mean_psnr[d] /= static_cast<double>(out.kept[d]);
    else
      out.mean_psnr[d] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::vector<UnitStats> unit_stats(const ActivationSample& sample) {
  std::size_t units = sample.post.rows;
  std::size_t n = sample.post.cols;
  if (n < 2) throw invalid_argument("unit stats need at least two samples");
  std::vector<UnitStats> out(units);
  for (std::size_t u = 0; u < units; ++u) {
    auto row = sample.post.row(u);
    double mean = 0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    double q = 0;
    for (double v : row) q += (v - mean) * (v - mean);
    out[u].unit = u;
    out[u].mean = mean;
    out[u].variance = q / static_cast<double>(n - 1);
    // Entropy is only defined on tanh-bounded layers; a linear output layer
    // gets NaN rather than an error so mean/variance stay reachable.
    bool bounded = true;
    for (double v : row)
      if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-9) bounded = false;
    out[u].entropy_bits =
        bounded ? unit_entropy(row) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace mlpd
