#include "core/sparse_dict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "core/errors.hpp"

namespace mlpd {

namespace {

// Largest eigenvalue of D^T D by power iteration, padded a hair upward so the
// derived gradient step is never too long.
double lambda_max(const Matrix& atoms) {
  std::size_t n = atoms.cols;
  std::vector<double> v(n, 1.0), dv(atoms.rows), gv(n);
  double lambda = 0;
  for (int iter = 0; iter < 200; ++iter) {
    mat_vec_mul_into(atoms, v, dv);
    mat_tvec_mul_into(atoms, dv, gv);
    double norm = 0;
    for (double x : gv) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0) return 0;
    double next = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = gv[i] / norm;
    if (iter > 4 && std::abs(next - lambda) <= 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda * (1.0 + 1e-9);
}

// Solves (G + 0*I) a = b for symmetric positive definite G via Cholesky.
std::vector<double> spd_solve(Matrix g, std::vector<double> b) {
  std::size_t n = g.rows;
  for (std::size_t j = 0; j < n; ++j) {
    double d = g.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= g.at(j, k) * g.at(j, k);
    if (!(d > 0))
      throw numeric_error("support atoms are linearly dependent");
    d = std::sqrt(d);
    g.at(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= g.at(i, k) * g.at(j, k);
      g.at(i, j) = s / d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= g.at(i, k) * b[k];
    b[i] = s / g.at(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= g.at(k, i) * b[k];
    b[i] = s / g.at(i, i);
  }
  return b;
}

struct TileGrid {
  std::vector<std::size_t> rows, cols;
};

TileGrid tile_positions(const ImageBuffer& img, std::size_t edge,
                        std::size_t stride) {
  if (stride == 0 || stride > edge)
    throw invalid_argument("stride must be in [1, patch edge]");
  if (img.height < edge || img.width < edge)
    throw invalid_argument("image is smaller than the dictionary patch");
  TileGrid grid;
  for (std::size_t r = 0;; r += stride) {
    if (r + edge >= img.height) {
      grid.rows.push_back(img.height - edge);
      break;
    }
    grid.rows.push_back(r);
  }
  for (std::size_t c = 0;; c += stride) {
    if (c + edge >= img.width) {
      grid.cols.push_back(img.width - edge);
      break;
    }
    grid.cols.push_back(c);
  }
  return grid;
}

}  // namespace

std::size_t Dictionary::patch_edge() const {
  auto edge = static_cast<std::size_t>(std::lround(std::sqrt(double(atoms.rows))));
  if (edge * edge != atoms.rows)
    throw invalid_argument("dictionary dimension is not a square patch");
  return edge;
}

void Dictionary::validate() const {
  if (atoms.rows == 0 || atoms.cols == 0)
    throw invalid_argument("dictionary has no atoms");
  if (bias.size() != atoms.rows)
    throw invalid_argument("dictionary bias size does not match the atom dimension");
  if (!atoms.all_finite())
    throw invalid_argument("dictionary contains non-finite values");
  for (double v : bias)
    if (!std::isfinite(v))
      throw invalid_argument("dictionary bias contains non-finite values");
}

Dictionary extract_dictionary(const Mlp& mlp) {
  Dictionary dict;
  dict.atoms = mlp.weights.back();
  dict.bias = mlp.biases.back();
  dict.validate();
  return dict;
}

Dictionary normalize_columns(const Dictionary& dict) {
  dict.validate();
  Dictionary out = dict;
  out.column_norms.assign(dict.size(), 0.0);
  for (std::size_t c = 0; c < dict.size(); ++c) {
    double norm = 0;
    for (std::size_t r = 0; r < dict.dim(); ++r)
      norm += dict.atoms.at(r, c) * dict.atoms.at(r, c);
    norm = std::sqrt(norm);
    if (norm == 0)
      throw invalid_argument("dictionary has a zero column");
    out.column_norms[c] = norm;
    for (std::size_t r = 0; r < dict.dim(); ++r)
      out.atoms.at(r, c) = dict.atoms.at(r, c) / norm;
  }
  out.normalized = true;
  return out;
}

BoxLsResult box_ls_approx(const Dictionary& dict, std::span<const double> x,
                          std::size_t max_iters, double tol) {
  dict.validate();
  if (x.size() != dict.dim())
    throw invalid_argument("target size does not match the atom dimension");
  if (max_iters == 0) throw invalid_argument("need at least one iteration");
  if (!(tol >= 0)) throw invalid_argument("tolerance must be non-negative");

  double lambda = lambda_max(dict.atoms);
  if (lambda <= 0) throw invalid_argument("dictionary has no energy");
  double step = 1.0 / lambda;

  std::size_t n = dict.size();
  BoxLsResult out;
  out.coeffs.assign(n, 0.0);
  std::vector<double> resid(x.begin(), x.end());  // x - D a, a = 0
  std::vector<double> grad(n);

  auto objective = [&]() {
    double s = 0;
    for (double r : resid) s += r * r;
    return 0.5 * s;
  };

  double f = objective();
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    // grad of 0.5||x - D a||^2 is -D^T (x - D a)
    mat_tvec_mul_into(dict.atoms, resid, grad);
    for (std::size_t i = 0; i < n; ++i) {
      double next = out.coeffs[i] + step * grad[i];
      out.coeffs[i] = std::clamp(next, -1.0, 1.0);
    }
    std::vector<double> da(dict.dim());
    mat_vec_mul_into(dict.atoms, out.coeffs, da);
    for (std::size_t i = 0; i < dict.dim(); ++i) resid[i] = x[i] - da[i];
    double f_next = objective();
    if (f_next > f + 1e-9 * (1.0 + f))
      throw numeric_error("projected gradient step increased the objective");
    out.iterations = iter;
    if (f - f_next < tol) {
      f = f_next;
      break;
    }
    f = f_next;
  }
  out.objective = f;
  return out;
}

ApproxResult approx_image(const Dictionary& dict, const ImageBuffer& img,
                          std::size_t stride, std::size_t max_iters,
                          double tol) {
  dict.validate();
  std::size_t edge = dict.patch_edge();
  TileGrid grid = tile_positions(img, edge, stride);

  ImageBuffer sum(img.width, img.height);
  ImageBuffer count(img.width, img.height);
  std::vector<double> patch(dict.dim());

  for (std::size_t r : grid.rows) {
    for (std::size_t c : grid.cols) {
      for (std::size_t pr = 0; pr < edge; ++pr)
        for (std::size_t pc = 0; pc < edge; ++pc)
          patch[pr * edge + pc] =
              normalize_pixel(img.at(r + pr, c + pc)) - dict.bias[pr * edge + pc];
      BoxLsResult fit = box_ls_approx(dict, patch, max_iters, tol);
      std::vector<double> recon(dict.dim());
      mat_vec_mul_into(dict.atoms, fit.coeffs, recon);
      for (std::size_t pr = 0; pr < edge; ++pr) {
        for (std::size_t pc = 0; pc < edge; ++pc) {
          double v = denormalize_pixel(recon[pr * edge + pc] +
                                       dict.bias[pr * edge + pc]);
          sum.at(r + pr, c + pc) += v;
          count.at(r + pr, c + pc) += 1.0;
        }
      }
    }
  }

  ApproxResult out;
  out.image = ImageBuffer(img.width, img.height);
  for (std::size_t i = 0; i < sum.data.size(); ++i)
    out.image.data[i] = sum.data[i] / count.data[i];
  out.psnr = psnr(img, out.image);
  return out;
}

const char* to_string(OmpStop stop) {
  switch (stop) {
    case OmpStop::residual: return "residual";
    case OmpStop::max_atoms: return "max_atoms";
    case OmpStop::stalled: return "stalled";
  }
  return "unknown";
}

OmpResult omp(const Dictionary& dict, std::span<const double> x,
              std::size_t max_atoms, double epsilon) {
  dict.validate();
  if (x.size() != dict.dim())
    throw invalid_argument("target size does not match the atom dimension");
  if (max_atoms == 0) throw invalid_argument("need a positive atom budget");
  if (!(epsilon >= 0)) throw invalid_argument("epsilon must be non-negative");
  for (std::size_t c = 0; c < dict.size(); ++c) {
    double norm = 0;
    for (std::size_t r = 0; r < dict.dim(); ++r)
      norm += dict.atoms.at(r, c) * dict.atoms.at(r, c);
    if (std::abs(norm - 1.0) > 1e-9)
      throw invalid_argument("matching pursuit requires unit-norm atoms; normalize the dictionary first");
  }
  std::size_t budget = std::min({max_atoms, dict.size(), dict.dim()});

  OmpResult out;
  out.coeffs.assign(dict.size(), 0.0);
  std::vector<double> resid(x.begin(), x.end());
  std::vector<double> corr(dict.size());
  std::vector<bool> in_support(dict.size(), false);
  std::vector<double> solution;

  auto resid_norm2 = [&]() {
    double s = 0;
    for (double r : resid) s += r * r;
    return s;
  };

  out.residual_norm2 = resid_norm2();
  out.stop_reason = OmpStop::residual;
  while (out.residual_norm2 > epsilon) {
    if (out.support.size() == budget) {
      out.stop_reason = OmpStop::max_atoms;
      break;
    }
    mat_tvec_mul_into(dict.atoms, resid, corr);
    std::size_t best = dict.size();
    double best_abs = 0;
    for (std::size_t c = 0; c < dict.size(); ++c) {
      if (in_support[c]) continue;
      double a = std::abs(corr[c]);
      if (a > best_abs) {
        best_abs = a;
        best = c;
      }
    }
    if (best == dict.size() || best_abs <= 1e-12) {
      out.stop_reason = OmpStop::stalled;
      break;
    }
    out.support.push_back(best);
    in_support[best] = true;

    // Least squares on the support: (G^T G) a = G^T x.
    std::size_t s = out.support.size();
    Matrix gram(s, s);
    std::vector<double> rhs(s);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double dot = 0;
        for (std::size_t r = 0; r < dict.dim(); ++r)
          dot += dict.atoms.at(r, out.support[i]) * dict.atoms.at(r, out.support[j]);
        gram.at(i, j) = dot;
        gram.at(j, i) = dot;
      }
      double dot = 0;
      for (std::size_t r = 0; r < dict.dim(); ++r)
        dot += dict.atoms.at(r, out.support[i]) * x[r];
      rhs[i] = dot;
    }
    solution = spd_solve(gram, rhs);

    for (std::size_t r = 0; r < dict.dim(); ++r) {
      double approx = 0;
      for (std::size_t i = 0; i < s; ++i)
        approx += dict.atoms.at(r, out.support[i]) * solution[i];
      resid[r] = x[r] - approx;
    }
    out.residual_norm2 = resid_norm2();
  }

  for (std::size_t i = 0; i < out.support.size(); ++i)
    out.coeffs[out.support[i]] = solution[i];
  return out;
}

ImageBuffer omp_denoise_image(const Dictionary& dict, const ImageBuffer& noisy,
                              double sigma, std::size_t stride,
                              std::size_t max_atoms, double c) {
  dict.validate();
  if (!(sigma > 0)) throw invalid_argument("sigma must be positive");
  if (!(c > 0)) throw invalid_argument("slack factor must be positive");
  std::size_t edge = dict.patch_edge();
  TileGrid grid = tile_positions(noisy, edge, stride);
  double epsilon =
      static_cast<double>(dict.dim()) * (c * sigma / 255.0) * (c * sigma / 255.0);

  ImageBuffer sum(noisy.width, noisy.height);
  ImageBuffer count(noisy.width, noisy.height);
  std::vector<double> patch(dict.dim());

  for (std::size_t r : grid.rows) {
    for (std::size_t cc : grid.cols) {
      for (std::size_t pr = 0; pr < edge; ++pr)
        for (std::size_t pc = 0; pc < edge; ++pc)
          patch[pr * edge + pc] = normalize_pixel(noisy.at(r + pr, cc + pc)) -
                                  dict.bias[pr * edge + pc];
      OmpResult fit = omp(dict, patch, max_atoms, epsilon);
      std::vector<double> recon(dict.dim());
      mat_vec_mul_into(dict.atoms, fit.coeffs, recon);
      for (std::size_t pr = 0; pr < edge; ++pr) {
        for (std::size_t pc = 0; pc < edge; ++pc) {
          double v = denormalize_pixel(recon[pr * edge + pc] +
                                       dict.bias[pr * edge + pc]);
          sum.at(r + pr, cc + pc) += v;
          count.at(r + pr, cc + pc) += 1.0;
        }
      }
    }
  }

  ImageBuffer out(noisy.width, noisy.height);
  for (std::size_t i = 0; i < sum.data.size(); ++i)
    out.data[i] = sum.data[i] / count.data[i];
  return out;
}

namespace {

void put_u64(std::FILE* f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  if (std::fwrite(b, 1, 8, f) != 8) throw io_error("write failed");
}

void put_f64(std::FILE* f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(f, bits);
}

}  // namespace

void save_dictionary(const Dictionary& dict, const std::string& path) {
  dict.validate();
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(
      std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  put_u64(f.get(), dict.atoms.rows);
  put_u64(f.get(), dict.atoms.cols);
  for (double v : dict.atoms.data) put_f64(f.get(), v);
  for (double v : dict.bias) put_f64(f.get(), v);
  if (std::fflush(f.get()) != 0) throw io_error("write failed");
}

}  // namespace mlpd
