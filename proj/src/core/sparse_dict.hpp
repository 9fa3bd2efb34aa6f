#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/matrix.hpp"
#include "core/mlp.hpp"

namespace mlpd {

// The last weight matrix of a trained net read as a patch dictionary: each
// column is one atom in output-patch space, the output bias is the offset
// every reconstruction sits on.
struct Dictionary {
  Matrix atoms;                      // dim x size, columns are atoms
  std::vector<double> bias;          // dim
  std::vector<double> column_norms;  // pre-normalization norms, else empty
  bool normalized = false;

  std::size_t dim() const { return atoms.rows; }
  std::size_t size() const { return atoms.cols; }
  std::size_t patch_edge() const;  // dim must be a perfect square
  void validate() const;
};

Dictionary extract_dictionary(const Mlp& mlp);

// Copy with unit-L2 columns; original norms recorded. Zero columns are
// rejected since they cannot be normalized.
Dictionary normalize_columns(const Dictionary& dict);

struct BoxLsResult {
  std::vector<double> coeffs;  // one per atom, each in [-1,1]
  double objective = 0;        // 0.5 * ||x - D a||^2 at the solution
  std::size_t iterations = 0;
};

// Least squares over the box [-1,1]^size by projected gradient descent with
// the fixed step 1/lambda_max(D^T D); the objective never increases. Stops
// when one step improves by less than tol.
BoxLsResult box_ls_approx(const Dictionary& dict, std::span<const double> x,
                          std::size_t max_iters = 2000, double tol = 1e-12);

struct ApproxResult {
  ImageBuffer image;
  double psnr = 0;  // against the image being approximated
};

// Tiles the image with the dictionary's patch edge, encodes every patch with
// box_ls_approx (bias removed before the fit, restored after), averages
// overlapping reconstructions.
ApproxResult approx_image(const Dictionary& dict, const ImageBuffer& img,
                          std::size_t stride, std::size_t max_iters = 2000,
                          double tol = 1e-12);

enum class OmpStop {
  residual,   // ||r||^2 fell to epsilon or below
  max_atoms,  // selection budget exhausted
  stalled,    // no atom correlates with the residual any more
};

const char* to_string(OmpStop stop);

struct OmpResult {
  std::vector<double> coeffs;         // dense, one per atom
  std::vector<std::size_t> support;   // atoms in selection order
  double residual_norm2 = 0;
  OmpStop stop_reason = OmpStop::residual;
};

// Orthogonal matching pursuit. Requires unit-norm atoms; each round picks the
// atom with the largest |correlation| (ties toward the lower index) and
// re-solves least squares on the whole support.
OmpResult omp(const Dictionary& dict, std::span<const double> x,
              std::size_t max_atoms, double epsilon);

// Patch-wise OMP denoising: each normalized noisy patch is approximated until
// the residual reaches n*(c*sigma/255)^2, the noise floor of n pixels with
// noise level sigma and slack factor c.
ImageBuffer omp_denoise_image(const Dictionary& dict, const ImageBuffer& noisy,
                              double sigma, std::size_t stride,
                              std::size_t max_atoms, double c = 1.05);

// u64 rows | u64 cols | rows*cols f64 atoms row-major | rows f64 bias,
// little-endian: the same layout one layer occupies inside a checkpoint.
void save_dictionary(const Dictionary& dict, const std::string& path);

}  // namespace mlpd
