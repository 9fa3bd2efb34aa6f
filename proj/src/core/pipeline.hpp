#pragma once

#include <cstddef>
#include <vector>

#include "core/image.hpp"
#include "core/mlp.hpp"
#include "core/rng.hpp"

namespace mlpd {

// Sliding-window shape shared by training, evaluation and the dictionary ops.
// The output patch sits centered inside the input patch, so the two edges
// must differ by an even amount.
struct PatchGeometry {
  std::size_t input_edge = 0;
  std::size_t output_edge = 0;
  std::size_t stride = 1;

  void validate() const;
};

// Geometry implied by a net's architecture (block-matching nets slide their
// search window).
PatchGeometry geometry_for(const Architecture& arch, std::size_t stride = 1);

// Raw pixel values of the edge x edge patch whose top-left corner is (row,
// col); row-major.
std::vector<double> extract_patch(const ImageBuffer& img, std::size_t row,
                                  std::size_t col, std::size_t edge);
std::vector<double> extract_patch_normalized(const ImageBuffer& img,
                                             std::size_t row, std::size_t col,
                                             std::size_t edge);

struct PatchPair {
  std::vector<double> input;   // normalized, input_edge^2
  std::vector<double> target;  // normalized, output_edge^2, centered
};

// Stream of training pairs drawn from one clean/noisy image pair: the input
// patch position is uniform over all valid positions, the target is the clean
// center crop. Both images must have the same size.
class PairSampler {
 public:
  PairSampler(const ImageBuffer& clean, const ImageBuffer& noisy,
              const PatchGeometry& geometry, Rng& rng);

  PatchPair next();

 private:
  const ImageBuffer& clean_;
  const ImageBuffer& noisy_;
  PatchGeometry geometry_;
  Rng& rng_;
};

// Full-image denoising: mirror-pads so every pixel is predicted at least
// once, slides the net with geometry.stride (the final row/column of
// positions is always included), averages overlapping predictions.
// geometry.stride must not exceed output_edge or pixels would be skipped.
// For block-matching nets bm_candidate_stride sets the in-window search grid.
ImageBuffer denoise_image(const Mlp& mlp, const ImageBuffer& noisy,
                          const PatchGeometry& geometry,
                          std::size_t bm_candidate_stride = 1);

// Mean PSNR of denoise_image over pre-corrupted test images.
double mean_test_psnr(const Mlp& mlp, const std::vector<ImageBuffer>& clean,
                      const std::vector<ImageBuffer>& noisy,
                      std::size_t stride);

}  // namespace mlpd
