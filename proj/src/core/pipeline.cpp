#include "core/pipeline.hpp"

#include <algorithm>

#include "core/block_matching.hpp"
#include "core/errors.hpp"

namespace mlpd {

void PatchGeometry::validate() const {
  if (output_edge == 0) throw invalid_argument("geometry: zero output edge");
  if (input_edge < output_edge)
    throw invalid_argument("geometry: input edge smaller than output edge");
  if ((input_edge - output_edge) % 2 != 0)
    throw invalid_argument("geometry: input/output edge difference must be even");
  if (stride == 0) throw invalid_argument("geometry: stride must be >= 1");
}

PatchGeometry geometry_for(const Architecture& arch, std::size_t stride) {
  PatchGeometry g{arch.input_edge, arch.output_edge, stride};
  g.validate();
  return g;
}

std::vector<double> extract_patch(const ImageBuffer& img, std::size_t row,
                                  std::size_t col, std::size_t edge) {
  if (row + edge > img.height || col + edge > img.width)
    throw invalid_argument("extract_patch: patch exceeds image");
  std::vector<double> out;
  out.reserve(edge * edge);
  for (std::size_t r = 0; r < edge; ++r) {
    const double* p = img.data.data() + (row + r) * img.width + col;
    out.insert(out.end(), p, p + edge);
  }
  return out;
}

std::vector<double> extract_patch_normalized(const ImageBuffer& img,
                                             std::size_t row, std::size_t col,
                                             std::size_t edge) {
  std::vector<double> out = extract_patch(img, row, col, edge);
  for (auto& v : out) v = normalize_pixel(v);
  return out;
}

PairSampler::PairSampler(const ImageBuffer& clean, const ImageBuffer& noisy,
                         const PatchGeometry& geometry, Rng& rng)
    : clean_(clean), noisy_(noisy), geometry_(geometry), rng_(rng) {
  geometry_.validate();
  if (clean.width != noisy.width || clean.height != noisy.height)
    throw invalid_argument("pair sampler: clean/noisy sizes differ");
  if (clean.width < geometry.input_edge || clean.height < geometry.input_edge)
    throw invalid_argument("pair sampler: image smaller than input patch");
}

PatchPair PairSampler::next() {
  std::size_t in = geometry_.input_edge, out = geometry_.output_edge;
  std::size_t row = rng_.uniform_below(clean_.height - in + 1);
  std::size_t col = rng_.uniform_below(clean_.width - in + 1);
  std::size_t off = (in - out) / 2;
  return PatchPair{extract_patch_normalized(noisy_, row, col, in),
                   extract_patch_normalized(clean_, row + off, col + off, out)};
}

ImageBuffer denoise_image(const Mlp& mlp, const ImageBuffer& noisy,
                          const PatchGeometry& geometry,
                          std::size_t bm_candidate_stride) {
  geometry.validate();
  if (geometry.input_edge != mlp.arch.input_edge ||
      geometry.output_edge != mlp.arch.output_edge)
    throw invalid_argument("denoise: geometry does not match net architecture");
  if (geometry.stride > geometry.output_edge)
    throw invalid_argument(
        "denoise: stride larger than output edge would leave pixels "
        "unpredicted");
  if (noisy.width == 0 || noisy.height == 0)
    throw invalid_argument("denoise: empty image");

  std::size_t in = geometry.input_edge, out = geometry.output_edge;
  std::size_t off = (in - out) / 2;
  // Enough padding that the outermost pixel is covered by a full output
  // patch in every direction.
  std::size_t pad = off + out - 1;
  ImageBuffer padded = mirror_pad(noisy, pad);

  ImageBuffer sum(padded.width, padded.height);
  std::vector<double> count(padded.data.size(), 0.0);

  // Positions along one axis: the stride grid plus the final position, so
  // coverage is complete for any stride <= output_edge.
  auto positions = [&](std::size_t padded_dim) {
    std::vector<std::size_t> pos;
    std::size_t last = padded_dim - in;
    for (std::size_t p = 0; p < last; p += geometry.stride) pos.push_back(p);
    pos.push_back(last);
    return pos;
  };
  std::vector<std::size_t> row_pos = positions(padded.height);
  std::vector<std::size_t> col_pos = positions(padded.width);

  const bool bm = mlp.arch.bm.has_value();
  BmSpec bm_spec;
  std::size_t bm_ref_off = 0;
  if (bm) {
    bm_spec = BmSpec{mlp.arch.bm->k, mlp.arch.bm->patch_edge,
                     mlp.arch.bm->window_edge, bm_candidate_stride};
    bm_ref_off = (mlp.arch.bm->window_edge - mlp.arch.bm->patch_edge) / 2;
  }

  std::vector<double> input;
  for (std::size_t rp : row_pos) {
    for (std::size_t cp : col_pos) {
      if (bm) {
        PatchPos ref{rp + bm_ref_off, cp + bm_ref_off};
        auto neighbors = find_neighbors(padded, ref, bm_spec);
        input = assemble_bm_input(padded, neighbors, bm_spec.patch_edge);
      } else {
        input = extract_patch_normalized(padded, rp, cp, in);
      }
      std::vector<double> pred = forward(mlp, input);
      for (std::size_t r = 0; r < out; ++r) {
        std::size_t base = (rp + off + r) * padded.width + cp + off;
        for (std::size_t c = 0; c < out; ++c) {
          sum.data[base + c] += denormalize_pixel(pred[r * out + c]);
          count[base + c] += 1.0;
        }
      }
    }
  }

  ImageBuffer result(noisy.width, noisy.height);
  for (std::size_t r = 0; r < noisy.height; ++r) {
    for (std::size_t c = 0; c < noisy.width; ++c) {
      std::size_t i = (r + pad) * padded.width + c + pad;
      result.at(r, c) = sum.data[i] / count[i];
    }
  }
  return result;
}

double mean_test_psnr(const Mlp& mlp, const std::vector<ImageBuffer>& clean,
                      const std::vector<ImageBuffer>& noisy,
                      std::size_t stride) {
  if (clean.empty() || clean.size() != noisy.size())
    throw invalid_argument("mean_test_psnr: need matching clean/noisy sets");
  PatchGeometry g = geometry_for(mlp.arch, stride);
  double acc = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i)
    acc += psnr(clean[i], denoise_image(mlp, noisy[i], g));
  return acc / static_cast<double>(clean.size());
}

}  // namespace mlpd
