#include "core/block_matching.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace mlpd {

void BmSpec::validate() const {
  if (k == 0) throw invalid_argument("block matching: k must be > 0");
  if (patch_edge == 0)
    throw invalid_argument("block matching: patch edge must be > 0");
  if (window_edge < patch_edge)
    throw invalid_argument("block matching: window smaller than patch");
  if ((window_edge - patch_edge) % 2 != 0)
    throw invalid_argument(
        "block matching: window/patch edge difference must be even");
  if (candidate_stride == 0)
    throw invalid_argument("block matching: candidate stride must be > 0");
}

std::vector<PatchPos> find_neighbors(const ImageBuffer& img, PatchPos ref,
                                     const BmSpec& spec) {
  spec.validate();
  std::size_t margin = (spec.window_edge - spec.patch_edge) / 2;
  if (ref.row < margin || ref.col < margin)
    throw invalid_argument("block matching: window exceeds image (pad first)");
  std::size_t wtop = ref.row - margin, wleft = ref.col - margin;
  if (wtop + spec.window_edge > img.height ||
      wleft + spec.window_edge > img.width)
    throw invalid_argument("block matching: window exceeds image (pad first)");

  auto patch_dist = [&](PatchPos a, PatchPos b) {
    double acc = 0.0;
    for (std::size_t r = 0; r < spec.patch_edge; ++r) {
      const double* pa = img.data.data() + (a.row + r) * img.width + a.col;
      const double* pb = img.data.data() + (b.row + r) * img.width + b.col;
      for (std::size_t c = 0; c < spec.patch_edge; ++c) {
        double d = pa[c] - pb[c];
        acc += d * d;
      }
    }
    return acc;
  };

  struct Scored {
    double dist;
    PatchPos pos;
  };
  std::vector<Scored> cand;
  std::size_t span = spec.window_edge - spec.patch_edge;
  for (std::size_t dr = 0; dr <= span; dr += spec.candidate_stride) {
    for (std::size_t dc = 0; dc <= span; dc += spec.candidate_stride) {
      PatchPos p{wtop + dr, wleft + dc};
      if (p == ref) continue;
      cand.push_back({patch_dist(ref, p), p});
    }
  }
  if (cand.size() + 1 < spec.k)
    throw invalid_argument(
        "block matching: window holds fewer candidates than k");

  // stable_sort keeps equal distances in scan order.
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Scored& a, const Scored& b) {
                     return a.dist < b.dist;
                   });

  std::vector<PatchPos> out;
  out.reserve(spec.k);
  out.push_back(ref);
  for (std::size_t i = 0; i + 1 < spec.k; ++i) out.push_back(cand[i].pos);
  return out;
}

std::vector<double> assemble_bm_input(const ImageBuffer& img,
                                      const std::vector<PatchPos>& positions,
                                      std::size_t patch_edge) {
  std::vector<double> out;
  out.reserve(positions.size() * patch_edge * patch_edge);
  for (const auto& p : positions) {
    if (p.row + patch_edge > img.height || p.col + patch_edge > img.width)
      throw invalid_argument("block matching: patch exceeds image");
    for (std::size_t r = 0; r < patch_edge; ++r)
      for (std::size_t c = 0; c < patch_edge; ++c)
        out.push_back(normalize_pixel(img.at(p.row + r, p.col + c)));
  }
  return out;
}

}  // namespace mlpd
