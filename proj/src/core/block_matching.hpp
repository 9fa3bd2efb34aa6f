#pragma once

#include <cstddef>
#include <vector>

#include "core/image.hpp"

namespace mlpd {

struct BmSpec {
  std::size_t k = 0;            // patches fed to the net, reference included
  std::size_t patch_edge = 0;
  std::size_t window_edge = 0;  // search window centered on the reference
  std::size_t candidate_stride = 1;

  void validate() const;
};

struct PatchPos {
  std::size_t row = 0;  // top-left corner
  std::size_t col = 0;

  bool operator==(const PatchPos&) const = default;
};

// Positions of the reference patch followed by its k-1 nearest candidates
// (squared pixel distance, ties broken by row-major scan order, so the result
// is deterministic even on constant images). Candidates lie on the
// candidate_stride grid inside the window; the window must fit inside `img`
// (callers pad with mirror_pad first when near a border).
std::vector<PatchPos> find_neighbors(const ImageBuffer& img, PatchPos ref,
                                     const BmSpec& spec);

// Concatenation of the normalized patches in neighbor-rank order; length is
// positions.size() * patch_edge^2.
std::vector<double> assemble_bm_input(const ImageBuffer& img,
                                      const std::vector<PatchPos>& positions,
                                      std::size_t patch_edge);

}  // namespace mlpd
