#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlpd {

// Optional block-matching front end: the net consumes `k` patches of
// `patch_edge`^2 pixels gathered from a `window_edge`^2 search window around
// the reference patch, concatenated in similarity-rank order.
struct BmShape {
  std::size_t k = 0;
  std::size_t patch_edge = 0;
  std::size_t window_edge = 0;

  bool operator==(const BmShape&) const = default;
};

// Net shape described by strings like "(39,4x2047,17)" (input edge, hidden
// groups, output edge), "(17,4x2047)" (equal input/output edge) or the
// block-matching form "(39,14x13,4x2047,13)" (window, k x patch, hidden,
// output). For block-matching nets input_edge holds the window edge.
struct Architecture {
  std::size_t input_edge = 0;
  std::size_t output_edge = 0;
  std::vector<std::size_t> hidden_sizes;
  std::optional<BmShape> bm;

  std::size_t input_dim() const {
    return bm ? bm->k * bm->patch_edge * bm->patch_edge
              : input_edge * input_edge;
  }
  std::size_t output_dim() const { return output_edge * output_edge; }

  // Canonical shorthand; parse(to_string()) reproduces the value exactly.
  std::string to_string() const;

  void validate() const;

  bool operator==(const Architecture&) const = default;
};

// Throws parse_error (with byte offset) on malformed input, and
// invalid_argument when the parsed shape violates the geometry rules
// (odd input/output edge difference, zero sizes, window smaller than patch).
Architecture parse_architecture(std::string_view s);

}  // namespace mlpd
