#include "core/architecture.hpp"

#include "core/errors.hpp"

namespace mlpd {

namespace {

// One comma-separated item: N or KxN (at `offset` within the original text).
struct Item {
  std::size_t first = 0;   // N, or K for KxN
  std::size_t second = 0;  // N for KxN
  bool pair = false;
  std::size_t offset = 0;
};

struct Lexer {
  std::string_view s;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw parse_error("architecture '" + std::string(s) + "': " + what, pos);
  }
  bool at_end() const { return pos >= s.size(); }
  char peek() const { return at_end() ? '\0' : s[pos]; }
  void skip_ws() {
    while (!at_end() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  void expect(char ch) {
    skip_ws();
    if (peek() != ch) fail(std::string("expected '") + ch + "'");
    ++pos;
  }
  // ASCII 'x'/'X'; the UTF-8 multiplication sign is accepted as an alias.
  bool eat_times() {
    skip_ws();
    if (peek() == 'x' || peek() == 'X') {
      ++pos;
      return true;
    }
    if (pos + 1 < s.size() && static_cast<unsigned char>(s[pos]) == 0xc3 &&
        static_cast<unsigned char>(s[pos + 1]) == 0x97) {
      pos += 2;
      return true;
    }
    return false;
  }
  std::size_t number() {
    skip_ws();
    if (peek() < '0' || peek() > '9') fail("expected a number");
    std::size_t v = 0;
    while (!at_end() && s[pos] >= '0' && s[pos] <= '9') {
      v = v * 10 + static_cast<std::size_t>(s[pos] - '0');
      if (v > 1'000'000'000) fail("number too large");
      ++pos;
    }
    return v;
  }
  Item item() {
    skip_ws();
    Item it;
    it.offset = pos;
    it.first = number();
    if (eat_times()) {
      it.pair = true;
      it.second = number();
    }
    return it;
  }
};

// Edge spec in first/last position: N, or NxN as an alias (17x17 == 17).
std::size_t edge_of(const Item& it) {
  if (it.pair && it.first != it.second)
    throw parse_error("architecture: input/output patches must be square",
                      it.offset);
  return it.first;
}

void expand_hidden(const std::vector<Item>& items, std::size_t from,
                   std::size_t to, std::vector<std::size_t>* hidden) {
  for (std::size_t i = from; i < to; ++i) {
    if (items[i].pair) {
      for (std::size_t k = 0; k < items[i].first; ++k)
        hidden->push_back(items[i].second);
    } else {
      hidden->push_back(items[i].first);
    }
  }
}

bool valid_bm_geometry(std::size_t window, std::size_t patch,
                       std::size_t out) {
  return patch >= 1 && window >= patch && (window - patch) % 2 == 0 &&
         patch >= out && (patch - out) % 2 == 0;
}

}  // namespace

void Architecture::validate() const {
  if (input_edge == 0 || output_edge == 0)
    throw invalid_argument("architecture: zero patch edge");
  if (input_edge < output_edge)
    throw invalid_argument("architecture: input edge smaller than output edge");
  if ((input_edge - output_edge) % 2 != 0)
    throw invalid_argument(
        "architecture: input/output edge difference must be even so the "
        "output patch sits centered in the input patch");
  if (hidden_sizes.empty())
    throw invalid_argument("architecture: no hidden layers");
  for (std::size_t h : hidden_sizes)
    if (h == 0) throw invalid_argument("architecture: zero-width hidden layer");
  if (bm) {
    if (bm->k == 0) throw invalid_argument("architecture: k must be > 0");
    if (!valid_bm_geometry(bm->window_edge, bm->patch_edge, output_edge))
      throw invalid_argument(
          "architecture: block-matching window/patch/output edges must nest "
          "centered (even differences, window >= patch >= output)");
    if (bm->window_edge != input_edge)
      throw invalid_argument(
          "architecture: input edge must equal the search window edge");
  }
}

Architecture parse_architecture(std::string_view s) {
  Lexer lx{s};
  lx.expect('(');
  std::vector<Item> items;
  items.push_back(lx.item());
  lx.skip_ws();
  while (lx.peek() == ',') {
    ++lx.pos;
    items.push_back(lx.item());
  }
  lx.expect(')');
  lx.skip_ws();
  if (!lx.at_end()) lx.fail("trailing characters");

  if (items.size() < 2) lx.fail("need at least an edge and one hidden layer");

  Architecture arch;
  arch.input_edge = edge_of(items.front());

  if (items.size() == 2) {
    // (edge, hidden): equal input and output patch size.
    arch.output_edge = arch.input_edge;
    expand_hidden(items, 1, 2, &arch.hidden_sizes);
    arch.validate();
    return arch;
  }

  arch.output_edge = edge_of(items.back());

  // A KxN item right after the input edge is a block-matching spec (k patches
  // of edge N) when a consistent window/patch nesting results AND hidden
  // layers remain after it; otherwise it is an ordinary hidden group.
  std::size_t hidden_from = 1;
  const Item& second = items[1];
  if (second.pair && items.size() >= 4 &&
      valid_bm_geometry(arch.input_edge, second.second, arch.output_edge)) {
    arch.bm = BmShape{second.first, second.second, arch.input_edge};
    hidden_from = 2;
  }
  expand_hidden(items, hidden_from, items.size() - 1, &arch.hidden_sizes);
  arch.validate();
  return arch;
}

std::string Architecture::to_string() const {
  auto group = [](const std::vector<std::size_t>& sizes, bool no_leading_pair) {
    std::string out;
    std::size_t i = 0;
    bool first_group = true;
    while (i < sizes.size()) {
      std::size_t j = i;
      while (j < sizes.size() && sizes[j] == sizes[i]) ++j;
      std::size_t run = j - i;
      if (!out.empty()) out += ',';
      // A leading KxN group would re-parse as a block-matching spec; keep the
      // first run expanded in that (pathological) case.
      if (run >= 2 && !(first_group && no_leading_pair)) {
        out += std::to_string(run) + "x" + std::to_string(sizes[i]);
        i = j;
      } else {
        out += std::to_string(sizes[i]);
        ++i;
      }
      first_group = false;
    }
    return out;
  };

  if (bm) {
    return "(" + std::to_string(bm->window_edge) + "," +
           std::to_string(bm->k) + "x" + std::to_string(bm->patch_edge) + "," +
           group(hidden_sizes, false) + "," + std::to_string(output_edge) +
           ")";
  }
  if (input_edge == output_edge && hidden_sizes.size() >= 1) {
    // Two-item shorthand is only unambiguous with a single hidden group.
    bool uniform = true;
    for (std::size_t h : hidden_sizes) uniform &= h == hidden_sizes[0];
    if (uniform) {
      std::string mid = hidden_sizes.size() == 1
                            ? std::to_string(hidden_sizes[0])
                            : std::to_string(hidden_sizes.size()) + "x" +
                                  std::to_string(hidden_sizes[0]);
      return "(" + std::to_string(input_edge) + "," + mid + ")";
    }
  }
  bool leading_pair_would_be_bm =
      hidden_sizes.size() >= 2 && hidden_sizes[0] == hidden_sizes[1] &&
      valid_bm_geometry(input_edge, hidden_sizes[0], output_edge);
  return "(" + std::to_string(input_edge) + "," +
         group(hidden_sizes, leading_pair_would_be_bm) + "," +
         std::to_string(output_edge) + ")";
}

}  // namespace mlpd
