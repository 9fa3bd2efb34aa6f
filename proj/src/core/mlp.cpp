#include "core/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "core/errors.hpp"

namespace mlpd {

void Gradients::scale(double f) {
  for (auto& m : dw)
    for (auto& v : m.data) v *= f;
  for (auto& b : db)
    for (auto& v : b) v *= f;
}

void Gradients::add(const Gradients& other) {
  if (dw.size() != other.dw.size())
    throw invalid_argument("gradients: layer count mismatch");
  for (std::size_t l = 0; l < dw.size(); ++l) {
    if (dw[l].data.size() != other.dw[l].data.size() ||
        db[l].size() != other.db[l].size())
      throw invalid_argument("gradients: shape mismatch");
    for (std::size_t i = 0; i < dw[l].data.size(); ++i)
      dw[l].data[i] += other.dw[l].data[i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += other.db[l][i];
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.rows * w.cols + w.rows;
  return n;
}

double tanh_strict(double x) {
  static const double kLim = std::nextafter(1.0, 0.0);
  double t = std::tanh(x);
  if (t >= 1.0) return kLim;
  if (t <= -1.0) return -kLim;
  return t;
}

Mlp init_mlp(const Architecture& arch, Rng& rng) {
  arch.validate();
  Mlp mlp;
  mlp.arch = arch;
  mlp.rng_algorithm = Rng::algorithm_name();
  std::vector<std::size_t> dims;
  dims.push_back(arch.input_dim());
  for (std::size_t h : arch.hidden_sizes) dims.push_back(h);
  dims.push_back(arch.output_dim());
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (auto& v : w.data) v = rng.uniform(-a, a);
    mlp.weights.push_back(std::move(w));
    mlp.biases.emplace_back(fan_out, 0.0);
  }
  return mlp;
}

std::vector<double> forward(const Mlp& mlp, std::span<const double> x,
                            ForwardTrace* trace) {
  if (x.size() != mlp.input_dim())
    throw invalid_argument("forward: input has " + std::to_string(x.size()) +
                           " values, net expects " +
                           std::to_string(mlp.input_dim()));
  if (trace) {
    trace->input.assign(x.begin(), x.end());
    trace->pre.assign(mlp.layer_count(), {});
    trace->post.assign(mlp.layer_count(), {});
  }
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    std::vector<double> pre = mat_vec_mul(mlp.weights[l], h);
    const auto& b = mlp.biases[l];
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += b[i];
    bool last = l + 1 == mlp.layer_count();
    if (trace) trace->pre[l] = pre;
    if (!last) {
      for (auto& v : pre) v = tanh_strict(v);
    }
    if (trace) trace->post[l] = pre;
    h = std::move(pre);
  }
  return h;
}

double backward(const Mlp& mlp, const ForwardTrace& trace,
                std::span<const double> target, Gradients* grads) {
  std::size_t layers = mlp.layer_count();
  if (trace.post.size() != layers || trace.pre.size() != layers)
    throw invalid_argument("backward: trace does not match net");
  if (target.size() != mlp.output_dim())
    throw invalid_argument("backward: target size mismatch");

  grads->dw.resize(layers);
  grads->db.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = mlp.weights[l];
    if (grads->dw[l].rows != w.rows || grads->dw[l].cols != w.cols)
      grads->dw[l] = Matrix(w.rows, w.cols);
    grads->db[l].assign(w.rows, 0.0);
  }

  const auto& y = trace.post.back();
  double d = static_cast<double>(y.size());
  double loss = 0.0;
  std::vector<double> delta(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double e = y[i] - target[i];
    loss += e * e;
    delta[i] = 2.0 * e / d;
  }
  loss /= d;

  for (std::size_t l = layers; l-- > 0;) {
    const std::vector<double>& below =
        l == 0 ? trace.input : trace.post[l - 1];
    Matrix& dw = grads->dw[l];
    for (std::size_t r = 0; r < dw.rows; ++r) {
      double dr = delta[r];
      double* out = dw.data.data() + r * dw.cols;
      for (std::size_t c = 0; c < dw.cols; ++c) out[c] = dr * below[c];
    }
    grads->db[l] = delta;
    if (l > 0) {
      std::vector<double> next = mat_tvec_mul(mlp.weights[l], delta);
      const auto& post = trace.post[l - 1];
      for (std::size_t i = 0; i < next.size(); ++i)
        next[i] *= 1.0 - post[i] * post[i];  // tanh' from the activation
      delta = std::move(next);
    }
  }
  return loss;
}

void sgd_step(Mlp* mlp, const Gradients& grads, double lr) {
  if (grads.dw.size() != mlp->layer_count())
    throw invalid_argument("sgd_step: gradient layer count mismatch");
  for (std::size_t l = 0; l < mlp->layer_count(); ++l) {
    Matrix& w = mlp->weights[l];
    const Matrix& dw = grads.dw[l];
    auto& b = mlp->biases[l];
    const auto& db = grads.db[l];
    if (dw.rows != w.rows || dw.cols != w.cols || db.size() != b.size())
      throw invalid_argument("sgd_step: gradient shape mismatch");
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      double g = dw.data[i];
      if (!std::isfinite(g))
        throw numeric_error("sgd_step: non-finite weight gradient");
      w.data[i] -= lr * g;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      double g = db[i];
      if (!std::isfinite(g))
        throw numeric_error("sgd_step: non-finite bias gradient");
      b[i] -= lr * g;
    }
  }
  mlp->update_count += 1;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr char kMagic[4] = {'M', 'L', 'P', 'D'};
constexpr unsigned char kVersion = 1;

void put_u64(std::FILE* f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  if (std::fwrite(b, 1, 8, f) != 8) throw io_error("checkpoint: short write");
}

void put_f64(std::FILE* f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(f, bits);
}

std::uint64_t get_u64(std::FILE* f) {
  unsigned char b[8];
  if (std::fread(b, 1, 8, f) != 8)
    throw io_error("checkpoint: unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::FILE* f) {
  std::uint64_t bits = get_u64(f);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_string(std::FILE* f, const std::string& s) {
  put_u64(f, s.size());
  if (std::fwrite(s.data(), 1, s.size(), f) != s.size())
    throw io_error("checkpoint: short write");
}

std::string get_string(std::FILE* f, std::size_t cap) {
  std::uint64_t n = get_u64(f);
  if (n > cap) throw io_error("checkpoint: unreasonable string length");
  std::string s(n, '\0');
  if (n && std::fread(s.data(), 1, n, f) != n)
    throw io_error("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

void save_mlp(const Mlp& mlp, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw io_error("cannot open " + path.string() + " for writing");
  if (std::fwrite(kMagic, 1, 4, f.get()) != 4)
    throw io_error("checkpoint: short write");
  if (std::fputc(kVersion, f.get()) == EOF)
    throw io_error("checkpoint: short write");
  put_string(f.get(), mlp.arch.to_string());
  put_u64(f.get(), mlp.layer_count());
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    const Matrix& w = mlp.weights[l];
    put_u64(f.get(), w.rows);
    put_u64(f.get(), w.cols);
    for (double v : w.data) put_f64(f.get(), v);
    for (double v : mlp.biases[l]) put_f64(f.get(), v);
  }
  put_u64(f.get(), mlp.update_count);
  put_string(f.get(), mlp.rng_algorithm);
  if (std::fflush(f.get()) != 0)
    throw io_error("checkpoint: flush failed for " + path.string());
}

Mlp load_mlp(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw io_error("cannot open " + path.string());
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4)
    throw io_error(path.string() + ": unexpected end of file");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw io_error(path.string() + ": bad magic (not a checkpoint)");
  int version = std::fgetc(f.get());
  if (version == EOF) throw io_error(path.string() + ": unexpected end of file");
  if (version != kVersion)
    throw io_error(path.string() + ": unsupported checkpoint version " +
                   std::to_string(version));

  Mlp mlp;
  std::string arch_str = get_string(f.get(), 1 << 20);
  mlp.arch = parse_architecture(arch_str);

  std::vector<std::size_t> dims;
  dims.push_back(mlp.arch.input_dim());
  for (std::size_t h : mlp.arch.hidden_sizes) dims.push_back(h);
  dims.push_back(mlp.arch.output_dim());

  std::uint64_t layers = get_u64(f.get());
  if (layers != dims.size() - 1)
    throw io_error(path.string() + ": layer count " + std::to_string(layers) +
                   " does not match architecture " + arch_str);
  for (std::uint64_t l = 0; l < layers; ++l) {
    std::uint64_t rows = get_u64(f.get());
    std::uint64_t cols = get_u64(f.get());
    if (rows != dims[l + 1] || cols != dims[l])
      throw io_error(path.string() + ": layer " + std::to_string(l) +
                     " shape " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " does not match architecture " +
                     arch_str);
    Matrix w(rows, cols);
    for (auto& v : w.data) v = get_f64(f.get());
    std::vector<double> b(rows);
    for (auto& v : b) v = get_f64(f.get());
    if (!w.all_finite())
      throw io_error(path.string() + ": layer " + std::to_string(l) +
                     " contains non-finite weights");
    for (double v : b)
      if (!std::isfinite(v))
        throw io_error(path.string() + ": layer " + std::to_string(l) +
                       " contains non-finite biases");
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(std::move(b));
  }
  mlp.update_count = get_u64(f.get());
  mlp.rng_algorithm = get_string(f.get(), 4096);
  if (std::fgetc(f.get()) != EOF)
    throw io_error(path.string() + ": trailing bytes after checkpoint");
  return mlp;
}

}  // namespace mlpd
