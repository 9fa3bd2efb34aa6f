#include "core/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "core/block_matching.hpp"
#include "core/errors.hpp"

namespace mlpd {

void TrainConfig::finalize() {
  if (!switch_update_set) {
    switch_update = max_updates - max_updates / 5;  // 80%, exact for any n
    switch_update_set = true;
  }
}

void TrainConfig::validate() const {
  arch.validate();
  noise.validate();
  if (corpus_dir.empty()) throw invalid_argument("config: corpus_dir not set");
  if (test_dir.empty()) throw invalid_argument("config: test_dir not set");
  if (batch == 0) throw invalid_argument("config: batch must be >= 1");
  if (report_every == 0)
    throw invalid_argument("config: report_every must be >= 1");
  if (train_window == 0)
    throw invalid_argument("config: train_window must be >= 1");
  if (test_stride == 0 || test_stride > arch.output_edge)
    throw invalid_argument(
        "config: test_stride must be in [1, output_edge]");
  if (lr_initial <= 0 || lr_finetune <= 0)
    throw invalid_argument("config: learning rates must be > 0");
}

void apply_config_kv(TrainConfig* cfg, const std::string& key,
                     const std::string& value) {
  auto to_u64 = [&](const std::string& v) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long parsed = 0;
    try {
      parsed = std::stoull(v, &used);
    } catch (const std::exception&) {
      throw invalid_argument("config: bad integer for '" + key + "': " + v);
    }
    if (used != v.size())
      throw invalid_argument("config: bad integer for '" + key + "': " + v);
    return parsed;
  };
  auto to_f64 = [&](const std::string& v) -> double {
    std::size_t used = 0;
    double parsed = 0;
    try {
      parsed = std::stod(v, &used);
    } catch (const std::exception&) {
      throw invalid_argument("config: bad number for '" + key + "': " + v);
    }
    if (used != v.size())
      throw invalid_argument("config: bad number for '" + key + "': " + v);
    return parsed;
  };

  if (key == "corpus_dir") cfg->corpus_dir = value;
  else if (key == "test_dir") cfg->test_dir = value;
  else if (key == "arch") cfg->arch = parse_architecture(value);
  else if (key == "noise") cfg->noise.kind = noise_kind_from_string(value);
  else if (key == "sigma") cfg->noise.sigma = to_f64(value);
  else if (key == "p") cfg->noise.p = to_f64(value);
  else if (key == "sigma_s") cfg->noise.sigma_s = to_f64(value);
  else if (key == "quality") cfg->noise.quality = static_cast<int>(to_u64(value));
  else if (key == "lr_initial") cfg->lr_initial = to_f64(value);
  else if (key == "lr_finetune") cfg->lr_finetune = to_f64(value);
  else if (key == "switch_update") {
    cfg->switch_update = to_u64(value);
    cfg->switch_update_set = true;
  } else if (key == "batch") cfg->batch = to_u64(value);
  else if (key == "max_updates") cfg->max_updates = to_u64(value);
  else if (key == "report_every") cfg->report_every = to_u64(value);
  else if (key == "train_window") cfg->train_window = to_u64(value);
  else if (key == "test_stride") cfg->test_stride = to_u64(value);
  else if (key == "seed") cfg->seed = to_u64(value);
  else throw invalid_argument("config: unknown key '" + key + "'");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  TrainConfig cfg;
  bool have_arch = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw invalid_argument("config " + path.string() + ":" +
                             std::to_string(lineno) +
                             ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty())
      throw invalid_argument("config " + path.string() + ":" +
                             std::to_string(lineno) + ": empty key or value");
    apply_config_kv(&cfg, key, value);
    if (key == "arch") have_arch = true;
  }
  if (!have_arch)
    throw invalid_argument("config " + path.string() + ": arch not set");
  return cfg;
}

SampleStream::SampleStream(const std::vector<ImageBuffer>* corpus,
                           const Architecture& arch, const NoiseSpec& noise,
                           Rng rng)
    : corpus_(corpus), arch_(arch), noise_(noise), rng_(rng) {
  arch_.validate();
  noise_.validate();
  if (!corpus_ || corpus_->empty())
    throw invalid_argument("sample stream: empty corpus");
  for (const auto& img : *corpus_) {
    if (img.width < arch.input_edge || img.height < arch.input_edge)
      throw invalid_argument(
          "sample stream: corpus image smaller than the input patch");
  }
}

PatchPair SampleStream::next() {
  const std::size_t in = arch_.input_edge;       // window edge for bm nets
  const std::size_t out = arch_.output_edge;
  const ImageBuffer& img = (*corpus_)[rng_.uniform_below(corpus_->size())];
  std::size_t row = rng_.uniform_below(img.height - in + 1);
  std::size_t col = rng_.uniform_below(img.width - in + 1);

  // Fresh noise on just the sampled footprint.
  ImageBuffer clean_patch(in, in);
  for (std::size_t r = 0; r < in; ++r)
    for (std::size_t c = 0; c < in; ++c)
      clean_patch.at(r, c) = img.at(row + r, col + c);
  ImageBuffer noisy_patch = apply_noise(clean_patch, noise_, rng_);

  PatchPair pair;
  if (arch_.bm) {
    std::size_t margin = (arch_.bm->window_edge - arch_.bm->patch_edge) / 2;
    auto neighbors = find_neighbors(noisy_patch, PatchPos{margin, margin},
                                    BmSpec{arch_.bm->k, arch_.bm->patch_edge,
                                           arch_.bm->window_edge, 1});
    pair.input = assemble_bm_input(noisy_patch, neighbors, arch_.bm->patch_edge);
  } else {
    pair.input.resize(in * in);
    for (std::size_t i = 0; i < pair.input.size(); ++i)
      pair.input[i] = normalize_pixel(noisy_patch.data[i]);
  }
  std::size_t off = (in - out) / 2;
  pair.target.reserve(out * out);
  for (std::size_t r = 0; r < out; ++r)
    for (std::size_t c = 0; c < out; ++c)
      pair.target.push_back(
          normalize_pixel(clean_patch.at(off + r, off + c)));
  return pair;
}

std::vector<ImageBuffer> load_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw io_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == ".pgm" || ext == ".png" || ext == ".ppm")
      paths.push_back(entry.path());
  }
  if (paths.empty())
    throw io_error("no images (.pgm/.png/.ppm) in " + dir.string());
  std::sort(paths.begin(), paths.end());
  std::vector<ImageBuffer> images;
  images.reserve(paths.size());
  for (const auto& p : paths) images.push_back(load_image(p));
  return images;
}

namespace {

// Rolling mean of per-sample pixel-domain MSE.
class LossWindow {
 public:
  explicit LossWindow(std::size_t capacity)
      : buf_(capacity, 0.0) {}

  void push(double v) {
    if (size_ < buf_.size()) {
      sum_ += v;
      buf_[size_++] = v;
    } else {
      sum_ += v - buf_[head_];
      buf_[head_] = v;
      head_ = (head_ + 1) % buf_.size();
    }
    // Refresh the running sum now and then; plain add/subtract drifts.
    if (++pushes_ % 1000000 == 0) recompute();
  }

  double mean() const { return size_ ? sum_ / static_cast<double>(size_) : 0; }

 private:
  void recompute() {
    sum_ = 0;
    for (std::size_t i = 0; i < size_; ++i) sum_ += buf_[i];
  }
  std::vector<double> buf_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  std::uint64_t pushes_ = 0;
  double sum_ = 0;
};

double mse_to_psnr(double mse) {
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

void append_csv_record(std::FILE* f, const ProgressRecord& rec) {
  char line[160];
  std::snprintf(line, sizeof line, "%llu,%.6f,%.6f,%g,%.3f\n",
                static_cast<unsigned long long>(rec.update), rec.train_psnr,
                rec.test_psnr, rec.lr, rec.wall_seconds);
  if (std::fputs(line, f) == EOF) throw io_error("progress log: write failed");
}

}  // namespace

TrainResult train(const TrainConfig& config_in,
                  const std::filesystem::path& out_dir,
                  const ProgressFn& on_report) {
  TrainConfig config = config_in;
  config.finalize();
  config.validate();

  std::vector<ImageBuffer> corpus = load_image_dir(config.corpus_dir);
  std::vector<ImageBuffer> test_clean = load_image_dir(config.test_dir);

  Rng root(config.seed);
  Rng init_rng = root.split(0);
  Rng sample_rng = root.split(1);
  Rng test_rng = root.split(2);

  TrainResult result;
  result.mlp = init_mlp(config.arch, init_rng);

  // Test images are corrupted once so successive reports measure the net,
  // not fresh noise draws.
  std::vector<ImageBuffer> test_noisy;
  test_noisy.reserve(test_clean.size());
  for (const auto& img : test_clean)
    test_noisy.push_back(apply_noise(img, config.noise, test_rng));

  SampleStream stream(&corpus, config.arch, config.noise, sample_rng);

  std::FILE* csv = nullptr;
  std::filesystem::path csv_path, ckpt_path, final_path;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv_path = out_dir / "progress.csv";
    ckpt_path = out_dir / "checkpoint.mlpd";
    final_path = out_dir / "final.mlpd";
    csv = std::fopen(csv_path.string().c_str(), "wb");
    if (!csv) throw io_error("cannot open " + csv_path.string());
    std::fprintf(csv, "# arch = %s\n", config.arch.to_string().c_str());
    std::fprintf(csv, "# noise = %s\n", noise_kind_name(config.noise.kind));
    std::fprintf(csv, "# seed = %llu\n",
                 static_cast<unsigned long long>(config.seed));
    std::fprintf(csv, "# test_stride = %zu\n", config.test_stride);
    std::fprintf(csv, "# rng = %s\n", Rng::algorithm_name());
    std::fprintf(csv, "update,train_psnr,test_psnr,lr,wall_seconds\n");
  }
  auto close_csv = [&] {
    if (csv) {
      std::fclose(csv);
      csv = nullptr;
    }
  };

  auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };

  LossWindow window(static_cast<std::size_t>(
      std::min<std::uint64_t>(config.train_window,
                              std::max<std::uint64_t>(
                                  1, config.max_updates * config.batch))));

  Gradients grads, batch_acc;
  ForwardTrace trace;

  try {
    for (std::uint64_t u = 0; u < config.max_updates; ++u) {
      double lr = u < config.switch_update ? config.lr_initial
                                           : config.lr_finetune;
      for (std::size_t b = 0; b < config.batch; ++b) {
        PatchPair pair = stream.next();
        forward(result.mlp, pair.input, &trace);
        double loss = backward(result.mlp, trace, pair.target,
                               config.batch == 1 ? &grads : &batch_acc);
        if (!std::isfinite(loss))
          throw numeric_error("training diverged: non-finite loss at update " +
                              std::to_string(u));
        window.push(loss * 255.0 * 255.0);
        if (config.batch > 1) {
          if (b == 0) {
            grads = batch_acc;
          } else {
            grads.add(batch_acc);
          }
        }
      }
      if (config.batch > 1)
        grads.scale(1.0 / static_cast<double>(config.batch));
      sgd_step(&result.mlp, grads, lr);

      std::uint64_t done = u + 1;
      if (done % config.report_every == 0 || done == config.max_updates) {
        ProgressRecord rec;
        rec.update = done;
        rec.train_psnr = mse_to_psnr(window.mean());
        rec.test_psnr = mean_test_psnr(result.mlp, test_clean, test_noisy,
                                       config.test_stride);
        rec.lr = lr;
        rec.wall_seconds = elapsed();
        result.log.push_back(rec);
        if (csv) {
          append_csv_record(csv, rec);
          std::fflush(csv);
        }
        if (!ckpt_path.empty()) save_mlp(result.mlp, ckpt_path);
        if (on_report) on_report(rec);
      }
    }
  } catch (...) {
    close_csv();
    throw;
  }

  close_csv();
  if (!final_path.empty()) save_mlp(result.mlp, final_path);
  return result;
}

std::vector<std::size_t> degradation_alarm(
    const std::vector<ProgressRecord>& log, double drop_db) {
  if (drop_db < 0) throw invalid_argument("degradation_alarm: drop_db < 0");
  std::vector<std::size_t> flagged;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (i > 0 && log[i].test_psnr < best - drop_db) flagged.push_back(i);
    best = std::max(best, log[i].test_psnr);
  }
  return flagged;
}

}  // namespace mlpd
