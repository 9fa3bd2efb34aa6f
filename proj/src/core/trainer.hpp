#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "core/architecture.hpp"
#include "core/mlp.hpp"
#include "core/noise.hpp"
#include "core/pipeline.hpp"

namespace mlpd {

struct TrainConfig {
  std::string corpus_dir;
  std::string test_dir;
  Architecture arch;
  NoiseSpec noise;
  double lr_initial = 0.1;
  double lr_finetune = 0.001;
  // Updates performed at the initial rate before dropping to the fine-tune
  // rate; defaults to 80% of max_updates (see finalize()).
  std::uint64_t switch_update = 0;
  bool switch_update_set = false;
  std::size_t batch = 1;
  std::uint64_t max_updates = 0;
  std::uint64_t report_every = 10000;
  // Rolling sample window for the reported training PSNR; the effective
  // window is min(train_window, samples seen).
  std::size_t train_window = 2'000'000;
  std::size_t test_stride = 3;
  std::uint64_t seed = 0;

  // Fills derived defaults; call after the last override.
  void finalize();
  void validate() const;
};

// key = value lines, '#' comments, blank lines ignored. Unknown keys are
// errors. See apply_config_kv for the key list.
TrainConfig load_train_config(const std::filesystem::path& path);
void apply_config_kv(TrainConfig* cfg, const std::string& key,
                     const std::string& value);

struct ProgressRecord {
  std::uint64_t update = 0;
  double train_psnr = 0;
  double test_psnr = 0;
  double lr = 0;
  double wall_seconds = 0;
};

// Endless training-pair source over a corpus: uniform image, uniform
// position, fresh noise on the input patch for every sample.
class SampleStream {
 public:
  SampleStream(const std::vector<ImageBuffer>* corpus,
               const Architecture& arch, const NoiseSpec& noise, Rng rng);

  PatchPair next();

 private:
  const std::vector<ImageBuffer>* corpus_;
  Architecture arch_;
  NoiseSpec noise_;
  Rng rng_;
};

struct TrainResult {
  Mlp mlp;
  std::vector<ProgressRecord> log;
};

using ProgressFn = std::function<void(const ProgressRecord&)>;

// Runs SGD per the config. When out_dir is non-empty, writes progress.csv
// (header comments + "update,train_psnr,test_psnr,lr,wall_seconds"),
// checkpoint.mlpd at every report and final.mlpd at the end. Aborts with
// numeric_error on non-finite loss/gradients; the last written checkpoint is
// left in place. Single-threaded on purpose: identical config + seed must
// reproduce checkpoints and log byte-for-byte (wall_seconds excepted).
TrainResult train(const TrainConfig& config,
                  const std::filesystem::path& out_dir,
                  const ProgressFn& on_report = {});

// Indices of log entries whose test PSNR sits more than drop_db below the
// best test PSNR seen before them. Observation only; training never stops on
// it.
std::vector<std::size_t> degradation_alarm(
    const std::vector<ProgressRecord>& log, double drop_db = 1.0);

// All images in a directory (.pgm/.png/.ppm), sorted by filename so corpus
// order is reproducible.
std::vector<ImageBuffer> load_image_dir(const std::filesystem::path& dir);

}  // namespace mlpd
