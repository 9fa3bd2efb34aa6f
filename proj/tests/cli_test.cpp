// Drives the installed command-line binary as a subprocess and checks its
// exit codes, stdout contracts and written files against the core library.
#define DOCTEST_CONFIG_IMPLEMENT
#include <sys/wait.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/architecture.hpp"
#include "core/image.hpp"
#include "core/mlp.hpp"
#include "core/noise.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "support/synth.hpp"

namespace fs = std::filesystem;
using namespace mlpd;
using mlpd::test::synth_image;
using mlpd::test::write_synth_corpus;

namespace {

std::string g_cli;  // binary under test, from argv[1]

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const char* tag) {
  static int counter = 0;
  fs::path p = fs::temp_directory_path() /
               ("mlpd_cli_" + std::string(tag) + std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunResult run_cli(const std::vector<std::string>& args) {
  static int counter = 0;
  fs::path base = fs::temp_directory_path() / "mlpd_cli_io";
  fs::create_directories(base);
  fs::path out_file = base / ("out" + std::to_string(counter));
  fs::path err_file = base / ("err" + std::to_string(counter));
  ++counter;

  std::string cmd = "'" + g_cli + "'";
  for (const std::string& a : args) cmd += " '" + a + "'";
  cmd += " > '" + out_file.string() + "' 2> '" + err_file.string() + "'";

  int status = std::system(cmd.c_str());
  RunResult r;
  if (WIFEXITED(status))
    r.exit_code = WEXITSTATUS(status);
  else
    r.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  r.out = slurp_text(out_file);
  r.err = slurp_text(err_file);
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

// Value after "prefix," on the matching stdout line.
double csv_value_after(const std::string& text, const std::string& prefix) {
  for (const std::string& line : lines_of(text))
    if (line.rfind(prefix + ",", 0) == 0)
      return std::stod(line.substr(prefix.size() + 1));
  FAIL("no '" << prefix << ",' line in: " << text);
  return 0;
}

// Shared fixture: one random model, one clean image, built once.
struct Fixture {
  fs::path dir = fresh_dir("fix");
  fs::path model = dir / "model.mlpd";
  fs::path clean = dir / "clean.pgm";

  Fixture() {
    Rng rng(41);
    Mlp net = init_mlp(parse_architecture("(9,12,5)"), rng);
    save_mlp(net, model);
    save_image(synth_image(40, 32, 7), clean);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("cli: usage errors exit 1 and name the missing piece") {
  RunResult none = run_cli({});
  CHECK(none.exit_code == 1);
  CHECK(contains(none.err, "subcommand"));

  RunResult unknown = run_cli({"frobnicate"});
  CHECK(unknown.exit_code == 1);

  RunResult no_model = run_cli({"denoise", "--input", "x", "--output", "y"});
  CHECK(no_model.exit_code == 1);
  CHECK(contains(no_model.err, "--model"));

  RunResult no_out = run_cli({"train"});
  CHECK(no_out.exit_code == 1);
  CHECK(contains(no_out.err, "--out"));

  RunResult bare_analyze = run_cli({"analyze"});
  CHECK(bare_analyze.exit_code == 1);

  RunResult bad_set =
      run_cli({"train", "--out", fresh_dir("junk").string(), "--set", "sigma"});
  CHECK(bad_set.exit_code == 1);
  CHECK(contains(bad_set.err, "key=value"));

  RunResult help = run_cli({"--help"});
  CHECK(help.exit_code == 0);
  CHECK(contains(help.out, "denoise"));
}

TEST_CASE("cli: io failures exit 2") {
  Fixture& f = fixture();
  RunResult missing_model = run_cli({"denoise", "--model", "/absent.mlpd",
                                     "--input", f.clean.string(), "--output",
                                     (f.dir / "o.pgm").string()});
  CHECK(missing_model.exit_code == 2);
  CHECK(contains(missing_model.err, "error:"));

  RunResult missing_info = run_cli({"info", "/absent.mlpd"});
  CHECK(missing_info.exit_code == 2);

  fs::path empty = fresh_dir("empty");
  RunResult no_images = run_cli({"evaluate", "--model", f.model.string(),
                                 "--clean-dir", empty.string()});
  CHECK(no_images.exit_code == 2);
  CHECK(contains(no_images.err, "no images"));

  RunResult no_log =
      run_cli({"analyze", "alarm", "--progress", "/absent.csv"});
  CHECK(no_log.exit_code == 2);
}

TEST_CASE("cli: library argument errors exit 1") {
  Fixture& f = fixture();
  // Stride beyond the output patch edge (5 for this model).
  RunResult wide = run_cli({"denoise", "--model", f.model.string(), "--input",
                            f.clean.string(), "--output",
                            (f.dir / "o.pgm").string(), "--stride", "6"});
  CHECK(wide.exit_code == 1);
  CHECK(contains(wide.err, "error:"));

  RunResult bad_noise =
      run_cli({"noise", "--input", f.clean.string(), "--output",
               (f.dir / "n.pgm").string(), "--noise", "sparkle"});
  CHECK(bad_noise.exit_code == 1);
}

TEST_CASE("cli: info lists the checkpoint layout") {
  Fixture& f = fixture();
  RunResult r = run_cli({"info", f.model.string()});
  REQUIRE(r.exit_code == 0);
  CHECK(contains(r.out, "arch (9,12,5)"));
  CHECK(contains(r.out, "layers 2"));
  CHECK(contains(r.out, "layer 0: 12 x 81"));
  CHECK(contains(r.out, "layer 1: 25 x 12"));
  CHECK(contains(r.out, "parameters 1309"));
  CHECK(contains(r.out, "updates 0"));
  CHECK(contains(r.out, "rng splitmix64"));
}

TEST_CASE("cli: noise and denoise round trip against the core") {
  Fixture& f = fixture();
  fs::path noisy_path = f.dir / "noisy.pgm";
  RunResult noised =
      run_cli({"noise", "--input", f.clean.string(), "--output",
               noisy_path.string(), "--noise", "awg", "--sigma", "25",
               "--seed", "9"});
  REQUIRE(noised.exit_code == 0);

  // The CLI path must match the library call bit for bit (after the shared
  // save quantization).
  ImageBuffer clean_loaded = load_image(f.clean);
  NoiseSpec spec;
  spec.sigma = 25.0;
  Rng rng(9);
  ImageBuffer expect_noisy = apply_noise(clean_loaded, spec, rng);
  fs::path expect_path = f.dir / "noisy_expect.pgm";
  save_image(expect_noisy, expect_path);
  ImageBuffer got = load_image(noisy_path);
  ImageBuffer expect = load_image(expect_path);
  REQUIRE(got.width == expect.width);
  CHECK(got.data == expect.data);

  fs::path den_path = f.dir / "denoised.pgm";
  RunResult denoised = run_cli({"denoise", "--model", f.model.string(),
                                "--input", noisy_path.string(), "--output",
                                den_path.string(), "--stride", "2",
                                "--reference", f.clean.string()});
  REQUIRE(denoised.exit_code == 0);
  double noisy_psnr = csv_value_after(denoised.out, "noisy_psnr");
  double den_psnr = csv_value_after(denoised.out, "denoised_psnr");
  CHECK(noisy_psnr ==
        doctest::Approx(psnr(clean_loaded, got)).epsilon(1e-4));
  CHECK(std::isfinite(den_psnr));

  Mlp net = load_mlp(f.model);
  ImageBuffer core_out =
      denoise_image(net, got, geometry_for(net.arch, 2), 1);
  fs::path core_path = f.dir / "denoised_core.pgm";
  save_image(core_out, core_path);
  CHECK(load_image(den_path).data == load_image(core_path).data);
}

TEST_CASE("cli: training writes matching stdout, csv and checkpoints") {
  fs::path corpus = fresh_dir("train_c");
  fs::path testset = fresh_dir("train_t");
  write_synth_corpus(corpus, 4, 24, 24, 11);
  write_synth_corpus(testset, 2, 20, 20, 99);

  fs::path out1 = fresh_dir("train_o1");
  std::vector<std::string> base = {
      "train",       "--out",
      out1.string(), "--set",
      "corpus_dir=" + corpus.string(),
      "--set",       "test_dir=" + testset.string(),
      "--set",       "arch=(7,8,5)",
      "--set",       "noise=awg",
      "--set",       "sigma=25",
      "--set",       "max_updates=40",
      "--set",       "report_every=20",
      "--set",       "test_stride=5",
      "--set",       "seed=42"};
  RunResult r1 = run_cli(base);
  REQUIRE(r1.exit_code == 0);
  CHECK(contains(r1.err, "trained (7,8,5) (40 updates)"));
  REQUIRE(fs::exists(out1 / "progress.csv"));
  REQUIRE(fs::exists(out1 / "final.mlpd"));
  CHECK(fs::exists(out1 / "checkpoint.mlpd"));
  CHECK(load_mlp(out1 / "final.mlpd").update_count == 40);

  // stdout mirrors the csv exactly, minus the comment lines.
  std::vector<std::string> echoed = lines_of(r1.out);
  std::vector<std::string> logged;
  for (const std::string& line : lines_of(slurp_text(out1 / "progress.csv")))
    if (!line.empty() && line[0] != '#') logged.push_back(line);
  CHECK(echoed == logged);
  REQUIRE(echoed.size() == 3);  // header + two reports
  CHECK(echoed[0] == "update,train_psnr,test_psnr,lr,wall_seconds");
  CHECK(echoed[1].rfind("20,", 0) == 0);
  CHECK(echoed[2].rfind("40,", 0) == 0);

  // --quiet suppresses stdout; the run itself is reproducible except wall
  // time.
  fs::path out2 = fresh_dir("train_o2");
  std::vector<std::string> quiet = base;
  quiet[2] = out2.string();
  quiet.push_back("--quiet");
  RunResult r2 = run_cli(quiet);
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.out.empty());
  CHECK(slurp_text(out1 / "final.mlpd") == slurp_text(out2 / "final.mlpd"));
  auto mask_wall = [](const std::string& text) {
    std::vector<std::string> rows;
    for (const std::string& line : lines_of(text)) {
      if (!line.empty() && line[0] != '#' &&
          std::isdigit(static_cast<unsigned char>(line[0]))) {
        rows.push_back(line.substr(0, line.rfind(',')));
      } else if (line.rfind("# wall", 0) != 0) {
        rows.push_back(line);
      }
    }
    return rows;
  };
  CHECK(mask_wall(slurp_text(out1 / "progress.csv")) ==
        mask_wall(slurp_text(out2 / "progress.csv")));

  // A config file is an equivalent source for the same settings.
  fs::path cfg = fresh_dir("traincfg") / "run.cfg";
  {
    std::ofstream cf(cfg);
    cf << "# cli smoke\n";
    cf << "corpus_dir = " << corpus.string() << "\n";
    cf << "test_dir = " << testset.string() << "\n";
    cf << "arch = (7,8,5)\nnoise = awg\nsigma = 25\n";
    cf << "max_updates = 40\nreport_every = 20\ntest_stride = 5\nseed = 42\n";
  }
  fs::path out3 = fresh_dir("train_o3");
  RunResult r3 = run_cli({"train", "--config", cfg.string(), "--out",
                          out3.string(), "--set", "max_updates=20",
                          "--quiet"});
  REQUIRE(r3.exit_code == 0);
  CHECK(contains(r3.err, "(20 updates)"));
}

TEST_CASE("cli: alarm reads a progress log") {
  fs::path dir = fresh_dir("alarm");
  fs::path log = dir / "progress.csv";
  {
    std::ofstream f(log);
    f << "# run notes\n";
    f << "update,train_psnr,test_psnr,lr,wall_seconds\n";
    f << "10,20,30.0,0.1,1.0\n";
    f << "20,20,29.5,0.1,2.0\n";
    f << "30,20,28.9,0.1,3.0\n";
    f << "40,20,31.0,0.1,4.0\n";
    f << "50,20,29.9,0.1,5.0\n";
  }
  RunResult r = run_cli({"analyze", "alarm", "--progress", log.string(),
                         "--drop", "1.0"});
  REQUIRE(r.exit_code == 0);
  std::vector<std::string> rows = lines_of(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "report,update,test_psnr");
  CHECK(rows[1] == "2,30,28.900000");
  CHECK(rows[2] == "4,50,29.900000");

  fs::path calm = dir / "calm.csv";
  {
    std::ofstream f(calm);
    f << "update,train_psnr,test_psnr,lr,wall_seconds\n";
    f << "10,20,30.0,0.1,1.0\n20,20,30.5,0.1,2.0\n";
  }
  RunResult quiet_run =
      run_cli({"analyze", "alarm", "--progress", calm.string()});
  REQUIRE(quiet_run.exit_code == 0);
  CHECK(lines_of(quiet_run.out).size() == 1);
  CHECK(contains(quiet_run.err, "no degradation"));

  fs::path broken = dir / "broken.csv";
  {
    std::ofstream f(broken);
    f << "update,train_psnr,test_psnr,lr,wall_seconds\n10,20\n";
  }
  RunResult bad = run_cli({"analyze", "alarm", "--progress", broken.string()});
  CHECK(bad.exit_code == 1);
  CHECK(contains(bad.err, "malformed"));
}

TEST_CASE("cli: evaluate scores a clean directory") {
  Fixture& f = fixture();
  fs::path testset = fresh_dir("eval_t");
  write_synth_corpus(testset, 2, 20, 20, 5);
  fs::path saved = fresh_dir("eval_s");
  RunResult r = run_cli({"evaluate", "--model", f.model.string(),
                         "--clean-dir", testset.string(), "--noise", "awg",
                         "--sigma", "25", "--seed", "3", "--stride", "5",
                         "--save-dir", saved.string()});
  REQUIRE(r.exit_code == 0);
  std::vector<std::string> rows = lines_of(r.out);
  REQUIRE(rows.size() == 5);  // comment, header, 2 images, mean
  CHECK(contains(rows[0], "# model (9,12,5)"));
  CHECK(rows[1] == "image,noisy_psnr,denoised_psnr");
  CHECK(rows[2].rfind("img_000.pgm,", 0) == 0);
  CHECK(rows[3].rfind("img_001.pgm,", 0) == 0);
  CHECK(rows[4].rfind("mean,", 0) == 0);
  double mean_noisy = csv_value_after(r.out, "mean");
  CHECK(mean_noisy > 17.0);  // sigma 25 corruption lands near 20 dB
  CHECK(mean_noisy < 24.0);
  CHECK(fs::exists(saved / "img_000.png"));
  ImageBuffer denoised = load_image(saved / "img_001.png");
  CHECK(denoised.width == 20);
  CHECK(denoised.height == 20);
}

TEST_CASE("cli: unit statistics, covariance and spectrum reports") {
  Fixture& f = fixture();
  RunResult units = run_cli({"analyze", "units", "--model", f.model.string(),
                             "--pure-sigma", "25", "--layer", "0", "--samples",
                             "200", "--seed", "4", "--tau", "0.8"});
  REQUIRE(units.exit_code == 0);
  std::vector<std::string> rows = lines_of(units.out);
  REQUIRE(rows.size() == 15);  // 2 comments + header + 12 units
  CHECK(contains(rows[1], "binarity"));
  CHECK(rows[2] == "unit,mean,variance,entropy_bits");
  CHECK(rows[3].rfind("0,", 0) == 0);
  CHECK(rows[14].rfind("11,", 0) == 0);

  RunResult no_src = run_cli({"analyze", "units", "--model", f.model.string()});
  CHECK(no_src.exit_code == 1);
  CHECK(contains(no_src.err, "--images"));

  fs::path imgs = fresh_dir("acts_imgs");
  write_synth_corpus(imgs, 2, 16, 16, 21);
  RunResult corpus_units =
      run_cli({"analyze", "units", "--model", f.model.string(), "--images",
               imgs.string(), "--noise", "awg", "--sigma", "25", "--samples",
               "100"});
  CHECK(corpus_units.exit_code == 0);

  RunResult cov = run_cli({"analyze", "covariance", "--model",
                           f.model.string(), "--pure-sigma", "25", "--samples",
                           "300", "--m", "3"});
  REQUIRE(cov.exit_code == 0);
  std::vector<std::string> cov_rows = lines_of(cov.out);
  REQUIRE(cov_rows.size() == 5);  // comment + units + 3 matrix rows
  CHECK(cov_rows[1].rfind("units,", 0) == 0);
  // Identical doubles print identically: symmetry survives the formatting.
  auto cell = [&](std::size_t r, std::size_t c) {
    std::stringstream ss(cov_rows[2 + r]);
    std::string item;
    for (std::size_t skip = 0; skip <= c; ++skip) std::getline(ss, item, ',');
    return item;
  };
  CHECK(cell(0, 1) == cell(1, 0));
  CHECK(cell(2, 1) == cell(1, 2));

  RunResult spec = run_cli({"analyze", "spectrum", "--model", f.model.string(),
                            "--layer", "0"});
  REQUIRE(spec.exit_code == 0);
  std::vector<std::string> spec_rows = lines_of(spec.out);
  REQUIRE(spec_rows.size() == 13);  // header + min(12, 81)
  CHECK(spec_rows[0] == "index,singular_value");
  double prev = 1e300;
  for (std::size_t i = 1; i < spec_rows.size(); ++i) {
    double v = std::stod(spec_rows[i].substr(spec_rows[i].find(',') + 1));
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("cli: montage commands write the expected grids") {
  Fixture& f = fixture();
  fs::path dir = fresh_dir("montage");

  fs::path filt = dir / "filters.png";
  RunResult filters = run_cli({"analyze", "filters", "--model",
                               f.model.string(), "--out", filt.string()});
  REQUIRE(filters.exit_code == 0);
  CHECK(contains(filters.out, "12 detectors of 81 values"));
  ImageBuffer fm = load_image(filt);
  CHECK(fm.width == 41);   // 4 columns of 9px patches, 1px gutters
  CHECK(fm.height == 31);  // 3 rows

  fs::path gen = dir / "generators.png";
  RunResult generators =
      run_cli({"analyze", "filters", "--model", f.model.string(), "--which",
               "generators", "--out", gen.string()});
  REQUIRE(generators.exit_code == 0);
  CHECK(contains(generators.out, "12 generators of 25 values"));
  ImageBuffer gm = load_image(gen);
  CHECK(gm.width == 25);  // 4 columns of 5px patches
  CHECK(gm.height == 19);

  RunResult bad_which =
      run_cli({"analyze", "filters", "--model", f.model.string(), "--which",
               "nonsense", "--out", (dir / "x.png").string()});
  CHECK(bad_which.exit_code == 1);

  fs::path pat = dir / "patterns.png";
  RunResult patterns =
      run_cli({"analyze", "output-patterns", "--model", f.model.string(),
               "--units", "0,3,5", "--out", pat.string()});
  REQUIRE(patterns.exit_code == 0);
  CHECK(contains(patterns.out, "3 output patterns (layer 0)"));
  ImageBuffer pm = load_image(pat);
  CHECK(pm.width == 13);  // 2x2 grid of 5px patches
  CHECK(pm.height == 13);

  RunResult bad_units =
      run_cli({"analyze", "output-patterns", "--model", f.model.string(),
               "--units", "0,x", "--out", (dir / "y.png").string()});
  CHECK(bad_units.exit_code == 1);
  CHECK(contains(bad_units.err, "bad unit"));

  fs::path am = dir / "actmax.png";
  RunResult actmax = run_cli({"analyze", "actmax", "--model", f.model.string(),
                              "--layer", "0", "--unit", "1", "--steps", "30",
                              "--step-size", "0.3", "--seed", "5", "--out",
                              am.string()});
  REQUIRE(actmax.exit_code == 0);
  std::vector<std::string> traj = lines_of(actmax.out);
  REQUIRE(traj.size() == 32);  // header + steps+1
  CHECK(traj[0] == "step,pre_activation");
  double first = std::stod(traj[1].substr(traj[1].find(',') + 1));
  double last = std::stod(traj[31].substr(traj[31].find(',') + 1));
  CHECK(last > first);
  ImageBuffer amg = load_image(am);
  CHECK(amg.width == 9);  // single input-sized pattern, no pad
  CHECK(amg.height == 9);

  fs::path corpus = fresh_dir("patches_imgs");
  write_synth_corpus(corpus, 2, 18, 18, 77);
  fs::path mp = dir / "patches.png";
  RunResult patches = run_cli({"analyze", "patches", "--model",
                               f.model.string(), "--images", corpus.string(),
                               "--layer", "0", "--unit", "2", "--top", "4",
                               "--scan-stride", "3", "--out", mp.string()});
  REQUIRE(patches.exit_code == 0);
  std::vector<std::string> ranked = lines_of(patches.out);
  REQUIRE(ranked.size() == 5);
  CHECK(ranked[0] == "rank,image,row,col,pre_activation");
  CHECK(ranked[1].rfind("0,", 0) == 0);
  ImageBuffer mpm = load_image(mp);
  CHECK(mpm.width == 21);  // 2x2 grid of 9px patches
  CHECK(mpm.height == 21);
}

TEST_CASE("cli: detector importance over the full subset reports baseline") {
  Fixture& f = fixture();
  fs::path testset = fresh_dir("imp_t");
  write_synth_corpus(testset, 2, 16, 16, 3);
  RunResult r = run_cli({"analyze", "importance", "--model", f.model.string(),
                         "--clean-dir", testset.string(), "--noise", "awg",
                         "--sigma", "25", "--stride", "5", "--subset", "12",
                         "--iterations", "2", "--seed", "6"});
  REQUIRE(r.exit_code == 0);
  std::vector<std::string> rows = lines_of(r.out);
  REQUIRE(rows.size() == 14);  // comment + header + 12 detectors
  CHECK(contains(rows[0], "# baseline_psnr"));
  CHECK(rows[1] == "detector,kept,mean_psnr");
  // Keeping every detector is the baseline; printed at equal precision the
  // strings must agree too.
  std::string baseline = rows[0].substr(rows[0].find("baseline_psnr ") + 14);
  baseline = baseline.substr(0, baseline.find(' '));
  for (std::size_t d = 0; d < 12; ++d) {
    std::stringstream ss(rows[2 + d]);
    std::string det, kept, mean;
    std::getline(ss, det, ',');
    std::getline(ss, kept, ',');
    std::getline(ss, mean, ',');
    CHECK(det == std::to_string(d));
    CHECK(kept == "2");
    CHECK(mean == baseline);
  }
}

TEST_CASE("cli: saturation modes act on the denoise path") {
  Fixture& f = fixture();
  fs::path dir = fresh_dir("sat");
  fs::path noisy = dir / "noisy.pgm";
  {
    Rng rng(13);
    NoiseSpec spec;
    spec.sigma = 25.0;
    save_image(apply_noise(load_image(f.clean), spec, rng), noisy);
  }
  fs::path with_tanh = dir / "with_tanh.pgm";
  RunResult tanh_run = run_cli({"analyze", "saturation", "--model",
                                f.model.string(), "--input", noisy.string(),
                                "--output", with_tanh.string(), "--mode",
                                "with_tanh", "--stride", "2", "--reference",
                                f.clean.string()});
  REQUIRE(tanh_run.exit_code == 0);
  CHECK(contains(tanh_run.out, "mode,with_tanh"));
  CHECK(std::isfinite(csv_value_after(tanh_run.out, "psnr")));

  // with_tanh is the unmodified network: identical to plain denoise.
  fs::path plain = dir / "plain.pgm";
  RunResult plain_run = run_cli({"denoise", "--model", f.model.string(),
                                 "--input", noisy.string(), "--output",
                                 plain.string(), "--stride", "2"});
  REQUIRE(plain_run.exit_code == 0);
  CHECK(load_image(with_tanh).data == load_image(plain).data);

  fs::path hard = dir / "hard.pgm";
  RunResult hard_run = run_cli({"analyze", "saturation", "--model",
                                f.model.string(), "--input", noisy.string(),
                                "--output", hard.string(), "--mode",
                                "hard_threshold", "--tau", "0.3", "--stride",
                                "2"});
  REQUIRE(hard_run.exit_code == 0);
  CHECK(load_image(hard).data != load_image(with_tanh).data);

  RunResult bad_mode = run_cli({"analyze", "saturation", "--model",
                                f.model.string(), "--input", noisy.string(),
                                "--output", (dir / "x.pgm").string(),
                                "--mode", "soft"});
  CHECK(bad_mode.exit_code == 1);
}

TEST_CASE("cli: dictionary export, approximation and omp denoising") {
  Fixture& f = fixture();
  fs::path dir = fresh_dir("dict");

  fs::path bin = dir / "dict.bin";
  RunResult exported = run_cli({"dict", "export", "--model", f.model.string(),
                                "--out", bin.string()});
  REQUIRE(exported.exit_code == 0);
  CHECK(contains(exported.out, "12 atoms of 25 values"));
  REQUIRE(fs::exists(bin));
  // u64 dim | u64 size | atoms | bias, little-endian.
  std::ifstream in(bin, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() == 16 + (25 * 12 + 25) * 8);
  auto u64_at = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  CHECK(u64_at(0) == 25);
  CHECK(u64_at(8) == 12);

  fs::path norm_bin = dir / "dict_norm.bin";
  RunResult normalized =
      run_cli({"dict", "export", "--model", f.model.string(), "--normalize",
               "--out", norm_bin.string()});
  REQUIRE(normalized.exit_code == 0);
  std::ifstream nin(norm_bin, std::ios::binary);
  std::vector<unsigned char> nbytes((std::istreambuf_iterator<char>(nin)), {});
  auto f64_at = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(nbytes[at + i]) << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  };
  for (std::size_t c = 0; c < 12; ++c) {
    double n2 = 0;
    for (std::size_t r = 0; r < 25; ++r) {
      double v = f64_at(16 + (r * 12 + c) * 8);
      n2 += v * v;
    }
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-9));
  }

  RunResult no_target =
      run_cli({"dict", "export", "--model", f.model.string()});
  CHECK(no_target.exit_code == 1);
  CHECK(contains(no_target.err, "--out"));

  fs::path atoms_png = dir / "atoms.png";
  RunResult montage = run_cli({"dict", "export", "--model", f.model.string(),
                               "--montage", atoms_png.string()});
  REQUIRE(montage.exit_code == 0);
  ImageBuffer am = load_image(atoms_png);
  CHECK(am.width == 25);  // 4 columns of 5px atoms
  CHECK(am.height == 19);

  fs::path approx = dir / "approx.png";
  RunResult ap = run_cli({"dict", "approx", "--model", f.model.string(),
                          "--input", f.clean.string(), "--output",
                          approx.string(), "--stride", "5"});
  REQUIRE(ap.exit_code == 0);
  CHECK(csv_value_after(ap.out, "approx_psnr") > 5.0);
  ImageBuffer rebuilt = load_image(approx);
  CHECK(rebuilt.width == 40);
  CHECK(rebuilt.height == 32);

  fs::path od = dir / "omp.png";
  RunResult omp_run = run_cli({"dict", "omp-denoise", "--model",
                               f.model.string(), "--input", f.clean.string(),
                               "--output", od.string(), "--sigma", "25",
                               "--stride", "5", "--max-atoms", "8",
                               "--reference", f.clean.string()});
  REQUIRE(omp_run.exit_code == 0);
  CHECK(std::isfinite(csv_value_after(omp_run.out, "denoised_psnr")));
  ImageBuffer den = load_image(od);
  CHECK(den.width == 40);
  CHECK(den.height == 32);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_tests <path-to-mlpd-binary>\n");
    return 2;
  }
  g_cli = argv[1];
  doctest::Context context;
  return context.run();
}
