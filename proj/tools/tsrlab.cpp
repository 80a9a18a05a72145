// tsrlab: synthetic data, staged training, evaluation and inference.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "tsr/annotation.hpp"
#include "tsr/config.hpp"
#include "tsr/overlay.hpp"
#include "tsr/train.hpp"

namespace fs = std::filesystem;
using namespace tsr;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty IoU list");
  return out;
}

Difficulty difficulty_for(const std::string& name, int index) {
  if (name == "mixed") {
    static const Difficulty cycle[] = {Difficulty::spans, Difficulty::empties, Difficulty::dense, Difficulty::plain};
    return cycle[index % 4];
  }
  return parse_difficulty(name);
}

std::vector<AnnotatedSample> load_dataset(const fs::path& dir) {
  std::vector<AnnotatedSample> out;
  for (const auto& f : list_dataset(dir)) out.push_back(load_sample(f));
  if (out.empty()) throw std::runtime_error("no samples in " + dir.string());
  return out;
}

int gen_data(const fs::path& out, int n, std::uint64_t seed, const std::string& difficulty, const std::string& warp,
             int size, bool force) {
  if (fs::exists(out) && !fs::is_empty(out) && !force) {
    std::cerr << "output directory " << out << " is not empty (use --force)\n";
    return 1;
  }
  fs::create_directories(out);
  if (const char* env = std::getenv("TSRLAB_SEED")) seed = std::stoull(env);
  GeneratorOptions opts;
  opts.width = opts.height = size;
  const WarpLevel w = parse_warp_level(warp);
  for (int i = 0; i < n; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%05d", i);
    save_sample(generate_sample(seed + static_cast<std::uint64_t>(i), difficulty_for(difficulty, i), w, opts), out, stem);
  }
  std::cout << "wrote " << n << " samples to " << out.string() << "\n";
  return 0;
}

int train(const fs::path& data, const std::string& config, const fs::path& out) {
  RunConfig cfg = config.empty() ? preset_config("desk") : load_config(config);
  apply_environment(cfg);
  torch::manual_seed(cfg.train.seed);
  auto samples = load_dataset(data);
  TsrModel model(cfg.model);
  fs::create_directories(out);
  std::ofstream log(out / "loss.csv");
  Trainer trainer(model, cfg, std::move(samples));
  trainer.set_log(&log);
  trainer.set_checkpoint_dir(out);
  trainer.on_step = [&](const StepRecord& r) {
    if (r.stage_step % 10 == 0)
      std::cout << "stage " << r.stage << " step " << r.stage_step << " loss " << r.loss.total << "\n" << std::flush;
    return true;
  };
  trainer.run_all();
  std::cout << "checkpoints in " << out.string() << "\n";
  return 0;
}

int eval(const fs::path& data, const fs::path& ckpt, double limitation, const std::string& ious, bool passthrough,
         const std::string& out) {
  auto samples = load_dataset(data);
  auto levels = parse_list(ious);
  EvalReport report;
  if (passthrough) {
    Evaluator ev(limitation, levels);
    for (const auto& s : samples) ev.add(eval_sample(s.gt_grid, s));
    report = ev.report();
  } else {
    RunConfig cfg;
    TsrModel model = load_checkpoint(ckpt, &cfg);
    report = evaluate_model(model, samples, cfg, limitation, levels);
  }
  const std::string json = serialize_report(report);
  if (out.empty())
    std::cout << json << "\n";
  else
    write_text(out, json);
  return 0;
}

int infer(const fs::path& image, const fs::path& ckpt, const std::string& overlay, const std::string& out) {
  RunConfig cfg;
  TsrModel model = load_checkpoint(ckpt, &cfg);
  GrayImage img = load_png(image);
  TablePrediction pred = infer_table(model, img, cfg.train.infer_long_side);
  const std::string json = serialize_prediction(pred.rows, pred.cols, pred.grid);
  if (out.empty())
    std::cout << json << "\n";
  else
    write_text(out, json);
  if (!overlay.empty()) write_overlay(img, pred.rows, pred.cols, pred.grid, overlay);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"table structure recognition lab"};
  app.require_subcommand(1);

  std::string out, data, config, ckpt, image, overlay, difficulty = "mixed", warp = "mild", ious = "0.6,0.7,0.8,0.9";
  int n = 100, size = 128;
  std::uint64_t seed = 0;
  bool force = false, passthrough = false;
  double limitation = 0.5;

  auto* gen = app.add_subcommand("gen-data", "write synthetic PNG + JSON samples");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--n", n, "number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "base seed");
  gen->add_option("--difficulty", difficulty, "plain, spans, empties, dense or mixed");
  gen->add_option("--warp", warp, "none, mild or strong");
  gen->add_option("--size", size, "image width and height")->check(CLI::PositiveNumber);
  gen->add_flag("--force", force, "write into a non-empty directory");

  auto* tr = app.add_subcommand("train", "staged training");
  tr->add_option("--data", data, "dataset directory")->required();
  tr->add_option("--config", config, "key = value config file");
  tr->add_option("--out", out, "checkpoint directory")->required();

  auto* ev = app.add_subcommand("eval", "adjacency F1 and TEDS-Struct report");
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--ckpt", ckpt, "checkpoint directory");
  ev->add_option("--limitation", limitation, "text assignment threshold")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--iou", ious, "comma-separated IoU thresholds");
  ev->add_flag("--passthrough", passthrough, "score the GT grid against itself");
  ev->add_option("--report", out, "write the JSON report here instead of stdout");

  auto* inf = app.add_subcommand("infer", "predict one table image");
  inf->add_option("--image", image, "PNG image")->required();
  inf->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  inf->add_option("--overlay", overlay, "overlay PNG");
  inf->add_option("--out", out, "write the grid JSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_data(out, n, seed, difficulty, warp, size, force);
    if (*tr) return train(data, config, out);
    if (*ev) {
      if (!passthrough && ckpt.empty()) throw std::invalid_argument("eval needs --ckpt or --passthrough");
      return eval(data, ckpt, limitation, ious, passthrough, out);
    }
    if (*inf) return infer(image, ckpt, overlay, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
