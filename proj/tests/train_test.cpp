#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <torch/torch.h>

#include "tsr/train.hpp"

using namespace tsr;
using doctest::Approx;

namespace {

RunConfig tiny_config() {
  RunConfig cfg = preset_config("desk");
  cfg.model.backbone_width = 8;
  cfg.model.p2_channels = 16;
  cfg.model.highres_channels = 16;
  cfg.model.d_model = 32;
  cfg.model.ffn_dim = 64;
  cfg.model.cell_dim = 32;
  cfg.train.batch_size = 1;
  return cfg;
}

// reference scores at 0.5 so every window peak becomes a query
void open_reference_heads(TsrModel& model) {
  torch::NoGradGuard ng;
  model->rows->ref_head->score->bias.zero_();
  model->cols->ref_head->score->bias.zero_();
}

std::map<std::string, torch::Tensor> snapshot(torch::nn::Module& m) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : m.named_parameters()) out[p.key()] = p.value().detach().clone();
  return out;
}

}  // namespace

TEST_CASE("poly schedule") {
  CHECK(poly_lr(1e-3, 0, 100, 0.9) == 1e-3);
  CHECK(poly_lr(1e-3, 50, 100, 0.9) == Approx(1e-3 * std::pow(0.5, 0.9)).epsilon(1e-12));
  CHECK(poly_lr(1e-3, 100, 100, 0.9) == 0.0);
}

TEST_CASE("sample preparation") {
  const AnnotatedSample s = generate_sample(3, Difficulty::spans, WarpLevel::mild);
  auto p = prepare_sample(s, 128);
  CHECK(p.image.sizes() == torch::IntArrayRef({1, 1, 128, 128}));
  CHECK(p.image.max().item<double>() <= 1.0);
  auto big = prepare_sample(s, 200);
  CHECK(big.content_size.width == 200);
  CHECK(big.model_size.width == 224);
  CHECK(big.image.size(3) == 224);
  const double f = 200.0 / 128.0;
  CHECK(big.rows.separators[0].center.points[3].y == Approx(s.gt_row_seps.separators[0].center.points[3].y * f));
  CHECK(big.gt_grid.final_cells.back().box.corners[2].x == Approx(s.gt_grid.final_cells.back().box.corners[2].x * f));
}

TEST_CASE("stage parameter sets") {
  TsrModel model(tiny_config().model);
  const auto n1 = stage_parameters(model, 1).size();
  const auto n2 = stage_parameters(model, 2).size();
  const auto n3 = stage_parameters(model, 3).size();
  CHECK(n1 < n2);
  CHECK(n2 < n3);
  CHECK(n3 == model->parameters().size());
  CHECK_THROWS(stage_parameters(model, 4));
}

TEST_CASE("stage 1 leaves decoder and merger untouched") {
  torch::manual_seed(1);
  RunConfig cfg = tiny_config();
  TsrModel model(cfg.model);
  auto dec_before = snapshot(*model->rows->decoder);
  auto merge_before = snapshot(*model->merger);
  auto bb_before = snapshot(*model->backbone);
  Trainer trainer(model, cfg, {generate_sample(1, Difficulty::plain, WarpLevel::none)});
  trainer.run_stage_steps(1, 3);
  for (const auto& p : model->rows->decoder->named_parameters()) CHECK(torch::equal(p.value(), dec_before[p.key()]));
  for (const auto& p : model->merger->named_parameters()) CHECK(torch::equal(p.value(), merge_before[p.key()]));
  bool moved = false;
  for (const auto& p : model->backbone->named_parameters()) moved = moved || !torch::equal(p.value(), bb_before[p.key()]);
  CHECK(moved);
}

TEST_CASE("total loss reaches the backbone") {
  torch::manual_seed(2);
  RunConfig cfg = tiny_config();
  TsrModel model(cfg.model);
  open_reference_heads(model);
  auto sample = prepare_sample(generate_sample(5, Difficulty::spans, WarpLevel::mild), 128);
  auto loss = sample_loss(model, sample, 3, cfg, MergeGridSource::ground_truth);
  CHECK(loss.values.line_row > 0.0);
  CHECK(loss.values.merge > 0.0);
  CHECK(loss.values.total ==
        Approx(0.2 * (loss.values.ref_row + loss.values.ref_col) + loss.values.line_row + loss.values.line_col +
               loss.values.merge));
  loss.total.backward();
  double norm = 0.0;
  for (const auto& p : model->backbone->parameters())
    if (p.grad().defined()) norm += p.grad().norm().item<double>();
  CHECK(norm > 0.0);

  auto stage1 = sample_loss(model, sample, 1, cfg);
  CHECK(stage1.values.line_row == 0.0);
  CHECK(stage1.values.total == Approx(0.2 * (stage1.values.ref_row + stage1.values.ref_col)));
}

TEST_CASE("both matching modes produce valid pairs") {
  torch::manual_seed(3);
  RunConfig cfg = tiny_config();
  TsrModel model(cfg.model);
  open_reference_heads(model);
  auto sample = prepare_sample(generate_sample(7, Difficulty::plain, WarpLevel::none), 128);
  torch::NoGradGuard ng;
  auto p2 = model->features(sample.image);
  auto b = model->branch(Axis::row, p2, true);
  auto targets = line_targets(sample.rows, sample.model_size, 15);
  for (auto mode : {MatchingMode::prior_enhanced, MatchingMode::original_detr}) {
    auto m = match_branch(b, sample.rows, targets, mode);
    std::set<int> preds, gts;
    for (auto [p, g] : m.pairs) {
      CHECK(preds.insert(p).second);
      CHECK(gts.insert(g).second);
    }
    if (mode == MatchingMode::original_detr)
      CHECK(m.pairs.size() == std::min(b.refs.size(), sample.rows.size()));
    else
      for (auto [p, g] : m.pairs) {
        const auto band = bands_at(sample.rows, b.ref_along)[static_cast<std::size_t>(g)];
        const double r = b.ref_index[static_cast<std::size_t>(p)];
        CHECK(r + 1.0 >= band.top);
        CHECK(r <= band.bottom);
      }
  }
}

TEST_CASE("stage 2 loss decreases on a fixed sample") {
  torch::manual_seed(4);
  RunConfig cfg = tiny_config();
  cfg.train.lr = 1e-3;
  TsrModel model(cfg.model);
  Trainer trainer(model, cfg, {generate_sample(9, Difficulty::plain, WarpLevel::none)});
  trainer.run_stage_steps(1, 60);
  std::vector<double> losses;
  trainer.on_step = [&](const StepRecord& r) {
    losses.push_back(r.loss.total);
    return true;
  };
  trainer.run_stage_steps(2, 50);
  REQUIRE(losses.size() == 50);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 5; ++i) {
    first += losses[static_cast<std::size_t>(i)];
    last += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
  }
  CHECK(last < first);
}

TEST_CASE("inference basics") {
  torch::manual_seed(5);
  RunConfig cfg = tiny_config();
  TsrModel model(cfg.model);
  SUBCASE("blank image gives a single cell") {
    auto pred = infer_table(model, GrayImage(128, 128), 128);
    CHECK(pred.grid.n_rows == 1);
    CHECK(pred.grid.n_cols == 1);
    CHECK(pred.grid.final_cells.size() == 1);
  }
  SUBCASE("non-square input is padded and mapped back") {
    auto pred = infer_table(model, GrayImage(90, 70), 128);
    CHECK(pred.grid.image_size.width == Approx(90));
    CHECK(pred.grid.image_size.height == Approx(70));
  }
}

TEST_CASE("rescaled geometry maps back within a pixel") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AnnotatedSample s = generate_sample(seed, Difficulty::dense, WarpLevel::mild);
    const double fx = 1024.0 / 128.0, fy = 1024.0 / 128.0;
    auto rows = scale_separators(s.gt_row_seps, fx, fy);
    auto cols = scale_separators(s.gt_col_seps, fx, fy);
    auto big = build_grid(rows, cols, {1024, 1024});
    auto back = scale_grid(big, 1 / fx, 1 / fy);
    auto direct = build_grid(s.gt_row_seps, s.gt_col_seps, s.size());
    REQUIRE(back.cell_boxes.size() == direct.cell_boxes.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < direct.cell_boxes.size(); ++i)
      for (int c = 0; c < 4; ++c) {
        worst = std::max(worst, std::abs(back.cell_boxes[i].corners[c].x - direct.cell_boxes[i].corners[c].x));
        worst = std::max(worst, std::abs(back.shrunk_boxes[i].corners[c].y - direct.shrunk_boxes[i].corners[c].y));
      }
    CHECK(worst <= 1.0);
  }
}

TEST_CASE("checkpoint round trip restores predictions") {
  torch::manual_seed(6);
  RunConfig cfg = tiny_config();
  TsrModel model(cfg.model);
  open_reference_heads(model);
  auto dir = std::filesystem::temp_directory_path() / "tsr_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(model, cfg, dir, 2);
  RunConfig loaded_cfg;
  TsrModel loaded = load_checkpoint(dir, &loaded_cfg);
  CHECK(serialize_config(loaded_cfg) == serialize_config(cfg));
  const AnnotatedSample s = generate_sample(8, Difficulty::spans, WarpLevel::mild);
  auto a = sample_loss(model, prepare_sample(s, 128), 3, cfg, MergeGridSource::ground_truth);
  auto b = sample_loss(loaded, prepare_sample(s, 128), 3, cfg, MergeGridSource::ground_truth);
  CHECK(a.values.total == b.values.total);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss log format") {
  RunConfig cfg = tiny_config();
  TsrModel model(cfg.model);
  Trainer trainer(model, cfg, {generate_sample(1, Difficulty::plain, WarpLevel::none)});
  std::ostringstream log;
  trainer.set_log(&log);
  trainer.run_stage_steps(1, 2);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,stage,total,ref_row,ref_col,line_row,line_col,merge");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
  }
  CHECK(rows == 2);
}
