#include "tsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tsr/annotation.hpp"

namespace tsr {

PreparedSample prepare_sample(const AnnotatedSample& sample, int shorter_side, torch::TensorOptions opts) {
  PreparedSample p;
  const int w0 = sample.image.width, h0 = sample.image.height;
  const double s = static_cast<double>(shorter_side) / std::min(w0, h0);
  const int w = std::max(1, static_cast<int>(std::lround(w0 * s)));
  const int h = std::max(1, static_cast<int>(std::lround(h0 * s)));
  if (w == w0 && h == h0) {
    p.image = image_tensor(sample.image, opts);
    p.rows = sample.gt_row_seps;
    p.cols = sample.gt_col_seps;
    p.gt_grid = sample.gt_grid;
  } else {
    const double fx = static_cast<double>(w) / w0, fy = static_cast<double>(h) / h0;
    p.image = image_tensor(resize_image(sample.image, w, h), opts);
    p.rows = scale_separators(sample.gt_row_seps, fx, fy);
    p.cols = scale_separators(sample.gt_col_seps, fx, fy);
    p.gt_grid = scale_grid(sample.gt_grid, fx, fy);
  }
  p.content_size = {static_cast<double>(w), static_cast<double>(h)};
  p.model_size = {static_cast<double>(p.image.size(3)), static_cast<double>(p.image.size(2))};
  return p;
}

std::vector<GtBand> bands_at(const SeparatorSet& gt, double along_value) {
  std::vector<GtBand> out;
  for (const auto& s : gt.separators)
    out.push_back({s.center.across_at(along_value), s.top.across_at(along_value), s.bottom.across_at(along_value)});
  return out;
}

MatchResult match_branch(const BranchOutput& branch, const SeparatorSet& gt, const LineTargets& targets,
                         MatchingMode mode) {
  if (mode == MatchingMode::prior_enhanced) {
    std::vector<double> refs;
    for (int i : branch.ref_index) refs.push_back(i + 0.5);
    auto bands = bands_at(gt, branch.ref_along);
    // the reference is a pixel: it lies in a band when its pixel overlaps the band
    for (auto& b : bands) {
      b.top -= 0.5;
      b.bottom += 0.5;
    }
    return prior_enhanced_match(refs, bands);
  }
  const auto& lines = *branch.lines;
  auto scores = lines.scores().detach().to(torch::kDouble).contiguous();
  auto centers = lines.final_layer().center.detach().to(torch::kDouble).contiguous();
  auto gt_c = targets.center.detach().to(torch::kDouble).contiguous();
  std::vector<double> s(scores.data_ptr<double>(), scores.data_ptr<double>() + scores.numel());
  auto rows = [](const torch::Tensor& t) {
    std::vector<std::vector<double>> out;
    for (int64_t i = 0; i < t.size(0); ++i) {
      auto r = t[i].contiguous();
      out.emplace_back(r.data_ptr<double>(), r.data_ptr<double>() + r.numel());
    }
    return out;
  };
  return set_prediction_match(s, rows(centers), rows(gt_c));
}

namespace {

double value(const torch::Tensor& t) { return t.defined() ? t.detach().item<double>() : 0.0; }

torch::Tensor ref_loss_for(const BranchOutput& b, const SeparatorSet& gt, const LossConfig& lc) {
  const auto a = static_cast<int>(b.ref_logits.size(0));
  auto targets = gaussian_targets(bands_at(gt, b.ref_along), a);
  auto t = torch::tensor(targets, torch::kDouble).to(b.ref_logits.options());
  return reference_loss(b.ref_logits, t, static_cast<double>(gt.size()), lc.ref_alpha, lc.ref_beta);
}

}  // namespace

SampleLoss sample_loss(TsrModel& model, const PreparedSample& sample, int stage, const RunConfig& cfg,
                       MergeGridSource merge_source) {
  SampleLoss out;
  const auto& lc = cfg.loss;
  auto p2 = model->features(sample.image);
  const bool decode = stage >= 2;
  BranchOutput br = model->branch(Axis::row, p2, decode);
  BranchOutput bc = model->branch(Axis::column, p2, decode);
  out.terms.ref_row = ref_loss_for(br, sample.rows, lc);
  out.terms.ref_col = ref_loss_for(bc, sample.cols, lc);

  if (decode) {
    auto line_term = [&](const BranchOutput& b, const SeparatorSet& gt) {
      auto targets = line_targets(gt, sample.model_size, cfg.model.points_per_line, b.ref_logits.options());
      auto match = match_branch(b, gt, targets, lc.matching);
      return line_loss(*b.lines, targets, match.pairs, lc.focal_gamma, lc.focal_alpha).total();
    };
    out.terms.line_row = line_term(br, sample.rows);
    out.terms.line_col = line_term(bc, sample.cols);
  }

  if (stage >= 3) {
    TableGrid grid;
    if (merge_source == MergeGridSource::predicted) {
      auto rows = branch_separators(br, Axis::row, sample.model_size, sample.content_size, cfg.model.class_threshold);
      auto cols = branch_separators(bc, Axis::column, sample.model_size, sample.content_size, cfg.model.class_threshold);
      grid = build_grid(rows, cols, sample.content_size);
    } else {
      grid = build_grid(sample.rows, sample.cols, sample.content_size);
    }
    auto pairs = adjacency_pairs(grid);
    auto labels = merge_labels(grid, sample.gt_grid);
    auto probs = model->merger(p2, grid, pairs);
    std::vector<double> losses;
    {
      auto p = probs.detach().to(torch::kDouble).clamp(1e-7, 1.0 - 1e-7);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const double q = p[static_cast<int64_t>(i)].item<double>();
        losses.push_back(labels[i] == 1 ? -std::log(q) : -std::log(1.0 - q));
      }
    }
    auto chosen = ohem_select(losses, labels, lc.ohem_positive, lc.ohem_negative);
    std::vector<int64_t> idx(chosen.begin(), chosen.end());
    std::vector<double> y;
    for (int i : chosen) y.push_back(labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0);
    auto sel = probs.index_select(0, torch::tensor(idx, torch::kLong));
    out.terms.merge = merge_loss(sel, torch::tensor(y, torch::kDouble).to(probs.options()));
  }

  out.total = total_loss(out.terms, lc.ref_weight);
  out.values = {value(out.total),         value(out.terms.ref_row),  value(out.terms.ref_col),
                value(out.terms.line_row), value(out.terms.line_col), value(out.terms.merge)};
  return out;
}

std::vector<torch::Tensor> stage_parameters(TsrModel& model, int stage) {
  if (stage < 1 || stage > 3) throw std::invalid_argument("stage must be 1, 2 or 3");
  std::vector<torch::Tensor> params = model->backbone->parameters();
  auto add = [&](const std::vector<torch::Tensor>& p) { params.insert(params.end(), p.begin(), p.end()); };
  for (auto* b : {&model->rows, &model->cols}) {
    add((*b)->scnn->parameters());
    add((*b)->ref_proj->parameters());
    add((*b)->ref_head->parameters());
    if (stage >= 2) {
      add((*b)->attn_proj->parameters());
      add((*b)->decoder->parameters());
    }
  }
  if (stage >= 3) add(model->merger->parameters());
  return params;
}

double poly_lr(double base, long step, long total, double power) {
  if (total <= 0) return base;
  const double f = std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(total));
  return base * std::pow(f, power);
}

Trainer::Trainer(TsrModel model, RunConfig cfg, std::vector<AnnotatedSample> data)
    : model_(std::move(model)), cfg_(std::move(cfg)), data_(std::move(data)), rng_(cfg_.train.seed) {
  if (data_.empty()) throw std::invalid_argument("training set is empty");
  cfg_.validate();
}

void Trainer::set_log(std::ostream* log) {
  log_ = log;
  if (log_) *log_ << "step,stage,total,ref_row,ref_col,line_row,line_col,merge\n";
}

long Trainer::steps_per_epoch() const {
  const long n = static_cast<long>(data_.size());
  return (n + cfg_.train.batch_size - 1) / cfg_.train.batch_size;
}

const PreparedSample& Trainer::prepared(std::size_t index) {
  const auto& scales = cfg_.train.train_scales;
  const auto opts = model_->parameters().front().options();
  if (scales.size() == 1) {
    if (cache_.empty()) {
      for (const auto& s : data_) cache_.push_back(prepare_sample(s, scales.front(), opts));
    }
    return cache_[index];
  }
  std::uniform_int_distribution<std::size_t> pick(0, scales.size() - 1);
  cache_.resize(1);
  cache_[0] = prepare_sample(data_[index], scales[pick(rng_)], opts);
  return cache_[0];
}

void Trainer::run_stage(int stage) { run_stage_steps(stage, cfg_.train.epochs_for_stage(stage) * steps_per_epoch()); }

void Trainer::run_stage_steps(int stage, long steps) {
  const auto& tc = cfg_.train;
  auto params = stage_parameters(model_, stage);
  torch::optim::AdamW opt(params, torch::optim::AdamWOptions(tc.lr)
                                      .betas({tc.beta1, tc.beta2})
                                      .eps(tc.eps)
                                      .weight_decay(tc.weight_decay));
  model_->train();
  std::vector<std::size_t> order(data_.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  for (long step = 0; step < steps; ++step) {
    const double lr = poly_lr(tc.lr, step, steps, tc.poly_power);
    for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(g.options()).lr(lr);
    opt.zero_grad();
    LossValues mean;
    const int batch = std::min<int>(tc.batch_size, static_cast<int>(data_.size()));
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng_);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      SampleLoss l = sample_loss(model_, prepared(idx), stage, cfg_);
      if (!std::isfinite(l.values.total)) {
        std::ostringstream msg;
        msg << "loss diverged at stage " << stage << " step " << step + 1 << " (sample " << idx
            << "): ref_row=" << l.values.ref_row << " ref_col=" << l.values.ref_col << " line_row=" << l.values.line_row
            << " line_col=" << l.values.line_col << " merge=" << l.values.merge;
        throw std::runtime_error(msg.str());
      }
      (l.total / static_cast<double>(batch)).backward();
      mean.total += l.values.total / batch;
      mean.ref_row += l.values.ref_row / batch;
      mean.ref_col += l.values.ref_col / batch;
      mean.line_row += l.values.line_row / batch;
      mean.line_col += l.values.line_col / batch;
      mean.merge += l.values.merge / batch;
    }
    if (tc.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(params, tc.grad_clip);
    opt.step();
    ++global_step_;
    if (log_) {
      *log_ << global_step_ << ',' << stage << ',' << mean.total << ',' << mean.ref_row << ',' << mean.ref_col << ','
            << mean.line_row << ',' << mean.line_col << ',' << mean.merge << '\n';
    }
    if (on_step && !on_step({global_step_, step + 1, stage, lr, mean})) break;
  }
  if (!ckpt_dir_.empty()) save_checkpoint(model_, cfg_, ckpt_dir_, stage);
}

void Trainer::run_all() {
  for (int stage = 1; stage <= 3; ++stage) run_stage(stage);
}

void save_checkpoint(TsrModel& model, const RunConfig& cfg, const std::filesystem::path& dir, int stage) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", serialize_config(cfg));
  torch::save(model, (dir / ("stage" + std::to_string(stage) + ".pt")).string());
}

TsrModel load_checkpoint(const std::filesystem::path& dir, RunConfig* cfg_out) {
  RunConfig cfg = load_config(dir / "config.txt");
  std::filesystem::path file;
  for (int stage = 3; stage >= 1 && file.empty(); --stage) {
    auto f = dir / ("stage" + std::to_string(stage) + ".pt");
    if (std::filesystem::exists(f)) file = f;
  }
  if (file.empty()) throw std::runtime_error("no stage checkpoint in " + dir.string());
  TsrModel model(cfg.model);
  torch::load(model, file.string());
  model->eval();
  if (cfg_out) *cfg_out = cfg;
  return model;
}

EvalSample eval_sample(const TableGrid& predicted, const AnnotatedSample& gt) {
  EvalSample e;
  e.pred_cells = predicted.final_cells;
  e.pred_rows = predicted.n_rows;
  e.gt_cells = gt.gt_grid.final_cells;
  e.gt_rows = gt.gt_grid.n_rows;
  for (const auto& t : gt.text_boxes) {
    e.text_boxes.push_back(t.box);
    e.text_owner.push_back(t.cell);
  }
  return e;
}

EvalReport evaluate_model(TsrModel& model, const std::vector<AnnotatedSample>& data, const RunConfig& cfg,
                          double limitation, std::vector<double> ious) {
  Evaluator ev(limitation, std::move(ious));
  for (const auto& s : data) ev.add(eval_sample(infer_table(model, s.image, cfg.train.infer_long_side).grid, s));
  return ev.report();
}

}  // namespace tsr
