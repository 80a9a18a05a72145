#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "tsr/config.hpp"
#include "tsr/losses.hpp"
#include "tsr/matching.hpp"
#include "tsr/metrics.hpp"
#include "tsr/model.hpp"
#include "tsr/synthetic.hpp"

namespace tsr {

/// Where stage-3 merge pairs come from: the predicted split grid (normal training) or the GT
/// separators (used when the predicted grid is unusable, and by gradient checks).
enum class MergeGridSource { predicted, ground_truth };

/// One sample at model scale: ink tensor padded to multiples of 32 plus GT in the same frame.
struct PreparedSample {
  torch::Tensor image;
  ImageSize model_size;    // padded
  ImageSize content_size;  // unpadded
  SeparatorSet rows{Axis::row, {}};
  SeparatorSet cols{Axis::column, {}};
  TableGrid gt_grid;
};

/// Rescales so the shorter side equals `shorter_side` (no-op when it already does).
PreparedSample prepare_sample(const AnnotatedSample& sample, int shorter_side, torch::TensorOptions opts = torch::kFloat);

struct LossValues {
  double total = 0.0, ref_row = 0.0, ref_col = 0.0, line_row = 0.0, line_col = 0.0, merge = 0.0;
};

struct SampleLoss {
  torch::Tensor total;
  LossTerms terms;
  LossValues values;
};

/// GT bands crossing the reference coordinate, in pixels.
std::vector<GtBand> bands_at(const SeparatorSet& gt, double along_value);

/// Matching of one branch's queries to GT lines. Prior mode uses the reference pixels
/// (a reference matches a band its pixel overlaps); DETR mode uses final-layer scores and centers.
MatchResult match_branch(const BranchOutput& branch, const SeparatorSet& gt, const LineTargets& targets,
                         MatchingMode mode);

/// Loss of one sample for a training stage (1: references, 2: + lines, 3: + merging).
SampleLoss sample_loss(TsrModel& model, const PreparedSample& sample, int stage, const RunConfig& cfg,
                       MergeGridSource merge_source = MergeGridSource::predicted);

/// Parameters optimized in a stage.
std::vector<torch::Tensor> stage_parameters(TsrModel& model, int stage);

/// base * (1 - step / total)^power
double poly_lr(double base, long step, long total, double power);

struct StepRecord {
  long step = 0;        // global optimizer step
  long stage_step = 0;  // within the stage, 1-based
  int stage = 1;
  double lr = 0.0;
  LossValues loss;      // mean over the accumulated samples
};

class Trainer {
 public:
  Trainer(TsrModel model, RunConfig cfg, std::vector<AnnotatedSample> data);

  /// CSV loss log: step,stage,total,ref_row,ref_col,line_row,line_col,merge
  void set_log(std::ostream* log);
  /// Writes stage<N>.pt and config.txt after each stage.
  void set_checkpoint_dir(std::filesystem::path dir) { ckpt_dir_ = std::move(dir); }
  /// Called after every optimizer step; returning false ends the stage early.
  std::function<bool(const StepRecord&)> on_step;

  /// Runs epochs_for_stage(stage) epochs.
  void run_stage(int stage);
  /// Runs a fixed number of optimizer steps with the poly schedule over that many steps.
  void run_stage_steps(int stage, long steps);
  void run_all();

  long global_step() const { return global_step_; }
  long steps_per_epoch() const;

 private:
  const PreparedSample& prepared(std::size_t index);

  TsrModel model_;
  RunConfig cfg_;
  std::vector<AnnotatedSample> data_;
  std::vector<PreparedSample> cache_;
  std::ostream* log_ = nullptr;
  std::filesystem::path ckpt_dir_;
  std::mt19937_64 rng_;
  long global_step_ = 0;
};

void save_checkpoint(TsrModel& model, const RunConfig& cfg, const std::filesystem::path& dir, int stage);
/// Loads config.txt and the highest stage<N>.pt of a checkpoint directory.
TsrModel load_checkpoint(const std::filesystem::path& dir, RunConfig* cfg_out = nullptr);

/// Evaluation record of a predicted grid against an annotated sample.
EvalSample eval_sample(const TableGrid& predicted, const AnnotatedSample& gt);

EvalReport evaluate_model(TsrModel& model, const std::vector<AnnotatedSample>& data, const RunConfig& cfg,
                          double limitation = 0.5, std::vector<double> ious = {0.6, 0.7, 0.8, 0.9});

}  // namespace tsr
