#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openstreets/corpus.hpp"
#include "openstreets/nn/checkpoint.hpp"
#include "openstreets/nn/layers.hpp"
#include "openstreets/roadnet.hpp"

namespace openstreets {

using nn::Matrix;
using MatrixD = nn::Matrix<double>;

// Features --------------------------------------------------------------------

/// Column order of the per-day feature matrix (|V| x kFeatureCount).
enum Feature : int {
  kLength,
  kWidth,
  kLanes,
  kSpeed,
  kBikeLane,
  kBorder,
  kDoubleLevel,
  kCurveRadius,
  kCarVolume,
  kTravelTime,
  kPrecip,
  kSnow,
  kTemp,
  kMonday,  // kMonday + weekday(), Monday..Sunday
  kFeatureCount = kMonday + 7,
};

const std::array<std::string, kFeatureCount>& feature_names();

/// Raw (unstandardized) features of one day. `segment_volumes` has one entry per segment.
MatrixD day_features(const RoadNetwork& net, std::span<const double> segment_volumes, const WeatherDay& weather,
                     Date date);

/// Column-wise affine map fitted on training rows; constant columns keep scale 1.
struct Standardizer {
  MatrixD mean;   // 1 x F
  MatrixD scale;  // 1 x F

  static Standardizer fit(std::span<const MatrixD> blocks);
  static Standardizer identity(Eigen::Index features);
  MatrixD apply(const MatrixD& raw) const;
};

// Dataset ---------------------------------------------------------------------

struct DayInput {
  Date date;
  std::vector<double> segment_volumes;
  WeatherDay weather;
  std::vector<double> labels;  // per segment, 0 or 1
};

/// Sliding windows of `window` consecutive days. A window is identified by the index
/// of its first day and labelled with its final day.
struct Dataset {
  int window = 7;
  std::vector<Date> dates;
  std::vector<MatrixD> raw;       // per day
  std::vector<MatrixD> features;  // per day, standardized with `standardizer`
  std::vector<MatrixD> labels;    // per day, |V| x 1
  std::vector<std::size_t> train, test;
  Standardizer standardizer;

  std::size_t final_day(std::size_t start) const { return start + static_cast<std::size_t>(window) - 1; }
  std::span<const MatrixD> window_features(std::size_t start) const {
    return {features.data() + start, static_cast<std::size_t>(window)};
  }
  /// N_neg / N_pos over the final-day labels of the training windows (1 if no positives).
  double balanced_pos_weight() const;
};

/// Windows are split chronologically: the last `test_fraction` of them (by final day)
/// form the test set. Standardization is fitted on the days covered by training windows.
/// Throws Error(MissingDay) on calendar gaps and Error(EmptyDataset) when no window fits.
Dataset build_dataset(const RoadNetwork& net, std::vector<DayInput> days, int window, double test_fraction = 0.25);
Dataset build_dataset(const Corpus& corpus, int window, double test_fraction = 0.25);

// Metrics ---------------------------------------------------------------------

struct EvalReport {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double recall_pos = 0.0;
  double recall_neg = 0.0;
  double f1 = 0.0;  // positive class
  double macro_recall = 0.0;

  std::string to_json() const;
};

double macro_recall(double recall_pos, double recall_neg);
EvalReport report_from_counts(long long tp, long long fp, long long tn, long long fn);
/// A row is predicted positive when its probability is >= threshold.
EvalReport evaluate_predictions(std::span<const double> probs, std::span<const double> labels,
                                double threshold = 0.5);

// Models ----------------------------------------------------------------------

/// Anything that turns a run of raw day features into per-segment collision
/// probabilities for the final day.
class RiskModel {
 public:
  virtual ~RiskModel() = default;
  /// Number of days the model looks at.
  virtual int window() const = 0;
  virtual std::vector<double> predict(std::span<const MatrixD> raw_days, const DualGraph& graph) const = 0;
};

struct CollisionModelConfig {
  int features = kFeatureCount;
  int hidden = 32;
  int layers = 2;
  int window = 7;
  std::uint64_t seed = 0;

  static CollisionModelConfig lite() { return {kFeatureCount, 16, 1, 7, 0}; }
};

/// Dense encoder E = relu(X W + b), a stack of gated recurrent graph cells over the
/// window, and a sigmoid head on [H_top, E] of the final day. The encoder skip lets a
/// segment see its own features, which the neighbour-only convolution leaves out.
class CollisionModel : public RiskModel {
 public:
  explicit CollisionModel(CollisionModelConfig cfg = {});

  const CollisionModelConfig& config() const noexcept { return cfg_; }
  int window() const override { return cfg_.window; }

  /// Probabilities (|V| x 1) from standardized features; unclamped sigmoid outputs.
  nn::Tape::Var forward(nn::Tape& tape, std::span<const nn::Tape::Var> days,
                        const Eigen::SparseMatrix<double>& adj) const;

  /// Standardized input, probabilities clamped to [1e-7, 1 - 1e-7].
  std::vector<double> predict_standardized(std::span<const MatrixD> days, const DualGraph& graph) const;
  std::vector<double> predict(std::span<const MatrixD> raw_days, const DualGraph& graph) const override;

  std::vector<nn::Parameter<double>*> parameters();
  std::vector<const nn::Parameter<double>*> parameters() const;

  Standardizer standardizer;

  nn::Checkpoint to_checkpoint() const;
  static CollisionModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  CollisionModelConfig cfg_;
  nn::Dense encoder_;
  std::vector<nn::GatedRecurrentGraphCell> cells_;
  nn::Dense head_;
};

struct CollisionTrainConfig {
  int epochs = 40;
  double learning_rate = 5e-3;
  std::uint64_t seed = 0;
  std::optional<double> pos_weight;  // default: dataset.balanced_pos_weight()
};

struct CollisionHistory {
  std::vector<double> epoch_loss;
  double pos_weight = 1.0;
};

struct CollisionTraining {
  CollisionModel model;
  CollisionHistory history;
};

/// Full-batch steps, one per training window, in a seeded shuffled order each epoch.
/// Throws Error(EmptyDataset) without training windows and Error(Diverged) on
/// non-finite losses.
CollisionTraining train_collision(const Dataset& data, const DualGraph& graph, CollisionModelConfig model_cfg,
                                  const CollisionTrainConfig& cfg);

enum class Split { Train, Test };

/// Pools every segment of every final day in the split.
EvalReport evaluate(const CollisionModel& model, const Dataset& data, const DualGraph& graph,
                    double threshold = 0.5, Split split = Split::Test);

/// Weighted loss of the model on a split (used for training curves).
double dataset_loss(const CollisionModel& model, const Dataset& data, const DualGraph& graph, double pos_weight,
                    Split split);

struct FeatureAttribution {
  std::vector<double> mean;  // per feature, averaged over samples
  /// Per sample |sum of attributions - (F(X) - F(X0))| / |F(X) - F(X0)|.
  std::vector<double> completeness_error;
};

/// Integrated gradients of F = mean predicted probability of a window with respect
/// to its standardized inputs, baseline 0 (the training mean). Per-feature values sum
/// over days and segments. At most `max_samples` windows of the split are used.
FeatureAttribution feature_importance(const CollisionModel& model, const Dataset& data, const DualGraph& graph,
                                      int steps = 64, std::size_t max_samples = 8, Split split = Split::Test);

}  // namespace openstreets
