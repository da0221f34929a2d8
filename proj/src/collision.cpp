#include "openstreets/collision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "openstreets/error.hpp"
#include "openstreets/nn/adam.hpp"
#include "openstreets/nn/attribution.hpp"

namespace openstreets {

using Json = nlohmann::ordered_json;

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names{
      "length_m", "width_m",   "lanes",     "speed_limit_kmh", "bike_lane", "border",   "double_level",
      "curve_radius_m", "car_volume", "travel_time_s", "precip_mm", "snow_mm", "temp_c", "dow_mon",
      "dow_tue",  "dow_wed",   "dow_thu",   "dow_fri",         "dow_sat",   "dow_sun"};
  return names;
}

MatrixD day_features(const RoadNetwork& net, std::span<const double> segment_volumes, const WeatherDay& weather,
                     Date date) {
  const std::size_t n = net.segment_count();
  if (segment_volumes.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "day_features: volume vector does not match the network");
  }
  MatrixD x = MatrixD::Zero(static_cast<Eigen::Index>(n), kFeatureCount);
  const int dow = date.weekday();
  for (std::size_t i = 0; i < n; ++i) {
    const SegmentRecord& s = net.segment(i);
    auto row = x.row(static_cast<Eigen::Index>(i));
    row(kLength) = s.length_m;
    row(kWidth) = s.width_m;
    row(kLanes) = s.lanes;
    row(kSpeed) = s.speed_limit_kmh;
    row(kBikeLane) = s.bike_lane;
    row(kBorder) = s.border;
    row(kDoubleLevel) = s.double_level;
    row(kCurveRadius) = s.curve_radius_m.value_or(0.0);
    row(kCarVolume) = segment_volumes[i];
    row(kTravelTime) = travel_time(s);
    row(kPrecip) = weather.precip_mm;
    row(kSnow) = weather.snow_mm;
    row(kTemp) = weather.temp_c;
    row(kMonday + dow) = 1.0;
  }
  return x;
}

Standardizer Standardizer::fit(std::span<const MatrixD> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a standardizer on no data");
  const Eigen::Index f = blocks.front().cols();
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(f);
  double count = 0;
  for (const auto& b : blocks) {
    sum += b.colwise().sum().transpose().array();
    count += static_cast<double>(b.rows());
  }
  const Eigen::ArrayXd mean = sum / count;
  Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(f);
  for (const auto& b : blocks) {
    sq += (b.array().rowwise() - mean.transpose()).square().colwise().sum().transpose();
  }
  Eigen::ArrayXd sd = (sq / count).sqrt();
  for (Eigen::Index j = 0; j < f; ++j) {
    if (!(sd(j) > 1e-12 * std::max(1.0, std::abs(mean(j))))) sd(j) = 1.0;
  }
  Standardizer s;
  s.mean = mean.transpose().matrix();
  s.scale = sd.transpose().matrix();
  return s;
}

Standardizer Standardizer::identity(Eigen::Index features) {
  return {MatrixD::Zero(1, features), MatrixD::Ones(1, features)};
}

MatrixD Standardizer::apply(const MatrixD& raw) const {
  if (raw.cols() != mean.cols()) throw Error(ErrorCode::ShapeMismatch, "standardizer: wrong feature count");
  return ((raw.array().rowwise() - mean.row(0).array()).rowwise() / scale.row(0).array()).matrix();
}

// Dataset ---------------------------------------------------------------------

double Dataset::balanced_pos_weight() const {
  double pos = 0, total = 0;
  for (std::size_t s : train) {
    const MatrixD& y = labels[final_day(s)];
    pos += y.sum();
    total += static_cast<double>(y.size());
  }
  return pos > 0 ? (total - pos) / pos : 1.0;
}

Dataset build_dataset(const RoadNetwork& net, std::vector<DayInput> days, int window, double test_fraction) {
  if (window < 1) throw Error(ErrorCode::BadValue, "window must be at least 1");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw Error(ErrorCode::BadValue, "test fraction in [0, 1)");
  std::sort(days.begin(), days.end(), [](const DayInput& a, const DayInput& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (days[i].date - days[i - 1].date != 1) {
      throw Error(ErrorCode::MissingDay, "day " + (days[i - 1].date + 1).iso() + " is missing");
    }
  }
  const auto t = static_cast<std::size_t>(window);
  if (days.size() < t) throw Error(ErrorCode::EmptyDataset, "fewer days than the window length");

  Dataset data;
  data.window = window;
  const auto n = static_cast<Eigen::Index>(net.segment_count());
  for (const DayInput& d : days) {
    if (d.labels.size() != net.segment_count()) throw Error(ErrorCode::ShapeMismatch, "labels do not match network");
    data.dates.push_back(d.date);
    data.raw.push_back(day_features(net, d.segment_volumes, d.weather, d.date));
    data.labels.push_back(Eigen::Map<const Eigen::VectorXd>(d.labels.data(), n));
  }

  const std::size_t windows = days.size() - t + 1;
  std::size_t n_test = windows >= 2 ? static_cast<std::size_t>(std::llround(test_fraction * windows)) : 0;
  if (test_fraction > 0 && windows >= 2) n_test = std::clamp<std::size_t>(n_test, 1, windows - 1);
  for (std::size_t s = 0; s < windows; ++s) (s < windows - n_test ? data.train : data.test).push_back(s);

  // Fit on every day covered by a training window.
  const std::size_t covered = data.train.back() + t;
  data.standardizer = Standardizer::fit(std::span<const MatrixD>(data.raw.data(), covered));
  for (const auto& r : data.raw) data.features.push_back(data.standardizer.apply(r));
  return data;
}

Dataset build_dataset(const Corpus& corpus, int window, double test_fraction) {
  std::vector<DayInput> days;
  days.reserve(corpus.day_count());
  const PrimalGraph& g = corpus.network().primal();
  for (std::size_t d = 0; d < corpus.day_count(); ++d) {
    days.push_back({corpus.days()[d], segment_volumes(g, corpus.base_volumes(d)), corpus.weather(d),
                    corpus.labels(d)});
  }
  return build_dataset(corpus.network(), std::move(days), window, test_fraction);
}

// Metrics ---------------------------------------------------------------------

double macro_recall(double recall_pos, double recall_neg) { return (recall_pos + recall_neg) / 2.0; }

EvalReport report_from_counts(long long tp, long long fp, long long tn, long long fn) {
  EvalReport r{tp, fp, tn, fn};
  const auto total = static_cast<double>(tp + fp + tn + fn);
  r.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  r.recall_pos = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.recall_neg = tn + fp > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
  r.f1 = tp > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
  r.macro_recall = macro_recall(r.recall_pos, r.recall_neg);
  return r;
}

EvalReport evaluate_predictions(std::span<const double> probs, std::span<const double> labels, double threshold) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "predictions and labels differ");
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool pos = labels[i] > 0.5;
    if (pred && pos) ++tp;
    else if (pred) ++fp;
    else if (pos) ++fn;
    else ++tn;
  }
  return report_from_counts(tp, fp, tn, fn);
}

std::string EvalReport::to_json() const {
  Json j{{"tp", tp},
         {"fp", fp},
         {"tn", tn},
         {"fn", fn},
         {"accuracy", accuracy},
         {"recall_pos", recall_pos},
         {"recall_neg", recall_neg},
         {"f1", f1},
         {"macro_recall", macro_recall}};
  return j.dump();
}

// Model -----------------------------------------------------------------------

CollisionModel::CollisionModel(CollisionModelConfig cfg) : cfg_(cfg) {
  if (cfg.features < 1 || cfg.hidden < 1 || cfg.layers < 1 || cfg.window < 1) {
    throw Error(ErrorCode::BadValue, "collision model dimensions must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  encoder_ = nn::Dense("encoder", cfg.features, cfg.hidden, nn::Activation::Relu, rng);
  for (int l = 0; l < cfg.layers; ++l) cells_.emplace_back("cell" + std::to_string(l), cfg.hidden, cfg.hidden, rng);
  head_ = nn::Dense("head", 2 * cfg.hidden, 1, nn::Activation::Sigmoid, rng);
  standardizer = Standardizer::identity(cfg.features);
}

nn::Tape::Var CollisionModel::forward(nn::Tape& t, std::span<const nn::Tape::Var> days,
                                      const Eigen::SparseMatrix<double>& adj) const {
  if (days.empty()) throw Error(ErrorCode::ShapeMismatch, "collision model needs at least one day");
  const Eigen::Index v = t.value(days.front()).rows();
  std::vector<nn::Tape::Var> h(cells_.size(), t.constant(MatrixD::Zero(v, cfg_.hidden)));
  nn::Tape::Var e{};
  for (const auto& x : days) {
    if (t.value(x).rows() != v || t.value(x).cols() != cfg_.features) {
      throw Error(ErrorCode::ShapeMismatch, "day features have the wrong shape");
    }
    e = encoder_.forward(t, x);
    nn::Tape::Var in = e;
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      h[l] = cells_[l].step(t, in, h[l], adj);
      in = h[l];
    }
  }
  return head_.forward(t, t.concat_cols(h.back(), e));
}

std::vector<double> CollisionModel::predict_standardized(std::span<const MatrixD> days, const DualGraph& graph) const {
  nn::Tape t(false);
  std::vector<nn::Tape::Var> xs;
  for (const auto& d : days) {
    if (d.rows() != static_cast<Eigen::Index>(graph.vertex_count())) {
      throw Error(ErrorCode::ShapeMismatch, "day features do not match the graph");
    }
    xs.push_back(t.constant(d));
  }
  const MatrixD& p = t.value(forward(t, xs, graph.normalized_adjacency()));
  std::vector<double> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = std::clamp(p(i, 0), nn::kProbFloor, 1.0 - nn::kProbFloor);
  }
  return out;
}

std::vector<double> CollisionModel::predict(std::span<const MatrixD> raw_days, const DualGraph& graph) const {
  std::vector<MatrixD> xs;
  xs.reserve(raw_days.size());
  for (const auto& d : raw_days) xs.push_back(standardizer.apply(d));
  return predict_standardized(xs, graph);
}

std::vector<nn::Parameter<double>*> CollisionModel::parameters() {
  std::vector<nn::Parameter<double>*> out = encoder_.parameters();
  for (auto& c : cells_) {
    auto p = c.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto p = head_.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<const nn::Parameter<double>*> CollisionModel::parameters() const {
  auto mut = const_cast<CollisionModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

nn::Checkpoint CollisionModel::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.kind = nn::CheckpointKind::Collision;
  Json cfg{{"model", "recurrent_graph"},
           {"features", cfg_.features},
           {"hidden", cfg_.hidden},
           {"layers", cfg_.layers},
           {"window", cfg_.window},
           {"seed", cfg_.seed}};
  cfg["feature_names"] = feature_names();
  ck.config = cfg.dump();
  for (const auto* p : parameters()) ck.add(p->name, p->value);
  ck.add("standardizer.mean", standardizer.mean);
  ck.add("standardizer.scale", standardizer.scale);
  return ck;
}

CollisionModel CollisionModel::from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.kind != nn::CheckpointKind::Collision) throw Error(ErrorCode::BadCheckpoint, "not a collision model");
  CollisionModelConfig cfg;
  try {
    const Json j = Json::parse(ck.config);
    cfg.features = j.at("features");
    cfg.hidden = j.at("hidden");
    cfg.layers = j.at("layers");
    cfg.window = j.at("window");
    cfg.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("bad model config: ") + e.what());
  }
  CollisionModel m(cfg);
  for (auto* p : m.parameters()) {
    const MatrixD& v = ck.block(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw Error(ErrorCode::BadCheckpoint, "block '" + p->name + "' has the wrong shape");
    }
    p->value = v;
  }
  m.standardizer.mean = ck.block("standardizer.mean");
  m.standardizer.scale = ck.block("standardizer.scale");
  if (m.standardizer.mean.cols() != cfg.features || m.standardizer.scale.cols() != cfg.features) {
    throw Error(ErrorCode::BadCheckpoint, "standardizer has the wrong width");
  }
  return m;
}

// Training --------------------------------------------------------------------

namespace {

double window_loss(const CollisionModel& model, const Dataset& data, std::size_t start,
                   const Eigen::SparseMatrix<double>& adj, double pos_weight, bool grads) {
  nn::Tape t(grads);
  std::vector<nn::Tape::Var> xs;
  for (const auto& d : data.window_features(start)) xs.push_back(t.constant(d));
  auto loss = t.weighted_bce(model.forward(t, xs, adj), data.labels[data.final_day(start)], pos_weight);
  if (grads) t.backward(loss);
  return t.value(loss)(0, 0);
}

const std::vector<std::size_t>& split_of(const Dataset& data, Split split) {
  return split == Split::Train ? data.train : data.test;
}

}  // namespace

CollisionTraining train_collision(const Dataset& data, const DualGraph& graph, CollisionModelConfig model_cfg,
                                  const CollisionTrainConfig& cfg) {
  if (data.train.empty()) throw Error(ErrorCode::EmptyDataset, "no training windows");
  model_cfg.window = data.window;
  model_cfg.features = static_cast<int>(data.features.front().cols());
  CollisionTraining out{CollisionModel(model_cfg), {}};
  CollisionModel& model = out.model;
  model.standardizer = data.standardizer;
  out.history.pos_weight = cfg.pos_weight.value_or(data.balanced_pos_weight());

  const auto& adj = graph.normalized_adjacency();
  auto params = model.parameters();
  nn::Adam adam({cfg.learning_rate});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order = data.train;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t s : order) {
      nn::zero_grads<double>(params);
      const double loss = window_loss(model, data, s, adj, out.history.pos_weight, true);
      if (!std::isfinite(loss)) throw Error(ErrorCode::Diverged, "training loss is not finite");
      total += loss;
      adam.step(params);
    }
    out.history.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  return out;
}

double dataset_loss(const CollisionModel& model, const Dataset& data, const DualGraph& graph, double pos_weight,
                    Split split) {
  const auto& windows = split_of(data, split);
  if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "split has no windows");
  double total = 0.0;
  for (std::size_t s : windows) total += window_loss(model, data, s, graph.normalized_adjacency(), pos_weight, false);
  return total / static_cast<double>(windows.size());
}

EvalReport evaluate(const CollisionModel& model, const Dataset& data, const DualGraph& graph, double threshold,
                    Split split) {
  const auto& windows = split_of(data, split);
  if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "split has no windows");
  std::vector<double> probs, labels;
  for (std::size_t s : windows) {
    auto p = model.predict_standardized(data.window_features(s), graph);
    probs.insert(probs.end(), p.begin(), p.end());
    const MatrixD& y = data.labels[data.final_day(s)];
    labels.insert(labels.end(), y.data(), y.data() + y.size());
  }
  return evaluate_predictions(probs, labels, threshold);
}

FeatureAttribution feature_importance(const CollisionModel& model, const Dataset& data, const DualGraph& graph,
                                      int steps, std::size_t max_samples, Split split) {
  const auto& windows = split_of(data, split);
  if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "split has no windows");
  const auto& adj = graph.normalized_adjacency();
  const auto v = static_cast<Eigen::Index>(graph.vertex_count());
  const int t_days = data.window;

  // F(stacked window) = mean probability of the final day.
  nn::ValueAndGradient<double> f = [&](const MatrixD& stacked) {
    nn::Tape t;
    auto in = t.input(stacked);
    std::vector<nn::Tape::Var> xs;
    for (int d = 0; d < t_days; ++d) xs.push_back(t.slice_rows(in, d * v, v));
    auto value = t.mean(model.forward(t, xs, adj));
    t.backward(value);
    return std::make_pair(t.value(value)(0, 0), t.grad(in));
  };

  FeatureAttribution out;
  out.mean.assign(static_cast<std::size_t>(data.features.front().cols()), 0.0);
  const std::size_t count = std::min(max_samples, windows.size());
  // Spread the chosen windows evenly over the split.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t s = windows[k * windows.size() / count];
    MatrixD stacked(v * t_days, data.features.front().cols());
    for (int d = 0; d < t_days; ++d) stacked.middleRows(d * v, v) = data.features[s + static_cast<std::size_t>(d)];
    const MatrixD baseline = MatrixD::Zero(stacked.rows(), stacked.cols());
    const MatrixD attr = nn::integrated_gradients<double>(f, stacked, baseline, steps);
    const Eigen::RowVectorXd per_feature = attr.colwise().sum();
    for (Eigen::Index j = 0; j < per_feature.size(); ++j) out.mean[static_cast<std::size_t>(j)] += per_feature(j);
    const double gap = f(stacked).first - f(baseline).first;
    out.completeness_error.push_back(gap != 0.0 ? std::abs(attr.sum() - gap) / std::abs(gap) : std::abs(attr.sum()));
  }
  for (double& m : out.mean) m /= static_cast<double>(count);
  return out;
}

}  // namespace openstreets
