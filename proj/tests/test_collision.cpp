#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "openstreets/collision.hpp"
#include "openstreets/synthcity.hpp"
#include "support.hpp"

using namespace openstreets;
using namespace testsupport;

namespace {

std::vector<DayInput> toy_days(const RoadNetwork& net, int n, std::mt19937_64& rng, double positive_rate = 0.2) {
  std::bernoulli_distribution coin(positive_rate);
  std::uniform_real_distribution<double> vol(0.0, 50.0), rain(0.0, 5.0);
  std::vector<DayInput> days;
  for (int d = 0; d < n; ++d) {
    DayInput in;
    in.date = Date::parse("2015-03-02") + d;
    in.weather = {rain(rng), 0.0, 10.0 + d};
    for (std::size_t s = 0; s < net.segment_count(); ++s) {
      in.segment_volumes.push_back(vol(rng));
      in.labels.push_back(coin(rng) ? 1.0 : 0.0);
    }
    days.push_back(std::move(in));
  }
  return days;
}

RoadNetwork toy_network() {
  return network_of({seg(1, 1, 2, 100.0), seg(2, 2, 3, 150.0, true, 2), seg(3, 3, 4, 80.0), seg(4, 4, 1, 120.0),
                     seg(5, 1, 3, 200.0, false, 3, 50.0)});
}

/// Small trained model shared by the probes below.
struct Trained {
  SynthCorpus synth;
  Corpus corpus;
  Dataset data;
  CollisionTraining training;
};

Trained train_small(std::uint64_t seed, int epochs = 12) {
  SynthConfig cfg;
  cfg.rows = 6;
  cfg.cols = 6;
  cfg.days = 36;
  cfg.seed = seed;
  SynthCorpus sc = generate(cfg);
  Corpus corpus = to_corpus(sc);
  Dataset data = build_dataset(corpus, 3);
  CollisionModelConfig mc = CollisionModelConfig::lite();
  mc.window = 3;
  mc.seed = seed;
  CollisionTrainConfig tc;
  tc.epochs = epochs;
  tc.seed = seed;
  auto training = train_collision(data, corpus.network().dual(), mc, tc);
  return {std::move(sc), std::move(corpus), std::move(data), std::move(training)};
}

std::string bytes(const nn::Checkpoint& c) {
  std::ostringstream out;
  nn::write_checkpoint(out, c);
  return out.str();
}

const Trained& shared_model() {
  static const Trained t = train_small(0, 20);
  return t;
}

}  // namespace

// Dataset ---------------------------------------------------------------------

TEST_CASE("sliding windows") {
  RoadNetwork net = toy_network();
  std::mt19937_64 rng(1);
  CHECK(build_dataset(net, toy_days(net, 10, rng), 3).train.size() +
            build_dataset(net, toy_days(net, 10, rng), 3).test.size() ==
        8);
  Dataset one = build_dataset(net, toy_days(net, 10, rng), 1);
  CHECK(one.train.size() + one.test.size() == 10);
}

TEST_CASE("dataset keeps every row, splits chronologically and standardizes on train") {
  RoadNetwork net = toy_network();
  std::mt19937_64 rng(2);
  Dataset data = build_dataset(net, toy_days(net, 20, rng), 4, 0.25);
  CHECK(data.raw.size() == 20);
  for (const auto& f : data.features) CHECK(f.rows() == static_cast<Eigen::Index>(net.segment_count()));
  REQUIRE_FALSE(data.test.empty());
  std::size_t last_train = 0, first_test = 1000;
  for (std::size_t s : data.train) last_train = std::max(last_train, data.final_day(s));
  for (std::size_t s : data.test) first_test = std::min(first_test, data.final_day(s));
  CHECK(data.dates[last_train] < data.dates[first_test]);

  // Moments over the days covered by training windows.
  std::size_t covered = last_train + 1;
  MatrixD stacked(static_cast<Eigen::Index>(covered * net.segment_count()), kFeatureCount);
  for (std::size_t d = 0; d < covered; ++d)
    stacked.middleRows(static_cast<Eigen::Index>(d * net.segment_count()), net.segment_count()) = data.features[d];
  for (Eigen::Index c = 0; c < kFeatureCount; ++c) {
    const double mean = stacked.col(c).mean();
    const double var = (stacked.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-9);
    // Constant columns keep scale 1 and standardize to all zeros.
    if (var > 0) CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
}

TEST_CASE("dataset errors") {
  RoadNetwork net = toy_network();
  std::mt19937_64 rng(3);
  auto days = toy_days(net, 10, rng);
  days[5].date = days[5].date + 30;
  CHECK_THROWS_WITH_AS(build_dataset(net, days, 3), doctest::Contains("MissingDay"), Error);
  CHECK_THROWS_WITH_AS(build_dataset(net, toy_days(net, 2, rng), 3), doctest::Contains("EmptyDataset"), Error);
}

TEST_CASE("balanced pos_weight counts the training imbalance") {
  RoadNetwork net = network_of({seg(1, 1, 2), seg(2, 2, 3), seg(3, 3, 4), seg(4, 4, 5), seg(5, 5, 6), seg(6, 6, 7),
                                seg(7, 7, 8), seg(8, 8, 9), seg(9, 9, 10), seg(10, 10, 11)});
  std::mt19937_64 rng(4);
  auto days = toy_days(net, 10, rng);
  for (auto& d : days) std::fill(d.labels.begin(), d.labels.end(), 0.0);
  days[0].labels[3] = 1.0;  // 1 positive in 100 rows
  Dataset data = build_dataset(net, days, 1, 0.0);
  CHECK(data.balanced_pos_weight() == doctest::Approx(99.0));
}

// Metrics ---------------------------------------------------------------------

TEST_CASE("metric arithmetic") {
  CHECK(macro_recall(0.78, 0.74) == doctest::Approx(0.76).epsilon(1e-15));

  EvalReport r = report_from_counts(3, 1, 5, 1);
  CHECK(r.recall_pos == doctest::Approx(0.75));
  CHECK(r.recall_neg == doctest::Approx(5.0 / 6.0));
  CHECK(r.macro_recall == doctest::Approx(0.7917).epsilon(1e-4));
  CHECK(r.f1 == doctest::Approx(0.75));

  auto json = nlohmann::json::parse(r.to_json());
  for (const char* key : {"tp", "fp", "tn", "fn", "recall_pos", "recall_neg", "f1", "macro_recall"})
    CHECK(json.contains(key));
}

TEST_CASE("predict-all-negative at 1% positives: high accuracy, macro recall 0.5") {
  std::vector<double> labels(1000, 0.0), probs(1000, 0.01);
  for (int i = 0; i < 10; ++i) labels[i * 100] = 1.0;
  EvalReport r = evaluate_predictions(probs, labels);
  CHECK(r.accuracy == doctest::Approx(0.99));
  CHECK(r.macro_recall == doctest::Approx(0.5));
}

TEST_CASE("macro recall ignores class sizes; thresholds 0 and 1 are the extremes") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0, 1);
  std::vector<double> probs, labels;
  for (int i = 0; i < 300; ++i) {
    labels.push_back(i % 7 == 0 ? 1.0 : 0.0);
    probs.push_back(std::clamp(labels.back() * 0.3 + 0.7 * unit(rng), 1e-7, 1 - 1e-7));
  }
  EvalReport base = evaluate_predictions(probs, labels);
  auto p2 = probs, l2 = labels;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (labels[i] == 0.0) p2.push_back(probs[i]), l2.push_back(0.0);
  EvalReport doubled = evaluate_predictions(p2, l2);
  CHECK(doubled.macro_recall == base.macro_recall);
  CHECK(doubled.accuracy != base.accuracy);

  CHECK(evaluate_predictions(probs, labels, 0.0).recall_pos == 1.0);
  CHECK(evaluate_predictions(probs, labels, 1.0).recall_neg == 1.0);
  CHECK_THROWS_AS(evaluate_predictions(probs, std::vector<double>(3)), Error);
}

// Model -----------------------------------------------------------------------

TEST_CASE("predictions: one per segment, equal for symmetric duplicates") {
  // Segments 1 and 2 are parallel twins between the same intersections.
  RoadNetwork net = network_of({seg(1, 1, 2, 100.0), seg(2, 1, 2, 100.0), seg(3, 2, 3, 80.0), seg(4, 3, 1, 90.0)});
  CollisionModel model(CollisionModelConfig{kFeatureCount, 8, 2, 2, 3});
  std::vector<double> vols{10, 10, 5, 7};
  std::vector<MatrixD> days;
  for (int d = 0; d < 2; ++d) days.push_back(day_features(net, vols, {1.0, 0.0, 12.0}, Date::parse("2015-03-02") + d));
  auto p = model.predict(days, net.dual());
  REQUIRE(p.size() == net.segment_count());
  CHECK(p[0] == doctest::Approx(p[1]).epsilon(1e-14));
  for (double x : p) CHECK((x > 0.0 && x < 1.0));
  CHECK(model.predict(days, net.dual()) == p);
  std::vector<MatrixD> wrong{MatrixD::Zero(3, kFeatureCount), MatrixD::Zero(3, kFeatureCount)};
  CHECK_THROWS_AS(model.predict(wrong, net.dual()), Error);
}

TEST_CASE("all-zero labels: the model learns to predict negatives") {
  RoadNetwork net = toy_network();
  std::mt19937_64 rng(6);
  auto days = toy_days(net, 14, rng);
  for (auto& d : days) std::fill(d.labels.begin(), d.labels.end(), 0.0);
  Dataset data = build_dataset(net, days, 2);
  CollisionTrainConfig tc;
  tc.epochs = 30;
  auto trained = train_collision(data, net.dual(), CollisionModelConfig{kFeatureCount, 4, 1, 2, 0}, tc);
  EvalReport r = evaluate(trained.model, data, net.dual());
  CHECK(r.recall_neg == 1.0);
  CHECK(trained.history.epoch_loss.back() < trained.history.epoch_loss.front());
}

TEST_CASE("training on synthcity: loss falls, runs are deterministic, risk is learnable") {
  const Trained& t = shared_model();
  const auto& loss = t.training.history.epoch_loss;
  REQUIRE(loss.size() == 20);
  CHECK(loss[19] < loss[0]);

  Trained again = train_small(0, 20);
  CHECK(again.training.history.epoch_loss == loss);
  CHECK(bytes(again.training.model.to_checkpoint()) == bytes(t.training.model.to_checkpoint()));

  EvalReport r = evaluate(t.training.model, t.data, t.corpus.network().dual());
  CHECK(r.macro_recall > 0.75);
}

TEST_CASE("checkpoint round trip preserves predictions") {
  const Trained& t = shared_model();
  CollisionModel back = CollisionModel::from_checkpoint(t.training.model.to_checkpoint());
  std::vector<MatrixD> raw(t.data.raw.begin() + static_cast<std::ptrdiff_t>(t.data.test.front()),
                           t.data.raw.begin() + static_cast<std::ptrdiff_t>(t.data.test.front() + 3));
  CHECK(back.predict(raw, t.corpus.network().dual()) == t.training.model.predict(raw, t.corpus.network().dual()));
}

TEST_CASE("raising the speed-limit feature raises mean predicted risk") {
  const Trained& t = shared_model();
  const auto& graph = t.corpus.network().dual();
  std::size_t start = t.data.test.front();
  std::vector<MatrixD> raw(t.data.raw.begin() + static_cast<std::ptrdiff_t>(start),
                           t.data.raw.begin() + static_cast<std::ptrdiff_t>(start + 3));
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  const double before = mean(t.training.model.predict(raw, graph));
  for (auto& day : raw) day.col(kSpeed).array() += 10.0;
  CHECK(mean(t.training.model.predict(raw, graph)) > before);
}

TEST_CASE("feature importance") {
  SUBCASE("zero-weight model attributes nothing") {
    const Trained& t = shared_model();
    CollisionModel zero(t.training.model.config());
    for (auto* p : zero.parameters()) p->value.setZero();
    auto fa = feature_importance(zero, t.data, t.corpus.network().dual(), 16, 2);
    for (double a : fa.mean) CHECK(a == 0.0);
  }
  SUBCASE("completeness within 1% per sample") {
    const Trained& t = shared_model();
    auto fa = feature_importance(t.training.model, t.data, t.corpus.network().dual(), 256, 4);
    REQUIRE(fa.completeness_error.size() == 4);
    for (double e : fa.completeness_error) CHECK(e < 0.01);
  }
}

// The hazard term carries the generator's dominant positive coefficient and is
// encoded by the double-level and curve-radius columns.
TEST_CASE("hazard features get positive mean attribution in at least 9 of 10 seeds") {
  int double_level = 0, curve = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.rows = 6;
    cfg.cols = 6;
    cfg.seed = seed;
    Corpus corpus = to_corpus(generate(cfg));
    Dataset data = build_dataset(corpus, 7);
    CollisionModelConfig mc = CollisionModelConfig::lite();
    mc.seed = seed;
    CollisionTrainConfig tc;
    tc.seed = seed;
    auto trained = train_collision(data, corpus.network().dual(), mc, tc);
    auto fa = feature_importance(trained.model, data, corpus.network().dual());
    double_level += fa.mean[kDoubleLevel] > 0.0;
    curve += fa.mean[kCurveRadius] > 0.0;
  }
  CHECK(double_level >= 9);
  CHECK(curve >= 9);
}
