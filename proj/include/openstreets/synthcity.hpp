#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "openstreets/collision.hpp"
#include "openstreets/corpus.hpp"
#include "openstreets/dates.hpp"
#include "openstreets/roadnet.hpp"

namespace openstreets {

enum class Scenario { Plain, DetourMagnet };

Scenario parse_scenario(const std::string& text);
std::string to_string(Scenario s);

/// Logistic label rule: logit = intercept + hazard*[curved double-level segment]
///   + speed*z_speed - cars*z_cars + precip*z_precip (+ magnet on the planted segment),
/// with z-scores taken over the generated corpus.
struct RiskCoefficients {
  double intercept = -7.5;
  double hazard = 11.0;
  double speed = 0.8;
  double cars = 0.6;
  double precip = 0.5;
  double magnet = 1.5;
};

struct SynthConfig {
  int rows = 8;
  int cols = 12;
  int days = 60;
  int trips_per_day = -1;  // < 0: 5 * rows * cols
  std::uint64_t seed = 0;
  RiskCoefficients coefficients;
  Scenario scenario = Scenario::Plain;
  Date start = Date::parse("2015-03-02");  // a Monday

  int effective_trips_per_day() const { return trips_per_day < 0 ? 5 * rows * cols : trips_per_day; }
  /// Throws Error(BadValue) when rows/cols < 3 or days < 10.
  void validate() const;
};

/// Planted optimum of the detour_magnet scenario.
struct AnswerKey {
  SegmentId magnet = 0;
  std::vector<SegmentId> alternatives;  // parallel segments between the magnet's endpoints
  SegmentId main_avenue = 0;            // busiest ordinary avenue segment
  std::vector<SegmentId> designated;    // a plausible but poor program: the busiest avenue's segments

  std::string to_json() const;
};

/// Generator-side z-score statistics, frozen so the rule can be re-evaluated.
struct GroundTruth {
  RiskCoefficients coefficients;
  double speed_mean = 0.0, speed_sd = 1.0;
  double cars_mean = 0.0, cars_sd = 1.0;
  double precip_mean = 0.0, precip_sd = 1.0;
  std::vector<double> extra_logit;  // per segment (the magnet boost)

  /// True collision probabilities of one day from its raw feature matrix.
  std::vector<double> probabilities(const MatrixD& raw_day) const;
};

/// Collision probabilities straight from the generator's rule (final day only).
class GroundTruthRisk : public RiskModel {
 public:
  explicit GroundTruthRisk(GroundTruth truth) : truth_(std::move(truth)) {}
  int window() const override { return 1; }
  std::vector<double> predict(std::span<const MatrixD> raw_days, const DualGraph& graph) const override;

 private:
  GroundTruth truth_;
};

struct SynthCorpus {
  SynthConfig config;
  std::string segments_csv, trips_csv, weather_csv, collisions_csv;
  GroundTruth truth;
  std::vector<std::vector<double>> probabilities;  // [day][segment] true label probabilities
  std::vector<std::vector<double>> labels;         // [day][segment]
  std::optional<AnswerKey> answer_key;
};

/// Grid of alternating one-way avenues (north-south) and two-way streets (east-west).
RoadNetwork synth_network(const SynthConfig& cfg);
/// segments.csv text of synth_network(cfg).
std::string gen_network(const SynthConfig& cfg);
/// Adds the detour magnet and returns the network with its answer key (main_avenue and
/// designated are filled in later from traffic). Throws Error(ScenarioUnsupported) for
/// the plain scenario.
std::pair<RoadNetwork, AnswerKey> plant_scenario(const SynthConfig& cfg, const RoadNetwork& net);
/// Trips, weather and collision labels for `net`.
SynthCorpus gen_days(const SynthConfig& cfg, const RoadNetwork& net, std::optional<AnswerKey> key = std::nullopt);
/// Full pipeline: network, optional scenario, days.
SynthCorpus generate(const SynthConfig& cfg);

/// Parses the generated CSVs through the regular ingestion path.
Corpus to_corpus(const SynthCorpus& synth, unsigned threads = 1);
/// Writes segments.csv, trips.csv, weather.csv, collisions.csv, truth.json and, when
/// present, answer_key.json into `dir` (created if needed).
void write_synth(const SynthCorpus& synth, const std::string& dir);

/// Bayes classifier of the known rule: positive when the true probability is at least
/// the empirical positive rate (the macro-recall optimal cut). Scores days [first, last).
EvalReport bayes_report(const SynthCorpus& synth, std::size_t first_day = 0,
                        std::size_t last_day = static_cast<std::size_t>(-1));

}  // namespace openstreets
