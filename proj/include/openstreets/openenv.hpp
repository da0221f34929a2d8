#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "openstreets/collision.hpp"
#include "openstreets/corpus.hpp"
#include "openstreets/routing.hpp"

namespace openstreets {

enum class InvalidReason { AlreadyOpen, NoCars, NoAlternative };

/// "already_open", "no_cars", "no_alternative".
const char* to_string(InvalidReason r) noexcept;

struct RewardComponents {
  double risk_total = 0.0;     // sum of predicted probabilities, opened segments excluded
  double density_total = 0.0;  // sum of volume / (lanes * length_m)
  double risk_norm = 1.0;
  double density_norm = 1.0;
};

/// One simulated day. Volumes already reflect every segment in `open_list`.
struct DayState {
  std::size_t day = 0;  // corpus day index
  Date date;
  std::vector<std::size_t> open_list;  // segment indices, in opening order
  ArcVolumes volumes;
  std::vector<double> segment_volumes;
  RewardComponents components;
  int steps = 0;
  bool done = false;

  bool is_open(std::size_t segment) const;
};

struct StepInfo {
  std::optional<InvalidReason> invalid;
  double risk_delta = 0.0;     // normalized, next - current
  double density_delta = 0.0;  // normalized, next - current
};

struct StepOutcome {
  DayState next;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EnvConfig {
  int horizon = 30;  // steps per episode
  std::size_t k = 3;
  ShareRule share_rule = ShareRule::Inverse;
  double risk_weight = 1.0;
  double density_weight = 1.0;
  std::uint64_t seed = 0;  // picks the normalizer day
};

/// Day-by-day street-opening environment over a corpus and a frozen risk model.
/// Not thread-safe: reroute plans are cached per instance.
class Environment {
 public:
  Environment(const Corpus& corpus, const RiskModel& risk, EnvConfig cfg = {});

  const Corpus& corpus() const noexcept { return *corpus_; }
  const RoadNetwork& network() const noexcept { return corpus_->network(); }
  const EnvConfig& config() const noexcept { return cfg_; }
  const RiskModel& risk_model() const noexcept { return *risk_; }

  /// Day whose base traffic fixed the normalizers.
  std::size_t normalizer_day() const noexcept { return norm_day_; }
  double risk_norm() const noexcept { return risk_norm_; }
  double density_norm() const noexcept { return density_norm_; }

  /// Days with a full risk window behind them (usable for same-day evaluation).
  std::vector<std::size_t> scoreable_days() const;
  /// Days from which a full-horizon episode fits in the corpus.
  std::vector<std::size_t> start_days() const;

  /// Throws Error(MissingDay) unless `start` and the horizon's days are present with
  /// the risk window before it.
  DayState reset(Date start) const;
  DayState reset_day(std::size_t day) const;
  /// State of `day` with `open_list` applied (no validity checks on the list).
  DayState make_state(std::size_t day, std::vector<std::size_t> open_list) const;

  /// Invalid action -> done, reward 0, state unchanged. Otherwise the opening is added,
  /// the next day's base traffic is rerouted around the whole open list, and the
  /// reward is the drop in normalized cost.
  StepOutcome step(const DayState& state, std::size_t segment) const;
  /// Same as step() but the date does not advance (what-if evaluation).
  StepOutcome step_same_day(const DayState& state, std::size_t segment) const;

  std::optional<InvalidReason> check_action(const DayState& state, std::size_t segment) const;
  std::vector<std::size_t> valid_actions(const DayState& state) const;

  double density(const std::vector<double>& segment_volumes) const;
  double cost(const RewardComponents& c) const;
  double cost(const DayState& s) const { return cost(s.components); }
  double compute_reward(const DayState& cur, const DayState& next) const { return cost(cur) - cost(next); }

  /// Raw features of the state's day (opened segments carry zero volume).
  MatrixD state_features(const DayState& s) const;

  /// Replacement routes for the last entry of `prefix`, avoiding all of `prefix`.
  /// nullptr when some direction has no alternative.
  std::shared_ptr<const ReroutePlan> plan_for(const std::vector<std::size_t>& prefix) const;

 private:
  StepOutcome transition(const DayState& state, std::size_t segment, std::size_t target_day) const;
  ArcVolumes apply_open_list(std::size_t day, const std::vector<std::size_t>& open_list) const;
  RewardComponents evaluate(std::size_t day, const std::vector<std::size_t>& open_list,
                            const ArcVolumes& today) const;

  const Corpus* corpus_;
  const RiskModel* risk_;
  EnvConfig cfg_;
  std::size_t norm_day_ = 0;
  double risk_norm_ = 1.0;
  double density_norm_ = 1.0;
  mutable std::map<std::vector<std::size_t>, std::shared_ptr<const ReroutePlan>> plans_;
};

// What-if ---------------------------------------------------------------------

struct InvalidOpen {
  SegmentId segment_id = 0;
  InvalidReason reason = InvalidReason::AlreadyOpen;
};

struct WhatIfResult {
  Date date;
  std::vector<SegmentId> applied;  // the opens that were valid, in order
  std::vector<InvalidOpen> invalid;
  double risk_delta = 0.0;  // normalized, after - before
  double density_delta = 0.0;
  double reward = 0.0;  // cost(before) - cost(after)
  std::map<SegmentId, double> volume_changes;  // segments whose volume moved

  std::string to_json() const;
};

/// Applies `opens` in order on one day through step_same_day; invalid opens are
/// reported and skipped. Unknown ids throw Error(UnknownSegmentId).
WhatIfResult whatif(const Environment& env, Date date, const std::vector<SegmentId>& opens);

/// One JSON line of an episode trace.
std::string trace_line(const DayState& state, std::optional<SegmentId> action, const StepOutcome& outcome);

}  // namespace openstreets
