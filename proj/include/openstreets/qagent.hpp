#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "openstreets/collision.hpp"
#include "openstreets/nn/checkpoint.hpp"
#include "openstreets/nn/layers.hpp"
#include "openstreets/openenv.hpp"

namespace openstreets {

// Q-functions -----------------------------------------------------------------

/// Input of a Q-function. For the graph network: one row per segment and the dual
/// graph with opened segments detached. For tabular mode: a 1 x S one-hot row and no graph.
struct QState {
  std::shared_ptr<const MatrixD> features;
  std::shared_ptr<const DualGraph> graph;
};

/// Anything producing Q-values on a tape. Action a is the row-major flat entry a of
/// the output matrix.
class QFunction {
 public:
  virtual ~QFunction() = default;

  virtual nn::Tape::Var forward(nn::Tape& tape, const QState& s) const = 0;
  virtual std::vector<nn::Parameter<double>*> parameters() = 0;
  virtual std::unique_ptr<QFunction> clone() const = 0;

  std::vector<const nn::Parameter<double>*> parameters() const;
  /// Flat Q-values without recording gradients.
  std::vector<double> q_values(const QState& s) const;
  /// Target sync: copies every parameter value (shapes must agree).
  void copy_parameters_from(const QFunction& other);
};

/// Q(s, a) = table(s, a); states are one-hot rows.
class TabularQ : public QFunction {
 public:
  TabularQ(std::size_t states, std::size_t actions);

  nn::Tape::Var forward(nn::Tape& tape, const QState& s) const override;
  std::vector<nn::Parameter<double>*> parameters() override { return {&table_}; }
  std::unique_ptr<QFunction> clone() const override { return std::make_unique<TabularQ>(*this); }

  const MatrixD& table() const noexcept { return table_.value; }
  static QState one_hot(std::size_t state, std::size_t states);

 private:
  nn::Parameter<double> table_;
};

struct QNetworkConfig {
  int features = kFeatureCount + 1;  // day features + is-open column
  int hidden = 16;
  int layers = 2;
  std::uint64_t seed = 0;
};

/// E = relu(X W + b), graph convolutions H_l = relu(A H_{l-1} Theta_l) from H_0 = E,
/// then a linear head on [H_L, E]: one Q-value per segment.
class QNetwork : public QFunction {
 public:
  explicit QNetwork(QNetworkConfig cfg = {});

  const QNetworkConfig& config() const noexcept { return cfg_; }

  nn::Tape::Var forward(nn::Tape& tape, const QState& s) const override;
  std::vector<nn::Parameter<double>*> parameters() override;
  using QFunction::parameters;
  std::unique_ptr<QFunction> clone() const override { return std::make_unique<QNetwork>(*this); }

  /// Applied to the raw input (day features + is-open) before the encoder.
  Standardizer standardizer;

  nn::Checkpoint to_checkpoint() const;
  static QNetwork from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  QNetworkConfig cfg_;
  nn::Dense encoder_;
  std::vector<nn::GraphConvLayer> convs_;
  nn::Dense head_;
};

/// Raw network input for a state: day features plus the is-open indicator column.
MatrixD q_input(const Environment& env, const DayState& state);

/// Per-segment Q from a raw input. Throws Error(ShapeMismatch) when the input does not
/// match the network width or the graph size.
std::vector<double> q_forward(const QNetwork& qnet, const MatrixD& raw_input, const DualGraph& graph);

enum class OpenHandling {
  Mask,    // opened vertices stay, detached, flagged by the is-open column
  Remove,  // opened vertices are deleted and the graph is compacted
};

/// Standardized observation of `state` with opened segments detached.
QState observe(const QNetwork& qnet, const Environment& env, const DayState& state);

/// Per-segment Q of a state; opened segments get -infinity.
std::vector<double> segment_q_values(const QNetwork& qnet, const Environment& env, const DayState& state,
                                     OpenHandling handling = OpenHandling::Mask);

// Control ---------------------------------------------------------------------

/// With probability epsilon a uniform draw from `valid`, otherwise the valid action of
/// largest Q (lowest index on ties). Throws Error(NoValidActions) when `valid` is empty.
std::size_t select_action(std::span<const double> q, std::span<const std::size_t> valid, double epsilon,
                          std::mt19937_64& rng);

struct RankedSegment {
  SegmentId segment_id = 0;
  double q_value = 0.0;
  int rank = 0;  // 1-based
};

/// Descending by Q with ascending id on ties; -infinity entries are skipped.
std::vector<RankedSegment> rank_segments(const RoadNetwork& net, std::span<const double> q, std::size_t top = 121);
std::vector<RankedSegment> rank_segments(const QNetwork& qnet, const Environment& env, const DayState& state,
                                         std::size_t top = 121);
/// [{"segment_id":..,"q_value":..,"rank":..}, ...]
std::string rankings_json(const std::vector<RankedSegment>& ranking);

// Learning --------------------------------------------------------------------

struct Experience {
  QState state;
  std::size_t action = 0;
  double reward = 0.0;
  QState next;
  std::vector<std::size_t> next_valid;  // bootstrap max is taken over these
  bool done = false;
};

/// FIFO replay memory.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Evicts the oldest entry when full. Throws Error(Diverged) on a non-finite reward.
  void push(Experience e);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Experience& at(std::size_t i) const { return items_[i]; }
  /// Uniform draw with replacement.
  std::vector<const Experience*> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Experience> items_;
};

struct TdLoss {
  double loss = 0.0;                // mean squared TD error
  std::vector<double> q;            // Q(s, a) per sample
  std::vector<double> targets;      // r + gamma * max_a' Q_target(s', a'), or r when done
};

/// Mean squared TD error. The target network enters as a constant; with `grads` the
/// gradient is added into the online network's parameters. Throws Error(EmptyBatch).
TdLoss td_loss(std::span<const Experience* const> batch, const QFunction& online, const QFunction& target,
               double gamma, bool grads = true);

struct QConfig {
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of the planned steps
  std::size_t replay_capacity = 50000;
  std::size_t batch_size = 64;
  int target_sync = 250;  // updates between target copies
  int updates_per_step = 1;
  int episodes = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  /// Throws Error(BadValue) unless 0 <= gamma < 1 and the sizes are positive.
  void validate() const;
  double epsilon(long step, long planned_steps) const;
};

struct Transition {
  double reward = 0.0;
  bool done = false;  // terminal: no bootstrap
};

/// Episodic control problem seen through a Q-function's input.
class QProblem {
 public:
  virtual ~QProblem() = default;
  virtual int horizon() const = 0;
  virtual void begin_episode(int episode, std::mt19937_64& rng) = 0;
  virtual QState observation() const = 0;
  virtual std::vector<std::size_t> valid_actions() const = 0;
  virtual Transition act(std::size_t action) = 0;
};

struct QHistory {
  std::vector<double> episode_rewards;
  std::vector<double> losses;  // one per update
  long steps = 0;
  long updates = 0;
  long syncs = 0;
};

/// Epsilon-greedy rollouts into replay, cfg.updates_per_step batch updates per step once
/// the buffer holds a batch, target copies every cfg.target_sync updates.
QHistory train_q(QProblem& problem, QFunction& online, const QConfig& cfg);

/// Five-state deterministic chain: action 0 moves left, 1 moves right (clamped at the
/// ends). Taking "right" at the last state pays 1, "left" at the first pays 0.2, all
/// else 0. Episodes start at a random state and are cut after `horizon` steps without
/// being terminal.
class ChainMdp : public QProblem {
 public:
  static constexpr std::size_t kStates = 5;
  static constexpr std::size_t kActions = 2;

  explicit ChainMdp(int horizon = 10) : horizon_(horizon) {}

  int horizon() const override { return horizon_; }
  void begin_episode(int episode, std::mt19937_64& rng) override;
  QState observation() const override { return TabularQ::one_hot(state_, kStates); }
  std::vector<std::size_t> valid_actions() const override { return {0, 1}; }
  Transition act(std::size_t action) override;

  static std::size_t next_state(std::size_t s, std::size_t a);
  static double reward(std::size_t s, std::size_t a);
  /// Q* by value iteration (kStates x kActions).
  static MatrixD value_iteration(double gamma, double tolerance = 1e-12);

 private:
  int horizon_;
  std::size_t state_ = 0;
};

/// The street-opening environment as a Q-learning problem. Episodes start on the
/// environment's start days, cycled in a seeded order.
class EnvProblem : public QProblem {
 public:
  EnvProblem(const Environment& env, const QNetwork& qnet, std::uint64_t seed);

  int horizon() const override { return env_->config().horizon; }
  void begin_episode(int episode, std::mt19937_64& rng) override;
  QState observation() const override { return obs_; }
  std::vector<std::size_t> valid_actions() const override { return valid_; }
  Transition act(std::size_t action) override;

  const DayState& state() const noexcept { return state_; }

 private:
  void refresh();

  const Environment* env_;
  const QNetwork* qnet_;
  std::vector<std::size_t> starts_;
  DayState state_;
  QState obs_;
  std::vector<std::size_t> valid_;
};

/// Standardizer for Q inputs fitted on the base traffic of the environment's scoreable days.
Standardizer fit_q_standardizer(const Environment& env);

struct QTraining {
  QNetwork network;
  QHistory history;
};

QTraining train_q(const Environment& env, QNetworkConfig net_cfg, const QConfig& cfg);

// Policy comparison -----------------------------------------------------------

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

struct PolicySummary {
  std::vector<double> episode_rewards;
  std::vector<Date> start_dates;
  BoxStats stats;
};

struct PolicyComparison {
  std::map<std::string, PolicySummary> policies;  // "q_top", "random", "designated"
  std::vector<std::string> warnings;

  std::string to_json() const;
};

/// Runs every policy from the same seeded start days. q_top follows the greedy valid
/// action of `qnet` (skipped when null), random draws uniformly among valid actions,
/// designated opens the listed segments in order and skips those that are not valid.
/// Throws Error(UnknownSegmentId) for a designated id outside the network.
PolicyComparison compare_policies(const Environment& env, const QNetwork* qnet,
                                  const std::vector<SegmentId>& designated, int episodes, std::uint64_t seed);

}  // namespace openstreets
