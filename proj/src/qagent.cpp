#include "openstreets/qagent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "openstreets/error.hpp"
#include "openstreets/nn/adam.hpp"

namespace openstreets {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kMinusInf = -std::numeric_limits<double>::infinity();

std::shared_ptr<const DualGraph> borrow(const DualGraph& g) {
  return std::shared_ptr<const DualGraph>(std::shared_ptr<void>(), &g);
}

std::vector<double> flat(const MatrixD& m) { return {m.data(), m.data() + m.size()}; }

// Drops the flagged vertices and renumbers the rest in order.
DualGraph compact(const DualGraph& g, std::span<const char> removed, std::vector<std::size_t>& kept) {
  std::vector<std::size_t> remap(g.vertex_count(), static_cast<std::size_t>(-1));
  kept.clear();
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (removed[v]) continue;
    remap[v] = kept.size();
    kept.push_back(v);
  }
  std::vector<std::vector<std::size_t>> nbrs(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t u : g.neighbors(kept[i])) {
      if (!removed[u]) nbrs[i].push_back(remap[u]);
    }
  }
  return DualGraph(std::move(nbrs));
}

}  // namespace

// Q-functions -----------------------------------------------------------------

std::vector<const nn::Parameter<double>*> QFunction::parameters() const {
  auto mut = const_cast<QFunction*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::vector<double> QFunction::q_values(const QState& s) const {
  nn::Tape t(false);
  return flat(t.value(forward(t, s)));
}

void QFunction::copy_parameters_from(const QFunction& other) {
  auto mine = parameters();
  auto theirs = other.parameters();
  if (mine.size() != theirs.size()) throw Error(ErrorCode::ShapeMismatch, "Q-functions differ in parameter count");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->value.rows() != theirs[i]->value.rows() || mine[i]->value.cols() != theirs[i]->value.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter '" + mine[i]->name + "' differs in shape");
    }
    mine[i]->value = theirs[i]->value;
  }
}

TabularQ::TabularQ(std::size_t states, std::size_t actions)
    : table_("table", MatrixD::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions))) {}

nn::Tape::Var TabularQ::forward(nn::Tape& t, const QState& s) const {
  if (!s.features || s.features->rows() != 1 || s.features->cols() != table_.value.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "tabular Q expects a one-hot state row");
  }
  return t.matmul(t.constant(*s.features), t.param(table_));
}

QState TabularQ::one_hot(std::size_t state, std::size_t states) {
  auto x = std::make_shared<MatrixD>(MatrixD::Zero(1, static_cast<Eigen::Index>(states)));
  (*x)(0, static_cast<Eigen::Index>(state)) = 1.0;
  return {std::move(x), nullptr};
}

QNetwork::QNetwork(QNetworkConfig cfg) : cfg_(cfg) {
  if (cfg.features < 1 || cfg.hidden < 1 || cfg.layers < 0) {
    throw Error(ErrorCode::BadValue, "Q-network dimensions must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  encoder_ = nn::Dense("encoder", cfg.features, cfg.hidden, nn::Activation::Relu, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    convs_.emplace_back("conv" + std::to_string(l) + ".theta", nn::xavier_uniform<double>(cfg.hidden, cfg.hidden, rng),
                        nn::Activation::Relu);
  }
  head_ = nn::Dense("head", 2 * cfg.hidden, 1, nn::Activation::Identity, rng);
  standardizer = Standardizer::identity(cfg.features);
}

nn::Tape::Var QNetwork::forward(nn::Tape& t, const QState& s) const {
  if (!s.features || !s.graph) throw Error(ErrorCode::ShapeMismatch, "Q-network needs features and a graph");
  if (s.features->rows() != static_cast<Eigen::Index>(s.graph->vertex_count()) ||
      s.features->cols() != cfg_.features) {
    throw Error(ErrorCode::ShapeMismatch, "Q input is " + std::to_string(s.features->rows()) + "x" +
                                              std::to_string(s.features->cols()) + ", expected " +
                                              std::to_string(s.graph->vertex_count()) + "x" +
                                              std::to_string(cfg_.features));
  }
  const auto& adj = s.graph->normalized_adjacency();
  auto e = encoder_.forward(t, t.constant(*s.features));
  auto h = e;
  for (const auto& c : convs_) h = c.forward(t, h, adj);
  return head_.forward(t, t.concat_cols(h, e));
}

std::vector<nn::Parameter<double>*> QNetwork::parameters() {
  std::vector<nn::Parameter<double>*> out = encoder_.parameters();
  for (auto& c : convs_) out.push_back(&c.theta);
  auto p = head_.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

nn::Checkpoint QNetwork::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.kind = nn::CheckpointKind::QNetwork;
  Json cfg{{"model", "graph_q"},
           {"features", cfg_.features},
           {"hidden", cfg_.hidden},
           {"layers", cfg_.layers},
           {"seed", cfg_.seed}};
  std::vector<std::string> names(feature_names().begin(), feature_names().end());
  names.push_back("is_open");
  cfg["feature_names"] = names;
  ck.config = cfg.dump();
  for (const auto* p : parameters()) ck.add(p->name, p->value);
  ck.add("standardizer.mean", standardizer.mean);
  ck.add("standardizer.scale", standardizer.scale);
  return ck;
}

QNetwork QNetwork::from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.kind != nn::CheckpointKind::QNetwork) throw Error(ErrorCode::BadCheckpoint, "not a Q-network");
  QNetworkConfig cfg;
  try {
    const Json j = Json::parse(ck.config);
    cfg.features = j.at("features");
    cfg.hidden = j.at("hidden");
    cfg.layers = j.at("layers");
    cfg.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("bad Q-network config: ") + e.what());
  }
  QNetwork q(cfg);
  for (auto* p : q.parameters()) {
    const MatrixD& v = ck.block(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw Error(ErrorCode::BadCheckpoint, "block '" + p->name + "' has the wrong shape");
    }
    p->value = v;
  }
  q.standardizer.mean = ck.block("standardizer.mean");
  q.standardizer.scale = ck.block("standardizer.scale");
  if (q.standardizer.mean.cols() != cfg.features || q.standardizer.scale.cols() != cfg.features) {
    throw Error(ErrorCode::BadCheckpoint, "standardizer has the wrong width");
  }
  return q;
}

MatrixD q_input(const Environment& env, const DayState& state) {
  const MatrixD f = env.state_features(state);
  MatrixD x(f.rows(), f.cols() + 1);
  x.leftCols(f.cols()) = f;
  for (Eigen::Index i = 0; i < f.rows(); ++i) x(i, f.cols()) = state.is_open(static_cast<std::size_t>(i)) ? 1.0 : 0.0;
  return x;
}

std::vector<double> q_forward(const QNetwork& qnet, const MatrixD& raw_input, const DualGraph& graph) {
  if (raw_input.cols() != qnet.config().features) {
    throw Error(ErrorCode::ShapeMismatch, "Q input has " + std::to_string(raw_input.cols()) + " columns, expected " +
                                              std::to_string(qnet.config().features));
  }
  QState s{std::make_shared<const MatrixD>(qnet.standardizer.apply(raw_input)), borrow(graph)};
  return qnet.q_values(s);
}

QState observe(const QNetwork& qnet, const Environment& env, const DayState& state) {
  QState s;
  s.features = std::make_shared<const MatrixD>(qnet.standardizer.apply(q_input(env, state)));
  if (state.open_list.empty()) {
    s.graph = borrow(env.network().dual());
  } else {
    std::vector<char> opened(env.network().segment_count(), 0);
    for (std::size_t i : state.open_list) opened[i] = 1;
    s.graph = std::make_shared<const DualGraph>(env.network().dual().without(opened));
  }
  return s;
}

std::vector<double> segment_q_values(const QNetwork& qnet, const Environment& env, const DayState& state,
                                     OpenHandling handling) {
  std::vector<double> q;
  if (handling == OpenHandling::Mask || state.open_list.empty()) {
    q = qnet.q_values(observe(qnet, env, state));
  } else {
    std::vector<char> opened(env.network().segment_count(), 0);
    for (std::size_t i : state.open_list) opened[i] = 1;
    std::vector<std::size_t> kept;
    DualGraph g = compact(env.network().dual(), opened, kept);
    const MatrixD x = qnet.standardizer.apply(q_input(env, state));
    MatrixD rows(static_cast<Eigen::Index>(kept.size()), x.cols());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(kept[i]));
    }
    const std::vector<double> part =
        qnet.q_values({std::make_shared<const MatrixD>(std::move(rows)), std::make_shared<const DualGraph>(std::move(g))});
    q.assign(opened.size(), 0.0);
    for (std::size_t i = 0; i < kept.size(); ++i) q[kept[i]] = part[i];
  }
  for (std::size_t i : state.open_list) q[i] = kMinusInf;
  return q;
}

// Control ---------------------------------------------------------------------

std::size_t select_action(std::span<const double> q, std::span<const std::size_t> valid, double epsilon,
                          std::mt19937_64& rng) {
  if (valid.empty()) throw Error(ErrorCode::NoValidActions, "no valid action to select");
  for (std::size_t a : valid) {
    if (a >= q.size()) throw Error(ErrorCode::ShapeMismatch, "action " + std::to_string(a) + " has no Q-value");
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < epsilon) return valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
  std::size_t best = valid[0];
  for (std::size_t a : valid) {
    if (q[a] > q[best] || (q[a] == q[best] && a < best)) best = a;
  }
  return best;
}

std::vector<RankedSegment> rank_segments(const RoadNetwork& net, std::span<const double> q, std::size_t top) {
  if (q.size() != net.segment_count()) throw Error(ErrorCode::ShapeMismatch, "one Q-value per segment expected");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > kMinusInf) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  idx.resize(std::min(idx.size(), top));
  std::vector<RankedSegment> out;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.push_back({net.segment(idx[r]).segment_id, q[idx[r]], static_cast<int>(r + 1)});
  }
  return out;
}

std::vector<RankedSegment> rank_segments(const QNetwork& qnet, const Environment& env, const DayState& state,
                                         std::size_t top) {
  return rank_segments(env.network(), segment_q_values(qnet, env, state), top);
}

std::string rankings_json(const std::vector<RankedSegment>& ranking) {
  Json j = Json::array();
  for (const auto& r : ranking) j.push_back({{"segment_id", r.segment_id}, {"q_value", r.q_value}, {"rank", r.rank}});
  return j.dump(1) + "\n";
}

// Learning --------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::BadValue, "replay capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (!std::isfinite(e.reward)) throw Error(ErrorCode::Diverged, "non-finite reward in replay");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(e));
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng) const {
  if (items_.empty()) throw Error(ErrorCode::EmptyBatch, "replay buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Experience*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[pick(rng)]);
  return out;
}

TdLoss td_loss(std::span<const Experience* const> batch, const QFunction& online, const QFunction& target,
               double gamma, bool grads) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "TD loss of an empty batch");
  TdLoss out;
  nn::Tape t(grads);
  nn::Tape::Var total{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Experience& e = *batch[i];
    auto q = online.forward(t, e.state);
    if (e.action >= static_cast<std::size_t>(t.value(q).size())) {
      throw Error(ErrorCode::ShapeMismatch, "action " + std::to_string(e.action) + " has no Q-value");
    }
    auto qa = t.gather(q, {static_cast<Eigen::Index>(e.action)});
    double y = e.reward;
    if (!e.done && !e.next_valid.empty()) {
      const std::vector<double> qn = target.q_values(e.next);
      double best = kMinusInf;
      for (std::size_t a : e.next_valid) best = std::max(best, qn.at(a));
      y += gamma * best;
    }
    out.q.push_back(t.value(qa)(0, 0));
    out.targets.push_back(y);
    auto sq = t.square(t.sub(qa, t.constant(MatrixD::Constant(1, 1, y))));
    total = i == 0 ? sq : t.add(total, sq);
  }
  auto loss = t.scale(total, 1.0 / static_cast<double>(batch.size()));
  if (grads) t.backward(loss);
  out.loss = t.value(loss)(0, 0);
  return out;
}

void QConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::BadValue, "gamma must lie in [0, 1)");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw Error(ErrorCode::BadValue, "epsilon must lie in [0, 1]");
  }
  if (!(epsilon_decay_fraction > 0.0)) throw Error(ErrorCode::BadValue, "epsilon decay fraction must be positive");
  if (replay_capacity == 0 || batch_size == 0 || target_sync < 1 || episodes < 1 || updates_per_step < 1) {
    throw Error(ErrorCode::BadValue, "replay capacity, batch size, target sync, updates and episodes must be positive");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::BadValue, "learning rate must be positive");
}

double QConfig::epsilon(long step, long planned_steps) const {
  const double decay = std::max(1.0, epsilon_decay_fraction * static_cast<double>(planned_steps));
  const double f = std::min(1.0, static_cast<double>(step) / decay);
  return epsilon_start + (epsilon_end - epsilon_start) * f;
}

QHistory train_q(QProblem& problem, QFunction& online, const QConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::unique_ptr<QFunction> target = online.clone();
  auto params = online.parameters();
  nn::Adam adam({cfg.learning_rate});
  ReplayBuffer replay(cfg.replay_capacity);
  QHistory h;
  const long planned = static_cast<long>(cfg.episodes) * problem.horizon();

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    problem.begin_episode(ep, rng);
    double total = 0.0;
    for (int k = 0; k < problem.horizon(); ++k) {
      std::vector<std::size_t> valid = problem.valid_actions();
      if (valid.empty()) break;
      QState s = problem.observation();
      const std::size_t a = select_action(online.q_values(s), valid, cfg.epsilon(h.steps, planned), rng);
      const Transition tr = problem.act(a);
      ++h.steps;
      total += tr.reward;
      Experience e{std::move(s), a, tr.reward, problem.observation(), {}, tr.done};
      if (!tr.done) e.next_valid = problem.valid_actions();
      replay.push(std::move(e));

      for (int u = 0; u < cfg.updates_per_step && replay.size() >= cfg.batch_size; ++u) {
        const auto batch = replay.sample(cfg.batch_size, rng);
        nn::zero_grads<double>(params);
        const TdLoss l = td_loss(batch, online, *target, cfg.gamma);
        adam.step(params);
        h.losses.push_back(l.loss);
        if (++h.updates % cfg.target_sync == 0) {
          target->copy_parameters_from(online);
          ++h.syncs;
        }
      }
      if (tr.done) break;
    }
    h.episode_rewards.push_back(total);
  }
  return h;
}

void ChainMdp::begin_episode(int, std::mt19937_64& rng) {
  state_ = std::uniform_int_distribution<std::size_t>(0, kStates - 1)(rng);
}

Transition ChainMdp::act(std::size_t action) {
  if (action >= kActions) throw Error(ErrorCode::ShapeMismatch, "chain action out of range");
  const double r = reward(state_, action);
  state_ = next_state(state_, action);
  return {r, false};
}

std::size_t ChainMdp::next_state(std::size_t s, std::size_t a) {
  if (a == 0) return s == 0 ? 0 : s - 1;
  return s + 1 == kStates ? s : s + 1;
}

double ChainMdp::reward(std::size_t s, std::size_t a) {
  if (a == 1 && s + 1 == kStates) return 1.0;
  if (a == 0 && s == 0) return 0.2;
  return 0.0;
}

MatrixD ChainMdp::value_iteration(double gamma, double tolerance) {
  MatrixD q = MatrixD::Zero(kStates, kActions);
  for (int it = 0; it < 100000; ++it) {
    MatrixD next(kStates, kActions);
    for (std::size_t s = 0; s < kStates; ++s) {
      for (std::size_t a = 0; a < kActions; ++a) {
        const auto n = static_cast<Eigen::Index>(next_state(s, a));
        next(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = reward(s, a) + gamma * q.row(n).maxCoeff();
      }
    }
    const double delta = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (delta < tolerance) break;
  }
  return q;
}

EnvProblem::EnvProblem(const Environment& env, const QNetwork& qnet, std::uint64_t seed)
    : env_(&env), qnet_(&qnet), starts_(env.start_days()) {
  if (starts_.empty()) throw Error(ErrorCode::MissingDay, "corpus is too short for one episode");
  std::mt19937_64 rng(seed);
  std::shuffle(starts_.begin(), starts_.end(), rng);
}

void EnvProblem::begin_episode(int episode, std::mt19937_64&) {
  state_ = env_->reset_day(starts_[static_cast<std::size_t>(episode) % starts_.size()]);
  refresh();
}

Transition EnvProblem::act(std::size_t action) {
  StepOutcome o = env_->step(state_, action);
  if (o.info.invalid) {
    valid_.clear();
    return {0.0, true};
  }
  state_ = std::move(o.next);
  if (o.done) {
    obs_ = observe(*qnet_, *env_, state_);
    valid_.clear();
  } else {
    refresh();
  }
  return {o.reward, o.done};
}

void EnvProblem::refresh() {
  obs_ = observe(*qnet_, *env_, state_);
  valid_ = env_->valid_actions(state_);
}

Standardizer fit_q_standardizer(const Environment& env) {
  const Corpus& c = env.corpus();
  const RoadNetwork& net = env.network();
  std::vector<MatrixD> blocks;
  for (std::size_t d : env.scoreable_days()) {
    const MatrixD f = day_features(net, segment_volumes(net.primal(), c.base_volumes(d)), c.weather(d), c.days()[d]);
    MatrixD x = MatrixD::Zero(f.rows(), f.cols() + 1);
    x.leftCols(f.cols()) = f;
    blocks.push_back(std::move(x));
  }
  return Standardizer::fit(blocks);
}

QTraining train_q(const Environment& env, QNetworkConfig net_cfg, const QConfig& cfg) {
  net_cfg.features = kFeatureCount + 1;
  QTraining out{QNetwork(net_cfg), {}};
  out.network.standardizer = fit_q_standardizer(env);
  EnvProblem problem(env, out.network, cfg.seed);
  out.history = train_q(problem, out.network, cfg);
  return out;
}

// Policy comparison -----------------------------------------------------------

BoxStats box_stats(std::vector<double> v) {
  BoxStats b;
  if (v.empty()) return b;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  b.min = v.front();
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  b.max = v.back();
  b.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return b;
}

std::string PolicyComparison::to_json() const {
  Json j;
  Json ps = Json::object();
  for (const auto& [name, s] : policies) {
    Json dates = Json::array();
    for (const Date& d : s.start_dates) dates.push_back(d.iso());
    ps[name] = {{"min", s.stats.min},       {"q1", s.stats.q1},   {"median", s.stats.median},
                {"q3", s.stats.q3},         {"max", s.stats.max}, {"mean", s.stats.mean},
                {"episode_rewards", s.episode_rewards}, {"start_dates", dates}};
  }
  j["policies"] = ps;
  j["warnings"] = warnings;
  return j.dump(1) + "\n";
}

PolicyComparison compare_policies(const Environment& env, const QNetwork* qnet,
                                  const std::vector<SegmentId>& designated, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw Error(ErrorCode::BadValue, "episodes must be positive");
  std::vector<std::size_t> listed;
  for (SegmentId id : designated) listed.push_back(env.network().segment_index(id));
  const std::vector<std::size_t> starts = env.start_days();
  if (starts.empty()) throw Error(ErrorCode::MissingDay, "corpus is too short for one episode");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  std::vector<std::size_t> days;
  for (int e = 0; e < episodes; ++e) days.push_back(starts[pick(rng)]);

  enum class Kind { QTop, Random, Designated };
  auto run = [&](Kind kind) {
    PolicySummary s;
    for (std::size_t e = 0; e < days.size(); ++e) {
      std::mt19937_64 local(seed ^ (0x9e3779b97f4a7c15ULL * (e + 1)));
      DayState state = env.reset_day(days[e]);
      std::size_t cursor = 0;
      double total = 0.0;
      for (int k = 0; k < env.config().horizon; ++k) {
        const std::vector<std::size_t> valid = env.valid_actions(state);
        if (valid.empty()) break;
        std::size_t a = 0;
        if (kind == Kind::QTop) {
          a = select_action(segment_q_values(*qnet, env, state), valid, 0.0, local);
        } else if (kind == Kind::Random) {
          a = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(local)];
        } else {
          while (cursor < listed.size() && !std::binary_search(valid.begin(), valid.end(), listed[cursor])) ++cursor;
          if (cursor == listed.size()) break;
          a = listed[cursor++];
        }
        StepOutcome o = env.step(state, a);
        if (o.info.invalid) break;
        total += o.reward;
        state = std::move(o.next);
        if (o.done) break;
      }
      s.episode_rewards.push_back(total);
      s.start_dates.push_back(env.corpus().days()[days[e]]);
    }
    s.stats = box_stats(s.episode_rewards);
    return s;
  };

  PolicyComparison out;
  if (qnet) {
    out.policies["q_top"] = run(Kind::QTop);
  } else {
    out.warnings.push_back("no Q-network given; q_top omitted");
  }
  out.policies["random"] = run(Kind::Random);
  if (listed.empty()) {
    out.warnings.push_back("designated list is empty; designated omitted");
  } else {
    out.policies["designated"] = run(Kind::Designated);
  }
  return out;
}

}  // namespace openstreets
