#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "openstreets/openenv.hpp"
#include "openstreets/synthcity.hpp"
#include "support.hpp"

using namespace openstreets;
using namespace testsupport;

namespace {

class ConstantRisk : public RiskModel {
 public:
  explicit ConstantRisk(double p) : p_(p) {}
  int window() const override { return 1; }
  std::vector<double> predict(std::span<const MatrixD> raw_days, const DualGraph&) const override {
    return std::vector<double>(static_cast<std::size_t>(raw_days.back().rows()), p_);
  }

 private:
  double p_;
};

/// Synthetic corpus scored with its own generator rule.
struct World {
  SynthCorpus synth;
  Corpus corpus;
  GroundTruthRisk risk;
  Environment env;

  World(int rows, int cols, int days, std::uint64_t seed, int horizon)
      : synth(generate(config(rows, cols, days, seed))),
        corpus(to_corpus(synth)),
        risk(synth.truth),
        env(corpus, risk, EnvConfig{horizon, 3, ShareRule::Inverse, 1.0, 1.0, seed}) {}

  static SynthConfig config(int rows, int cols, int days, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.days = days;
    cfg.seed = seed;
    return cfg;
  }
};

const World& world6() {
  static const World w(6, 6, 20, 0, 10);
  return w;
}

Corpus corpus_over(RoadNetwork net, std::vector<TripRecord> trips, int days) {
  std::map<Date, WeatherDay> weather;
  const Date start = Date::parse("2015-03-02");
  for (int d = 0; d < days; ++d) weather[start + d] = {0.0, 0.0, 10.0};
  for (auto& t : trips) t.date = start;
  std::vector<TripRecord> all;
  for (int d = 0; d < days; ++d)
    for (TripRecord t : trips) {
      t.date = start + d;
      all.push_back(t);
    }
  return Corpus(std::move(net), std::move(all), std::move(weather), {});
}

}  // namespace

TEST_CASE("reset is deterministic and normalizers are positive") {
  const World& w = world6();
  const std::size_t day = w.env.start_days().front();
  DayState a = w.env.reset_day(day), b = w.env.reset_day(day);
  CHECK(a.segment_volumes == b.segment_volumes);
  CHECK(a.components.risk_total == b.components.risk_total);
  CHECK(a.open_list.empty());
  CHECK(w.env.reset(a.date).volumes == a.volumes);

  Environment again(w.corpus, w.risk, w.env.config());
  CHECK(again.normalizer_day() == w.env.normalizer_day());
  CHECK(again.risk_norm() == w.env.risk_norm());
  CHECK(w.env.risk_norm() > 0.0);
  CHECK(w.env.density_norm() > 0.0);

  CHECK_THROWS_WITH_AS(w.env.reset(Date::parse("2030-01-01")), doctest::Contains("MissingDay"), Error);
}

TEST_CASE("state volumes equal the trip assignment of that day") {
  const World& w = world6();
  const RoadNetwork& net = w.corpus.network();
  for (std::size_t day : w.env.scoreable_days()) {
    DayState s = w.env.make_state(day, {});
    Assignment direct = assign_trips(net, w.corpus.trips(day));
    CHECK(s.volumes == direct.arc_volumes);
    CHECK(s.segment_volumes == segment_volumes(net.primal(), direct.arc_volumes));
  }
}

TEST_CASE("density per lane-meter") {
  RoadNetwork one = network_of({seg(1, 1, 2, 500.0, false, 2)});
  Corpus corpus = corpus_over(one, {}, 3);
  ConstantRisk risk(0.1);
  Environment env(corpus, risk, EnvConfig{1});
  CHECK(env.density({10.0}) == doctest::Approx(0.01).epsilon(1e-15));

  const World& w = world6();
  const RoadNetwork& net = w.corpus.network();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> vol(0, 400);
  std::vector<double> v(net.segment_count());
  for (double& x : v) x = vol(rng);
  double brute = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) brute += v[i] / (net.segment(i).lanes * net.segment(i).length_m);
  CHECK(w.env.density(v) == doctest::Approx(brute).epsilon(1e-12));
  std::vector<double> doubled = v;
  for (double& x : doubled) x *= 2;
  CHECK(w.env.density(doubled) == doctest::Approx(2 * w.env.density(v)).epsilon(1e-12));
}

TEST_CASE("reward is the drop in normalized cost") {
  const World& w = world6();
  DayState s = w.env.make_state(w.env.scoreable_days().front(), {});
  CHECK(w.env.compute_reward(s, s) == 0.0);

  DayState cur = s, next = s;
  cur.components.risk_total = 1.2 * w.env.risk_norm();
  cur.components.density_total = 0.8 * w.env.density_norm();
  next.components.risk_total = 1.0 * w.env.risk_norm();
  next.components.density_total = 0.8 * w.env.density_norm();
  CHECK(w.env.cost(cur) == doctest::Approx(2.0));
  CHECK(w.env.compute_reward(cur, next) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("state components match an independent evaluation") {
  const World& w = world6();
  const RoadNetwork& net = w.corpus.network();
  DayState s = w.env.make_state(w.env.scoreable_days()[2], {});
  auto valid = w.env.valid_actions(s);
  REQUIRE(valid.size() >= 2);
  s = w.env.step_same_day(s, valid[0]).next;
  s = w.env.step_same_day(s, w.env.valid_actions(s)[1]).next;
  auto p = w.synth.truth.probabilities(w.env.state_features(s));
  double risk = 0.0, density = 0.0;
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    if (!s.is_open(i)) risk += p[i];
    density += s.segment_volumes[i] / (net.segment(i).lanes * net.segment(i).length_m);
  }
  CHECK(s.components.risk_total == doctest::Approx(risk).epsilon(1e-12));
  CHECK(s.components.density_total == doctest::Approx(density).epsilon(1e-12));
}

TEST_CASE("invalid actions end the episode with reward 0") {
  CHECK(std::string(to_string(InvalidReason::AlreadyOpen)) == "already_open");
  CHECK(std::string(to_string(InvalidReason::NoCars)) == "no_cars");
  CHECK(std::string(to_string(InvalidReason::NoAlternative)) == "no_alternative");

  // 1 -> 2 with a slower detour 1 -> 5 -> 2; 2 -> 3 is a bridge; 4 -> 1 carries nobody.
  RoadNetwork net = network_of({seg(1, 1, 2, 100, true), seg(2, 1, 5, 150, true), seg(3, 5, 2, 150, true),
                                seg(4, 2, 3, 100, true), seg(5, 4, 1, 100, true)});
  Corpus corpus = corpus_over(net, {TripRecord{1, {}, 1, 3, 5}}, 4);
  ConstantRisk risk(0.01);
  Environment env(corpus, risk, EnvConfig{2});
  DayState s = env.reset_day(0);

  auto expect_invalid = [&](const DayState& st, std::size_t segment, InvalidReason why) {
    StepOutcome o = env.step(st, segment);
    REQUIRE(o.info.invalid.has_value());
    CHECK(*o.info.invalid == why);
    CHECK(o.done);
    CHECK(o.reward == 0.0);
    CHECK(o.next.open_list == st.open_list);
    CHECK(o.next.date == st.date);
  };
  expect_invalid(s, net.segment_index(5), InvalidReason::NoCars);
  expect_invalid(s, net.segment_index(2), InvalidReason::NoCars);
  expect_invalid(s, net.segment_index(4), InvalidReason::NoAlternative);

  StepOutcome ok = env.step(s, net.segment_index(1));
  REQUIRE_FALSE(ok.info.invalid.has_value());
  expect_invalid(ok.next, net.segment_index(1), InvalidReason::AlreadyOpen);
  // With 1 open, the detour carries the trips and has no detour of its own.
  CHECK(ok.next.segment_volumes[net.segment_index(2)] == 5.0);
  expect_invalid(ok.next, net.segment_index(2), InvalidReason::NoAlternative);

  auto valid = env.valid_actions(s);
  CHECK(valid == std::vector<std::size_t>{net.segment_index(1)});
}

/// Breadth-first reachability with one segment removed, for every direction it has.
bool has_detour(const RoadNetwork& net, std::size_t segment) {
  const PrimalGraph& g = net.primal();
  for (std::size_t arc : g.segment_arcs(segment)) {
    std::vector<char> seen(g.vertex_count(), 0);
    std::vector<std::size_t> queue{g.arc(arc).from};
    seen[g.arc(arc).from] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head)
      for (std::size_t a : g.out_arcs(queue[head]))
        if (g.arc(a).segment != segment && !seen[g.arc(a).to]) seen[g.arc(a).to] = 1, queue.push_back(g.arc(a).to);
    if (!seen[g.arc(arc).to]) return false;
  }
  return true;
}

TEST_CASE("valid actions: busy segments with a detour") {
  SUBCASE("two-way grid: every busy segment") {
    std::vector<SegmentRecord> segs;
    SegmentId id = 1;
    auto node = [](int r, int c) { return static_cast<NodeId>(r * 4 + c + 1); };
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        if (c + 1 < 4) segs.push_back(seg(id++, node(r, c), node(r, c + 1)));
        if (r + 1 < 4) segs.push_back(seg(id++, node(r, c), node(r + 1, c)));
      }
    std::vector<TripRecord> trips;
    for (NodeId o = 1; o <= 16; ++o)
      for (NodeId d = 1; d <= 16; ++d)
        if (o != d) trips.push_back({static_cast<std::int64_t>(trips.size()), {}, o, d, 1});
    Corpus corpus = corpus_over(network_of(segs), trips, 3);
    ConstantRisk risk(0.01);
    Environment env(corpus, risk, EnvConfig{1});
    DayState s = env.reset_day(0);
    std::vector<std::size_t> busy;
    for (std::size_t i = 0; i < s.segment_volumes.size(); ++i)
      if (s.segment_volumes[i] > 0) busy.push_back(i);
    CHECK(busy.size() == segs.size());
    CHECK(env.valid_actions(s) == busy);
  }
  SUBCASE("synthcity grid: busy and reachable around") {
    const World& w = world6();
    const RoadNetwork& net = w.corpus.network();
    DayState s = w.env.make_state(w.env.scoreable_days().front(), {});
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < s.segment_volumes.size(); ++i)
      if (s.segment_volumes[i] > 0 && has_detour(net, i)) expected.push_back(i);
    CHECK(expected.size() > net.segment_count() / 2);
    CHECK(w.env.valid_actions(s) == expected);
  }
}

TEST_CASE("valid opening: segment emptied, flow conserved at every intersection") {
  const World& w = world6();
  const RoadNetwork& net = w.corpus.network();
  DayState s = w.env.make_state(w.env.scoreable_days().front(), {});
  const auto before = divergence(net.primal(), s.volumes);
  int checked = 0;
  for (std::size_t a : w.env.valid_actions(s)) {
    StepOutcome o = w.env.step_same_day(s, a);
    REQUIRE_FALSE(o.info.invalid.has_value());
    CHECK(o.next.segment_volumes[a] == 0.0);
    const auto after = divergence(net.primal(), o.next.volumes);
    for (std::size_t v = 0; v < before.size(); ++v) CHECK(after[v] == doctest::Approx(before[v]).epsilon(1e-9));
    CHECK(o.next.volumes == local_reroute(s.volumes, a, net, 3));
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("next-day step applies the whole open list to the new day's traffic") {
  const World& w = world6();
  const RoadNetwork& net = w.corpus.network();
  DayState s = w.env.reset_day(w.env.start_days().front());
  std::mt19937_64 rng(4);
  for (int t = 0; t < 3; ++t) {
    auto valid = w.env.valid_actions(s);
    REQUIRE_FALSE(valid.empty());
    const std::size_t a = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
    StepOutcome o = w.env.step(s, a);
    REQUIRE_FALSE(o.info.invalid.has_value());
    CHECK(o.next.date == s.date + 1);
    CHECK(o.next.open_list.size() == s.open_list.size() + 1);
    for (std::size_t open : o.next.open_list) CHECK(o.next.segment_volumes[open] == 0.0);
    // Total demand of the new day is unchanged by the openings.
    DayState base = w.env.make_state(o.next.day, {});
    const auto got = divergence(net.primal(), o.next.volumes), want = divergence(net.primal(), base.volumes);
    for (std::size_t v = 0; v < got.size(); ++v) CHECK(got[v] == doctest::Approx(want[v]).epsilon(1e-9));
    s = o.next;
  }
}

TEST_CASE("masked rollouts never hit an invalid action") {
  World w(4, 4, 16, 2, 6);
  std::mt19937_64 rng(11);
  const auto starts = w.env.start_days();
  int invalid = 0, steps = 0;
  for (int episode = 0; episode < 1000; ++episode) {
    DayState s = w.env.reset_day(starts[rng() % starts.size()]);
    while (!s.done) {
      auto valid = w.env.valid_actions(s);
      if (valid.empty()) break;
      StepOutcome o = w.env.step(s, valid[rng() % valid.size()]);
      invalid += o.info.invalid.has_value();
      ++steps;
      s = o.next;
      s.done = o.done;
    }
  }
  CHECK(invalid == 0);
  CHECK(steps > 1000);
}

TEST_CASE("episode rewards telescope and their sign tracks the cost") {
  const World& w = world6();
  std::mt19937_64 rng(5);
  for (int episode = 0; episode < 5; ++episode) {
    const auto starts = w.env.start_days();
    const DayState first = w.env.reset_day(starts[rng() % starts.size()]);
    DayState s = first;
    double total = 0.0;
    int steps = 0;
    bool done = false;
    while (!done) {
      auto valid = w.env.valid_actions(s);
      REQUIRE_FALSE(valid.empty());
      StepOutcome o = w.env.step(s, valid[rng() % valid.size()]);
      CHECK((o.reward > 0.0) == (w.env.cost(o.next) < w.env.cost(s)));
      CHECK(o.reward == doctest::Approx(-(o.info.risk_delta + o.info.density_delta)).epsilon(1e-12));
      total += o.reward;
      s = o.next;
      done = o.done;
      ++steps;
    }
    CHECK(steps == w.env.config().horizon);
    CHECK(s.open_list.size() == static_cast<std::size_t>(steps));
    CHECK(std::abs(total - (w.env.cost(first) - w.env.cost(s))) < 1e-9);
  }
}

TEST_CASE("what-if") {
  const World& w = world6();
  const RoadNetwork& net = w.corpus.network();
  const std::size_t day = w.env.scoreable_days()[1];
  const Date date = w.corpus.days()[day];

  WhatIfResult none = whatif(w.env, date, {});
  CHECK(none.reward == 0.0);
  CHECK(none.risk_delta == 0.0);
  CHECK(none.density_delta == 0.0);
  CHECK(none.volume_changes.empty());

  DayState s = w.env.make_state(day, {});
  auto valid = w.env.valid_actions(s);
  const SegmentId a = net.segment(valid[0]).segment_id, b = net.segment(valid[3]).segment_id;
  WhatIfResult r = whatif(w.env, date, {a, a, b});
  CHECK(r.applied == std::vector<SegmentId>{a, b});
  REQUIRE(r.invalid.size() == 1);
  CHECK(r.invalid[0].reason == InvalidReason::AlreadyOpen);

  DayState manual = w.env.step_same_day(w.env.step_same_day(s, valid[0]).next, valid[3]).next;
  CHECK(r.reward == doctest::Approx(w.env.compute_reward(s, manual)).epsilon(1e-12));
  CHECK(r.volume_changes.at(a) == doctest::Approx(-s.segment_volumes[valid[0]]));

  auto json = nlohmann::json::parse(r.to_json());
  CHECK(json["applied"].size() == 2);
  CHECK_THROWS_WITH_AS(whatif(w.env, date, {999999}), doctest::Contains("UnknownSegmentId"), Error);
}

TEST_CASE("trace lines") {
  const World& w = world6();
  DayState s = w.env.reset_day(w.env.start_days().front());
  const std::size_t a = w.env.valid_actions(s).front();
  StepOutcome o = w.env.step(s, a);
  auto j = nlohmann::json::parse(trace_line(s, w.corpus.network().segment(a).segment_id, o));
  for (const char* key : {"date", "action", "reward", "risk", "density", "invalid"}) CHECK(j.contains(key));
  CHECK(j["date"] == s.date.iso());
  CHECK(j["invalid"].is_null());
  StepOutcome bad = w.env.step(o.next, a);
  CHECK(nlohmann::json::parse(trace_line(o.next, std::nullopt, bad))["invalid"] == "already_open");
}
