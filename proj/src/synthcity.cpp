#include "openstreets/synthcity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "openstreets/error.hpp"
#include "openstreets/routing.hpp"

namespace openstreets {

using Json = nlohmann::ordered_json;

namespace {

// Grid spacing: ~80 m between streets, ~270 m between avenues.
constexpr double kBaseLat = 40.70;
constexpr double kBaseLon = -74.00;
constexpr double kStreetSpacingDeg = 0.00072;
constexpr double kAvenueSpacingDeg = 0.0032;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

NodeId node_id(const SynthConfig& cfg, int r, int c) { return static_cast<NodeId>(r) * cfg.cols + c + 1; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RoadNetwork canonical(std::vector<SegmentRecord> segs, std::vector<Intersection> nodes) {
  std::istringstream in(write_segments_csv(RoadNetwork(std::move(segs), std::move(nodes))));
  return ingest_segments(in);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Moments {
  double mean = 0.0, sd = 1.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  double s = 0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(xs.size());
  double q = 0;
  for (double x : xs) q += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(q / static_cast<double>(xs.size()));
  if (!(m.sd > 1e-12)) m.sd = 1.0;
  return m;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  if (text == "plain") return Scenario::Plain;
  if (text == "detour_magnet") return Scenario::DetourMagnet;
  throw Error(ErrorCode::ScenarioUnsupported, "unknown scenario '" + text + "'");
}

std::string to_string(Scenario s) { return s == Scenario::Plain ? "plain" : "detour_magnet"; }

void SynthConfig::validate() const {
  if (rows < 3 || cols < 3) throw Error(ErrorCode::BadValue, "synthetic grid needs at least 3 rows and 3 columns");
  if (days < 10) throw Error(ErrorCode::BadValue, "synthetic corpus needs at least 10 days");
}

std::string AnswerKey::to_json() const {
  Json j{{"magnet", magnet},
         {"magnet_expected_reward_sign", "+"},
         {"alternatives", alternatives},
         {"main_avenue", main_avenue},
         {"main_avenue_expected_reward_sign", "-"},
         {"designated", designated}};
  return j.dump(2) + "\n";
}

std::vector<double> GroundTruth::probabilities(const MatrixD& x) const {
  std::vector<double> p(static_cast<std::size_t>(x.rows()));
  const RiskCoefficients& c = coefficients;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const bool hz = x(i, kDoubleLevel) > 0.5 && x(i, kCurveRadius) > 0.0;
    double logit = c.intercept + (hz ? c.hazard : 0.0) + c.speed * (x(i, kSpeed) - speed_mean) / speed_sd -
                   c.cars * (x(i, kCarVolume) - cars_mean) / cars_sd +
                   c.precip * (x(i, kPrecip) - precip_mean) / precip_sd;
    if (static_cast<std::size_t>(i) < extra_logit.size()) logit += extra_logit[static_cast<std::size_t>(i)];
    p[static_cast<std::size_t>(i)] = sigmoid(logit);
  }
  return p;
}

std::vector<double> GroundTruthRisk::predict(std::span<const MatrixD> raw_days, const DualGraph& graph) const {
  if (raw_days.empty()) throw Error(ErrorCode::ShapeMismatch, "no day to score");
  if (raw_days.back().rows() != static_cast<Eigen::Index>(graph.vertex_count())) {
    throw Error(ErrorCode::ShapeMismatch, "day features do not match the graph");
  }
  return truth_.probabilities(raw_days.back());
}

// Network ---------------------------------------------------------------------

RoadNetwork synth_network(const SynthConfig& cfg) {
  cfg.validate();
  auto rng = stream(cfg.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Intersection> nodes;
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const double lat = kBaseLat + r * kStreetSpacingDeg + (unit(rng) - 0.5) * 0.00006;
      const double lon = kBaseLon + c * kAvenueSpacingDeg + (unit(rng) - 0.5) * 0.0001;
      nodes.push_back({node_id(cfg, r, c), round_to(lat, 1e-7), round_to(lon, 1e-7)});
    }
  }
  auto at = [&](int r, int c) -> const Intersection& { return nodes[static_cast<std::size_t>(r * cfg.cols + c)]; };
  auto length = [&](const Intersection& a, const Intersection& b) {
    return round_to(equirectangular_m(a.lat, a.lon, b.lat, b.lon), 0.001);
  };

  std::vector<SegmentRecord> segs;
  SegmentId next_id = 1;
  // Avenues: north-south, one-way, direction alternating by column.
  for (int c = 0; c < cfg.cols; ++c) {
    for (int r = 0; r + 1 < cfg.rows; ++r) {
      SegmentRecord s;
      s.segment_id = next_id++;
      const bool north = c % 2 == 0;
      s.from_node = node_id(cfg, north ? r : r + 1, c);
      s.to_node = node_id(cfg, north ? r + 1 : r, c);
      s.length_m = length(at(r, c), at(r + 1, c));
      s.lanes = 3 + static_cast<int>(rng() % 2);
      s.width_m = round_to(s.lanes * 3.3 + 2.0 + unit(rng), 0.1);
      s.speed_limit_kmh = 45.0 + static_cast<double>(rng() % 12);
      s.one_way = true;
      s.bike_lane = c % 3 == 1;
      s.border = c == 0 || c == cfg.cols - 1;
      segs.push_back(s);
    }
  }
  // Streets: east-west, two-way, slower and narrower.
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c + 1 < cfg.cols; ++c) {
      SegmentRecord s;
      s.segment_id = next_id++;
      s.from_node = node_id(cfg, r, c);
      s.to_node = node_id(cfg, r, c + 1);
      s.length_m = length(at(r, c), at(r, c + 1));
      s.lanes = 1 + static_cast<int>(rng() % 2);
      s.width_m = round_to(s.lanes * 3.3 + 2.0 + unit(rng), 0.1);
      s.speed_limit_kmh = 25.0 + static_cast<double>(rng() % 16);
      s.one_way = false;
      s.bike_lane = r % 4 == 2;
      s.border = r == 0 || r == cfg.rows - 1;
      segs.push_back(s);
    }
  }
  // A few curved, double-level highway stretches on the border avenues.
  std::vector<std::size_t> border_avenues;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].one_way && segs[i].border) border_avenues.push_back(i);
  }
  const auto hazards = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.015 * segs.size())));
  std::shuffle(border_avenues.begin(), border_avenues.end(), rng);
  for (std::size_t k = 0; k < std::min(hazards, border_avenues.size()); ++k) {
    SegmentRecord& s = segs[border_avenues[k]];
    s.double_level = true;
    s.curve_radius_m = 150.0 + static_cast<double>(rng() % 151);
    s.speed_limit_kmh = 56.0;
  }
  return canonical(std::move(segs), std::move(nodes));
}

std::string gen_network(const SynthConfig& cfg) { return write_segments_csv(synth_network(cfg)); }

std::pair<RoadNetwork, AnswerKey> plant_scenario(const SynthConfig& cfg, const RoadNetwork& net) {
  if (cfg.scenario != Scenario::DetourMagnet) {
    throw Error(ErrorCode::ScenarioUnsupported, "scenario '" + to_string(cfg.scenario) + "' plants nothing");
  }
  std::vector<SegmentRecord> segs = net.segments();
  // The magnet is the only hazardous segment of the scenario.
  for (auto& s : segs) {
    s.double_level = false;
    s.curve_radius_m.reset();
  }
  const int cm = cfg.cols / 2;
  const int rm = cfg.rows / 2 - 1;
  const NodeId a = node_id(cfg, rm, cm), b = node_id(cfg, rm + 1, cm);
  auto it = std::find_if(segs.begin(), segs.end(), [&](const SegmentRecord& s) {
    return (s.from_node == a && s.to_node == b) || (s.from_node == b && s.to_node == a);
  });
  if (it == segs.end()) throw Error(ErrorCode::ScenarioUnsupported, "grid too small for the detour magnet");
  SegmentRecord& m = *it;
  m.speed_limit_kmh = 56.0;
  m.lanes = 1;
  m.width_m = 5.5;
  m.double_level = true;
  m.curve_radius_m = 120.0;

  AnswerKey key;
  key.magnet = m.segment_id;
  SegmentId next_id = segs.back().segment_id + 1;
  const SegmentRecord base = m;
  for (double stretch : {1.15, 1.25}) {
    SegmentRecord p = base;
    p.segment_id = next_id++;
    p.length_m = round_to(base.length_m * stretch, 0.001);
    p.speed_limit_kmh = 45.0;
    p.lanes = 2;
    p.width_m = 8.6;
    p.double_level = false;
    p.curve_radius_m.reset();
    p.bike_lane = false;
    p.border = false;
    key.alternatives.push_back(p.segment_id);
    segs.push_back(p);
  }
  return {canonical(std::move(segs), net.intersections()), key};
}

// Days ------------------------------------------------------------------------

SynthCorpus gen_days(const SynthConfig& cfg, const RoadNetwork& net, std::optional<AnswerKey> key) {
  cfg.validate();
  SynthCorpus out;
  out.config = cfg;
  out.segments_csv = write_segments_csv(net);
  auto rng = stream(cfg.seed, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t n_nodes = net.intersection_count();
  const std::size_t n_segs = net.segment_count();

  // Demand concentrates on a few hot spots.
  std::vector<std::size_t> hot;
  {
    std::vector<std::size_t> all(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t k = std::max<std::size_t>(3, n_nodes / 12);
    hot.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, n_nodes)));
    if (key) {
      const int cm = cfg.cols / 2;
      for (NodeId id : {node_id(cfg, 0, cm), node_id(cfg, cfg.rows - 1, cm)}) {
        const std::size_t v = net.intersection_index(id);
        if (std::find(hot.begin(), hot.end(), v) == hot.end()) hot.push_back(v);
      }
    }
  }
  std::uniform_int_distribution<std::size_t> any_node(0, n_nodes - 1);
  std::uniform_int_distribution<std::size_t> any_hot(0, hot.size() - 1);
  auto draw = [&] { return unit(rng) < 0.7 ? hot[any_hot(rng)] : any_node(rng); };

  std::ostringstream trips, weather, collisions;
  trips << "trip_id,date,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,count\n";
  weather << "date,precip_mm,snow_mm,temp_c\n";
  collisions << "date,segment_id,count\n";

  std::vector<std::vector<double>> volumes(static_cast<std::size_t>(cfg.days));
  std::vector<double> precip_days(static_cast<std::size_t>(cfg.days), 0.0);
  std::vector<WeatherDay> weather_days(static_cast<std::size_t>(cfg.days));
  std::int64_t trip_id = 1;
  for (int d = 0; d < cfg.days; ++d) {
    const Date date = cfg.start + d;
    const std::string iso = date.iso();
    const double factor = date.weekend() ? 0.7 : 1.0;
    const auto n_trips = static_cast<int>(std::lround(cfg.effective_trips_per_day() * factor));
    std::vector<TripRecord> day_trips;
    for (int k = 0; k < n_trips; ++k) {
      const std::size_t o = draw();
      std::size_t t = draw();
      while (t == o) t = any_node(rng);
      TripRecord trip{trip_id++, date, net.intersections()[o].id, net.intersections()[t].id,
                      1 + static_cast<int>(rng() % 3)};
      const auto& a = net.intersections()[o];
      const auto& b = net.intersections()[t];
      trips << trip.trip_id << ',' << iso << ',' << fmt("%.6f", a.lat + (unit(rng) - 0.5) * 4e-5) << ','
            << fmt("%.6f", a.lon + (unit(rng) - 0.5) * 4e-5) << ',' << fmt("%.6f", b.lat + (unit(rng) - 0.5) * 4e-5)
            << ',' << fmt("%.6f", b.lon + (unit(rng) - 0.5) * 4e-5) << ',' << trip.count << '\n';
      day_trips.push_back(trip);
    }
    volumes[static_cast<std::size_t>(d)] = segment_volumes(net.primal(), assign_trips(net, day_trips).arc_volumes);

    // Hourly weather, aggregated the same way the loader does.
    const double season = 8.0 + 6.0 * std::sin(2.0 * std::numbers::pi * (d + 60) / 365.0) + 2.5 * normal(rng);
    const bool rainy = unit(rng) < 0.3;
    WeatherDay agg;
    for (int h = 0; h < 24; ++h) {
      const double temp = round_to(season + 4.0 * std::sin(2.0 * std::numbers::pi * (h - 9) / 24.0), 0.1);
      double rain = 0.0, snow = 0.0;
      if (rainy && unit(rng) < 0.35) {
        const double amount = round_to(-1.2 * std::log(1.0 - unit(rng)), 0.1);
        (temp < 0.5 ? snow : rain) = amount;
      }
      char stamp[32];
      std::snprintf(stamp, sizeof stamp, "%sT%02d:00", iso.c_str(), h);
      weather << stamp << ',' << fmt("%.1f", rain) << ',' << fmt("%.1f", snow) << ',' << fmt("%.1f", temp) << '\n';
      agg.precip_mm += std::stod(fmt("%.1f", rain));
      agg.snow_mm += std::stod(fmt("%.1f", snow));
      agg.temp_c += std::stod(fmt("%.1f", temp));
    }
    agg.temp_c /= 24;
    weather_days[static_cast<std::size_t>(d)] = agg;
    precip_days[static_cast<std::size_t>(d)] = agg.precip_mm;
  }

  // Frozen z-score statistics of the rule.
  GroundTruth truth;
  truth.coefficients = cfg.coefficients;
  {
    std::vector<double> speeds;
    for (const auto& s : net.segments()) speeds.push_back(s.speed_limit_kmh);
    const Moments ms = moments(speeds);
    truth.speed_mean = ms.mean;
    truth.speed_sd = ms.sd;
    std::vector<double> cars;
    for (const auto& v : volumes) cars.insert(cars.end(), v.begin(), v.end());
    const Moments mc = moments(cars);
    truth.cars_mean = mc.mean;
    truth.cars_sd = mc.sd;
    const Moments mp = moments(precip_days);
    truth.precip_mean = mp.mean;
    truth.precip_sd = mp.sd;
  }
  truth.extra_logit.assign(n_segs, 0.0);
  if (key) truth.extra_logit[net.segment_index(key->magnet)] = cfg.coefficients.magnet;

  auto label_rng = stream(cfg.seed, 3);
  for (int d = 0; d < cfg.days; ++d) {
    const Date date = cfg.start + d;
    const auto di = static_cast<std::size_t>(d);
    const MatrixD x = day_features(net, volumes[di], weather_days[di], date);
    std::vector<double> p = truth.probabilities(x);
    std::vector<double> y(n_segs, 0.0);
    for (std::size_t i = 0; i < n_segs; ++i) {
      if (unit(label_rng) < p[i]) {
        y[i] = 1.0;
        collisions << date.iso() << ',' << net.segment(i).segment_id << ',' << (unit(label_rng) < 0.1 ? 2 : 1)
                   << '\n';
      }
    }
    out.probabilities.push_back(std::move(p));
    out.labels.push_back(std::move(y));
  }
  out.truth = std::move(truth);

  if (key) {
    // Busiest ordinary avenue segment and the column it sits in.
    std::set<SegmentId> planted{key->magnet};
    planted.insert(key->alternatives.begin(), key->alternatives.end());
    std::vector<double> mean_volume(n_segs, 0.0);
    for (const auto& v : volumes) {
      for (std::size_t i = 0; i < n_segs; ++i) mean_volume[i] += v[i] / cfg.days;
    }
    std::size_t best = n_segs;
    for (std::size_t i = 0; i < n_segs; ++i) {
      const auto& s = net.segment(i);
      if (!s.one_way || planted.count(s.segment_id)) continue;
      if (best == n_segs || mean_volume[i] > mean_volume[best]) best = i;
    }
    key->main_avenue = net.segment(best).segment_id;
    const double lon = net.intersections()[net.from_vertex(best)].lon;
    for (std::size_t i = 0; i < n_segs; ++i) {
      const auto& s = net.segment(i);
      if (!s.one_way || planted.count(s.segment_id)) continue;
      if (std::abs(net.intersections()[net.from_vertex(i)].lon - lon) < kAvenueSpacingDeg / 4) {
        key->designated.push_back(s.segment_id);
      }
    }
    out.answer_key = key;
  }

  out.trips_csv = trips.str();
  out.weather_csv = weather.str();
  out.collisions_csv = collisions.str();
  return out;
}

SynthCorpus generate(const SynthConfig& cfg) {
  RoadNetwork net = synth_network(cfg);
  if (cfg.scenario == Scenario::Plain) return gen_days(cfg, net);
  auto [planted, key] = plant_scenario(cfg, net);
  return gen_days(cfg, planted, key);
}

Corpus to_corpus(const SynthCorpus& synth, unsigned threads) {
  std::istringstream seg(synth.segments_csv), trips(synth.trips_csv), weather(synth.weather_csv),
      collisions(synth.collisions_csv);
  RoadNetwork net = ingest_segments(seg);
  auto t = load_trips(trips, net);
  auto w = load_weather(weather);
  auto c = load_collisions(collisions, net);
  return Corpus(std::move(net), std::move(t), std::move(w), std::move(c), threads);
}

void write_synth(const SynthCorpus& synth, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + dir + "/" + name);
    out << text;
  };
  put("segments.csv", synth.segments_csv);
  put("trips.csv", synth.trips_csv);
  put("weather.csv", synth.weather_csv);
  put("collisions.csv", synth.collisions_csv);
  const auto& t = synth.truth;
  const auto& c = t.coefficients;
  Json truth{{"scenario", to_string(synth.config.scenario)},
             {"seed", synth.config.seed},
             {"coefficients",
              {{"intercept", c.intercept},
               {"hazard", c.hazard},
               {"speed", c.speed},
               {"cars", c.cars},
               {"precip", c.precip},
               {"magnet", c.magnet}}},
             {"speed_mean", t.speed_mean},
             {"speed_sd", t.speed_sd},
             {"cars_mean", t.cars_mean},
             {"cars_sd", t.cars_sd},
             {"precip_mean", t.precip_mean},
             {"precip_sd", t.precip_sd}};
  put("truth.json", truth.dump(2) + "\n");
  if (synth.answer_key) put("answer_key.json", synth.answer_key->to_json());
}

EvalReport bayes_report(const SynthCorpus& synth, std::size_t first_day, std::size_t last_day) {
  last_day = std::min(last_day, synth.probabilities.size());
  if (first_day >= last_day) throw Error(ErrorCode::EmptyDataset, "no days to score");
  std::vector<double> p, y;
  for (std::size_t d = first_day; d < last_day; ++d) {
    p.insert(p.end(), synth.probabilities[d].begin(), synth.probabilities[d].end());
    y.insert(y.end(), synth.labels[d].begin(), synth.labels[d].end());
  }
  double prior = 0.0;
  for (double v : p) prior += v;
  prior /= static_cast<double>(p.size());
  return evaluate_predictions(p, y, prior);
}

}  // namespace openstreets
