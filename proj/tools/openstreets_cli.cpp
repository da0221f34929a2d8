// openstreets: command-line entry points and the what-if HTTP service.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "openstreets/collision.hpp"
#include "openstreets/corpus.hpp"
#include "openstreets/error.hpp"
#include "openstreets/manifest.hpp"
#include "openstreets/nn/checkpoint.hpp"
#include "openstreets/openenv.hpp"
#include "openstreets/qagent.hpp"
#include "openstreets/service.hpp"
#include "openstreets/synthcity.hpp"

namespace os = openstreets;
using Json = nlohmann::ordered_json;

namespace {

struct Inputs {
  std::string data_dir;
  std::string net, trips, weather, collisions;
  std::string model, qmodel;
  unsigned threads = 1;

  std::string path(const std::string& given, const std::string& name) const {
    return given.empty() ? data_dir + "/" + name : given;
  }
  os::CorpusPaths corpus() const {
    return {path(net, "segments.csv"), path(trips, "trips.csv"), path(weather, "weather.csv"),
            path(collisions, "collisions.csv")};
  }
  std::string model_path() const { return path(model, "collision.oslm"); }
  std::string qmodel_path() const { return path(qmodel, "qnetwork.oslm"); }
};

struct EnvOptions {
  int horizon = 30;
  std::size_t k = 3;
  std::string share_rule = "inverse";
  double risk_weight = 1.0, density_weight = 1.0;
  std::uint64_t seed = 0;

  os::EnvConfig config() const {
    os::EnvConfig c;
    c.horizon = horizon;
    c.k = k;
    c.share_rule = os::parse_share_rule(share_rule);
    c.risk_weight = risk_weight;
    c.density_weight = density_weight;
    c.seed = seed;
    return c;
  }
};

void add_inputs(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--net", in.net, "segments.csv");
  cmd->add_option("--trips", in.trips, "trips.csv");
  cmd->add_option("--weather", in.weather, "weather.csv");
  cmd->add_option("--collisions", in.collisions, "collisions.csv");
  cmd->add_option("--threads", in.threads, "assignment workers");
}

void add_env(CLI::App* cmd, EnvOptions& e) {
  cmd->add_option("--horizon", e.horizon, "steps per episode");
  cmd->add_option("--k", e.k, "alternative paths per rerouted direction");
  cmd->add_option("--share-rule", e.share_rule, "inverse | literal");
  cmd->add_option("--risk-weight", e.risk_weight);
  cmd->add_option("--density-weight", e.density_weight);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw os::Error(os::ErrorCode::Io, "cannot write " + path);
  out << text;
}

os::RunManifest manifest_for(const std::string& command, const Json& config, const Inputs& in, bool corpus_inputs) {
  os::RunManifest m;
  m.command = command;
  m.config_json = config.dump();
  if (corpus_inputs) {
    const auto p = in.corpus();
    for (const auto& f : {p.net, p.trips, p.weather, p.collisions}) m.add_input(f);
  }
  return m;
}

std::string manifest_path(const std::string& artifact) { return artifact + ".manifest.json"; }

std::vector<os::SegmentId> parse_ids(const std::string& text) {
  std::vector<os::SegmentId> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      ids.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw os::Error(os::ErrorCode::BadValue, "segment id '" + item + "' is not an integer");
    }
  }
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"openstreets: street-opening planner toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Inputs in;
  const char* env_dir = std::getenv("OPENSTREETS_DATA_DIR");
  in.data_dir = env_dir ? env_dir : ".";
  app.add_option("--data", in.data_dir, "data directory (default $OPENSTREETS_DATA_DIR or .)");
  EnvOptions env_opts;
  app.add_option("--seed", env_opts.seed, "master seed");

  // synth
  os::SynthConfig synth;
  std::string scenario = "plain";
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic corpus");
  c_synth->add_option("--rows", synth.rows);
  c_synth->add_option("--cols", synth.cols);
  c_synth->add_option("--days", synth.days);
  c_synth->add_option("--trips-per-day", synth.trips_per_day);
  c_synth->add_option("--scenario", scenario, "plain | detour_magnet");
  c_synth->add_option("--out", synth_out, "output directory (default: data directory)");

  // ingest
  std::string geojson_out;
  auto* c_ingest = app.add_subcommand("ingest", "validate the corpus CSVs and summarize them");
  add_inputs(c_ingest, in);
  c_ingest->add_option("--geojson", geojson_out, "also write the network as GeoJSON");

  // assign
  std::string volumes_out;
  auto* c_assign = app.add_subcommand("assign", "assign trips and write per-segment daily volumes");
  add_inputs(c_assign, in);
  c_assign->add_option("--out", volumes_out, "volumes CSV (default: <data>/volumes.csv)");

  // train-collision
  os::CollisionModelConfig model_cfg;
  os::CollisionTrainConfig train_cfg;
  bool lite = false;
  double test_fraction = 0.25;
  auto* c_trainc = app.add_subcommand("train-collision", "train the recurrent graph collision model");
  add_inputs(c_trainc, in);
  c_trainc->add_option("--model", in.model, "output checkpoint (default: <data>/collision.oslm)");
  c_trainc->add_option("--epochs", train_cfg.epochs);
  c_trainc->add_option("--lr", train_cfg.learning_rate);
  c_trainc->add_option("--hidden", model_cfg.hidden);
  c_trainc->add_option("--layers", model_cfg.layers);
  c_trainc->add_option("--window", model_cfg.window);
  c_trainc->add_option("--test-fraction", test_fraction);
  c_trainc->add_flag("--lite", lite, "16 hidden units, one recurrent layer");

  // eval-collision
  double threshold = 0.5;
  bool importance = false;
  auto* c_evalc = app.add_subcommand("eval-collision", "evaluate the collision model on held-out windows");
  add_inputs(c_evalc, in);
  c_evalc->add_option("--model", in.model);
  c_evalc->add_option("--threshold", threshold);
  c_evalc->add_option("--test-fraction", test_fraction);
  c_evalc->add_flag("--importance", importance, "add integrated-gradient feature importance");

  // train-q
  os::QConfig qcfg;
  os::QNetworkConfig qnet_cfg;
  auto* c_trainq = app.add_subcommand("train-q", "train the street-opening Q-network");
  add_inputs(c_trainq, in);
  add_env(c_trainq, env_opts);
  c_trainq->add_option("--model", in.model);
  c_trainq->add_option("--qmodel", in.qmodel, "output checkpoint (default: <data>/qnetwork.oslm)");
  c_trainq->add_option("--episodes", qcfg.episodes);
  c_trainq->add_option("--gamma", qcfg.gamma);
  c_trainq->add_option("--epsilon-start", qcfg.epsilon_start);
  c_trainq->add_option("--epsilon-end", qcfg.epsilon_end);
  c_trainq->add_option("--epsilon-decay", qcfg.epsilon_decay_fraction, "fraction of planned steps");
  c_trainq->add_option("--replay", qcfg.replay_capacity);
  c_trainq->add_option("--batch", qcfg.batch_size);
  c_trainq->add_option("--sync", qcfg.target_sync, "updates between target copies");
  c_trainq->add_option("--lr", qcfg.learning_rate);
  c_trainq->add_option("--updates-per-step", qcfg.updates_per_step, "batch updates per environment step");
  c_trainq->add_option("--hidden", qnet_cfg.hidden);
  c_trainq->add_option("--layers", qnet_cfg.layers);

  // rank
  std::size_t top = 121;
  std::string date_text, out_path;
  auto* c_rank = app.add_subcommand("rank", "rank segments by Q-value");
  add_inputs(c_rank, in);
  add_env(c_rank, env_opts);
  c_rank->add_option("--model", in.model);
  c_rank->add_option("--qmodel", in.qmodel);
  c_rank->add_option("--top", top);
  c_rank->add_option("--date", date_text, "day to rank (default: first scoreable day)");
  c_rank->add_option("--out", out_path, "rankings.json (default: stdout)");

  // compare
  int episodes = 20;
  std::string designated;
  auto* c_compare = app.add_subcommand("compare", "compare q_top, random and designated policies");
  add_inputs(c_compare, in);
  add_env(c_compare, env_opts);
  c_compare->add_option("--model", in.model);
  c_compare->add_option("--qmodel", in.qmodel);
  c_compare->add_option("--episodes", episodes);
  c_compare->add_option("--designated", designated, "comma-separated segment ids, or 'answer-key'");
  c_compare->add_option("--out", out_path, "compare.json (default: stdout)");

  // export-map
  std::string overlay = "none";
  auto* c_export = app.add_subcommand("export-map", "write the network as GeoJSON with an overlay");
  add_inputs(c_export, in);
  add_env(c_export, env_opts);
  c_export->add_option("--model", in.model);
  c_export->add_option("--qmodel", in.qmodel);
  c_export->add_option("--overlay", overlay, "none | q | risk | volume");
  c_export->add_option("--date", date_text);
  c_export->add_option("--out", out_path, "GeoJSON file (default: stdout)");

  // serve
  int port = 8080;
  std::string host = "127.0.0.1";
  auto* c_serve = app.add_subcommand("serve", "run the what-if HTTP service");
  add_inputs(c_serve, in);
  add_env(c_serve, env_opts);
  c_serve->add_option("--model", in.model);
  c_serve->add_option("--qmodel", in.qmodel, "optional Q-network checkpoint");
  c_serve->add_option("--port", port);
  c_serve->add_option("--host", host);

  // describe
  std::string ckpt_path;
  auto* c_describe = app.add_subcommand("describe", "print a checkpoint's configuration and blocks");
  c_describe->add_option("checkpoint", ckpt_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    auto load = [&] { return os::load_corpus(in.corpus(), in.threads); };
    auto load_model = [&] { return os::CollisionModel::from_checkpoint(os::nn::load_checkpoint(in.model_path())); };
    auto load_qnet = [&] { return os::QNetwork::from_checkpoint(os::nn::load_checkpoint(in.qmodel_path())); };
    auto pick_day = [&](const os::Environment& env) {
      if (date_text.empty()) return env.scoreable_days().front();
      return env.corpus().day_index(os::Date::parse(date_text));
    };
    auto emit = [&](const std::string& text) {
      if (out_path.empty()) {
        std::cout << text;
      } else {
        write_text(out_path, text);
      }
    };

    if (*c_synth) {
      synth.seed = env_opts.seed;
      synth.scenario = os::parse_scenario(scenario);
      const std::string dir = synth_out.empty() ? in.data_dir : synth_out;
      const os::SynthCorpus sc = os::generate(synth);
      os::write_synth(sc, dir);
      os::RunManifest m;
      m.command = "synth";
      m.config_json = Json{{"rows", synth.rows},
                           {"cols", synth.cols},
                           {"days", synth.days},
                           {"trips_per_day", synth.effective_trips_per_day()},
                           {"scenario", scenario}}
                          .dump();
      m.seeds["synth"] = synth.seed;
      for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name == "segments.csv" || name == "trips.csv" || name == "weather.csv" || name == "collisions.csv" ||
            name == "truth.json" || name == "answer_key.json") {
          m.add_output(e.path().string());
        }
      }
      m.write(dir + "/synth.manifest.json");
      std::cout << Json{{"out", dir}, {"bayes_macro_recall", os::bayes_report(sc).macro_recall}}.dump() << "\n";
      return 0;
    }

    if (*c_ingest) {
      const os::Corpus corpus = load();
      const auto& net = corpus.network();
      std::size_t trips = 0;
      for (std::size_t d = 0; d < corpus.day_count(); ++d) trips += corpus.trips(d).size();
      Json j{{"segments", net.segment_count()},
             {"intersections", net.intersection_count()},
             {"days", corpus.day_count()},
             {"trips", trips},
             {"unroutable", corpus.unroutable().size()},
             {"network_warnings", net.warnings()},
             {"corpus_warnings", corpus.warnings()}};
      if (!corpus.days().empty()) {
        j["first_day"] = corpus.days().front().iso();
        j["last_day"] = corpus.days().back().iso();
      }
      if (!geojson_out.empty()) write_text(geojson_out, os::export_geojson(net, {}));
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*c_assign) {
      const os::Corpus corpus = load();
      const auto& net = corpus.network();
      std::ostringstream csv;
      csv << "date,segment_id,volume\n";
      for (std::size_t d = 0; d < corpus.day_count(); ++d) {
        const auto v = os::segment_volumes(net.primal(), corpus.base_volumes(d));
        for (std::size_t i = 0; i < v.size(); ++i) {
          csv << corpus.days()[d].iso() << ',' << net.segment(i).segment_id << ',' << v[i] << '\n';
        }
      }
      const std::string path = volumes_out.empty() ? in.data_dir + "/volumes.csv" : volumes_out;
      write_text(path, csv.str());
      auto m = manifest_for("assign", Json::object(), in, true);
      m.add_output(path);
      m.write(manifest_path(path));
      std::cout << Json{{"out", path}, {"unroutable", corpus.unroutable().size()}}.dump() << "\n";
      return 0;
    }

    if (*c_trainc) {
      if (lite) {
        const int window = model_cfg.window;
        model_cfg = os::CollisionModelConfig::lite();
        model_cfg.window = window;
      }
      model_cfg.seed = env_opts.seed;
      train_cfg.seed = env_opts.seed;
      const os::Corpus corpus = load();
      const os::Dataset data = os::build_dataset(corpus, model_cfg.window, test_fraction);
      const auto& graph = corpus.network().dual();
      const os::CollisionTraining t = os::train_collision(data, graph, model_cfg, train_cfg);
      const std::string path = in.model_path();
      os::nn::save_checkpoint(path, t.model.to_checkpoint());
      const os::EvalReport rep = os::evaluate(t.model, data, graph);
      Json cfg{{"hidden", model_cfg.hidden},   {"layers", model_cfg.layers},      {"window", model_cfg.window},
               {"epochs", train_cfg.epochs},   {"lr", train_cfg.learning_rate},   {"test_fraction", test_fraction},
               {"pos_weight", t.history.pos_weight}};
      auto m = manifest_for("train-collision", cfg, in, true);
      m.seeds["model"] = model_cfg.seed;
      m.seeds["shuffle"] = train_cfg.seed;
      m.add_output(path);
      m.write(manifest_path(path));
      std::cout << Json{{"model", path},
                        {"epoch_loss", t.history.epoch_loss},
                        {"pos_weight", t.history.pos_weight},
                        {"test", Json::parse(rep.to_json())}}
                       .dump(2)
                << "\n";
      return 0;
    }

    if (*c_evalc) {
      const os::CollisionModel model = load_model();
      const os::Corpus corpus = load();
      os::Dataset data = os::build_dataset(corpus, model.window(), test_fraction);
      const auto& graph = corpus.network().dual();
      // Score with the model's own preprocessing.
      for (std::size_t d = 0; d < data.raw.size(); ++d) data.features[d] = model.standardizer.apply(data.raw[d]);
      data.standardizer = model.standardizer;
      Json j = Json::parse(os::evaluate(model, data, graph, threshold).to_json());
      if (importance) {
        const auto fa = os::feature_importance(model, data, graph);
        Json imp = Json::object();
        for (std::size_t f = 0; f < fa.mean.size(); ++f) imp[os::feature_names()[f]] = fa.mean[f];
        j["feature_importance"] = imp;
      }
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*c_trainq || *c_rank || *c_compare || *c_export || *c_serve) {
      const os::CollisionModel model = load_model();
      std::optional<os::QNetwork> qnet;
      if (*c_rank || *c_compare || (*c_export && overlay == "q")) qnet = load_qnet();
      if (*c_serve && std::filesystem::exists(in.qmodel_path())) qnet = load_qnet();
      const os::Corpus corpus = load();
      const os::Environment env(corpus, model, env_opts.config());

      if (*c_trainq) {
        qcfg.seed = env_opts.seed;
        qnet_cfg.seed = env_opts.seed;
        const os::QTraining t = os::train_q(env, qnet_cfg, qcfg);
        const std::string path = in.qmodel_path();
        os::nn::save_checkpoint(path, t.network.to_checkpoint());
        Json cfg{{"gamma", qcfg.gamma},
                 {"epsilon_start", qcfg.epsilon_start},
                 {"epsilon_end", qcfg.epsilon_end},
                 {"epsilon_decay_fraction", qcfg.epsilon_decay_fraction},
                 {"replay_capacity", qcfg.replay_capacity},
                 {"batch_size", qcfg.batch_size},
                 {"target_sync", qcfg.target_sync},
                 {"episodes", qcfg.episodes},
                 {"lr", qcfg.learning_rate},
                 {"hidden", qnet_cfg.hidden},
                 {"layers", qnet_cfg.layers},
                 {"horizon", env_opts.horizon},
                 {"k", env_opts.k},
                 {"share_rule", env_opts.share_rule}};
        auto m = manifest_for("train-q", cfg, in, true);
        m.add_input(in.model_path());
        m.seeds["q"] = qcfg.seed;
        m.seeds["env"] = env_opts.seed;
        m.normalizer_day = corpus.days()[env.normalizer_day()].iso();
        m.add_output(path);
        m.write(manifest_path(path));
        std::cout << Json{{"qmodel", path},
                          {"episode_rewards", t.history.episode_rewards},
                          {"steps", t.history.steps},
                          {"updates", t.history.updates},
                          {"syncs", t.history.syncs}}
                         .dump(2)
                  << "\n";
        return 0;
      }

      if (*c_rank) {
        const os::DayState s = env.make_state(pick_day(env), {});
        emit(os::rankings_json(os::rank_segments(*qnet, env, s, top)));
        return 0;
      }

      if (*c_compare) {
        std::vector<os::SegmentId> ids;
        if (designated == "answer-key") {
          std::ifstream key(in.data_dir + "/answer_key.json");
          if (!key) throw os::Error(os::ErrorCode::Io, "cannot read " + in.data_dir + "/answer_key.json");
          ids = Json::parse(key).at("designated").get<std::vector<os::SegmentId>>();
        } else {
          ids = parse_ids(designated);
        }
        const os::PolicyComparison cmp = os::compare_policies(env, &*qnet, ids, episodes, env_opts.seed);
        for (const auto& w : cmp.warnings) std::cerr << "warning: " << w << "\n";
        emit(cmp.to_json());
        return 0;
      }

      if (*c_export) {
        os::SegmentOverlay values;
        const os::DayState s = env.make_state(pick_day(env), {});
        const auto& net = env.network();
        if (overlay == "q") {
          const auto q = os::segment_q_values(*qnet, env, s);
          for (std::size_t i = 0; i < q.size(); ++i) values[net.segment(i).segment_id] = q[i];
        } else if (overlay == "volume") {
          for (std::size_t i = 0; i < s.segment_volumes.size(); ++i) {
            values[net.segment(i).segment_id] = s.segment_volumes[i];
          }
        } else if (overlay == "risk") {
          const std::size_t w = static_cast<std::size_t>(model.window());
          std::vector<os::MatrixD> raw;
          for (std::size_t j = s.day + 1 - w; j <= s.day; ++j) {
            raw.push_back(os::day_features(net, os::segment_volumes(net.primal(), corpus.base_volumes(j)),
                                           corpus.weather(j), corpus.days()[j]));
          }
          const auto p = model.predict(raw, net.dual());
          for (std::size_t i = 0; i < p.size(); ++i) values[net.segment(i).segment_id] = p[i];
        } else if (overlay != "none") {
          throw os::Error(os::ErrorCode::BadValue, "unknown overlay '" + overlay + "'");
        }
        emit(os::export_geojson(net, values));
        return 0;
      }

      if (*c_serve) {
        os::Service service(env, qnet ? &*qnet : nullptr);
        std::cerr << "serving on http://" << host << ":" << port << "\n";
        if (!service.listen(host, port)) throw os::Error(os::ErrorCode::Io, "cannot listen on port " + std::to_string(port));
        return 0;
      }
    }

    if (*c_describe) {
      std::cout << os::nn::describe_checkpoint(os::nn::load_checkpoint(ckpt_path)) << "\n";
      return 0;
    }
  } catch (const os::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
