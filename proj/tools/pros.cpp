// pros: command-line entry point (generate, index, train, query, bench, serve).

#include "pros/bench.hpp"
#include "pros/error.hpp"
#include "pros/service.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

  using nlohmann::json;
  using namespace pros;

  std::shared_ptr<const Dataset> open_dataset(const std::string& path) {
    return std::make_shared<const Dataset>(load_dataset(load_descriptor(path)));
  }

  std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (item.find_first_not_of(" \t\r\n", used) != std::string::npos) { throw std::invalid_argument(item); }
      } catch (const std::exception&) {
        throw InvalidArgument("cannot parse query value '" + item + "'");
      }
    }
    return out;
  }

  std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) { throw IoError("cannot read " + path); }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  struct Common {
    std::string dataset;
    std::string index;
    std::string bundle;
    std::optional<std::size_t> k;
    std::string distance = "ed";
    std::string policy = "none";
    std::uint64_t seed = 42;
  };

  // k defaults to the bundle's; an explicit k that disagrees is an error.
  std::size_t resolve_k(const Common& c, const GuaranteeBundle& b) { return c.k.value_or(b.k); }

  QueryService* g_service = nullptr;
  void on_signal(int) {
    if (g_service != nullptr) { g_service->shutdown(); }
  }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive similarity search with probabilistic quality guarantees"};
  app.require_subcommand(1);
  Common c;

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset (raw float32 + JSON sidecar)");
  std::string gen_kind = "random_walk";
  std::size_t gen_count = 100000;
  std::size_t gen_length = 64;
  double gen_amplitude = 3.0;
  std::string gen_out;
  gen->add_option("--kind", gen_kind, "random_walk | cbf")->check(CLI::IsMember({"random_walk", "cbf"}));
  gen->add_option("--count", gen_count, "Number of series");
  gen->add_option("--length", gen_length, "Series length");
  gen->add_option("--amplitude", gen_amplitude, "CBF amplitude");
  gen->add_option("--seed", c.seed, "Dataset seed");
  gen->add_option("--out", gen_out, "Raw output path; the sidecar is <out>.json")->required();

  // index
  auto* idx = app.add_subcommand("index", "Build and save an index");
  std::string idx_kind = "isax";
  std::size_t idx_leaf = 100;
  std::size_t idx_segments = 16;
  std::size_t idx_holdout = 0;
  std::string idx_out;
  idx->add_option("--dataset", c.dataset, "Dataset sidecar (.json)")->required();
  idx->add_option("--kind", idx_kind, "isax | dstree")->check(CLI::IsMember({"isax", "dstree"}));
  idx->add_option("--leaf-size", idx_leaf, "Leaf capacity");
  idx->add_option("--segments", idx_segments, "Summary segments");
  idx->add_option("--holdout", idx_holdout, "Series kept out of the index for training queries and witnesses");
  idx->add_option("--seed", c.seed, "Holdout seed");
  idx->add_option("--out", idx_out, "Index file")->required();

  // train
  auto* train = app.add_subcommand("train", "Collect training queries and fit a guarantee bundle");
  std::size_t n_w = 200;
  std::size_t n_r = 100;
  double bw_scale = 1.0;
  std::string bw_rule = "full";
  bool no_kde3 = false;
  std::vector<std::size_t> train_checkpoints;
  std::string train_out;
  train->add_option("--dataset", c.dataset, "Dataset sidecar (.json)")->required();
  train->add_option("--index", c.index, "Index file")->required();
  train->add_option("--k", c.k, "Neighbors");
  train->add_option("--distance", c.distance, "ed | dtw:<radius>");
  train->add_option("--witnesses", n_w, "Witness count");
  train->add_option("--queries", n_r, "Training query count");
  train->add_option("--checkpoints", train_checkpoints, "Checkpoints in leaves");
  train->add_option("--bandwidth-scale", bw_scale, "KDE bandwidth multiplier");
  train->add_option("--bandwidth-rule", bw_rule, "full | diagonal")->check(CLI::IsMember({"full", "diagonal"}));
  train->add_flag("--no-kde3", no_kde3, "Skip the 3D density");
  train->add_option("--seed", c.seed, "Draw seed");
  train->add_option("--out", train_out, "Bundle file (.json)")->required();

  // query
  auto* query = app.add_subcommand("query", "Run one progressive query under a stopping policy");
  std::optional<std::size_t> q_series;
  std::string q_values;
  std::string q_values_file;
  std::string q_estimator = "kde2";
  double q_theta = 0.05;
  bool q_no_audit = false;
  query->add_option("--dataset", c.dataset, "Dataset sidecar (.json)")->required();
  query->add_option("--index", c.index, "Index file")->required();
  query->add_option("--bundle", c.bundle, "Bundle file")->required();
  query->add_option("--k", c.k, "Neighbors (must match the bundle)");
  query->add_option("--distance", c.distance, "ed | dtw:<radius>");
  query->add_option("--policy", c.policy, "none | time:phi=.. | prob:phi=.. | class:phi=.. | distance:eps=..,theta=..");
  auto* q_series_opt = query->add_option("--series", q_series, "Dataset series index used as the query");
  auto* q_values_opt = query->add_option("--values", q_values, "Comma-separated query values");
  auto* q_file_opt = query->add_option("--values-file", q_values_file, "File with comma-separated query values");
  q_series_opt->excludes(q_values_opt)->excludes(q_file_opt);
  q_values_opt->excludes(q_file_opt);
  query->add_option("--estimator", q_estimator, "Estimator reported with each event");
  query->add_option("--theta", q_theta, "Estimator level");
  query->add_flag("--no-audit", q_no_audit, "Skip the exact re-run after an early stop");
  query->add_option("--seed", c.seed, "Unused; accepted for symmetry");

  // bench
  auto* bench = app.add_subcommand("bench", "Monte Carlo benchmark of estimators and policies");
  std::string b_preset = "desk";
  std::string b_config;
  std::optional<std::size_t> b_reps;
  std::optional<std::uint64_t> b_seed;
  std::string b_out = "report.json";
  std::string b_csv;
  bool b_wallclock = false;
  bench->add_option("--preset", b_preset, "desk | desk25 | cbf | cbf1 | tiny");
  bench->add_option("--config", b_config, "JSON bench configuration (overrides --preset)");
  bench->add_option("--dataset", c.dataset, "Dataset sidecar used instead of generating one");
  bench->add_option("--repetitions", b_reps, "Override repetition count");
  bench->add_option("--seed", b_seed, "Override draw seed");
  bench->add_flag("--wallclock", b_wallclock, "Also time live runs");
  bench->add_option("--out", b_out, "Report JSON");
  bench->add_option("--csv", b_csv, "Report CSV");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP service streaming progressive query events");
  std::string s_host = "127.0.0.1";
  int s_port = 8080;
  std::size_t s_workers = 2;
  std::string s_estimator = "kde2";
  std::string s_console;
  serve->add_option("--dataset", c.dataset, "Dataset sidecar (.json)")->required();
  serve->add_option("--index", c.index, "Index file")->required();
  serve->add_option("--bundle", c.bundle, "Bundle file")->required();
  serve->add_option("--k", c.k, "Neighbors (must match the bundle)");
  serve->add_option("--distance", c.distance, "ed | dtw:<radius>");
  serve->add_option("--policy", c.policy, "Default stopping policy");
  serve->add_option("--host", s_host, "Bind address");
  serve->add_option("--port", s_port, "Port");
  serve->add_option("--workers", s_workers, "Concurrent queries");
  serve->add_option("--estimator", s_estimator, "Estimator reported with each event");
  serve->add_option("--console", s_console, "Directory of static console assets");
  serve->add_option("--seed", c.seed, "Unused; accepted for symmetry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DatasetDescriptor d;
      if (gen_kind == "random_walk") {
        d = generate_random_walk(gen_out, gen_count, gen_length, c.seed);
      } else {
        d = generate_cbf(gen_out, gen_count, gen_length, CbfParams{gen_amplitude, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, c.seed);
      }
      std::cout << descriptor_path_for(gen_out).string() << "\n";
    } else if (*idx) {
      auto ds = open_dataset(c.dataset);
      IndexConfig cfg;
      cfg.kind = parse_index_kind(idx_kind);
      cfg.leaf_threshold = idx_leaf;
      cfg.segment_count = idx_segments;
      IndexTree tree;
      if (idx_holdout > 0) {
        const auto pools = sample_pools(ds->size(), 0, idx_holdout, c.seed);
        const auto kept = ids_outside_pools(pools, ds->size());
        tree = build_index(ds, cfg, std::span<const std::uint32_t>(kept));
      } else {
        tree = build_index(ds, cfg);
      }
      save_index(tree, idx_out);
      std::cout << json{{"index", idx_out},
                        {"kind", to_string(cfg.kind)},
                        {"indexed", tree.indexed_count()},
                        {"held_out", ds->size() - tree.indexed_count()},
                        {"leaves", tree.leaf_count()}}
                       .dump()
                << "\n";
    } else if (*train) {
      auto ds = open_dataset(c.dataset);
      const auto tree = load_index(c.index, ds);
      const auto held = tree.held_out_ids();
      if (held.size() < n_w + n_r) {
        throw InvalidArgument("training needs " + std::to_string(n_w + n_r) + " series outside the index, found " +
                              std::to_string(held.size()) + "; rebuild it with 'index --holdout'");
      }
      const auto split = sample_pools(held.size(), n_w, n_r, c.seed);
      std::vector<std::uint32_t> witness_ids;
      std::vector<std::uint32_t> query_ids;
      for (auto p : split.witness_pool) { witness_ids.push_back(held[p]); }
      for (auto p : split.query_pool) { query_ids.push_back(held[p]); }

      CollectConfig collect;
      collect.k = c.k.value_or(1);
      collect.distance = DistanceKind::parse(c.distance);
      const auto ws = make_witness_set(tree, *ds, witness_ids, collect.k, collect.distance);
      const auto records = collect_training(tree, *ds, query_ids, ws, collect);
      TrainingConfig tc;
      if (!train_checkpoints.empty()) { tc.checkpoints = train_checkpoints; }
      tc.bandwidth_scale = bw_scale;
      tc.bandwidth_rule = bw_rule == "full" ? BandwidthRule::full : BandwidthRule::diagonal;
      tc.fit_kde3 = !no_kde3;
      const auto bundle = fit_bundle(records, ws, tree, collect, tc);
      save_bundle(bundle, train_out);
      std::cout << json{{"bundle", train_out}, {"k", collect.k}, {"witnesses", n_w}, {"queries", n_r}}.dump() << "\n";
    } else if (*query) {
      auto ds = open_dataset(c.dataset);
      const auto tree = load_index(c.index, ds);
      const auto bundle = load_bundle(c.bundle);
      std::vector<double> values;
      if (q_series) {
        if (*q_series >= ds->size()) { throw InvalidArgument("--series is out of range"); }
        values = ds->series_as_double(*q_series);
      } else if (!q_values.empty()) {
        values = parse_values(q_values);
      } else if (!q_values_file.empty()) {
        values = parse_values(read_file(q_values_file));
      } else {
        throw InvalidArgument("give one of --series, --values or --values-file");
      }
      if (values.size() != tree.series_length()) {
        throw InvalidArgument("query has length " + std::to_string(values.size()) + ", index expects " +
                              std::to_string(tree.series_length()));
      }
      ServiceConfig sc;
      sc.k = resolve_k(c, bundle);
      sc.distance = DistanceKind::parse(c.distance);
      sc.estimator = parse_estimator(q_estimator);
      sc.theta = q_theta;
      RunConfig rc;
      rc.k = sc.k;
      rc.distance = sc.distance;
      rc.audit = !q_no_audit;
      const auto policy = StoppingPolicy::parse(c.policy);
      const double wd = bundle.witnesses.ids.empty()
                            ? 0.0
                            : witness_weighted_distance(values, bundle.witnesses, sc.distance, bundle.witness_exponent);
      json events = json::array();
      auto on_event = [&](const ProgressiveEvent& e, const Decision&) {
        std::vector<std::int32_t> labels;
        if (ds->has_labels()) { labels = labels_of(*ds, e.bsf_ids); }
        events.push_back(make_event_json(bundle, sc, e, wd, std::nullopt, labels, SessionState::running, false));
      };
      const auto out = run_with_policy(tree, bundle, values, policy, rc, on_event);
      json answer = json::array();
      for (const auto& n : out.answer) { answer.push_back({{"id", n.id}, {"distance", n.distance}}); }
      json j{{"answer", answer},
             {"stopped_at", out.stopped_at},
             {"stopped", out.stopped},
             {"stop_reason", out.stop_reason},
             {"time_bound", out.time_bound ? json(*out.time_bound) : json(nullptr)},
             {"events", events}};
      if (rc.audit) {
        j["total_leaves"] = out.total_leaves ? json(*out.total_leaves) : json(nullptr);
        j["savings"] = out.savings();
        j["exact"] = out.was_exact;
        j["family_error"] = out.family_error;
        if (out.exact_class) {
          j["class"] = out.predicted_class ? json(*out.predicted_class) : json(nullptr);
          j["exact_class"] = *out.exact_class;
        }
      }
      std::cout << j.dump(2) << "\n";
    } else if (*bench) {
      BenchConfig cfg = b_config.empty() ? bench_preset(b_preset) : BenchConfig::from_json(json::parse(read_file(b_config)));
      if (!c.dataset.empty()) { cfg.dataset.descriptor = c.dataset; }
      if (b_reps) { cfg.repetitions = *b_reps; }
      if (b_seed) { cfg.seed = *b_seed; }
      if (b_wallclock) { cfg.wallclock = true; }
      const auto report = run_bench(cfg);
      write_report(report, b_out, b_csv.empty() ? std::nullopt : std::optional<std::filesystem::path>(b_csv));
      std::cout << report.to_csv();
    } else if (*serve) {
      auto ds = open_dataset(c.dataset);
      auto tree = std::make_shared<const IndexTree>(load_index(c.index, ds));
      auto bundle = std::make_shared<const GuaranteeBundle>(load_bundle(c.bundle));
      ServiceConfig sc;
      sc.k = resolve_k(c, *bundle);
      sc.distance = DistanceKind::parse(c.distance);
      sc.policy = StoppingPolicy::parse(c.policy);
      sc.estimator = parse_estimator(s_estimator);
      sc.workers = s_workers;
      sc.dataset_name = std::filesystem::path(c.dataset).stem().stem().string();
      if (!s_console.empty()) { sc.console_dir = s_console; }
      QueryService service(tree, bundle, sc);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on " << s_host << ":" << s_port << "\n";
      service.listen(s_host, s_port);
      g_service = nullptr;
    }
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
