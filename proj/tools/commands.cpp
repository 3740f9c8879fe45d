#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "hyloc/baselines.hpp"
#include "hyloc/errors.hpp"
#include "hyloc/eval.hpp"
#include "hyloc/fusion.hpp"
#include "hyloc/gradcheck.hpp"
#include "hyloc/rf_loc.hpp"
#include "hyloc/rng.hpp"
#include "hyloc/scenarios.hpp"
#include "hyloc/world_sim.hpp"

namespace hyloc::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using ojson = nlohmann::ordered_json;

std::string RunManifest::to_json() const {
  ojson j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed ? ojson(*seed) : ojson(nullptr);
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version;
  j["wall_time_s"] = wall_time_s;
  return j.dump(2) + "\n";
}

fs::path manifest_path(const fs::path& out, bool out_is_dir) {
  return out_is_dir ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
}

namespace {

using Clock = std::chrono::steady_clock;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

RunManifest finish(RunManifest m, const fs::path& out, bool out_is_dir, Clock::time_point start) {
  m.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  write_file(manifest_path(out, out_is_dir), m.to_json());
  return m;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,x,y\n";
  for (const auto& s : traj.samples()) out += num(s.t) + "," + num(s.value.x) + "," + num(s.value.y) + "\n";
  return out;
}

ojson summary_json(const std::string& method, const AteSummary& s) {
  return ojson{{"method", method}, {"mean", s.mean},  {"median", s.median},
               {"std", s.std},     {"max", s.max},    {"count", s.count}};
}

AnchorSelectorModel load_selector(const fs::path& path) { return AnchorSelectorModel::from_json(read_file(path)); }

// --- training config ---------------------------------------------------------------

struct TrainSettings {
  TrainOptions options;
  double train_fraction = 1.0;
  FusionConfig fusion;
  BlackboxConfig blackbox;
};

template <typename T>
T ini_get(const pt::ptree& tree, const std::string& key, T fallback) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const pt::ptree_error&) {
    throw ValidationError(key + ": bad value");
  }
}

TrainSettings load_train_settings(const std::optional<fs::path>& path) {
  TrainSettings s;
  if (!path) return s;
  pt::ptree tree;
  std::istringstream in(read_file(*path));
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), static_cast<int>(e.line()));
  }
  auto& o = s.options;
  o.epochs = ini_get(tree, "train.epochs", o.epochs);
  o.batch_size = ini_get(tree, "train.batch_size", o.batch_size);
  o.learning_rate = ini_get(tree, "train.learning_rate", o.learning_rate);
  o.lr_decay = ini_get(tree, "train.lr_decay", o.lr_decay);
  o.grad_clip = ini_get(tree, "train.grad_clip", o.grad_clip);
  s.train_fraction = ini_get(tree, "train.train_fraction", s.train_fraction);
  auto& f = s.fusion;
  f.window = ini_get(tree, "fusion.window", f.window);
  f.k = ini_get(tree, "fusion.k", f.k);
  f.conv1 = ini_get(tree, "fusion.conv1", f.conv1);
  f.conv2 = ini_get(tree, "fusion.conv2", f.conv2);
  f.kernel = ini_get(tree, "fusion.kernel", f.kernel);
  f.lstm_hidden = ini_get(tree, "fusion.lstm_hidden", f.lstm_hidden);
  f.lstm_layers = ini_get(tree, "fusion.lstm_layers", f.lstm_layers);
  f.fc_hidden = ini_get(tree, "fusion.fc_hidden", f.fc_hidden);
  f.swap_attention = ini_get(tree, "fusion.swap_attention", f.swap_attention);
  auto& b = s.blackbox;
  b.window = ini_get(tree, "blackbox.window", b.window);
  b.rf_dense = ini_get(tree, "blackbox.rf_dense", b.rf_dense);
  b.vo_dense = ini_get(tree, "blackbox.vo_dense", b.vo_dense);
  b.embed = ini_get(tree, "blackbox.embed", b.embed);
  b.kernel = ini_get(tree, "blackbox.kernel", b.kernel);
  b.lstm_hidden = ini_get(tree, "blackbox.lstm_hidden", b.lstm_hidden);
  b.lstm_layers = ini_get(tree, "blackbox.lstm_layers", b.lstm_layers);
  b.fc_hidden = ini_get(tree, "blackbox.fc_hidden", b.fc_hidden);
  if (o.epochs < 1) throw ValidationError("train.epochs: must be at least 1");
  if (o.batch_size < 1) throw ValidationError("train.batch_size: must be at least 1");
  if (!(o.learning_rate > 0.0)) throw ValidationError("train.learning_rate: must be positive");
  return s;
}

void apply_ablation(FusionConfig& c, const std::string& ablate) {
  if (ablate == "none") return;
  if (ablate == "no-attention") {
    c.no_cross_attention = true;
  } else if (ablate == "no-anchor-selection") {
    c.no_anchor_selection = true;
  } else {
    throw ValidationError("--ablate: unknown variant '" + ablate + "'");
  }
}

std::vector<Trace> load_traces(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw ValidationError("--trace: at least one trace is required");
  std::vector<Trace> out;
  for (const auto& p : paths) out.push_back(read_trace(p));
  for (const auto& t : out)
    if (t.layout.anchors().size() != out.front().layout.anchors().size())
      throw ValidationError("traces have different anchor counts");
  return out;
}

struct Trained {
  TrainResult result;
  AteSummary test;
};

/// Splits the sequences, optionally subsamples the training windows, trains
/// and measures the held-out test windows.
Trained train_and_test(WindowModel& model, const std::vector<SensorSequence>& seqs, const TrainOptions& options,
                       double train_fraction) {
  auto split = split_windows(seqs, model.window(), {});
  if (train_fraction <= 0.0 || train_fraction > 1.0)
    throw ValidationError("train_fraction: must lie in (0, 1]");
  if (train_fraction < 1.0) split.train = subsample_windows(split.train, train_fraction, options.seed);
  Trained out;
  out.result = train_network(model, seqs, split.train, split.val, options);
  out.test = summarize_errors(window_errors(model, seqs, split.test));
  return out;
}

std::vector<SensorSequence> sequences_for(const FusionModel& model, const std::vector<Trace>& traces) {
  std::vector<SensorSequence> out;
  for (const auto& t : traces) out.push_back(model.sequence(t));
  return out;
}

}  // namespace

// --- commands ------------------------------------------------------------------------------

RunManifest cmd_simulate(const SimulateArgs& args) {
  const auto start = Clock::now();
  if (args.config.has_value() == !args.preset.empty())
    throw ValidationError("simulate: give exactly one of --config or --preset");
  ScenarioConfig cfg = args.config ? load_scenario_config(*args.config)
                                   : preset_scenario(args.preset, args.seed, args.duration.value_or(120.0));
  cfg.seed = args.seed;
  if (args.duration) cfg.duration = *args.duration;
  cfg.validate();
  const Trace trace = run_scenario(cfg);
  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  write_trace(trace, args.out);
  RunManifest m{"simulate", args.config ? args.config->string() : "preset:" + args.preset, args.seed, {}, {}};
  if (args.config) m.inputs.push_back(args.config->string());
  m.outputs.push_back(args.out.string());
  if (args.config_out) {
    write_file(*args.config_out, scenario_config_to_ini(cfg));
    m.outputs.push_back(args.config_out->string());
  }
  std::cerr << "simulated " << trace.epochs() << " epochs of '" << cfg.name << "' -> " << args.out.string() << "\n";
  return finish(std::move(m), args.out, false, start);
}

RunManifest cmd_label_anchors(const LabelArgs& args) {
  const auto start = Clock::now();
  const auto traces = load_traces(args.traces);
  std::string out;
  std::vector<int> ids;
  for (const auto& a : traces.front().layout.anchors()) ids.push_back(a.id);
  out += ojson{{"kind", "meta"}, {"k", args.k}, {"anchor_ids", ids}}.dump() + "\n";
  std::size_t rows = 0;
  for (const auto& t : traces) {
    for (const auto& ex : selector_dataset(t, args.k)) {
      out += ojson{{"kind", "row"}, {"ranges", ex.ranges}, {"powers", ex.powers}, {"labels", ex.labels}}.dump() + "\n";
      ++rows;
    }
  }
  write_file(args.out, out);
  std::cerr << "labelled " << rows << " epochs (k=" << args.k << ") -> " << args.out.string() << "\n";
  RunManifest m{"label-anchors", "", std::nullopt, strings(args.traces), {args.out.string()}};
  return finish(std::move(m), args.out, false, start);
}

RunManifest cmd_train_selector(const SelectorArgs& args) {
  const auto start = Clock::now();
  if (args.labels.empty()) throw ValidationError("--labels: at least one label file is required");
  std::vector<SelectorExample> data;
  std::vector<int> ids;
  int k = 0;
  for (const auto& path : args.labels) {
    std::istringstream in(read_file(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = ojson::parse(line);
        if (j.at("kind") == "meta") {
          const auto file_ids = j.at("anchor_ids").get<std::vector<int>>();
          const int file_k = j.at("k").get<int>();
          if (!ids.empty() && (file_ids != ids || file_k != k))
            throw ValidationError(path.string() + ": anchor ids or k differ from earlier label files");
          ids = file_ids;
          k = file_k;
        } else {
          SelectorExample ex{j.at("ranges").get<std::vector<double>>(), j.at("powers").get<std::vector<double>>(),
                             j.at("labels").get<std::vector<int>>()};
          data.push_back(std::move(ex));
        }
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), lineno);
      }
    }
  }
  if (ids.empty()) throw ValidationError("label files carry no meta record");
  auto rng = RngStream::named(args.seed, "selector/train");
  SelectorTrainOptions opt;
  opt.epochs = args.epochs;
  opt.learning_rate = args.learning_rate;
  std::vector<std::string> warnings;
  const auto model = train_anchor_selector(data, ids, k, args.chain_order, rng, opt, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  write_file(args.out, model.to_json());
  std::cerr << "trained selector on " << data.size() << " rows -> " << args.out.string() << "\n";
  RunManifest m{"train-selector", "", args.seed, strings(args.labels), {args.out.string()}};
  return finish(std::move(m), args.out, false, start);
}

RunManifest cmd_train(const TrainArgs& args) {
  const auto start = Clock::now();
  auto settings = load_train_settings(args.config);
  if (args.epochs) settings.options.epochs = *args.epochs;
  if (args.train_fraction) settings.train_fraction = *args.train_fraction;
  settings.options.seed = args.seed;
  const auto traces = load_traces(args.traces);
  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  const std::size_t n = traces.front().layout.anchors().size();

  RunManifest m{"train", args.config ? args.config->string() : "", args.seed, strings(args.traces), {}};
  if (args.config) m.inputs.push_back(args.config->string());
  Trained trained;
  std::size_t params = 0;
  if (args.model == "fusion") {
    auto cfg = settings.fusion;
    apply_ablation(cfg, args.ablate);
    cfg.validate();
    std::optional<AnchorSelectorModel> selector;
    if (args.selector) {
      selector = load_selector(*args.selector);
      m.inputs.push_back(args.selector->string());
    }
    FusionModel model(cfg, n, args.seed, selector);
    trained = train_and_test(model, sequences_for(model, traces), settings.options, settings.train_fraction);
    model.save(args.out);
    params = model.parameter_count();
  } else if (args.model == "blackbox") {
    if (args.ablate != "none") throw ValidationError("--ablate applies to the fusion model only");
    settings.blackbox.validate();
    BlackboxModel model(settings.blackbox, n, args.seed);
    std::vector<SensorSequence> seqs;
    for (const auto& t : traces) seqs.push_back(model.sequence(t));
    trained = train_and_test(model, seqs, settings.options, settings.train_fraction);
    model.save(args.out);
    params = model.parameter_count();
  } else {
    throw ValidationError("--model: expected fusion or blackbox, got '" + args.model + "'");
  }
  const fs::path log = args.out.string() + ".log.csv";
  const fs::path eval = args.out.string() + ".eval.json";
  write_train_log(trained.result, log);
  ojson e = summary_json(args.model, trained.test);
  e["split"] = "test";
  e["parameters"] = params;
  e["best_epoch"] = trained.result.best_epoch;
  e["best_val_loss"] = trained.result.best_val_loss;
  e["train_fraction"] = settings.train_fraction;
  write_file(eval, e.dump(2) + "\n");
  m.outputs = {args.out.string(), args.out.string() + ".json", log.string(), eval.string()};
  std::cerr << args.model << ": " << params << " parameters, best epoch " << trained.result.best_epoch
            << ", held-out median " << std::fixed << std::setprecision(3) << trained.test.median << " m\n";
  return finish(std::move(m), args.out, false, start);
}

RunManifest cmd_evaluate(const EvaluateArgs& args) {
  const auto start = Clock::now();
  const Trace trace = read_trace(args.trace);
  RunManifest m{"evaluate", "", std::nullopt, {args.trace.string()}, {}};
  const auto need = [](const std::optional<fs::path>& p, const char* flag) -> const fs::path& {
    if (!p) throw ValidationError(std::string(flag) + " is required for this method");
    return *p;
  };
  std::optional<Trajectory> est;
  std::optional<std::vector<AttentionRow>> attention;
  if (args.method == "rf") {
    est = rf_only(trace);
  } else if (args.method == "rf-selector") {
    const auto sel = load_selector(need(args.selector, "--selector"));
    m.inputs.push_back(args.selector->string());
    est = rf_only(trace, &sel);
  } else if (args.method == "vo") {
    est = vo_only(trace);
  } else if (args.method == "ekf") {
    est = ekf_fuse(trace);
  } else if (args.method == "fusion" || args.method == "blackbox") {
    const auto& path = need(args.model, "--model");
    const std::string kind = checkpoint_kind(path);
    if (kind != args.method) throw ValidationError(path.string() + ": checkpoint holds a " + kind + " model");
    m.inputs.push_back(path.string());
    if (kind == "fusion") {
      const auto model = FusionModel::load(path);
      est = predict_trace(model, trace);
      attention = attention_report(model, trace);
    } else {
      est = predict_trace(BlackboxModel::load(path), trace);
    }
  } else {
    throw ValidationError("--method: unknown method '" + args.method + "'");
  }
  const AteSummary s = ate(*est, trace.gt);
  write_file(args.out / "summary.json", summary_json(args.method, s).dump(2) + "\n");
  write_file(args.out / "errors.csv", errors_to_csv(s));
  write_file(args.out / "cdf.csv", cdf_to_csv(cdf(s.errors)));
  write_file(args.out / "trajectory.csv", trajectory_csv(*est));
  for (const char* f : {"summary.json", "errors.csv", "cdf.csv", "trajectory.csv"})
    m.outputs.push_back((args.out / f).string());
  if (attention) {
    std::string csv = "t,rf_mask,vo_mask\n";
    for (const auto& r : *attention) csv += num(r.t) + "," + num(r.rf_mask) + "," + num(r.vo_mask) + "\n";
    write_file(args.out / "attention.csv", csv);
    m.outputs.push_back((args.out / "attention.csv").string());
  }
  std::cerr << args.method << ": median " << std::fixed << std::setprecision(3) << s.median << " m, mean " << s.mean
            << " m over " << s.count << " epochs\n";
  return finish(std::move(m), args.out, true, start);
}

RunManifest cmd_compare(const CompareArgs& args) {
  const auto start = Clock::now();
  if (args.results.empty()) throw ValidationError("--result: at least one result directory is required");
  std::vector<CompareRow> rows;
  RunManifest m{"compare", "", std::nullopt, {}, {args.out.string()}};
  for (const auto& dir : args.results) {
    const fs::path p = dir / "summary.json";
    m.inputs.push_back(p.string());
    try {
      const auto j = ojson::parse(read_file(p));
      rows.push_back({j.at("method").get<std::string>(), j.at("mean").get<double>(), j.at("median").get<double>(),
                      j.at("std").get<double>(), j.at("max").get<double>(), j.at("count").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(p.string() + ": " + e.what());
    }
  }
  std::sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    return a.median != b.median ? a.median < b.median : a.method < b.method;
  });
  write_file(args.out, compare_to_csv(rows));
  std::cerr << compare_to_text(rows);
  return finish(std::move(m), args.out, false, start);
}

RunManifest cmd_gradcheck(const GradcheckArgs& args) {
  const auto start = Clock::now();
  const auto checks = run_gradient_checks(args.seed);
  std::string csv = "block,max_rel_error,entries\n";
  double worst = 0.0;
  std::string worst_block;
  for (const auto& c : checks) {
    csv += c.block + "," + num(c.max_rel_error) + "," + std::to_string(c.checked) + "\n";
    std::cerr << std::left << std::setw(20) << c.block << std::scientific << std::setprecision(2) << c.max_rel_error
              << "\n";
    if (c.max_rel_error > worst) {
      worst = c.max_rel_error;
      worst_block = c.block;
    }
  }
  write_file(args.out, csv);
  RunManifest m{"gradcheck", "", args.seed, {}, {args.out.string()}};
  m = finish(std::move(m), args.out, false, start);
  if (!(worst < 1e-4)) throw NumericalError("gradient check failed for " + worst_block + " (" + num(worst) + ")");
  return m;
}

RunManifest cmd_ablate(const AblateArgs& args) {
  const auto start = Clock::now();
  auto settings = load_train_settings(args.config);
  if (args.epochs) settings.options.epochs = *args.epochs;
  settings.options.seed = args.seed;
  if (args.jobs < 1) throw ValidationError("--jobs: must be at least 1");
  const auto traces = load_traces(args.traces);
  fs::create_directories(args.out);
  const std::size_t n = traces.front().layout.anchors().size();
  std::optional<AnchorSelectorModel> selector;
  RunManifest m{"ablate", args.config ? args.config->string() : "", args.seed, strings(args.traces), {}};
  if (args.config) m.inputs.push_back(args.config->string());
  if (args.selector) {
    selector = load_selector(*args.selector);
    m.inputs.push_back(args.selector->string());
  }

  const std::vector<std::string> variants = {"none", "no-attention", "no-anchor-selection"};
  std::vector<Trained> results(variants.size());
  std::vector<std::size_t> params(variants.size());
  std::vector<std::exception_ptr> errors(variants.size());
  auto work = [&](std::size_t i) {
    try {
      auto cfg = settings.fusion;
      apply_ablation(cfg, variants[i]);
      cfg.validate();
      FusionModel model(cfg, n, args.seed, selector);
      results[i] = train_and_test(model, sequences_for(model, traces), settings.options, settings.train_fraction);
      params[i] = model.parameter_count();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  // Variants are independent; each owns its model and random streams.
  for (std::size_t first = 0; first < variants.size(); first += static_cast<std::size_t>(args.jobs)) {
    std::vector<std::thread> pool;
    const std::size_t last = std::min(variants.size(), first + static_cast<std::size_t>(args.jobs));
    for (std::size_t i = first + 1; i < last; ++i) pool.emplace_back(work, i);
    work(first);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::string csv = "variant,test_median,test_mean,test_windows,parameters,best_epoch\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string name = variants[i] == "none" ? "full" : variants[i];
    const auto& r = results[i];
    csv += name + "," + num(r.test.median) + "," + num(r.test.mean) + "," + std::to_string(r.test.count) + "," +
           std::to_string(params[i]) + "," + std::to_string(r.result.best_epoch) + "\n";
    const fs::path log = args.out / (name + ".log.csv");
    write_train_log(r.result, log);
    m.outputs.push_back(log.string());
    std::cerr << std::left << std::setw(22) << name << "held-out median " << std::fixed << std::setprecision(3)
              << r.test.median << " m\n";
  }
  write_file(args.out / "ablation.csv", csv);
  m.outputs.push_back((args.out / "ablation.csv").string());
  return finish(std::move(m), args.out, true, start);
}

// --- argument parsing ------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"hyloc: hybrid RF + visual odometry indoor localization"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a scenario and write a JSON-lines trace");
  auto* sim_cfg = c_sim->add_option("--config", sim.config, "Scenario INI file")->check(CLI::ExistingFile);
  c_sim->add_option("--preset", sim.preset, "Built-in scenario: " + [] {
    std::string s;
    for (const auto& n : preset_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }())->excludes(sim_cfg);
  c_sim->add_option("--duration", sim.duration, "Override the duration (s)");
  c_sim->add_option("--seed", sim.seed, "Random seed")->required();
  c_sim->add_option("--out", sim.out, "Trace file")->required();
  c_sim->add_option("--config-out", sim.config_out, "Also write the effective scenario as INI");

  LabelArgs lab;
  auto* c_lab = app.add_subcommand("label-anchors", "Label the best K anchors of every epoch");
  c_lab->add_option("--trace", lab.traces, "Trace files")->required();
  c_lab->add_option("--k", lab.k, "Anchors per epoch")->check(CLI::PositiveNumber);
  c_lab->add_option("--out", lab.out, "Labels (JSON lines)")->required();

  SelectorArgs sa;
  auto* c_sel = app.add_subcommand("train-selector", "Train the classifier-chain anchor selector");
  c_sel->add_option("--labels", sa.labels, "Label files")->required();
  c_sel->add_option("--chain-order", sa.chain_order, "Anchor ids in chain order")->delimiter(',');
  c_sel->add_option("--epochs", sa.epochs, "Gradient steps per link")->check(CLI::PositiveNumber);
  c_sel->add_option("--learning-rate", sa.learning_rate, "Step size");
  c_sel->add_option("--seed", sa.seed, "Random seed")->required();
  c_sel->add_option("--out", sa.out, "Selector JSON")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train the fusion or blackbox network");
  c_tr->add_option("--model", tr.model, "fusion | blackbox");
  c_tr->add_option("--trace", tr.traces, "Training traces")->required();
  c_tr->add_option("--config", tr.config, "Training INI ([train], [fusion], [blackbox])")->check(CLI::ExistingFile);
  c_tr->add_option("--selector", tr.selector, "Anchor selector JSON (fusion)");
  c_tr->add_option("--epochs", tr.epochs, "Override the epoch count");
  c_tr->add_option("--train-fraction", tr.train_fraction, "Fraction of training windows kept");
  c_tr->add_option("--ablate", tr.ablate, "none | no-attention | no-anchor-selection");
  c_tr->add_option("--seed", tr.seed, "Random seed")->required();
  c_tr->add_option("--out", tr.out, "Checkpoint path")->required();

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Run a method over a trace and measure its error");
  c_ev->add_option("--method", ev.method, "rf | rf-selector | vo | ekf | fusion | blackbox")->required();
  c_ev->add_option("--trace", ev.trace, "Trace file")->required();
  c_ev->add_option("--model", ev.model, "Checkpoint (fusion, blackbox)");
  c_ev->add_option("--selector", ev.selector, "Selector JSON (rf-selector)");
  c_ev->add_option("--out", ev.out, "Output directory")->required();

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Tabulate evaluate results by median error");
  c_cmp->add_option("--result", cmp.results, "Evaluate output directories")->required();
  c_cmp->add_option("--out", cmp.out, "Table (CSV)")->required();

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every network block");
  c_gc->add_option("--seed", gc.seed, "Input seed");
  c_gc->add_option("--out", gc.out, "Report (CSV)")->required();

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Train the full model and both ablations on the same split");
  c_ab->add_option("--trace", ab.traces, "Training traces")->required();
  c_ab->add_option("--config", ab.config, "Training INI")->check(CLI::ExistingFile);
  c_ab->add_option("--selector", ab.selector, "Anchor selector JSON");
  c_ab->add_option("--epochs", ab.epochs, "Override the epoch count");
  c_ab->add_option("--seed", ab.seed, "Random seed")->required();
  c_ab->add_option("--jobs", ab.jobs, "Variants trained in parallel");
  c_ab->add_option("--out", ab.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_sim) cmd_simulate(sim);
    else if (*c_lab) cmd_label_anchors(lab);
    else if (*c_sel) cmd_train_selector(sa);
    else if (*c_tr) cmd_train(tr);
    else if (*c_ev) cmd_evaluate(ev);
    else if (*c_cmp) cmd_compare(cmp);
    else if (*c_gc) cmd_gradcheck(gc);
    else if (*c_ab) cmd_ablate(ab);
    return 0;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {  // ArgumentError, ShapeError
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hyloc::cli
