#include "layerscope/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "layerscope/errors.hpp"
#include "layerscope/io_util.hpp"
#include "layerscope/svg_plot.hpp"

namespace layerscope {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void prepare_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
}

void require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
}

void write_json(const fs::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string probe_file(ProbeKind kind, std::size_t layer) {
  return std::string(kind == ProbeKind::kDepth ? "depth" : "dist") + "_layer" +
         std::to_string(layer) + ".prb";
}

std::string edge_file(std::size_t layer) {
  return "edge_layer" + std::to_string(layer) + ".eprb";
}

json to_json(const ProbeTrainConfig& c) {
  return {{"rank", c.rank},           {"lr", c.learning_rate},
          {"batch_size", c.batch_size}, {"epochs", c.max_epochs},
          {"patience", c.patience},   {"seed", c.seed},
          {"dev_fraction", c.dev_fraction}};
}

json to_json(const EdgeTrainConfig& c) {
  return {{"lr", c.learning_rate},        {"batch_size", c.batch_size},
          {"epochs", c.max_epochs},       {"patience", c.patience},
          {"seed", c.seed},               {"dev_fraction", c.dev_fraction},
          {"threshold", c.threshold},     {"projection_dim", c.projection_dim},
          {"hidden_dim", c.hidden_dim}};
}

json to_json(const PlantConfig& c) {
  return {{"sentences", c.n_sentences}, {"min_size", c.min_size},
          {"max_size", c.max_size},     {"dim", c.dim},
          {"rank", c.rank},             {"noise", c.noise_sigma},
          {"seed", c.seed},             {"n_layers", c.n_layers},
          {"planted_layer", c.planted_layer}};
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

std::pair<double, double> mean_and_std(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, std::nan("")};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::vector<std::size_t> parse_layer_list(const std::string& spec,
                                          std::size_t n_layers) {
  std::set<std::size_t> layers;
  auto check = [&](std::size_t l) {
    if (l >= n_layers)
      throw ConfigError("layer " + std::to_string(l) + " out of range (" +
                        std::to_string(n_layers) + " layers)");
    return l;
  };
  auto number = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty() || s.front() == '-')
      throw ConfigError("bad layer spec '" + spec + "'");
    return static_cast<std::size_t>(v);
  };
  if (spec.empty() || spec == "all") {
    for (std::size_t l = 0; l < n_layers; ++l) layers.insert(l);
  } else {
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        layers.insert(check(number(part)));
      } else {
        const auto lo = number(part.substr(0, dash));
        const auto hi = number(part.substr(dash + 1));
        if (lo > hi) throw ConfigError("bad layer range '" + part + "'");
        for (auto l = lo; l <= hi; ++l) layers.insert(check(l));
      }
    }
  }
  if (layers.empty()) throw ConfigError("no layers selected");
  return {layers.begin(), layers.end()};
}

void synth_gen(const SynthGenOptions& opts) {
  prepare_dir(opts.out);
  const auto corpus = plant_tree_corpus(opts.plant);
  write_activations(corpus.to_activation_set(opts.domain), opts.out / "corpus.actv");
  write_conllu(opts.out / "corpus.conllu", corpus.parses());
  json cfg = to_json(opts.plant);
  cfg["command"] = "synth gen";
  cfg["domain"] = opts.domain;
  write_json(opts.out / "config.json", cfg);
}

void synth_spans(const SynthSpansOptions& opts) {
  prepare_dir(opts.out);
  const auto task = plant_span_task(opts.task);
  write_activations(task.activations, opts.out / "spans.actv");
  write_file_atomic(opts.out / "spans.jsonl", [&](std::ostream& out) {
    write_edge_examples(out, task.examples);
  });
  const auto& t = opts.task;
  write_json(opts.out / "config.json",
             {{"command", "synth spans"}, {"examples", t.n_examples},
              {"labels", t.n_labels},     {"dim", t.dim},
              {"sentence_length", t.sentence_length},
              {"examples_per_sentence", t.examples_per_sentence},
              {"max_span", t.max_span},   {"two_span", t.two_span},
              {"seed", t.seed}});
}

void synth_diverge(const SynthDivergeOptions& opts) {
  require_path(opts.activations, "--activations");
  require_path(opts.out, "--out");
  const auto set = read_activations(opts.activations);
  write_activations(rerandomize_layers(set, opts.from_layer, opts.seed), opts.out);
}

RsaCompareResult rsa_compare(const RsaCompareOptions& opts) {
  if (opts.a.empty() || opts.a.size() != opts.b.size())
    throw ConfigError("rsa compare needs matching --a/--b dump lists");
  RsaCompareResult result;
  result.curves_csv.header = {"model_a", "model_b", "domain", "layer",
                              "score", "n_stimuli", "seed"};
  result.summary_csv.header = {"model_a", "model_b", "domain", "layer",
                               "mean", "std", "n_runs"};

  for (std::size_t run = 0; run < opts.a.size(); ++run) {
    const auto a = read_activations(opts.a[run]);
    const auto b = read_activations(opts.b[run]);
    const auto layers = parse_layer_list(opts.layers, std::min(a.n_layers(), b.n_layers()));
    const auto stim = sample_stimuli(a, opts.stimuli_n, opts.seed);
    auto curve = layerwise_rsa(a, b, stim, layers);
    curve.model_a = opts.label_a;
    curve.model_b = opts.label_b;
    for (const auto& [layer, score] : curve.scores)
      result.curves_csv.add_row({curve.model_a, curve.model_b, curve.domain_tag,
                                 std::to_string(layer), format_number(score),
                                 std::to_string(curve.n_stimuli),
                                 std::to_string(curve.seed)});
    result.curves.push_back(std::move(curve));
  }

  // domain -> layer -> scores across runs, domains in first-seen order.
  std::vector<std::string> domains;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> grouped;
  for (const auto& c : result.curves) {
    if (!grouped.count(c.domain_tag)) domains.push_back(c.domain_tag);
    for (const auto& [layer, score] : c.scores) grouped[c.domain_tag][layer].push_back(score);
  }
  std::vector<PlotSeries> series;
  for (const auto& d : domains) {
    PlotSeries s;
    s.label = opts.label_a + " vs " + opts.label_b + (d.empty() ? "" : " (" + d + ")");
    for (const auto& [layer, scores] : grouped[d]) {
      const auto [mean, sd] = mean_and_std(scores);
      result.summary_csv.add_row({opts.label_a, opts.label_b, d, std::to_string(layer),
                                  format_number(mean),
                                  std::isnan(sd) ? std::string{} : format_number(sd),
                                  std::to_string(scores.size())});
      s.x.push_back(static_cast<double>(layer));
      s.y.push_back(mean);
      s.err.push_back(std::isnan(sd) ? 0.0 : sd);
    }
    series.push_back(std::move(s));
  }

  if (!opts.out.empty()) {
    prepare_dir(opts.out);
    write_csv(opts.out / "rsa_curves.csv", result.curves_csv);
    write_csv(opts.out / "rsa_summary.csv", result.summary_csv);
    PlotSpec spec;
    spec.title = "RSA similarity by layer";
    spec.y_label = "RSA (Pearson)";
    spec.y_max = 1.0;
    write_file_atomic(opts.out / "rsa.svg", render_line_plot(series, spec));
    write_json(opts.out / "config.json",
               {{"command", "rsa compare"}, {"a", path_strings(opts.a)},
                {"b", path_strings(opts.b)}, {"label_a", opts.label_a},
                {"label_b", opts.label_b},   {"stimuli_n", opts.stimuli_n},
                {"seed", opts.seed},         {"layers", opts.layers}});
  }
  return result;
}

std::vector<ProbeTrainResult> struct_train(const StructTrainOptions& opts) {
  opts.train.validate();
  require_path(opts.activations, "--activations");
  require_path(opts.conllu, "--conllu");
  prepare_dir(opts.out);
  const auto set = read_activations(opts.activations);
  const auto parses = load_conllu(opts.conllu);
  const auto layers = parse_layer_list(opts.layers, set.n_layers());
  std::vector<ProbeTrainResult> results;
  json log = json::array();
  for (auto layer : layers) {
    const auto data = probe_dataset(set, parses, layer);
    auto res = train_probe(opts.kind, data, layer, opts.train);
    write_probe(res.params, opts.out / probe_file(opts.kind, layer));
    log.push_back({{"layer", layer},
                   {"best_dev_loss", res.best_dev_loss},
                   {"epochs_run", res.epochs_run}});
    results.push_back(std::move(res));
  }
  json cfg = to_json(opts.train);
  cfg["command"] = std::string("probe ") + (opts.kind == ProbeKind::kDepth ? "depth" : "dist") + " train";
  cfg["activations"] = opts.activations.string();
  cfg["conllu"] = opts.conllu.string();
  cfg["layers"] = layers;
  cfg["results"] = std::move(log);
  write_json(opts.out / "config.json", cfg);
  return results;
}

CsvTable struct_eval(const StructEvalCliOptions& opts) {
  require_path(opts.activations, "--activations");
  require_path(opts.conllu, "--conllu");
  if (!opts.untrained) require_path(opts.probes, "--probes");
  const auto set = read_activations(opts.activations);
  const auto parses = load_conllu(opts.conllu);
  const auto layers = parse_layer_list(opts.layers, set.n_layers());
  const std::string model = opts.model.empty() ? opts.activations.stem().string() : opts.model;

  CsvTable table;
  table.header = {"model", "layer", "root_acc", "depth_spearman", "uuas",
                  "dist_spearman", "n_sentences"};
  std::vector<PlotSeries> series(2);
  const bool depth = opts.kind == ProbeKind::kDepth;
  series[0].label = depth ? "root accuracy" : "UUAS";
  series[1].label = depth ? "depth Spearman" : "distance Spearman";

  for (auto layer : layers) {
    const auto data = probe_dataset(set, parses, layer);
    ProbeParams probe =
        opts.untrained ? init_probe(opts.kind, opts.rank, set.dim(), layer, opts.seed)
                       : read_probe(opts.probes / probe_file(opts.kind, layer));
    if (probe.kind != opts.kind) throw ConfigError("probe file holds the wrong probe kind");
    const auto report = depth ? eval_depth(probe, data, opts.eval)
                              : eval_distance(probe, data, opts.eval);
    table.add_row({model, std::to_string(layer), format_optional(report.root_acc),
                   format_optional(report.depth_spearman), format_optional(report.uuas),
                   format_optional(report.dist_spearman),
                   std::to_string(report.n_sentences)});
    const auto& first = depth ? report.root_acc : report.uuas;
    const auto& second = depth ? report.depth_spearman : report.dist_spearman;
    if (first) {
      series[0].x.push_back(static_cast<double>(layer));
      series[0].y.push_back(*first);
    }
    if (second) {
      series[1].x.push_back(static_cast<double>(layer));
      series[1].y.push_back(*second);
    }
  }

  if (!opts.out.empty()) {
    prepare_dir(opts.out);
    const std::string stem = std::string("struct_eval_") + (depth ? "depth" : "dist");
    write_csv(opts.out / (stem + ".csv"), table);
    PlotSpec spec;
    spec.title = std::string(depth ? "Depth" : "Distance") + " probe: " + model;
    spec.y_label = "metric";
    spec.y_min = 0.0;
    spec.y_max = 1.0;
    write_file_atomic(opts.out / (stem + ".svg"), render_line_plot(series, spec));
    write_json(opts.out / (stem + ".config.json"),
               {{"command", std::string("probe ") + (depth ? "depth" : "dist") + " eval"},
                {"activations", opts.activations.string()},
                {"conllu", opts.conllu.string()},
                {"probes", opts.probes.string()},
                {"layers", layers},
                {"model", model},
                {"untrained", opts.untrained},
                {"rank", opts.rank},
                {"seed", opts.seed},
                {"min_length", opts.eval.min_length},
                {"max_length", opts.eval.max_length},
                {"exclude_punct", opts.eval.exclude_punct}});
  }
  return table;
}

std::vector<EdgeTrainResult> edge_train(const EdgeTrainOptions& opts) {
  opts.train.validate();
  require_path(opts.activations, "--activations");
  require_path(opts.examples, "--examples");
  prepare_dir(opts.out);
  const auto set = read_activations(opts.activations);
  const auto examples = load_edge_examples(opts.examples);
  const auto layers = parse_layer_list(opts.layers, set.n_layers());
  std::vector<EdgeTrainResult> results;
  json log = json::array();
  for (auto layer : layers) {
    const auto data = edge_dataset(examples, set, layer);
    auto res = train_edge_probe(data, opts.train);
    write_edge_probe(res.model, opts.out / edge_file(layer));
    log.push_back({{"layer", layer},
                   {"best_dev_loss", res.best_dev_loss},
                   {"epochs_run", res.epochs_run}});
    results.push_back(std::move(res));
  }
  json cfg = to_json(opts.train);
  cfg["command"] = "probe edge train";
  cfg["activations"] = opts.activations.string();
  cfg["examples"] = opts.examples.string();
  cfg["task"] = examples.task_name;
  cfg["labels"] = examples.label_vocab;
  cfg["layers"] = layers;
  cfg["results"] = std::move(log);
  write_json(opts.out / "config.json", cfg);
  return results;
}

CsvTable edge_eval(const EdgeEvalOptions& opts) {
  require_path(opts.activations, "--activations");
  require_path(opts.examples, "--examples");
  require_path(opts.probes, "--probes");
  const auto set = read_activations(opts.activations);

  // Reuse the training vocabulary so label indices line up with the model.
  std::optional<std::vector<std::string>> vocab;
  std::uint64_t seed = opts.seed.value_or(0);
  const auto cfg_path = opts.probes / "config.json";
  if (fs::exists(cfg_path)) {
    const auto cfg = json::parse(read_file(cfg_path));
    if (cfg.contains("labels")) vocab = cfg["labels"].get<std::vector<std::string>>();
    if (!opts.seed && cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
  }
  const auto examples = load_edge_examples(opts.examples, vocab);
  const auto layers = parse_layer_list(opts.layers, set.n_layers());
  const std::string model = opts.model.empty() ? opts.activations.stem().string() : opts.model;

  CsvTable table;
  table.header = {"model", "task", "layer", "P", "R", "F1", "threshold", "seed"};
  PlotSeries f1;
  f1.label = examples.task_name + " F1";
  for (auto layer : layers) {
    const auto data = edge_dataset(examples, set, layer);
    const auto probe = read_edge_probe(opts.probes / edge_file(layer));
    const auto pr = eval_edge_probe(probe, data, opts.threshold);
    table.add_row({model, examples.task_name, std::to_string(layer),
                   format_number(pr.precision), format_number(pr.recall),
                   format_number(pr.f1), format_number(opts.threshold),
                   std::to_string(seed)});
    f1.x.push_back(static_cast<double>(layer));
    f1.y.push_back(pr.f1);
  }
  if (!opts.out.empty()) {
    prepare_dir(opts.out);
    write_csv(opts.out / "edge_eval.csv", table);
    PlotSpec spec;
    spec.title = "Edge probe: " + model;
    spec.y_label = "micro F1";
    spec.y_min = 0.0;
    spec.y_max = 1.0;
    write_file_atomic(opts.out / "edge_eval.svg", render_line_plot({f1}, spec));
    write_json(opts.out / "edge_eval.config.json",
               {{"command", "probe edge eval"},
                {"activations", opts.activations.string()},
                {"examples", opts.examples.string()},
                {"probes", opts.probes.string()},
                {"layers", layers},
                {"model", model},
                {"threshold", opts.threshold},
                {"seed", seed}});
  }
  return table;
}

void report_plot(const PlotOptions& opts) {
  require_path(opts.csv, "--csv");
  require_path(opts.out, "--out");
  const auto table = read_csv(opts.csv);
  const auto xi = table.column(opts.x);
  const auto yi = table.column(opts.y);
  std::optional<std::size_t> ei;
  if (!opts.err.empty()) ei = table.column(opts.err);
  std::vector<std::size_t> gi;
  for (const auto& g : opts.group) gi.push_back(table.column(g));

  auto to_double = [](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    return std::nan("");
  };

  std::vector<PlotSeries> series;
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    std::string key;
    for (std::size_t k = 0; k < gi.size(); ++k) key += (k ? " / " : "") + row[gi[k]];
    const double x = to_double(row[xi]);
    const double y = to_double(row[yi]);
    if (std::isnan(x) || std::isnan(y)) continue;
    auto [it, fresh] = index.try_emplace(key, series.size());
    if (fresh) series.push_back(PlotSeries{key.empty() ? opts.y : key, {}, {}, {}});
    auto& s = series[it->second];
    s.x.push_back(x);
    s.y.push_back(y);
    if (ei) {
      const double e = to_double(row[*ei]);
      s.err.push_back(std::isnan(e) ? 0.0 : e);
    }
  }
  PlotSpec spec;
  spec.title = opts.title;
  spec.x_label = opts.x;
  spec.y_label = opts.y;
  write_file_atomic(opts.out, render_line_plot(series, spec));
}

namespace {

// Fills options the user did not pass on the command line from a JSON
// object keyed by long option name (without the leading dashes).
void apply_config_file(CLI::App& app, const fs::path& path) {
  const auto cfg = json::parse(read_file(path));
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = nullptr;
    for (CLI::App* a = &app; a && !opt; a = a->get_parent()) {
      try {
        opt = a->get_option("--" + key);
      } catch (const CLI::OptionNotFound&) {
      }
    }
    if (!opt) throw ConfigError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    auto text = [](const json& v) {
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(text(v));
    } else {
      opt->add_result(text(value));
    }
    opt->run_callback();
  }
}

CLI::App* deepest_selected(CLI::App& app) {
  CLI::App* cur = &app;
  while (true) {
    const auto subs = cur->get_subcommands();
    if (subs.empty()) return cur;
    cur = subs.front();
  }
}

void add_probe_train_flags(CLI::App* cmd, ProbeTrainConfig& c) {
  cmd->add_option("--rank", c.rank, "probe rank k")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "initial learning rate")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "sentences per minibatch")->capture_default_str();
  cmd->add_option("--epochs", c.max_epochs, "maximum epochs")->capture_default_str();
  cmd->add_option("--patience", c.patience, "non-improving epochs before stopping")->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd->add_option("--dev-fraction", c.dev_fraction, "held-out dev share")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layerwise representation analysis: structural and edge probes, RSA"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of option values; flags take precedence");

  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic data");
  synth->require_subcommand(1);
  SynthGenOptions gen;
  auto* gen_cmd = synth->add_subcommand("gen", "planted-tree corpus (ACTV1 + CoNLL-U)");
  gen_cmd->add_option("--out", gen.out, "output directory");
  gen_cmd->add_option("--seed", gen.plant.seed)->capture_default_str();
  gen_cmd->add_option("--sentences", gen.plant.n_sentences)->capture_default_str();
  gen_cmd->add_option("--min-size", gen.plant.min_size)->capture_default_str();
  gen_cmd->add_option("--max-size", gen.plant.max_size)->capture_default_str();
  gen_cmd->add_option("--dim", gen.plant.dim)->capture_default_str();
  gen_cmd->add_option("--rank", gen.plant.rank)->capture_default_str();
  gen_cmd->add_option("--noise", gen.plant.noise_sigma)->capture_default_str();
  gen_cmd->add_option("--n-layers", gen.plant.n_layers)->capture_default_str();
  gen_cmd->add_option("--planted-layer", gen.plant.planted_layer)->capture_default_str();
  gen_cmd->add_option("--domain", gen.domain)->capture_default_str();
  gen_cmd->callback([&] { action = [&] { synth_gen(gen); }; });

  SynthSpansOptions spans;
  auto* spans_cmd = synth->add_subcommand("spans", "linearly labeled span task (ACTV1 + JSONL)");
  spans_cmd->add_option("--out", spans.out, "output directory");
  spans_cmd->add_option("--seed", spans.task.seed)->capture_default_str();
  spans_cmd->add_option("--examples", spans.task.n_examples)->capture_default_str();
  spans_cmd->add_option("--labels", spans.task.n_labels)->capture_default_str();
  spans_cmd->add_option("--dim", spans.task.dim)->capture_default_str();
  spans_cmd->add_option("--sentence-length", spans.task.sentence_length)->capture_default_str();
  spans_cmd->add_option("--max-span", spans.task.max_span)->capture_default_str();
  spans_cmd->add_flag("--two-span", spans.task.two_span);
  spans_cmd->callback([&] { action = [&] { synth_spans(spans); }; });

  SynthDivergeOptions diverge;
  auto* div_cmd = synth->add_subcommand("diverge", "re-randomize the upper layers of a dump");
  div_cmd->add_option("--activations", diverge.activations);
  div_cmd->add_option("--from-layer", diverge.from_layer);
  div_cmd->add_option("--seed", diverge.seed)->capture_default_str();
  div_cmd->add_option("--out", diverge.out, "output ACTV1 file");
  div_cmd->callback([&] { action = [&] { synth_diverge(diverge); }; });

  // rsa
  auto* rsa = app.add_subcommand("rsa", "representational similarity analysis");
  rsa->require_subcommand(1);
  RsaCompareOptions rsa_opts;
  std::vector<std::string> rsa_a, rsa_b;
  auto* cmp = rsa->add_subcommand("compare", "layerwise RSA between paired dumps");
  cmp->add_option("--a", rsa_a, "first-model dump (repeat for runs)");
  cmp->add_option("--b", rsa_b, "second-model dump (repeat for runs)");
  cmp->add_option("--label-a", rsa_opts.label_a)->capture_default_str();
  cmp->add_option("--label-b", rsa_opts.label_b)->capture_default_str();
  cmp->add_option("--stimuli-n", rsa_opts.stimuli_n, "tokens per stimulus set")->capture_default_str();
  cmp->add_option("--seed", rsa_opts.seed)->capture_default_str();
  cmp->add_option("--layers", rsa_opts.layers)->capture_default_str();
  cmp->add_option("--out", rsa_opts.out, "output directory");
  cmp->callback([&] {
    action = [&] {
      rsa_opts.a.assign(rsa_a.begin(), rsa_a.end());
      rsa_opts.b.assign(rsa_b.begin(), rsa_b.end());
      const auto res = rsa_compare(rsa_opts);
      write_csv(out, res.summary_csv);
    };
  });

  // probe
  auto* probe = app.add_subcommand("probe", "train and evaluate probes");
  probe->require_subcommand(1);
  StructTrainOptions depth_train, dist_train;
  StructEvalCliOptions depth_eval, dist_eval;
  depth_train.kind = depth_eval.kind = ProbeKind::kDepth;
  dist_train.kind = dist_eval.kind = ProbeKind::kDistance;
  bool keep_punct_depth = false, keep_punct_dist = false;
  struct KindCommands {
    const char* name;
    StructTrainOptions* train;
    StructEvalCliOptions* eval;
    bool* keep_punct;
  };
  for (auto kc : {KindCommands{"depth", &depth_train, &depth_eval, &keep_punct_depth},
                  KindCommands{"dist", &dist_train, &dist_eval, &keep_punct_dist}}) {
    auto* kind_cmd = probe->add_subcommand(kc.name, std::string(kc.name) + " structural probe");
    kind_cmd->require_subcommand(1);
    auto* t = kind_cmd->add_subcommand("train", "train one probe per layer");
    t->add_option("--activations", kc.train->activations);
    t->add_option("--conllu", kc.train->conllu);
    t->add_option("--layers", kc.train->layers)->capture_default_str();
    t->add_option("--out", kc.train->out, "probe directory");
    add_probe_train_flags(t, kc.train->train);
    auto* tr = kc.train;
    t->callback([&action, tr] { action = [tr] { struct_train(*tr); }; });

    auto* e = kind_cmd->add_subcommand("eval", "evaluate per-layer probes");
    auto* ev = kc.eval;
    auto* keep = kc.keep_punct;
    e->add_option("--activations", ev->activations);
    e->add_option("--conllu", ev->conllu);
    e->add_option("--probes", ev->probes, "directory written by train");
    e->add_option("--layers", ev->layers)->capture_default_str();
    e->add_option("--model", ev->model, "model name for the CSV");
    e->add_flag("--untrained", ev->untrained, "score the seeded initialization");
    e->add_option("--rank", ev->rank, "rank for --untrained")->capture_default_str();
    e->add_option("--seed", ev->seed, "seed for --untrained")->capture_default_str();
    e->add_option("--min-length", ev->eval.min_length)->capture_default_str();
    e->add_option("--max-length", ev->eval.max_length)->capture_default_str();
    e->add_flag("--keep-punct", *keep, "score punctuation edges in UUAS");
    e->add_option("--out", ev->out, "output directory");
    e->callback([&action, &out, ev, keep] {
      action = [&out, ev, keep] {
        ev->eval.exclude_punct = !*keep;
        write_csv(out, struct_eval(*ev));
      };
    });
  }

  EdgeTrainOptions edge_tr;
  EdgeEvalOptions edge_ev;
  std::uint64_t edge_eval_seed = 0;
  auto* edge = probe->add_subcommand("edge", "edge-probing classifier");
  edge->require_subcommand(1);
  auto* et = edge->add_subcommand("train", "train one edge probe per layer");
  et->add_option("--activations", edge_tr.activations);
  et->add_option("--examples", edge_tr.examples, "edge-probe JSONL");
  et->add_option("--layers", edge_tr.layers)->capture_default_str();
  et->add_option("--out", edge_tr.out, "probe directory");
  et->add_option("--lr", edge_tr.train.learning_rate)->capture_default_str();
  et->add_option("--batch-size", edge_tr.train.batch_size)->capture_default_str();
  et->add_option("--epochs", edge_tr.train.max_epochs)->capture_default_str();
  et->add_option("--patience", edge_tr.train.patience)->capture_default_str();
  et->add_option("--seed", edge_tr.train.seed)->capture_default_str();
  et->add_option("--dev-fraction", edge_tr.train.dev_fraction)->capture_default_str();
  et->add_option("--threshold", edge_tr.train.threshold)->capture_default_str();
  et->add_option("--projection-dim", edge_tr.train.projection_dim)->capture_default_str();
  et->add_option("--hidden-dim", edge_tr.train.hidden_dim)->capture_default_str();
  et->callback([&] { action = [&] { edge_train(edge_tr); }; });

  auto* ee = edge->add_subcommand("eval", "evaluate per-layer edge probes");
  ee->add_option("--activations", edge_ev.activations);
  ee->add_option("--examples", edge_ev.examples);
  ee->add_option("--probes", edge_ev.probes);
  ee->add_option("--layers", edge_ev.layers)->capture_default_str();
  ee->add_option("--model", edge_ev.model);
  ee->add_option("--threshold", edge_ev.threshold)->capture_default_str();
  auto* ee_seed = ee->add_option("--seed", edge_eval_seed, "seed recorded in the CSV");
  ee->add_option("--out", edge_ev.out, "output directory");
  ee->callback([&] {
    action = [&] {
      if (ee_seed->count() > 0) edge_ev.seed = edge_eval_seed;
      write_csv(out, edge_eval(edge_ev));
    };
  });

  // report
  auto* report = app.add_subcommand("report", "render results");
  report->require_subcommand(1);
  PlotOptions plot;
  auto* plot_cmd = report->add_subcommand("plot", "SVG line plot from a CSV table");
  plot_cmd->add_option("--csv", plot.csv);
  plot_cmd->add_option("--x", plot.x)->capture_default_str();
  plot_cmd->add_option("--y", plot.y)->capture_default_str();
  plot_cmd->add_option("--group", plot.group, "columns naming each line")->delimiter(',');
  plot_cmd->add_option("--err", plot.err, "error-bar column");
  plot_cmd->add_option("--title", plot.title);
  plot_cmd->add_option("--out", plot.out, "output SVG file");
  plot_cmd->callback([&] { action = [&] { report_plot(plot); }; });

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) apply_config_file(*deepest_selected(app), config_path);
    if (action) action();
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace layerscope
