#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "layerscope/csv.hpp"
#include "layerscope/edgeprobe.hpp"
#include "layerscope/rsa.hpp"
#include "layerscope/structprobe.hpp"
#include "layerscope/synth.hpp"

namespace layerscope {

/// Parses "all" (or empty), "3", "0-12", "0,2,5-7" into ascending distinct
/// layers, each < n_layers.
std::vector<std::size_t> parse_layer_list(const std::string& spec,
                                          std::size_t n_layers);

struct SynthGenOptions {
  PlantConfig plant;
  std::string domain = "synth";
  std::filesystem::path out;
};

/// Writes corpus.actv, corpus.conllu and config.json into `out`.
void synth_gen(const SynthGenOptions& opts);

struct SynthSpansOptions {
  SpanTaskConfig task;
  std::filesystem::path out;
};

/// Writes spans.actv, spans.jsonl and config.json into `out`.
void synth_spans(const SynthSpansOptions& opts);

struct SynthDivergeOptions {
  std::filesystem::path activations;
  std::size_t from_layer = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // output ACTV1 file
};

/// Copies a dump, re-drawing every layer from `from_layer` upwards.
void synth_diverge(const SynthDivergeOptions& opts);

struct RsaCompareOptions {
  std::vector<std::filesystem::path> a;  // run i compares a[i] with b[i]
  std::vector<std::filesystem::path> b;
  std::string label_a = "a";
  std::string label_b = "b";
  std::size_t stimuli_n = 5000;
  std::uint64_t seed = 0;
  std::string layers = "all";
  std::filesystem::path out;
};

struct RsaCompareResult {
  std::vector<RsaCurve> curves;
  CsvTable curves_csv;   // model_a, model_b, domain, layer, score, n_stimuli, seed
  CsvTable summary_csv;  // model_a, model_b, domain, layer, mean, std, n_runs
};

/// Per-run layerwise RSA, averaged per domain tag (mean and sample standard
/// deviation across runs). Writes rsa_curves.csv, rsa_summary.csv, rsa.svg
/// and config.json when `out` is set.
RsaCompareResult rsa_compare(const RsaCompareOptions& opts);

struct StructTrainOptions {
  ProbeKind kind = ProbeKind::kDepth;
  std::filesystem::path activations;
  std::filesystem::path conllu;
  std::string layers = "all";
  ProbeTrainConfig train;
  std::filesystem::path out;
};

/// Trains one probe per layer into out/<kind>_layer<L>.prb.
std::vector<ProbeTrainResult> struct_train(const StructTrainOptions& opts);

struct StructEvalCliOptions {
  ProbeKind kind = ProbeKind::kDepth;
  std::filesystem::path activations;
  std::filesystem::path conllu;
  std::filesystem::path probes;  // directory written by struct_train
  std::string layers = "all";
  std::string model;             // defaults to the activation file stem
  bool untrained = false;        // evaluate the seeded initialization instead
  std::size_t rank = 512;
  std::uint64_t seed = 0;
  StructEvalOptions eval;
  std::filesystem::path out;
};

/// One CSV row per layer: model, layer, root_acc, depth_spearman, uuas,
/// dist_spearman, n_sentences (fields the probe kind does not measure are
/// left empty). Writes struct_eval_<kind>.csv and .svg.
CsvTable struct_eval(const StructEvalCliOptions& opts);

struct EdgeTrainOptions {
  std::filesystem::path activations;
  std::filesystem::path examples;
  std::string layers = "all";
  EdgeTrainConfig train;
  std::filesystem::path out;
};

std::vector<EdgeTrainResult> edge_train(const EdgeTrainOptions& opts);

struct EdgeEvalOptions {
  std::filesystem::path activations;
  std::filesystem::path examples;
  std::filesystem::path probes;
  std::string layers = "all";
  std::string model;
  double threshold = 0.5;
  std::optional<std::uint64_t> seed;  // defaults to the seed recorded at training
  std::filesystem::path out;
};

/// Rows: model, task, layer, P, R, F1, threshold, seed.
CsvTable edge_eval(const EdgeEvalOptions& opts);

struct PlotOptions {
  std::filesystem::path csv;
  std::string x = "layer";
  std::string y = "score";
  std::vector<std::string> group;
  std::string err;
  std::string title;
  std::filesystem::path out;
};

void report_plot(const PlotOptions& opts);

/// Command-line entry point. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace layerscope
