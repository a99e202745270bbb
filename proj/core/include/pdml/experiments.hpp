#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdml/matrix.hpp"

namespace pdml {

// Experiment drivers: each takes a validated config, runs the distributed
// protocols plus whatever references the experiment needs, and returns a
// self-contained report that can be re-run from its embedded config.

struct ExperimentConfig {
  std::string experiment = "equivalence";  // equivalence | uplift | privacy | dp-baseline
  std::string algorithm = "nmf";           // nmf | svd | pca | secsum (privacy only)
  std::size_t parties = 3;                 // M
  double fraction = 0.3;    // party database size as a fraction of the corpus
  std::size_t k = 5;        // factorization rank / truncation rank
  std::size_t tau = 100;    // power-iteration rounds (svd, pca)
  std::size_t max_iters = 50;  // factorization sweeps (nmf)
  double alpha = 0.0;          // L1 weight on T
  double beta = 0.0;           // L2 weight on T
  double gamma = 0.0;          // L1 weight on W
  double delta = 0.0;          // L2 weight on W
  int f_bits = 31;             // fixed-point fractional bits
  // nmf/secsum: float | fixed | fixed-prf. svd/pca: float | fixed-ideal |
  // fixed-shared (alias: fixed).
  std::string backend = "float";
  std::uint64_t seed = 1;
  std::string dataset;                   // path; empty runs on synthetic data
  std::string dataset_format = "auto";   // auto | csv | matrix-market
  bool tfidf = false;                    // per-party reweighting of counts
  std::string synthetic = "iid";         // iid | lowrank (when no dataset)
  std::size_t synthetic_rows = 200;
  std::size_t synthetic_cols = 50;
  std::string output_dir;                // empty: env default (see below)
  double tolerance = 1e-6;               // equivalence pass threshold
  // privacy driver
  std::size_t privacy_docs = 8;    // documents of interest
  std::size_t privacy_runs = 64;   // mechanism runs per side (t)
  std::string sigma_source = "estimated";  // estimated | revealed (svd)
  std::string simulator = "subsample";     // subsample | random-db
  // dp-baseline driver
  double epsilon = 0.25;
  double dp_delta = 0.01;
  double sensitivity = 1.0;
};

// Rejects invalid fields or unsupported combinations with a config error.
void validate_config(const ExperimentConfig& cfg);

// Resolution order for where reports land: explicit config value, then the
// PDML_OUTPUT_DIR environment variable, then the working directory.
std::string default_output_dir();

struct MetricRow {
  std::string name;
  double value = 0.0;
  bool operator==(const MetricRow&) const = default;
};

struct Report {
  ExperimentConfig config;  // echo: the report is re-runnable from this
  std::vector<MetricRow> global;
  std::vector<std::vector<MetricRow>> per_party;
  std::string transcript_digest;  // hex hash over all protocol traces
  double elapsed_seconds = 0.0;
  // Flat table for plotting: one header, one row per unit (party, document).
  std::vector<std::string> table_header;
  std::vector<std::vector<double>> table;

  double metric(const std::string& name) const;  // global value; throws if absent
  bool has_metric(const std::string& name) const;
};

// Everything except wall-clock time and the config echo, compared exactly.
// This is the reproducibility contract for float-path re-runs.
bool metrics_equal(const Report& a, const Report& b);

// Structured report document (JSON) and the flat table (csv).
void write_report(const Report& report, const std::string& path);
Report read_report(const std::string& path);
void write_table(const Report& report, const std::string& path);

// Applies key/value pairs from a JSON config file over `base`. Unknown keys
// are a config error; values win over whatever the flags set in `base`.
ExperimentConfig apply_config_file(const std::string& path,
                                   ExperimentConfig base);

// Distributed-vs-centralized agreement for the configured algorithm: both
// pipelines run from one seed, the report carries the max-abs deviation and
// a pass flag at config.tolerance.
Report run_equivalence(const ExperimentConfig& cfg);

// Per-party value of participating: each party's local-only model vs the
// jointly trained model on held-out rows, as percent error reduction.
Report run_uplift(const ExperimentConfig& cfg);

// KS-distance privacy measurement over a set of documents of interest;
// reports per-document pi and median/mean/stddev aggregates.
Report run_privacy(const ExperimentConfig& cfg);

// Gaussian-noise variant vs the noiseless run: reports both objectives,
// their gap, and the noise scale used.
Report run_dp_baseline(const ExperimentConfig& cfg);

// Dispatch on cfg.experiment.
Report run_experiment(const ExperimentConfig& cfg);

}  // namespace pdml
