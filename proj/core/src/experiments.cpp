#include "pdml/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pdml/beaver.hpp"
#include "pdml/errors.hpp"
#include "pdml/io.hpp"
#include "pdml/ksdp.hpp"
#include "pdml/net.hpp"
#include "pdml/nmf.hpp"
#include "pdml/normed_secsum.hpp"
#include "pdml/pd_nmf.hpp"
#include "pdml/pd_svd.hpp"
#include "pdml/power_iteration.hpp"
#include "pdml/rng.hpp"
#include "pdml/secsum.hpp"

namespace pdml {
namespace {

using ojson = nlohmann::ordered_json;

// Substreams of the experiment seed, one per independent random choice.
constexpr std::uint64_t kCorpusStream = 11;
constexpr std::uint64_t kPartitionStream = 12;
constexpr std::uint64_t kDocStream = 14;
constexpr std::uint64_t kDealerStream = 15;
constexpr std::uint64_t kKsdpStreamBase = 0x800;

bool one_of(const std::string& v, std::initializer_list<const char*> opts) {
  for (const char* o : opts) {
    if (v == o) return true;
  }
  return false;
}

// Running hash over every protocol trace an experiment produces.
class DigestAccumulator {
 public:
  void add(const ObservableTrace& trace) {
    for (std::uint8_t b : trace.to_bytes()) {
      h_ ^= b;
      h_ *= 1099511628211ULL;
    }
  }
  std::string hex() const {
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << h_;
    return out.str();
  }

 private:
  std::uint64_t h_ = 14695981039346656037ULL;
};

// Splits every row across parties: party m gets the m-th contiguous slab.
std::vector<DenseMatrix> contiguous_blocks(const DenseMatrix& x,
                                           std::size_t parties) {
  const std::size_t n = x.rows();
  std::vector<DenseMatrix> blocks;
  blocks.reserve(parties);
  std::size_t at = 0;
  for (std::size_t m = 0; m < parties; ++m) {
    const std::size_t size = n / parties + (m < n % parties ? 1 : 0);
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = at + i;
    at += size;
    blocks.push_back(take_rows(x, idx));
  }
  return blocks;
}

DenseMatrix synthetic_corpus(const ExperimentConfig& cfg) {
  SeededRng rng = SeededRng(cfg.seed).derive(kCorpusStream);
  if (cfg.synthetic == "iid") {
    return uniform_matrix(cfg.synthetic_rows, cfg.synthetic_cols, rng);
  }
  // Low-rank corpus with a shared topic structure: parties benefit from
  // pooling because every row is drawn from the same k-dimensional cone.
  DenseMatrix w = uniform_matrix(cfg.synthetic_rows, cfg.k, rng);
  DenseMatrix t = uniform_matrix(cfg.k, cfg.synthetic_cols, rng);
  normalize_rows_l1(t);
  DenseMatrix x = matmul(w, t);
  const DenseMatrix noise =
      uniform_matrix(cfg.synthetic_rows, cfg.synthetic_cols, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x.data()[i] += 0.01 * noise.data()[i];
  }
  return x;
}

DenseMatrix experiment_corpus(const ExperimentConfig& cfg) {
  DenseMatrix x = [&] {
    if (cfg.dataset.empty()) return synthetic_corpus(cfg);
    if (cfg.dataset_format == "auto") return load_matrix(cfg.dataset);
    return load_matrix(cfg.dataset, cfg.dataset_format == "csv"
                                        ? MatrixFormat::Csv
                                        : MatrixFormat::MatrixMarket);
  }();
  if (cfg.algorithm == "nmf") {
    require_nonnegative(x, "nmf corpus");
  }
  return x;
}

NmfParams nmf_params(const ExperimentConfig& cfg) {
  NmfParams p;
  p.k = cfg.k;
  p.alpha = cfg.alpha;
  p.beta = cfg.beta;
  p.gamma = cfg.gamma;
  p.delta = cfg.delta;
  p.max_iters = cfg.max_iters;
  return p;
}

// Codec bound covering every plain sum an NMF run reveals: numerator and
// denominator components are sums over local rows of products of entries no
// larger than max|X| (T rows are simplex-normalized), plus DP-noise slack.
double nmf_value_bound(const DenseMatrix& x) {
  double me = 0.0;
  for (double v : x.data()) me = std::max(me, std::abs(v));
  return (static_cast<double>(x.rows()) + 1.0) * (1.0 + me) * (1.0 + me) + 64.0;
}

PdNmfConfig nmf_protocol_config(const ExperimentConfig& cfg,
                                const DenseMatrix& x) {
  PdNmfConfig pc;
  pc.params = nmf_params(cfg);
  pc.mode = parse_secsum_mode(cfg.backend);
  pc.f = cfg.f_bits;
  pc.value_bound = nmf_value_bound(x);
  pc.seed = cfg.seed;
  return pc;
}

NssMode svd_nss_mode(const std::string& backend) {
  if (backend == "float") return NssMode::Float;
  if (backend == "fixed-ideal") return NssMode::FixedIdeal;
  return NssMode::FixedShared;  // "fixed" and "fixed-shared"
}

PdSvdConfig svd_protocol_config(const ExperimentConfig& cfg) {
  PdSvdConfig sc;
  sc.k = cfg.k;
  sc.tau = cfg.tau;
  sc.nss.mode = svd_nss_mode(cfg.backend);
  sc.nss.f = cfg.f_bits;
  sc.seed = cfg.seed;
  return sc;
}

// Preprocessed shares for the shared-circuit backend, dealt from the
// experiment seed; empty for the other backends.
std::vector<DealerMaterial> deal_if_needed(const PdSvdConfig& sc, std::size_t d,
                                           std::size_t parties,
                                           std::uint64_t seed) {
  if (sc.nss.mode != NssMode::FixedShared) return {};
  const DealerCounts budget =
      pd_svd_budget(d, sc, static_cast<unsigned>(parties));
  SeededRng rng = SeededRng(seed).derive(kDealerStream);
  return generate_dealer_material(static_cast<unsigned>(parties), budget,
                                  sc.nss.f, rng);
}

std::vector<DenseMatrix> covariance_blocks(const std::vector<DenseMatrix>& xs) {
  std::vector<DenseMatrix> out;
  out.reserve(xs.size());
  for (const DenseMatrix& x : xs) out.push_back(matmul(transpose(x), x));
  return out;
}

bool traces_consistent(const RunResult& rr) {
  for (std::size_t i = 1; i < rr.traces.size(); ++i) {
    if (!(rr.traces[i] == rr.traces[0])) return false;
  }
  return true;
}

// Frobenius error of the best per-row nonnegative fit of `rows` against
// topic matrix `t`.
double nmf_heldout_error(const DenseMatrix& rows, const DenseMatrix& t) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    total += 2.0 * nnls_row(rows.row(i), t).objective;
  }
  return std::sqrt(std::max(total, 0.0));
}

// Frobenius error of rank-k projection onto the span of v's columns.
double lra_heldout_error(const DenseMatrix& rows, const DenseMatrix& v) {
  const DenseMatrix proj = matmul(matmul(rows, v), transpose(v));
  return frobenius_distance(rows, proj);
}

DenseMatrix center_columns(const DenseMatrix& x) {
  DenseMatrix out = x;
  const std::size_t n = x.rows();
  if (n == 0) return out;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out(i, j) -= mean;
  }
  return out;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

// -------- report serialization --------

ojson config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["experiment"] = c.experiment;
  j["algorithm"] = c.algorithm;
  j["parties"] = c.parties;
  j["fraction"] = c.fraction;
  j["k"] = c.k;
  j["tau"] = c.tau;
  j["max_iters"] = c.max_iters;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["delta"] = c.delta;
  j["f_bits"] = c.f_bits;
  j["backend"] = c.backend;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset;
  j["dataset_format"] = c.dataset_format;
  j["tfidf"] = c.tfidf;
  j["synthetic"] = c.synthetic;
  j["synthetic_rows"] = c.synthetic_rows;
  j["synthetic_cols"] = c.synthetic_cols;
  j["output_dir"] = c.output_dir;
  j["tolerance"] = c.tolerance;
  j["privacy_docs"] = c.privacy_docs;
  j["privacy_runs"] = c.privacy_runs;
  j["sigma_source"] = c.sigma_source;
  j["simulator"] = c.simulator;
  j["epsilon"] = c.epsilon;
  j["dp_delta"] = c.dp_delta;
  j["sensitivity"] = c.sensitivity;
  return j;
}

void config_apply_json(const ojson& j, ExperimentConfig& c) {
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "experiment") c.experiment = value.get<std::string>();
      else if (key == "algorithm") c.algorithm = value.get<std::string>();
      else if (key == "parties") c.parties = value.get<std::size_t>();
      else if (key == "fraction") c.fraction = value.get<double>();
      else if (key == "k") c.k = value.get<std::size_t>();
      else if (key == "tau") c.tau = value.get<std::size_t>();
      else if (key == "max_iters") c.max_iters = value.get<std::size_t>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "delta") c.delta = value.get<double>();
      else if (key == "f_bits") c.f_bits = value.get<int>();
      else if (key == "backend") c.backend = value.get<std::string>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "dataset") c.dataset = value.get<std::string>();
      else if (key == "dataset_format") c.dataset_format = value.get<std::string>();
      else if (key == "tfidf") c.tfidf = value.get<bool>();
      else if (key == "synthetic") c.synthetic = value.get<std::string>();
      else if (key == "synthetic_rows") c.synthetic_rows = value.get<std::size_t>();
      else if (key == "synthetic_cols") c.synthetic_cols = value.get<std::size_t>();
      else if (key == "output_dir") c.output_dir = value.get<std::string>();
      else if (key == "tolerance") c.tolerance = value.get<double>();
      else if (key == "privacy_docs") c.privacy_docs = value.get<std::size_t>();
      else if (key == "privacy_runs") c.privacy_runs = value.get<std::size_t>();
      else if (key == "sigma_source") c.sigma_source = value.get<std::string>();
      else if (key == "simulator") c.simulator = value.get<std::string>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "dp_delta") c.dp_delta = value.get<double>();
      else if (key == "sensitivity") c.sensitivity = value.get<double>();
      else throw ConfigError("unknown config key: " + key);
    } catch (const ojson::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  if (!one_of(cfg.experiment, {"equivalence", "uplift", "privacy", "dp-baseline"})) {
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  }
  if (!one_of(cfg.algorithm, {"nmf", "svd", "pca", "secsum"})) {
    throw ConfigError("unknown algorithm '" + cfg.algorithm + "'");
  }
  if (cfg.algorithm == "secsum" && cfg.experiment != "privacy") {
    throw ConfigError("algorithm 'secsum' is only meaningful for privacy runs");
  }
  if (cfg.experiment == "dp-baseline" && cfg.algorithm != "nmf") {
    throw ConfigError("dp-baseline supports the nmf algorithm");
  }
  if (cfg.parties == 0) throw ConfigError("need at least one party");
  if (!(cfg.fraction > 0.0) || cfg.fraction > 1.0) {
    throw ConfigError("fraction must be in (0, 1]");
  }
  if (cfg.k == 0) throw ConfigError("k must be positive");
  if (cfg.tau == 0) throw ConfigError("tau must be positive");
  if (cfg.max_iters == 0) throw ConfigError("max_iters must be positive");
  if (cfg.alpha < 0 || cfg.beta < 0 || cfg.gamma < 0 || cfg.delta < 0) {
    throw ConfigError("regularization weights must be nonnegative");
  }
  if (cfg.f_bits < 1 || cfg.f_bits > 62) {
    throw ConfigError("f_bits must be in [1, 62]");
  }
  if (cfg.algorithm == "nmf" || cfg.algorithm == "secsum") {
    if (!one_of(cfg.backend, {"float", "fixed", "fixed-prf"})) {
      throw ConfigError("backend for sum-based runs must be float, fixed, or "
                        "fixed-prf");
    }
  } else {
    if (!one_of(cfg.backend, {"float", "fixed", "fixed-ideal", "fixed-shared"})) {
      throw ConfigError("backend for spectral runs must be float, fixed, "
                        "fixed-ideal, or fixed-shared");
    }
  }
  if (!one_of(cfg.dataset_format, {"auto", "csv", "matrix-market"})) {
    throw ConfigError("dataset_format must be auto, csv, or matrix-market");
  }
  if (!one_of(cfg.synthetic, {"iid", "lowrank"})) {
    throw ConfigError("synthetic must be iid or lowrank");
  }
  if (cfg.synthetic_rows == 0 || cfg.synthetic_cols == 0) {
    throw ConfigError("synthetic corpus dimensions must be positive");
  }
  if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (cfg.privacy_docs == 0) throw ConfigError("privacy_docs must be positive");
  if (cfg.privacy_runs < 8) {
    throw ConfigError("privacy_runs must be at least 8 per side");
  }
  if (!one_of(cfg.sigma_source, {"estimated", "revealed"})) {
    throw ConfigError("sigma_source must be estimated or revealed");
  }
  if (!one_of(cfg.simulator, {"subsample", "random-db"})) {
    throw ConfigError("simulator must be subsample or random-db");
  }
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(cfg.dp_delta > 0.0) || cfg.dp_delta >= 1.0) {
    throw ConfigError("dp_delta must be in (0, 1)");
  }
  if (!(cfg.sensitivity > 0.0)) throw ConfigError("sensitivity must be positive");
  if (cfg.tfidf && (cfg.experiment == "privacy" || cfg.experiment == "dp-baseline")) {
    throw ConfigError("tfidf is supported for equivalence and uplift runs");
  }
}

std::string default_output_dir() {
  const char* env = std::getenv("PDML_OUTPUT_DIR");
  if (env != nullptr && env[0] != '\0') return env;
  return ".";
}

double Report::metric(const std::string& name) const {
  for (const MetricRow& m : global) {
    if (m.name == name) return m.value;
  }
  throw DataError("report has no metric '" + name + "'");
}

bool Report::has_metric(const std::string& name) const {
  for (const MetricRow& m : global) {
    if (m.name == name) return true;
  }
  return false;
}

bool metrics_equal(const Report& a, const Report& b) {
  return a.global == b.global && a.per_party == b.per_party &&
         a.transcript_digest == b.transcript_digest &&
         a.table_header == b.table_header && a.table == b.table;
}

void write_report(const Report& report, const std::string& path) {
  ojson j;
  j["format"] = "pdml-report";
  j["version"] = 1;
  j["config"] = config_to_json(report.config);
  ojson global = ojson::object();
  for (const MetricRow& m : report.global) global[m.name] = m.value;
  j["global"] = std::move(global);
  ojson parties = ojson::array();
  for (std::size_t p = 0; p < report.per_party.size(); ++p) {
    ojson pj;
    pj["party"] = p;
    ojson metrics = ojson::object();
    for (const MetricRow& m : report.per_party[p]) metrics[m.name] = m.value;
    pj["metrics"] = std::move(metrics);
    parties.push_back(std::move(pj));
  }
  j["per_party"] = std::move(parties);
  j["transcript_digest"] = report.transcript_digest;
  j["elapsed_seconds"] = report.elapsed_seconds;
  ojson table;
  table["header"] = report.table_header;
  table["rows"] = report.table;
  j["table"] = std::move(table);

  std::ofstream out(path);
  if (!out) throw DataError("write_report: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write_report: write failed for " + path);
}

Report read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_report: cannot open " + path);
  ojson j;
  try {
    in >> j;
  } catch (const ojson::exception& e) {
    throw DataError("read_report: " + path + ": " + e.what());
  }
  try {
    if (j.at("format") != "pdml-report" || j.at("version") != 1) {
      throw DataError("read_report: " + path + " is not a report file");
    }
    Report r;
    config_apply_json(j.at("config"), r.config);
    for (const auto& [name, value] : j.at("global").items()) {
      r.global.push_back({name, value.get<double>()});
    }
    for (const auto& pj : j.at("per_party")) {
      std::vector<MetricRow> metrics;
      for (const auto& [name, value] : pj.at("metrics").items()) {
        metrics.push_back({name, value.get<double>()});
      }
      r.per_party.push_back(std::move(metrics));
    }
    r.transcript_digest = j.at("transcript_digest").get<std::string>();
    r.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    r.table_header = j.at("table").at("header").get<std::vector<std::string>>();
    r.table = j.at("table").at("rows").get<std::vector<std::vector<double>>>();
    return r;
  } catch (const ojson::exception& e) {
    throw DataError("read_report: " + path + ": " + e.what());
  }
}

void write_table(const Report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_table: cannot open " + path);
  for (std::size_t i = 0; i < report.table_header.size(); ++i) {
    out << (i > 0 ? "," : "") << report.table_header[i];
  }
  out << "\n" << std::setprecision(17);
  for (const std::vector<double>& row : report.table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i > 0 ? "," : "") << row[i];
    }
    out << "\n";
  }
  if (!out) throw DataError("write_table: write failed for " + path);
}

ExperimentConfig apply_config_file(const std::string& path,
                                   ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file: cannot open " + path);
  ojson j;
  try {
    in >> j;
  } catch (const ojson::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) {
    throw ConfigError("config file " + path + ": expected a JSON object");
  }
  config_apply_json(j, base);
  return base;
}

// -------- drivers --------

Report run_equivalence(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  const DenseMatrix x = experiment_corpus(cfg);
  std::vector<DenseMatrix> blocks = contiguous_blocks(x, cfg.parties);
  if (cfg.tfidf) {
    for (DenseMatrix& b : blocks) b = tfidf_transform(b);
  }

  const auto parties = static_cast<PartyIndex>(cfg.parties);
  DigestAccumulator digest;
  Report report;
  report.config = cfg;

  double deviation = 0.0;
  std::vector<double> per_party_dev(cfg.parties, 0.0);
  RunResult rr;
  if (cfg.algorithm == "nmf") {
    const PdNmfConfig pc = nmf_protocol_config(cfg, x);
    std::vector<NmfModel> models(cfg.parties);
    rr = run_parties(parties, [&](Party& p) {
      models[p.index()] = pd_nmf(p, blocks[p.index()], pc);
    });
    const CentralPipelineResult central = central_nmf_pipeline(blocks, pc);
    for (std::size_t m = 0; m < cfg.parties; ++m) {
      per_party_dev[m] = max_abs_diff(models[m].t, central.model.t);
      deviation = std::max(deviation, per_party_dev[m]);
    }
  } else {
    const PdSvdConfig sc = svd_protocol_config(cfg);
    const bool pca = cfg.algorithm == "pca";
    const std::vector<DenseMatrix> inputs =
        pca ? blocks : covariance_blocks(blocks);
    std::vector<DealerMaterial> material =
        deal_if_needed(sc, x.cols(), cfg.parties, cfg.seed);
    std::vector<DenseMatrix> models(cfg.parties);
    rr = run_parties(parties, [&](Party& p) {
      DealerMaterial* mat = material.empty() ? nullptr : &material[p.index()];
      if (pca) {
        models[p.index()] = pd_pca(p, inputs[p.index()], sc, mat).v;
      } else {
        DenseMatrix s = inputs[p.index()];
        const double scale = scale_bound(p, s, sc);
        for (double& v : s.data()) v /= scale;
        models[p.index()] = pd_svd(p, s, sc, mat);
      }
    });
    const DenseMatrix central = pca ? central_pca_reference(inputs, sc)
                                    : central_svd_reference(inputs, sc);
    for (std::size_t m = 0; m < cfg.parties; ++m) {
      per_party_dev[m] = max_abs_diff(models[m], central);
      deviation = std::max(deviation, per_party_dev[m]);
    }
  }
  digest.add(rr.traces[0]);

  report.global = {
      {"max_abs_deviation", deviation},
      {"tolerance", cfg.tolerance},
      {"pass", deviation <= cfg.tolerance ? 1.0 : 0.0},
      {"traces_consistent", traces_consistent(rr) ? 1.0 : 0.0},
      {"messages", static_cast<double>(rr.messages_sent)},
  };
  report.table_header = {"party", "deviation"};
  for (std::size_t m = 0; m < cfg.parties; ++m) {
    report.per_party.push_back({{"deviation", per_party_dev[m]}});
    report.table.push_back({static_cast<double>(m), per_party_dev[m]});
  }
  report.transcript_digest = digest.hex();
  report.elapsed_seconds = elapsed_since(start);
  return report;
}

Report run_uplift(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.algorithm == "secsum") {
    throw ConfigError("uplift needs a model-producing algorithm");
  }
  const auto start = std::chrono::steady_clock::now();
  const DenseMatrix x = experiment_corpus(cfg);

  SeededRng part_rng = SeededRng(cfg.seed).derive(kPartitionStream);
  std::vector<std::vector<std::size_t>> indices;
  std::vector<DenseMatrix> blocks = partition_indexed(
      x, cfg.parties, cfg.fraction, part_rng, PartitionMode::Disjoint, &indices);

  // Held-out evaluation set: the rows no party received.
  std::set<std::size_t> taken;
  for (const auto& idx : indices) taken.insert(idx.begin(), idx.end());
  std::vector<std::size_t> held;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (taken.count(i) == 0) held.push_back(i);
  }
  if (held.empty()) {
    throw ConfigError("uplift needs held-out rows; lower fraction or parties");
  }
  DenseMatrix heldout = take_rows(x, held);
  if (cfg.tfidf) {
    for (DenseMatrix& b : blocks) b = tfidf_transform(b);
    heldout = tfidf_transform(heldout);
  }

  const auto parties = static_cast<PartyIndex>(cfg.parties);
  DigestAccumulator digest;
  std::vector<double> local_err(cfg.parties, 0.0);
  std::vector<double> global_err(cfg.parties, 0.0);

  if (cfg.algorithm == "nmf") {
    const PdNmfConfig pc = nmf_protocol_config(cfg, x);
    std::vector<NmfModel> models(cfg.parties);
    const RunResult rr = run_parties(parties, [&](Party& p) {
      models[p.index()] = pd_nmf(p, blocks[p.index()], pc);
    });
    digest.add(rr.traces[0]);
    for (std::size_t m = 0; m < cfg.parties; ++m) {
      // Local baseline: the same training pipeline run on this party's rows
      // alone, so a single party's local and global models coincide.
      const DenseMatrix local_t =
          central_nmf_pipeline({blocks[m]}, pc).model.t;
      local_err[m] = nmf_heldout_error(heldout, local_t);
      global_err[m] = nmf_heldout_error(heldout, models[m].t);
    }
  } else {
    const PdSvdConfig sc = svd_protocol_config(cfg);
    const bool pca = cfg.algorithm == "pca";
    const std::vector<DenseMatrix> inputs =
        pca ? blocks : covariance_blocks(blocks);
    std::vector<DealerMaterial> material =
        deal_if_needed(sc, x.cols(), cfg.parties, cfg.seed);
    std::vector<DenseMatrix> models(cfg.parties);
    const RunResult rr = run_parties(parties, [&](Party& p) {
      DealerMaterial* mat = material.empty() ? nullptr : &material[p.index()];
      if (pca) {
        models[p.index()] = pd_pca(p, inputs[p.index()], sc, mat).v;
      } else {
        DenseMatrix s = inputs[p.index()];
        const double scale = scale_bound(p, s, sc);
        for (double& v : s.data()) v /= scale;
        models[p.index()] = pd_svd(p, s, sc, mat);
      }
    });
    digest.add(rr.traces[0]);
    const DenseMatrix eval = pca ? center_columns(heldout) : heldout;
    for (std::size_t m = 0; m < cfg.parties; ++m) {
      const DenseMatrix local_v = pca
          ? central_pca_reference({inputs[m]}, sc)
          : central_svd_reference({inputs[m]}, sc);
      local_err[m] = lra_heldout_error(eval, local_v);
      global_err[m] = lra_heldout_error(eval, models[m]);
    }
  }

  Report report;
  report.config = cfg;
  report.table_header = {"party", "local_error", "global_error", "uplift_pct"};
  double mean_uplift = 0.0;
  double min_uplift = 0.0;
  for (std::size_t m = 0; m < cfg.parties; ++m) {
    const double uplift = local_err[m] > 0.0
        ? 100.0 * (local_err[m] - global_err[m]) / local_err[m]
        : 0.0;
    report.per_party.push_back({{"local_error", local_err[m]},
                                {"global_error", global_err[m]},
                                {"uplift_pct", uplift}});
    report.table.push_back(
        {static_cast<double>(m), local_err[m], global_err[m], uplift});
    mean_uplift += uplift;
    min_uplift = m == 0 ? uplift : std::min(min_uplift, uplift);
  }
  mean_uplift /= static_cast<double>(cfg.parties);
  report.global = {
      {"mean_uplift_pct", mean_uplift},
      {"min_uplift_pct", min_uplift},
      {"party_rows", static_cast<double>(blocks[0].rows())},
      {"heldout_rows", static_cast<double>(heldout.rows())},
  };
  report.transcript_digest = digest.hex();
  report.elapsed_seconds = elapsed_since(start);
  return report;
}

namespace {

// Builds the mechanism and statistic set the privacy driver measures. Every
// mechanism partitions the sub-database it receives into contiguous party
// blocks and runs the configured protocol over the in-memory network.
struct PrivacySetup {
  Mechanism mech;
  std::vector<NamedStatistic> stats;
};

PrivacySetup privacy_setup(const ExperimentConfig& cfg, const DenseMatrix& x,
                           DigestAccumulator* digest) {
  PrivacySetup setup;
  const auto parties = static_cast<PartyIndex>(cfg.parties);
  if (cfg.algorithm == "secsum") {
    const double bound = static_cast<double>(x.rows()) + 64.0;
    const SecSumMode mode = parse_secsum_mode(cfg.backend);
    const int f_bits = cfg.f_bits;
    setup.mech = [parties, bound, mode, f_bits, digest](
                     const DenseMatrix& db, SeededRng& rng) {
      const std::vector<DenseMatrix> blocks = contiguous_blocks(db, parties);
      const std::uint64_t seed = rng.next_u64();
      const RunResult rr = run_parties(parties, [&](Party& p) {
        const DenseMatrix& mine = blocks[p.index()];
        std::vector<double> local(db.cols(), 0.0);
        for (std::size_t i = 0; i < mine.rows(); ++i) {
          for (std::size_t j = 0; j < mine.cols(); ++j) local[j] += mine(i, j);
        }
        SecSumChannel ch(p, mode, FixedCodec(f_bits, bound, p.count()), seed);
        ch.sum(p, std::move(local), "sum");
      });
      if (digest != nullptr) digest->add(rr.traces[0]);
      return rr.traces[0];
    };
    setup.stats.push_back({"secsum.dot", [](const ObservableTrace& trace,
                                            std::span<const double> xdoc) {
      return dot(std::span<const double>(trace.values("sum")), xdoc);
    }});
    return setup;
  }

  if (cfg.algorithm == "nmf") {
    ExperimentConfig copy = cfg;
    setup.mech = [copy, parties, digest](const DenseMatrix& db, SeededRng& rng) {
      const std::vector<DenseMatrix> blocks = contiguous_blocks(db, parties);
      PdNmfConfig pc = nmf_protocol_config(copy, db);
      pc.seed = rng.next_u64();
      const RunResult rr = run_parties(parties, [&](Party& p) {
        pd_nmf(p, blocks[p.index()], pc);
      });
      if (digest != nullptr) digest->add(rr.traces[0]);
      return rr.traces[0];
    };
    setup.stats.push_back(make_nmf_trace_statistic(cfg.k));
    return setup;
  }

  // svd / pca: the adversary is party 0; alongside the protocol trace it
  // keeps the final axes and its spectrum knowledge (its own estimate, or
  // the revealed global values when measuring the sigma-revealing variant).
  ExperimentConfig copy = cfg;
  const bool revealed = cfg.sigma_source == "revealed";
  setup.mech = [copy, parties, revealed, digest](const DenseMatrix& db,
                                                 SeededRng& rng) {
    const std::vector<DenseMatrix> blocks = contiguous_blocks(db, parties);
    const std::vector<DenseMatrix> covs = covariance_blocks(blocks);
    PdSvdConfig sc = svd_protocol_config(copy);
    sc.seed = rng.next_u64();
    std::vector<DealerMaterial> material =
        deal_if_needed(sc, db.cols(), parties, sc.seed);
    std::vector<DenseMatrix> models(parties);
    const RunResult rr = run_parties(parties, [&](Party& p) {
      DealerMaterial* mat = material.empty() ? nullptr : &material[p.index()];
      DenseMatrix s = covs[p.index()];
      const double scale = scale_bound(p, s, sc);
      for (double& v : s.data()) v /= scale;
      models[p.index()] = pd_svd(p, s, sc, mat);
    });
    if (digest != nullptr) digest->add(rr.traces[0]);

    ObservableTrace trace = rr.traces[0];
    const DenseMatrix& v = models[0];
    trace.record("adv.V", std::vector<double>(v.data().begin(), v.data().end()));
    std::vector<double> sigma_sq(sc.k, 0.0);
    if (revealed) {
      // Rayleigh quotients of the full covariance along the final axes.
      DenseMatrix total = covs[0];
      for (std::size_t m = 1; m < covs.size(); ++m) total = add(total, covs[m]);
      const DenseMatrix sv = matmul(total, v);
      for (std::size_t j = 0; j < sc.k; ++j) {
        double rq = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) rq += v(i, j) * sv(i, j);
        sigma_sq[j] = rq;
      }
    } else {
      // Adversary-side estimate scaled up from its own rows.
      const DenseMatrix sv = matmul(covs[0], v);
      std::vector<double> sigma_a(sc.k, 0.0);
      for (std::size_t j = 0; j < sc.k; ++j) {
        double rq = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) rq += v(i, j) * sv(i, j);
        sigma_a[j] = std::sqrt(std::max(rq, 0.0));
      }
      const double n_a = static_cast<double>(blocks[0].rows());
      const double n_v = static_cast<double>(db.rows()) - n_a;
      sigma_sq = estimate_sigma_sq(sigma_a, n_v, n_a);
    }
    trace.record("adv.sigma_sq", std::move(sigma_sq));
    return trace;
  };

  const char* names[6] = {"svd.w.max", "svd.w.sum",  "svd.w.ssq",
                          "svd.d.max", "svd.d.sum",  "svd.d.ssq"};
  for (int i = 0; i < 6; ++i) {
    setup.stats.push_back({names[i], [i](const ObservableTrace& trace,
                                         std::span<const double> xdoc) {
      const std::vector<double>& flat = trace.values("adv.V");
      const std::size_t d = xdoc.size();
      if (d == 0 || flat.size() % d != 0) {
        throw DataError("svd statistic: axes do not match the document");
      }
      DenseMatrix v(d, flat.size() / d);
      std::copy(flat.begin(), flat.end(), v.data().begin());
      return svd_statistics(v, trace.values("adv.sigma_sq"), xdoc)[i];
    }});
  }
  return setup;
}

}  // namespace

Report run_privacy(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  const DenseMatrix x = experiment_corpus(cfg);
  if (cfg.privacy_docs > x.rows()) {
    throw ConfigError("privacy_docs exceeds the corpus size");
  }

  SeededRng doc_rng = SeededRng(cfg.seed).derive(kDocStream);
  const std::vector<std::size_t> perm = doc_rng.permutation(x.rows());
  const std::vector<std::size_t> docs(perm.begin(),
                                      perm.begin() + static_cast<std::ptrdiff_t>(cfg.privacy_docs));

  DigestAccumulator digest;
  const PrivacySetup setup = privacy_setup(cfg, x, &digest);

  Report report;
  report.config = cfg;
  report.table_header = {"doc", "pi"};
  for (const NamedStatistic& s : setup.stats) {
    report.table_header.push_back("p." + s.name);
  }

  std::vector<double> pis;
  pis.reserve(docs.size());
  const SeededRng base(cfg.seed);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    KsdpOptions opt;
    opt.t = cfg.privacy_runs;
    opt.simulator = cfg.simulator == "subsample" ? SimulatorKind::Subsample
                                                 : SimulatorKind::RandomDb;
    SeededRng ks = base.derive(kKsdpStreamBase + i);
    opt.seed = ks.next_u64();
    if (!cfg.output_dir.empty()) {
      opt.cache_path = cfg.output_dir + "/samples-doc" +
                       std::to_string(docs[i]) + ".txt";
    }
    const KsdpResult res =
        measure_ksdp(setup.mech, setup.mech, setup.stats, x, docs[i], opt);
    pis.push_back(res.pi);
    std::vector<double> row{static_cast<double>(docs[i]), res.pi};
    row.insert(row.end(), res.p_values.begin(), res.p_values.end());
    report.table.push_back(std::move(row));
  }

  std::vector<double> sorted = pis;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1
      ? sorted[n / 2]
      : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double mean = 0.0;
  for (double p : pis) mean += p;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double p : pis) var += (p - mean) * (p - mean);
  const double stddev = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;

  report.global = {
      {"pi_median", median},
      {"pi_mean", mean},
      {"pi_stddev", stddev},
      {"documents", static_cast<double>(n)},
      {"runs_per_side", static_cast<double>(cfg.privacy_runs)},
  };
  report.transcript_digest = digest.hex();
  report.elapsed_seconds = elapsed_since(start);
  return report;
}

Report run_dp_baseline(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  const DenseMatrix x = experiment_corpus(cfg);
  const std::vector<DenseMatrix> blocks = contiguous_blocks(x, cfg.parties);
  const PdNmfConfig pc = nmf_protocol_config(cfg, x);
  const auto parties = static_cast<PartyIndex>(cfg.parties);

  DigestAccumulator digest;
  std::vector<NmfModel> clean(cfg.parties);
  const RunResult rr_clean = run_parties(parties, [&](Party& p) {
    clean[p.index()] = pd_nmf(p, blocks[p.index()], pc);
  });
  digest.add(rr_clean.traces[0]);
  std::vector<NmfModel> noised(cfg.parties);
  const RunResult rr_noised = run_parties(parties, [&](Party& p) {
    noised[p.index()] = dp_noised_pd_nmf(p, blocks[p.index()], pc, cfg.epsilon,
                                         cfg.dp_delta, cfg.sensitivity);
  });
  digest.add(rr_noised.traces[0]);

  // Learning outcome of a topic matrix on the full corpus: refit the best
  // per-row nonnegative weights, then take the regularized objective.
  const auto corpus_objective = [&](const DenseMatrix& t) {
    DenseMatrix w(x.rows(), t.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const NnlsResult fit = nnls_row(x.row(i), t);
      std::copy(fit.w.begin(), fit.w.end(), w.row(i).begin());
    }
    return nmf_objective(x, w, t, pc.params);
  };
  const double obj_clean = corpus_objective(clean[0].t);
  const double obj_noised = corpus_objective(noised[0].t);
  const double sigma =
      gaussian_mechanism_sigma(cfg.epsilon, cfg.dp_delta, cfg.sensitivity);

  Report report;
  report.config = cfg;
  report.global = {
      {"sigma", sigma},
      {"epsilon", cfg.epsilon},
      {"dp_delta", cfg.dp_delta},
      {"sensitivity", cfg.sensitivity},
      {"objective_noiseless", obj_clean},
      {"objective_noised", obj_noised},
      {"objective_gap", obj_noised - obj_clean},
  };
  report.table_header = {"sigma", "objective_noiseless", "objective_noised",
                         "objective_gap"};
  report.table = {{sigma, obj_clean, obj_noised, obj_noised - obj_clean}};
  report.transcript_digest = digest.hex();
  report.elapsed_seconds = elapsed_since(start);
  return report;
}

Report run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "equivalence") return run_equivalence(cfg);
  if (cfg.experiment == "uplift") return run_uplift(cfg);
  if (cfg.experiment == "privacy") return run_privacy(cfg);
  if (cfg.experiment == "dp-baseline") return run_dp_baseline(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace pdml
