// Command-line front end: experiment drivers plus micro-benchmarks for the
// two aggregation primitives. Exit codes: 0 success, 1 config error, 2 data
// error, 3 protocol/transport error.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdml/beaver.hpp"
#include "pdml/errors.hpp"
#include "pdml/experiments.hpp"
#include "pdml/fixed.hpp"
#include "pdml/net.hpp"
#include "pdml/normed_secsum.hpp"
#include "pdml/rng.hpp"
#include "pdml/secsum.hpp"

namespace {

struct CliState {
  pdml::ExperimentConfig cfg;
  std::string config_file;
  std::string report_name;
};

void add_experiment_flags(CLI::App* sub, CliState& st) {
  sub->add_option("--algorithm", st.cfg.algorithm,
                  "nmf | svd | pca | secsum (privacy only)");
  sub->add_option("-M,--parties", st.cfg.parties, "number of parties");
  sub->add_option("--fraction", st.cfg.fraction,
                  "party database size as a corpus fraction");
  sub->add_option("-k,--rank", st.cfg.k, "factorization / truncation rank");
  sub->add_option("--tau", st.cfg.tau, "power-iteration rounds (svd, pca)");
  sub->add_option("--max-iters", st.cfg.max_iters, "factorization sweeps (nmf)");
  sub->add_option("--alpha", st.cfg.alpha, "L1 weight on T");
  sub->add_option("--beta", st.cfg.beta, "L2 weight on T");
  sub->add_option("--gamma", st.cfg.gamma, "L1 weight on W");
  sub->add_option("--delta", st.cfg.delta, "L2 weight on W");
  sub->add_option("--f-bits", st.cfg.f_bits, "fixed-point fractional bits");
  sub->add_option("--backend", st.cfg.backend,
                  "float | fixed | fixed-prf | fixed-ideal | fixed-shared");
  sub->add_option("--seed", st.cfg.seed, "experiment seed");
  sub->add_option("--dataset", st.cfg.dataset, "matrix file (else synthetic)");
  sub->add_option("--dataset-format", st.cfg.dataset_format,
                  "auto | csv | matrix-market");
  sub->add_flag("--tfidf", st.cfg.tfidf, "per-party tf-idf reweighting");
  sub->add_option("--synthetic", st.cfg.synthetic,
                  "synthetic corpus kind: iid | lowrank");
  sub->add_option("--rows", st.cfg.synthetic_rows, "synthetic corpus rows");
  sub->add_option("--cols", st.cfg.synthetic_cols, "synthetic corpus columns");
  sub->add_option("--output-dir", st.cfg.output_dir,
                  "report directory (default: $PDML_OUTPUT_DIR or .)");
  sub->add_option("--tolerance", st.cfg.tolerance, "equivalence pass threshold");
  sub->add_option("--docs", st.cfg.privacy_docs, "documents of interest");
  sub->add_option("--runs", st.cfg.privacy_runs, "mechanism runs per side");
  sub->add_option("--sigma-source", st.cfg.sigma_source,
                  "estimated | revealed (svd privacy)");
  sub->add_option("--simulator", st.cfg.simulator, "subsample | random-db");
  sub->add_option("--epsilon", st.cfg.epsilon, "DP epsilon");
  sub->add_option("--dp-delta", st.cfg.dp_delta, "DP delta");
  sub->add_option("--sensitivity", st.cfg.sensitivity, "DP sensitivity bound");
  sub->add_option("--config", st.config_file,
                  "JSON config file; its values override the flags");
  sub->add_option("--report-name", st.report_name,
                  "report basename (default: the experiment name)");
}

int run_experiment_command(CliState& st, const std::string& experiment) {
  st.cfg.experiment = experiment;
  if (!st.config_file.empty()) {
    st.cfg = pdml::apply_config_file(st.config_file, st.cfg);
    st.cfg.experiment = experiment;
  }
  if (st.cfg.output_dir.empty()) st.cfg.output_dir = pdml::default_output_dir();
  std::filesystem::create_directories(st.cfg.output_dir);

  const pdml::Report report = pdml::run_experiment(st.cfg);

  const std::string base = st.report_name.empty() ? experiment : st.report_name;
  const std::string report_path = st.cfg.output_dir + "/" + base + ".json";
  const std::string table_path = st.cfg.output_dir + "/" + base + ".csv";
  pdml::write_report(report, report_path);
  pdml::write_table(report, table_path);

  std::cout << "experiment: " << experiment << "\n"
            << std::setprecision(10);
  for (const pdml::MetricRow& m : report.global) {
    std::cout << "  " << m.name << " = " << m.value << "\n";
  }
  std::cout << "  elapsed_seconds = " << report.elapsed_seconds << "\n"
            << "report: " << report_path << "\n"
            << "table: " << table_path << "\n";
  return 0;
}

struct BenchState {
  std::size_t parties = 3;
  std::size_t dim = 1000;
  std::string mode = "fixed";
  int f_bits = 31;
  std::size_t reps = 5;
  std::uint64_t seed = 1;
};

void add_bench_flags(CLI::App* sub, BenchState& st) {
  sub->add_option("-M,--parties", st.parties, "number of parties");
  sub->add_option("-d,--dim", st.dim, "vector length");
  sub->add_option("--f-bits", st.f_bits, "fixed-point fractional bits");
  sub->add_option("--reps", st.reps, "invocations to average over");
  sub->add_option("--seed", st.seed, "input seed");
}

int run_secsum_bench(const BenchState& st) {
  if (st.parties == 0 || st.dim == 0 || st.reps == 0) {
    throw pdml::ConfigError("bench sizes must be positive");
  }
  const pdml::SecSumMode mode = pdml::parse_secsum_mode(st.mode);
  const auto parties = static_cast<pdml::PartyIndex>(st.parties);
  const auto start = std::chrono::steady_clock::now();
  pdml::run_parties(parties, [&](pdml::Party& p) {
    pdml::SeededRng in_rng = pdml::SeededRng(st.seed).derive(p.index());
    std::vector<double> x(st.dim);
    for (double& v : x) v = in_rng.uniform(-1.0, 1.0);
    pdml::SecSumChannel ch(p, mode,
                           pdml::FixedCodec(st.f_bits, 2.0, p.count()),
                           st.seed);
    for (std::size_t r = 0; r < st.reps; ++r) {
      ch.sum(p, x, "bench." + std::to_string(r));
    }
  });
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::cout << "mode,parties,dim,reps,seconds_total,seconds_per_op\n"
            << st.mode << "," << st.parties << "," << st.dim << "," << st.reps
            << "," << std::setprecision(6) << total << ","
            << total / static_cast<double>(st.reps) << "\n";
  return 0;
}

int run_nss_bench(const BenchState& st) {
  if (st.parties == 0 || st.dim == 0 || st.reps == 0) {
    throw pdml::ConfigError("bench sizes must be positive");
  }
  pdml::NssConfig cfg;
  cfg.f = st.f_bits;
  if (st.mode == "float") cfg.mode = pdml::NssMode::Float;
  else if (st.mode == "fixed-ideal") cfg.mode = pdml::NssMode::FixedIdeal;
  else if (st.mode == "fixed-shared" || st.mode == "fixed") {
    cfg.mode = pdml::NssMode::FixedShared;
  } else {
    throw pdml::ConfigError("nss backend must be float, fixed-ideal, or "
                            "fixed-shared");
  }

  const auto parties = static_cast<pdml::PartyIndex>(st.parties);
  std::vector<pdml::DealerMaterial> material;
  double deal_seconds = 0.0;
  pdml::DealerCounts budget;
  if (cfg.mode == pdml::NssMode::FixedShared) {
    budget = pdml::nss_budget(st.dim, cfg, static_cast<unsigned>(st.parties)) *
             st.reps;
    pdml::SeededRng deal_rng(st.seed, 0xDEA1);
    const auto deal_start = std::chrono::steady_clock::now();
    material = pdml::generate_dealer_material(
        static_cast<unsigned>(st.parties), budget, cfg.f, deal_rng);
    deal_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - deal_start)
                       .count();
  }

  const auto start = std::chrono::steady_clock::now();
  pdml::run_parties(parties, [&](pdml::Party& p) {
    pdml::SeededRng in_rng = pdml::SeededRng(st.seed).derive(p.index());
    pdml::SeededRng share_rng = pdml::SeededRng(st.seed).derive(0x900 + p.index());
    std::vector<double> x(st.dim);
    const double bound = 0.9 / static_cast<double>(st.parties);
    for (double& v : x) v = in_rng.uniform(-bound, bound);
    pdml::DealerMaterial* mat = material.empty() ? nullptr : &material[p.index()];
    for (std::size_t r = 0; r < st.reps; ++r) {
      pdml::normed_secsum(p, x, cfg, share_rng, mat, "bench." + std::to_string(r));
    }
  });
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::cout << "backend,parties,dim,reps,deal_seconds,seconds_per_op,"
               "triples,word_ands,dabits\n"
            << st.mode << "," << st.parties << "," << st.dim << "," << st.reps
            << "," << std::setprecision(6) << deal_seconds << ","
            << total / static_cast<double>(st.reps) << "," << budget.muls << ","
            << budget.word_ands << "," << budget.dabits << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private distributed NMF/SVD/PCA over secure aggregation: "
               "experiment drivers and primitive benchmarks.\n"
               "Exit codes: 0 success, 1 config error, 2 data error, "
               "3 protocol error."};
  app.require_subcommand(1);

  CliState equivalence_state, uplift_state, privacy_state, dp_state;
  CLI::App* equivalence =
      app.add_subcommand("equivalence", "distributed vs centralized agreement");
  add_experiment_flags(equivalence, equivalence_state);
  CLI::App* uplift =
      app.add_subcommand("uplift", "per-party value of joint training");
  add_experiment_flags(uplift, uplift_state);
  CLI::App* privacy =
      app.add_subcommand("privacy", "KS-distance privacy measurement");
  add_experiment_flags(privacy, privacy_state);
  CLI::App* dp = app.add_subcommand("dp-baseline",
                                    "Gaussian-noise baseline comparison");
  add_experiment_flags(dp, dp_state);

  BenchState secsum_state, nss_state;
  CLI::App* secsum_bench =
      app.add_subcommand("secsum-bench", "secure-sum timing");
  add_bench_flags(secsum_bench, secsum_state);
  secsum_bench->add_option("--mode", secsum_state.mode,
                           "float | fixed | fixed-prf");
  CLI::App* nss_bench =
      app.add_subcommand("nss-bench", "normalized secure-sum timing");
  add_bench_flags(nss_bench, nss_state);
  nss_state.mode = "fixed-shared";
  nss_state.reps = 1;
  nss_bench->add_option("--backend", nss_state.mode,
                        "float | fixed-ideal | fixed-shared");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version are success, bad flags config
  }

  try {
    if (equivalence->parsed()) {
      return run_experiment_command(equivalence_state, "equivalence");
    }
    if (uplift->parsed()) return run_experiment_command(uplift_state, "uplift");
    if (privacy->parsed()) return run_experiment_command(privacy_state, "privacy");
    if (dp->parsed()) return run_experiment_command(dp_state, "dp-baseline");
    if (secsum_bench->parsed()) return run_secsum_bench(secsum_state);
    if (nss_bench->parsed()) return run_nss_bench(nss_state);
    throw pdml::ConfigError("no subcommand selected");
  } catch (const pdml::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const pdml::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const pdml::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return 3;
  } catch (const pdml::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
