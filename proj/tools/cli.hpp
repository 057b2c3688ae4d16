#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "twoway/twoway.hpp"

namespace twoway::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

inline int exit_code_for(const Error& e) {
  if (e.kind() == ErrorKind::InvalidArgument) return kUsage;
  return e.is_numerical() ? kNumerical : kData;
}

/// Command line without the --out destination.
inline std::string command_line(int argc, const char* const* argv) {
  std::string cmd = "twoway";
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--out") {
      ++k;
      continue;
    }
    if (a.rfind("--out=", 0) == 0) continue;
    cmd += ' ';
    cmd += a;
  }
  return cmd;
}

struct Common {
  std::string input;
  std::string out = ".";
  bool header = false;
  bool rownames = false;
  std::uint64_t seed = 0;
  int starts = 10;
  double tol = 1e-8;
  int max_iter = 1000;
  int screen_iters = 0;
  unsigned threads = 1;
  std::string method = "rowcol";
  int k1 = 2;
  int k2 = 2;

  FitConfig config() const {
    FitConfig c;
    c.n_starts = starts;
    c.seed = seed;
    c.tol = tol;
    c.max_iter = max_iter;
    c.screen_iters = screen_iters;
    return c;
  }
  ReadOptions read_options() const { return {header, rownames, ','}; }
};

class Runner {
 public:
  Runner(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
      : argc_(argc), argv_(argv), out_(out), err_(err), cmd_(command_line(argc, argv)) {}

  int run() {
    CLI::App app{"Two-way latent variable model: row clustering with column segmentation", "twoway"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto* fit_cmd = app.add_subcommand("fit", "estimate model parameters");
    add_input(fit_cmd);
    add_fit_options(fit_cmd, true);

    auto* select_cmd = app.add_subcommand("select", "choose (k1, k2) by half-split cross-validation");
    add_input(select_cmd);
    add_fit_options(select_cmd, false);
    select_cmd->add_option("--grid", grid_, "candidate grid, e.g. 1:3x1:4")->required();
    select_cmd->add_option("--splits", splits_, "number of random half splits")->check(CLI::PositiveNumber);
    select_cmd->add_option("--threshold", threshold_, "q threshold of the parsimonious choice")
        ->check(CLI::Range(0.0, 1.0));

    auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo study of a scenario file");
    sim_cmd->add_option("scenario", o_.input, "scenario file")->required();
    add_fit_options(sim_cmd, false);
    sim_cmd->add_option("--replicates", replicates_, "override the scenario's replicate count")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--sample", sample_only_, "write one simulated data set instead of running the study");
    auto* seed_opt = sim_cmd->get_option("--seed");
    seed_opt->description("override the scenario seed");

    auto* pred_cmd = app.add_subcommand("predict", "MAP row and column labels");
    add_input(pred_cmd);
    add_fit_options(pred_cmd, true);
    pred_cmd->add_option("--params", params_path_, "params.csv from a previous fit")->check(CLI::ExistingFile);

    auto* ns_cmd = app.add_subcommand("normal-scores", "per-row normal-score transform");
    add_input(ns_cmd);
    ns_cmd->add_option("--out", o_.out, "output directory");

    try {
      app.parse(argc_, argv_);
    } catch (const CLI::CallForHelp& e) {
      out_ << app.help();
      return kOk;
    } catch (const CLI::CallForVersion&) {
      out_ << kVersion << '\n';
      return kOk;
    } catch (const CLI::ParseError& e) {
      err_ << "twoway: " << e.what() << '\n';
      return kUsage;
    }

    try {
      if (*fit_cmd) return do_fit();
      if (*select_cmd) return do_select(seed_given(select_cmd));
      if (*sim_cmd) return do_simulate(seed_opt->count() > 0);
      if (*pred_cmd) return do_predict();
      if (*ns_cmd) return do_normal_scores();
    } catch (const Error& e) {
      err_ << "twoway: " << to_string(e.kind()) << ": " << e.what() << '\n';
      return exit_code_for(e);
    } catch (const std::exception& e) {
      err_ << "twoway: " << e.what() << '\n';
      return kData;
    }
    return kUsage;
  }

 private:
  static bool seed_given(CLI::App* cmd) { return cmd->get_option("--seed")->count() > 0; }

  void add_input(CLI::App* cmd) {
    cmd->add_option("input", o_.input, "CSV data matrix")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--header", o_.header, "first line holds column names");
    cmd->add_flag("--rownames", o_.rownames, "first field holds the row name");
  }

  void add_fit_options(CLI::App* cmd, bool with_model) {
    if (with_model) {
      cmd->add_option("--method", o_.method, "estimator")->check(CLI::IsMember({"full", "row", "rowcol"}));
      cmd->add_option("--k1", o_.k1, "row support points")->check(CLI::PositiveNumber);
      cmd->add_option("--k2", o_.k2, "column support points")->check(CLI::PositiveNumber);
    }
    cmd->add_option("--seed", o_.seed, "random seed");
    cmd->add_option("--starts", o_.starts, "random starts per fit")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", o_.tol, "relative objective tolerance");
    cmd->add_option("--max-iter", o_.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--screen-iters", o_.screen_iters, "iterations per start before keeping only the best")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--threads", o_.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o_.out, "output directory");
  }

  std::ofstream open(const std::string& name) {
    std::filesystem::create_directories(o_.out);
    const std::string path = (std::filesystem::path(o_.out) / name).string();
    auto f = detail::open_output(path);
    f << provenance_line(o_.seed, cmd_) << '\n';
    written_.push_back(path);
    return f;
  }

  TwoWayArray load() const { return read_array(o_.input, o_.read_options()); }

  FitResult fit_model(const TwoWayArray& data) const {
    const ModelDims dims{data.rows(), data.cols(), o_.k1, o_.k2};
    return fit(data, dims, o_.config(), parse_method(o_.method));
  }

  void report_written() {
    for (const auto& p : written_) out_ << "wrote " << p << '\n';
  }

  int do_fit() {
    const TwoWayArray data = load();
    const FitResult fr = fit_model(data);
    {
      auto f = open("params.csv");
      write_params(f, fr.params);
    }
    {
      auto f = open("trace.csv");
      write_trace(f, fr);
    }
    out_ << "method " << to_string(fr.method) << ", objective " << detail::format_double(fr.objective) << ", "
         << fr.iterations << " iterations, " << (fr.converged ? "converged" : "not converged") << '\n';
    report_written();
    return kOk;
  }

  int do_select(bool) {
    const TwoWayArray data = load();
    const auto grid = parse_grid(grid_);
    const SelectionTable table = cv_selection(data, grid, splits_, o_.config(), o_.seed, o_.threads);
    {
      auto f = open("selection.csv");
      write_selection(f, table);
    }
    for (const auto& e : table.entries)
      if (e.flagged) err_ << "twoway: (" << e.point.k1 << "," << e.point.k2 << ") flagged: " << e.failures.front() << '\n';
    try {
      const GridPoint best = select_parsimonious(table, threshold_);
      out_ << "selected k1=" << best.k1 << " k2=" << best.k2 << '\n';
    } catch (const Error& e) {
      err_ << "twoway: " << e.what() << '\n';
    }
    report_written();
    return kOk;
  }

  int do_simulate(bool seed_override) {
    Scenario sc = read_scenario(o_.input);
    if (seed_override) sc.seed = o_.seed;
    if (replicates_ > 0) sc.n_replicates = replicates_;
    o_.seed = sc.seed;
    if (sample_only_) {
      const SampledData smp = sample_data(sc.dims, sc.truth, derive_seed(sc.seed, {0, 0}));
      {
        auto f = open("data.csv");
        write_array(f, smp.data);
      }
      {
        auto f = open("true_labels.csv");
        f << "axis,index,label\n";
        for (std::size_t i = 0; i < smp.row_labels.size(); ++i) f << "row," << i + 1 << ',' << smp.row_labels[i] + 1 << '\n';
        for (std::size_t j = 0; j < smp.col_labels.size(); ++j)
          f << "column," << j + 1 << ',' << smp.col_labels[j] + 1 << '\n';
      }
      report_written();
      return kOk;
    }
    ScenarioOptions opts;
    opts.threads = o_.threads;
    const AccuracyReport rep = run_scenario(sc, o_.config(), opts);
    {
      auto f = open("accuracy.csv");
      write_accuracy(f, rep);
    }
    {
      auto f = open("timing.csv");
      write_timing(f, rep);
    }
    for (const auto& m : rep.methods)
      if (m.flagged)
        err_ << "twoway: " << to_string(m.method) << " excluded " << m.n_failures << " of "
             << m.n_failures + m.n_fits << " replicates\n";
    report_written();
    return kOk;
  }

  int do_predict() {
    const TwoWayArray data = load();
    ModelParams params;
    if (!params_path_.empty()) {
      params = read_params(params_path_);
      validate_params(params, dims_of(data, params));
    } else {
      params = fit_model(data).params;
    }
    const Prediction pr = predict_map(data, params);
    {
      auto f = open("labels.csv");
      write_labels(f, data, pr);
    }
    {
      auto f = open("posteriors.csv");
      write_posteriors(f, pr);
    }
    {
      auto f = open("cell_means.csv");
      TwoWayArray means = TwoWayArray::complete(pr.cell_means);
      means.row_names = data.row_names;
      means.col_names = data.col_names;
      write_array(f, means);
    }
    report_written();
    return kOk;
  }

  int do_normal_scores() {
    const TwoWayArray data = load();
    const TwoWayArray ns = normal_scores(data);
    {
      auto f = open("normal_scores.csv");
      write_array(f, ns);
    }
    report_written();
    return kOk;
  }

  int argc_;
  const char* const* argv_;
  std::ostream& out_;
  std::ostream& err_;
  std::string cmd_;
  Common o_;
  std::string grid_;
  int splits_ = 10;
  double threshold_ = 0.98;
  int replicates_ = 0;
  bool sample_only_ = false;
  std::string params_path_;
  std::vector<std::string> written_;
};

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Runner(argc, argv, out, err).run();
}

}  // namespace twoway::cli
