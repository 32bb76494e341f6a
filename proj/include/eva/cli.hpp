// Copyright 2026 The EVA Coreset Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line surface: ingest -> train -> score -> select -> retrain -> compare.
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eva/dynlog.hpp"
#include "eva/error.hpp"
#include "eva/score_io.hpp"
#include "eva/scorers.hpp"
#include "eva/selector.hpp"
#include "eva/synth.hpp"
#include "eva/train/config.hpp"
#include "eva/train/harness.hpp"
#include "eva/train/ingest.hpp"
#include "eva/train/synthetic_data.hpp"
#include "eva/window_search.hpp"

namespace eva::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Config file (optional) first, then explicit flags on top.
struct TrainFlags {
  std::string config_path;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config file ([train] section)")->check(CLI::ExistingFile);
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--batch-size", batch_size, "Mini-batch size");
    cmd->add_option("--lr", lr, "Initial learning rate");
    cmd->add_option("--seed", seed, "Training seed");
  }

  [[nodiscard]] train::TrainConfig resolve(train::ConfigFile* file_out = nullptr) const {
    train::TrainConfig cfg;
    train::ConfigFile file;
    if (!config_path.empty()) file = train::ConfigFile::load(config_path);
    train::apply_config(file, cfg);
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) cfg.lr = *lr;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    if (file_out) *file_out = file;
    return cfg;
  }
};

inline std::string percent_label(double rate) { return eva::detail::format_shortest(rate * 100.0) + "%"; }

}  // namespace detail

struct ScoreRequest {
  std::string method;
  std::vector<std::string> logs;
  std::optional<std::size_t> early;
  std::optional<std::size_t> late;
  std::size_t k = 10;
  std::optional<std::size_t> start;
  std::size_t epoch = 0;
  std::size_t window_start = 1;
  std::size_t window_len = 10;
  std::uint64_t seed = 0;
};

/// Computes the requested score vector from one or more logs.
inline ScoreVector compute_scores(const ScoreRequest& req) {
  const Method m = parse_method(req.method);
  if (req.logs.empty()) throw ValidationError("score needs a dynamics log");
  if (m != Method::el2n && req.logs.size() > 1) throw ValidationError("only el2n accepts several logs");
  std::vector<DynamicsLog> logs;
  for (const auto& p : req.logs) logs.push_back(read_log(p));
  const DynamicsLog& log = logs.front();

  auto dual = [&]() {
    if (!req.early || !req.late) throw ValidationError(req.method + " needs --early and --late");
    return WindowSpec{*req.early, *req.late, req.k};
  };
  auto single_start = [&]() {
    if (req.start) return *req.start;
    if (req.early) return *req.early;
    throw ValidationError(req.method + " needs --start (or --early)");
  };

  ScoreVector s;
  switch (m) {
    case Method::eva: s = eva_score(log, dual()); break;
    case Method::exp_dual: s = exp_dual_score(log, dual()); break;
    case Method::var_single: s = window_variance(log, single_start(), req.k); break;
    case Method::exp_single: s = window_expectation(log, single_start(), req.k); break;
    case Method::var_entire: s = var_entire_score(log); break;
    case Method::el2n: s = el2n_score(logs, req.window_start, req.window_len); break;
    case Method::forgetting: s = forgetting_score(log); break;
    case Method::entropy: s = entropy_score(log, req.epoch); break;
    case Method::aum: s = aum_score(log); break;
    case Method::random: s = random_score(static_cast<std::int64_t>(log.n_samples()), req.seed); break;
  }
  s.source_log = std::filesystem::path(req.logs.front()).filename().string();
  return s;
}

struct CompareRequest {
  std::string dataset_dir;
  std::string log_path;
  std::vector<std::string> methods;
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::size_t> early;
  std::optional<std::size_t> late;
  std::size_t k = 10;
  std::size_t strata = 50;
  double beta = 0.0;
  std::size_t jobs = 1;
};

struct CompareCell {
  double rate = 0.0;
  std::vector<double> accuracies;
  double mean = 0.0;
};

struct CompareTable {
  std::string dataset;
  std::vector<std::string> methods;
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<CompareCell>> cells;  // [method][rate]
  nlohmann::json config;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      nlohmann::json cj = nlohmann::json::array();
      for (const auto& c : cells[m]) cj.push_back({{"rate", c.rate}, {"accuracies", c.accuracies}, {"mean", c.mean}});
      rows.push_back({{"method", methods[m]}, {"cells", cj}});
    }
    return {{"dataset", dataset}, {"rates", rates}, {"seeds", seeds}, {"rows", rows}, {"config", config}};
  }

  [[nodiscard]] std::string to_text() const {
    std::ostringstream out;
    out << "# dataset=" << dataset << " seeds=" << seeds.size() << " config=" << config.dump() << '\n';
    out << "method";
    for (double r : rates) out << '\t' << detail::percent_label(r);
    out << '\n';
    for (std::size_t m = 0; m < methods.size(); ++m) {
      out << methods[m];
      for (const auto& c : cells[m]) out << '\t' << eva::detail::format_shortest(c.mean);
      out << '\n';
    }
    return out.str();
  }
};

/// Method x rate x seed matrix of coreset retraining accuracies.
inline CompareTable run_compare(const CompareRequest& req, const train::TrainConfig& cfg) {
  if (req.methods.empty() || req.rates.empty() || req.seeds.empty()) {
    throw ValidationError("compare needs at least one method, rate and seed");
  }
  for (double r : req.rates) check_alpha(r);
  const train::Dataset data = train::load_dataset(req.dataset_dir);
  const DynamicsLog log = read_log(req.log_path);
  if (log.n_samples() != data.train.size()) {
    throw ValidationError("log has " + std::to_string(log.n_samples()) + " samples but the train split has " +
                          std::to_string(data.train.size()));
  }

  auto window_for = [&](double rate) {
    if (req.early && req.late) return WindowSpec{*req.early, *req.late, req.k};
    if (auto w = find_preset(data.ref.name, rate)) return *w;
    throw ValidationError("no --early/--late given and no preset window for " + data.ref.name + " at " +
                          detail::percent_label(rate));
  };

  // Scores and coresets are computed up front (cheap); training runs in parallel.
  struct Task {
    std::size_t m, r, s;
    Coreset coreset;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < req.methods.size(); ++m) {
    const std::string& name = req.methods[m];
    for (std::size_t r = 0; r < req.rates.size(); ++r) {
      const double rate = req.rates[r];
      for (std::size_t s = 0; s < req.seeds.size(); ++s) {
        const auto seed = req.seeds[s];
        Coreset c;
        if (name == "ccs") {
          c = ccs_select(aum_score(log), rate, {req.strata, req.beta, seed});
        } else if (name == "random") {
          c = select_top(random_score(static_cast<std::int64_t>(log.n_samples()), seed), rate);
          c.seed = seed;
        } else {
          const Method method = parse_method(name);
          ScoreVector sv;
          switch (method) {
            case Method::eva: sv = eva_score(log, window_for(rate)); break;
            case Method::exp_dual: sv = exp_dual_score(log, window_for(rate)); break;
            case Method::var_single: sv = window_variance(log, window_for(rate).t_e, req.k); break;
            case Method::exp_single: sv = window_expectation(log, window_for(rate).t_e, req.k); break;
            case Method::var_entire: sv = var_entire_score(log); break;
            case Method::el2n: sv = el2n_score(log); break;
            case Method::forgetting: sv = forgetting_score(log); break;
            case Method::entropy: sv = entropy_score(log); break;
            case Method::aum: sv = aum_score(log); break;
            case Method::random: break;
          }
          c = select_top(sv, rate);
        }
        tasks.push_back({m, r, s, std::move(c)});
      }
    }
  }

  std::vector<double> acc(tasks.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        train::TrainConfig run_cfg = cfg;
        run_cfg.seed = req.seeds[tasks[t].s];
        acc[t] = train::train_subset(data, tasks[t].coreset, run_cfg);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(req.jobs, 1, tasks.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  CompareTable table;
  table.dataset = data.ref.name;
  table.methods = req.methods;
  table.rates = req.rates;
  table.seeds = req.seeds;
  table.config = cfg.to_json();
  table.config["ccs"] = {{"n_strata", req.strata}, {"beta", req.beta}};
  table.cells.assign(req.methods.size(), std::vector<CompareCell>(req.rates.size()));
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto& cell = table.cells[tasks[t].m][tasks[t].r];
    cell.rate = req.rates[tasks[t].r];
    cell.accuracies.push_back(acc[t]);
  }
  for (auto& row : table.cells) {
    for (auto& cell : row) {
      double sum = 0.0;
      for (double a : cell.accuracies) sum += a;
      cell.mean = sum / static_cast<double>(cell.accuracies.size());
    }
  }
  return table;
}

/// Runs the CLI with `args` (excluding the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Coreset selection from training dynamics", "eva"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Import a dataset into the canonical layout");
  std::string npz_path, cifar_dir, ingest_out, ingest_name;
  int cifar_variant = 10;
  std::optional<std::uint32_t> ingest_classes;
  auto* npz_opt = ingest->add_option("--npz", npz_path, "MedMNIST-style .npz archive");
  auto* cifar_opt = ingest->add_option("--cifar", cifar_dir, "Directory of CIFAR binary batches");
  npz_opt->excludes(cifar_opt);
  ingest->add_option("--variant", cifar_variant, "CIFAR variant (10 or 100)");
  ingest->add_option("--out", ingest_out, "Output dataset directory")->required();
  ingest->add_option("--name", ingest_name, "Dataset name (default: archive stem)");
  ingest->add_option("--classes", ingest_classes, "Number of classes");

  // synth-data
  auto* synth_data = app.add_subcommand("synth-data", "Generate a separable synthetic image dataset");
  train::SeparableSpec sep;
  std::string synth_data_out;
  synth_data->add_option("--out", synth_data_out, "Output dataset directory")->required();
  synth_data->add_option("--n-train", sep.n_train);
  synth_data->add_option("--n-val", sep.n_val);
  synth_data->add_option("--n-test", sep.n_test);
  synth_data->add_option("--classes", sep.n_classes);
  synth_data->add_option("--height", sep.height);
  synth_data->add_option("--width", sep.width);
  synth_data->add_option("--noise", sep.noise);
  synth_data->add_option("--seed", sep.seed);

  // synth-log
  auto* synth_log = app.add_subcommand("synth-log", "Generate a synthetic dynamics log");
  std::string synth_log_out, synth_profile = "mixed";
  std::size_t sl_n = 1000, sl_c = 5, sl_t = 200;
  std::uint64_t sl_seed = 0;
  synth_log->add_option("-o,--out", synth_log_out, "Output log path")->required();
  synth_log->add_option("--n", sl_n);
  synth_log->add_option("--classes", sl_c);
  synth_log->add_option("--epochs", sl_t);
  synth_log->add_option("--seed", sl_seed);
  synth_log->add_option("--profile", synth_profile, "constant|linear-improving|oscillating|random-walk|mixed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train on the full set (recording dynamics) or on a coreset");
  std::string train_dataset, train_subset_path, train_log, train_model;
  detail::TrainFlags train_flags;
  train_cmd->add_option("--dataset", train_dataset, "Dataset directory")->required();
  train_cmd->add_option("--subset", train_subset_path, "Index file of the coreset")->check(CLI::ExistingFile);
  train_cmd->add_option("--log", train_log, "Dynamics log output (full run)");
  train_cmd->add_option("--model", train_model, "Model artifact output");
  train_flags.add_to(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Top-1 accuracy of a saved model");
  std::string eval_model, eval_dataset, eval_split = "test";
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--dataset", eval_dataset)->required();
  eval_cmd->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));

  // score
  auto* score_cmd = app.add_subcommand("score", "Score samples from a dynamics log");
  ScoreRequest sreq;
  std::string score_out;
  score_cmd->add_option("--method", sreq.method, "eva|el2n|forgetting|entropy|aum|random|var_single|exp_single|"
                                                 "exp_dual|var_entire")->required();
  score_cmd->add_option("logs", sreq.logs, "Dynamics log(s)")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("-o,--out", score_out, "Score file")->required();
  score_cmd->add_option("--early", sreq.early, "Early window start t_e");
  score_cmd->add_option("--late", sreq.late, "Late window start t_l");
  score_cmd->add_option("--k", sreq.k, "Window length K");
  score_cmd->add_option("--start", sreq.start, "Single-window start");
  score_cmd->add_option("--epoch", sreq.epoch, "Entropy snapshot epoch (default: last)");
  score_cmd->add_option("--window-start", sreq.window_start, "EL2N window start");
  score_cmd->add_option("--window-len", sreq.window_len, "EL2N window length");
  score_cmd->add_option("--seed", sreq.seed, "Random scorer seed");

  // select
  auto* select_cmd = app.add_subcommand("select", "Select a coreset from a score file");
  double rate = 0.0;
  bool use_ccs = false;
  CcsOptions ccs;
  std::string select_in, select_out;
  select_cmd->add_option("--rate", rate, "Selection rate in (0, 1]")->required();
  select_cmd->add_flag("--ccs", use_ccs, "Coverage-centric stratified sampling");
  select_cmd->add_option("--strata", ccs.n_strata);
  select_cmd->add_option("--beta", ccs.beta);
  select_cmd->add_option("--seed", ccs.seed);
  select_cmd->add_option("scores", select_in, "Score file")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("-o,--out", select_out, "Index file")->required();

  // preset
  auto* preset_cmd = app.add_subcommand("preset", "Print the shipped optimal window for a dataset and rate");
  std::string preset_dataset;
  double preset_rate = 0.0;
  preset_cmd->add_option("--dataset", preset_dataset)->required();
  preset_cmd->add_option("--rate", preset_rate)->required();

  // search-windows
  auto* search_cmd = app.add_subcommand("search-windows", "Grid-search dual windows by retraining");
  std::string search_dataset, search_log, search_out, search_json;
  double search_rate = 0.0;
  std::vector<std::uint64_t> search_seeds{0};
  std::vector<std::size_t> search_starts;
  std::size_t search_k = 10, search_jobs = 1;
  std::optional<std::size_t> proxy_epochs;
  detail::TrainFlags search_flags;
  search_cmd->add_option("--dataset", search_dataset)->required();
  search_cmd->add_option("--log", search_log)->required()->check(CLI::ExistingFile);
  search_cmd->add_option("--rate", search_rate)->required();
  search_cmd->add_option("--seeds", search_seeds)->delimiter(',');
  search_cmd->add_option("--starts", search_starts, "Candidate start epochs")->delimiter(',');
  search_cmd->add_option("--k", search_k);
  search_cmd->add_option("--proxy-epochs", proxy_epochs, "Reduced epoch count per candidate");
  search_cmd->add_option("--jobs", search_jobs);
  search_cmd->add_option("-o,--out", search_out, "Text report");
  search_cmd->add_option("--json", search_json, "JSON report");
  search_flags.add_to(search_cmd);

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Accuracy table over methods x rates x seeds");
  CompareRequest creq;
  std::string compare_out, compare_json;
  detail::TrainFlags compare_flags;
  compare_cmd->add_option("--dataset", creq.dataset_dir)->required();
  compare_cmd->add_option("--log", creq.log_path)->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--methods", creq.methods)->delimiter(',')->required();
  compare_cmd->add_option("--rates", creq.rates)->delimiter(',')->required();
  compare_cmd->add_option("--seeds", creq.seeds)->delimiter(',');
  compare_cmd->add_option("--early", creq.early);
  compare_cmd->add_option("--late", creq.late);
  compare_cmd->add_option("--k", creq.k);
  compare_cmd->add_option("--strata", creq.strata);
  compare_cmd->add_option("--beta", creq.beta);
  compare_cmd->add_option("--jobs", creq.jobs);
  compare_cmd->add_option("-o,--out", compare_out, "Text table");
  compare_cmd->add_option("--json", compare_json, "JSON table");
  compare_flags.add_to(compare_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) {
      train::DatasetRef ref;
      if (!npz_path.empty()) {
        ref = train::ingest_npz(npz_path, ingest_out, {ingest_name, ingest_classes});
      } else if (!cifar_dir.empty()) {
        ref = train::ingest_cifar(cifar_dir, ingest_out, cifar_variant);
      } else {
        throw ValidationError("ingest needs --npz or --cifar");
      }
      out << train::dataset_meta(ref).dump() << '\n';
    } else if (synth_data->parsed()) {
      const auto ref = train::save_dataset(train::make_separable_dataset(sep), synth_data_out);
      out << train::dataset_meta(ref).dump() << '\n';
    } else if (synth_log->parsed()) {
      auto gen = gen_synthetic_log(sl_n, sl_c, sl_t, sl_seed, parse_profile(synth_profile));
      write_log(gen.log, synth_log_out);
    } else if (train_cmd->parsed()) {
      const auto cfg = train_flags.resolve();
      const auto data = train::load_dataset(train_dataset);
      if (!train_subset_path.empty()) {
        const Coreset coreset = read_indices(train_subset_path, data.train.size());
        auto run = train::train_subset_model(data, coreset, cfg);
        if (!train_model.empty()) run.model->save(train_model);
        out << "accuracy=" << eva::detail::format_shortest(run.test_accuracy) << '\n';
      } else {
        if (train_log.empty()) throw ValidationError("a full training run needs --log");
        auto run = train::train_full(data, cfg, train_log);
        if (!train_model.empty()) run.model->save(train_model);
        out << "accuracy=" << eva::detail::format_shortest(run.test_accuracy) << '\n';
      }
    } else if (eval_cmd->parsed()) {
      const auto data = train::load_dataset(eval_dataset);
      const auto model = train::SmallCnn::load(eval_model);
      const train::Split& split = eval_split == "train" ? data.train : eval_split == "val" ? data.val : data.test;
      out << "accuracy=" << eva::detail::format_shortest(train::evaluate(*model, split)) << '\n';
    } else if (score_cmd->parsed()) {
      write_scores(compute_scores(sreq), std::filesystem::path(score_out));
    } else if (select_cmd->parsed()) {
      check_alpha(rate);
      const ScoreVector scores = read_scores(std::filesystem::path(select_in));
      const Coreset c = use_ccs ? ccs_select(scores, rate, ccs) : select_top(scores, rate);
      write_indices(c, std::filesystem::path(select_out));
    } else if (preset_cmd->parsed()) {
      const WindowSpec w = preset_windows(preset_dataset, preset_rate);
      out << "t_e=" << w.t_e << " t_l=" << w.t_l << " K=" << w.K << '\n';
    } else if (search_cmd->parsed()) {
      train::ConfigFile file;
      auto cfg = search_flags.resolve(&file);
      const auto data = train::load_dataset(search_dataset);
      const DynamicsLog log = read_log(search_log);
      SearchGrid grid = search_starts.empty() ? default_grid(log.n_epochs(), search_k)
                                              : SearchGrid{search_starts, search_k, log.n_epochs()};
      train::TrainConfig eval_cfg = cfg;
      if (proxy_epochs) eval_cfg.epochs = *proxy_epochs;
      eval_cfg.validate();
      SearchOptions opt{search_jobs, {{"epochs", eval_cfg.epochs}, {"full_epochs", cfg.epochs}}};
      auto evaluator = [&](const Coreset& c, std::uint64_t seed) {
        train::TrainConfig run_cfg = eval_cfg;
        run_cfg.seed = seed;
        return train::train_subset(data, c, run_cfg);
      };
      const auto result = search(log, grid, search_rate, evaluator, search_seeds, opt);
      auto json = result.to_json();
      json["config"] = cfg.to_json();
      if (!search_out.empty()) detail::write_text(search_out, result.to_text());
      if (!search_json.empty()) detail::write_text(search_json, json.dump(2) + "\n");
      out << result.to_text();
    } else if (compare_cmd->parsed()) {
      const auto cfg = compare_flags.resolve();
      const auto table = run_compare(creq, cfg);
      if (!compare_out.empty()) detail::write_text(compare_out, table.to_text());
      if (!compare_json.empty()) detail::write_text(compare_json, table.to_json().dump(2) + "\n");
      out << table.to_text();
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace eva::cli
