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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eva/cli.hpp"
#include "eva/eva.hpp"
#include "support/brute_oracle.hpp"
#include "support/test_util.hpp"

namespace {

using namespace eva;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// 50 mixed-profile logs, N=1000, C=5, T=200, checked on every default-grid window.
constexpr int kCorpusLogs = 50;

SyntheticLog corpus_log(int k) {
  return gen_synthetic_log(1000, 5, 200, 1000 + static_cast<std::uint64_t>(k), TrajectoryProfile::mixed);
}

Outcome variance_oracle() {
  const auto t0 = Clock::now();
  const auto grid = default_grid(200, 10);
  double worst = 0.0;
  for (int k = 0; k < kCorpusLogs; ++k) {
    const auto s = corpus_log(k);
    for (auto start : grid.starts) {
      const auto v = window_variance(s.log, start, grid.K);
      for (std::size_t i = 0; i < s.log.n_samples(); ++i) {
        std::vector<double> seq;
        for (std::size_t e = start; e < start + grid.K; ++e) seq.push_back(s.log.at(e, i).error_l2);
        worst = std::max(worst, std::abs(v.values[i] - oracle::brute_variance(seq)));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 60.0,
          "max|d|=" + fmt("%.3g", worst) + " (tol 1e-9), " + fmt("%.1f", secs) + " s (limit 60 s)"};
}

Outcome eva_additivity() {
  const auto windows = enumerate_windows(default_grid(200, 10));
  double worst = 0.0;
  std::size_t checked = 0;
  for (int k = 0; k < kCorpusLogs; ++k) {
    const auto s = corpus_log(k);
    std::vector<std::vector<double>> var_at(201);
    for (auto start : default_grid(200, 10).starts) var_at[start] = window_variance(s.log, start, 10).values;
    for (const auto& w : windows) {
      const auto eva = eva_score(s.log, w);
      for (std::size_t i = 0; i < eva.size(); ++i) {
        worst = std::max(worst, std::abs(eva.values[i] - (var_at[w.t_e][i] + var_at[w.t_l][i])));
      }
      ++checked;
    }
  }
  return {worst <= 1e-12, "max|d|=" + fmt("%.3g", worst) + " over " + std::to_string(checked) +
                              " window pairs (tol 1e-12)"};
}

Outcome error_score_oracle() {
  std::mt19937_64 rng(2024);
  const std::vector<std::size_t> class_counts{2, 3, 5, 10, 11, 100};
  const std::size_t per_c = 100000 / class_counts.size() + 1;
  double worst = 0.0;
  std::size_t rows = 0;
  bool forced_ok = true;
  for (std::size_t c : class_counts) {
    std::vector<std::uint16_t> labels(per_c);
    std::vector<double> probs;
    probs.reserve(per_c * c);
    for (std::size_t i = 0; i < per_c; ++i) {
      labels[i] = static_cast<std::uint16_t>(rng() % c);
      std::vector<double> row;
      if (i == 0) {
        row.assign(c, 0.0);
        row[labels[i]] = 1.0;  // perfect: S = 0
      } else if (i == 1) {
        row.assign(c, 0.0);
        row[(labels[i] + 1) % c] = 1.0;  // confidently wrong: S = sqrt(2)
      } else {
        row = testing::random_row(rng, c);
      }
      probs.insert(probs.end(), row.begin(), row.end());
    }
    DynamicsLog log(labels, static_cast<std::uint32_t>(c));
    log.push_epoch(derive_epoch<double>(probs, labels, c));
    const DynamicsLog stored = parse_log_bytes(serialize_log(log));
    for (std::size_t i = 0; i < per_c; ++i) {
      const std::vector<double> row(probs.begin() + static_cast<std::ptrdiff_t>(i * c),
                                    probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
      const double expect = oracle::brute_error(row, labels[i]);
      worst = std::max(worst, std::abs(static_cast<double>(stored.at(1, i).error_l2) - expect));
    }
    forced_ok = forced_ok && stored.at(1, 0).error_l2 == 0.0F &&
                std::abs(static_cast<double>(stored.at(1, 1).error_l2) - std::sqrt(2.0)) <= 1e-6;
    rows += per_c;
  }
  return {worst <= 1e-6 && forced_ok && rows >= 100000,
          std::to_string(rows) + " rows, max|d|=" + fmt("%.3g", worst) + " (tol 1e-6), forced 0/sqrt(2) " +
              (forced_ok ? "ok" : "WRONG")};
}

Outcome forgetting_oracle() {
  std::mt19937_64 rng(77);
  std::size_t sequences = 0;
  std::size_t mismatches = 0;
  std::size_t sentinels = 0;
  for (std::size_t t : {2U, 3U, 7U, 30U, 200U}) {
    const std::size_t n = 2000;
    std::vector<std::vector<int>> correct(n, std::vector<int>(t));
    std::vector<std::vector<EpochSampleRecord>> epochs(t, std::vector<EpochSampleRecord>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double p = i % 10 == 0 ? 0.0 : i % 10 == 1 ? 1.0 : static_cast<double>(rng() % 1000) / 1000.0;
      for (std::size_t e = 0; e < t; ++e) {
        correct[i][e] = static_cast<double>(rng() % 1000) / 1000.0 < p ? 1 : 0;
        epochs[e][i] = EpochSampleRecord{0.5F, 0.5F, 0.5F, static_cast<std::uint16_t>(correct[i][e] ? 0 : 1), 0.0F};
      }
    }
    DynamicsLog log(std::vector<std::uint16_t>(n, 0), 2);
    for (const auto& e : epochs) log.push_epoch(e);
    const auto f = forgetting_score(log);
    for (std::size_t i = 0; i < n; ++i) {
      const bool never = std::none_of(correct[i].begin(), correct[i].end(), [](int c) { return c == 1; });
      const double expect = never ? static_cast<double>(t) : oracle::brute_forgetting(correct[i]);
      sentinels += never ? 1 : 0;
      mismatches += f.values[i] == expect ? 0 : 1;
    }
    sequences += n;
  }
  return {mismatches == 0 && sequences >= 10000 && sentinels > 0,
          std::to_string(sequences) + " sequences, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(sentinels) + " sentinel cases"};
}

Outcome selection_contract() {
  const std::vector<int> percents{2, 5, 10, 20, 30, 50, 70, 90, 100};
  std::mt19937_64 rng(5);
  std::size_t failures = 0;
  std::size_t cases = 0;
  for (std::size_t n : {7U, 100U, 34561U}) {
    for (bool higher : {true, false}) {
      std::vector<double> v(n);
      for (double& x : v) x = static_cast<double>(rng() % (n / 2 + 1));  // integer scores with ties
      const ScoreVector s{Method::eva, v, higher, {}, {}};
      std::vector<double> a(v), b(v);
      for (double& x : a) x = 3.0 * x - 7.0;
      for (double& x : b) x = 0.5 * x + 100.0;
      std::vector<std::size_t> prev;
      for (int pct : percents) {
        const double alpha = pct / 100.0;
        const std::size_t expect = (static_cast<std::size_t>(pct) * n + 99) / 100;
        const auto c = select_top(s, alpha);
        bool ok = c.indices.size() == expect;
        ok = ok && std::is_sorted(c.indices.begin(), c.indices.end()) &&
             std::adjacent_find(c.indices.begin(), c.indices.end()) == c.indices.end();
        ok = ok && select_top({Method::eva, a, higher, {}, {}}, alpha).indices == c.indices;
        ok = ok && select_top({Method::eva, b, higher, {}, {}}, alpha).indices == c.indices;
        ok = ok && std::includes(c.indices.begin(), c.indices.end(), prev.begin(), prev.end());
        if (n <= 100) ok = ok && c.indices == oracle::brute_top(v, expect, higher);
        failures += ok ? 0 : 1;
        ++cases;
        prev = c.indices;
      }
    }
  }
  return {failures == 0, std::to_string(cases) + " (alpha, N, direction) cases, " + std::to_string(failures) +
                             " failures (size, affine invariance, nesting)"};
}

Outcome preset_fidelity() {
  struct Row {
    const char* dataset;
    double alpha;
    std::size_t t_e, t_l;
  };
  const std::vector<Row> table{
      {"OrganAMNIST", 0.02, 1, 190},   {"OrganAMNIST", 0.05, 1, 190},   {"OrganAMNIST", 0.10, 100, 190},
      {"OrganAMNIST", 0.20, 1, 150},   {"OrganAMNIST", 0.30, 90, 150},  {"OrganAMNIST", 0.50, 90, 150},
      {"OrganAMNIST", 0.70, 1, 190},   {"OrganAMNIST", 0.90, 90, 190},  {"OrganSMNIST", 0.02, 90, 100},
      {"OrganSMNIST", 0.05, 150, 190}, {"OrganSMNIST", 0.10, 100, 190}, {"OrganSMNIST", 0.20, 100, 190},
      {"OrganSMNIST", 0.30, 170, 190}, {"OrganSMNIST", 0.50, 150, 190}, {"OrganSMNIST", 0.70, 90, 150},
      {"OrganSMNIST", 0.90, 1, 100},   {"CIFAR-10", 0.02, 1, 100},      {"CIFAR-10", 0.05, 1, 150},
      {"CIFAR-10", 0.10, 1, 190},      {"CIFAR-10", 0.20, 1, 100},      {"CIFAR-10", 0.30, 100, 190},
      {"CIFAR-100", 0.02, 170, 190},   {"CIFAR-100", 0.05, 100, 190},   {"CIFAR-100", 0.10, 170, 190},
      {"CIFAR-100", 0.20, 100, 190},   {"CIFAR-100", 0.30, 90, 190},
  };
  std::size_t exact = 0;
  for (const auto& r : table) {
    const auto w = find_preset(r.dataset, r.alpha);
    exact += w && *w == WindowSpec{r.t_e, r.t_l, 10} ? 1 : 0;
  }
  const bool same_size = kWindowPresets.size() == table.size();
  return {exact == table.size() && same_size,
          std::to_string(exact) + "/" + std::to_string(table.size()) + " published tuples exact, " +
              std::to_string(kWindowPresets.size()) + " shipped"};
}

Outcome format_round_trip() {
  std::mt19937_64 rng(31);
  std::size_t logs = 0;
  std::size_t failures = 0;
  std::size_t truncations = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const std::size_t c = 2 + rng() % 12;
    const std::size_t t = 1 + rng() % 15;
    auto [log, raw] = testing::random_log(rng, n, c, t);
    const std::string first = serialize_log(log);
    const DynamicsLog back = parse_log_bytes(first);
    failures += (serialize_log(back) == first && back == log) ? 0 : 1;
    ++logs;

    const std::size_t epoch_bytes = 4 + n * kRecordBytes;
    const std::size_t header_bytes = first.size() - t * epoch_bytes;
    for (int cut = 0; cut < 10; ++cut) {
      const std::size_t len = rng() % first.size();
      const bool boundary = len >= header_bytes && (len - header_bytes) % epoch_bytes == 0;
      bool threw = false;
      try {
        const auto partial = parse_log_bytes(first.substr(0, len));
        failures += boundary && partial.n_epochs() == (len - header_bytes) / epoch_bytes ? 0 : 1;
      } catch (const FormatError&) {
        threw = true;
      }
      if (!boundary) {
        failures += threw ? 0 : 1;
        ++truncations;
      }
    }
  }
  return {failures == 0, std::to_string(logs) + " logs byte-identical, " + std::to_string(truncations) +
                             " truncations, " + std::to_string(failures) + " failures"};
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "eva %s: %s", args.front().c_str(), e.str().c_str());
  return code;
}

double parse_accuracy(const std::string& out) {
  if (!out.starts_with("accuracy=")) return std::nan("");
  return std::stod(out.substr(9));
}

Outcome end_to_end_smoke() {
  const auto t0 = Clock::now();
  testing::TempDir tmp;
  const auto p = [&](const std::string& name) { return (tmp / name).string(); };
  {
    std::ofstream cfg(p("smoke.ini"));
    cfg << "[train]\nepochs = 30\nbatch_size = 64\nlr = 0.05\n";
  }
  bool ok = cli({"synth-data", "--out", p("data"), "--n-train", "2000", "--n-test", "500", "--classes", "4",
                 "--height", "16", "--width", "16", "--noise", "200", "--seed", "0"}) == 0;
  double full_sum = 0.0;
  double sub_sum = 0.0;
  std::string per_seed;
  for (int seed = 0; seed < 3 && ok; ++seed) {
    const std::string s = std::to_string(seed);
    std::string full_out, sub_out;
    ok = ok && cli({"train", "--dataset", p("data"), "--log", p("run" + s + ".dynl"), "--config", p("smoke.ini"),
                    "--seed", s},
                   &full_out) == 0;
    ok = ok && cli({"score", "--method", "eva", p("run" + s + ".dynl"), "-o", p("eva" + s + ".csv"), "--early",
                    "1", "--late", "21", "--k", "10"}) == 0;
    ok = ok && cli({"select", "--rate", "0.5", p("eva" + s + ".csv"), "-o", p("idx" + s + ".txt")}) == 0;
    ok = ok && cli({"train", "--dataset", p("data"), "--subset", p("idx" + s + ".txt"), "--config", p("smoke.ini"),
                    "--seed", s},
                   &sub_out) == 0;
    const double full = parse_accuracy(full_out);
    const double sub = parse_accuracy(sub_out);
    ok = ok && std::isfinite(full) && std::isfinite(sub);
    full_sum += full;
    sub_sum += sub;
    per_seed += " s" + s + "=" + fmt("%.3f", full) + "/" + fmt("%.3f", sub);
  }
  const double full_mean = full_sum / 3.0;
  const double sub_mean = sub_sum / 3.0;
  const double gap = std::abs(full_mean - sub_mean);

  // Generator ground truth: oscillating samples must outrank constant ones.
  const auto g = gen_synthetic_log(1000, 5, 200, 7, TrajectoryProfile::mixed);
  const auto eva = eva_score(g.log, {1, 190, 10});
  std::size_t pairs = 0;
  std::size_t ordered = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (g.profiles[i] != TrajectoryProfile::oscillating) continue;
    for (std::size_t j = 0; j < 1000; ++j) {
      if (g.profiles[j] != TrajectoryProfile::constant) continue;
      ++pairs;
      ordered += eva.values[i] > eva.values[j] ? 1 : 0;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = ok && gap <= 0.05 && secs < 600.0 && pairs > 0 && ordered == pairs;
  return {pass, "full=" + fmt("%.4f", full_mean) + " subset(a=0.5)=" + fmt("%.4f", sub_mean) + " gap=" +
                    fmt("%.4f", gap) + " (tol 0.05);" + per_seed + "; oscillating>constant " +
                    std::to_string(ordered) + "/" + std::to_string(pairs) + "; " + fmt("%.0f", secs) +
                    " s (limit 600 s)"};
}

Outcome ablation_arms() {
  testing::TempDir tmp;
  const auto p = [&](const std::string& name) { return (tmp / name).string(); };
  bool ok = cli({"synth-log", "-o", p("osc.dynl"), "--n", "1000", "--classes", "5", "--epochs", "200", "--profile",
                 "oscillating", "--seed", "11"}) == 0;
  struct Arm {
    const char* name;
    std::vector<std::string> args;
  };
  const std::vector<Arm> arms{
      {"Var-S", {"--method", "var_single", "--start", "1", "--k", "10"}},
      {"Exp-S", {"--method", "exp_single", "--start", "1", "--k", "10"}},
      {"Var-D", {"--method", "eva", "--early", "1", "--late", "100", "--k", "10"}},
      {"Exp-D", {"--method", "exp_dual", "--early", "1", "--late", "100", "--k", "10"}},
      {"var_entire", {"--method", "var_entire"}},
  };
  std::vector<std::vector<double>> values;
  for (const auto& arm : arms) {
    std::vector<std::string> args{"score", p("osc.dynl"), "-o", p(std::string(arm.name) + ".csv")};
    args.insert(args.end(), arm.args.begin(), arm.args.end());
    ok = ok && cli(args) == 0;
    if (ok) values.push_back(read_scores(std::filesystem::path(p(std::string(arm.name) + ".csv"))).values);
  }
  if (!ok) return {false, "an arm failed to run"};
  double max_rho = -1.0;
  std::string worst;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t b = a + 1; b < arms.size(); ++b) {
      const double rho = oracle::spearman(values[a], values[b]);
      if (rho > max_rho) {
        max_rho = rho;
        worst = std::string(arms[a].name) + "/" + arms[b].name;
      }
    }
  }
  return {max_rho < 1.0, "5 arms ran; max pairwise Spearman=" + fmt("%.4f", max_rho) + " (" + worst + ", must be < 1)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"variance-oracle", variance_oracle},   {"eva-additivity", eva_additivity},
      {"error-score", error_score_oracle},    {"forgetting-oracle", forgetting_oracle},
      {"selection-contract", selection_contract}, {"preset-fidelity", preset_fidelity},
      {"format-round-trip", format_round_trip}, {"end-to-end-smoke", end_to_end_smoke},
      {"ablation-arms", ablation_arms},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-20s %s\n", r.pass ? "PASS" : "FAIL", name, r.detail.c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
