#include "itrbal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "itrbal/comparators.hpp"
#include "itrbal/learning.hpp"

namespace itrbal {

namespace {

const std::vector<std::string> kMethods = {
    "balance", "balance_fixed", "ipw", "importance", "overlap",
    "ebal_s", "ebal_t", "oracle_importance", "oracle_overlap", "treat_all"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

/// type-7 quantile (linear interpolation between order statistics)
double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace

std::vector<std::string> registered_methods() { return kMethods; }

bool is_registered_method(const std::string& name) {
  return std::find(kMethods.begin(), kMethods.end(), name) != kMethods.end();
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.scenarios.empty()) throw std::invalid_argument("ExperimentConfig: no scenarios");
  for (const auto& s : cfg.scenarios) validate(s);
  if (cfg.methods.empty()) throw std::invalid_argument("ExperimentConfig: no methods");
  for (const auto& m : cfg.methods) {
    if (!is_registered_method(m)) throw std::invalid_argument("ExperimentConfig: unknown method " + m);
  }
  if (cfg.replications < 1) throw std::invalid_argument("ExperimentConfig: replications must be >= 1");
  if (cfg.m_test < 1000) throw std::invalid_argument("ExperimentConfig: m_test too small");
  validate(cfg.tuning);
}

WeightSolution compute_method_weights(const std::string& method, const Dataset& d,
                                      const KernelSpec& spec, const OracleFunctions* oracle,
                                      const TuningConfig& tuning, double fixed_alpha,
                                      double fixed_lambda) {
  auto source_matrix = [&d]() {
    Matrix X(d.n_source(), d.dim());
    const auto& rows = d.source_rows();
    for (Index k = 0; k < X.rows(); ++k) X.row(k) = d.covariates().row(rows[static_cast<size_t>(k)]);
    return X;
  };

  if (method == "balance") {
    return select_alpha(d, spec, tuning).weights;
  }
  if (method == "balance_fixed") {
    return solve_balancing_weights(d, spec, BalanceHyperparams{fixed_alpha, fixed_lambda}, tuning.qp);
  }
  if (method == "ipw" || method == "importance" || method == "overlap") {
    const Matrix Xs = source_matrix();
    const Vector pi_hat = clip_probabilities(fit_propensity_model(d).predict(Xs));
    Vector rho_hat;
    if (method == "importance") {
      rho_hat = clip_probabilities(fit_participation_model(d).predict(Xs));
    }
    const ClassicalKind kind = method == "ipw" ? ClassicalKind::ipw
                               : method == "importance" ? ClassicalKind::importance
                                                        : ClassicalKind::overlap;
    return classical_weights(d, kind, pi_hat, rho_hat);
  }
  if (method == "oracle_importance" || method == "oracle_overlap") {
    if (!oracle) throw std::invalid_argument("method " + method + " needs oracle probabilities");
    const Matrix Xs = source_matrix();
    const Vector pi_true = clip_probabilities(oracle->pi_all(Xs));
    Vector rho_true;
    if (method == "oracle_importance") rho_true = clip_probabilities(oracle->rho_all(Xs));
    const ClassicalKind kind =
        method == "oracle_importance" ? ClassicalKind::importance : ClassicalKind::overlap;
    return classical_weights(d, kind, pi_true, rho_true);
  }
  if (method == "ebal_s" || method == "ebal_t") {
    return entropy_balancing(d, method == "ebal_s" ? MomentTarget::source_moments
                                                   : MomentTarget::target_moments);
  }
  throw std::invalid_argument("compute_method_weights: unsupported method " + method);
}

namespace {

struct CellContext {
  ScenarioConfig scenario;
  TargetTestSample sample;
  LinearRule optimal;
};

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ITRBAL_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string sanitize_error(std::string msg) {
  for (char& c : msg) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return msg;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const int n_cells = static_cast<int>(cfg.scenarios.size());
  const int n_methods = static_cast<int>(cfg.methods.size());

  std::vector<CellContext> cells(static_cast<size_t>(n_cells));
  for (int c = 0; c < n_cells; ++c) {
    CellContext& ctx = cells[static_cast<size_t>(c)];
    ctx.scenario = cfg.scenarios[static_cast<size_t>(c)];
    const std::uint64_t seed =
        derive_seed(cfg.master_seed, stream::test_sample, static_cast<std::uint64_t>(c));
    ctx.sample = make_target_test_sample(ctx.scenario, cfg.m_test, seed);
    ctx.optimal = optimal_linear_rule_on(ctx.sample).rule;
  }

  const int n_tasks = n_cells * cfg.replications;
  ExperimentResult result;
  result.rows.resize(static_cast<size_t>(n_tasks) * static_cast<size_t>(n_methods));

  std::atomic<int> next_task{0};
  std::atomic<int> failures{0};

  auto worker = [&]() {
    for (;;) {
      const int task = next_task.fetch_add(1);
      if (task >= n_tasks) return;
      const int c = task / cfg.replications;
      const int rep = task % cfg.replications;
      const CellContext& ctx = cells[static_cast<size_t>(c)];
      const std::uint64_t task_key =
          static_cast<std::uint64_t>(c) * 1000003ULL + static_cast<std::uint64_t>(rep);

      ScenarioConfig scen = ctx.scenario;
      scen.seed = derive_seed(cfg.master_seed, stream::replication, task_key);

      Dataset* data = nullptr;
      OracleFunctions oracle;
      KernelSpec spec;
      std::string generate_error;
      std::optional<Dataset> holder;
      try {
        auto gen = generate(scen);
        holder.emplace(std::move(gen.first));
        oracle = gen.second;
        data = &*holder;
        spec.bandwidth = median_heuristic(data->covariates());
      } catch (const std::exception& e) {
        generate_error = e.what();
      }

      for (int m = 0; m < n_methods; ++m) {
        const std::string& method = cfg.methods[static_cast<size_t>(m)];
        ResultRow row;
        row.scenario = to_string(ctx.scenario.assignment);
        row.kappa = ctx.scenario.kappa;
        row.method = method;
        row.replication = rep;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          if (!generate_error.empty()) throw std::runtime_error("generate: " + generate_error);
          LinearRule rule;
          if (method == "treat_all") {
            rule.beta0 = 1.0;
            rule.beta = Vector::Zero(data->dim());
          } else if (method == "balance") {
            TuningConfig tcfg = cfg.tuning;
            tcfg.seed = derive_seed(cfg.master_seed, stream::subsample, task_key);
            TuningResult tuned = select_alpha(*data, spec, tcfg);
            rule = tuned.rule;
            row.ess = tuned.weights.ess;
            row.alpha_selected = tuned.alpha;
            row.lambda_selected = tuned.lambda;
          } else {
            const WeightSolution ws = compute_method_weights(
                method, *data, spec, &oracle, cfg.tuning, cfg.fixed_alpha, cfg.fixed_lambda);
            rule = learn_linear_rule(ws, *data, cfg.learn_ridge);
            row.ess = ws.ess;
            if (method == "balance_fixed") {
              row.alpha_selected = cfg.fixed_alpha;
              row.lambda_selected = cfg.fixed_lambda;
            }
          }
          const RuleEvaluation ev = evaluate_rule_on(rule, ctx.optimal, ctx.sample);
          row.regret = ev.regret;
          row.accuracy = ev.accuracy;
          row.value = ev.value;
          row.value2 = ev.value2;
        } catch (const std::exception& e) {
          row.failed = true;
          row.error = sanitize_error(e.what());
          failures.fetch_add(1);
        }
        row.wall_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        result.rows[static_cast<size_t>(task) * static_cast<size_t>(n_methods) +
                    static_cast<size_t>(m)] = std::move(row);
      }
    }
  };

  const int n_workers = std::min(resolve_workers(cfg.workers), n_tasks);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  result.n_failed = failures.load();
  return result;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_results_csv: cannot open " + path);
  out << "scenario,kappa,method,replication,regret,accuracy,value,value2,ess,"
         "alpha_selected,lambda_selected,wall_time_ms,failed,error\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << fmt(r.kappa) << ',' << r.method << ',' << r.replication << ','
        << fmt(r.regret) << ',' << fmt(r.accuracy) << ',' << fmt(r.value) << ',' << fmt(r.value2)
        << ',' << fmt(r.ess) << ',' << fmt(r.alpha_selected) << ',' << fmt(r.lambda_selected)
        << ',' << fmt(r.wall_time_ms) << ',' << (r.failed ? 1 : 0) << ',' << r.error << "\n";
  }
  if (!out) throw std::runtime_error("write_results_csv: write failed for " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_results_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_results_csv: empty file");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 14) cells.emplace_back();
    ResultRow r;
    r.scenario = cells[0];
    r.kappa = std::stod(cells[1]);
    r.method = cells[2];
    r.replication = std::stoi(cells[3]);
    r.regret = std::stod(cells[4]);
    r.accuracy = std::stod(cells[5]);
    r.value = std::stod(cells[6]);
    r.value2 = std::stod(cells[7]);
    r.ess = std::stod(cells[8]);
    r.alpha_selected = std::stod(cells[9]);
    r.lambda_selected = std::stod(cells[10]);
    r.wall_time_ms = std::stod(cells[11]);
    r.failed = cells[12] == "1";
    r.error = cells[13];
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Boxplots of the benchmark results CSV (regret / accuracy per method)."""
import csv
import math
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> None:
    path = sys.argv[1] if len(sys.argv) > 1 else "results.csv"
    cells = defaultdict(lambda: defaultdict(list))  # (scenario,kappa) -> method -> values
    metrics = {"regret": 4, "accuracy": 5}
    rows = list(csv.DictReader(open(path)))
    for metric in metrics:
        cells.clear()
        for row in rows:
            if row["failed"] == "1":
                continue
            v = float(row[metric])
            if math.isnan(v):
                continue
            cells[(row["scenario"], row["kappa"])][row["method"]].append(v)
        keys = sorted(cells)
        if not keys:
            print("no rows to plot")
            return
        fig, axes = plt.subplots(1, len(keys), figsize=(5 * len(keys), 4), squeeze=False)
        for ax, key in zip(axes[0], keys):
            methods = sorted(cells[key])
            ax.boxplot([cells[key][m] for m in methods], tick_labels=methods)
            ax.set_title(f"{key[0]}, kappa={float(key[1]):g}")
            ax.set_ylabel(metric)
            ax.tick_params(axis="x", rotation=60)
        fig.tight_layout()
        out = f"{metric}_boxplot.png"
        fig.savefig(out, dpi=120)
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
)PY";

struct CellKey {
  std::string scenario;
  double kappa;
  std::string method;
  bool operator==(const CellKey& o) const {
    return scenario == o.scenario && kappa == o.kappa && method == o.method;
  }
};

}  // namespace

void emit_report(const std::vector<ResultRow>& rows, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path dir(out_dir);
  if (!fs::is_directory(dir)) throw std::runtime_error("emit_report: cannot create " + out_dir);

  if (rows.empty()) std::cerr << "emit_report: no result rows; writing header-only aggregate\n";

  // group rows by (scenario, kappa, method) in first-appearance order
  std::vector<CellKey> keys;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    const CellKey key{r.scenario, r.kappa, r.method};
    size_t gi = 0;
    for (; gi < keys.size(); ++gi)
      if (keys[gi] == key) break;
    if (gi == keys.size()) {
      keys.push_back(key);
      groups.emplace_back();
    }
    groups[gi].push_back(&r);
  }

  const std::vector<std::pair<std::string, double ResultRow::*>> metrics = {
      {"regret", &ResultRow::regret},
      {"accuracy", &ResultRow::accuracy},
      {"value", &ResultRow::value},
      {"value2", &ResultRow::value2},
      {"ess", &ResultRow::ess}};

  std::ofstream agg(dir / "aggregate.csv");
  if (!agg) throw std::runtime_error("emit_report: cannot open aggregate.csv");
  agg << "scenario,kappa,method,n_ok,n_failed";
  for (const auto& [name, ptr] : metrics) {
    agg << ',' << name << "_median," << name << "_q1," << name << "_q3";
  }
  agg << "\n";

  std::ofstream summary(dir / "summary.txt");
  if (!summary) throw std::runtime_error("emit_report: cannot open summary.txt");
  summary << "scenario            kappa method            n_ok fail  regret med [q1, q3]         accuracy med\n";

  for (size_t gi = 0; gi < keys.size(); ++gi) {
    int n_ok = 0, n_failed = 0;
    std::vector<std::vector<double>> vals(metrics.size());
    for (const ResultRow* r : groups[gi]) {
      if (r->failed) {
        ++n_failed;
        continue;
      }
      ++n_ok;
      for (size_t mi = 0; mi < metrics.size(); ++mi) {
        const double v = r->*(metrics[mi].second);
        if (!std::isnan(v)) vals[mi].push_back(v);
      }
    }
    agg << keys[gi].scenario << ',' << fmt(keys[gi].kappa) << ',' << keys[gi].method << ','
        << n_ok << ',' << n_failed;
    for (size_t mi = 0; mi < metrics.size(); ++mi) {
      agg << ',' << fmt(quantile(vals[mi], 0.5)) << ',' << fmt(quantile(vals[mi], 0.25)) << ','
          << fmt(quantile(vals[mi], 0.75));
    }
    agg << "\n";

    char line[256];
    std::snprintf(line, sizeof(line), "%-19s %-5g %-17s %4d %4d  %-10s [%s, %s]   %s\n",
                  keys[gi].scenario.c_str(), keys[gi].kappa, keys[gi].method.c_str(), n_ok,
                  n_failed, fmt_short(quantile(vals[0], 0.5)).c_str(),
                  fmt_short(quantile(vals[0], 0.25)).c_str(),
                  fmt_short(quantile(vals[0], 0.75)).c_str(),
                  fmt_short(quantile(vals[1], 0.5)).c_str());
    summary << line;
  }
  if (!agg || !summary) throw std::runtime_error("emit_report: write failed");

  std::ofstream plot(dir / "plot_results.py");
  if (!plot) throw std::runtime_error("emit_report: cannot open plot_results.py");
  plot << kPlotScript;
}

}  // namespace itrbal
