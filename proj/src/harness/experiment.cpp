#include "cmc/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cmc::harness {
namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

nlohmann::json counters_json(const control::Counters& c) {
  return {{"steps", c.steps},
          {"planner_invocations", c.planner_invocations},
          {"model_free_decisions", c.model_free_decisions},
          {"intrinsic_reward_uses", c.intrinsic_reward_uses},
          {"prediction_errors", c.prediction_errors},
          {"train_ticks", c.train_ticks},
          {"combined_updates", c.combined_updates},
          {"actor_updates", c.actor_updates},
          {"cacla_triggers", c.cacla_triggers},
          {"model_updates", c.model_updates},
          {"skipped_updates", c.skipped_updates},
          {"planner_non_finite", c.planner_non_finite}};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string seed_list(const std::vector<double>& finals) {
  std::string s;
  for (double f : finals) s += (s.empty() ? "" : ";") + num(f);
  return s;
}

}  // namespace

std::vector<double> smooth(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smoothing window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

double tail_mean(const std::vector<double>& values, std::size_t n) {
  const std::size_t k = std::min(n, values.size());
  if (k == 0) return 0.0;
  return std::accumulate(values.end() - static_cast<std::ptrdiff_t>(k), values.end(), 0.0) / static_cast<double>(k);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> returns_of(const std::vector<control::EpisodeMetrics>& rows) {
  std::vector<double> r;
  r.reserve(rows.size());
  for (const auto& m : rows) r.push_back(m.return_ext);
  return r;
}

RunSummary run_seed(const RunConfig& config, const std::filesystem::path& out_dir, const ProgressFn& progress) {
  RunSummary s;
  s.config = config;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::filesystem::path step_trace, plan_trace;
    if (config.traces && !out_dir.empty()) {
      step_trace = out_dir / ("steps_seed" + std::to_string(config.seed) + ".jsonl");
      plan_trace = out_dir / ("plans_seed" + std::to_string(config.seed) + ".jsonl");
    }
    auto controller = build_controller(config, step_trace, plan_trace);
    s.rows = controller.run(config.episodes, [&](const control::EpisodeMetrics& m) {
      if (progress) progress(config.seed, m);
    });
    s.counters = controller.counters();
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto r = returns_of(s.rows);
  s.smoothed = smooth(r);
  s.final_300_mean = tail_mean(r, 300);
  s.final_1000_mean = tail_mean(r, 1000);
  return s;
}

std::string metrics_header() {
  return "# cmc-metrics v1; smoothed_return = trailing mean over " + std::to_string(smoothing_window) +
         " episodes\n"
         "episode,return_ext,smoothed_return,success,mb_fraction,mean_e_prd,mean_lp,mean_r_int,steps,outcome\n";
}

std::string metrics_csv(const RunSummary& run) {
  std::string out = metrics_header();
  const double nan = std::nan("");
  for (std::size_t i = 0; i < run.rows.size(); ++i) {
    const auto& m = run.rows[i];
    out += std::to_string(m.episode) + ',' + num(m.return_ext) + ',' + num(run.smoothed.at(i)) + ',' +
           (m.success ? "1" : "0") + ',' + num(m.mb_fraction) + ',' + num(m.mean_e_prd.value_or(nan)) + ',' +
           num(m.mean_lp.value_or(nan)) + ',' + num(m.mean_r_int.value_or(nan)) + ',' + std::to_string(m.steps) +
           ',' + env::to_string(m.outcome) + '\n';
  }
  return out;
}

std::string aggregate_header() {
  return "# cmc-aggregate v1; mean and population std across seeds per episode\n"
         "episode,seeds,return_mean,return_std,smoothed_mean,smoothed_std,success_mean,mb_fraction_mean,"
         "mean_e_prd_mean,mean_e_prd_std\n";
}

std::string aggregate_csv(const std::vector<RunSummary>& runs) {
  std::vector<const RunSummary*> ok;
  for (const auto& r : runs)
    if (r.ok()) ok.push_back(&r);
  std::string out = aggregate_header();
  if (ok.empty()) return out;
  std::size_t episodes = ok.front()->rows.size();
  for (const auto* r : ok) episodes = std::min(episodes, r->rows.size());
  const double nan = std::nan("");
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<double> ret, sm, succ, mb, err;
    for (const auto* r : ok) {
      const auto& m = r->rows[e];
      ret.push_back(m.return_ext);
      sm.push_back(r->smoothed[e]);
      succ.push_back(m.success ? 1.0 : 0.0);
      mb.push_back(m.mb_fraction);
      err.push_back(m.mean_e_prd.value_or(nan));
    }
    out += std::to_string(e) + ',' + std::to_string(ok.size()) + ',' + num(mean_of(ret)) + ',' +
           num(population_std(ret)) + ',' + num(mean_of(sm)) + ',' + num(population_std(sm)) + ',' +
           num(mean_of(succ)) + ',' + num(mean_of(mb)) + ',' + num(mean_of(err)) + ',' +
           num(std::isnan(mean_of(err)) ? nan : population_std(err)) + '\n';
  }
  return out;
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::invalid_argument("missing column '" + name + "'");
  const std::size_t c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (c >= rows[r].size()) throw std::invalid_argument("row " + std::to_string(r) + " lacks column '" + name + "'");
    const std::string& cell = rows[r][c];
    if (cell == "nan") {
      out.push_back(std::nan(""));
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size())
      throw std::invalid_argument("column '" + name + "' row " + std::to_string(r) + ": '" + cell + "' is not a number");
    out.push_back(v);
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.columns.empty()) t.comment = line;
      continue;
    }
    if (t.columns.empty())
      t.columns = split(line, ',');
    else
      t.rows.push_back(split(line, ','));
  }
  if (t.columns.empty()) throw std::invalid_argument(path.string() + ": no header row");
  return t;
}

std::filesystem::path metrics_path(const std::filesystem::path& dir, std::uint64_t seed) {
  return dir / ("metrics_seed" + std::to_string(seed) + ".csv");
}

bool ExperimentResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunSummary& r) { return r.ok(); });
}

std::vector<double> ExperimentResult::final_means(std::size_t window) const {
  std::vector<double> f;
  for (const auto& r : runs)
    if (r.ok()) f.push_back(tail_mean(returns_of(r.rows), window));
  return f;
}

double ExperimentResult::wall_seconds() const {
  double s = 0.0;
  for (const auto& r : runs) s += r.wall_seconds;
  return s;
}

ExperimentResult run_experiment(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out_dir, std::size_t jobs, const ProgressFn& progress) {
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  base.validate();
  std::filesystem::create_directories(out_dir);
  ExperimentResult result;
  result.out_dir = out_dir;
  result.runs.resize(seeds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      RunConfig c = base;
      c.seed = seeds[i];
      RunSummary s = run_seed(c, out_dir, progress);
      const std::string tag = std::to_string(c.seed);
      write_text(out_dir / ("config_seed" + tag + ".json"), to_json(c).dump(2) + "\n");
      nlohmann::json summary{{"seed", c.seed},
                             {"episodes", s.rows.size()},
                             {"final_300_mean", s.final_300_mean},
                             {"final_1000_mean", s.final_1000_mean},
                             {"wall_seconds", s.wall_seconds},
                             {"counters", counters_json(s.counters)},
                             {"error", s.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.error)}};
      write_text(out_dir / ("summary_seed" + tag + ".json"), summary.dump(2) + "\n");
      if (s.ok()) write_text(metrics_path(out_dir, c.seed), metrics_csv(s));
      result.runs[i] = std::move(s);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, seeds.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  write_text(out_dir / "aggregate.csv", aggregate_csv(result.runs));
  return result;
}

CellResult summarize_cell(std::string label, const RunConfig& config, const ExperimentResult& result,
                          std::size_t final_window) {
  CellResult c;
  c.label = std::move(label);
  c.config = config;
  c.finals = result.final_means(final_window);
  c.ok = result.all_ok() && !c.finals.empty();
  if (!c.finals.empty()) {
    c.median_final = median(c.finals);
    c.mean_final = mean_of(c.finals);
    c.std_final = population_std(c.finals);
  }
  c.wall_seconds = result.wall_seconds();
  return c;
}

std::vector<std::string> order_cells(const std::vector<CellResult>& cells) {
  std::vector<std::size_t> idx(cells.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return cells[a].median_final > cells[b].median_final; });
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(cells[i].label);
  return out;
}

AblationReport ablation_matrix(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                               const std::filesystem::path& out_dir, std::size_t jobs, std::size_t final_window,
                               const ProgressFn& progress) {
  AblationReport report;
  report.final_window = final_window;
  for (const char* algo : {"ddpg", "cacla"})
    for (bool cmc : {false, true}) {
      RunConfig c = base;
      c.algo = algo;
      c.cmc = cmc;
      const std::string label = std::string(algo) + (cmc ? "+cmc" : "");
      const auto result = run_experiment(c, seeds, out_dir / (std::string(algo) + (cmc ? "_cmc" : "")), jobs, progress);
      report.cells.push_back(summarize_cell(label, c, result, final_window));
    }
  for (std::size_t i = 0; i + 1 < report.cells.size(); i += 2)
    report.cmc_wins[report.cells[i].config.algo] = report.cells[i + 1].median_final > report.cells[i].median_final;
  report.ordering = order_cells(report.cells);
  write_text(out_dir / "ablation.csv", ablation_csv(report));
  return report;
}

std::string ablation_csv(const AblationReport& report) {
  const auto ordering = order_cells(report.cells);
  std::string out = "# cmc-ablation v1; final = mean return over the last " + std::to_string(report.final_window) +
                    " episodes; rank by median final\n"
                    "cell,algo,cmc,seeds,median_final,mean_final,std_final,rank,cmc_beats_baseline,seed_finals\n";
  for (const auto& c : report.cells) {
    const auto rank = std::find(ordering.begin(), ordering.end(), c.label) - ordering.begin() + 1;
    const auto win = report.cmc_wins.find(c.config.algo);
    out += c.label + ',' + c.config.algo + ',' + (c.config.cmc ? "1" : "0") + ',' + std::to_string(c.finals.size()) +
           ',' + num(c.median_final) + ',' + num(c.mean_final) + ',' + num(c.std_final) + ',' +
           std::to_string(rank) + ',' + (win != report.cmc_wins.end() && win->second ? "1" : "0") + ',' +
           seed_list(c.finals) + '\n';
  }
  return out;
}

SweepReport horizon_sweep(const RunConfig& base, const std::vector<std::size_t>& horizons,
                          const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                          std::size_t jobs, std::size_t final_window, const ProgressFn& progress) {
  if (!base.cmc) throw ConfigError("cmc", "a horizon sweep needs cmc enabled");
  if (horizons.empty()) throw ConfigError("horizons", "at least one horizon is required");
  SweepReport report;
  report.horizons = horizons;
  report.final_window = final_window;
  for (std::size_t h : horizons) {
    RunConfig c = base;
    c.horizon = h;
    const auto result = run_experiment(c, seeds, out_dir / ("H" + std::to_string(h)), jobs, progress);
    report.cells.push_back(summarize_cell("H" + std::to_string(h), c, result, final_window));
  }
  write_text(out_dir / "horizon_sweep.csv", sweep_csv(report));
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = "# cmc-horizon-sweep v1; final = mean return over the last " +
                    std::to_string(report.final_window) +
                    " episodes\n"
                    "horizon,seeds,median_final,mean_final,std_final,seed_finals\n";
  for (const auto& c : report.cells)
    out += std::to_string(c.config.horizon) + ',' + std::to_string(c.finals.size()) + ',' + num(c.median_final) +
           ',' + num(c.mean_final) + ',' + num(c.std_final) + ',' + seed_list(c.finals) + '\n';
  return out;
}

std::vector<double> normalize_min_max(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  std::vector<double> out(values.size(), 0.0);
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

ModelErrorReport model_error_report(const std::vector<std::filesystem::path>& metrics_files,
                                    const std::filesystem::path& out_file) {
  if (metrics_files.empty()) throw std::invalid_argument("model error report needs at least one metrics file");
  ModelErrorReport report;
  for (const auto& f : metrics_files) {
    const auto errors = read_csv(f).numeric_column("mean_e_prd");
    if (errors.empty()) throw std::invalid_argument(f.string() + ": no episodes");
    for (double e : errors)
      if (!std::isfinite(e)) throw std::invalid_argument(f.string() + ": mean_e_prd is not logged (cmc disabled?)");
    const auto norm = normalize_min_max(errors);
    if (report.curve.empty())
      report.curve.assign(norm.size(), 0.0);
    else if (report.curve.size() != norm.size())
      throw std::invalid_argument(f.string() + ": episode count differs from the other runs");
    for (std::size_t i = 0; i < norm.size(); ++i) report.curve[i] += norm[i];
    ++report.runs;
  }
  for (double& v : report.curve) v /= static_cast<double>(report.runs);
  const std::size_t decile = std::max<std::size_t>(1, report.curve.size() / 10);
  report.first_decile =
      std::accumulate(report.curve.begin(), report.curve.begin() + static_cast<std::ptrdiff_t>(decile), 0.0) /
      static_cast<double>(decile);
  report.last_decile = tail_mean(report.curve, decile);
  if (!out_file.empty()) {
    std::string out = "# cmc-model-error v1; per-run min-max normalized mean_e_prd averaged over " +
                      std::to_string(report.runs) +
                      " runs\n"
                      "episode,normalized_error\n";
    for (std::size_t i = 0; i < report.curve.size(); ++i) out += std::to_string(i) + ',' + num(report.curve[i]) + '\n';
    write_text(out_file, out);
  }
  return report;
}

}  // namespace cmc::harness
