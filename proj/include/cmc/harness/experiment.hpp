#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cmc/control/meta_controller.hpp"
#include "cmc/harness/config.hpp"

namespace cmc::harness {

inline constexpr std::size_t smoothing_window = 100;
inline constexpr std::size_t default_final_window = 300;

/// Called after every finished episode; may be invoked from worker threads.
using ProgressFn = std::function<void(std::uint64_t seed, const control::EpisodeMetrics&)>;

struct RunSummary {
  RunConfig config;
  std::vector<control::EpisodeMetrics> rows;
  std::vector<double> smoothed;  // trailing mean of return_ext over `smoothing_window` episodes
  double final_300_mean = 0.0;
  double final_1000_mean = 0.0;
  double wall_seconds = 0.0;
  control::Counters counters;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

/// Trailing moving average; the first entries average over the episodes seen so far.
std::vector<double> smooth(const std::vector<double>& values, std::size_t window = smoothing_window);
/// Mean of the last min(n, size) values; 0 for an empty series.
double tail_mean(const std::vector<double>& values, std::size_t n);
double median(std::vector<double> values);
std::vector<double> returns_of(const std::vector<control::EpisodeMetrics>& rows);

/// One training run. With a non-empty `out_dir` and `config.traces`, per-step and per-plan traces
/// are written there. Failures are caught and reported in `error`.
RunSummary run_seed(const RunConfig& config, const std::filesystem::path& out_dir = {},
                    const ProgressFn& progress = {});

/// The exact two header lines (version comment and column names) of a metrics CSV.
std::string metrics_header();
std::string metrics_csv(const RunSummary& run);
std::string aggregate_header();
/// Mean and population standard deviation across the successful runs, episode by episode.
std::string aggregate_csv(const std::vector<RunSummary>& runs);

/// Parsed CSV with a leading '#' comment line: column names and rows of cell text.
struct CsvTable {
  std::string comment;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  /// Throws std::invalid_argument if the column is absent or a cell is not a number ("nan" is).
  std::vector<double> numeric_column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

std::filesystem::path metrics_path(const std::filesystem::path& dir, std::uint64_t seed);

struct ExperimentResult {
  std::filesystem::path out_dir;
  std::vector<RunSummary> runs;  // in seed-list order
  bool all_ok() const;
  std::vector<double> final_means(std::size_t window = default_final_window) const;
  double wall_seconds() const;
};

/// Runs every seed (up to `jobs` at once) and writes, per seed, metrics_seed<S>.csv,
/// config_seed<S>.json and summary_seed<S>.json, plus aggregate.csv over all seeds.
ExperimentResult run_experiment(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out_dir, std::size_t jobs = 1,
                                const ProgressFn& progress = {});

struct CellResult {
  std::string label;
  RunConfig config;
  std::vector<double> finals;  // per seed, mean return over the final window
  double median_final = 0.0;
  double mean_final = 0.0;
  double std_final = 0.0;
  double wall_seconds = 0.0;
  bool ok = true;
};

CellResult summarize_cell(std::string label, const RunConfig& config, const ExperimentResult& result,
                          std::size_t final_window);

struct AblationReport {
  std::vector<CellResult> cells;   // ddpg, ddpg+cmc, cacla, cacla+cmc
  std::map<std::string, bool> cmc_wins;  // per algorithm: CMC median above the baseline median
  std::vector<std::string> ordering;     // cell labels by decreasing median
  std::size_t final_window = default_final_window;
};

/// {ddpg, cacla} x {cmc off, on} on the base environment; writes each cell under
/// out_dir/<label>/ and the table to out_dir/ablation.csv.
AblationReport ablation_matrix(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                               const std::filesystem::path& out_dir, std::size_t jobs = 1,
                               std::size_t final_window = default_final_window, const ProgressFn& progress = {});
std::string ablation_csv(const AblationReport& report);
/// Labels ordered by decreasing median final return (ties keep input order).
std::vector<std::string> order_cells(const std::vector<CellResult>& cells);

struct SweepReport {
  std::vector<std::size_t> horizons;
  std::vector<CellResult> cells;
  std::size_t final_window = default_final_window;
};

/// One experiment per horizon under out_dir/H<h>/; table in out_dir/horizon_sweep.csv.
SweepReport horizon_sweep(const RunConfig& base, const std::vector<std::size_t>& horizons,
                          const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                          std::size_t jobs = 1, std::size_t final_window = default_final_window,
                          const ProgressFn& progress = {});
std::string sweep_csv(const SweepReport& report);

/// Min-max normalization to [0, 1]; a constant series maps to all zeros.
std::vector<double> normalize_min_max(const std::vector<double>& values);

struct ModelErrorReport {
  std::vector<double> curve;  // per episode, averaged over runs
  std::size_t runs = 0;
  double first_decile = 0.0;  // curve mean over the first 10% of episodes
  double last_decile = 0.0;   // ... and over the final 10%
};

/// Per-run min-max normalized mean_e_prd, averaged across runs. Rejects files without a usable
/// mean_e_prd column and runs of different length. Writes the curve to `out_file` if non-empty.
ModelErrorReport model_error_report(const std::vector<std::filesystem::path>& metrics_files,
                                    const std::filesystem::path& out_file = {});

}  // namespace cmc::harness
