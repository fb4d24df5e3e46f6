#include <malloc.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <regex>

#include "CLI11.hpp"
#include "json.hpp"

#include "cmc/harness/config.hpp"
#include "cmc/harness/experiment.hpp"

namespace {

using cmc::harness::ConfigError;
using cmc::harness::RunConfig;

/// Options shared by the training subcommands.
struct TrainingArgs {
  std::string config_file;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "runs";
  std::size_t jobs = 1;
  std::size_t final_window = cmc::harness::default_final_window;
  bool quiet = false;
  std::map<std::string, std::string> flags;
};

void add_training_options(CLI::App* app, TrainingArgs& args) {
  app->add_option("--config", args.config_file, "Flat JSON config file");
  app->add_option("--seeds", args.seeds, "Comma-separated seed list")->delimiter(',');
  app->add_option("--out-dir", args.out_dir, "Output directory")->capture_default_str();
  app->add_option("--jobs", args.jobs, "Seeds run concurrently")->capture_default_str();
  app->add_option("--final-window", args.final_window, "Episodes averaged for the final return")
      ->capture_default_str();
  app->add_flag("--quiet", args.quiet, "No progress lines on stderr");
  const nlohmann::json defaults = cmc::harness::to_json(RunConfig{});
  for (const auto& key : cmc::harness::config_keys()) {
    app->add_option_function<std::string>(
           "--" + key, [&args, key](const std::string& v) { args.flags[key] = v; }, "default " + defaults.at(key).dump())
        ->type_name("VALUE");
  }
}

RunConfig resolve(const TrainingArgs& args) {
  std::optional<nlohmann::json> file;
  if (!args.config_file.empty()) {
    std::ifstream in(args.config_file);
    if (!in) throw ConfigError("config", "cannot read " + args.config_file);
    try {
      file = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
  }
  return cmc::harness::parse_config(file, args.flags);
}

std::vector<std::uint64_t> seeds_of(const TrainingArgs& args, const RunConfig& cfg) {
  if (!args.seeds.empty() && args.flags.count("seed")) throw ConfigError("seeds", "conflicts with --seed");
  return args.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : args.seeds;
}

cmc::harness::ProgressFn progress(const TrainingArgs& args) {
  if (args.quiet) return {};
  static std::mutex mu;
  return [](std::uint64_t seed, const cmc::control::EpisodeMetrics& m) {
    if ((m.episode + 1) % 100) return;
    const std::lock_guard<std::mutex> lock(mu);
    std::cerr << "seed " << seed << " episode " << m.episode + 1 << " return " << m.return_ext << " mb "
              << m.mb_fraction << '\n';
  };
}

nlohmann::json cell_json(const cmc::harness::CellResult& c) {
  return {{"cell", c.label},       {"median_final", c.median_final}, {"mean_final", c.mean_final},
          {"std_final", c.std_final}, {"seed_finals", c.finals},     {"wall_seconds", c.wall_seconds},
          {"ok", c.ok}};
}

int fail(const std::string& kind, const std::string& message, const std::string& key = {}) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  if (!key.empty()) err["key"] = key;
  std::cerr << err.dump() << '\n';
  return kind == "run_failed" ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large freed blocks on the heap; per-step network buffers would otherwise be remapped.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);

  CLI::App app{"Curiosity-gated hybrid model-based / model-free RL on pixel control tasks"};
  app.require_subcommand(1);

  TrainingArgs run_args, ablate_args, sweep_args;
  auto* run = app.add_subcommand("run", "Train one configuration over one or more seeds");
  add_training_options(run, run_args);
  auto* ablate = app.add_subcommand("ablate", "{ddpg, cacla} x {cmc off, on} on the configured task");
  add_training_options(ablate, ablate_args);
  auto* sweep = app.add_subcommand("sweep-horizon", "One CMC experiment per planning horizon");
  add_training_options(sweep, sweep_args);
  std::vector<std::size_t> horizons{1, 3};
  sweep->add_option("--horizons", horizons, "Comma-separated horizons")->delimiter(',')->capture_default_str();

  auto* report = app.add_subcommand("report", "Normalized model-error curve from metrics CSVs");
  std::vector<std::string> inputs;
  std::string report_out;
  report->add_option("inputs", inputs, "Metrics CSVs or run directories")->required();
  report->add_option("--out", report_out, "Output CSV (default: model_error.csv next to the first input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*run) {
      const RunConfig cfg = resolve(run_args);
      const auto seeds = seeds_of(run_args, cfg);
      const auto result = cmc::harness::run_experiment(cfg, seeds, run_args.out_dir, run_args.jobs, progress(run_args));
      nlohmann::json out{{"out_dir", run_args.out_dir}, {"runs", nlohmann::json::array()}};
      for (const auto& r : result.runs)
        out["runs"].push_back({{"seed", r.config.seed},
                               {"final_300_mean", r.final_300_mean},
                               {"final_1000_mean", r.final_1000_mean},
                               {"wall_seconds", r.wall_seconds},
                               {"error", r.ok() ? nlohmann::json(nullptr) : nlohmann::json(r.error)}});
      std::cout << out.dump(2) << '\n';
      return result.all_ok() ? 0 : fail("run_failed", "at least one seed failed; see summary_seed*.json");
    }
    if (*ablate) {
      const RunConfig cfg = resolve(ablate_args);
      const auto seeds = seeds_of(ablate_args, cfg);
      const auto rep = cmc::harness::ablation_matrix(cfg, seeds, ablate_args.out_dir, ablate_args.jobs,
                                                     ablate_args.final_window, progress(ablate_args));
      nlohmann::json out{{"out_dir", ablate_args.out_dir}, {"cmc_wins", rep.cmc_wins}, {"ordering", rep.ordering}};
      bool ok = true;
      for (const auto& c : rep.cells) {
        out["cells"].push_back(cell_json(c));
        ok = ok && c.ok;
      }
      std::cout << out.dump(2) << '\n';
      return ok ? 0 : fail("run_failed", "at least one cell had a failed seed");
    }
    if (*sweep) {
      const RunConfig cfg = resolve(sweep_args);
      const auto seeds = seeds_of(sweep_args, cfg);
      const auto rep = cmc::harness::horizon_sweep(cfg, horizons, seeds, sweep_args.out_dir, sweep_args.jobs,
                                                   sweep_args.final_window, progress(sweep_args));
      nlohmann::json out{{"out_dir", sweep_args.out_dir}};
      bool ok = true;
      for (const auto& c : rep.cells) {
        out["cells"].push_back(cell_json(c));
        ok = ok && c.ok;
      }
      std::cout << out.dump(2) << '\n';
      return ok ? 0 : fail("run_failed", "at least one horizon had a failed seed");
    }
    if (*report) {
      std::vector<std::filesystem::path> files;
      const std::regex metrics_name(R"(metrics_seed\d+\.csv)");
      for (const auto& in : inputs) {
        if (std::filesystem::is_directory(in)) {
          std::vector<std::filesystem::path> found;
          for (const auto& e : std::filesystem::directory_iterator(in))
            if (std::regex_match(e.path().filename().string(), metrics_name)) found.push_back(e.path());
          std::sort(found.begin(), found.end());
          files.insert(files.end(), found.begin(), found.end());
        } else {
          files.emplace_back(in);
        }
      }
      if (files.empty()) return fail("usage", "no metrics CSVs found");
      std::filesystem::path out_file = report_out;
      if (out_file.empty())
        out_file = (std::filesystem::is_directory(inputs.front()) ? std::filesystem::path(inputs.front())
                                                                   : files.front().parent_path()) /
                   "model_error.csv";
      const auto rep = cmc::harness::model_error_report(files, out_file);
      std::cout << nlohmann::json{{"out", out_file.string()},
                                  {"runs", rep.runs},
                                  {"first_decile", rep.first_decile},
                                  {"last_decile", rep.last_decile},
                                  {"drop", rep.first_decile - rep.last_decile}}
                       .dump(2)
                << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.key());
  } catch (const std::exception& e) {
    return fail("failure", e.what());
  }
  return 0;
}
