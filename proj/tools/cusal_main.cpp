#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cusal/experiment_config.hpp"
#include "cusal/harness.hpp"
#include "cusal/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

struct Replica {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<cusal::RoundRecord> records;
  std::string error;
};

int run_command(const std::string& config_path, bool dry_run, int jobs,
                const std::string& out_override, std::uint64_t seed_offset) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return kExitConfigError;
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();

  cusal::ExperimentConfig cfg;
  try {
    cfg = cusal::parse_config(buffer.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << config_path << ": " << e.what() << "\n";
    return kExitConfigError;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  for (auto& seed : cfg.seeds) seed += seed_offset;

  if (cfg.dataset == "idx") {
    for (const std::string& path : {cfg.idx_images, cfg.idx_labels}) {
      if (!std::filesystem::exists(path)) {
        std::cerr << "error: dataset path " << path << " does not exist\n";
        return kExitConfigError;
      }
    }
  }

  if (dry_run) {
    std::cout << "config ok: " << cfg.name << " (" << cfg.strategies.size()
              << " strategies x " << cfg.seeds.size() << " seeds, T=" << cfg.rounds
              << ", k=" << cfg.batch << ")\n";
    return kExitOk;
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << cfg.out_dir << ": "
              << ec.message() << "\n";
    return kExitRuntimeError;
  }

  std::vector<Replica> replicas;
  for (const std::string& strategy : cfg.strategies)
    for (std::uint64_t seed : cfg.seeds) replicas.push_back({strategy, seed, {}, {}});

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= replicas.size()) return;
      Replica& r = replicas[i];
      try {
        r.records = cusal::run_replica(cfg, r.strategy, r.seed);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << "[" << finished << "/" << replicas.size() << "] " << r.strategy
                << " seed " << r.seed
                << (r.error.empty() ? " done" : " FAILED: " + r.error) << "\n";
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(replicas.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (const Replica& r : replicas) {
    if (!r.error.empty()) {
      std::cerr << "error: replica " << r.strategy << "/" << r.seed
                << " failed: " << r.error << "\n";
      return kExitRuntimeError;
    }
  }

  try {
    const std::filesystem::path out_dir(cfg.out_dir);
    std::string merged = cusal::csv_header();
    for (const Replica& r : replicas) {
      const std::string body = cusal::format_csv(r.strategy, r.seed, r.records,
                                                 /*with_header=*/false);
      merged += body;
      const std::string name =
          cfg.name + "_" + r.strategy + "_seed" + std::to_string(r.seed) + ".csv";
      cusal::write_text_file((out_dir / name).string(),
                             cusal::csv_header() + body);
    }
    cusal::write_text_file((out_dir / "results.csv").string(), merged);

    std::vector<cusal::StrategyRuns> runs;
    for (const std::string& strategy : cfg.strategies) {
      cusal::StrategyRuns sr;
      sr.strategy = strategy;
      for (const Replica& r : replicas)
        if (r.strategy == strategy) sr.per_seed.push_back(r.records);
      runs.push_back(std::move(sr));
    }
    const cusal::RunSummary summary = cusal::aggregate(runs);
    cusal::write_text_file((out_dir / "summary.json").string(),
                           cusal::format_summary_json(cfg, summary));
    if (cfg.emit_svg) {
      for (const char* metric : {"test_acc", "test_ece", "pool_ece"}) {
        cusal::write_text_file(
            (out_dir / ("curve_" + std::string(metric) + ".svg")).string(),
            cusal::format_curve_svg(summary, metric));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }

  std::cout << "wrote results to " << cfg.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pool-based active-learning laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute an experiment config");
  std::string config_path;
  run->add_option("config", config_path, "experiment config file")->required();
  bool dry_run = false;
  run->add_flag("--dry-run", dry_run, "validate the config and exit");
  int jobs = 1;
  run->add_option("--jobs", jobs, "parallel replica workers")->check(CLI::PositiveNumber);
  std::string out_dir;
  run->add_option("--out", out_dir, "override the output directory");
  std::uint64_t seed_offset = 0;
  run->add_option("--seed-offset", seed_offset, "added to every seed in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  return run_command(config_path, dry_run, jobs, out_dir, seed_offset);
}
