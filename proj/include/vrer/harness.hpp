#pragma once

#include <span>
#include <string>
#include <vector>

#include "vrer/train.hpp"

namespace vrer::harness {

// Exact run CSV schema:
//   iteration,episodes,mean_return,reuse_set_size,pg_var_trace,est_var_trace,selected_count,wall_ms
// UTF-8, '.' decimal, LF endings; doubles printed shortest-round-trip.
struct CsvRow {
  int iteration = 0;
  long episodes = 0;
  double mean_return = 0.0;
  int reuse_set_size = 1;
  double pg_var_trace = 0.0;
  double est_var_trace = 0.0;
  int selected_count = 1;
  long wall_ms = 0;

  bool operator==(const CsvRow&) const = default;
};

CsvRow to_csv_row(const train::IterationLog& log);
std::string run_csv_header();
void write_run_csv(const std::string& path, const std::vector<train::IterationLog>& logs);
std::vector<CsvRow> read_run_csv(const std::string& path);

// Trailing moving average over min(width, points seen so far); output length
// equals input length.
std::vector<double> moving_average(std::span<const double> series, int width);

struct Summary {
  double mean = 0.0;
  double standard_error = 0.0;
  double p5 = 0.0;   // nearest-rank percentiles
  double p95 = 0.0;
  int count = 0;
};

// Pooled statistics; SE = sqrt(sum (x-mu)^2) / sqrt((m-1) m).
Summary summarize_values(std::vector<double> values);

// Pools the last `window` mean_return rows of each per-seed run.
Summary summarize_runs(const std::vector<std::vector<CsvRow>>& runs, int window);

struct CurvePoint {
  int iteration = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Per-iteration cross-seed mean with a 95% band (z = 1.96). A single seed
// degenerates to ci_low == ci_high == mean.
std::vector<CurvePoint> export_curves(const std::vector<std::vector<double>>& per_seed);
void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& curve);

// Flat JSON config mirroring the TrainConfig field names. Unknown keys are
// rejected; missing keys keep their defaults.
train::TrainConfig config_from_json(const std::string& text);
std::string config_to_json(const train::TrainConfig& cfg);

struct RunManifest {
  train::TrainConfig config;
  std::vector<uint64_t> seeds;
  std::string output_dir;
  std::string created_at;
};

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

std::string seed_csv_name(uint64_t seed);

// Worker cap from VRER_THREADS, defaulting to the hardware concurrency.
int worker_threads();

// One macro-replication per seed, run concurrently up to the worker cap;
// results come back in seed order.
std::vector<train::RunResult> run_seeds(const train::TrainConfig& base,
                                        std::span<const uint64_t> seeds);

}  // namespace vrer::harness
