#pragma once

// Experiment orchestration: strict config parsing, task dispatch over seeded
// disorder ensembles, deterministic CSV/JSON persistence, and aggregation
// reports. Reruns of an identical (config, seed, version) triple produce
// byte-identical results.csv and summary.json; wall-clock metadata lives in a
// separate run_meta.json outside the determinism contract.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "specmult/operator_model.hpp"

namespace specmult {

using ojson = nlohmann::ordered_json;

// Config/schema problems exit 2; non-finite emissions and other numerical
// failures exit 3 (see tools/specmult_main.cpp).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ToleranceSet {
  double cluster_tol = 1e-8;
  double gcd_tol = 1e-8;
  double identity_tol = 1e-9;
  double measure_tol = 1e-6;
  double oracle_tol = 1e-10;
};

struct ExperimentConfig {
  std::string task;
  std::string model_name;
  ojson model_params = ojson::object();
  DisorderSpec disorder{"uniform", {0.0, 1.0}, 0};
  ojson task_params = ojson::object();
  std::uint64_t seed = 0;  // master seed, installed into the model's disorder
  int jobs = 1;
  std::string out_dir = ".";
  ToleranceSet tol;
  ojson raw;  // canonical document, hashed into the run record
};

// Strict schema: unknown fields anywhere are rejected with their path, all
// tolerance overrides must be positive. An explicit top-level "seed" wins
// over disorder.seed.
ExperimentConfig parse_config(const ojson& j);
ExperimentConfig load_config(const std::string& path);

// Builders by name (strip, shell, nested, canopy), "file" (load a model
// document) or "inline" (embedded document). Tree geometries are consumed by
// the tree-check task directly and are not instances.
ModelInstance build_model(const ExperimentConfig& cfg);

// Frozen CSV schema: sample_id,n,z_re,z_im,k,method,certified. Column use is
// task-specific (documented in the README); all numerics must be finite.
struct CsvRow {
  int sample_id = 0;
  int n = 0;
  double z_re = 0.0, z_im = 0.0;
  int k = 0;
  std::string method;
  bool certified = false;
};

struct RunRecord {
  std::string config_hash;  // FNV-1a of the canonical config document
  std::string version;
  std::string started_at, finished_at;  // ISO 8601 UTC, run_meta.json only
  std::vector<CsvRow> rows;
  ojson summary;  // schema_version-stamped task summary
  ojson detail;   // per-task detail document
  bool all_passed = false;
};

RunRecord run(const ExperimentConfig& cfg);

std::string render_csv(const std::vector<CsvRow>& rows);

// Writes results.csv, summary.json, the per-task detail file and
// run_meta.json into cfg.out_dir (created if missing).
void write_outputs(const RunRecord& rec, const ExperimentConfig& cfg);

struct ReportResult {
  ojson document;
  std::string plot_csv;  // record,task,metric,value rows
  bool any_checks = false;
};

// Aggregates previously written summaries: verdict counts, M_n constancy and
// degeneracy-vs-bound tables, tree gap statistics.
ReportResult aggregate_report(const std::vector<ojson>& summaries);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace specmult
