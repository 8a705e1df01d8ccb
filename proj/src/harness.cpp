#include "specmult/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "specmult/greens_function.hpp"
#include "specmult/model_io.hpp"
#include "specmult/multiplicity.hpp"
#include "specmult/rng.hpp"
#include "specmult/spectral_measures.hpp"
#include "specmult/tree_simplicity.hpp"

namespace specmult {

namespace {

constexpr int kSchemaVersion = 1;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void allow_fields(const ojson& j, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(path.empty() ? "(top level)" : path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad(path.empty() ? key : path + "." + key, "unknown field");
  }
}

int req_int(const ojson& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number_integer())
    bad(path + "." + key, "required integer");
  return j[key].get<int>();
}

int opt_int(const ojson& j, const char* key, int def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) bad(std::string("task_params.") + key, "expected integer");
  return j[key].get<int>();
}

double req_num(const ojson& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number()) bad(path + "." + key, "required number");
  return j[key].get<double>();
}

double opt_num(const ojson& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) bad(std::string("task_params.") + key, "expected number");
  return j[key].get<double>();
}

bool opt_bool(const ojson& j, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) bad(std::string("task_params.") + key, "expected boolean");
  return j[key].get<bool>();
}

Complex req_z(const ojson& j, const std::string& path) {
  if (!j.contains("z") || !j["z"].is_array() || j["z"].size() != 2 ||
      !j["z"][0].is_number() || !j["z"][1].is_number())
    bad(path + ".z", "required [re, im] pair");
  return Complex(j["z"][0].get<double>(), j["z"][1].get<double>());
}

double fin(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value in " + what);
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson cmatrix_json(const CMatrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back({fin(m(i, j).real(), "matrix entry"), fin(m(i, j).imag(), "matrix entry")});
    rows.push_back(std::move(row));
  }
  return rows;
}

// Runs fn(0..count-1) on up to `jobs` threads; the first exception wins and
// is rethrown after all workers join. Callers write into index-addressed
// slots, so the reduction order never depends on scheduling.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

RVector random_tau(const RootedTree& tree, const DisorderSpec& law, std::uint64_t seed,
                   std::uint64_t index, bool symmetric) {
  RngStream rng(seed, index);
  const int b = static_cast<int>(tree.boundary.size());
  RVector tau(b);
  auto draw = [&] {
    return law.family == "gaussian" ? rng.gaussian(law.params[0], law.params[1])
                                    : rng.uniform(law.params[0], law.params[1]);
  };
  if (symmetric) {
    tau.setConstant(draw());
  } else {
    for (int i = 0; i < b; ++i) tau(i) = draw();
  }
  return tau;
}

CVector random_unit(RngStream& rng, int dim) {
  CVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  return v / v.norm();
}

struct TaskOut {
  std::vector<CsvRow> rows;
  ojson summary = ojson::object();
  ojson detail = ojson::object();
  bool all_passed = false;
};

// ---------- tasks ----------

TaskOut task_green(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"samples", "n", "m", "z"});
  const int samples = opt_int(tp, "samples", 1);
  if (samples < 1) bad("task_params.samples", "must be >= 1");
  const int n = req_int(tp, "n", "task_params");
  const int m = tp.contains("m") ? req_int(tp, "m", "task_params") : n;
  const Complex z = req_z(tp, "task_params");
  const ModelInstance base = build_model(cfg);

  TaskOut out;
  out.rows.resize(static_cast<std::size_t>(samples));
  std::vector<ojson> details(static_cast<std::size_t>(samples));
  std::vector<double> adefects(samples), hdefects(samples);
  parallel_for(samples, cfg.jobs, [&](int s) {
    const ModelInstance inst = with_disorder(base, static_cast<std::uint64_t>(s));
    const GreenBlock g = green_block(inst, n, m, z);
    const GreenBlock gc = green_block(inst, m, n, std::conj(z));
    const double scale = std::max(op_norm(g.matrix), 1e-300);
    const double adefect = op_norm(g.matrix.adjoint() - gc.matrix) / scale;
    double hdefect = 0.0;
    if (n == m && z.imag() != 0.0) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(antiherm_part(g.matrix),
                                                Eigen::EigenvaluesOnly);
      hdefect = std::max(0.0, z.imag() > 0 ? -es.eigenvalues().minCoeff() / scale
                                           : es.eigenvalues().maxCoeff() / scale);
    }
    adefects[s] = fin(adefect, "green adjoint defect");
    hdefects[s] = fin(hdefect, "green herglotz defect");
    const bool cert = adefect <= cfg.tol.identity_tol && hdefect <= cfg.tol.identity_tol;
    out.rows[s] = {s, n, z.real(), z.imag(), static_cast<int>(g.matrix.rows()), "green", cert};
    details[s] = {{"sample", s},
                  {"adjoint_defect", adefect},
                  {"herglotz_defect", hdefect},
                  {"matrix", cmatrix_json(g.matrix)}};
  });
  out.all_passed = true;
  for (const auto& r : out.rows) out.all_passed = out.all_passed && r.certified;
  out.summary = {{"samples", samples},
                 {"n", n},
                 {"m", m},
                 {"max_adjoint_defect", *std::max_element(adefects.begin(), adefects.end())},
                 {"max_herglotz_defect", *std::max_element(hdefects.begin(), hdefects.end())}};
  out.detail["samples"] = details;
  return out;
}

TaskOut task_mult(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"samples", "n", "z"});
  const int samples = opt_int(tp, "samples", 1);
  if (samples < 1) bad("task_params.samples", "must be >= 1");
  const int n = req_int(tp, "n", "task_params");
  const Complex z = req_z(tp, "task_params");
  const ModelInstance base = build_model(cfg);

  TaskOut out;
  out.rows.resize(static_cast<std::size_t>(samples));
  std::vector<ojson> details(static_cast<std::size_t>(samples));
  parallel_for(samples, cfg.jobs, [&](int s) {
    const ModelInstance inst = with_disorder(base, static_cast<std::uint64_t>(s));
    const CharPoly p = char_poly(compressed_c(inst, n), green_block(inst, n, n, z).matrix);
    const MultiplicityEstimate ec = mult_by_clustering(p, cfg.tol.cluster_tol);
    const MultiplicityEstimate eg = mult_by_gcd(p, cfg.tol.gcd_tol);
    int k;
    std::string method;
    bool cert;
    if (ec.certified && eg.certified && ec.k == eg.k) {
      k = ec.k;
      method = "agree";
      cert = true;
    } else if (z.imag() == 0.0) {
      k = mult_exact(inst, n, z.real()).k;
      method = "exact";
      cert = true;
    } else {
      k = ec.k;
      method = "uncertified";
      cert = false;
    }
    out.rows[s] = {s, n, z.real(), z.imag(), k, method, cert};
    details[s] = {{"sample", s},
                  {"k_cluster", ec.k},
                  {"certified_cluster", ec.certified},
                  {"k_gcd", eg.k},
                  {"certified_gcd", eg.certified},
                  {"k", k},
                  {"method", method}};
  });
  int agree = 0, exact = 0, unresolved = 0;
  out.all_passed = true;
  for (const auto& r : out.rows) {
    agree += r.method == "agree";
    exact += r.method == "exact";
    unresolved += r.method == "uncertified";
    out.all_passed = out.all_passed && r.certified;
  }
  out.summary = {{"samples", samples},
                 {"n", n},
                 {"agreements", agree},
                 {"adjudicated_exact", exact},
                 {"unresolved", unresolved}};
  out.detail["samples"] = details;
  return out;
}

TaskOut task_sweep(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"samples", "n_z", "blocks"});
  const int samples = opt_int(tp, "samples", 20);
  const int n_z = opt_int(tp, "n_z", 24);
  if (samples < 1 || n_z < 1) bad("task_params", "samples and n_z must be >= 1");
  const ModelInstance base = build_model(cfg);
  std::vector<int> blocks;
  if (tp.contains("blocks")) {
    if (!tp["blocks"].is_array()) bad("task_params.blocks", "expected an array");
    for (const auto& b : tp["blocks"]) {
      if (!b.is_number_integer()) bad("task_params.blocks", "expected integers");
      blocks.push_back(b.get<int>());
    }
  } else {
    for (int b = 0; b < base.block_count(); ++b) blocks.push_back(b);
  }

  TaskOut out;
  ojson block_table = ojson::array();
  ojson exceptions = ojson::array();
  int sup_m = 0;
  bool constant_all = true;
  for (int nb : blocks) {
    const MnEstimate est = estimate_M_n(base, nb, samples, n_z, cfg.seed, cfg.tol.cluster_tol);
    for (int s = 0; s < samples; ++s)
      out.rows.push_back({s, nb, 0.0, 0.0, est.per_sample[static_cast<std::size_t>(s)],
                          "sweep", est.constant});
    block_table.push_back({{"block", nb},
                           {"M", est.value},
                           {"constant", est.constant},
                           {"exceptions", est.exceptions.size()}});
    for (const auto& ex : est.exceptions)
      exceptions.push_back({{"block", nb},
                            {"sample", ex.sample},
                            {"z", {fin(ex.z.real(), "sweep z"), fin(ex.z.imag(), "sweep z")}},
                            {"k", ex.k}});
    sup_m = std::max(sup_m, est.value);
    constant_all = constant_all && est.constant;
  }

  std::vector<int> gd(static_cast<std::size_t>(samples), 0);
  parallel_for(samples, cfg.jobs, [&](int s) {
    gd[s] = global_degeneracy(with_disorder(base, static_cast<std::uint64_t>(s)),
                              cfg.tol.cluster_tol);
  });
  const int gd_max = *std::max_element(gd.begin(), gd.end());
  const bool chain_ok = gd_max <= sup_m;

  out.all_passed = constant_all && chain_ok;
  out.summary = {{"samples", samples},
                 {"n_z", n_z},
                 {"blocks", block_table},
                 {"sup_M", sup_m},
                 {"global_degeneracy_max", gd_max},
                 {"chain_ok", chain_ok},
                 {"constant_all", constant_all}};
  out.detail = {{"exceptions", exceptions}, {"global_degeneracy", gd}};
  return out;
}

TaskOut task_tree_check(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"samples", "symmetric"});
  if (cfg.model_name != "tree") bad("model.name", "tree-check requires a tree geometry");
  allow_fields(cfg.model_params, "model.params", {"branching", "depth"});
  const int branching = req_int(cfg.model_params, "branching", "model.params");
  const int depth = req_int(cfg.model_params, "depth", "model.params");
  const int samples = opt_int(tp, "samples", 100);
  if (samples < 1) bad("task_params.samples", "must be >= 1");
  const bool symmetric = opt_bool(tp, "symmetric", false);

  RootedTree tree;
  try {
    tree = build_rooted_tree(branching, depth);
  } catch (const std::invalid_argument& e) {
    bad("model.params", e.what());
  }

  TaskOut out;
  out.rows.resize(static_cast<std::size_t>(samples));
  std::vector<ojson> details(static_cast<std::size_t>(samples));
  parallel_for(samples, cfg.jobs, [&](int s) {
    const RVector tau =
        random_tau(tree, cfg.disorder, cfg.seed, static_cast<std::uint64_t>(s), symmetric);
    const SimplicityReport r = simplicity_report(tree, tau);
    out.rows[s] = {s, 0, 0.0, 0.0, r.pole_count, "tree", r.verdict};
    details[s] = {{"sample", s},
                  {"min_gap", fin(r.min_gap, "tree min_gap")},
                  {"min_root_amplitude", fin(r.min_root_amplitude, "tree amplitude")},
                  {"sibling_min_separation", fin(r.sibling_min_separation, "tree separation")},
                  {"pole_count", r.pole_count},
                  {"fh_max_residual", r.fh_max_residual},
                  {"verdict", r.verdict}};
  });

  const int expected = tree.vertex_count();
  bool as_predicted = true;
  double min_gap = std::numeric_limits<double>::infinity();
  double min_amp = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const bool ok = out.rows[s].certified && out.rows[s].k == expected;
    as_predicted = as_predicted && (symmetric ? !out.rows[s].certified : ok);
    min_gap = std::min(min_gap, details[s]["min_gap"].get<double>());
    min_amp = std::min(min_amp, details[s]["min_root_amplitude"].get<double>());
  }
  out.all_passed = as_predicted;
  out.summary = {{"samples", samples},
                 {"branching", branching},
                 {"depth", depth},
                 {"expected_poles", expected},
                 {"symmetric", symmetric},
                 {"min_gap_min", min_gap},
                 {"min_amplitude_min", min_amp}};
  out.detail["samples"] = details;
  return out;
}

TaskOut task_measure(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"sample", "n", "k_max", "top"});
  const int sample = opt_int(tp, "sample", 0);
  const int n = req_int(tp, "n", "task_params");
  const int k_max = opt_int(tp, "k_max", 20);
  const double top = opt_num(tp, "top", 1e-2);
  if (k_max < 2 || top <= 0.0) bad("task_params", "k_max >= 2 and top > 0 required");

  const ModelInstance inst =
      with_disorder(build_model(cfg), static_cast<std::uint64_t>(sample));
  const EpsilonSchedule sched = EpsilonSchedule::geometric(k_max, top);
  const SpectralDecomposition d = decompose(inst, cfg.tol.cluster_tol);
  const MatrixMeasure mm = matrix_weight(inst, d, n);

  std::vector<int> weighted;
  for (std::size_t j = 0; j < mm.atoms.size(); ++j)
    if (!mm.atoms[j].skipped) weighted.push_back(static_cast<int>(j));

  TaskOut out;
  out.rows.resize(weighted.size());
  std::vector<ojson> details(weighted.size());
  const int count = static_cast<int>(weighted.size());
  parallel_for(count, cfg.jobs, [&](int i) {
    const int j = weighted[static_cast<std::size_t>(i)];
    const WeightAtom& atom = mm.atoms[static_cast<std::size_t>(j)];
    const PoltoratskiiReport rep = poltoratskii_ratio(inst, n, atom.energy, sched);
    double dist = std::numeric_limits<double>::infinity();
    for (int o : weighted)
      if (o != j)
        dist = std::min(dist, std::abs(mm.atoms[static_cast<std::size_t>(o)].energy -
                                       atom.energy));
    // Monotone only until the numerical floor; below 2e-8 roundoff jitters.
    bool monotone = true, past = false;
    for (std::size_t k = 1; k < rep.deviations.size(); ++k) {
      if (rep.eps[k] >= dist / 10.0) continue;
      if (past && rep.deviations[k - 1] > 2e-8)
        monotone = monotone && rep.deviations[k] <= rep.deviations[k - 1] + 1e-12;
      past = true;
    }
    const bool cert = rep.final_deviation <= cfg.tol.measure_tol && monotone;
    out.rows[i] = {sample, n, fin(atom.energy, "measure atom"), 0.0,
                   static_cast<int>(d.clusters[static_cast<std::size_t>(j)].size()),
                   "measure", cert};
    details[i] = {{"atom", j},
                  {"energy", atom.energy},
                  {"final_deviation", fin(rep.final_deviation, "measure deviation")},
                  {"monotone", monotone},
                  {"eps", rep.eps},
                  {"deviations", rep.deviations}};
  });

  double max_final = 0.0;
  bool all_monotone = true;
  out.all_passed = count > 0;
  for (int i = 0; i < count; ++i) {
    max_final = std::max(max_final, details[i]["final_deviation"].get<double>());
    all_monotone = all_monotone && details[i]["monotone"].get<bool>();
    out.all_passed = out.all_passed && out.rows[i].certified;
  }
  out.summary = {{"sample", sample},
                 {"n", n},
                 {"weighted_atoms", count},
                 {"max_final_deviation", max_final},
                 {"all_monotone", all_monotone}};
  out.detail["atoms"] = details;
  return out;
}

TaskOut task_avg(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params",
               {"p", "center", "width0", "n_intervals", "samples", "basis_col"});
  const int p = req_int(tp, "p", "task_params");
  const double center = req_num(tp, "center", "task_params");
  const double width0 = opt_num(tp, "width0", 0.5);
  const int n_intervals = opt_int(tp, "n_intervals", 4);
  const int samples = opt_int(tp, "samples", 10000);
  const int basis_col = opt_int(tp, "basis_col", 0);
  if (width0 <= 0.0 || n_intervals < 2 || samples < 1)
    bad("task_params", "width0 > 0, n_intervals >= 2 and samples >= 1 required");

  // The base instance is the sample-0 draw; lambda sweeps the chosen block on
  // top of it, with a stream decoupled from the omega draws.
  const ModelInstance inst = with_disorder(build_model(cfg), 0);
  if (p < 0 || p >= inst.block_count()) bad("task_params.p", "block index out of range");
  if (basis_col < 0 || basis_col >= inst.blocks[static_cast<std::size_t>(p)].rank)
    bad("task_params.basis_col", "outside the block rank");
  const CVector phi = embedded_basis(inst, p).col(basis_col);
  const AveragingReport rep = spectral_averaging_estimate(
      inst, p, phi, center, width0, n_intervals, cfg.disorder, samples,
      splitmix64(cfg.seed ^ 0x61766721ULL));

  TaskOut out;
  const bool in_band = !rep.degenerate && rep.slope >= 0.8 && rep.slope <= 1.2;
  for (int k = 0; k < static_cast<int>(rep.interval_sizes.size()); ++k)
    out.rows.push_back({k, p, fin(rep.interval_sizes[static_cast<std::size_t>(k)], "avg size"),
                        fin(rep.means[static_cast<std::size_t>(k)], "avg mean"), n_intervals,
                        "avg", in_band});
  out.all_passed = in_band;
  out.summary = {{"p", p},
                 {"center", center},
                 {"samples", samples},
                 {"slope", rep.degenerate ? 0.0 : fin(rep.slope, "avg slope")},
                 {"degenerate", rep.degenerate},
                 {"in_band", in_band}};
  out.detail = {{"interval_sizes", rep.interval_sizes}, {"means", rep.means}};
  return out;
}

TaskOut task_verify_all(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"samples"});
  const int samples = opt_int(tp, "samples", 10);
  if (samples < 1) bad("task_params.samples", "must be >= 1");
  const ModelInstance base = build_model(cfg);
  const int nblocks = base.block_count();

  static const char* kSuites[] = {"partition", "identities", "herglotz",
                                  "mult-agree", "measure-sum", "cyclic"};
  constexpr int kNumSuites = 6;

  TaskOut out;
  out.rows.resize(static_cast<std::size_t>(samples) * kNumSuites);
  std::vector<ojson> details(static_cast<std::size_t>(samples));
  parallel_for(samples, cfg.jobs, [&](int s) {
    const ModelInstance inst = with_disorder(base, static_cast<std::uint64_t>(s));
    const int p = s % nblocks;
    const double lambda = 0.3 + 0.05 * (s % 5);
    const Complex z(0.4 + 0.01 * s, 0.8);
    bool pass[kNumSuites];

    const PartitionReport part = verify_partition(inst);
    pass[0] = part.ok;

    const RankUpdateReport ru = rank_update_check(inst, p, lambda, z);
    pass[1] = fin(ru.max(), "identity residual") <= cfg.tol.identity_tol;

    const GreenBlock g = green_block(inst, p, p, z);
    const GreenBlock gc = green_block(inst, p, p, std::conj(z));
    const double scale = std::max(op_norm(g.matrix), 1e-300);
    const double adefect = op_norm(g.matrix.adjoint() - gc.matrix) / scale;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(antiherm_part(g.matrix), Eigen::EigenvaluesOnly);
    const double hdefect = std::max(0.0, -es.eigenvalues().minCoeff() / scale);
    pass[2] = adefect <= cfg.tol.identity_tol && hdefect <= cfg.tol.identity_tol;

    const CharPoly cp = char_poly(compressed_c(inst, p), g.matrix);
    const MultiplicityEstimate ec = mult_by_clustering(cp, cfg.tol.cluster_tol);
    const MultiplicityEstimate eg = mult_by_gcd(cp, cfg.tol.gcd_tol);
    pass[3] = !(ec.certified && eg.certified) || ec.k == eg.k;

    const SpectralDecomposition d = decompose(inst, cfg.tol.cluster_tol);
    double worst_sum = 0.0;
    for (int nb = 0; nb < nblocks; ++nb) {
      double total = 0.0;
      for (const auto& atom : trace_measure(inst, d, nb)) total += atom.weight;
      worst_sum = std::max(worst_sum, std::abs(total - inst.blocks[nb].rank));
    }
    const MatrixMeasure mm = matrix_weight(inst, d, p);
    CMatrix wsum = CMatrix::Zero(inst.blocks[p].rank, inst.blocks[p].rank);
    for (const auto& atom : mm.atoms) wsum += atom.w;
    const double wdefect =
        op_norm(wsum - CMatrix::Identity(inst.blocks[p].rank, inst.blocks[p].rank));
    pass[4] = worst_sum <= 1e-10 && wdefect <= 1e-10;

    RngStream rng(splitmix64(cfg.seed ^ 0x76657221ULL), static_cast<std::uint64_t>(s));
    const CVector phi = random_unit(rng, inst.dim());
    const CVector psi = random_unit(rng, inst.dim());
    const CyclicProjection proj = cyclic_projection(inst, phi, psi, cfg.tol.cluster_tol);
    const CyclicSubspace cs = cyclic_subspace(inst, {phi, psi}, cfg.tol.cluster_tol);
    pass[5] = proj.oracle_defect <= cfg.tol.oracle_tol &&
              cs.sum_split_defect <= cfg.tol.oracle_tol &&
              cs.invariance_defect <= cfg.tol.oracle_tol;

    for (int q = 0; q < kNumSuites; ++q)
      out.rows[static_cast<std::size_t>(s) * kNumSuites + q] = {s,       p, 0.0, 0.0, q,
                                                                kSuites[q], pass[q]};
    details[s] = {{"sample", s},
                  {"partition_defect", fin(part.defect, "partition defect")},
                  {"identity_residual", ru.max()},
                  {"adjoint_defect", adefect},
                  {"herglotz_defect", hdefect},
                  {"trace_sum_defect", worst_sum},
                  {"weight_sum_defect", wdefect},
                  {"cyclic_oracle_defect", proj.oracle_defect},
                  {"cyclic_split_defect", cs.sum_split_defect}};
  });

  ojson suite_table = ojson::object();
  out.all_passed = true;
  for (int q = 0; q < kNumSuites; ++q) {
    int passed = 0;
    for (int s = 0; s < samples; ++s)
      passed += out.rows[static_cast<std::size_t>(s) * kNumSuites + q].certified;
    suite_table[kSuites[q]] = {{"passed", passed}, {"total", samples}};
    out.all_passed = out.all_passed && passed == samples;
  }
  out.summary = {{"samples", samples}, {"suites", suite_table}};
  out.detail["samples"] = details;
  return out;
}

TaskOut task_report(const ExperimentConfig& cfg) {
  const ojson& tp = cfg.task_params;
  allow_fields(tp, "task_params", {"records"});
  if (!tp.contains("records") || !tp["records"].is_array() || tp["records"].empty())
    bad("task_params.records", "required nonempty array of summary paths");

  std::vector<ojson> summaries;
  for (std::size_t i = 0; i < tp["records"].size(); ++i) {
    const ojson& r = tp["records"][i];
    if (!r.is_string()) bad("task_params.records", "expected strings");
    std::ifstream in(r.get<std::string>());
    if (!in) bad("task_params.records[" + std::to_string(i) + "]",
                 "cannot open " + r.get<std::string>());
    try {
      summaries.push_back(ojson::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      bad("task_params.records[" + std::to_string(i) + "]", e.what());
    }
  }

  const ReportResult rr = aggregate_report(summaries);
  TaskOut out;
  bool records_passed = true;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const bool ok = summaries[i].value("all_passed", false);
    records_passed = records_passed && ok;
    out.rows.push_back({static_cast<int>(i), 0, 0.0, 0.0,
                        summaries[i].contains("all_passed") ? 1 : 0, "report", ok});
  }
  out.all_passed = rr.any_checks && records_passed;
  out.summary = rr.document;
  out.detail = {{"csv", rr.plot_csv}};
  return out;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ExperimentConfig parse_config(const ojson& j) {
  allow_fields(j, "",
               {"task", "model", "disorder", "task_params", "seed", "jobs", "out_dir",
                "tolerances"});
  ExperimentConfig cfg;
  cfg.raw = j;

  if (!j.contains("task") || !j["task"].is_string()) bad("task", "required string");
  cfg.task = j["task"].get<std::string>();
  static const std::set<std::string> kTasks = {"green",   "mult", "sweep",      "tree-check",
                                              "measure", "avg",  "verify-all", "report"};
  if (!kTasks.count(cfg.task)) bad("task", "unknown task '" + cfg.task + "'");

  if (j.contains("model")) {
    allow_fields(j["model"], "model", {"name", "params"});
    if (!j["model"].contains("name") || !j["model"]["name"].is_string())
      bad("model.name", "required string");
    cfg.model_name = j["model"]["name"].get<std::string>();
    if (j["model"].contains("params")) {
      if (!j["model"]["params"].is_object()) bad("model.params", "expected an object");
      cfg.model_params = j["model"]["params"];
    }
  } else if (cfg.task != "report") {
    bad("model", "required for task '" + cfg.task + "'");
  }

  if (j.contains("disorder")) {
    const ojson& dis = j["disorder"];
    allow_fields(dis, "disorder", {"family", "params", "seed"});
    if (!dis.contains("family") || !dis["family"].is_string())
      bad("disorder.family", "required string");
    cfg.disorder.family = dis["family"].get<std::string>();
    if (cfg.disorder.family != "uniform" && cfg.disorder.family != "gaussian")
      bad("disorder.family", "expected uniform or gaussian");
    if (!dis.contains("params") || !dis["params"].is_array() || dis["params"].size() != 2 ||
        !dis["params"][0].is_number() || !dis["params"][1].is_number())
      bad("disorder.params", "required pair of numbers");
    cfg.disorder.params = {dis["params"][0].get<double>(), dis["params"][1].get<double>()};
    if (dis.contains("seed")) {
      if (!dis["seed"].is_number_integer() || dis["seed"].get<std::int64_t>() < 0)
        bad("disorder.seed", "expected a nonnegative integer");
      cfg.disorder.seed = dis["seed"].get<std::uint64_t>();
      cfg.seed = cfg.disorder.seed;
    }
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0)
      bad("seed", "expected a nonnegative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("jobs")) {
    if (!j["jobs"].is_number_integer() || j["jobs"].get<int>() < 1)
      bad("jobs", "expected an integer >= 1");
    cfg.jobs = j["jobs"].get<int>();
  }
  if (j.contains("out_dir")) {
    if (!j["out_dir"].is_string()) bad("out_dir", "expected a string");
    cfg.out_dir = j["out_dir"].get<std::string>();
  }
  if (j.contains("tolerances")) {
    const ojson& tol = j["tolerances"];
    allow_fields(tol, "tolerances",
                 {"cluster_tol", "gcd_tol", "identity_tol", "measure_tol", "oracle_tol"});
    auto get_tol = [&](const char* key, double& slot) {
      if (!tol.contains(key)) return;
      if (!tol[key].is_number() || tol[key].get<double>() <= 0.0)
        bad(std::string("tolerances.") + key, "must be a positive number");
      slot = tol[key].get<double>();
    };
    get_tol("cluster_tol", cfg.tol.cluster_tol);
    get_tol("gcd_tol", cfg.tol.gcd_tol);
    get_tol("identity_tol", cfg.tol.identity_tol);
    get_tol("measure_tol", cfg.tol.measure_tol);
    get_tol("oracle_tol", cfg.tol.oracle_tol);
  }
  if (j.contains("task_params")) {
    if (!j["task_params"].is_object()) bad("task_params", "expected an object");
    cfg.task_params = j["task_params"];
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

ModelInstance build_model(const ExperimentConfig& cfg) {
  const ojson& p = cfg.model_params;
  ModelInstance m;
  try {
    if (cfg.model_name == "strip") {
      allow_fields(p, "model.params", {"length", "fibers", "vertical_hopping"});
      bool vert = p.contains("vertical_hopping") && p["vertical_hopping"].is_boolean() &&
                  p["vertical_hopping"].get<bool>();
      m = build_strip(req_int(p, "length", "model.params"),
                      req_int(p, "fibers", "model.params"), vert);
    } else if (cfg.model_name == "shell") {
      allow_fields(p, "model.params", {"d", "radius"});
      m = build_shell_model(req_int(p, "d", "model.params"),
                            req_int(p, "radius", "model.params"));
    } else if (cfg.model_name == "nested") {
      allow_fields(p, "model.params", {"levels"});
      m = build_nested_model(req_int(p, "levels", "model.params"));
    } else if (cfg.model_name == "canopy") {
      allow_fields(p, "model.params", {"branching", "depth", "block_depth"});
      m = build_canopy_bethe(req_int(p, "branching", "model.params"),
                             req_int(p, "depth", "model.params"),
                             req_int(p, "block_depth", "model.params"));
    } else if (cfg.model_name == "file") {
      allow_fields(p, "model.params", {"path"});
      if (!p.contains("path") || !p["path"].is_string())
        bad("model.params.path", "required string");
      m = load_model(p["path"].get<std::string>());
    } else if (cfg.model_name == "inline") {
      allow_fields(p, "model.params", {"model"});
      if (!p.contains("model")) bad("model.params.model", "required document");
      m = model_from_json(p["model"]);
    } else if (cfg.model_name == "tree") {
      bad("model.name", "tree geometries are consumed by tree-check directly");
    } else {
      bad("model.name", "unknown builder '" + cfg.model_name + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: model: ") + e.what());
  }
  if (cfg.raw.contains("disorder")) m.disorder = cfg.disorder;
  m.disorder.seed = cfg.seed;
  return m;
}

RunRecord run(const ExperimentConfig& cfg) {
  RunRecord rec;
  rec.started_at = iso_now();
  {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.raw.dump())));
    rec.config_hash = buf;
  }
  rec.version = SPECMULT_VERSION;

  TaskOut t;
  if (cfg.task == "green") {
    t = task_green(cfg);
  } else if (cfg.task == "mult") {
    t = task_mult(cfg);
  } else if (cfg.task == "sweep") {
    t = task_sweep(cfg);
  } else if (cfg.task == "tree-check") {
    t = task_tree_check(cfg);
  } else if (cfg.task == "measure") {
    t = task_measure(cfg);
  } else if (cfg.task == "avg") {
    t = task_avg(cfg);
  } else if (cfg.task == "verify-all") {
    t = task_verify_all(cfg);
  } else {
    t = task_report(cfg);
  }

  rec.rows = std::move(t.rows);
  rec.all_passed = t.all_passed;
  rec.summary = ojson{{"schema_version", kSchemaVersion},
                      {"version", rec.version},
                      {"config_hash", rec.config_hash},
                      {"task", cfg.task},
                      {"model", cfg.model_name},
                      {"all_passed", rec.all_passed}};
  for (const auto& [key, value] : t.summary.items()) rec.summary[key] = value;
  rec.detail = std::move(t.detail);
  rec.finished_at = iso_now();
  return rec;
}

std::string render_csv(const std::vector<CsvRow>& rows) {
  std::string out = "sample_id,n,z_re,z_im,k,method,certified\n";
  for (const auto& r : rows) {
    fin(r.z_re, "csv z_re");
    fin(r.z_im, "csv z_im");
    out += std::to_string(r.sample_id) + "," + std::to_string(r.n) + "," +
           fmt_double(r.z_re) + "," + fmt_double(r.z_im) + "," + std::to_string(r.k) + "," +
           r.method + "," + (r.certified ? "1" : "0") + "\n";
  }
  return out;
}

void write_outputs(const RunRecord& rec, const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto write_file = [&](const std::string& name, const std::string& content) {
    const std::string path = cfg.out_dir + "/" + name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_outputs: cannot open " + path);
    out << content;
  };
  write_file("results.csv", render_csv(rec.rows));
  write_file("summary.json", rec.summary.dump(2) + "\n");
  if (cfg.task == "report") {
    write_file("report.csv", rec.detail.value("csv", std::string{}));
  } else {
    std::string name = "detail_" + cfg.task + ".json";
    std::replace(name.begin(), name.end(), '-', '_');
    write_file(name, rec.detail.dump(2) + "\n");
  }
  ojson meta = {{"version", rec.version},
                {"config_hash", rec.config_hash},
                {"started_at", rec.started_at},
                {"finished_at", rec.finished_at}};
  write_file("run_meta.json", meta.dump(2) + "\n");
}

ReportResult aggregate_report(const std::vector<ojson>& summaries) {
  ReportResult rr;
  int passed = 0, failed = 0;
  ojson tasks = ojson::object();
  ojson sweep_table = ojson::array();
  ojson tree_table = ojson::array();
  std::string csv = "record,task,metric,value\n";

  auto add_metric = [&](std::size_t i, const std::string& task, const char* metric,
                        double value) {
    csv += std::to_string(i) + "," + task + "," + metric + "," + fmt_double(value) + "\n";
  };

  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const ojson& s = summaries[i];
    const std::string task = s.value("task", std::string("unknown"));
    tasks[task] = tasks.value(task, 0) + 1;
    if (s.contains("all_passed")) {
      rr.any_checks = true;
      (s["all_passed"].get<bool>() ? passed : failed) += 1;
    }
    if (task == "sweep") {
      sweep_table.push_back({{"record", i},
                             {"model", s.value("model", std::string{})},
                             {"sup_M", s.value("sup_M", 0)},
                             {"global_degeneracy_max", s.value("global_degeneracy_max", 0)},
                             {"chain_ok", s.value("chain_ok", false)},
                             {"constant_all", s.value("constant_all", false)}});
      add_metric(i, task, "sup_M", s.value("sup_M", 0));
      add_metric(i, task, "global_degeneracy_max", s.value("global_degeneracy_max", 0));
    } else if (task == "tree-check") {
      tree_table.push_back({{"record", i},
                            {"samples", s.value("samples", 0)},
                            {"expected_poles", s.value("expected_poles", 0)},
                            {"min_gap_min", s.value("min_gap_min", 0.0)},
                            {"min_amplitude_min", s.value("min_amplitude_min", 0.0)}});
      add_metric(i, task, "min_gap_min", s.value("min_gap_min", 0.0));
      add_metric(i, task, "min_amplitude_min", s.value("min_amplitude_min", 0.0));
    } else if (task == "avg") {
      add_metric(i, task, "slope", s.value("slope", 0.0));
    } else if (task == "measure") {
      add_metric(i, task, "max_final_deviation", s.value("max_final_deviation", 0.0));
    } else if (task == "green") {
      add_metric(i, task, "max_adjoint_defect", s.value("max_adjoint_defect", 0.0));
    }
  }

  rr.document = {{"schema_version", kSchemaVersion},
                 {"records", summaries.size()},
                 {"tasks", tasks},
                 {"verdicts", {{"passed", passed}, {"failed", failed}}},
                 {"sweep_table", sweep_table},
                 {"tree_table", tree_table}};
  if (!rr.any_checks) rr.document["no_checks"] = "no checks executed";
  rr.plot_csv = std::move(csv);
  return rr;
}

}  // namespace specmult
