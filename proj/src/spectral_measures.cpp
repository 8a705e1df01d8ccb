#include "specmult/spectral_measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace specmult {

namespace {

// Atoms lighter than this (relative to the block rank) count as unweighted.
constexpr double kZeroWeightRel = 1e-12;

CMatrix cluster_vectors(const SpectralDecomposition& d, const std::vector<int>& cluster) {
  CMatrix v(d.eigenvectors.rows(), static_cast<Eigen::Index>(cluster.size()));
  for (std::size_t k = 0; k < cluster.size(); ++k)
    v.col(static_cast<Eigen::Index>(k)) = d.eigenvectors.col(cluster[k]);
  return v;
}

// Columns {Pi_j phi : j in atoms, phi in gens}, one atom block at a time.
CMatrix projected_columns(const SpectralDecomposition& d, const std::vector<CVector>& gens,
                          const std::vector<int>& atoms) {
  const Eigen::Index dim = d.eigenvectors.rows();
  CMatrix cols(dim, static_cast<Eigen::Index>(atoms.size() * gens.size()));
  Eigen::Index col = 0;
  for (int j : atoms) {
    const CMatrix vj = cluster_vectors(d, d.clusters[static_cast<std::size_t>(j)]);
    for (const CVector& phi : gens) cols.col(col++) = vj * (vj.adjoint() * phi);
  }
  return cols;
}

double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ModelInstance shifted_instance(const ModelInstance& model, int p, double lambda) {
  ModelInstance out = model;
  out.assembled = model.assembled + lambda * embedded_c(model, p);
  return out;
}

}  // namespace

double SpectralDecomposition::atom_energy(int j) const {
  const auto& cl = clusters[static_cast<std::size_t>(j)];
  double s = 0.0;
  for (int i : cl) s += eigenvalues(i);
  return s / static_cast<double>(cl.size());
}

CMatrix SpectralDecomposition::atom_projector(int j) const {
  const CMatrix v = cluster_vectors(*this, clusters[static_cast<std::size_t>(j)]);
  return v * v.adjoint();
}

SpectralDecomposition decompose(const ModelInstance& model, double cluster_tol) {
  require(model.is_assembled(), "decompose", "model is not assembled");
  SpectralDecomposition d;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(model.assembled);
  d.eigenvalues = es.eigenvalues();
  d.eigenvectors = es.eigenvectors();
  for (Eigen::Index k = 0; k < d.eigenvectors.cols(); ++k) fix_phase(d.eigenvectors.col(k));
  d.op_norm = d.eigenvalues.cwiseAbs().maxCoeff();
  const double radius = cluster_tol * (d.op_norm > 0.0 ? d.op_norm : 1.0);
  std::vector<int> cur{0};
  for (int i = 1; i < model.dim(); ++i) {
    if (d.eigenvalues(i) - d.eigenvalues(i - 1) <= radius) {
      cur.push_back(i);
    } else {
      d.clusters.push_back(cur);
      cur = {i};
    }
  }
  d.clusters.push_back(cur);
  return d;
}

std::vector<TraceAtom> trace_measure(const ModelInstance& model,
                                     const SpectralDecomposition& decomp, int n) {
  require(n >= 0 && n < model.block_count(), "trace_measure", "block index out of range");
  const CMatrix b = embedded_basis(model, n);
  std::vector<TraceAtom> out;
  for (int j = 0; j < decomp.atom_count(); ++j) {
    double w = 0.0;
    for (int i : decomp.clusters[static_cast<std::size_t>(j)])
      w += (b.adjoint() * decomp.eigenvectors.col(i)).squaredNorm();
    out.push_back({decomp.atom_energy(j), w});
  }
  return out;
}

MatrixMeasure matrix_weight(const ModelInstance& model, const SpectralDecomposition& decomp,
                            int n) {
  require(n >= 0 && n < model.block_count(), "matrix_weight", "block index out of range");
  const CMatrix b = embedded_basis(model, n);
  const double zero_tol = kZeroWeightRel * static_cast<double>(b.cols());
  MatrixMeasure mm;
  for (int j = 0; j < decomp.atom_count(); ++j) {
    const CMatrix vj = cluster_vectors(decomp, decomp.clusters[static_cast<std::size_t>(j)]);
    const CMatrix bv = b.adjoint() * vj;
    WeightAtom atom;
    atom.energy = decomp.atom_energy(j);
    atom.w = herm_part(bv * bv.adjoint());
    atom.trace = atom.w.trace().real();
    if (atom.trace <= zero_tol) {
      atom.skipped = true;
      ++mm.skipped_count;
    } else {
      atom.w_norm = atom.w / atom.trace;
      Eigen::SelfAdjointEigenSolver<CMatrix> es(atom.w_norm, Eigen::EigenvaluesOnly);
      atom.f = es.eigenvalues().reverse();
    }
    mm.atoms.push_back(std::move(atom));
  }
  return mm;
}

PoltoratskiiReport poltoratskii_ratio(const ModelInstance& model, int n, double e_atom,
                                      const EpsilonSchedule& sched) {
  require(!sched.eps.empty(), "poltoratskii_ratio", "empty epsilon schedule");
  const SpectralDecomposition d = decompose(model);
  const MatrixMeasure mm = matrix_weight(model, d, n);

  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mm.atoms.size(); ++j) {
    const double dist = std::abs(mm.atoms[j].energy - e_atom);
    if (!mm.atoms[j].skipped && dist < best_dist) {
      best = static_cast<int>(j);
      best_dist = dist;
    }
  }
  require(best >= 0, "poltoratskii_ratio", "no weighted atom in block " + std::to_string(n));
  const WeightAtom& target = mm.atoms[static_cast<std::size_t>(best)];

  // The ratio can only isolate the target if every other weighted atom stays
  // clear of it at the schedule floor.
  const double eps_min = sched.eps.back();
  for (std::size_t j = 0; j < mm.atoms.size(); ++j) {
    if (static_cast<int>(j) == best || mm.atoms[j].skipped) continue;
    if (std::abs(mm.atoms[j].energy - target.energy) < 10.0 * eps_min)
      throw std::runtime_error("poltoratskii_ratio: atoms unresolved at the schedule floor");
  }

  PoltoratskiiReport rep;
  rep.atom_index = best;
  rep.atom_energy = target.energy;
  for (double eps : sched.eps) {
    const GreenBlock g = green_block(model, n, n, Complex(target.energy, eps));
    const Complex tr = g.matrix.trace();
    rep.eps.push_back(eps);
    rep.deviations.push_back(op_norm(g.matrix / tr - target.w_norm));
  }
  rep.final_deviation = rep.deviations.back();
  return rep;
}

CyclicSubspace cyclic_subspace(const ModelInstance& model,
                               const std::vector<CVector>& generators, double cluster_tol) {
  require(!generators.empty(), "cyclic_subspace", "no generators");
  for (const CVector& g : generators) {
    require(g.size() == model.dim(), "cyclic_subspace", "generator dimension mismatch");
    require(g.norm() > 0.0, "cyclic_subspace", "zero generator");
  }
  const SpectralDecomposition d = decompose(model, cluster_tol);
  std::vector<int> all_atoms(static_cast<std::size_t>(d.atom_count()));
  for (int j = 0; j < d.atom_count(); ++j) all_atoms[static_cast<std::size_t>(j)] = j;

  CyclicSubspace cs;
  cs.basis = orthonormal_span(projected_columns(d, generators, all_atoms));

  const CMatrix ap = model.assembled * cs.basis;
  cs.invariance_defect = op_norm(ap - cs.basis * (cs.basis.adjoint() * ap));
  for (const CVector& g : generators) {
    const double res = (g - cs.basis * (cs.basis.adjoint() * g)).norm() / g.norm();
    cs.containment_defect = std::max(cs.containment_defect, res);
  }

  // Joint span against the sum of the per-generator cyclic subspaces.
  CMatrix acc(model.dim(), 0);
  for (const CVector& g : generators) {
    const CMatrix bi = orthonormal_span(projected_columns(d, {g}, all_atoms));
    CMatrix wider(model.dim(), acc.cols() + bi.cols());
    wider << acc, bi;
    acc = std::move(wider);
  }
  const CMatrix sum_basis = orthonormal_span(acc);
  cs.sum_split_defect =
      op_norm(cs.basis * cs.basis.adjoint() - sum_basis * sum_basis.adjoint());
  return cs;
}

CyclicProjection cyclic_projection(const ModelInstance& model, const CVector& phi,
                                   const CVector& psi, double cluster_tol) {
  require(phi.size() == model.dim() && psi.size() == model.dim(), "cyclic_projection",
          "vector dimension mismatch");
  require(phi.norm() > 0.0, "cyclic_projection", "zero base vector");
  const SpectralDecomposition d = decompose(model, cluster_tol);

  CyclicProjection cp;
  cp.projection = CVector::Zero(model.dim());
  const double floor = 1e-12 * phi.squaredNorm();
  for (int j = 0; j < d.atom_count(); ++j) {
    const CMatrix vj = cluster_vectors(d, d.clusters[static_cast<std::size_t>(j)]);
    const CVector vphi = vj.adjoint() * phi;
    const double den = vphi.squaredNorm();  // <phi, Pi_j phi>
    if (den <= floor) {
      cp.f.push_back(Complex(0.0, 0.0));
      continue;
    }
    const Complex num = vphi.dot(vj.adjoint() * psi);  // <phi, Pi_j psi>
    const Complex fj = num / den;
    cp.f.push_back(fj);
    cp.projection += fj * (vj * vphi);
  }

  const CyclicSubspace cyc = cyclic_subspace(model, {phi}, cluster_tol);
  const CVector oracle = cyc.basis * (cyc.basis.adjoint() * psi);
  cp.oracle_defect = (cp.projection - oracle).norm() / std::max(1.0, psi.norm());
  return cp;
}

std::vector<InclusionSample> singular_inclusion_check(const ModelInstance& model, int p,
                                                      const CMatrix& q_span,
                                                      const std::vector<double>& lambdas,
                                                      double tol) {
  require(p >= 0 && p < model.block_count(), "singular_inclusion_check",
          "block index out of range");
  require(q_span.rows() == model.dim() && q_span.cols() > 0, "singular_inclusion_check",
          "bad comparison subspace");
  require(!lambdas.empty(), "singular_inclusion_check", "no lambda samples");

  const CMatrix bp = embedded_basis(model, p);
  const CMatrix q = orthonormal_span(q_span);
  require(q.cols() > 0, "singular_inclusion_check", "comparison subspace is zero");
  std::vector<CVector> gens_q, gens_p;
  for (Eigen::Index i = 0; i < q.cols(); ++i) gens_q.push_back(q.col(i));
  for (Eigen::Index i = 0; i < bp.cols(); ++i) gens_p.push_back(bp.col(i));
  const double zero_tol = kZeroWeightRel * static_cast<double>(bp.cols());

  std::vector<InclusionSample> out;
  for (double lambda : lambdas) {
    const ModelInstance pert = shifted_instance(model, p, lambda);
    const SpectralDecomposition d = decompose(pert);

    std::vector<int> weighted;
    InclusionSample sample;
    sample.lambda = lambda;
    for (int j = 0; j < d.atom_count(); ++j) {
      const CMatrix vj = cluster_vectors(d, d.clusters[static_cast<std::size_t>(j)]);
      const double wp = (bp.adjoint() * vj).squaredNorm();
      if (wp > zero_tol) {
        weighted.push_back(j);
        continue;
      }
      const double wq = (q.adjoint() * vj).squaredNorm();
      if (wq > kZeroWeightRel * static_cast<double>(q.cols()))
        sample.unweighted_atoms.push_back(d.atom_energy(j));
    }

    const CMatrix u = orthonormal_span(projected_columns(d, gens_q, weighted));
    const CMatrix v = orthonormal_span(projected_columns(d, gens_p, weighted));
    sample.max_angle_sine = max_principal_angle_sine(u, v);
    sample.verdict = sample.max_angle_sine <= tol;
    out.push_back(std::move(sample));
  }
  return out;
}

AveragingReport spectral_averaging_estimate(const ModelInstance& model, int p,
                                            const CVector& phi, double center,
                                            double width0, int n_intervals,
                                            const DisorderSpec& lambda_law, int samples,
                                            std::uint64_t seed) {
  require(p >= 0 && p < model.block_count(), "spectral_averaging_estimate",
          "block index out of range");
  require(phi.size() == model.dim(), "spectral_averaging_estimate", "vector dimension mismatch");
  require(width0 > 0.0 && n_intervals >= 2 && samples >= 1, "spectral_averaging_estimate",
          "bad interval or sample parameters");
  const CMatrix bp = embedded_basis(model, p);
  require((phi - bp * (bp.adjoint() * phi)).norm() <= 1e-8 * phi.norm(),
          "spectral_averaging_estimate", "phi must lie in the block range");

  const CMatrix cp = embedded_c(model, p);
  DisorderSpec law = lambda_law;
  law.seed = seed;

  AveragingReport rep;
  for (int k = 0; k < n_intervals; ++k)
    rep.interval_sizes.push_back(width0 * std::ldexp(1.0, -k));
  std::vector<double> sums(static_cast<std::size_t>(n_intervals), 0.0);

  for (int s = 0; s < samples; ++s) {
    const double lam = sample_disorder(law, 1, static_cast<std::uint64_t>(s))(0);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(model.assembled + lam * cp);
    for (int i = 0; i < model.dim(); ++i) {
      const double off = std::abs(es.eigenvalues()(i) - center);
      const double amp = std::norm(es.eigenvectors().col(i).dot(phi));
      for (int k = 0; k < n_intervals; ++k)
        if (off <= 0.5 * rep.interval_sizes[static_cast<std::size_t>(k)])
          sums[static_cast<std::size_t>(k)] += amp;
    }
  }

  std::vector<double> lx, ly;
  for (int k = 0; k < n_intervals; ++k) {
    const double mean = sums[static_cast<std::size_t>(k)] / static_cast<double>(samples);
    rep.means.push_back(mean);
    if (mean > 0.0) {
      lx.push_back(std::log(rep.interval_sizes[static_cast<std::size_t>(k)]));
      ly.push_back(std::log(mean));
    }
  }
  if (lx.size() < 2) {
    rep.degenerate = true;
    return rep;
  }
  rep.slope = regression_slope(lx, ly);
  return rep;
}

std::vector<KernelAtomReport> kernel_inclusion_check(const ModelInstance& model, int p,
                                                     double lambda,
                                                     const EpsilonSchedule& sched) {
  require(p >= 0 && p < model.block_count(), "kernel_inclusion_check",
          "block index out of range");
  require(sched.eps.size() >= 2, "kernel_inclusion_check", "schedule too short");

  const PerturbationBlock& blk = model.blocks[static_cast<std::size_t>(p)];
  const CMatrix chat = compressed_c(model, p);
  const CMatrix bp = embedded_basis(model, p);
  const double c_norm = blk.c_eigs(0);
  const double pinv_cut = 1e-10 * c_norm;
  CMatrix cplus = CMatrix::Zero(blk.rank, blk.rank);
  for (int i = 0; i < blk.rank; ++i)
    if (blk.c_eigs(i) > pinv_cut) cplus(i, i) = 1.0 / blk.c_eigs(i);

  const ModelInstance pert = shifted_instance(model, p, lambda);
  const SpectralDecomposition d = decompose(pert);
  Eigen::SelfAdjointEigenSolver<CMatrix> base_es(model.assembled, Eigen::EigenvaluesOnly);
  const RVector base_evs = base_es.eigenvalues();

  const double eps_min = sched.eps.back();
  const double zero_tol = kZeroWeightRel * static_cast<double>(blk.rank);

  std::vector<KernelAtomReport> out;
  for (int j = 0; j < d.atom_count(); ++j) {
    KernelAtomReport rep;
    rep.energy = d.atom_energy(j);
    const CMatrix vj = cluster_vectors(d, d.clusters[static_cast<std::size_t>(j)]);
    rep.weight = (bp.adjoint() * vj).squaredNorm();

    const double dist = (base_evs.array() - rep.energy).abs().minCoeff();
    if (dist < std::max(10.0 * eps_min, 1e-8)) {
      rep.base_spectrum_clash = true;
      out.push_back(rep);
      continue;
    }
    if (rep.weight <= zero_tol) {
      rep.vacuous = true;
      rep.converged = true;
      out.push_back(rep);
      continue;
    }

    // Scaled limit eps * C G^lambda(E + i eps) C along the schedule, one
    // Richardson step per halving. Stop at the first stalled difference:
    // running to the epsilon floor only trades the O(eps^2) bias for the
    // O(u/eps) resolvent noise.
    CMatrix prev_raw, prev_extr, limit;
    for (std::size_t k = 0; k < sched.eps.size(); ++k) {
      const double eps = sched.eps[k];
      const GreenBlock g = green_block(pert, p, p, Complex(rep.energy, eps));
      const CMatrix raw = eps * (chat * g.matrix * chat);
      if (k > 0) {
        const CMatrix extr = 2.0 * raw - prev_raw;
        if (prev_extr.size() > 0 &&
            op_norm(extr - prev_extr) <= sched.stall_tol * std::max(op_norm(extr), 1e-12)) {
          rep.converged = true;
          limit = extr;
          break;
        }
        prev_extr = extr;
        limit = extr;
      }
      prev_raw = raw;
    }
    if (!rep.converged) {
      out.push_back(rep);
      continue;
    }
    rep.limit = limit;

    const CMatrix range = orthonormal_span(limit, 1e-8);
    const GreenBlock g0 = green_block(model, p, p, Complex(rep.energy, 0.0));
    // The kernel cut must be relative to the constituent scale, not to the
    // matrix's own top eigenvalue: a near-singular kernel matrix may have
    // nothing left above its residual.
    const double ker_scale = op_norm(cplus) + std::abs(lambda) * op_norm(g0.matrix);
    const CMatrix ker_mat = herm_part(cplus + lambda * g0.matrix);
    const CMatrix kernel = herm_kernel_basis(ker_mat, 1e-8, ker_scale);
    rep.angle_range_in_ker = max_principal_angle_sine(range, kernel);

    const CMatrix img = antiherm_part(g0.matrix);
    const CMatrix imker = herm_kernel_basis(img, 1e-8, op_norm(g0.matrix));
    rep.angle_ker_in_imker = max_principal_angle_sine(kernel, imker);
    out.push_back(rep);
  }
  return out;
}

}  // namespace specmult
