#include "mvmesh/lossmetrics/metrics.hpp"

#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/sampling.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace mvmesh {

void EvalConfig::validate() const {
  if (!(tau > 0.0)) throw ValidationError("eval: tau must be positive");
  if (pred_samples <= 0 || gt_samples <= 0) throw ValidationError("eval: sample counts must be positive");
}

namespace {

double share_within(const std::vector<double>& d2, double tau) {
  const auto hits = std::count_if(d2.begin(), d2.end(), [tau](double d) { return d <= tau; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(d2.size());
}

}  // namespace

FScore fscore(const PointMatrix& pred, const PointMatrix& gt, double tau) {
  if (pred.rows() == 0 || gt.rows() == 0) throw ValidationError("fscore: empty point set");
  std::vector<double> dp, dg;
  nearest_indices(pred, gt, &dp);
  nearest_indices(gt, pred, &dg);
  FScore s;
  s.precision = share_within(dp, tau);
  s.recall = share_within(dg, tau);
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double chamfer_distance(const PointMatrix& pred, const PointMatrix& gt) {
  if (pred.rows() == 0 || gt.rows() == 0) throw ValidationError("chamfer: empty point set");
  std::vector<double> dp, dg;
  nearest_indices(pred, gt, &dp);
  nearest_indices(gt, pred, &dg);
  return std::accumulate(dp.begin(), dp.end(), 0.0) / static_cast<double>(dp.size()) +
         std::accumulate(dg.begin(), dg.end(), 0.0) / static_cast<double>(dg.size());
}

PointMatrix sample_points(const TriangleMesh& mesh, int count, std::uint64_t seed) {
  const auto samples = sample_surface(mesh, count, seed);
  PointMatrix m(static_cast<Eigen::Index>(samples.size()), 3);
  for (std::size_t i = 0; i < samples.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = samples[i].position.transpose();
  return m;
}

MeshScore score_mesh(const TriangleMesh& pred, const PointMatrix& gt_points, const EvalConfig& cfg) {
  cfg.validate();
  const PointMatrix p = sample_points(pred, cfg.pred_samples, cfg.seed);
  std::vector<double> dp, dg;
  nearest_indices(p, gt_points, &dp);
  nearest_indices(gt_points, p, &dg);
  auto f1 = [&](double tau) {
    const double pr = share_within(dp, tau), rc = share_within(dg, tau);
    return pr + rc > 0.0 ? 2.0 * pr * rc / (pr + rc) : 0.0;
  };
  MeshScore s;
  s.f1_tau = f1(cfg.tau);
  s.f1_2tau = f1(2.0 * cfg.tau);
  s.chamfer = std::accumulate(dp.begin(), dp.end(), 0.0) / static_cast<double>(dp.size()) +
              std::accumulate(dg.begin(), dg.end(), 0.0) / static_cast<double>(dg.size());
  return s;
}

MeshScore score_mesh(const TriangleMesh& pred, const TriangleMesh& gt, const EvalConfig& cfg) {
  return score_mesh(pred, sample_points(gt, cfg.gt_samples, cfg.seed + 1), cfg);
}

void write_report_table(std::ostream& out, const std::vector<ReportRow>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %10s\n", static_cast<int>(width), "label", "F1-tau", "F1-2tau",
                "CDx1000");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %8.2f  %10.4f\n", static_cast<int>(width), r.label.c_str(),
                  r.score.f1_tau, r.score.f1_2tau, 1000.0 * r.score.chamfer);
    out << buf;
  }
}

}  // namespace mvmesh
