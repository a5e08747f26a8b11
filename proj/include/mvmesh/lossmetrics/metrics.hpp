#pragma once

#include "mvmesh/geomcore/mesh.hpp"
#include "mvmesh/lossmetrics/nearest.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mvmesh {

struct EvalConfig {
  double tau = 1e-4;  // squared distance, m^2
  int pred_samples = 3000;
  int gt_samples = 3000;
  std::uint64_t seed = 2024;
  void validate() const;
};

struct FScore {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision: share of pred points with a GT point within squared distance
/// tau; recall symmetric; F = 2PR/(P+R), 0 when both are 0.
FScore fscore(const PointMatrix& pred, const PointMatrix& gt, double tau);

/// Mean squared nearest distance pred->gt plus gt->pred.
double chamfer_distance(const PointMatrix& pred, const PointMatrix& gt);

struct MeshScore {
  double f1_tau = 0.0;
  double f1_2tau = 0.0;
  double chamfer = 0.0;  // m^2
};

/// Samples both meshes and scores them. GT points may be pre-sampled.
MeshScore score_mesh(const TriangleMesh& pred, const PointMatrix& gt_points, const EvalConfig& cfg);
MeshScore score_mesh(const TriangleMesh& pred, const TriangleMesh& gt, const EvalConfig& cfg);

PointMatrix sample_points(const TriangleMesh& mesh, int count, std::uint64_t seed);

/// One report row: label, F1-tau, F1-2tau and chamfer x 1000.
struct ReportRow {
  std::string label;
  MeshScore score;
};

void write_report_table(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace mvmesh
