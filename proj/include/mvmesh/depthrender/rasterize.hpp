#pragma once

#include "mvmesh/depthrender/depth_map.hpp"
#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/mesh.hpp"

#include <vector>

namespace mvmesh {

/// Z-buffer output: depth plus the index of the winning face (-1 = none).
struct RasterBuffers {
  DepthMap depth;
  std::vector<int> face_id;
};

/// Samples each pixel at its centre. Depth is the perspective-correct
/// camera-frame z of the nearest face; edges are inclusive and both windings
/// are drawn. Faces with a vertex at z <= CameraView::kMinDepth are skipped.
/// Ties within 1e-9 m keep the smaller face index, so the output does not
/// depend on face order.
RasterBuffers rasterize(const TriangleMesh& mesh, const CameraView& cam);
DepthMap rasterize_depth(const TriangleMesh& mesh, const CameraView& cam);

/// Slow reference: one Möller–Trumbore ray per pixel centre, nearest hit.
DepthMap raycast_depth_oracle(const TriangleMesh& mesh, const CameraView& cam);

/// Camera-frame face normals facing the viewer, mapped to 0.5(n+1) per
/// channel; background 0.
Image shade_normals(const TriangleMesh& mesh, const CameraView& cam, const RasterBuffers& raster);

}  // namespace mvmesh
