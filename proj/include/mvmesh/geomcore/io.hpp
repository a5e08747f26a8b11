#pragma once

#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/mesh.hpp"

#include <iosfwd>
#include <string>

namespace mvmesh {

// OBJ subset: `v x y z` and `f a b c` lines with 1-based indices, triangles
// only. Blank lines and `#` comments are skipped; other records are errors.
TriangleMesh read_obj(std::istream& in, const std::string& name = "<stream>");
void write_obj(std::ostream& out, const TriangleMesh& mesh);
TriangleMesh load_obj(const std::string& path);
void save_obj(const std::string& path, const TriangleMesh& mesh);

// Camera text file: 9 numbers of K row-major, newline, 12 numbers of the
// world-to-camera [R|t] row-major, newline, then `width height`.
CameraView read_camera(std::istream& in, const std::string& name = "<stream>");
void write_camera(std::ostream& out, const CameraView& cam);
CameraView load_camera(const std::string& path);
void save_camera(const std::string& path, const CameraView& cam);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace mvmesh
