#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "femma/errors.hpp"

namespace femma::fem {

using Vec3 = std::array<double, 3>;

enum class BoundaryTag { Surface, Bottom, Absorbing };

inline const char* tag_name(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::Surface: return "surface";
    case BoundaryTag::Bottom: return "bottom";
    case BoundaryTag::Absorbing: return "absorbing";
  }
  return "?";
}

// Local faces: 0 = x-, 1 = x+, 2 = y-, 3 = y+, 4 = z- (bottom), 5 = z+ (top).
struct BoundaryFace {
  int element = 0;
  int local_face = 0;
  BoundaryTag tag = BoundaryTag::Absorbing;

  int normal_axis() const { return local_face / 2; }
  bool upper() const { return local_face % 2 == 1; }
};

// Hexahedral mesh. Element corners are ordered lexicographically,
// corner c = i + 2 j + 4 k with i, j, k in {0, 1}.
struct Mesh {
  int nx = 0, ny = 0, nz = 0;
  Vec3 extent{1.0, 1.0, 1.0};
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 8>> elements;
  std::vector<BoundaryFace> boundary;

  int num_elements() const { return static_cast<int>(elements.size()); }
  int num_vertices() const { return static_cast<int>(vertices.size()); }
  double volume() const { return extent[0] * extent[1] * extent[2]; }

  std::array<Vec3, 8> element_coords(int e) const {
    std::array<Vec3, 8> x{};
    for (int c = 0; c < 8; ++c) x[c] = vertices[elements[e][c]];
    return x;
  }

  std::array<int, 3> element_index(int e) const { return {e % nx, (e / nx) % ny, e / (nx * ny)}; }
};

// Axis-aligned structured mesh of [0, Lx] x [0, Ly] x [0, Lz]; the top face
// is the sea surface, the bottom face the sea floor, the sides absorbing.
inline Mesh build_mesh(int nx, int ny, int nz, Vec3 extent = {1.0, 1.0, 1.0}) {
  if (nx < 1 || ny < 1 || nz < 1)
    throw GeometryError("build_mesh: element counts must be >= 1, got " + std::to_string(nx) + "x" +
                        std::to_string(ny) + "x" + std::to_string(nz));
  for (double L : extent)
    if (!(L > 0.0)) throw GeometryError("build_mesh: domain extents must be positive");
  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.nz = nz;
  m.extent = extent;
  const int vx = nx + 1, vy = ny + 1, vz = nz + 1;
  m.vertices.reserve(static_cast<std::size_t>(vx) * vy * vz);
  for (int k = 0; k < vz; ++k)
    for (int j = 0; j < vy; ++j)
      for (int i = 0; i < vx; ++i)
        m.vertices.push_back({extent[0] * i / nx, extent[1] * j / ny, extent[2] * k / nz});
  auto vid = [&](int i, int j, int k) { return i + vx * (j + vy * k); };
  for (int ez = 0; ez < nz; ++ez)
    for (int ey = 0; ey < ny; ++ey)
      for (int ex = 0; ex < nx; ++ex) {
        std::array<int, 8> conn{};
        for (int c = 0; c < 8; ++c) conn[c] = vid(ex + (c & 1), ey + ((c >> 1) & 1), ez + ((c >> 2) & 1));
        const int e = static_cast<int>(m.elements.size());
        m.elements.push_back(conn);
        if (ex == 0) m.boundary.push_back({e, 0, BoundaryTag::Absorbing});
        if (ex == nx - 1) m.boundary.push_back({e, 1, BoundaryTag::Absorbing});
        if (ey == 0) m.boundary.push_back({e, 2, BoundaryTag::Absorbing});
        if (ey == ny - 1) m.boundary.push_back({e, 3, BoundaryTag::Absorbing});
        if (ez == 0) m.boundary.push_back({e, 4, BoundaryTag::Bottom});
        if (ez == nz - 1) m.boundary.push_back({e, 5, BoundaryTag::Surface});
      }
  return m;
}

// Smooth interior displacement (vanishes on the boundary) so the element
// maps become genuinely trilinear.
inline void distort_interior(Mesh& m, double amplitude) {
  for (auto& v : m.vertices) {
    const double sx = std::sin(std::numbers::pi * v[0] / m.extent[0]);
    const double sy = std::sin(std::numbers::pi * v[1] / m.extent[1]);
    const double sz = std::sin(std::numbers::pi * v[2] / m.extent[2]);
    const double bump = amplitude * sx * sy * sz;
    v[0] += bump * m.extent[0] / m.nx;
    v[1] -= 0.5 * bump * m.extent[1] / m.ny;
    v[2] += 0.25 * bump * m.extent[2] / m.nz;
  }
}

}  // namespace femma::fem
