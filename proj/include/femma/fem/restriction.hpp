#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "femma/core_tensor.hpp"
#include "femma/counters.hpp"
#include "femma/errors.hpp"
#include "femma/fem/mesh.hpp"

namespace femma::fem {

// Element restriction G for the continuous H1 space on a structured mesh:
// element-local DOF (i, j, k), i fastest, maps to the global lattice point
// (ex*p + i, ey*p + j, ez*p + k).
class H1Restriction {
 public:
  H1Restriction() = default;
  H1Restriction(const Mesh& mesh, int order) : order_(order), dofs_1d_(order + 1) {
    if (order < 1) throw ShapeError("H1Restriction: order must be >= 1");
    gx_ = mesh.nx * order + 1;
    gy_ = mesh.ny * order + 1;
    gz_ = mesh.nz * order + 1;
    const int d = dofs_1d_;
    const std::size_t per = static_cast<std::size_t>(d) * d * d;
    indices_.resize(per * mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const auto [ex, ey, ez] = mesh.element_index(e);
      std::size_t n = per * e;
      for (int k = 0; k < d; ++k)
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i)
            indices_[n++] = (ex * order + i) + gx_ * ((ey * order + j) + gy_ * (ez * order + k));
    }
    multiplicity_.assign(static_cast<std::size_t>(num_global()), 0.0);
    for (int g : indices_) multiplicity_[g] += 1.0;

    // Last element touching each DOF, then for each element the last element
    // sharing any of its DOFs.
    std::vector<int> last(static_cast<std::size_t>(num_global()), -1);
    for (int e = 0; e < mesh.num_elements(); ++e)
      for (std::size_t l = 0; l < per; ++l) last[indices_[per * e + l]] = e;
    ready_after_.assign(static_cast<std::size_t>(mesh.num_elements()), 0);
    for (int e = 0; e < mesh.num_elements(); ++e) {
      int r = e;
      for (std::size_t l = 0; l < per; ++l) r = std::max(r, last[indices_[per * e + l]]);
      ready_after_[e] = r;
    }
  }

  int order() const { return order_; }
  int dofs_1d() const { return dofs_1d_; }
  int local_size() const { return dofs_1d_ * dofs_1d_ * dofs_1d_; }
  int num_elements() const { return static_cast<int>(indices_.size() / local_size()); }
  int num_global() const { return gx_ * gy_ * gz_; }
  std::array<int, 3> lattice() const { return {gx_, gy_, gz_}; }

  std::span<const int> element_dofs(int e) const {
    return {indices_.data() + static_cast<std::size_t>(local_size()) * e,
            static_cast<std::size_t>(local_size())};
  }

  // L-vector -> element tensor.
  Tensor3 gather(int e, std::span<const double> global, OpCounters* counters = nullptr) const {
    Tensor3 t = Tensor3::cube(dofs_1d_);
    const auto dofs = element_dofs(e);
    for (std::size_t l = 0; l < dofs.size(); ++l) t.data[l] = global[dofs[l]];
    if (counters) ++counters->gathers;
    return t;
  }

  // global += scale * element tensor.
  void scatter_add(int e, const Tensor3& local, std::span<double> global, double scale = 1.0,
                   OpCounters* counters = nullptr) const {
    const auto dofs = element_dofs(e);
    for (std::size_t l = 0; l < dofs.size(); ++l) global[dofs[l]] += scale * local.data[l];
    if (counters) ++counters->scatters;
  }

  // Diagonal of G^T G: number of elements sharing each global DOF.
  const std::vector<double>& multiplicity() const { return multiplicity_; }

  // Largest element index that shares a DOF with element e.
  int ready_after(int e) const { return ready_after_[e]; }

 private:
  int order_ = 0;
  int dofs_1d_ = 0;
  int gx_ = 0, gy_ = 0, gz_ = 0;
  std::vector<int> indices_;
  std::vector<double> multiplicity_;
  std::vector<int> ready_after_;
};

}  // namespace femma::fem
