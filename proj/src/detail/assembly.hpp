#pragma once

// Sparse assembly helpers shared by the eigen, elliptic and time-stepping code.

#include <Eigen/Sparse>

#include <cstddef>
#include <vector>

#include "splap/grid.hpp"

namespace splap::detail {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Node -> interior unknown index (or npos for boundary nodes).
struct InteriorMap {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  explicit InteriorMap(const Grid& g);
  std::vector<std::size_t> slot;
  std::size_t count = 0;
};

struct ElementGradients {
  std::vector<double> gx, gy;
};

ElementGradients element_gradients(const GridFunction& u);

// Hessian of E_p restricted to interior unknowns, using the regularized weights
// (|g|^2+mu^2)^{(p-2)/2} I + (p-2)(|g|^2+mu^2)^{(p-4)/2} g g^T.
// With picard = true the rank-one part is dropped (frozen-coefficient operator).
SpMat p_laplacian_hessian(const GridFunction& u, double p, double mu, const InteriorMap& map,
                          bool picard);

// Stiffness matrix of the p = 2 energy on interior unknowns.
SpMat laplacian_stiffness(const GridPtr& g, const InteriorMap& map);

}  // namespace splap::detail
