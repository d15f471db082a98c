#pragma once

// Box grids over [0,L1] or [0,L1]x[0,L2], nodal fields, quadrature and discrete norms.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splap {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear element of the structured mesh: a 1D cell (2 nodes) or one of the two
// right triangles of a 2D square (3 nodes). grad = sum_k (bx[k], by[k]) u[node[k]].
struct Element {
  std::array<std::size_t, 3> node{};
  std::array<double, 3> bx{};
  std::array<double, 3> by{};
  int nodes = 0;
  double vol = 0.0;
};

class Grid {
 public:
  int dim() const { return dim_; }
  std::size_t n(int axis) const { return n_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  double h(int axis) const { return h_[axis]; }
  std::size_t size() const { return coords_.size() / static_cast<std::size_t>(dim_); }

  // Lexicographic: index = i + n0 * j.
  std::size_t index(std::size_t i, std::size_t j = 0) const { return i + n_[0] * j; }
  double coord(std::size_t node, int axis) const { return coords_[node * dim_ + axis]; }

  bool on_boundary(std::size_t node) const { return boundary_[node] != 0; }
  std::span<const double> dist() const { return dist_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const std::size_t> interior() const { return interior_; }
  std::span<const Element> elements() const { return elements_; }

  // Domain measure |Omega|.
  double measure() const;
  // Smallest spacing; used for the length scale of regularizations.
  double min_h() const;
  double max_dist() const;

 private:
  friend std::shared_ptr<const Grid> build_grid(int, std::array<double, 2>,
                                                std::array<std::size_t, 2>);
  int dim_ = 1;
  std::array<std::size_t, 2> n_{1, 1};
  std::array<double, 2> extent_{0.0, 0.0};
  std::array<double, 2> h_{0.0, 0.0};
  std::vector<double> coords_;
  std::vector<unsigned char> boundary_;
  std::vector<double> dist_;
  std::vector<double> weights_;
  std::vector<std::size_t> interior_;
  std::vector<Element> elements_;
};

using GridPtr = std::shared_ptr<const Grid>;

// dim 1 uses extent[0], n[0]; dim 2 uses both axes.
GridPtr build_grid(int dim, std::array<double, 2> extent, std::array<std::size_t, 2> n);
inline GridPtr build_grid_1d(double length, std::size_t n) {
  return build_grid(1, {length, 0.0}, {n, 1});
}
inline GridPtr build_grid_2d(double lx, double ly, std::size_t nx, std::size_t ny) {
  return build_grid(2, {lx, ly}, {nx, ny});
}

class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(GridPtr grid, double fill = 0.0, bool dirichlet = true);
  GridFunction(GridPtr grid, std::vector<double> values, bool dirichlet = true);

  template <class F>
  static GridFunction from(GridPtr grid, F&& f, bool dirichlet = true) {
    std::vector<double> v(grid->size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (grid->dim() == 1)
        v[k] = f(grid->coord(k, 0), 0.0);
      else
        v[k] = f(grid->coord(k, 0), grid->coord(k, 1));
    }
    return GridFunction(std::move(grid), std::move(v), dirichlet);
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  bool dirichlet() const { return dirichlet_; }
  void set_dirichlet(bool d);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Zeroes boundary nodes when Dirichlet-tagged.
  void enforce_boundary();
  bool all_finite() const;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);

 private:
  GridPtr grid_;
  std::vector<double> values_;
  bool dirichlet_ = true;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

// Trapezoidal (tensor-trapezoidal in 2D) quadrature over the box.
double integrate(const GridFunction& f);
// Quadrature inner product <f, g>.
double pairing(const GridFunction& f, const GridFunction& g);

double norm_Linf(const GridFunction& f);
double norm_Lq(const GridFunction& f, double q);
// (sum over elements |grad_h f|^p vol)^{1/p}
double seminorm_W1p(const GridFunction& f, double p);
double max_abs_diff(const GridFunction& a, const GridFunction& b);

// Distance field as a Dirichlet grid function.
GridFunction distance_function(const GridPtr& grid);

void write_csv(std::ostream& os, const GridFunction& f);
void write_csv(const std::string& path, const GridFunction& f);
GridFunction read_csv(std::istream& is, GridPtr grid);

}  // namespace splap
