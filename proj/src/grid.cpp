#include "splap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "splap/kernels.hpp"

namespace splap {

double Grid::measure() const {
  return dim_ == 1 ? extent_[0] : extent_[0] * extent_[1];
}

double Grid::min_h() const { return dim_ == 1 ? h_[0] : std::min(h_[0], h_[1]); }

double Grid::max_dist() const { return *std::max_element(dist_.begin(), dist_.end()); }

GridPtr build_grid(int dim, std::array<double, 2> extent, std::array<std::size_t, 2> n) {
  if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 3) throw InvalidArgument("need at least 3 nodes per axis");
    if (!(extent[a] > 0.0) || !std::isfinite(extent[a]))
      throw InvalidArgument("grid extent must be positive");
  }
  if (dim == 1) {
    n[1] = 1;
    extent[1] = 0.0;
  }

  auto g = std::make_shared<Grid>();
  g->dim_ = dim;
  g->n_ = n;
  g->extent_ = extent;
  for (int a = 0; a < dim; ++a) g->h_[a] = extent[a] / static_cast<double>(n[a] - 1);

  const std::size_t total = n[0] * n[1];
  g->coords_.resize(total * dim);
  g->boundary_.assign(total, 0);
  g->dist_.resize(total);
  g->weights_.resize(total);

  for (std::size_t j = 0; j < n[1]; ++j) {
    for (std::size_t i = 0; i < n[0]; ++i) {
      const std::size_t k = i + n[0] * j;
      // Endpoints are set exactly so that the distance vanishes on the boundary.
      const double x = i + 1 == n[0] ? extent[0] : static_cast<double>(i) * g->h_[0];
      g->coords_[k * dim] = x;
      double d = std::min(x, extent[0] - x);
      bool bnd = i == 0 || i + 1 == n[0];
      double w = (bnd ? 0.5 : 1.0) * g->h_[0];
      if (dim == 2) {
        const double y = j + 1 == n[1] ? extent[1] : static_cast<double>(j) * g->h_[1];
        g->coords_[k * dim + 1] = y;
        d = std::min(d, std::min(y, extent[1] - y));
        const bool bj = j == 0 || j + 1 == n[1];
        bnd = bnd || bj;
        w *= (bj ? 0.5 : 1.0) * g->h_[1];
      }
      g->dist_[k] = bnd ? 0.0 : d;
      g->boundary_[k] = bnd ? 1 : 0;
      g->weights_[k] = w;
      if (!bnd) g->interior_.push_back(k);
    }
  }

  if (dim == 1) {
    const double ih = 1.0 / g->h_[0];
    for (std::size_t c = 0; c + 1 < n[0]; ++c) {
      Element e;
      e.nodes = 2;
      e.node = {c, c + 1, 0};
      e.bx = {-ih, ih, 0.0};
      e.vol = g->h_[0];
      g->elements_.push_back(e);
    }
  } else {
    const double ihx = 1.0 / g->h_[0];
    const double ihy = 1.0 / g->h_[1];
    const double area = 0.5 * g->h_[0] * g->h_[1];
    for (std::size_t j = 0; j + 1 < n[1]; ++j) {
      for (std::size_t i = 0; i + 1 < n[0]; ++i) {
        const std::size_t a = g->index(i, j), b = g->index(i + 1, j);
        const std::size_t c = g->index(i, j + 1), d = g->index(i + 1, j + 1);
        // lower-left triangle: forward differences from a
        Element lo;
        lo.nodes = 3;
        lo.node = {a, b, c};
        lo.bx = {-ihx, ihx, 0.0};
        lo.by = {-ihy, 0.0, ihy};
        lo.vol = area;
        // upper-right triangle: backward differences from d
        Element up;
        up.nodes = 3;
        up.node = {d, c, b};
        up.bx = {ihx, -ihx, 0.0};
        up.by = {ihy, 0.0, -ihy};
        up.vol = area;
        g->elements_.push_back(lo);
        g->elements_.push_back(up);
      }
    }
  }
  return g;
}

GridFunction::GridFunction(GridPtr grid, double fill, bool dirichlet)
    : grid_(std::move(grid)), values_(grid_->size(), fill), dirichlet_(dirichlet) {
  if (dirichlet_) enforce_boundary();
}

GridFunction::GridFunction(GridPtr grid, std::vector<double> values, bool dirichlet)
    : grid_(std::move(grid)), values_(std::move(values)), dirichlet_(dirichlet) {
  if (values_.size() != grid_->size()) throw InvalidArgument("value count does not match grid");
  if (dirichlet_) enforce_boundary();
}

void GridFunction::set_dirichlet(bool d) {
  dirichlet_ = d;
  if (d) enforce_boundary();
}

void GridFunction::enforce_boundary() {
  for (std::size_t k = 0; k < values_.size(); ++k)
    if (grid_->on_boundary(k)) values_[k] = 0.0;
}

bool GridFunction::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  dirichlet_ = dirichlet_ && o.dirichlet_;
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  dirichlet_ = dirichlet_ && o.dirichlet_;
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

double integrate(const GridFunction& f) {
  const auto w = f.grid().weights();
  return kernels::active().weighted_sum(w.data(), f.values().data(), w.size());
}

double pairing(const GridFunction& f, const GridFunction& g) {
  const auto w = f.grid().weights();
  return kernels::active().weighted_dot(w.data(), f.values().data(), g.values().data(), w.size());
}

double norm_Linf(const GridFunction& f) {
  return kernels::active().max_abs_diff(f.values().data(), nullptr, f.size());
}

double max_abs_diff(const GridFunction& a, const GridFunction& b) {
  return kernels::active().max_abs_diff(a.values().data(), b.values().data(), a.size());
}

double norm_Lq(const GridFunction& f, double q) {
  if (!(q >= 1.0)) throw InvalidArgument("norm_Lq requires q >= 1");
  std::vector<double> a(f.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::abs(f[k]);
  kernels::active().pow_nonneg(a.data(), a.size(), q, a.data());
  const auto w = f.grid().weights();
  return std::pow(kernels::active().weighted_sum(w.data(), a.data(), a.size()), 1.0 / q);
}

double seminorm_W1p(const GridFunction& f, double p) {
  if (!(p > 1.0)) throw InvalidArgument("seminorm_W1p requires p > 1");
  const auto elems = f.grid().elements();
  std::vector<double> s(elems.size()), vol(elems.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const Element& el = elems[e];
    double gx = 0.0, gy = 0.0;
    for (int k = 0; k < el.nodes; ++k) {
      gx += el.bx[k] * f[el.node[k]];
      gy += el.by[k] * f[el.node[k]];
    }
    s[e] = gx * gx + gy * gy;
    vol[e] = el.vol;
  }
  kernels::active().pow_nonneg(s.data(), s.size(), 0.5 * p, s.data());
  return std::pow(kernels::active().weighted_sum(vol.data(), s.data(), s.size()), 1.0 / p);
}

GridFunction distance_function(const GridPtr& grid) {
  return GridFunction(grid, std::vector<double>(grid->dist().begin(), grid->dist().end()), true);
}

void write_csv(std::ostream& os, const GridFunction& f) {
  const Grid& g = f.grid();
  os << "node_index,x";
  if (g.dim() == 2) os << ",y";
  os << ",value\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < f.size(); ++k) {
    os << k << ',' << g.coord(k, 0);
    if (g.dim() == 2) os << ',' << g.coord(k, 1);
    os << ',' << f[k] << '\n';
  }
}

void write_csv(const std::string& path, const GridFunction& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_csv(os, f);
}

GridFunction read_csv(std::istream& is, GridPtr grid) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("empty grid function CSV");
  std::vector<double> values(grid->size(), 0.0);
  std::vector<bool> seen(grid->size(), false);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != static_cast<std::size_t>(grid->dim()) + 2)
      throw InvalidArgument("bad column count in grid function CSV");
    const std::size_t k = std::stoul(cols.front());
    if (k >= values.size()) throw InvalidArgument("node index out of range");
    values[k] = std::stod(cols.back());
    seen[k] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw InvalidArgument("grid function CSV is missing nodes");
  bool dirichlet = true;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (grid->on_boundary(k) && values[k] != 0.0) dirichlet = false;
  return GridFunction(std::move(grid), std::move(values), dirichlet);
}

}  // namespace splap
