#pragma once

// Connections on trivial bundles, given by their horizontal-lift field, and
// fixed-step RK4 parallel transport.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fibersem/bundle.hpp"

namespace fibersem {

/// The horizontal lift of a base velocity v at (m, y) is (v, L(m, y) v).
/// L is a k x n matrix of expressions in x1..xn, y1..yk. The induced vertical
/// projector is (v_b, v_f) -> (0, v_f - L v_b).
class Connection {
 public:
  Connection(BaseBox base, BaseBox fiber_box, std::vector<std::vector<Expr>> lift, std::string name = {});

  static Connection flat(BaseBox base, BaseBox fiber_box, std::string name = {});
  /// entries[i][j] is the text of L_ij; empty strings mean 0.
  static Connection parse(BaseBox base, BaseBox fiber_box, const std::vector<std::vector<std::string>>& entries,
                          std::string name = {});

  const BaseBox& base() const { return base_; }
  const BaseBox& fiber_box() const { return fiber_box_; }
  std::size_t base_dim() const { return base_.dim(); }
  std::size_t fiber_dim() const { return fiber_box_.dim(); }
  const std::vector<std::vector<Expr>>& lift() const { return lift_; }
  const std::string& name() const { return name_; }
  bool is_flat() const;

  /// out = L(m, y) v.
  void fiber_velocity(std::span<const double> m, std::span<const double> y, std::span<const double> v,
                      std::span<double> out) const;
  /// Vertical projection v_f - L(m, y) v_b of a tangent vector at (m, y).
  FiberPoint vertical_part(std::span<const double> m, std::span<const double> y, std::span<const double> v_base,
                           std::span<const double> v_fiber) const;

 private:
  BaseBox base_;
  BaseBox fiber_box_;
  std::vector<std::vector<Expr>> lift_;
  std::string name_;
};

struct TransportResult {
  std::vector<double> t;
  std::vector<FiberPoint> y;
  std::vector<FiberPoint> dy;  // dy/dt at each sample
  double step = 0.0;

  const FiberPoint& terminal() const { return y.back(); }
};

/// Integrates y' = L(path(t), y) path'(t) from t0 to t1 (either direction)
/// with classical RK4 at a fixed step no larger than h. Throws
/// TransportEscape when the path leaves the base box or the lift leaves the
/// fiber box.
TransportResult parallel_transport(const Connection& c, const SmoothMap& path, const FiberPoint& a0, double t0,
                                   double t1, double h = 1e-3);

/// The lift through a0 at t = 0 as a section over [lo, hi] (lo <= 0 <= hi,
/// lo < hi) of the pulled-back bundle, by cubic Hermite interpolation of the
/// RK4 samples.
Section lifted_section(const Connection& c, const SmoothMap& path, const FiberPoint& a0, double lo, double hi,
                       double h = 1e-3, std::string name = {});

/// L'(n, y) = L(h(n), y) J_h(n), with the Jacobian taken symbolically.
Connection pullback_connection(const Connection& c, const SmoothMap& h, const BaseBox& source_box);

/// Block-diagonal lift field on the k-fold direct sum.
Connection direct_sum_connection(const Connection& c, std::size_t copies);

/// Max-norm distance between the lifts from a and from a + delta (1, ..., 1).
double lift_uniqueness_gap(const Connection& c, const SmoothMap& path, const FiberPoint& a, double delta,
                           double t0, double t1, double h = 1e-3);

/// Holonomy defect of the square loop m -> m + r e_i -> m + r e_i + r e_j ->
/// m + r e_j -> m, divided by r^2. Tends to the vertical part of the bracket
/// of the horizontal lifts of the two coordinate fields as r -> 0.
FiberPoint curvature_estimate(const Connection& c, std::span<const double> m, const FiberPoint& a, std::size_t i,
                              std::size_t j, double r, double h = 1e-3);

/// Vertical part of the bracket of the horizontal lifts of e_i and e_j at
/// (m, a), from central differences of the lift field with step `delta`.
FiberPoint bracket_curvature(const Connection& c, std::span<const double> m, const FiberPoint& a, std::size_t i,
                             std::size_t j, double delta = 1e-5);

/// Straight segment p + t (q - p), t in [0, 1].
SmoothMap segment_path(std::span<const double> p, std::span<const double> q);

}  // namespace fibersem
