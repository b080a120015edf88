#pragma once

// Pointwise forcing under a sampled epsilon-neighborhood semantics, the
// spatial extension and the density (double negation) check.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fibersem/bundle.hpp"
#include "fibersem/logic.hpp"

namespace fibersem {

/// "There is an open U around m" becomes "some radius eps0 * 2^-k,
/// k = 0..halvings, works"; "for all u in U" becomes "for all samples".
struct NeighborhoodPolicy {
  double eps0 = 0.5;
  std::size_t halvings = 8;
  std::size_t samples = 64;
  std::size_t depth = 3;
  double tol_eq = 1e-9;
  std::size_t witness_grid = 5;  // constant witness sections per fiber axis
  bool exists_neighborhood = false;
  double step = 1e-3;  // RK4 step for lifts and checkpoint spacing

  /// Throws ValidationError when a field is out of range.
  void validate() const;
  double radius(std::size_t level) const;
  double smallest_radius() const { return radius(halvings); }
};

enum class Decision { Forced, NotForced };

std::string to_string(Decision d);

struct ForcingVerdict {
  Decision decision = Decision::NotForced;
  std::optional<double> witness_eps;  // set iff Forced
  std::size_t samples_evaluated = 0;
  std::size_t depth_used = 0;

  bool forced() const { return decision == Decision::Forced; }
};

/// Nested low-discrepancy samples of the unit ball in R^dim: level k owns
/// `per_level` points, and the check at level k uses the points of levels
/// k..halvings plus the centre. Points come from the additive recurrence with
/// the generalized golden ratio, so no sample lies on a rational line.
class BallSamples {
 public:
  BallSamples(std::size_t dim, std::size_t levels, std::size_t per_level);

  std::size_t dim() const { return dim_; }
  std::size_t levels() const { return levels_; }
  std::size_t per_level() const { return per_level_; }
  /// Unit-ball point i of `level` (i < per_level).
  std::span<const double> point(std::size_t level, std::size_t i) const;

 private:
  std::size_t dim_;
  std::size_t levels_;
  std::size_t per_level_;
  std::vector<double> coords_;
};

/// Evaluates forcing on one bundle of structures. Quantifiers range over a
/// witness family: bound sections, `extras`, constant-symbol sections,
/// function symbols applied to those, and constant sections through a grid
/// of the fiber box.
class ForcingEngine {
 public:
  ForcingEngine(const StructureBundle& sb, NeighborhoodPolicy pol, std::vector<Section> extras = {});

  const StructureBundle& bundle() const { return sb_; }
  const NeighborhoodPolicy& policy() const { return pol_; }

  /// Full verdict with the largest witnessing radius.
  ForcingVerdict force(const Formula& phi, std::span<const double> m, const std::vector<Section>& sections) const;
  /// Decision only; cheaper.
  bool forced(const Formula& phi, std::span<const double> m, const std::vector<Section>& sections) const;

  /// The family quantifiers range over when `sections` are bound.
  std::vector<Section> witness_family(const std::vector<Section>& sections) const;

 private:
  struct Run;

  BaseBox domain_of(const std::vector<Section>& sections) const;

  StructureBundle sb_;
  NeighborhoodPolicy pol_;
  std::vector<Section> extras_;
  BallSamples samples_;
};

ForcingVerdict force(const StructureBundle& sb, std::span<const double> m, const Formula& phi,
                     const std::vector<Section>& sections, const NeighborhoodPolicy& pol = {});

/// Regular grid of `box` made of the points anchor + i * step that lie in
/// the box (integer i per axis), in row-major order with the first axis
/// slowest.
struct Grid {
  std::vector<double> anchor;
  double step = 0.0;
  std::vector<long> lo;     // smallest index per axis
  std::vector<long> count;  // points per axis

  static Grid over(const BaseBox& box, std::span<const double> anchor, double step);
  std::size_t dim() const { return anchor.size(); }
  std::size_t size() const;
  std::vector<long> index_of(std::size_t flat) const;
  std::optional<std::size_t> flat_of(std::span<const long> index) const;
  std::vector<double> point(std::size_t flat) const;
};

/// Grid points flagged member / non-member. For reachability sets, `parent`
/// is the row that reached a member (-1 for the seed and non-members) and
/// `tuple` holds the fiber tuple carried to each member.
struct ExtensionSet {
  Grid grid;
  std::vector<char> member;
  std::vector<long> parent;
  std::vector<FiberPoint> tuple;

  std::size_t member_count() const;
  std::vector<std::vector<double>> members() const;
};

/// Grid points of U, anchored at the origin, where phi is forced.
ExtensionSet spatial_extension(const StructureBundle& sb, const Formula& phi, const std::vector<Section>& sections,
                               const BaseBox& region, double grid_step, const NeighborhoodPolicy& pol = {});

/// Sampled density of the forcing set near m: some scheduled eps such that
/// every sample u of B_eps(m) has a sample of B_{eps/sqrt(N)}(u) where phi is
/// forced.
bool density_check(const StructureBundle& sb, const Formula& phi, const std::vector<Section>& sections,
                   std::span<const double> m, const NeighborhoodPolicy& pol = {});

/// For positive, equality-free phi: classical truth at m implies forcing at
/// m. Throws ValidationError for other formulas.
bool positive_stability_check(const StructureBundle& sb, const Formula& phi, const std::vector<Section>& sections,
                              std::span<const double> m, const NeighborhoodPolicy& pol = {});

/// Nesting depth of the clauses that look at a neighborhood (atoms count one).
std::size_t neighborhood_nesting(const Formula& phi, const NeighborhoodPolicy& pol);

}  // namespace fibersem
