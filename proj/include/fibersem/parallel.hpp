#pragma once

// Forcing along parallel lifts: path families, the parallel forcing
// relation, pullback compatibility, and horizontal / vertical extensions.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fibersem/forcing.hpp"
#include "fibersem/transport.hpp"

namespace fibersem {

struct PathOptions {
  std::size_t arcs = 8;
  std::size_t random_paths = 16;
  bool include_constant = true;
  std::uint64_t seed = 1;
  double amplitude = 1.0;
};

/// Finite family of paths sigma: [-1, 1] -> base with sigma(0) = m: the
/// constant path, both orientations of each axis segment, quadratic arcs and
/// seeded random cubics. A path that leaves the box is shrunk by halving its
/// amplitude, and dropped when that does not help.
class PathFamily {
 public:
  PathFamily() = default;
  PathFamily(std::vector<SmoothMap> paths, std::vector<std::string> labels);

  static PathFamily generate(const BaseBox& box, std::span<const double> m, const PathOptions& opt = {});

  std::size_t size() const { return paths_.size(); }
  const std::vector<SmoothMap>& paths() const { return paths_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// f o sigma for every path.
  PathFamily mapped(const SmoothMap& f) const;
  PathFamily with(const SmoothMap& path, std::string label) const;

 private:
  std::vector<SmoothMap> paths_;
  std::vector<std::string> labels_;
};

struct ParallelVerdict {
  Decision decision = Decision::NotForced;
  std::optional<std::size_t> counterexample;  // index into the family
  std::string counterexample_label;
  std::size_t paths_checked = 0;

  bool forced() const { return decision == Decision::Forced; }
};

/// Largest parameter distance from 0 that forcing at 0 can look at.
double lift_reach(const Formula& phi, const NeighborhoodPolicy& pol);

/// Pull the bundle back along `path` (source interval containing 0), lift
/// each e_k through 0 under c, and force phi at 0 on the pullback.
bool forced_along_path(const StructureBundle& sb, const Connection& c, const SmoothMap& path,
                       const std::vector<FiberPoint>& e, const Formula& phi, const NeighborhoodPolicy& pol);

/// Forced along every path of the family; otherwise the first failing path.
ParallelVerdict parallel_forced(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                const std::vector<FiberPoint>& e, const Formula& phi, const PathFamily& fam,
                                const NeighborhoodPolicy& pol);

struct CompatibilityResult {
  bool equal = true;
  Decision target_side = Decision::NotForced;
  std::vector<Decision> source_sides;
};

/// Parallel forcing at (m, e) on (sb, c) with the family pushed through f,
/// compared with parallel forcing at each n of `preimages` on the pulled-back
/// bundle and connection with the family itself.
CompatibilityResult check_pullback_compatibility(const StructureBundle& sb, const Connection& c, const SmoothMap& f,
                                                 const BaseBox& source_box, std::span<const double> m,
                                                 const std::vector<std::vector<double>>& preimages,
                                                 const std::vector<FiberPoint>& e, const Formula& phi,
                                                 const PathFamily& source_family, const NeighborhoodPolicy& pol);

/// Straight line p + t d clipped to the part of [-1, 1] where it stays in box.
SmoothMap local_line(const BaseBox& box, std::span<const double> p, std::span<const double> d);

/// Breadth-first reachability over the base grid of U anchored at m (king
/// moves). A neighbour joins when, transporting the carried tuple along the
/// straight segment, phi stays forced along the segment's own line at every
/// RK4 checkpoint. The seed joins when phi is forced along the constant path.
ExtensionSet horizontal_extension(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                  const std::vector<FiberPoint>& e, const Formula& phi, const BaseBox& region,
                                  double grid_step, const NeighborhoodPolicy& pol);

/// Replays the provenance chain of a member and re-verifies every checkpoint.
bool recheck_horizontal(const StructureBundle& sb, const Connection& c, const ExtensionSet& ext, std::size_t row,
                        const Formula& phi, const NeighborhoodPolicy& pol);

/// Breadth-first reachability over the grid of fiber tuples in V (a box in
/// the packed tuple space) anchored at e. A neighbour joins when phi is
/// parallel forced at m at every checkpoint of the straight segment.
ExtensionSet vertical_extension(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                const std::vector<FiberPoint>& e, const Formula& phi, const BaseBox& region,
                                double grid_step, const PathFamily& fam, const NeighborhoodPolicy& pol,
                                double checkpoint_step = 0.0);

struct DiagonalCheck {
  bool ok = false;
  bool vertical_is_diagonal = false;
  bool horizontal_is_everything = false;
  std::string diagnostic;
};

/// For phi := (x1 = x2) and e = (a, a): the vertical extension over V is
/// exactly the diagonal grid, and the horizontal extension over U is all of
/// U's grid. Needs a one-dimensional fiber.
DiagonalCheck diagonal_extension_check(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                       double a, const BaseBox& fiber_region, double fiber_step,
                                       const BaseBox& base_region, double base_step, const PathFamily& fam,
                                       const NeighborhoodPolicy& pol, double checkpoint_step = 0.0);

}  // namespace fibersem
