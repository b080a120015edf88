#pragma once

// Line-oriented model files:
//
//   # comment
//   [base]              dim = 2, lo = -1, hi = 1 (one value or one per axis)
//   [fiber]             dim = 1, lo = -2, hi = 2, grid = 5 (witness points per axis)
//   [relation R]        arity = 1, guard = "y1^2"
//   [function f]        arity = 1, y1 = "2*y11"
//   [constant c]        y1 = "x1"
//   [section s]         y1 = "x1 + x2", optional lo / hi sub-box
//   [connection Phi]    L11 = "1"  (row = fiber axis, column = base axis; missing = 0)
//   [map sigma]         source = 1, lo = -1, hi = 1, x1 = "t", x2 = "-t"
//
// Expressions are double-quoted; numbers and lists are bare.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fibersem/bundle.hpp"
#include "fibersem/transport.hpp"

namespace fibersem {

class Model {
 public:
  Model(StructureBundle bundle, std::vector<Section> sections, std::vector<Connection> connections,
        std::vector<SmoothMap> maps, std::optional<std::size_t> witness_grid, std::string origin);

  const StructureBundle& bundle() const { return bundle_; }
  const std::vector<Section>& sections() const { return sections_; }
  const std::vector<Connection>& connections() const { return connections_; }
  const std::vector<SmoothMap>& maps() const { return maps_; }
  std::optional<std::size_t> witness_grid() const { return witness_grid_; }
  const std::string& origin() const { return origin_; }

  /// Throw ValidationError naming the missing object.
  const Section& section(std::string_view name) const;
  const Connection& connection(std::string_view name) const;
  const SmoothMap& map(std::string_view name) const;
  bool has_section(std::string_view name) const;

 private:
  StructureBundle bundle_;
  std::vector<Section> sections_;
  std::vector<Connection> connections_;
  std::vector<SmoothMap> maps_;
  std::optional<std::size_t> witness_grid_;
  std::string origin_;
};

/// Throws ParseError (with line number) or ValidationError.
Model parse_model(std::string_view text, std::string origin = "<model>");
Model load_model(const std::string& path);

}  // namespace fibersem
