#pragma once

// CSV and SVG views of extension sets.

#include <ostream>
#include <string>
#include <vector>

#include "fibersem/forcing.hpp"

namespace fibersem {

/// Header: one column per coordinate (named by `axes`, default c1..cd),
/// then member (0/1) and path_id (the row that reached the point, -1 for
/// the seed and non-members). Coordinates use %.10g.
void write_csv(std::ostream& out, const ExtensionSet& set, std::vector<std::string> axes = {});

/// Fixed 800x800 viewBox scatter of a 1- or 2-dimensional set: members are
/// filled black, non-members light grey. Throws Error for higher dimensions.
void write_svg(std::ostream& out, const ExtensionSet& set, const std::string& title = {});

}  // namespace fibersem
