#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "streetrisk/geo.hpp"
#include "streetrisk/types.hpp"

namespace streetrisk {

// One location observed in both periods, for a single accident kind.
struct LocationPair {
  std::string location_id;
  geo::GeoPoint location;
  AccidentKind kind = AccidentKind::pedestrian;
  std::size_t n1 = 0;  // accidents in P1
  std::size_t n2 = 0;  // accidents in P2
  double h1 = 0.0;     // hazard index in P1
  double h2 = 0.0;     // hazard index in P2
  std::vector<double> v1;  // occupancy vector in P1
  std::vector<double> v2;  // occupancy vector in P2
};

}  // namespace streetrisk
