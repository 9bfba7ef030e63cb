#pragma once

#include <cstddef>
#include <vector>

#include "oracles.hpp"
#include "world.hpp"

namespace fixtures {

/// A validation set on which the default configuration is the unique best
/// cell of a small grid, built by simulating random cases under every cell
/// and greedily keeping cases that separate each other cell from the
/// defaults.
struct EngineeredGrid {
  MockWorld world;
  std::vector<double> weight_axis;  // used for all three weights
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<oracle::Cell> cells;         // normalised weights, every valid cell
  std::vector<std::size_t> expected;       // oracle correct count per cell
  std::size_t pool = 0;                    // random candidates examined

  /// Index of the cell with these values (1e-9 tolerance), or cells.size().
  std::size_t find(double ws, double wd, double wl, double alpha, double beta) const;
};

EngineeredGrid engineer_grid(std::uint64_t seed = 2024, std::size_t pool = 600);

}  // namespace fixtures
