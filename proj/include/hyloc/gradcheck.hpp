#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hyloc {

struct BlockCheck {
  std::string block;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central-difference check (eps 1e-5) of every differentiable block, the
/// composed fusion forward pass and the blackbox forward pass on small
/// seeded instances.
std::vector<BlockCheck> run_gradient_checks(std::uint64_t seed = 0);

}  // namespace hyloc
