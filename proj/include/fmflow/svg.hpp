#pragma once

#include "fmflow/common.hpp"

#include <string>
#include <vector>

namespace fmflow {

struct ScatterLayer {
  std::string label;
  Eigen::MatrixXd points;  // n x 2
};

inline constexpr int kSvgSize = 600;

// Square viewport fitted to the joint bounding box of all layers, one colored
// marker layer per input plus a legend. Output depends only on the input.
std::string scatter_svg(const std::vector<ScatterLayer>& layers);

}  // namespace fmflow
