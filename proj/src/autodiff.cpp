#include "topoforge/autodiff.hpp"

#include <stdexcept>
#include <string>

namespace topoforge {

void TangentDirection::validate(int m, int d) const {
  const bool ok = component_ >= 0 && component_ < m &&
                  (kind_ == Kind::state_value || (direction_ >= 0 && direction_ < d));
  if (!ok)
    throw std::out_of_range("tangent direction (" + std::to_string(component_) + ", " +
                            std::to_string(direction_) + ") outside m=" + std::to_string(m) +
                            ", d=" + std::to_string(d));
}

}  // namespace topoforge
