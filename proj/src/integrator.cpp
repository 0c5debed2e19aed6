#include "qsed/integrator.hpp"

namespace qsed {

void validate(const IntegratorConfig& cfg) {
  if (cfg.midpoint_iterations < 1) throw InvalidParam("midpoint_iterations must be >= 1");
}

}  // namespace qsed
