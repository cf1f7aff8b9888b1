#include "lidsn/train/config.hpp"

#include <cmath>
#include <string>

#include "lidsn/error.hpp"

namespace lidsn::train {

const char* to_string(ClassWeightMode mode) {
  return mode == ClassWeightMode::uniform ? "uniform" : "inverse-frequency";
}

ClassWeightMode parse_class_weight_mode(std::string_view text) {
  if (text == "uniform") return ClassWeightMode::uniform;
  if (text == "inverse-frequency") return ClassWeightMode::inverse_frequency;
  throw ConfigError("unknown class-weight mode '" + std::string(text) +
                    "' (expected uniform or inverse-frequency)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid train config: " + what); };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (max_epochs == 0) fail("max_epochs must be >= 1");
  if (patience == 0 || patience > max_epochs) fail("patience must lie in [1, max_epochs]");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction must lie in (0, 1)");
}

}  // namespace lidsn::train
