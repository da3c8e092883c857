#ifndef OLNMT_CHECKPOINT_HPP
#define OLNMT_CHECKPOINT_HPP

#include <stdexcept>
#include <string>

#include "olnmt/model.hpp"

// Checkpoint container: magic, format version, ModelConfig, then each named
// parameter as (name, shape, little-endian float32 data). Loads validate the
// version and every name/shape against the config's parameter spec.

namespace olnmt {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Checkpoint {
  ModelConfig config;
  ParameterSet<float> params;
};

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ParameterSet<float>& params);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace olnmt

#endif  // OLNMT_CHECKPOINT_HPP
