#pragma once

#include <string>

#include "veritas/nn/layers.hpp"

namespace veritas::nn {

// Self-describing checkpoint: a header listing parameter names and shapes
// followed by raw little-endian float32 data in header order.
void save_checkpoint(const std::string& path, ModelT<float>& model);

// Loads by parameter name into an already built model; throws on missing
// names or shape disagreement.
void load_checkpoint(const std::string& path, ModelT<float>& model);

}  // namespace veritas::nn
