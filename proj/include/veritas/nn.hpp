#pragma once

#include "veritas/nn/checkpoint.hpp"
#include "veritas/nn/layers.hpp"
#include "veritas/nn/losses.hpp"
#include "veritas/nn/tensor.hpp"
#include "veritas/nn/train.hpp"
