#pragma once

#include <span>
#include <string>
#include <vector>

#include "veritas/grid.hpp"
#include "veritas/nn.hpp"
#include "veritas/tradrx.hpp"

namespace veritas {

// The three receiver input planes for one subframe: received grid, raw LS
// channel estimates at pilot REs (zeros elsewhere) and the transmitted pilot
// symbols (zeros elsewhere). Each part is a (14, 72, 2) real tensor with
// re/im in the last dimension.
struct RxInput {
    nn::Tensor rx_grid;
    nn::Tensor raw_channel;
    nn::Tensor tx_pilots;

    // concatenated channel-first layout (6, 14, 72) consumed by the model
    nn::Tensor to_model_input() const;
};

RxInput build_rx_input(std::span<const cf32> rx_subframe, const PilotTable& pilots, int subframe_index);

// (14, 72, 8) raw LLRs plus the valid slice for the configured modulation:
// pilot REs drop out and 16QAM keeps the first 4 of 8 slots per data RE.
struct RxOutput {
    nn::Tensor llrs_raw;
    std::vector<float> llrs_valid;
};

struct NeuralRxTrainSettings {
    int epochs = 8;
    int batch_size = 12;
    double learning_rate = 0.15;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    long samples_per_epoch = 0;
};

// Compact trainable receiver with the full-size model's I/O contract: input
// conv, a stack of residual conv blocks, output conv to 8 LLR channels.
class NeuralReceiver {
  public:
    NeuralReceiver(const GridSpec& spec, std::uint64_t init_seed, int channels = 32, int blocks = 3);

    RxOutput forward(const RxInput& input);

    // decodes a whole frame into payload-ordered valid LLRs
    SoftBitBlock decode_frame(std::span<const cf32> rx_grid, const PilotTable& pilots);

    // masked BCE over the valid LLR slots; targets use the LLR = ln(P0/P1)
    // convention, so a transmitted 1 pushes the raw output negative.
    std::vector<double> train(const std::vector<RxInput>& inputs,
                              const std::vector<std::vector<std::uint8_t>>& subframe_bits,
                              const NeuralRxTrainSettings& settings);

    void save(const std::string& path);
    void load(const std::string& path);

    const GridSpec& spec() const { return spec_; }
    nn::Model& model() { return model_; }
    long parameter_count() { return model_.parameter_count(); }

  private:
    GridSpec spec_;
    Masks masks_;
    nn::Model model_;
};

}  // namespace veritas
