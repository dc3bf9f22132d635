#include "veritas/neuralrx.hpp"

#include <stdexcept>

namespace veritas {
namespace {

constexpr int kLlrSlots = 8;  // sized for 256QAM, higher slots invalid for 16QAM

// (14, 72, 2) plane helpers, re/im last
void set_plane(nn::Tensor& t, int sym, int sc, cf32 v) {
    const long n_sc = t.shape[1];
    t.v[std::size_t((sym * n_sc + sc) * 2)] = v.real();
    t.v[std::size_t((sym * n_sc + sc) * 2 + 1)] = v.imag();
}

}  // namespace

nn::Tensor RxInput::to_model_input() const {
    const long n_sym = rx_grid.shape[0];
    const long n_sc = rx_grid.shape[1];
    nn::Tensor out({6, n_sym, n_sc});
    const nn::Tensor* parts[3] = {&rx_grid, &raw_channel, &tx_pilots};
    for (int part = 0; part < 3; ++part) {
        for (long s = 0; s < n_sym; ++s)
            for (long c = 0; c < n_sc; ++c)
                for (int plane = 0; plane < 2; ++plane)
                    out.v[std::size_t(((part * 2 + plane) * n_sym + s) * n_sc + c)] =
                        parts[part]->v[std::size_t((s * n_sc + c) * 2 + plane)];
    }
    return out;
}

RxInput build_rx_input(std::span<const cf32> rx_subframe, const PilotTable& pilots, int subframe_index) {
    const GridSpec& spec = pilots.spec;
    if (long(rx_subframe.size()) != long(spec.res_per_subframe()))
        throw std::invalid_argument("build_rx_input: subframe size mismatch");
    if (subframe_index < 0 || subframe_index >= spec.n_subframes_per_frame)
        throw std::invalid_argument("build_rx_input: subframe index out of range");

    RxInput in;
    in.rx_grid = nn::Tensor({spec.n_symbols, spec.n_subcarriers, 2});
    in.raw_channel = nn::Tensor({spec.n_symbols, spec.n_subcarriers, 2});
    in.tx_pilots = nn::Tensor({spec.n_symbols, spec.n_subcarriers, 2});

    for (int sym = 0; sym < spec.n_symbols; ++sym)
        for (int sc = 0; sc < spec.n_subcarriers; ++sc)
            set_plane(in.rx_grid, sym, sc, rx_subframe[std::size_t(sym) * spec.n_subcarriers + sc]);

    for (int ps = 0; ps < spec.n_pilot_symbols(); ++ps) {
        const int sym = spec.pilot_symbol_indices[std::size_t(ps)];
        for (int pc = 0; pc < spec.n_pilot_subcarriers(); ++pc) {
            const int sc = spec.pilot_subcarrier_indices[std::size_t(pc)];
            const cf32 x = pilots.at(subframe_index, ps, pc);
            const cf32 y = rx_subframe[std::size_t(sym) * spec.n_subcarriers + sc];
            set_plane(in.raw_channel, sym, sc, y / x);
            set_plane(in.tx_pilots, sym, sc, x);
        }
    }
    return in;
}

NeuralReceiver::NeuralReceiver(const GridSpec& spec, std::uint64_t init_seed, int channels, int blocks)
    : spec_(spec), masks_(extract_masks(spec)) {
    model_.add(std::make_unique<nn::Conv2dT<float>>(channels, 3));
    model_.add(std::make_unique<nn::ReluT<float>>());
    for (int i = 0; i < blocks; ++i) model_.add(std::make_unique<nn::ResidualConv2dT<float>>(channels, 3));
    model_.add(std::make_unique<nn::Conv2dT<float>>(kLlrSlots, 3));
    model_.build({6, spec.n_symbols, spec.n_subcarriers}, init_seed);
}

RxOutput NeuralReceiver::forward(const RxInput& input) {
    nn::Tensor x = input.to_model_input();
    std::vector<long> batched = x.shape;
    batched.insert(batched.begin(), 1);
    nn::Tensor y = model_.forward(x.reshaped(batched));  // (1, 8, 14, 72)

    RxOutput out;
    const long n_sym = spec_.n_symbols;
    const long n_sc = spec_.n_subcarriers;
    out.llrs_raw = nn::Tensor({n_sym, n_sc, kLlrSlots});
    for (long s = 0; s < n_sym; ++s)
        for (long c = 0; c < n_sc; ++c)
            for (int b = 0; b < kLlrSlots; ++b)
                out.llrs_raw.v[std::size_t((s * n_sc + c) * kLlrSlots + b)] =
                    y.v[std::size_t((b * n_sym + s) * n_sc + c)];

    out.llrs_valid.reserve(std::size_t(spec_.bits_per_subframe()));
    for (long s = 0; s < n_sym; ++s)
        for (long c = 0; c < n_sc; ++c) {
            if (!masks_.is_data(int(s), int(c))) continue;
            for (int b = 0; b < spec_.bits_per_symbol; ++b)
                out.llrs_valid.push_back(out.llrs_raw.v[std::size_t((s * n_sc + c) * kLlrSlots + b)]);
        }
    return out;
}

SoftBitBlock NeuralReceiver::decode_frame(std::span<const cf32> rx_grid, const PilotTable& pilots) {
    const long per_subframe = spec_.res_per_subframe();
    if (long(rx_grid.size()) != per_subframe * spec_.n_subframes_per_frame)
        throw std::invalid_argument("decode_frame: frame size mismatch");
    SoftBitBlock block;
    block.llrs.reserve(std::size_t(spec_.bits_per_frame()));
    for (int sf = 0; sf < spec_.n_subframes_per_frame; ++sf) {
        RxInput in = build_rx_input(rx_grid.subspan(std::size_t(sf) * per_subframe, std::size_t(per_subframe)),
                                    pilots, sf);
        RxOutput out = forward(in);
        block.llrs.insert(block.llrs.end(), out.llrs_valid.begin(), out.llrs_valid.end());
    }
    return block;
}

std::vector<double> NeuralReceiver::train(const std::vector<RxInput>& inputs,
                                          const std::vector<std::vector<std::uint8_t>>& subframe_bits,
                                          const NeuralRxTrainSettings& settings) {
    if (inputs.size() != subframe_bits.size()) throw std::invalid_argument("train: labels do not align with inputs");
    const long n_sym = spec_.n_symbols;
    const long n_sc = spec_.n_subcarriers;

    // shared valid-slot mask in model output layout (8, 14, 72)
    nn::Tensor mask({kLlrSlots, n_sym, n_sc});
    for (long s = 0; s < n_sym; ++s)
        for (long c = 0; c < n_sc; ++c)
            if (masks_.is_data(int(s), int(c)))
                for (int b = 0; b < spec_.bits_per_symbol; ++b)
                    mask.v[std::size_t((b * n_sym + s) * n_sc + c)] = 1.f;

    std::vector<nn::Tensor> xs, ts, ms;
    xs.reserve(inputs.size());
    ts.reserve(inputs.size());
    ms.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (long(subframe_bits[i].size()) != spec_.bits_per_subframe())
            throw std::invalid_argument("train: bit labels have the wrong length");
        xs.push_back(inputs[i].to_model_input());
        nn::Tensor t({kLlrSlots, n_sym, n_sc});
        std::size_t bit = 0;
        for (long s = 0; s < n_sym; ++s)
            for (long c = 0; c < n_sc; ++c) {
                if (!masks_.is_data(int(s), int(c))) continue;
                for (int b = 0; b < spec_.bits_per_symbol; ++b)
                    t.v[std::size_t((b * n_sym + s) * n_sc + c)] = float(subframe_bits[i][bit++]);
            }
        ts.push_back(std::move(t));
        ms.push_back(mask);
    }

    // The model emits LLR = ln(P0/P1); BCE consumes P(bit=1) logits, which is
    // the negated LLR. Wrap the training step so targets stay plain bits.
    nn::TrainSettings s;
    s.epochs = settings.epochs;
    s.batch_size = settings.batch_size;
    s.learning_rate = settings.learning_rate;
    s.momentum = settings.momentum;
    s.seed = settings.seed;
    s.samples_per_epoch = settings.samples_per_epoch;

    // invert targets instead of outputs: BCE(-z, b) == BCE(z, 1-b)
    for (auto& t : ts)
        for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] = 1.f - t.v[i];

    return nn::train_supervised(model_, xs, ts, &ms, s);
}

void NeuralReceiver::save(const std::string& path) { nn::save_checkpoint(path, model_); }
void NeuralReceiver::load(const std::string& path) { nn::load_checkpoint(path, model_); }

}  // namespace veritas
