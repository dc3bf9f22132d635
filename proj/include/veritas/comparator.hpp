#pragma once

#include <array>
#include <span>
#include <vector>

#include "veritas/tradrx.hpp"

namespace veritas {

// Bit probabilities P = 1 / (1 + e^LLR); computed in 64-bit so saturated
// LLRs land on stable bin edges.
struct ProbabilityBlock {
    std::vector<double> probs;
};

ProbabilityBlock llr_to_prob(const SoftBitBlock& block);

// Ten bins over [0,1]: [(b-1)/10, b/10) for b = 1..9 and [0.9, 1.0] for b=10.
struct HistogramBins {
    std::array<long, 10> counts{};
    long total() const;
};

// throws std::invalid_argument on a probability outside [0,1]
HistogramBins bin_probabilities(const ProbabilityBlock& probs);

// Uncertainty region count: bins 2 through 9.
long uncertainty_count(const HistogramBins& bins);

enum class Retraining { Needed, NotNeeded };

struct ComparatorDecision {
    long u_neural = 0;
    long u_trad = 0;
    Retraining retraining = Retraining::NotNeeded;
};

// Retraining is needed exactly when the neural receiver has the larger
// uncertainty count; ties resolve to not needed.
// throws std::invalid_argument on block length mismatch
ComparatorDecision compare(const SoftBitBlock& neural, const SoftBitBlock& trad);

struct FrameBerPair {
    double ber_neural = 0.0;
    double ber_trad = 0.0;
};

// Fraction of decisions that match the measured BER ordering: "needed" is
// correct when BER_neural > BER_trad, "not needed" when BER_neural <= BER_trad.
// throws std::invalid_argument when decisions and BER pairs misalign
double comparator_accuracy(std::span<const ComparatorDecision> decisions, std::span<const FrameBerPair> true_bers);

}  // namespace veritas
