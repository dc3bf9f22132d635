#include "veritas/comparator.hpp"

#include <cmath>
#include <stdexcept>

namespace veritas {

ProbabilityBlock llr_to_prob(const SoftBitBlock& block) {
    ProbabilityBlock out;
    out.probs.resize(block.llrs.size());
    for (std::size_t i = 0; i < block.llrs.size(); ++i) {
        const double llr = block.llrs[i];
        if (!std::isfinite(llr)) throw std::invalid_argument("llr_to_prob: non-finite LLR");
        out.probs[i] = 1.0 / (1.0 + std::exp(llr));
    }
    return out;
}

long HistogramBins::total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
}

HistogramBins bin_probabilities(const ProbabilityBlock& probs) {
    HistogramBins bins;
    for (double p : probs.probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bin_probabilities: probability outside [0,1]");
        const int b = p >= 1.0 ? 9 : int(p * 10.0);
        ++bins.counts[std::size_t(b)];
    }
    return bins;
}

long uncertainty_count(const HistogramBins& bins) { return bins.total() - bins.counts[0] - bins.counts[9]; }

ComparatorDecision compare(const SoftBitBlock& neural, const SoftBitBlock& trad) {
    if (neural.llrs.size() != trad.llrs.size()) throw std::invalid_argument("compare: block length mismatch");
    ComparatorDecision d;
    d.u_neural = uncertainty_count(bin_probabilities(llr_to_prob(neural)));
    d.u_trad = uncertainty_count(bin_probabilities(llr_to_prob(trad)));
    d.retraining = d.u_neural <= d.u_trad ? Retraining::NotNeeded : Retraining::Needed;
    return d;
}

double comparator_accuracy(std::span<const ComparatorDecision> decisions, std::span<const FrameBerPair> true_bers) {
    if (decisions.size() != true_bers.size()) throw std::invalid_argument("comparator_accuracy: misaligned inputs");
    if (decisions.empty()) throw std::invalid_argument("comparator_accuracy: no decisions");
    long correct = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const bool worse = true_bers[i].ber_neural > true_bers[i].ber_trad;
        const bool flagged = decisions[i].retraining == Retraining::Needed;
        correct += flagged == worse;
    }
    return double(correct) / double(decisions.size());
}

}  // namespace veritas
