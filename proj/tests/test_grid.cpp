#include <doctest.h>

#include <cmath>
#include <set>

#include "veritas/grid.hpp"
#include "veritas/rng.hpp"

using namespace veritas;

TEST_SUITE("grid") {

TEST_CASE("pilot sequence is deterministic and QPSK") {
    const GridSpec spec = GridSpec::with_pattern(PilotPattern::C);
    const PilotTable a = make_pilot_sequence(spec, 7);
    const PilotTable b = make_pilot_sequence(spec, 7);
    CHECK(a.symbols == b.symbols);
    CHECK(a.symbols.size() == 10 * 3 * 36);
    for (const cf32 s : a.symbols) CHECK(std::abs(s) == doctest::Approx(1.0).epsilon(1e-6));

    const PilotTable c = make_pilot_sequence(spec, 8);
    CHECK(a.symbols != c.symbols);
}

TEST_CASE("pattern (c) has 108 pilot REs per subframe") {
    const GridSpec spec = GridSpec::with_pattern(PilotPattern::C);
    CHECK(spec.pilot_res_per_subframe() == 108);
    CHECK(extract_masks(spec).pilot_count() == 108);
    CHECK(spec.data_res_per_subframe() == 900);
}

TEST_CASE("16QAM mapping basics") {
    SUBCASE("constant input maps to one point") {
        std::vector<std::uint8_t> bits(32, 0);
        const auto symbols = map_bits_16qam(bits);
        for (const cf32 s : symbols) CHECK(s == symbols[0]);
    }
    SUBCASE("unit mean energy over the full constellation") {
        // independent enumeration of all 16 labels
        double energy = 0.0;
        for (int idx = 0; idx < 16; ++idx)
            energy += std::norm(map_16qam_point(idx >> 3 & 1, idx >> 2 & 1, idx >> 1 & 1, idx & 1));
        CHECK(std::abs(energy / 16.0 - 1.0) <= 1e-12);
    }
    SUBCASE("map/demap round trip for all 16 groups") {
        std::vector<std::uint8_t> bits;
        for (int idx = 0; idx < 16; ++idx)
            for (int b = 3; b >= 0; --b) bits.push_back(std::uint8_t((idx >> b) & 1));
        const auto symbols = map_bits_16qam(bits);
        CHECK(demap_16qam_hard(symbols) == bits);
    }
    SUBCASE("length not divisible by four is rejected") {
        std::vector<std::uint8_t> bits(5, 0);
        CHECK_THROWS_AS((void)map_bits_16qam(bits), std::invalid_argument);
    }
}

TEST_CASE("frame construction") {
    const GridSpec spec = GridSpec::with_pattern(PilotPattern::C);
    const PilotTable pilots = make_pilot_sequence(spec, 42);
    const TxFrame frame = build_tx_frame(spec, 1, pilots);
    CHECK(frame.payload_bits.size() == 36000);
    CHECK(frame.subframes.size() == 10);

    SUBCASE("different seeds change payloads but not pilots") {
        const TxFrame other = build_tx_frame(spec, 2, pilots);
        CHECK(frame.payload_bits != other.payload_bits);
        for (int sf = 0; sf < 10; ++sf)
            for (int ps = 0; ps < spec.n_pilot_symbols(); ++ps)
                for (int pc = 0; pc < spec.n_pilot_subcarriers(); ++pc) {
                    const int sym = spec.pilot_symbol_indices[std::size_t(ps)];
                    const int sc = spec.pilot_subcarrier_indices[std::size_t(pc)];
                    CHECK(frame.subframes[std::size_t(sf)].at(sym, sc) ==
                          other.subframes[std::size_t(sf)].at(sym, sc));
                }
    }
}

TEST_CASE("pattern (a) leaves 972 data REs per subframe") {
    const GridSpec spec = GridSpec::with_pattern(PilotPattern::A);
    CHECK(spec.data_res_per_subframe() == 972);
    const PilotTable pilots = make_pilot_sequence(spec, 42);
    const TxFrame frame = build_tx_frame(spec, 1, pilots);
    CHECK(frame.payload_bits.size() == std::size_t(972 * 4 * 10));
}

TEST_CASE("masks partition the grid for every pattern") {
    for (PilotPattern p : {PilotPattern::A, PilotPattern::B, PilotPattern::C, PilotPattern::D}) {
        const GridSpec spec = GridSpec::with_pattern(p);
        const Masks m = extract_masks(spec);
        for (int sym = 0; sym < spec.n_symbols; ++sym)
            for (int sc = 0; sc < spec.n_subcarriers; ++sc) {
                CHECK((m.is_pilot(sym, sc) && m.is_data(sym, sc)) == false);
                CHECK((m.is_pilot(sym, sc) || m.is_data(sym, sc)) == true);
            }
        CHECK(m.pilot_count() == spec.pilot_res_per_subframe());
        CHECK(spec.bits_per_frame() == spec.data_res_per_subframe() * spec.bits_per_symbol * 10);
    }
}

TEST_CASE("map/demap identity survives random payloads") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint8_t> bits(400);
        for (auto& b : bits) b = std::uint8_t(rng.bit());
        CHECK(demap_16qam_hard(map_bits_16qam(bits)) == bits);
    }
}

TEST_CASE("invalid specs are rejected") {
    GridSpec spec = GridSpec::with_pattern(PilotPattern::C);
    spec.pilot_symbol_indices.push_back(14);
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = GridSpec::with_pattern(PilotPattern::C);
    spec.pilot_subcarrier_indices[1] = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

}  // TEST_SUITE
