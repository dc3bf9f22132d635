#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "veritas/harness.hpp"
#include "veritas/rng.hpp"

namespace veritas {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string pattern_to_string(PilotPattern p) {
    switch (p) {
        case PilotPattern::A: return "a";
        case PilotPattern::B: return "b";
        case PilotPattern::C: return "c";
        case PilotPattern::D: return "d";
    }
    throw std::invalid_argument("unknown pilot pattern");
}

PilotPattern pattern_from_string(const std::string& s) {
    if (s == "a") return PilotPattern::A;
    if (s == "b") return PilotPattern::B;
    if (s == "c") return PilotPattern::C;
    if (s == "d") return PilotPattern::D;
    throw std::invalid_argument("unknown pilot pattern: " + s);
}

std::string trim_zeros(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

json triple_to_json(const ConfigTriple& t) {
    return json{{"profile", profile_to_string(t.profile)},
                {"speed_mps", t.speed_mps},
                {"delay_spread_ns", t.delay_spread_ns}};
}

ConfigTriple triple_from_json(const json& j) {
    ConfigTriple t;
    t.profile = profile_from_string(j.at("profile").get<std::string>());
    t.speed_mps = j.at("speed_mps").get<double>();
    t.delay_spread_ns = j.at("delay_spread_ns").get<double>();
    return t;
}

void write_raw(const fs::path& path, const void* data, std::size_t bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("dataset: cannot open " + path.string() + " for writing");
    os.write(static_cast<const char*>(data), long(bytes));
    if (!os) throw std::runtime_error("dataset: write failed for " + path.string());
}

std::vector<char> read_raw(const fs::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw std::runtime_error("dataset: cannot open " + path.string());
    const std::streamsize size = is.tellg();
    is.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(size));
    is.read(buf.data(), size);
    if (!is) throw std::runtime_error("dataset: read failed for " + path.string());
    return buf;
}

struct StageSpec {
    const char* name;
    const char* datatype;
};

constexpr StageSpec kStages[] = {
    {"tx_bits", "u8"},
    {"tx_grid", "cf32_le"},
    {"rx_grid", "cf32_le"},
};

std::string group_stem(const DatasetGroup& g, const char* stage) {
    std::ostringstream os;
    os << g.triple.str() << "__ebn0_" << trim_zeros(g.ebn0_db) << "__" << stage;
    return os.str();
}

}  // namespace

std::string ConfigTriple::str() const {
    std::ostringstream os;
    os << profile_to_string(profile) << "_s" << trim_zeros(speed_mps) << "_ds" << trim_zeros(delay_spread_ns);
    return os.str();
}

void Ebn0Sweep::validate() const {
    if (step_db <= 0) throw std::invalid_argument("Ebn0Sweep: step must be > 0");
    if (stop_db < start_db) throw std::invalid_argument("Ebn0Sweep: stop must be >= start");
}

std::vector<double> Ebn0Sweep::levels() const {
    validate();
    std::vector<double> out;
    for (double v = start_db; v <= stop_db + 1e-9; v += step_db) out.push_back(v);
    return out;
}

void ExperimentConfig::validate() const {
    ebn0.validate();
    if (train_frames_per_ebn0 < 1 || test_frames_per_ebn0 < 1)
        throw std::invalid_argument("ExperimentConfig: frames per Eb/N0 must be >= 1");
    if (train_triples.empty()) throw std::invalid_argument("ExperimentConfig: no training triples");
    for (const auto& t : train_triples)
        if (t.speed_mps < 0 || t.delay_spread_ns <= 0) throw std::invalid_argument("ExperimentConfig: bad triple");
    for (const auto& t : test_triples)
        if (t.speed_mps < 0 || t.delay_spread_ns <= 0) throw std::invalid_argument("ExperimentConfig: bad triple");
    grid_spec().validate();
}

json ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["pilot_seed"] = pilot_seed;
    j["pattern"] = pattern_to_string(pattern);
    j["carrier_hz"] = carrier_hz;
    j["subcarrier_spacing_hz"] = subcarrier_spacing_hz;
    j["train_triples"] = json::array();
    for (const auto& t : train_triples) j["train_triples"].push_back(triple_to_json(t));
    j["test_triples"] = json::array();
    for (const auto& t : test_triples) j["test_triples"].push_back(triple_to_json(t));
    j["ebn0"] = {{"start_db", ebn0.start_db}, {"stop_db", ebn0.stop_db}, {"step_db", ebn0.step_db}};
    j["frames_per_ebn0"] = {{"train", train_frames_per_ebn0}, {"test", test_frames_per_ebn0}};
    j["monitor"] = {{"k", monitor.k},
                    {"lambda", monitor.lambda},
                    {"margin", monitor.margin},
                    {"epochs", monitor.epochs},
                    {"batch_triplets", monitor.batch_triplets},
                    {"learning_rate", monitor.learning_rate},
                    {"momentum", monitor.momentum},
                    {"triplets_per_epoch", monitor.triplets_per_epoch},
                    {"feature_dim", monitor.encoder.feature_dim},
                    {"conv_channels", monitor.encoder.conv_channels},
                    {"residual_channels", monitor.encoder.residual_channels},
                    {"dropout", monitor.encoder.dropout}};
    j["ood_k_values"] = ood_k_values;
    j["consecutive_ood"] = consecutive_ood;
    j["window_frames"] = window_frames;
    j["comparator_window"] = comparator_window;
    j["neuralrx"] = {{"epochs", neuralrx.epochs},
                     {"batch_size", neuralrx.batch_size},
                     {"learning_rate", neuralrx.learning_rate},
                     {"momentum", neuralrx.momentum},
                     {"samples_per_epoch", neuralrx.samples_per_epoch},
                     {"channels", rx_channels},
                     {"blocks", rx_blocks}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    c.seed = j.value("seed", std::uint64_t(1));
    c.pilot_seed = j.value("pilot_seed", std::uint64_t(42));
    c.pattern = pattern_from_string(j.value("pattern", std::string("c")));
    c.carrier_hz = j.value("carrier_hz", 3.5e9);
    c.subcarrier_spacing_hz = j.value("subcarrier_spacing_hz", 15e3);
    for (const auto& t : j.value("train_triples", json::array())) c.train_triples.push_back(triple_from_json(t));
    for (const auto& t : j.value("test_triples", json::array())) c.test_triples.push_back(triple_from_json(t));
    if (j.contains("ebn0")) {
        c.ebn0.start_db = j["ebn0"].value("start_db", 0.0);
        c.ebn0.stop_db = j["ebn0"].value("stop_db", 20.0);
        c.ebn0.step_db = j["ebn0"].value("step_db", 2.0);
    }
    if (j.contains("frames_per_ebn0")) {
        c.train_frames_per_ebn0 = j["frames_per_ebn0"].value("train", 200);
        c.test_frames_per_ebn0 = j["frames_per_ebn0"].value("test", 50);
    }
    if (j.contains("monitor")) {
        const auto& m = j["monitor"];
        c.monitor.k = m.value("k", 5);
        c.monitor.lambda = m.value("lambda", 0.95);
        c.monitor.margin = m.value("margin", 0.2);
        c.monitor.epochs = m.value("epochs", 100);
        c.monitor.batch_triplets = m.value("batch_triplets", 32);
        c.monitor.learning_rate = m.value("learning_rate", 1e-3);
        c.monitor.momentum = m.value("momentum", 0.9);
        c.monitor.triplets_per_epoch = m.value("triplets_per_epoch", 0L);
        c.monitor.encoder.feature_dim = m.value("feature_dim", 512);
        c.monitor.encoder.conv_channels = m.value("conv_channels", 16);
        c.monitor.encoder.residual_channels = m.value("residual_channels", 32);
        c.monitor.encoder.dropout = m.value("dropout", 0.1);
    }
    c.monitor.seed = c.seed;
    if (j.contains("ood_k_values")) c.ood_k_values = j["ood_k_values"].get<std::vector<int>>();
    c.consecutive_ood = j.value("consecutive_ood", 1);
    c.window_frames = j.value("window_frames", 50);
    c.comparator_window = j.value("comparator_window", 1);
    if (j.contains("neuralrx")) {
        const auto& n = j["neuralrx"];
        c.neuralrx.epochs = n.value("epochs", 8);
        c.neuralrx.batch_size = n.value("batch_size", 12);
        c.neuralrx.learning_rate = n.value("learning_rate", 0.15);
        c.neuralrx.momentum = n.value("momentum", 0.9);
        c.neuralrx.samples_per_epoch = n.value("samples_per_epoch", 0L);
        c.rx_channels = n.value("channels", 32);
        c.rx_blocks = n.value("blocks", 3);
    }
    c.neuralrx.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    json j;
    is >> j;
    return from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("config: cannot open " + path + " for writing");
    os << to_json().dump(2) << "\n";
}

long RecordedDataset::total_frames() const {
    long n = 0;
    for (const auto& g : groups) n += long(g.frames.size());
    return n;
}

FrameRecord simulate_frame(const GridSpec& spec, const PilotTable& pilots, const ConfigTriple& triple,
                           double ebn0_db, const ExperimentConfig& cfg, std::uint64_t channel_seed,
                           long frame_index) {
    ChannelConfig ch;
    ch.profile = triple.profile;
    ch.speed_mps = triple.speed_mps;
    ch.delay_spread_ns = triple.delay_spread_ns;
    ch.ebn0_db = ebn0_db;
    ch.carrier_hz = cfg.carrier_hz;
    ch.subcarrier_spacing_hz = cfg.subcarrier_spacing_hz;
    ch.seed = channel_seed;

    FrameRecord rec;
    rec.frame_index = frame_index;
    rec.triple = triple;
    rec.ebn0_db = ebn0_db;
    rec.frame_seed = derive_seed(channel_seed, 0xf000 + std::uint64_t(frame_index));

    const TapSet taps = make_tapset(triple.profile, triple.delay_spread_ns);
    const TxFrame tx = build_tx_frame(spec, rec.frame_seed, pilots);
    const ChannelRealization h = realize_channel(taps, ch, frame_index);
    const std::vector<cf32> faded = apply_channel(tx, h);
    AwgnResult noisy = add_awgn(faded, ebn0_db, spec.bits_per_symbol, rec.frame_seed);

    rec.tx_bits = tx.payload_bits;
    rec.tx_grid = tx.full_grid();
    rec.rx_grid = std::move(noisy.grid);
    rec.noise_variance = noisy.noise_variance;
    return rec;
}

RecordedDataset generate_dataset(const ExperimentConfig& cfg, DatasetSplit split) {
    cfg.validate();
    const GridSpec spec = cfg.grid_spec();
    const PilotTable pilots = make_pilot_sequence(spec, cfg.pilot_seed);
    const auto& triples = split == DatasetSplit::Train ? cfg.train_triples : cfg.test_triples;
    const int frames = split == DatasetSplit::Train ? cfg.train_frames_per_ebn0 : cfg.test_frames_per_ebn0;
    const std::uint64_t split_tag = split == DatasetSplit::Train ? 0x7472ULL : 0x7465ULL;

    RecordedDataset data;
    data.pattern = cfg.pattern;
    data.pilot_seed = cfg.pilot_seed;
    data.carrier_hz = cfg.carrier_hz;
    data.subcarrier_spacing_hz = cfg.subcarrier_spacing_hz;

    for (std::size_t ti = 0; ti < triples.size(); ++ti) {
        for (double ebn0 : cfg.ebn0.levels()) {
            DatasetGroup group;
            group.triple = triples[ti];
            group.ebn0_db = ebn0;
            group.channel_seed =
                derive_seed(derive_seed(cfg.seed, split_tag), (ti << 20) ^ std::uint64_t(long(ebn0 * 16 + 4096)));
            group.frames.resize(std::size_t(frames));
#pragma omp parallel for schedule(dynamic)
            for (int f = 0; f < frames; ++f) {
                group.frames[std::size_t(f)] =
                    simulate_frame(spec, pilots, group.triple, ebn0, cfg, group.channel_seed, f);
            }
            data.groups.push_back(std::move(group));
        }
    }
    return data;
}

void RecordedDataset::save(const std::string& dir) const {
    fs::create_directories(dir);
    const GridSpec spec = grid_spec();

    json top;
    top["pattern"] = pattern_to_string(pattern);
    top["pilot_seed"] = pilot_seed;
    top["carrier_hz"] = carrier_hz;
    top["subcarrier_spacing_hz"] = subcarrier_spacing_hz;
    top["groups"] = json::array();

    for (const auto& g : groups) {
        json gj;
        gj["triple"] = triple_to_json(g.triple);
        gj["ebn0_db"] = g.ebn0_db;
        gj["channel_seed"] = g.channel_seed;
        gj["n_frames"] = g.frames.size();
        top["groups"].push_back(gj);

        for (const auto& stage : kStages) {
            const std::string stem = group_stem(g, stage.name);
            json meta;
            meta["global"]["core:datatype"] = stage.datatype;
            meta["global"]["core:version"] = "1.0.0";
            meta["global"]["core:description"] = std::string("stage ") + stage.name + " for " + g.triple.str();
            meta["global"]["veritas:stage"] = stage.name;
            meta["global"]["veritas:profile"] = profile_to_string(g.triple.profile);
            meta["global"]["veritas:speed_mps"] = g.triple.speed_mps;
            meta["global"]["veritas:delay_spread_ns"] = g.triple.delay_spread_ns;
            meta["global"]["veritas:ebn0_db"] = g.ebn0_db;
            meta["global"]["veritas:n_frames"] = g.frames.size();
            meta["global"]["veritas:channel_seed"] = g.channel_seed;

            long samples_per_frame = 0;
            if (std::string(stage.name) == "tx_bits") {
                samples_per_frame = spec.bits_per_frame();
            } else {
                samples_per_frame = long(spec.symbols_per_frame()) * spec.n_subcarriers;
            }
            meta["global"]["veritas:samples_per_frame"] = samples_per_frame;

            json vars = json::array();
            json seeds = json::array();
            json annotations = json::array();
            for (const auto& fr : g.frames) {
                vars.push_back(fr.noise_variance);
                seeds.push_back(fr.frame_seed);
                annotations.push_back(json{{"core:sample_start", fr.frame_index * samples_per_frame},
                                           {"core:sample_count", samples_per_frame},
                                           {"veritas:frame_index", fr.frame_index}});
            }
            meta["global"]["veritas:noise_variance"] = vars;
            meta["global"]["veritas:frame_seeds"] = seeds;
            meta["captures"] = json::array({json{{"core:sample_start", 0}}});
            meta["annotations"] = annotations;

            std::ofstream ms(fs::path(dir) / (stem + ".sigmf-meta"));
            if (!ms) throw std::runtime_error("dataset: cannot write metadata for " + stem);
            ms << meta.dump(2) << "\n";

            if (std::string(stage.name) == "tx_bits") {
                std::vector<std::uint8_t> buf;
                for (const auto& fr : g.frames) buf.insert(buf.end(), fr.tx_bits.begin(), fr.tx_bits.end());
                write_raw(fs::path(dir) / (stem + ".sigmf-data"), buf.data(), buf.size());
            } else {
                std::vector<cf32> buf;
                for (const auto& fr : g.frames) {
                    const auto& grid = std::string(stage.name) == "tx_grid" ? fr.tx_grid : fr.rx_grid;
                    buf.insert(buf.end(), grid.begin(), grid.end());
                }
                write_raw(fs::path(dir) / (stem + ".sigmf-data"), buf.data(), buf.size() * sizeof(cf32));
            }
        }
    }

    std::ofstream os(fs::path(dir) / "dataset.json");
    if (!os) throw std::runtime_error("dataset: cannot write dataset.json");
    os << top.dump(2) << "\n";
}

RecordedDataset RecordedDataset::load(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "dataset.json");
    if (!is) throw std::runtime_error("dataset: cannot open " + dir + "/dataset.json");
    json top;
    is >> top;

    RecordedDataset data;
    data.pattern = pattern_from_string(top.at("pattern").get<std::string>());
    data.pilot_seed = top.at("pilot_seed").get<std::uint64_t>();
    data.carrier_hz = top.value("carrier_hz", 3.5e9);
    data.subcarrier_spacing_hz = top.value("subcarrier_spacing_hz", 15e3);
    const GridSpec spec = data.grid_spec();
    const long grid_samples = long(spec.symbols_per_frame()) * spec.n_subcarriers;

    for (const auto& gj : top.at("groups")) {
        DatasetGroup g;
        g.triple = triple_from_json(gj.at("triple"));
        g.ebn0_db = gj.at("ebn0_db").get<double>();
        g.channel_seed = gj.at("channel_seed").get<std::uint64_t>();
        const long n_frames = gj.at("n_frames").get<long>();
        g.frames.resize(std::size_t(n_frames));

        std::ifstream ms(fs::path(dir) / (group_stem(g, "tx_bits") + ".sigmf-meta"));
        if (!ms) throw std::runtime_error("dataset: missing metadata for " + g.triple.str());
        json meta;
        ms >> meta;
        const auto& vars = meta["global"]["veritas:noise_variance"];
        const auto& seeds = meta["global"]["veritas:frame_seeds"];

        const auto bits = read_raw(fs::path(dir) / (group_stem(g, "tx_bits") + ".sigmf-data"));
        const auto txg = read_raw(fs::path(dir) / (group_stem(g, "tx_grid") + ".sigmf-data"));
        const auto rxg = read_raw(fs::path(dir) / (group_stem(g, "rx_grid") + ".sigmf-data"));
        if (long(bits.size()) != n_frames * spec.bits_per_frame() ||
            long(txg.size()) != n_frames * grid_samples * long(sizeof(cf32)) ||
            long(rxg.size()) != n_frames * grid_samples * long(sizeof(cf32)))
            throw std::runtime_error("dataset: sample count does not match metadata for " + g.triple.str());

        for (long f = 0; f < n_frames; ++f) {
            FrameRecord& fr = g.frames[std::size_t(f)];
            fr.frame_index = f;
            fr.triple = g.triple;
            fr.ebn0_db = g.ebn0_db;
            fr.noise_variance = vars[std::size_t(f)].get<double>();
            fr.frame_seed = seeds[std::size_t(f)].get<std::uint64_t>();
            fr.tx_bits.assign(bits.begin() + f * spec.bits_per_frame(),
                              bits.begin() + (f + 1) * spec.bits_per_frame());
            const cf32* tx = reinterpret_cast<const cf32*>(txg.data()) + f * grid_samples;
            const cf32* rx = reinterpret_cast<const cf32*>(rxg.data()) + f * grid_samples;
            fr.tx_grid.assign(tx, tx + grid_samples);
            fr.rx_grid.assign(rx, rx + grid_samples);
        }
        data.groups.push_back(std::move(g));
    }
    return data;
}

}  // namespace veritas
