#include "pimnet/dataset.hpp"

#include <filesystem>

#include "json.hpp"
#include "pimnet/detail/binary.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/rng.hpp"

namespace pimnet::sim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;

std::uint64_t split_seed(const DatasetSpec& s, const std::string& split)
{
    return derive_seed(s.seed, split == "train" ? kTrainStream : kTestStream);
}

} // namespace

Dataset synthesize(const DatasetSpec& spec)
{
    spec.plan.validate();
    spec.scenario.validate();
    Dataset d;
    d.spec = spec;
    d.train.tx = generate_tx(spec.plan, spec.scenario.tx_antennas, spec.train_length, split_seed(spec, "train"));
    d.train.pim = apply_pim(d.train.tx, spec.scenario, 0);
    d.test.tx = generate_tx(spec.plan, spec.scenario.tx_antennas, spec.test_length, split_seed(spec, "test"));
    d.test.pim = apply_pim(d.test.tx, spec.scenario, spec.train_length);
    return d;
}

std::string manifest_json(const DatasetSpec& spec, const std::string& split)
{
    json j;
    j["format_version"] = 1;
    j["split"] = split;
    j["seed"] = spec.seed;
    j["train_length"] = spec.train_length;
    j["test_length"] = spec.test_length;
    j["plan"] = json::parse(plan_to_json(spec.plan));
    j["scenario"] = json::parse(spec.scenario.to_json());
    j["scenario_hash"] = spec.scenario.hash();
    return j.dump();
}

DatasetSpec spec_from_manifest(const std::string& text)
{
    try {
        const json j = json::parse(text);
        DatasetSpec s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.train_length = j.at("train_length").get<std::size_t>();
        s.test_length = j.at("test_length").get<std::size_t>();
        s.plan = plan_from_json(j.at("plan").dump());
        s.scenario = PimScenario::from_json(j.at("scenario").dump());
        if (s.scenario.hash() != j.at("scenario_hash").get<std::string>())
            throw IoError("manifest scenario_hash does not match its scenario");
        return s;
    } catch (const json::exception& e) {
        throw IoError(std::string("bad dataset manifest: ") + e.what());
    }
}

DatasetFiles dataset_paths(const std::string& dir)
{
    const std::filesystem::path p(dir);
    return {(p / "train_tx.pims").string(),     (p / "train_pim.pims").string(),
            (p / "test_tx.pims").string(),      (p / "test_pim.pims").string(),
            (p / "train.manifest.json").string(), (p / "test.manifest.json").string()};
}

DatasetFiles write_dataset(const Dataset& data, const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create dataset directory '" + dir + "': " + ec.message());
    const auto files = dataset_paths(dir);
    const std::string hash = data.spec.scenario.hash();
    const auto seed_train = split_seed(data.spec, "train");
    const auto seed_test = split_seed(data.spec, "test");
    save_pims(files.train_tx, data.train.tx, {"tx", hash, seed_train});
    save_pims(files.train_pim, data.train.pim, {"pim", hash, seed_train});
    save_pims(files.test_tx, data.test.tx, {"tx", hash, seed_test});
    save_pims(files.test_pim, data.test.pim, {"pim", hash, seed_test});
    detail::write_file(files.train_manifest, manifest_json(data.spec, "train") + "\n");
    detail::write_file(files.test_manifest, manifest_json(data.spec, "test") + "\n");
    return files;
}

DatasetFiles make_dataset(const DatasetSpec& spec, const std::string& dir)
{
    return write_dataset(synthesize(spec), dir);
}

Dataset load_dataset(const std::string& dir)
{
    const auto files = dataset_paths(dir);
    Dataset d;
    try {
        d.spec = spec_from_manifest(detail::read_file(files.train_manifest));
    } catch (const ConfigError& e) {
        throw IoError(files.train_manifest + ": " + e.what());
    }
    const std::string hash = d.spec.scenario.hash();
    auto load = [&](const std::string& path, const std::string& role, std::size_t antennas, std::size_t length) {
        SignalHeader h;
        ComplexSignal s = load_pims(path, &h);
        if (h.role != role || h.scenario_hash != hash || s.antennas != antennas || s.length != length)
            throw IoError(path + ": header does not match the dataset manifest");
        return s;
    };
    const auto& sc = d.spec.scenario;
    d.train.tx = load(files.train_tx, "tx", sc.tx_antennas, d.spec.train_length);
    d.train.pim = load(files.train_pim, "pim", sc.rx_antennas, d.spec.train_length);
    d.test.tx = load(files.test_tx, "tx", sc.tx_antennas, d.spec.test_length);
    d.test.pim = load(files.test_pim, "pim", sc.rx_antennas, d.spec.test_length);
    return d;
}

const std::vector<std::string>& dataset_config_keys()
{
    static const std::vector<std::string> keys{"train_length", "test_length", "seed"};
    return keys;
}

DatasetSpec dataset_spec_from_config(const KeyValueConfig& cfg)
{
    DatasetSpec s;
    s.plan = plan_from_config(cfg);
    s.scenario = scenario_from_config(cfg);
    const auto train = cfg.get_int("train_length", 30000);
    const auto test = cfg.get_int("test_length", 30000);
    if (train < static_cast<std::int64_t>(kOfdmSize) || test < static_cast<std::int64_t>(kOfdmSize))
        throw ConfigError(cfg.origin() + ": train_length and test_length must be >= " + std::to_string(kOfdmSize));
    s.train_length = static_cast<std::size_t>(train);
    s.test_length = static_cast<std::size_t>(test);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    return s;
}

} // namespace pimnet::sim
