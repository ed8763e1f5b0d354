#pragma once

#include <cstdint>
#include <string>

#include "pimnet/scenario.hpp"
#include "pimnet/signal.hpp"

namespace pimnet::sim {

struct DatasetSpec {
    CarrierPlan plan;
    PimScenario scenario;
    std::size_t train_length = 30000;
    std::size_t test_length = 30000;
    std::uint64_t seed = 1;
};

/// Transmit signal and its PIM for one split.
struct SplitData {
    ComplexSignal tx;
    ComplexSignal pim;
};

struct Dataset {
    DatasetSpec spec;
    SplitData train;
    SplitData test;
};

/// Deterministic synthesis: train and test use independent symbol seeds; the
/// test split continues in time after the training split (t0 = train_length),
/// which matters for drifting scenarios.
Dataset synthesize(const DatasetSpec& spec);

/// Per-split manifest; the two manifests differ only in "split".
std::string manifest_json(const DatasetSpec& spec, const std::string& split);
DatasetSpec spec_from_manifest(const std::string& json);

struct DatasetFiles {
    std::string train_tx, train_pim, test_tx, test_pim, train_manifest, test_manifest;
};

DatasetFiles dataset_paths(const std::string& dir);

/// Writes <dir>/{train,test}_{tx,pim}.pims and <dir>/{train,test}.manifest.json.
DatasetFiles write_dataset(const Dataset& data, const std::string& dir);
DatasetFiles make_dataset(const DatasetSpec& spec, const std::string& dir);
/// Loads all four signals and checks headers against the manifest.
Dataset load_dataset(const std::string& dir);

/// Keys understood by dataset_spec_from_config (in addition to scenario keys).
const std::vector<std::string>& dataset_config_keys();
DatasetSpec dataset_spec_from_config(const KeyValueConfig& cfg);

} // namespace pimnet::sim
