#pragma once

#include <map>
#include <optional>
#include <string>

namespace ood {

/// Run configuration parsed from a plain key=value file ('#' starts a
/// comment). Unknown keys are rejected; every key has a default. See
/// README for the full key list.
struct RunConfig {
    std::string train_data;
    std::string id_data;
    std::string test_id_data;
    std::string test_ood_data;
    std::string data;
    std::string checkpoint;
    std::string strategy = "center";
    std::string out = "out";

    int k_mixture = 10;
    double lambda = 0.8;
    double lr = 1e-5;
    int batch_size = 64;
    int epochs = 30;
    std::uint64_t seed = 0;
    bool early_stop = true;

    int group_size = 10;
    std::optional<double> threshold;
    int trials = 5;
    int testset_draws = 2;

    int bins = 32;
    double alpha = 1.0;
    bool oracle = false;
};

/// Throws std::invalid_argument on unknown keys or malformed values.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Command entry points. Return process exit codes: 0 success, 2 config or
/// input error, 3 training divergence.
int cmd_train(const RunConfig& cfg);
int cmd_score(const RunConfig& cfg);
int cmd_detect(const RunConfig& cfg);
int cmd_entropy(const RunConfig& cfg);
int cmd_heatmap(const RunConfig& cfg);
int cmd_features(const RunConfig& cfg);
int cmd_synth(const RunConfig& cfg);

}  // namespace ood
