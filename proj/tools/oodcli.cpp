#include "ood/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Group-based out-of-distribution detection pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "key=value config file");
        sub->add_option("--out", out_override, "output directory (overrides config)");
    };

    CLI::App* s_train = app.add_subcommand("train", "train the UEN on a dataset");
    CLI::App* s_score = app.add_subcommand("score", "per-sample generation-loss scores");
    CLI::App* s_detect = app.add_subcommand("detect", "grouped KDE+KL detection report");
    CLI::App* s_entropy = app.add_subcommand("entropy", "oracle conditional-entropy scores");
    CLI::App* s_heatmap = app.add_subcommand("heatmap", "dataset-mean likelihood heatmap");
    CLI::App* s_features = app.add_subcommand("features", "export raw Z feature vectors");
    CLI::App* s_synth = app.add_subcommand("synth", "materialize a dataset URI as IMGB");
    for (CLI::App* s :
         {s_train, s_score, s_detect, s_entropy, s_heatmap, s_features, s_synth})
        add_common(s);

    CLI11_PARSE(app, argc, argv);

    ood::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = ood::load_run_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (!out_override.empty()) cfg.out = out_override;

    if (s_train->parsed()) return ood::cmd_train(cfg);
    if (s_score->parsed()) return ood::cmd_score(cfg);
    if (s_detect->parsed()) return ood::cmd_detect(cfg);
    if (s_entropy->parsed()) return ood::cmd_entropy(cfg);
    if (s_heatmap->parsed()) return ood::cmd_heatmap(cfg);
    if (s_features->parsed()) return ood::cmd_features(cfg);
    if (s_synth->parsed()) return ood::cmd_synth(cfg);
    return 2;
}
