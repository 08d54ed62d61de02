#include "ood/cli.hpp"

#include "ood/detector.hpp"
#include "ood/entropy.hpp"
#include "ood/uen.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ood {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("expected boolean 0/1, got: " + v);
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "train_data") c.train_data = value;
        else if (key == "id_data") c.id_data = value;
        else if (key == "test_id_data") c.test_id_data = value;
        else if (key == "test_ood_data") c.test_ood_data = value;
        else if (key == "data") c.data = value;
        else if (key == "checkpoint") c.checkpoint = value;
        else if (key == "strategy") c.strategy = value;
        else if (key == "out") c.out = value;
        else if (key == "k_mixture") c.k_mixture = std::stoi(value);
        else if (key == "lambda") c.lambda = std::stod(value);
        else if (key == "lr") c.lr = std::stod(value);
        else if (key == "batch_size") c.batch_size = std::stoi(value);
        else if (key == "epochs") c.epochs = std::stoi(value);
        else if (key == "seed") c.seed = std::stoull(value);
        else if (key == "early_stop") c.early_stop = parse_bool(value);
        else if (key == "group_size") c.group_size = std::stoi(value);
        else if (key == "threshold") c.threshold = std::stod(value);
        else if (key == "trials") c.trials = std::stoi(value);
        else if (key == "testset_draws") c.testset_draws = std::stoi(value);
        else if (key == "bins") c.bins = std::stoi(value);
        else if (key == "alpha") c.alpha = std::stod(value);
        else if (key == "oracle") c.oracle = parse_bool(value);
        else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value for config key " + key + ": " + value);
    }
}

UenConfig uen_config(const RunConfig& c) {
    UenConfig u;
    u.k_mixture = c.k_mixture;
    u.lambda = c.lambda;
    u.lr = c.lr;
    u.batch_size = c.batch_size;
    u.epochs = c.epochs;
    u.seed = c.seed;
    u.strategy = c.strategy;
    u.early_stop = c.early_stop;
    return u;
}

fs::path ensure_out(const RunConfig& c) {
    fs::path dir(c.out);
    fs::create_directories(dir);
    return dir;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

void write_scores_csv(const fs::path& path, const std::vector<double>& scores,
                      const char* header) {
    std::ofstream out(path);
    out << "index," << header << "\n";
    for (std::size_t i = 0; i < scores.size(); ++i) out << i << "," << fmt(scores[i]) << "\n";
    if (!out) throw std::invalid_argument("cannot write " + path.string());
}

std::vector<double> pool_scores(const RunConfig& cfg, const std::string& uri,
                                const Checkpoint* ck) {
    ImageDataset ds = load_dataset(uri);
    auto variants = parse_strategy(cfg.strategy, ds.h, ds.w);
    if (cfg.oracle) {
        EntropyConfig ec{cfg.bins, cfg.alpha};
        return entropy_scores(ds, variants, ec);
    }
    return score_dataset(ck->weights, ds, variants);
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key=value: " + line);
        apply_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

int cmd_train(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.train_data.empty())
            throw std::invalid_argument("train_data must be set for the train command");
        ImageDataset ds = load_dataset(cfg.train_data);
        TrainResult result = train(uen_config(cfg), ds);
        fs::path dir = ensure_out(cfg);
        save_checkpoint(result.weights, uen_config(cfg), (dir / "checkpoint.uenc").string());
        std::ofstream log(dir / "loss.csv");
        log << "epoch,L_total,L_r,L_e\n";
        for (const EpochLoss& e : result.log)
            log << e.epoch << "," << fmt(e.total) << "," << fmt(e.rec) << "," << fmt(e.gen)
                << "\n";
        if (!log) throw std::invalid_argument("cannot write loss.csv");
    });
}

int cmd_score(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.data.empty())
            throw std::invalid_argument("data must be set for the score command");
        std::optional<Checkpoint> ck;
        if (!cfg.oracle) {
            if (cfg.checkpoint.empty())
                throw std::invalid_argument("score needs checkpoint= (or oracle=1)");
            ck = load_checkpoint(cfg.checkpoint);
        }
        std::vector<double> scores =
            pool_scores(cfg, cfg.data, ck ? &*ck : nullptr);
        write_scores_csv(ensure_out(cfg) / "scores.csv", scores,
                         cfg.oracle ? "entropy_bits" : "score");
    });
}

int cmd_detect(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.id_data.empty() || cfg.test_id_data.empty() || cfg.test_ood_data.empty())
            throw std::invalid_argument(
                "detect needs id_data, test_id_data and test_ood_data");
        if (cfg.group_size < 2) throw std::invalid_argument("group_size must be >= 2");
        std::optional<Checkpoint> ck;
        if (!cfg.oracle) {
            if (cfg.checkpoint.empty())
                throw std::invalid_argument("detect needs checkpoint= (or oracle=1)");
            ck = load_checkpoint(cfg.checkpoint);
        }
        const Checkpoint* ckp = ck ? &*ck : nullptr;
        std::vector<double> id_scores = pool_scores(cfg, cfg.id_data, ckp);
        std::vector<double> test_id = pool_scores(cfg, cfg.test_id_data, ckp);
        std::vector<double> test_ood = pool_scores(cfg, cfg.test_ood_data, ckp);

        DetectionConfig dc;
        dc.group_size = cfg.group_size;
        dc.threshold = cfg.threshold;
        dc.trials = cfg.trials;
        dc.testset_draws = cfg.testset_draws;
        dc.seed = cfg.seed;
        DetectionReport report = run_detection(id_scores, test_id, test_ood, dc);

        fs::path dir = ensure_out(cfg);
        std::ofstream csv(dir / "report.csv");
        csv << "trial,group,origin,kl,decision\n";
        for (const GroupResult& g : report.groups) {
            csv << g.trial << "," << g.group << "," << g.origin << "," << fmt(g.kl) << ",";
            if (g.decision >= 0) csv << g.decision;
            csv << "\n";
        }
        if (!csv) throw std::invalid_argument("cannot write report.csv");

        nlohmann::json j;
        j["group_size"] = dc.group_size;
        j["trials"] = dc.trials;
        j["testset_draws"] = dc.testset_draws;
        j["seed"] = dc.seed;
        j["scoring"] = cfg.oracle ? "entropy_oracle" : "uen_generation_loss";
        j["auroc"] = {{"mean", report.auroc_mean}, {"std", report.auroc_std}};
        j["aupr"] = {{"mean", report.aupr_mean}, {"std", report.aupr_std}};
        j["fpr_at_95tpr"] = {{"mean", report.fpr95_mean}, {"std", report.fpr95_std}};
        if (cfg.threshold) j["threshold"] = *cfg.threshold;
        std::ofstream txt(dir / "report.txt");
        txt << j.dump(2) << "\n";
        if (!txt) throw std::invalid_argument("cannot write report.txt");
    });
}

int cmd_entropy(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.data.empty())
            throw std::invalid_argument("data must be set for the entropy command");
        ImageDataset ds = load_dataset(cfg.data);
        auto variants = parse_strategy(cfg.strategy, ds.h, ds.w);
        EntropyConfig ec{cfg.bins, cfg.alpha};
        write_scores_csv(ensure_out(cfg) / "scores.csv", entropy_scores(ds, variants, ec),
                         "entropy_bits");
    });
}

int cmd_heatmap(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.data.empty() || cfg.checkpoint.empty())
            throw std::invalid_argument("heatmap needs data= and checkpoint=");
        ImageDataset ds = load_dataset(cfg.data);
        auto variants = parse_strategy(cfg.strategy, ds.h, ds.w);
        Checkpoint ck = load_checkpoint(cfg.checkpoint);
        std::vector<float> map = likelihood_heatmap(ck.weights, ds, variants);

        fs::path dir = ensure_out(cfg);
        // Float variant of the IMGB container: version 2, float-32 payload.
        std::ofstream bin(dir / "heatmap.imgb", std::ios::binary);
        bin.write("IMGB", 4);
        auto u32 = [&](std::uint32_t v) {
            unsigned char b[4] = {static_cast<unsigned char>(v),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
            bin.write(reinterpret_cast<char*>(b), 4);
        };
        u32(2);
        u32(1);
        u32(1);
        u32(static_cast<std::uint32_t>(ds.h));
        u32(static_cast<std::uint32_t>(ds.w));
        bin.write(reinterpret_cast<const char*>(map.data()),
                  static_cast<std::streamsize>(map.size() * sizeof(float)));
        if (!bin) throw std::invalid_argument("cannot write heatmap.imgb");

        std::ofstream csv(dir / "heatmap.csv");
        for (int y = 0; y < ds.h; ++y) {
            for (int x = 0; x < ds.w; ++x)
                csv << (x ? "," : "") << fmt(map[static_cast<std::size_t>(y) * ds.w + x]);
            csv << "\n";
        }
        if (!csv) throw std::invalid_argument("cannot write heatmap.csv");
    });
}

int cmd_features(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.data.empty() || cfg.checkpoint.empty())
            throw std::invalid_argument("features needs data= and checkpoint=");
        ImageDataset ds = load_dataset(cfg.data);
        auto variants = parse_strategy(cfg.strategy, ds.h, ds.w);
        Checkpoint ck = load_checkpoint(cfg.checkpoint);
        export_features(ck.weights, ds, variants,
                        (ensure_out(cfg) / "features.fmat").string());
    });
}

int cmd_synth(const RunConfig& cfg) {
    return guarded([&] {
        if (cfg.data.empty())
            throw std::invalid_argument("data must be set for the synth command");
        ImageDataset ds = load_dataset(cfg.data);
        save_imgb(ds, (ensure_out(cfg) / "dataset.imgb").string());
    });
}

}  // namespace ood
