// ddce: link-level simulation and estimator benchmarking for doubly
// dispersive vehicular channels. Subcommands: dataset | train | evaluate |
// simulate | complexity | plot.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddce/bench.hpp"
#include "ddce/complexity.hpp"
#include "ddce/errors.hpp"

namespace {

using namespace ddce;

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

bench::Scenario load_scenario(const std::string& config_path, std::uint64_t seed_override,
                              int frames_override, int workers_override) {
    bench::Scenario sc = bench::scenario_from_json_text(slurp(config_path));
    if (seed_override != 0) sc.seed = seed_override;
    if (frames_override > 0) sc.frames = frames_override;
    if (workers_override > 0) sc.workers = workers_override;
    return sc;
}

void print_report(const bench::MetricsReport& rep) {
    std::printf("%-18s %8s %12s %12s %8s\n", "estimator", "snr_db", "ber", "nmse", "frames");
    for (std::size_t e = 0; e < rep.estimators.size(); ++e)
        for (std::size_t s = 0; s < rep.snr_grid_db.size(); ++s) {
            const auto& c = rep.cells[e][s];
            std::printf("%-18s %8.1f %12.4e %12.4e %8ld\n", rep.estimators[e].c_str(),
                        rep.snr_grid_db[s], c.ber, c.nmse, c.frames);
        }
}

complexity::CostParams params_from_json(const std::string& path) {
    complexity::CostParams q;
    if (path.empty()) return q;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(slurp(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("params parse error: ") + e.what());
    }
    auto get = [&](const char* k, std::int64_t& v) {
        if (j.contains(k)) v = j[k].get<std::int64_t>();
    };
    get("k_on", q.k_on);
    get("k_d", q.k_d);
    get("k_p", q.k_p);
    get("k_int", q.k_int);
    get("k_in", q.k_in);
    get("l", q.l);
    get("i", q.i);
    get("i_d", q.i_d);
    get("p", q.p);
    get("p_hidden", q.p_hidden);
    return q;
}

int run(int argc, char** argv) {
    CLI::App app{"doubly-dispersive channel estimation benchmark"};
    app.require_subcommand(1);

    std::string config, out = "ddce_out", pipeline, dataset_file, report_file, estimator,
                params_file, figure_path;
    std::uint64_t seed = 0;
    int frames = 0, workers = 0, epochs = 0, batch = 0;
    long samples = 0;
    double lr = 0.0, train_snr = 40.0;
    bool coding = false, svg = false;

    auto* sim = app.add_subcommand("simulate", "Monte-Carlo BER/NMSE sweep");
    sim->add_option("--config", config, "scenario JSON")->required();
    sim->add_option("--seed", seed, "seed override");
    sim->add_option("--frames", frames, "frames per SNR override");
    sim->add_option("--workers", workers, "worker threads");
    sim->add_option("--out", out, "output prefix");
    sim->add_flag("--svg", svg, "also emit SVG curves");
    sim->add_flag("--coding", coding, "reserved: coded BER");

    auto* eval = app.add_subcommand("evaluate", "run estimators and print metrics");
    eval->add_option("--config", config, "scenario JSON")->required();
    eval->add_option("--seed", seed, "seed override");
    eval->add_option("--frames", frames, "frames per SNR override");
    eval->add_option("--workers", workers, "worker threads");
    eval->add_option("--out", out, "optional CSV prefix");
    eval->add_flag("--coding", coding, "reserved: coded BER");

    auto* ds = app.add_subcommand("dataset", "generate training/test datasets");
    ds->add_option("--config", config, "scenario JSON")->required();
    ds->add_option("--pipeline", pipeline, "pipeline name")->required();
    ds->add_option("--samples", samples, "record count")->required();
    ds->add_option("--snr", train_snr, "training SNR in dB");
    ds->add_option("--seed", seed, "seed override");
    ds->add_option("--out", out, "output prefix")->required();

    auto* tr = app.add_subcommand("train", "train a pipeline's network");
    tr->add_option("--pipeline", pipeline, "pipeline name")->required();
    tr->add_option("--dataset", dataset_file, "training dataset")->required();
    tr->add_option("--out", out, "checkpoint prefix")->required();
    tr->add_option("--epochs", epochs, "epochs");
    tr->add_option("--batch", batch, "batch size");
    tr->add_option("--lr", lr, "learning rate");
    tr->add_option("--seed", seed, "init seed");

    auto* cx = app.add_subcommand("complexity", "operation counts per estimator");
    cx->add_option("--estimator", estimator, "estimator name (or 'all')")->required();
    cx->add_option("--params", params_file, "CostParams JSON");
    cx->add_option("--out", out, "write counts as CSV/JSON (by extension)");
    cx->add_option("--figure", figure_path, "emit the bar-chart SVG");

    auto* pl = app.add_subcommand("plot", "render report CSV as SVG curves");
    pl->add_option("--report", report_file, "report CSV")->required();
    pl->add_option("--out", out, "output prefix");

    CLI11_PARSE(app, argc, argv);

    if (coding) throw ConfigError("channel coding is not implemented; uncoded BER only");

    if (sim->parsed() || eval->parsed()) {
        const auto sc = load_scenario(config, seed, frames, workers);
        const auto rep = bench::run_montecarlo(sc);
        print_report(rep);
        if (sim->parsed() || !out.empty()) {
            bench::emit_csv(rep, out + ".csv");
            std::fprintf(stderr, "wrote %s.csv\n", out.c_str());
        }
        if (svg) {
            bench::emit_svg(rep, out + "_ber.svg", out + "_nmse.svg");
            std::fprintf(stderr, "wrote %s_ber.svg, %s_nmse.svg\n", out.c_str(), out.c_str());
        }
        return 0;
    }
    if (ds->parsed()) {
        auto sc = load_scenario(config, seed, 0, 0);
        const auto [train_path, test_path] =
            bench::gen_dataset(sc, pipeline, samples, train_snr, out);
        std::fprintf(stderr, "wrote %s and %s\n", train_path.c_str(), test_path.c_str());
        return 0;
    }
    if (tr->parsed()) {
        nn::TrainConfig cfg = pipeline.find("cnn") != std::string::npos ||
                                      pipeline == "channelnet" || pipeline == "ts-channelnet"
                                  ? nn::TrainConfig::fbf_defaults()
                                  : nn::TrainConfig::sbs_defaults();
        if (epochs > 0) cfg.epochs = epochs;
        if (batch > 0) cfg.batch_size = batch;
        if (lr > 0) cfg.learning_rate = lr;
        cfg.seed = seed;
        const auto paths = bench::train_pipeline(pipeline, dataset_file, cfg, out);
        for (const auto& [role, p] : paths) std::fprintf(stderr, "%s: %s\n", role.c_str(), p.c_str());
        return 0;
    }
    if (cx->parsed()) {
        const auto q = params_from_json(params_file);
        std::vector<std::string> names =
            estimator == "all" ? complexity::estimator_names() : std::vector<std::string>{estimator};
        nlohmann::json j = nlohmann::json::array();
        std::printf("%-16s %16s %16s\n", "estimator", "muldiv", "addsub");
        for (const auto& n : names) {
            const auto c = complexity::count_by_name(n, q);
            std::printf("%-16s %16lld %16lld\n", n.c_str(), static_cast<long long>(c.muldiv),
                        static_cast<long long>(c.addsub));
            j.push_back({{"estimator", n}, {"muldiv", c.muldiv}, {"addsub", c.addsub}});
        }
        if (cx->count("--out")) {
            std::ofstream f(out);
            if (!f) throw IoError("cannot open for writing: " + out);
            if (out.size() > 4 && out.substr(out.size() - 4) == ".csv") {
                f << "estimator,muldiv,addsub\n";
                for (const auto& row : j)
                    f << row["estimator"].get<std::string>() << "," << row["muldiv"] << ","
                      << row["addsub"] << "\n";
            } else {
                f << j.dump(2) << "\n";
            }
        }
        if (!figure_path.empty()) {
            auto fig = [&](const std::vector<complexity::FigureValue>& vals,
                           const std::string& path, const std::string& title) {
                std::vector<std::string> groups;
                std::vector<double> md, as;
                for (const auto& v : vals) {
                    groups.push_back(v.estimator);
                    const auto c = complexity::count_by_name(v.estimator, q);
                    md.push_back(static_cast<double>(c.muldiv));
                    as.push_back(static_cast<double>(c.addsub));
                }
                bench::write_bar_chart(path, title, groups,
                                       {{"mul/div", md}, {"add/sub", as}});
            };
            fig(complexity::sbs_figure(), figure_path + "_sbs.svg",
                "SBS estimators: real-valued operations per frame");
            fig(complexity::fbf_figure(), figure_path + "_fbf.svg",
                "FBF estimators: real-valued operations per frame");
            std::fprintf(stderr, "wrote %s_sbs.svg and %s_fbf.svg\n", figure_path.c_str(),
                         figure_path.c_str());
        }
        return 0;
    }
    if (pl->parsed()) {
        const auto rep = bench::parse_csv(report_file);
        bench::emit_svg(rep, out + "_ber.svg", out + "_nmse.svg");
        std::fprintf(stderr, "wrote %s_ber.svg, %s_nmse.svg\n", out.c_str(), out.c_str());
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DivideByZeroError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
