#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ddce/channel.hpp"
#include "ddce/est_conv.hpp"
#include "ddce/est_dl.hpp"
#include "ddce/phy.hpp"

namespace ddce::bench {

struct EstimatorSpec {
    std::string name;
    std::map<std::string, std::string> files;   ///< model checkpoints by role
    std::map<std::string, double> params;       ///< numeric overrides (alpha, r0, ...)
};

struct Scenario {
    phy::PhyConfig phy = phy::PhyConfig::ieee80211p();
    channel::ChannelModel model = channel::ChannelModel::vtv_sdww(500.0);
    std::vector<double> snr_grid_db = {0, 5, 10, 15, 20, 25, 30, 35, 40};
    int frames = 200;
    std::uint64_t seed = 1;
    int workers = 0;  ///< 0 = hardware concurrency
    bool keep_per_frame_nmse = false;
    est_conv::WiFrameConfig wi;  ///< layout for the WI-frame estimators
    std::vector<EstimatorSpec> estimators;

    Scenario();
};

struct MetricsCell {
    double ber = 0.0, nmse = 0.0;
    double stderr_ber = 0.0, stderr_nmse = 0.0;
    long frames = 0;
};

struct MetricsReport {
    std::vector<std::string> estimators;
    std::vector<double> snr_grid_db;
    std::vector<std::vector<MetricsCell>> cells;  ///< [estimator][snr]
    /// per-frame NMSE ratios, kept when the scenario asks for them
    std::vector<std::vector<std::vector<double>>> per_frame_nmse;

    const MetricsCell& at(const std::string& est, double snr) const;
    int estimator_index(const std::string& est) const;
};

/// Frame-parallel Monte-Carlo evaluation. Deterministic given the scenario
/// seed: every frame draws its bits/channel/noise from counter-derived
/// substreams, and aggregation runs in frame order whatever the worker count.
MetricsReport run_montecarlo(const Scenario& scenario);

/// Scenario from its declarative JSON form (the CLI config schema, see the
/// README): keys phy{n_symbols,modulation}, channel{model,doppler_hz},
/// snr_grid_db, frames, seed, workers, wi{...}, estimators[{name,files,params}].
Scenario scenario_from_json_text(const std::string& text);

/// Write/read the report CSV
/// (estimator,snr_db,ber,nmse,stderr_ber,stderr_nmse,frames).
void emit_csv(const MetricsReport& report, const std::string& path);
std::string report_csv(const MetricsReport& report);
MetricsReport parse_csv(const std::string& path);

/// Log-y BER and NMSE curves, one series per estimator.
void emit_svg(const MetricsReport& report, const std::string& ber_path,
              const std::string& nmse_path);

struct Series {
    std::string label;
    std::vector<double> x, y;
};
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, bool log_y);
void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& groups,
                     const std::vector<std::pair<std::string, std::vector<double>>>& bars);

// ---- datasets

struct DatasetHeader {
    std::string pipeline;
    std::string model;
    double doppler_hz = 0.0;
    double snr_db = 40.0;
    std::uint64_t seed = 0;
    std::uint64_t n_records = 0;
    std::uint32_t in_rows = 0, in_cols = 0, tgt_rows = 0, tgt_cols = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> targets;
};

/// Draw (pre-stage estimate, true grid) training pairs at the training SNR
/// and write them as <out_prefix>_train.bin / <out_prefix>_test.bin with an
/// 80/20 split from disjoint seed streams. Returns the two paths.
std::pair<std::string, std::string> gen_dataset(const Scenario& scenario,
                                                const std::string& pipeline, long n_samples,
                                                double train_snr_db,
                                                const std::string& out_prefix);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

/// Train the named pipeline's network(s) on a dataset file; writes the
/// checkpoint(s) and a loss-history CSV next to `out_prefix`. Returns the
/// checkpoint paths keyed by role ("net", "srcnn", "dncnn").
std::map<std::string, std::string> train_pipeline(const std::string& pipeline,
                                                  const std::string& dataset_path,
                                                  const nn::TrainConfig& cfg,
                                                  const std::string& out_prefix);

/// NMSE of the stored input/target pairs (plumbing cross-check).
double dataset_input_nmse(const Dataset& ds);

}  // namespace ddce::bench
