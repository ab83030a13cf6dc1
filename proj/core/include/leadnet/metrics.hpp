#pragma once

#include <map>
#include <string>
#include <vector>

#include "leadnet/dataset.hpp"
#include "leadnet/model.hpp"

namespace leadnet {

struct ClassStats {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Frame-level metrics computed per 5 s clip and then averaged across clips.
/// For the track scheme, instrument-level numbers are derived by mapping
/// predicted ids through each sample's track-instrument relationships.
struct MetricsReport {
    Scheme scheme = Scheme::Track;
    int n_clips = 0;

    std::vector<double> per_clip_accuracy;
    std::vector<double> per_clip_macro_f1;
    double accuracy = 0.0;
    double macro_f1 = 0.0;

    // instrument level (equals the native level for the instrument scheme)
    std::vector<double> per_clip_inst_accuracy;
    std::vector<double> per_clip_inst_macro_f1;
    double inst_accuracy = 0.0;
    double inst_macro_f1 = 0.0;

    // frame-level tallies at the scheme's native label space
    std::map<int, ClassStats> per_class;
    std::vector<std::vector<long long>> confusion;  // [ref][pred]

    // instrument-level frame accuracy grouped by reference instrument name
    std::map<std::string, std::pair<long long, long long>> per_instrument_frames;  // correct, total
};

/// Fraction of positions where pred matches ref.
double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& ref);

/// Unweighted mean F1 over the classes present in ref or pred; a class with
/// zero precision+recall contributes 0. Throws on empty input.
double macro_f1(const std::vector<int>& pred, const std::vector<int>& ref);

/// Replace each predicted track id by that track's instrument. Ids absent
/// from the metadata raise DataError.
std::vector<int> track_to_instrument(const std::vector<int>& pred_tracks,
                                     const std::vector<TrackMeta>& meta);

/// Run the model over a clip set in eval mode and assemble the report.
MetricsReport evaluate(const ModelConfig& cfg, const ModelParams& params,
                       const std::vector<ClipSample>& clips);

void write_report_json(const MetricsReport& report, const ModelConfig& cfg, const std::string& path);
void write_confusion_csv(const MetricsReport& report, const std::string& path);
std::string format_report(const MetricsReport& report, const ModelConfig& cfg);

}  // namespace leadnet
