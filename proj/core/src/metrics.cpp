#include "leadnet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "leadnet/errors.hpp"

namespace leadnet {

double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& ref) {
    if (pred.size() != ref.size()) {
        throw DataError("frame_accuracy: length mismatch");
    }
    if (ref.empty()) {
        throw DataError("frame_accuracy: empty sequences");
    }
    long long hits = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        hits += pred[i] == ref[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(ref.size());
}

double macro_f1(const std::vector<int>& pred, const std::vector<int>& ref) {
    if (pred.size() != ref.size()) {
        throw DataError("macro_f1: length mismatch");
    }
    if (ref.empty()) {
        throw DataError("macro_f1: empty sequences");
    }
    std::set<int> classes(ref.begin(), ref.end());
    classes.insert(pred.begin(), pred.end());

    double sum = 0.0;
    for (int c : classes) {
        long long tp = 0;
        long long fp = 0;
        long long fn = 0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (pred[i] == c && ref[i] == c) {
                ++tp;
            } else if (pred[i] == c) {
                ++fp;
            } else if (ref[i] == c) {
                ++fn;
            }
        }
        const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f1 =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        sum += f1;
    }
    return sum / static_cast<double>(classes.size());
}

std::vector<int> track_to_instrument(const std::vector<int>& pred_tracks,
                                     const std::vector<TrackMeta>& meta) {
    std::map<int, int> id_to_inst;
    for (const auto& m : meta) {
        id_to_inst[m.track_id] = m.instrument;
    }
    std::vector<int> out;
    out.reserve(pred_tracks.size());
    for (int id : pred_tracks) {
        const auto it = id_to_inst.find(id);
        if (it == id_to_inst.end()) {
            throw DataError("track_to_instrument: predicted id has no metadata entry");
        }
        out.push_back(it->second);
    }
    return out;
}

MetricsReport evaluate(const ModelConfig& cfg, const ModelParams& params,
                       const std::vector<ClipSample>& clips) {
    if (clips.empty()) {
        throw DataError("evaluate: empty clip set");
    }
    MetricsReport rep;
    rep.scheme = cfg.scheme;
    rep.n_clips = static_cast<int>(clips.size());
    const int n_classes = cfg.num_classes();
    rep.confusion.assign(static_cast<std::size_t>(n_classes),
                         std::vector<long long>(static_cast<std::size_t>(n_classes), 0));

    Rng eval_rng(0);  // unused: eval mode draws nothing
    for (const auto& clip : clips) {
        const auto result = forward(clip.input, cfg, params, /*training=*/false, eval_rng);

        std::vector<int> allowed;
        if (cfg.mask_absent_tracks && cfg.scheme == Scheme::Track) {
            for (const auto& tr : clip.input.tracks) {
                allowed.push_back(tr.meta.track_id);
            }
            std::sort(allowed.begin(), allowed.end());
        }
        const auto pred = predict(result.logits, allowed.empty() ? nullptr : &allowed);
        const std::vector<int> ref = cfg.segment_level
                                         ? std::vector<int>{segment_label(clip, cfg.scheme)}
                                         : labels_for(clip, cfg.scheme);
        if (pred.size() != ref.size()) {
            throw DataError("evaluate: prediction/label length mismatch");
        }

        rep.per_clip_accuracy.push_back(frame_accuracy(pred, ref));
        rep.per_clip_macro_f1.push_back(macro_f1(pred, ref));
        for (std::size_t i = 0; i < ref.size(); ++i) {
            ++rep.confusion[static_cast<std::size_t>(ref[i])][static_cast<std::size_t>(pred[i])];
        }

        // instrument level; predicted ids with no metadata entry (possible
        // without masking) count as the reserved unknown instrument
        std::vector<int> pred_inst;
        std::vector<int> ref_inst;
        if (cfg.scheme == Scheme::Track) {
            std::map<int, int> id_to_inst;
            for (const auto& tr : clip.input.tracks) {
                id_to_inst[tr.meta.track_id] = tr.meta.instrument;
            }
            auto map_inst = [&id_to_inst](int id) {
                const auto it = id_to_inst.find(id);
                return it == id_to_inst.end() ? kInstUnknown : it->second;
            };
            pred_inst.reserve(pred.size());
            for (int id : pred) {
                pred_inst.push_back(map_inst(id));
            }
            ref_inst = cfg.segment_level ? std::vector<int>{segment_label(clip, Scheme::Instrument)}
                                         : clip.labels_inst;
        } else {
            pred_inst = pred;
            ref_inst = ref;
        }
        rep.per_clip_inst_accuracy.push_back(frame_accuracy(pred_inst, ref_inst));
        rep.per_clip_inst_macro_f1.push_back(macro_f1(pred_inst, ref_inst));

        for (std::size_t i = 0; i < ref_inst.size(); ++i) {
            const std::string name = cfg.instrument_name(ref_inst[i]);
            auto& [correct, total] = rep.per_instrument_frames[name];
            correct += pred_inst[i] == ref_inst[i] ? 1 : 0;
            ++total;
        }
    }

    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s / static_cast<double>(v.size());
    };
    rep.accuracy = mean(rep.per_clip_accuracy);
    rep.macro_f1 = mean(rep.per_clip_macro_f1);
    rep.inst_accuracy = mean(rep.per_clip_inst_accuracy);
    rep.inst_macro_f1 = mean(rep.per_clip_inst_macro_f1);

    for (int c = 0; c < n_classes; ++c) {
        ClassStats st;
        for (int other = 0; other < n_classes; ++other) {
            if (other == c) {
                st.tp = rep.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
            } else {
                st.fn += rep.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(other)];
                st.fp += rep.confusion[static_cast<std::size_t>(other)][static_cast<std::size_t>(c)];
            }
        }
        if (st.tp + st.fp + st.fn == 0) {
            continue;  // class never appeared
        }
        st.precision = st.tp + st.fp == 0 ? 0.0 : static_cast<double>(st.tp) / static_cast<double>(st.tp + st.fp);
        st.recall = st.tp + st.fn == 0 ? 0.0 : static_cast<double>(st.tp) / static_cast<double>(st.tp + st.fn);
        st.f1 = st.precision + st.recall == 0.0
                    ? 0.0
                    : 2.0 * st.precision * st.recall / (st.precision + st.recall);
        rep.per_class[c] = st;
    }
    return rep;
}

void write_report_json(const MetricsReport& rep, const ModelConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["scheme"] = rep.scheme == Scheme::Track ? "track" : "instrument";
    j["n_clips"] = rep.n_clips;
    j["accuracy"] = rep.accuracy;
    j["macro_f1"] = rep.macro_f1;
    j["inst_accuracy"] = rep.inst_accuracy;
    j["inst_macro_f1"] = rep.inst_macro_f1;
    j["per_clip_accuracy"] = rep.per_clip_accuracy;
    j["per_clip_macro_f1"] = rep.per_clip_macro_f1;
    j["per_class"] = nlohmann::json::object();
    for (const auto& [c, st] : rep.per_class) {
        const std::string key = rep.scheme == Scheme::Track ? "track_" + std::to_string(c)
                                                            : cfg.instrument_name(c);
        j["per_class"][key] = {{"tp", st.tp},       {"fp", st.fp},           {"fn", st.fn},
                               {"precision", st.precision}, {"recall", st.recall}, {"f1", st.f1}};
    }
    j["per_instrument_frame_accuracy"] = nlohmann::json::object();
    for (const auto& [name, counts] : rep.per_instrument_frames) {
        j["per_instrument_frame_accuracy"][name] = {
            {"correct", counts.first},
            {"total", counts.second},
            {"accuracy", counts.second > 0
                             ? static_cast<double>(counts.first) / static_cast<double>(counts.second)
                             : 0.0}};
    }
    std::ofstream f(path);
    if (!f) {
        throw DataError("report: cannot write " + path);
    }
    f << j.dump(2) << "\n";
}

void write_confusion_csv(const MetricsReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw DataError("confusion: cannot write " + path);
    }
    const auto n = rep.confusion.size();
    f << "ref\\pred";
    for (std::size_t c = 0; c < n; ++c) {
        f << "," << c;
    }
    f << "\n";
    for (std::size_t r = 0; r < n; ++r) {
        f << r;
        for (std::size_t c = 0; c < n; ++c) {
            f << "," << rep.confusion[r][c];
        }
        f << "\n";
    }
}

std::string format_report(const MetricsReport& rep, const ModelConfig& cfg) {
    std::ostringstream os;
    char buf[160];
    os << "clips: " << rep.n_clips << "\n";
    if (rep.scheme == Scheme::Track) {
        std::snprintf(buf, sizeof(buf), "track    acc %.4f  macro-F1 %.4f\n", rep.accuracy,
                      rep.macro_f1);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "instrument acc %.4f  macro-F1 %.4f\n", rep.inst_accuracy,
                  rep.inst_macro_f1);
    os << buf;
    os << "per-instrument frame accuracy:\n";
    for (const auto& [name, counts] : rep.per_instrument_frames) {
        const double acc = counts.second > 0
                               ? static_cast<double>(counts.first) / static_cast<double>(counts.second)
                               : 0.0;
        std::snprintf(buf, sizeof(buf), "  %-12s %.4f  (%lld frames)\n", name.c_str(), acc,
                      counts.second);
        os << buf;
    }
    (void)cfg;
    return os.str();
}

}  // namespace leadnet
