#pragma once

#include <optional>
#include <string>
#include <vector>

#include "leadnet/audio.hpp"
#include "leadnet/frontend.hpp"
#include "leadnet/tensor.hpp"

namespace leadnet {

/// Reserved instrument-vocabulary slots. Named instruments start at index 2.
constexpr int kInstMix = 0;
constexpr int kInstUnknown = 1;

/// Reserved track id of the mixture. Instrument tracks use ids 1..max_tracks.
constexpr int kMixTrackId = 0;

struct TrackMeta {
    int track_id = 0;
    int instrument = kInstUnknown;
};

enum class Scheme { Instrument, Track };
enum class Variant { FromMix, TrackAvg, TrackAttn };

struct ModelConfig {
    int feature_dim = 64;  // D, divisible by heads
    int heads = 4;
    double dropout_p = 0.8;
    int max_tracks = 8;  // instrument track id slots; classifier width is max_tracks + 1
    int n_mels = 64;
    std::vector<std::string> instruments;  // named vocabulary beyond the reserved slots

    Scheme scheme = Scheme::Track;
    Variant variant = Variant::TrackAttn;
    bool use_inst_emb = true;
    bool use_track_emb = true;
    bool use_oracle_mix = true;
    bool segment_level = false;
    bool mask_absent_tracks = false;  // analysis-only prediction mask

    int inst_vocab() const { return 2 + static_cast<int>(instruments.size()); }
    int num_classes() const {
        return scheme == Scheme::Track ? max_tracks + 1 : inst_vocab();
    }
    /// Index of a named instrument; unknown names map to the reserved slot.
    int instrument_index(const std::string& name) const;
    std::string instrument_name(int index) const;
};

enum class ParamGroup { Encoder, Attention, Classifier };

struct NamedParam {
    std::string name;
    ParamGroup group;
    TensorPtr t;
};

struct ModelParams {
    EncoderParams encoder;
    TensorPtr inst_emb;   // inst_vocab x D
    TensorPtr track_emb;  // (max_tracks + 1) x D
    TensorPtr w_q, w_k, w_v, w_o;           // D x D each
    TensorPtr attn_ln_gain, attn_ln_bias;   // 1 x D
    TensorPtr cls_w;  // D x C
    TensorPtr cls_b;  // 1 x C

    /// Every trainable tensor exactly once, with its optimizer group.
    std::vector<NamedParam> registry;

    static ModelParams init(const ModelConfig& cfg, Rng& rng);
};

/// Per-head, per-frame softmax weights over the instrument tracks.
/// weights[(h * frames + t) * n_tracks + i] is head h's weight for track i at
/// frame t; each (h, t) row sums to 1.
struct AttentionTrace {
    int heads = 0;
    int frames = 0;
    int n_tracks = 0;
    std::vector<int> track_ids;  // column order
    std::vector<double> weights;

    double at(int head, int frame, int track) const {
        return weights[static_cast<std::size_t>((head * frames + frame) * n_tracks + track)];
    }
};

/// One track's encoder input plus its metadata.
struct TrackInput {
    TensorPtr mel;  // frames x n_mels
    TrackMeta meta;
};

/// Model input for one clip: the mixture plus N >= 1 instrument tracks.
struct ModelInput {
    TrackInput mix;
    std::vector<TrackInput> tracks;
};

struct ForwardResult {
    TensorPtr logits;  // frames x C (or 1 x C with the segment head)
    std::optional<AttentionTrace> trace;
};

/// Add instrument and track-id embeddings to a feature map, broadcast over
/// frames. The use_* flags drop the corresponding term.
TensorPtr embed_meta(const TensorPtr& feat, const TrackMeta& meta, const ModelConfig& cfg,
                     const ModelParams& params);

/// Fused scaled dot-product attention core: for every head and frame, the
/// mixture row is the query and track rows are keys/values; scores use scale
/// 1/sqrt(D/H) and the weighted value sum is written head-by-head into the
/// output columns. Returns the head-concatenated map and the softmax weights.
std::pair<TensorPtr, AttentionTrace> attention_weighted_sum(const TensorPtr& q,
                                                            const std::vector<TensorPtr>& ks,
                                                            const std::vector<TensorPtr>& vs,
                                                            int heads);

/// Full track-wise attention block: Q/K/V projections, multihead weighted
/// sum, output projection, layer norm, dropout.
std::pair<TensorPtr, AttentionTrace> track_attention(const TensorPtr& mix_feat,
                                                     const std::vector<TensorPtr>& track_feats,
                                                     const ModelConfig& cfg, const ModelParams& params,
                                                     bool training, Rng& rng);

/// Frame-wise linear classifier.
TensorPtr classify_frames(const TensorPtr& agg, const ModelParams& params);

/// Average pooling over frames, then the linear classifier (1 x C output).
TensorPtr segment_head(const TensorPtr& agg, const ModelParams& params);

/// Forward pass for the configured variant. FromMix ignores the instrument
/// tracks entirely; TrackAvg replaces attention with an unweighted mean of
/// the embedded track maps; TrackAttn returns an attention trace as well.
ForwardResult forward(const ModelInput& input, const ModelConfig& cfg, const ModelParams& params,
                      bool training, Rng& rng);

/// Sample-wise mean of equal-length waveforms; stand-in mixture when no
/// engineered mix is available.
Waveform pseudo_mix(const std::vector<Waveform>& tracks);

/// Per-frame argmax with ties broken toward the lowest class index. An
/// optional whitelist restricts the argmax to the given classes.
std::vector<int> predict(const TensorPtr& logits, const std::vector<int>* allowed = nullptr);

}  // namespace leadnet
