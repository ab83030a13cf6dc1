#include "leadnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "leadnet/errors.hpp"

namespace leadnet {

int ModelConfig::instrument_index(const std::string& name) const {
    if (name == "__mix__") {
        return kInstMix;
    }
    for (std::size_t i = 0; i < instruments.size(); ++i) {
        if (instruments[i] == name) {
            return 2 + static_cast<int>(i);
        }
    }
    return kInstUnknown;
}

std::string ModelConfig::instrument_name(int index) const {
    if (index == kInstMix) {
        return "__mix__";
    }
    if (index == kInstUnknown) {
        return "__unknown__";
    }
    const int i = index - 2;
    if (i < 0 || i >= static_cast<int>(instruments.size())) {
        throw DataError("instrument_name: index out of range");
    }
    return instruments[static_cast<std::size_t>(i)];
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    if (cfg.feature_dim % cfg.heads != 0) {
        throw ConfigError("model: feature_dim must be divisible by heads");
    }
    if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0)) {
        throw ConfigError("model: dropout_p must be in [0, 1)");
    }
    const int d = cfg.feature_dim;
    ModelParams p;
    p.encoder = EncoderParams::init(cfg.n_mels, d, rng);
    const double emb_std = 0.5;
    const double attn_std = std::sqrt(1.0 / d);
    p.inst_emb = randn({cfg.inst_vocab(), d}, rng, emb_std, true);
    p.track_emb = randn({cfg.max_tracks + 1, d}, rng, emb_std, true);
    p.w_q = randn({d, d}, rng, attn_std, true);
    p.w_k = randn({d, d}, rng, attn_std, true);
    p.w_v = randn({d, d}, rng, attn_std, true);
    p.w_o = randn({d, d}, rng, attn_std, true);
    p.attn_ln_gain = full({1, d}, 1.0, true);
    p.attn_ln_bias = zeros({1, d}, true);
    const int c = cfg.num_classes();
    p.cls_w = randn({d, c}, rng, std::sqrt(2.0 / (d + c)), true);
    p.cls_b = zeros({1, c}, true);

    auto reg = [&p](const std::string& name, ParamGroup g, const TensorPtr& t) {
        p.registry.push_back({name, g, t});
    };
    reg("encoder.proj_w", ParamGroup::Encoder, p.encoder.proj_w);
    reg("encoder.proj_b", ParamGroup::Encoder, p.encoder.proj_b);
    for (std::size_t i = 0; i < p.encoder.blocks.size(); ++i) {
        const auto& b = p.encoder.blocks[i];
        const std::string base = "encoder.block" + std::to_string(i) + ".";
        reg(base + "w1", ParamGroup::Encoder, b.w1);
        reg(base + "b1", ParamGroup::Encoder, b.b1);
        reg(base + "w2", ParamGroup::Encoder, b.w2);
        reg(base + "b2", ParamGroup::Encoder, b.b2);
        reg(base + "ln_gain", ParamGroup::Encoder, b.ln_gain);
        reg(base + "ln_bias", ParamGroup::Encoder, b.ln_bias);
    }
    reg("attn.w_q", ParamGroup::Attention, p.w_q);
    reg("attn.w_k", ParamGroup::Attention, p.w_k);
    reg("attn.w_v", ParamGroup::Attention, p.w_v);
    reg("attn.w_o", ParamGroup::Attention, p.w_o);
    reg("attn.ln_gain", ParamGroup::Attention, p.attn_ln_gain);
    reg("attn.ln_bias", ParamGroup::Attention, p.attn_ln_bias);
    reg("cls.inst_emb", ParamGroup::Classifier, p.inst_emb);
    reg("cls.track_emb", ParamGroup::Classifier, p.track_emb);
    reg("cls.w", ParamGroup::Classifier, p.cls_w);
    reg("cls.b", ParamGroup::Classifier, p.cls_b);
    return p;
}

TensorPtr embed_meta(const TensorPtr& feat, const TrackMeta& meta, const ModelConfig& cfg,
                     const ModelParams& params) {
    if (meta.track_id < 0 || meta.track_id > cfg.max_tracks) {
        throw DataError("embed_meta: track id out of range");
    }
    if (meta.instrument < 0 || meta.instrument >= cfg.inst_vocab()) {
        throw DataError("embed_meta: instrument index out of range");
    }
    TensorPtr out = feat;
    if (cfg.use_inst_emb) {
        out = add_row(out, embedding_row(params.inst_emb, meta.instrument));
    }
    if (cfg.use_track_emb) {
        out = add_row(out, embedding_row(params.track_emb, meta.track_id));
    }
    return out;
}

std::pair<TensorPtr, AttentionTrace> attention_weighted_sum(const TensorPtr& q,
                                                            const std::vector<TensorPtr>& ks,
                                                            const std::vector<TensorPtr>& vs,
                                                            int heads) {
    if (ks.empty() || ks.size() != vs.size()) {
        throw DataError("attention: empty track set or key/value count mismatch");
    }
    const std::int64_t frames = q->rows();
    const std::int64_t d = q->cols();
    if (d % heads != 0) {
        throw ShapeError("attention: dim not divisible by heads");
    }
    const std::int64_t dh = d / heads;
    const int n = static_cast<int>(ks.size());
    for (const auto& t : ks) {
        if (t->rows() != frames || t->cols() != d) {
            throw ShapeError("attention: key shape mismatch");
        }
    }
    for (const auto& t : vs) {
        if (t->rows() != frames || t->cols() != d) {
            throw ShapeError("attention: value shape mismatch");
        }
    }

    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    AttentionTrace trace;
    trace.heads = heads;
    trace.frames = static_cast<int>(frames);
    trace.n_tracks = n;
    trace.weights.resize(static_cast<std::size_t>(heads) * frames * n);

    std::vector<double> out(static_cast<std::size_t>(frames * d), 0.0);
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < frames; ++t) {
        for (int h = 0; h < heads; ++h) {
            const std::int64_t col0 = h * dh;
            const double* qrow = q->data.data() + t * d + col0;
            double mx = -1e300;
            for (int i = 0; i < n; ++i) {
                const double* krow = ks[static_cast<std::size_t>(i)]->data.data() + t * d + col0;
                double s = 0.0;
                for (std::int64_t c = 0; c < dh; ++c) {
                    s += qrow[c] * krow[c];
                }
                s *= inv_scale;
                scores[static_cast<std::size_t>(i)] = s;
                mx = std::max(mx, s);
            }
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                scores[static_cast<std::size_t>(i)] = std::exp(scores[static_cast<std::size_t>(i)] - mx);
                sum += scores[static_cast<std::size_t>(i)];
            }
            const double inv_sum = 1.0 / sum;
            double* wrow = trace.weights.data() + (static_cast<std::size_t>(h) * frames + t) * n;
            for (int i = 0; i < n; ++i) {
                wrow[i] = scores[static_cast<std::size_t>(i)] * inv_sum;
            }
            double* orow = out.data() + t * d + col0;
            for (int i = 0; i < n; ++i) {
                const double w = wrow[i];
                const double* vrow = vs[static_cast<std::size_t>(i)]->data.data() + t * d + col0;
                for (std::int64_t c = 0; c < dh; ++c) {
                    orow[c] += w * vrow[c];
                }
            }
        }
    }

    bool req = q->requires_grad;
    for (const auto& t : ks) {
        req = req || t->requires_grad;
    }
    for (const auto& t : vs) {
        req = req || t->requires_grad;
    }
    auto result = tensor(std::move(out), {frames, d}, req);
    result->inputs.push_back(q);
    result->inputs.insert(result->inputs.end(), ks.begin(), ks.end());
    result->inputs.insert(result->inputs.end(), vs.begin(), vs.end());

    Tensor* o = result.get();
    const std::vector<double> weights = trace.weights;  // captured copy for backward
    result->backward_fn = [q, ks, vs, o, weights, heads, frames, d, dh, n, inv_scale]() {
        std::vector<double> gq(q->data.size(), 0.0);
        std::vector<std::vector<double>> gk(static_cast<std::size_t>(n));
        std::vector<std::vector<double>> gv(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (ks[static_cast<std::size_t>(i)]->requires_grad) {
                gk[static_cast<std::size_t>(i)].assign(ks[static_cast<std::size_t>(i)]->data.size(), 0.0);
            }
            if (vs[static_cast<std::size_t>(i)]->requires_grad) {
                gv[static_cast<std::size_t>(i)].assign(vs[static_cast<std::size_t>(i)]->data.size(), 0.0);
            }
        }
        std::vector<double> dw(static_cast<std::size_t>(n));
        for (std::int64_t t = 0; t < frames; ++t) {
            for (int h = 0; h < heads; ++h) {
                const std::int64_t col0 = h * dh;
                const double* grow = o->grad.data() + t * d + col0;
                const double* wrow = weights.data() + (static_cast<std::size_t>(h) * frames + t) * n;

                // dV_i = w_i * dO ; dw_i = dO . V_i
                double wdot = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double* vrow = vs[static_cast<std::size_t>(i)]->data.data() + t * d + col0;
                    double s = 0.0;
                    for (std::int64_t c = 0; c < dh; ++c) {
                        s += grow[c] * vrow[c];
                    }
                    dw[static_cast<std::size_t>(i)] = s;
                    wdot += wrow[i] * s;
                    if (!gv[static_cast<std::size_t>(i)].empty()) {
                        double* gvrow = gv[static_cast<std::size_t>(i)].data() + t * d + col0;
                        for (std::int64_t c = 0; c < dh; ++c) {
                            gvrow[c] += wrow[i] * grow[c];
                        }
                    }
                }
                // softmax backward, then chain into q and k
                const double* qrow = q->data.data() + t * d + col0;
                for (int i = 0; i < n; ++i) {
                    const double ds = wrow[i] * (dw[static_cast<std::size_t>(i)] - wdot) * inv_scale;
                    const double* krow = ks[static_cast<std::size_t>(i)]->data.data() + t * d + col0;
                    if (q->requires_grad) {
                        double* gqrow = gq.data() + t * d + col0;
                        for (std::int64_t c = 0; c < dh; ++c) {
                            gqrow[c] += ds * krow[c];
                        }
                    }
                    if (!gk[static_cast<std::size_t>(i)].empty()) {
                        double* gkrow = gk[static_cast<std::size_t>(i)].data() + t * d + col0;
                        for (std::int64_t c = 0; c < dh; ++c) {
                            gkrow[c] += ds * qrow[c];
                        }
                    }
                }
            }
        }
        if (q->requires_grad) {
            q->accum_grad(gq);
        }
        for (int i = 0; i < n; ++i) {
            if (!gk[static_cast<std::size_t>(i)].empty()) {
                ks[static_cast<std::size_t>(i)]->accum_grad(gk[static_cast<std::size_t>(i)]);
            }
            if (!gv[static_cast<std::size_t>(i)].empty()) {
                vs[static_cast<std::size_t>(i)]->accum_grad(gv[static_cast<std::size_t>(i)]);
            }
        }
    };
    return {result, std::move(trace)};
}

std::pair<TensorPtr, AttentionTrace> track_attention(const TensorPtr& mix_feat,
                                                     const std::vector<TensorPtr>& track_feats,
                                                     const ModelConfig& cfg, const ModelParams& params,
                                                     bool training, Rng& rng) {
    if (track_feats.empty()) {
        throw DataError("track_attention: empty track set");
    }
    TensorPtr q = matmul(mix_feat, params.w_q);
    std::vector<TensorPtr> ks;
    std::vector<TensorPtr> vs;
    ks.reserve(track_feats.size());
    vs.reserve(track_feats.size());
    for (const auto& f : track_feats) {
        ks.push_back(matmul(f, params.w_k));
        vs.push_back(matmul(f, params.w_v));
    }
    auto [core, trace] = attention_weighted_sum(q, ks, vs, cfg.heads);
    TensorPtr out = matmul(core, params.w_o);
    out = layer_norm(out, params.attn_ln_gain, params.attn_ln_bias);
    out = dropout(out, cfg.dropout_p, training, rng);
    return {out, std::move(trace)};
}

TensorPtr classify_frames(const TensorPtr& agg, const ModelParams& params) {
    return add_row(matmul(agg, params.cls_w), params.cls_b);
}

TensorPtr segment_head(const TensorPtr& agg, const ModelParams& params) {
    return classify_frames(mean_rows(agg), params);
}

ForwardResult forward(const ModelInput& input, const ModelConfig& cfg, const ModelParams& params,
                      bool training, Rng& rng) {
    if (input.tracks.empty()) {
        throw DataError("forward: sample has no instrument tracks");
    }
    std::unordered_set<int> seen;
    for (const auto& tr : input.tracks) {
        if (tr.meta.track_id < 1 || tr.meta.track_id > cfg.max_tracks) {
            throw DataError("forward: instrument track id out of range");
        }
        if (!seen.insert(tr.meta.track_id).second) {
            throw DataError("forward: duplicate track id within sample");
        }
    }

    ForwardResult res;
    TensorPtr agg;
    if (cfg.variant == Variant::FromMix) {
        agg = embed_meta(encode(input.mix.mel, params.encoder), input.mix.meta, cfg, params);
    } else {
        std::vector<TensorPtr> feats;
        feats.reserve(input.tracks.size());
        for (const auto& tr : input.tracks) {
            feats.push_back(embed_meta(encode(tr.mel, params.encoder), tr.meta, cfg, params));
        }
        if (cfg.variant == Variant::TrackAvg) {
            TensorPtr sum = feats[0];
            for (std::size_t i = 1; i < feats.size(); ++i) {
                sum = add(sum, feats[i]);
            }
            agg = scale(sum, 1.0 / static_cast<double>(feats.size()));
        } else {
            TensorPtr mix_feat =
                embed_meta(encode(input.mix.mel, params.encoder), input.mix.meta, cfg, params);
            auto [out, trace] = track_attention(mix_feat, feats, cfg, params, training, rng);
            agg = out;
            trace.track_ids.reserve(input.tracks.size());
            for (const auto& tr : input.tracks) {
                trace.track_ids.push_back(tr.meta.track_id);
            }
            res.trace = std::move(trace);
        }
    }
    res.logits = cfg.segment_level ? segment_head(agg, params) : classify_frames(agg, params);
    return res;
}

Waveform pseudo_mix(const std::vector<Waveform>& tracks) {
    if (tracks.empty()) {
        throw DataError("pseudo_mix: no tracks");
    }
    const auto n = tracks[0].samples.size();
    for (const auto& t : tracks) {
        if (t.samples.size() != n || t.sample_rate != tracks[0].sample_rate || t.channels != 1) {
            throw DataError("pseudo_mix: tracks must be mono with equal length and rate");
        }
    }
    Waveform out;
    out.sample_rate = tracks[0].sample_rate;
    out.channels = 1;
    out.samples.assign(n, 0.0);
    const double inv = 1.0 / static_cast<double>(tracks.size());
    for (const auto& t : tracks) {
        for (std::size_t i = 0; i < n; ++i) {
            out.samples[i] += t.samples[i];
        }
    }
    for (auto& s : out.samples) {
        s *= inv;
    }
    return out;
}

std::vector<int> predict(const TensorPtr& logits, const std::vector<int>* allowed) {
    const std::int64_t t = logits->rows();
    const std::int64_t c = logits->cols();
    std::vector<int> out(static_cast<std::size_t>(t));
    for (std::int64_t r = 0; r < t; ++r) {
        const double* row = logits->data.data() + r * c;
        int best = -1;
        double best_v = 0.0;
        if (allowed) {
            for (int j : *allowed) {
                if (j < 0 || j >= c) {
                    throw DataError("predict: allowed class out of range");
                }
                if (best < 0 || row[j] > best_v) {
                    best = j;
                    best_v = row[j];
                }
            }
        } else {
            best = 0;
            best_v = row[0];
            for (std::int64_t j = 1; j < c; ++j) {
                if (row[j] > best_v) {
                    best = static_cast<int>(j);
                    best_v = row[j];
                }
            }
        }
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

}  // namespace leadnet
