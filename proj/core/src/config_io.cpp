#include "leadnet/config_io.hpp"

#include "leadnet/errors.hpp"

namespace leadnet {

std::string to_string(Scheme s) { return s == Scheme::Track ? "track" : "inst"; }

std::string to_string(Variant v) {
    switch (v) {
        case Variant::FromMix:
            return "from_mix";
        case Variant::TrackAvg:
            return "track_avg";
        case Variant::TrackAttn:
            return "track_attn";
    }
    return "track_attn";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "track") {
        return Scheme::Track;
    }
    if (s == "inst" || s == "instrument") {
        return Scheme::Instrument;
    }
    throw ConfigError("unknown classification scheme: " + s);
}

Variant variant_from_string(const std::string& s) {
    if (s == "from_mix") {
        return Variant::FromMix;
    }
    if (s == "track_avg") {
        return Variant::TrackAvg;
    }
    if (s == "track_attn") {
        return Variant::TrackAttn;
    }
    throw ConfigError("unknown model variant: " + s);
}

void to_json(nlohmann::json& j, const MelConfig& c) {
    j = nlohmann::json{{"fft_size", c.fft_size}, {"hop", c.hop},
                       {"n_mels", c.n_mels},     {"fmin_hz", c.fmin_hz},
                       {"fmax_hz", c.fmax_hz},   {"log_floor", c.log_floor},
                       {"sample_rate", c.sample_rate}, {"clip_sec", c.clip_sec}};
}

void from_json(const nlohmann::json& j, MelConfig& c) {
    j.at("fft_size").get_to(c.fft_size);
    j.at("hop").get_to(c.hop);
    j.at("n_mels").get_to(c.n_mels);
    j.at("fmin_hz").get_to(c.fmin_hz);
    j.at("fmax_hz").get_to(c.fmax_hz);
    j.at("log_floor").get_to(c.log_floor);
    j.at("sample_rate").get_to(c.sample_rate);
    j.at("clip_sec").get_to(c.clip_sec);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"feature_dim", c.feature_dim},
                       {"heads", c.heads},
                       {"dropout_p", c.dropout_p},
                       {"max_tracks", c.max_tracks},
                       {"n_mels", c.n_mels},
                       {"instruments", c.instruments},
                       {"scheme", to_string(c.scheme)},
                       {"variant", to_string(c.variant)},
                       {"use_inst_emb", c.use_inst_emb},
                       {"use_track_emb", c.use_track_emb},
                       {"use_oracle_mix", c.use_oracle_mix},
                       {"segment_level", c.segment_level},
                       {"mask_absent_tracks", c.mask_absent_tracks}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("feature_dim").get_to(c.feature_dim);
    j.at("heads").get_to(c.heads);
    j.at("dropout_p").get_to(c.dropout_p);
    j.at("max_tracks").get_to(c.max_tracks);
    j.at("n_mels").get_to(c.n_mels);
    j.at("instruments").get_to(c.instruments);
    c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    j.at("use_inst_emb").get_to(c.use_inst_emb);
    j.at("use_track_emb").get_to(c.use_track_emb);
    j.at("use_oracle_mix").get_to(c.use_oracle_mix);
    j.at("segment_level").get_to(c.segment_level);
    j.at("mask_absent_tracks").get_to(c.mask_absent_tracks);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"grad_accum", c.grad_accum},
                       {"weight_decay", c.weight_decay},
                       {"lr_encoder", c.lr_encoder},
                       {"lr_attention", c.lr_attention},
                       {"lr_classifier", c.lr_classifier},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"adam_eps", c.adam_eps},
                       {"seed", c.seed},
                       {"validate_every", c.validate_every},
                       {"track_perm", c.track_perm},
                       {"freeze_encoder", c.freeze_encoder},
                       {"max_steps", c.max_steps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("epochs").get_to(c.epochs);
    j.at("batch_size").get_to(c.batch_size);
    j.at("grad_accum").get_to(c.grad_accum);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("lr_encoder").get_to(c.lr_encoder);
    j.at("lr_attention").get_to(c.lr_attention);
    j.at("lr_classifier").get_to(c.lr_classifier);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("adam_eps").get_to(c.adam_eps);
    j.at("seed").get_to(c.seed);
    j.at("validate_every").get_to(c.validate_every);
    j.at("track_perm").get_to(c.track_perm);
    j.at("freeze_encoder").get_to(c.freeze_encoder);
    j.at("max_steps").get_to(c.max_steps);
}

}  // namespace leadnet
