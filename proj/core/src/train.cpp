#include "leadnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "leadnet/config_io.hpp"
#include "leadnet/errors.hpp"

namespace leadnet {

AdamW::AdamW(const std::vector<NamedParam>& registry, const TrainConfig& cfg) : cfg_(cfg) {
    if (cfg.grad_accum < 1 || cfg.batch_size < 1) {
        throw ConfigError("optimizer: batch_size and grad_accum must be >= 1");
    }
    if (!(cfg.lr_encoder > 0.0 && cfg.lr_attention > 0.0 && cfg.lr_classifier > 0.0)) {
        throw ConfigError("optimizer: learning rates must be positive");
    }
    m.resize(registry.size());
    v.resize(registry.size());
    for (std::size_t i = 0; i < registry.size(); ++i) {
        m[i].assign(registry[i].t->data.size(), 0.0);
        v[i].assign(registry[i].t->data.size(), 0.0);
    }
}

double AdamW::lr_for(ParamGroup group) const {
    switch (group) {
        case ParamGroup::Encoder:
            return cfg_.lr_encoder;
        case ParamGroup::Attention:
            return cfg_.lr_attention;
        case ParamGroup::Classifier:
            return cfg_.lr_classifier;
    }
    return cfg_.lr_classifier;
}

void AdamW::step(const std::vector<NamedParam>& registry) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < registry.size(); ++i) {
        auto& t = *registry[i].t;
        if (!t.requires_grad) {
            continue;
        }
        const double lr = lr_for(registry[i].group);
        for (std::size_t k = 0; k < t.data.size(); ++k) {
            const double g = t.grad[k];
            if (!std::isfinite(g)) {
                throw NumericError("optimizer: non-finite gradient in " + registry[i].name +
                                   " at step " + std::to_string(step_count));
            }
            // decoupled decay, then the Adam update
            t.data[k] *= 1.0 - lr * cfg_.weight_decay;
            m[i][k] = cfg_.beta1 * m[i][k] + (1.0 - cfg_.beta1) * g;
            v[i][k] = cfg_.beta2 * v[i][k] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i][k] / bc1;
            const double vhat = v[i][k] / bc2;
            t.data[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
        t.zero_grad();
    }
}

ModelParams build_params(const Checkpoint& ckpt) {
    Rng dummy(0);
    ModelParams params = ModelParams::init(ckpt.model_cfg, dummy);
    if (params.registry.size() != ckpt.names.size()) {
        throw DataError("checkpoint: registry size mismatch for stored config");
    }
    for (std::size_t i = 0; i < params.registry.size(); ++i) {
        if (params.registry[i].name != ckpt.names[i]) {
            throw DataError("checkpoint: parameter name mismatch: " + ckpt.names[i]);
        }
        if (params.registry[i].t->shape != ckpt.shapes[i]) {
            throw DataError("checkpoint: parameter shape mismatch: " + ckpt.names[i]);
        }
        params.registry[i].t->data = ckpt.values[i];
    }
    return params;
}

namespace {

constexpr char kMagic[4] = {'L', 'N', 'C', 'K'};

Checkpoint snapshot(const ModelConfig& model_cfg, const MelConfig& mel_cfg,
                    const TrainConfig& train_cfg, const ModelParams& params, const AdamW& opt,
                    long long step, const Rng& rng, double best_val_f1) {
    Checkpoint c;
    c.model_cfg = model_cfg;
    c.mel_cfg = mel_cfg;
    c.train_cfg = train_cfg;
    for (const auto& np : params.registry) {
        c.names.push_back(np.name);
        c.shapes.push_back(np.t->shape);
        c.values.push_back(np.t->data);
    }
    c.opt_m = opt.m;
    c.opt_v = opt.v;
    c.step = step;
    c.rng_state = rng.serialize();
    c.best_val_f1 = best_val_f1;
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json j;
    j["version"] = Checkpoint::kVersion;
    j["model_cfg"] = ckpt.model_cfg;
    j["mel_cfg"] = ckpt.mel_cfg;
    j["train_cfg"] = ckpt.train_cfg;
    j["names"] = ckpt.names;
    j["shapes"] = ckpt.shapes;
    j["step"] = ckpt.step;
    j["rng_state"] = ckpt.rng_state;
    j["best_val_f1"] = ckpt.best_val_f1;
    const std::string header = j.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("checkpoint: cannot write " + path);
    }
    f.write(kMagic, 4);
    const std::uint32_t version = Checkpoint::kVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t header_len = header.size();
    f.write(reinterpret_cast<const char*>(&header_len), 8);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    auto write_blobs = [&f](const std::vector<std::vector<double>>& blobs) {
        for (const auto& blob : blobs) {
            f.write(reinterpret_cast<const char*>(blob.data()),
                    static_cast<std::streamsize>(blob.size() * sizeof(double)));
        }
    };
    write_blobs(ckpt.values);
    write_blobs(ckpt.opt_m);
    write_blobs(ckpt.opt_v);
    if (!f) {
        throw DataError("checkpoint: write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("checkpoint: cannot open " + path);
    }
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = 0;
    if (!f.read(reinterpret_cast<char*>(&version), 4) || version != Checkpoint::kVersion) {
        throw DataError("checkpoint: unsupported version in " + path);
    }
    std::uint64_t header_len = 0;
    if (!f.read(reinterpret_cast<char*>(&header_len), 8)) {
        throw DataError("checkpoint: truncated header in " + path);
    }
    std::string header(header_len, '\0');
    if (!f.read(header.data(), static_cast<std::streamsize>(header_len))) {
        throw DataError("checkpoint: truncated header in " + path);
    }
    Checkpoint c;
    try {
        const auto j = nlohmann::json::parse(header);
        j.at("model_cfg").get_to(c.model_cfg);
        j.at("mel_cfg").get_to(c.mel_cfg);
        j.at("train_cfg").get_to(c.train_cfg);
        j.at("names").get_to(c.names);
        j.at("shapes").get_to(c.shapes);
        j.at("step").get_to(c.step);
        j.at("rng_state").get_to(c.rng_state);
        j.at("best_val_f1").get_to(c.best_val_f1);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed header: ") + e.what());
    }
    auto read_blobs = [&f, &c, &path](std::vector<std::vector<double>>& blobs) {
        blobs.resize(c.names.size());
        for (std::size_t i = 0; i < c.names.size(); ++i) {
            std::int64_t n = 1;
            for (auto d : c.shapes[i]) {
                n *= d;
            }
            blobs[i].resize(static_cast<std::size_t>(n));
            if (!f.read(reinterpret_cast<char*>(blobs[i].data()),
                        static_cast<std::streamsize>(blobs[i].size() * sizeof(double)))) {
                throw DataError("checkpoint: truncated tensor data in " + path);
            }
        }
    };
    read_blobs(c.values);
    read_blobs(c.opt_m);
    read_blobs(c.opt_v);
    return c;
}

TrainResult train(const std::vector<ClipSample>& train_clips,
                  const std::vector<ClipSample>& valid_clips, const ModelConfig& model_cfg,
                  const MelConfig& mel_cfg, const TrainConfig& cfg, const std::string& log_path,
                  const Checkpoint* resume) {
    if (train_clips.empty()) {
        throw ConfigError("train: empty training split");
    }
    if (valid_clips.empty()) {
        throw ConfigError("train: empty validation split");
    }
    if (cfg.epochs < 1 && cfg.max_steps < 1) {
        throw ConfigError("train: nothing to run");
    }

    // Randomness layout: stream 1 initializes parameters, stream 2 flows
    // through augmentation and dropout draws (serialized in checkpoints), and
    // stream 1000+epoch orders each epoch so a resumed run can rebuild the
    // schedule from the step counter alone.
    const Rng base(cfg.seed);
    ModelParams params = [&]() {
        if (resume) {
            return build_params(*resume);
        }
        Rng init_rng = base.derive(1);
        return ModelParams::init(model_cfg, init_rng);
    }();
    AdamW opt(params.registry, cfg);
    Rng flow = base.derive(2);
    long long step = 0;
    double best_f1 = -1.0;
    if (resume) {
        opt.m = resume->opt_m;
        opt.v = resume->opt_v;
        opt.step_count = resume->step;
        flow.restore(resume->rng_state);
        step = resume->step;
        best_f1 = resume->best_val_f1;
    }

    if (cfg.freeze_encoder) {
        for (auto& np : params.registry) {
            if (np.group == ParamGroup::Encoder) {
                np.t->requires_grad = false;
                np.t->grad.clear();
            }
        }
    }

    const long long clips_per_step = static_cast<long long>(cfg.batch_size) * cfg.grad_accum;
    const long long steps_per_epoch =
        (static_cast<long long>(train_clips.size()) + clips_per_step - 1) / clips_per_step;
    const long long val_interval = std::max<long long>(
        1, static_cast<long long>(std::ceil(static_cast<double>(steps_per_epoch) * cfg.validate_every)));
    const long long total_steps =
        cfg.max_steps > 0 ? cfg.max_steps : steps_per_epoch * cfg.epochs;

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, resume ? std::ios::app : std::ios::out);
        if (!log) {
            throw DataError("train: cannot open log " + log_path);
        }
    }

    TrainResult result;
    Checkpoint best_ckpt;
    bool have_best = false;
    if (resume && resume->best_val_f1 >= 0.0) {
        // the resumed file is the latest state; the caller keeps its own best
        best_ckpt = *resume;
        have_best = true;
    }

    std::vector<std::size_t> order(train_clips.size());
    long long order_epoch = -1;
    const auto ensure_order = [&](long long epoch) {
        if (epoch == order_epoch) {
            return;
        }
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        Rng shuffle_rng = base.derive(1000 + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        order_epoch = epoch;
    };

    const auto validate = [&](long long at_step) {
        const auto report = evaluate(model_cfg, params, valid_clips);
        ValRecord rec;
        rec.step = at_step;
        rec.accuracy = report.inst_accuracy;
        rec.macro_f1 = report.macro_f1;
        rec.inst_macro_f1 = report.inst_macro_f1;
        result.val_history.push_back(rec);
        if (rec.inst_macro_f1 > best_f1) {
            best_f1 = rec.inst_macro_f1;
            best_ckpt = snapshot(model_cfg, mel_cfg, cfg, params, opt, at_step, flow, best_f1);
            have_best = true;
        }
        if (log) {
            nlohmann::json j{{"step", at_step},
                             {"val_accuracy", rec.accuracy},
                             {"val_macro_f1", rec.macro_f1},
                             {"val_inst_macro_f1", rec.inst_macro_f1},
                             {"best_val_f1", best_f1}};
            log << j.dump() << "\n";
        }
    };

    while (step < total_steps) {
        const long long epoch = step / steps_per_epoch;
        const long long pos = step % steps_per_epoch;
        ensure_order(epoch);

        const std::size_t begin = static_cast<std::size_t>(pos * clips_per_step);
        const std::size_t end =
            std::min(order.size(), begin + static_cast<std::size_t>(clips_per_step));
        double loss_sum = 0.0;
        long long loss_count = 0;

        std::size_t cursor = begin;
        for (int acc = 0; acc < cfg.grad_accum && cursor < end; ++acc) {
            std::vector<TensorPtr> losses;
            for (int b = 0; b < cfg.batch_size && cursor < end; ++b, ++cursor) {
                const ClipSample& stored = train_clips[order[cursor]];
                ClipSample augmented;
                const ClipSample* sample = &stored;
                if (cfg.track_perm) {
                    std::vector<int> ids;
                    for (const auto& tr : stored.input.tracks) {
                        ids.push_back(tr.meta.track_id);
                    }
                    const auto perm = sample_permutation(ids, model_cfg.max_tracks, flow);
                    augmented = apply_permutation(stored, perm);
                    sample = &augmented;
                }
                const auto fwd = forward(sample->input, model_cfg, params, /*training=*/true, flow);
                TensorPtr loss;
                if (model_cfg.segment_level) {
                    loss = cross_entropy(fwd.logits, {segment_label(*sample, model_cfg.scheme)});
                } else {
                    loss = cross_entropy(fwd.logits, labels_for(*sample, model_cfg.scheme));
                }
                loss_sum += loss->item();
                ++loss_count;
                losses.push_back(loss);
            }
            TensorPtr micro = losses[0];
            for (std::size_t i = 1; i < losses.size(); ++i) {
                micro = add(micro, losses[i]);
            }
            micro = scale(micro, 1.0 / (static_cast<double>(losses.size()) * cfg.grad_accum));
            if (!std::isfinite(micro->item())) {
                throw NumericError("train: non-finite loss at step " + std::to_string(step));
            }
            micro->backward();
        }

        opt.step(params.registry);
        ++step;
        const double step_loss = loss_sum / static_cast<double>(loss_count);
        result.loss_curve.push_back(step_loss);
        if (log) {
            nlohmann::json j{{"step", step},
                             {"epoch", epoch},
                             {"loss", step_loss},
                             {"lr_encoder", cfg.lr_encoder},
                             {"lr_attention", cfg.lr_attention},
                             {"lr_classifier", cfg.lr_classifier}};
            log << j.dump() << "\n";
        }

        if (step % val_interval == 0 || step == total_steps) {
            validate(step);
        }
    }

    if (!have_best) {
        validate(step);
    }
    result.best = best_ckpt;
    result.final = snapshot(model_cfg, mel_cfg, cfg, params, opt, step, flow, best_f1);
    return result;
}

}  // namespace leadnet
