#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "leadnet/datagen.hpp"
#include "leadnet/dataset.hpp"
#include "leadnet/train.hpp"

namespace acceptance {

struct CriterionResult {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    std::function<CriterionResult()> fn;
};

const std::vector<Criterion>& all_criteria();

// ---- shared helpers ----

/// Scratch directory for one criterion; removed on destruction.
struct Workspace {
    std::filesystem::path root;
    explicit Workspace(const std::string& name);
    ~Workspace();
    std::string path(const std::string& rel) const { return (root / rel).string(); }
};

/// Desk-scale training recipe used by the training-based criteria. The model
/// keeps the published architecture; size and optimization are scaled to CPU
/// budgets (smaller width, uniform higher learning rate, longer schedule,
/// lighter dropout) so runs converge in minutes.
leadnet::ModelConfig desk_model_config();
leadnet::TrainConfig desk_train_config(std::uint64_t seed);

struct RunOutcome {
    leadnet::Checkpoint best;
    double test_track_f1 = 0.0;
    double test_inst_f1 = 0.0;
    double test_track_acc = 0.0;
    leadnet::MetricsReport report;
};

/// Train on the manifest's train/valid splits and evaluate the best
/// checkpoint on the test split.
RunOutcome train_and_eval(const leadnet::DatasetManifest& manifest, leadnet::ModelConfig model_cfg,
                          const leadnet::TrainConfig& train_cfg);

std::string fmt(const char* format, ...);

namespace detail {
CriterionResult run_c1();
CriterionResult run_c2();
CriterionResult run_c3();
CriterionResult run_c4();
CriterionResult run_c5();
CriterionResult run_c6();
CriterionResult run_c7();
CriterionResult run_c8();
CriterionResult run_c9();
}  // namespace detail

}  // namespace acceptance
