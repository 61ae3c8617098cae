#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "imprint/config.hpp"
#include "imprint/dataset.hpp"
#include "imprint/metrics.hpp"
#include "imprint/model.hpp"
#include "imprint/splits.hpp"
#include "json.hpp"

namespace imprint {

inline constexpr const char* kImprintedModel = "imprinted";
inline constexpr const char* kJointModel = "joint";

/// Tags for derive_seed; each names one independent random stream.
enum SeedTag : std::uint64_t {
    kSeedFolds = 1,
    kSeedValSplit = 2,
    kSeedInit = 3,
    kSeedBaseStream = 4,
    kSeedNShot = 5,
    kSeedFineTuneStream = 6,
};

/// Which parameters get the learning-rate multiplier.
enum class MultiplierScope {
    /// Embedding layer and classifier head: the layers that start from
    /// random initialization on top of the extractor.
    EmbeddingAndHead,
    /// Nothing; every layer trains at the scheduled rate.
    None,
};

/// Training partition for one run. `classes` lists the dataset labels the
/// model predicts, in model class order.
struct TrainData {
    const Dataset* dataset = nullptr;
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<int> classes;

    std::vector<int> model_labels(std::span<const std::size_t> indices) const;
};

struct TrainOptions {
    int epochs = 40;
    LrSchedule schedule;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t batch_size = 64;
    double lr_multiplier = 10.0;
    MultiplierScope multiplier_scope = MultiplierScope::EmbeddingAndHead;
    /// Class-uniform sampling with replacement; otherwise shuffled epochs.
    bool oversample = true;
    std::uint64_t seed = 0;
    /// Called after every optimizer step.
    std::function<void(const ModelParams<float>&, int epoch, std::size_t step)> on_step;

    static TrainOptions from_config(const ExperimentConfig& config, MultiplierScope scope, bool oversample,
                                    std::uint64_t seed);
};

struct TrainResult {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    /// Epoch of the selected parameters; -1 when no epoch ran.
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    double initial_val_accuracy = 0.0;
    ModelParams<float> best;
};

/// Minibatch SGD with momentum and step-decayed learning rate. Keeps the
/// parameters with the highest validation accuracy (earliest on ties).
/// Throws TrainingDiverged on a non-finite loss.
TrainResult train(ModelParams<float> params, const TrainData& data, const TrainOptions& options);

/// Index of the highest value, earliest on ties; -1 for an empty list.
int select_best_epoch(std::span<const double> val_accuracy);

double accuracy(const ModelParams<float>& params, const TrainData& data, std::span<const std::size_t> indices);

/// Confusion matrix over dataset labels (model classes mapped back through
/// `classes`).
ConfusionMatrix evaluate(const ModelParams<float>& params, const Dataset& dataset,
                         std::span<const std::size_t> indices, std::span<const int> classes);

/// Partitions shared by both pipelines for one fold.
struct FoldPartition {
    int fold = 0;
    std::vector<std::size_t> test;
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// The fold plan a sweep with this config uses.
FoldPlan fold_plan_for(const Dataset& dataset, const ExperimentConfig& config);

FoldPartition make_fold_partition(const Dataset& dataset, const FoldPlan& plan, int fold,
                                  const ExperimentConfig& config);

/// Seeds and label layout of an experiment over one dataset.
struct ExperimentLayout {
    int novel_class = 0;
    std::vector<int> base_classes;
    std::vector<int> all_classes;

    static ExperimentLayout from(const Dataset& dataset, const ExperimentConfig& config);
};

NetworkSpec network_for(const ExperimentConfig& config, const Dataset& dataset, std::size_t num_classes,
                        HeadKind head);

/// Trained two-class (base classes only) normalized model for one fold.
struct BaseModel {
    int fold = 0;
    TrainResult result;
};

BaseModel train_base_model(const Dataset& dataset, const FoldPartition& part, const ExperimentConfig& config);

/// The n-shot novel subset of a fold's training partition, shared by both
/// pipelines.
std::vector<std::size_t> nshot_subset(const Dataset& dataset, const FoldPartition& part, const NShot& n,
                                      const ExperimentConfig& config);

/// Result of one (model, n, fold) cell.
struct RunFragment {
    std::string model;
    NShot n;
    std::size_t n_used = 0;
    int fold = 0;
    ConfusionMatrix confusion{1};
    /// Imprinted pipeline only: test confusion right after imprinting,
    /// before fine-tuning.
    std::optional<ConfusionMatrix> imprint_only;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    std::vector<double> val_accuracy;
    std::vector<double> train_loss;
    std::string test_fingerprint;
    std::string nshot_fingerprint;
    std::uint64_t stream_seed = 0;
    std::uint64_t init_seed = 0;
    /// Selected parameters; not serialized with the fragment.
    std::optional<ModelParams<float>> params;

    nlohmann::json to_json() const;
    static RunFragment from_json(const nlohmann::json& doc);
};

/// Base training, imprinting with the n-shot subset, fine-tuning of the
/// three-class model, evaluation on the untouched test fold. A trained base
/// model for the fold may be passed in to skip step one.
RunFragment run_imprinted_pipeline(const Dataset& dataset, const FoldPlan& plan, int fold, const NShot& n,
                                   const ExperimentConfig& config, const BaseModel* base = nullptr);

/// Fine-tuning stage of the imprinted pipeline, starting from an already
/// imprinted three-class model.
RunFragment finetune_imprinted(const Dataset& dataset, const FoldPartition& part, const NShot& n,
                               ModelParams<float> imprinted, const ExperimentConfig& config);

/// Three-class joint-head model trained from random initialization on the
/// same partitions and batch stream.
RunFragment run_joint_pipeline(const Dataset& dataset, const FoldPlan& plan, int fold, const NShot& n,
                               const ExperimentConfig& config);

struct MetricSummary {
    FoldSummary sensitivity;
    FoldSummary ppv;
};

struct CellAggregate {
    std::string model;
    NShot n;
    /// Per class, in dataset label order.
    std::vector<MetricSummary> per_class;
    MetricSummary macro;
};

struct MetricsReport {
    std::vector<std::string> class_names;
    int novel_class = 0;
    nlohmann::json config;
    std::vector<RunFragment> runs;
    std::vector<CellAggregate> aggregates;

    const CellAggregate& cell(const std::string& model, const NShot& n) const;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& doc);
    /// `model,n,class,metric,mean,std,defined_folds`, one row per
    /// (model, n, class or "macro", metric).
    std::string summary_csv() const;
};

/// Groups fragments by (model, n) and computes mean and sample standard
/// deviation across folds. Undefined fold values are skipped and counted.
std::vector<CellAggregate> aggregate_folds(std::span<const RunFragment> fragments, std::size_t num_classes);

struct SweepOptions {
    std::size_t jobs = 1;
    /// When set, the selected parameters of every cell are written here.
    std::optional<std::filesystem::path> checkpoint_dir;
    std::function<void(const std::string&)> progress;
};

/// Both pipelines for every n and every fold, on identical partitions.
MetricsReport nshot_sweep(const Dataset& dataset, const ExperimentConfig& config, const SweepOptions& options = {});

/// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace imprint
