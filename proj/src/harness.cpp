#include "imprint/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "imprint/checkpoint.hpp"
#include "imprint/error.hpp"
#include "imprint/imprinting.hpp"
#include "imprint/optim.hpp"
#include "imprint/sampler.hpp"

namespace imprint {

using nlohmann::json;

namespace {

std::uint64_t nshot_tag(const NShot& n) {
    return n.count ? static_cast<std::uint64_t>(*n.count) : ~std::uint64_t{0};
}

}  // namespace

std::vector<int> TrainData::model_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        const int y = dataset->labels().at(i);
        const auto it = std::find(classes.begin(), classes.end(), y);
        if (it == classes.end()) {
            throw DataError("example " + std::to_string(i) + " has label " + std::to_string(y) +
                            ", which the model does not predict");
        }
        out.push_back(static_cast<int>(it - classes.begin()));
    }
    return out;
}

TrainOptions TrainOptions::from_config(const ExperimentConfig& config, MultiplierScope scope, bool oversample,
                                       std::uint64_t seed) {
    TrainOptions o;
    o.epochs = config.epochs;
    o.schedule = config.schedule();
    o.momentum = config.momentum;
    o.weight_decay = config.weight_decay;
    o.batch_size = config.batch_size;
    o.lr_multiplier = config.lr_multiplier;
    o.multiplier_scope = scope;
    o.oversample = oversample;
    o.seed = seed;
    return o;
}

int select_best_epoch(std::span<const double> val_accuracy) {
    int best = -1;
    for (std::size_t e = 0; e < val_accuracy.size(); ++e) {
        if (best < 0 || val_accuracy[e] > val_accuracy[best]) best = static_cast<int>(e);
    }
    return best;
}

double accuracy(const ModelParams<float>& params, const TrainData& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("accuracy over an empty set");
    Tape<float> tape;
    tape.set_recording(false);
    const auto predicted = predict_batch(forward_logits(params, tape, data.dataset->gather<float>(indices)));
    const auto truth = data.model_labels(indices);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

ConfusionMatrix evaluate(const ModelParams<float>& params, const Dataset& dataset, std::span<const std::size_t> indices,
                         std::span<const int> classes) {
    if (classes.size() != params.spec.num_classes) {
        throw ContractError("evaluate: class list does not match the model's class count");
    }
    ConfusionMatrix cm(dataset.num_classes());
    if (indices.empty()) return cm;
    Tape<float> tape;
    tape.set_recording(false);
    const auto predicted = predict_batch(forward_logits(params, tape, dataset.gather<float>(indices)));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        cm.add(dataset.labels()[indices[i]], classes[predicted[i]]);
    }
    return cm;
}

TrainResult train(ModelParams<float> params, const TrainData& data, const TrainOptions& options) {
    if (!data.dataset) throw ContractError("train: no dataset");
    if (data.train.empty()) throw DataError("train: empty training partition");
    if (data.val.empty()) throw DataError("train: empty validation partition");
    if (data.classes.size() != params.spec.num_classes) {
        throw ContractError("train: class list does not match the model's class count");
    }
    {
        std::vector<bool> covered(data.classes.size(), false);
        for (int y : data.model_labels(data.val)) covered[y] = true;
        if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
            throw DataError("train: validation partition does not cover every class");
        }
    }

    params.set_requires_grad(true);
    auto tensors = params.tensors();
    const auto roles = params.roles();
    OptimizerState<float> state;
    state.momentum = static_cast<float>(options.momentum);
    state.weight_decay = static_cast<float>(options.weight_decay);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const bool boosted =
            options.multiplier_scope == MultiplierScope::EmbeddingAndHead && roles[i] != ParamRole::Extractor;
        state.add(tensors[i], boosted ? static_cast<float>(options.lr_multiplier) : 1.0f);
    }

    TrainResult result;
    result.initial_val_accuracy = accuracy(params, data, data.val);
    result.best_val_accuracy = result.initial_val_accuracy;
    result.best = params.clone();
    if (options.epochs <= 0) return result;

    const std::size_t per_epoch = batches_per_epoch(data.train.size(), options.batch_size);
    std::optional<BatchStream> stream;
    if (options.oversample) {
        stream.emplace(data.train, data.dataset->labels(), data.classes, options.batch_size,
                       per_epoch * static_cast<std::size_t>(options.epochs), options.seed);
    }

    std::size_t step = 0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double lr = lr_at(options.schedule, epoch);
        std::vector<std::vector<std::size_t>> batches;
        if (stream) {
            for (std::size_t b = 0; b < per_epoch; ++b) batches.push_back(stream->next());
        } else {
            batches = shuffled_batches(data.train, options.batch_size,
                                       derive_seed(options.seed, {static_cast<std::uint64_t>(epoch)}));
        }

        double loss_sum = 0;
        for (const auto& batch : batches) {
            const auto x = data.dataset->gather<float>(batch);
            const auto y = data.model_labels(batch);
            Tape<float> tape;
            const auto l = loss(params, tape, x, y);
            if (!std::isfinite(l.item())) throw TrainingDiverged(epoch, lr);
            loss_sum += l.item();
            tape.backward(l);
            sgd_step<float>(tensors, state, static_cast<float>(lr));
            params.zero_grad();
            if (options.on_step) options.on_step(params, epoch, step);
            ++step;
        }
        result.train_loss.push_back(loss_sum / static_cast<double>(batches.size()));
        const double acc = accuracy(params, data, data.val);
        result.val_accuracy.push_back(acc);
        if (result.best_epoch < 0 || acc > result.best_val_accuracy) {
            result.best_epoch = epoch;
            result.best_val_accuracy = acc;
            result.best = params.clone();
        }
    }
    result.best.set_requires_grad(false);
    return result;
}

ExperimentLayout ExperimentLayout::from(const Dataset& dataset, const ExperimentConfig& config) {
    ExperimentLayout layout;
    layout.novel_class = dataset.class_index(config.dataset.novel_class);
    if (dataset.num_classes() < 3) {
        throw DataError("need at least two base classes besides the novel class");
    }
    for (int c = 0; c < static_cast<int>(dataset.num_classes()); ++c) {
        layout.all_classes.push_back(c);
        if (c != layout.novel_class) layout.base_classes.push_back(c);
    }
    return layout;
}

NetworkSpec network_for(const ExperimentConfig& config, const Dataset& dataset, std::size_t num_classes,
                        HeadKind head) {
    NetworkSpec spec = config.network;
    spec.input_dim = dataset.dim();
    spec.num_classes = num_classes;
    spec.head_kind = head;
    return spec;
}

FoldPlan fold_plan_for(const Dataset& dataset, const ExperimentConfig& config) {
    return stratified_kfold(dataset.labels(), config.k_folds, derive_seed(config.seed, {kSeedFolds}));
}

FoldPartition make_fold_partition(const Dataset& dataset, const FoldPlan& plan, int fold,
                                  const ExperimentConfig& config) {
    if (plan.num_examples != dataset.size()) throw DataError("fold plan was built for a different dataset");
    FoldPartition part;
    part.fold = fold;
    part.test = plan.test_indices(fold);
    auto split = train_val_split(plan.train_indices(fold), dataset.labels(), config.val_frac,
                                 derive_seed(config.seed, {kSeedValSplit, static_cast<std::uint64_t>(fold)}));
    part.train = std::move(split.train);
    part.val = std::move(split.val);
    return part;
}

BaseModel train_base_model(const Dataset& dataset, const FoldPartition& part, const ExperimentConfig& config) {
    const auto layout = ExperimentLayout::from(dataset, config);
    TrainData data;
    data.dataset = &dataset;
    data.train = filter_out_class(part.train, dataset.labels(), layout.novel_class);
    data.val = filter_out_class(part.val, dataset.labels(), layout.novel_class);
    data.classes = layout.base_classes;

    const auto fold = static_cast<std::uint64_t>(part.fold);
    Rng rng(derive_seed(config.seed, {kSeedInit, fold}));
    auto params = init_params<float>(
        network_for(config, dataset, layout.base_classes.size(), HeadKind::Normalized), rng);
    auto options = TrainOptions::from_config(config, MultiplierScope::EmbeddingAndHead, config.oversample_base,
                                             derive_seed(config.seed, {kSeedBaseStream, fold}));
    return {part.fold, train(std::move(params), data, options)};
}

std::vector<std::size_t> nshot_subset(const Dataset& dataset, const FoldPartition& part, const NShot& n,
                                      const ExperimentConfig& config) {
    const auto layout = ExperimentLayout::from(dataset, config);
    std::size_t available = 0;
    for (auto i : part.train) available += dataset.labels()[i] == layout.novel_class;
    const std::size_t count = n.count.value_or(available);
    if (count == 0) throw DataError("n-shot count must be at least 1: every class must be present in training");
    return select_nshot(part.train, dataset.labels(), layout.novel_class, count,
                        derive_seed(config.seed, {kSeedNShot, static_cast<std::uint64_t>(part.fold), nshot_tag(n)}));
}

namespace {

// Training partition after the n-shot cut: base-class examples plus the subset.
std::vector<std::size_t> with_subset(const Dataset& dataset, const FoldPartition& part, int novel,
                                     std::span<const std::size_t> subset) {
    auto out = filter_out_class(part.train, dataset.labels(), novel);
    out.insert(out.end(), subset.begin(), subset.end());
    std::sort(out.begin(), out.end());
    return out;
}

RunFragment fragment_from(const std::string& model, const NShot& n, const FoldPartition& part,
                          std::span<const std::size_t> subset, const TrainResult& trained, const Dataset& dataset,
                          std::span<const int> classes) {
    RunFragment frag;
    frag.model = model;
    frag.n = n;
    frag.n_used = subset.size();
    frag.fold = part.fold;
    frag.confusion = evaluate(trained.best, dataset, part.test, classes);
    frag.best_epoch = trained.best_epoch;
    frag.best_val_accuracy = trained.best_val_accuracy;
    frag.val_accuracy = trained.val_accuracy;
    frag.train_loss = trained.train_loss;
    frag.test_fingerprint = fingerprint(part.test);
    frag.nshot_fingerprint = fingerprint(subset);
    frag.params = trained.best;
    return frag;
}

}  // namespace

RunFragment run_imprinted_pipeline(const Dataset& dataset, const FoldPlan& plan, int fold, const NShot& n,
                                   const ExperimentConfig& config, const BaseModel* base) {
    const auto layout = ExperimentLayout::from(dataset, config);
    const auto part = make_fold_partition(dataset, plan, fold, config);
    const auto subset = nshot_subset(dataset, part, n, config);

    std::optional<BaseModel> own;
    if (!base || base->fold != fold) {
        own = train_base_model(dataset, part, config);
        base = &*own;
    }
    auto imprinted = imprint_from_indices(base->result.best, dataset, subset, layout.novel_class);
    return finetune_imprinted(dataset, part, n, std::move(imprinted), config);
}

RunFragment finetune_imprinted(const Dataset& dataset, const FoldPartition& part, const NShot& n,
                               ModelParams<float> imprinted, const ExperimentConfig& config) {
    const auto layout = ExperimentLayout::from(dataset, config);
    if (imprinted.spec.num_classes != layout.all_classes.size() || imprinted.spec.head_kind != HeadKind::Normalized) {
        throw ContractError("finetune_imprinted: expected a normalized model over every class");
    }
    const auto subset = nshot_subset(dataset, part, n, config);
    const auto imprint_only = evaluate(imprinted, dataset, part.test, layout.all_classes);

    TrainData data;
    data.dataset = &dataset;
    data.train = with_subset(dataset, part, layout.novel_class, subset);
    data.val = part.val;
    data.classes = layout.all_classes;
    const auto fold = static_cast<std::uint64_t>(part.fold);
    const auto stream_seed = derive_seed(config.seed, {kSeedFineTuneStream, fold, nshot_tag(n)});
    auto options = TrainOptions::from_config(config, MultiplierScope::None, true, stream_seed);
    const auto trained = train(std::move(imprinted), data, options);

    auto frag = fragment_from(kImprintedModel, n, part, subset, trained, dataset, layout.all_classes);
    frag.imprint_only = imprint_only;
    frag.stream_seed = stream_seed;
    frag.init_seed = derive_seed(config.seed, {kSeedInit, fold});
    return frag;
}

RunFragment run_joint_pipeline(const Dataset& dataset, const FoldPlan& plan, int fold, const NShot& n,
                               const ExperimentConfig& config) {
    const auto layout = ExperimentLayout::from(dataset, config);
    const auto part = make_fold_partition(dataset, plan, fold, config);
    const auto subset = nshot_subset(dataset, part, n, config);

    TrainData data;
    data.dataset = &dataset;
    data.train = with_subset(dataset, part, layout.novel_class, subset);
    data.val = part.val;
    data.classes = layout.all_classes;

    // Same seed as the base model: both pipelines start from the same
    // extractor and embedding weights.
    const auto init_seed = derive_seed(config.seed, {kSeedInit, static_cast<std::uint64_t>(fold)});
    Rng rng(init_seed);
    auto params = init_params<float>(network_for(config, dataset, layout.all_classes.size(), HeadKind::Joint), rng);
    const auto stream_seed =
        derive_seed(config.seed, {kSeedFineTuneStream, static_cast<std::uint64_t>(fold), nshot_tag(n)});
    auto options = TrainOptions::from_config(config, MultiplierScope::EmbeddingAndHead, true, stream_seed);
    const auto trained = train(std::move(params), data, options);

    auto frag = fragment_from(kJointModel, n, part, subset, trained, dataset, layout.all_classes);
    frag.stream_seed = stream_seed;
    frag.init_seed = init_seed;
    return frag;
}

json RunFragment::to_json() const {
    json sens = json::array(), prec = json::array();
    for (const auto& v : per_class_sensitivity(confusion)) sens.push_back(optional_to_json(v));
    for (const auto& v : per_class_ppv(confusion)) prec.push_back(optional_to_json(v));
    const auto macro_sens = macro_average(per_class_sensitivity(confusion));
    const auto macro_ppv = macro_average(per_class_ppv(confusion));
    json doc = {
        {"model", model},
        {"n", n.label()},
        {"n_used", n_used},
        {"fold", fold},
        {"confusion", confusion.to_json()},
        {"sensitivity", sens},
        {"ppv", prec},
        {"macro_sensitivity", optional_to_json(macro_sens.value)},
        {"macro_sensitivity_defined", macro_sens.defined_count},
        {"macro_ppv", optional_to_json(macro_ppv.value)},
        {"macro_ppv_defined", macro_ppv.defined_count},
        {"best_epoch", best_epoch},
        {"best_val_accuracy", best_val_accuracy},
        {"val_accuracy", val_accuracy},
        {"train_loss", train_loss},
        {"test_fingerprint", test_fingerprint},
        {"nshot_fingerprint", nshot_fingerprint},
        {"seeds", {{"init", init_seed}, {"stream", stream_seed}}},
    };
    if (imprint_only) doc["imprint_only_confusion"] = imprint_only->to_json();
    return doc;
}

RunFragment RunFragment::from_json(const json& doc) {
    try {
        RunFragment f;
        f.model = doc.at("model").get<std::string>();
        const auto n = doc.at("n").get<std::string>();
        f.n = n == "all" ? NShot::all() : NShot::of(std::stoull(n));
        f.n_used = doc.at("n_used").get<std::size_t>();
        f.fold = doc.at("fold").get<int>();
        f.confusion = ConfusionMatrix::from_json(doc.at("confusion"));
        if (doc.contains("imprint_only_confusion")) {
            f.imprint_only = ConfusionMatrix::from_json(doc.at("imprint_only_confusion"));
        }
        f.best_epoch = doc.at("best_epoch").get<int>();
        f.best_val_accuracy = doc.at("best_val_accuracy").get<double>();
        f.val_accuracy = doc.at("val_accuracy").get<std::vector<double>>();
        f.train_loss = doc.at("train_loss").get<std::vector<double>>();
        f.test_fingerprint = doc.at("test_fingerprint").get<std::string>();
        f.nshot_fingerprint = doc.at("nshot_fingerprint").get<std::string>();
        f.init_seed = doc.at("seeds").at("init").get<std::uint64_t>();
        f.stream_seed = doc.at("seeds").at("stream").get<std::uint64_t>();
        return f;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run record: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw DataError("malformed run record: bad n value");
    }
}

std::vector<CellAggregate> aggregate_folds(std::span<const RunFragment> fragments, std::size_t num_classes) {
    // Cells in first-appearance order.
    std::vector<CellAggregate> cells;
    std::vector<std::vector<const RunFragment*>> members;
    for (const auto& f : fragments) {
        auto it = std::find_if(cells.begin(), cells.end(),
                               [&](const CellAggregate& c) { return c.model == f.model && c.n == f.n; });
        if (it == cells.end()) {
            cells.push_back({f.model, f.n, {}, {}});
            members.emplace_back();
            it = cells.end() - 1;
        }
        members[it - cells.begin()].push_back(&f);
    }

    for (std::size_t k = 0; k < cells.size(); ++k) {
        auto& cell = cells[k];
        cell.per_class.resize(num_classes);
        for (std::size_t c = 0; c < num_classes; ++c) {
            std::vector<std::optional<double>> sens, prec;
            for (const auto* f : members[k]) {
                sens.push_back(sensitivity(f->confusion, c));
                prec.push_back(ppv(f->confusion, c));
            }
            cell.per_class[c] = {summarize(sens), summarize(prec)};
        }
        std::vector<std::optional<double>> macro_sens, macro_prec;
        for (const auto* f : members[k]) {
            macro_sens.push_back(macro_average(per_class_sensitivity(f->confusion)).value);
            macro_prec.push_back(macro_average(per_class_ppv(f->confusion)).value);
        }
        cell.macro = {summarize(macro_sens), summarize(macro_prec)};
    }
    return cells;
}

const CellAggregate& MetricsReport::cell(const std::string& model, const NShot& n) const {
    for (const auto& c : aggregates) {
        if (c.model == model && c.n == n) return c;
    }
    throw ContractError("report has no cell for " + model + " n=" + n.label());
}

namespace {

std::string format_value(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *v);
    return std::string(buf, ptr);
}

json summary_to_json(const FoldSummary& s) {
    return {{"mean", optional_to_json(s.mean)}, {"std", optional_to_json(s.std)}, {"defined_folds", s.defined}};
}

}  // namespace

std::string MetricsReport::summary_csv() const {
    std::string out = "model,n,class,metric,mean,std,defined_folds\n";
    auto row = [&](const CellAggregate& cell, const std::string& cls, const char* metric, const FoldSummary& s) {
        out += cell.model + "," + cell.n.label() + "," + cls + "," + metric + "," + format_value(s.mean) + "," +
               format_value(s.std) + "," + std::to_string(s.defined) + "\n";
    };
    for (const auto& cell : aggregates) {
        for (std::size_t c = 0; c < cell.per_class.size(); ++c) {
            row(cell, class_names.at(c), "sensitivity", cell.per_class[c].sensitivity);
            row(cell, class_names.at(c), "ppv", cell.per_class[c].ppv);
        }
        row(cell, "macro", "sensitivity", cell.macro.sensitivity);
        row(cell, "macro", "ppv", cell.macro.ppv);
    }
    return out;
}

json MetricsReport::to_json() const {
    json run_docs = json::array();
    for (const auto& r : runs) run_docs.push_back(r.to_json());
    json summary = json::array();
    for (const auto& cell : aggregates) {
        json per_class = json::array();
        for (std::size_t c = 0; c < cell.per_class.size(); ++c) {
            per_class.push_back({{"class", class_names.at(c)},
                                 {"sensitivity", summary_to_json(cell.per_class[c].sensitivity)},
                                 {"ppv", summary_to_json(cell.per_class[c].ppv)}});
        }
        summary.push_back({{"model", cell.model},
                           {"n", cell.n.label()},
                           {"per_class", per_class},
                           {"macro",
                            {{"sensitivity", summary_to_json(cell.macro.sensitivity)},
                             {"ppv", summary_to_json(cell.macro.ppv)}}}});
    }
    return {
        {"format", "imprint-results"},
        {"version", 1},
        {"class_names", class_names},
        {"novel_class", class_names.at(novel_class)},
        {"config", config},
        {"runs", run_docs},
        {"summary", summary},
    };
}

MetricsReport MetricsReport::from_json(const json& doc) {
    try {
        if (doc.at("format") != "imprint-results") throw DataError("not an imprint results file");
        MetricsReport report;
        report.class_names = doc.at("class_names").get<std::vector<std::string>>();
        const auto novel = doc.at("novel_class").get<std::string>();
        const auto it = std::find(report.class_names.begin(), report.class_names.end(), novel);
        if (it == report.class_names.end()) throw DataError("results: novel class is not among the class names");
        report.novel_class = static_cast<int>(it - report.class_names.begin());
        report.config = doc.at("config");
        for (const auto& r : doc.at("runs")) report.runs.push_back(RunFragment::from_json(r));
        report.aggregates = aggregate_folds(report.runs, report.class_names.size());
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed results file: ") + e.what());
    }
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            while (true) {
                const auto i = next.fetch_add(1);
                if (i >= count) return;
                {
                    std::lock_guard lock(failure_mutex);
                    if (failure) return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

MetricsReport nshot_sweep(const Dataset& dataset, const ExperimentConfig& config, const SweepOptions& options) {
    const auto layout = ExperimentLayout::from(dataset, config);
    const auto plan = fold_plan_for(dataset, config);

    std::vector<FoldPartition> parts;
    for (int f = 0; f < config.k_folds; ++f) {
        parts.push_back(make_fold_partition(dataset, plan, f, config));
        std::size_t available = 0;
        for (auto i : parts.back().train) available += dataset.labels()[i] == layout.novel_class;
        for (const auto& n : config.n_shot) {
            if (n.count && *n.count > available) {
                throw DataError("n=" + n.label() + " exceeds the " + std::to_string(available) +
                                " novel training examples available in fold " + std::to_string(f));
            }
        }
    }

    auto say = [&](const std::string& msg) {
        if (options.progress) options.progress(msg);
    };

    std::vector<BaseModel> bases(parts.size());
    parallel_for(parts.size(), options.jobs, [&](std::size_t f) {
        bases[f] = train_base_model(dataset, parts[f], config);
        say("base model fold " + std::to_string(f) + " val acc " + std::to_string(bases[f].result.best_val_accuracy));
    });

    const std::vector<std::string> models{kImprintedModel, kJointModel};
    const std::size_t folds = parts.size(), shots = config.n_shot.size();
    std::vector<RunFragment> runs(models.size() * shots * folds);
    parallel_for(runs.size(), options.jobs, [&](std::size_t cell) {
        const std::size_t m = cell / (shots * folds);
        const std::size_t s = (cell / folds) % shots;
        const int f = static_cast<int>(cell % folds);
        const auto& n = config.n_shot[s];
        auto frag = m == 0 ? run_imprinted_pipeline(dataset, plan, f, n, config, &bases[f])
                           : run_joint_pipeline(dataset, plan, f, n, config);
        if (options.checkpoint_dir) {
            CheckpointMeta meta{frag.best_epoch, frag.best_val_accuracy, frag.model};
            save_checkpoint(*options.checkpoint_dir /
                                (frag.model + "_n" + n.label() + "_fold" + std::to_string(f) + ".json"),
                            *frag.params, meta);
        }
        frag.params.reset();
        say(frag.model + " n=" + n.label() + " fold " + std::to_string(f) + " done");
        runs[cell] = std::move(frag);
    });

    MetricsReport report;
    report.class_names = dataset.class_names();
    report.novel_class = layout.novel_class;
    report.config = config_to_json(config);
    report.runs = std::move(runs);
    report.aggregates = aggregate_folds(report.runs, dataset.num_classes());
    return report;
}

}  // namespace imprint
