#include "imprint/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "imprint/checkpoint.hpp"
#include "imprint/error.hpp"
#include "imprint/harness.hpp"
#include "imprint/imprinting.hpp"
#include "json.hpp"

namespace imprint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    bool json_output = false;
    bool verbose = false;
    std::string data;
    std::string folds;
    std::optional<int> fold;
    std::string n;
    std::string checkpoint;
    std::string results;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// State shared by the subcommand handlers.
class Session {
public:
    Session(Options opts, std::vector<std::string> args, std::ostream& out, std::ostream& err)
        : opts_(std::move(opts)), args_(std::move(args)), out_(out), err_(err) {
        config_ = opts_.config_path.empty() ? parse_config(json::object()) : load_config(opts_.config_path);
        if (opts_.seed) {
            config_.seed = *opts_.seed;
            config_.dataset.synthetic.seed = *opts_.seed;
        }
        if (!opts_.data.empty()) config_.dataset.path = opts_.data;
        summary_ = json::object();
    }

    int dispatch() {
        const auto& s = opts_.subcommand;
        if (s == "synth") synth();
        else if (s == "split") split();
        else if (s == "train-base") train_base();
        else if (s == "imprint") imprint();
        else if (s == "finetune") finetune();
        else if (s == "train-joint") train_joint();
        else if (s == "evaluate") evaluate_checkpoint();
        else if (s == "sweep") sweep();
        else if (s == "report") report();
        else throw UsageError("unknown subcommand " + s);
        finish();
        return kExitOk;
    }

private:
    void synth() {
        const auto dataset = synth_generate(config_.dataset.synthetic.spec(), config_.dataset.synthetic.seed);
        const auto path = output("dataset.csv");
        save_csv(path, dataset);
        summary_["examples"] = dataset.size();
        summary_["class_counts"] = dataset.class_counts();
        log("wrote " + std::to_string(dataset.size()) + " examples to " + path.string());
    }

    void split() {
        const auto dataset = load_dataset(config_.dataset);
        const auto plan = fold_plan_for(dataset, config_);
        const auto path = output("folds.json");
        plan.save(path);
        json sizes = json::array(), prints = json::array();
        for (const auto& f : plan.folds) {
            sizes.push_back(f.size());
            prints.push_back(fingerprint(f));
        }
        summary_["fold_sizes"] = sizes;
        summary_["fold_fingerprints"] = prints;
        log("wrote " + std::to_string(plan.k) + "-fold plan to " + path.string());
    }

    void train_base() {
        const auto dataset = load_dataset(config_.dataset);
        const auto part = partition(dataset);
        const auto base = train_base_model(dataset, part, config_);
        const auto& r = base.result;
        const auto tag = "fold" + std::to_string(part.fold);
        const auto ckpt = output("base_" + tag + ".json");
        save_checkpoint(ckpt, r.best, {r.best_epoch, r.best_val_accuracy, "base"});
        std::ofstream(output("base_" + tag + "_history.json"))
            << json{{"train_loss", r.train_loss},
                    {"val_accuracy", r.val_accuracy},
                    {"initial_val_accuracy", r.initial_val_accuracy},
                    {"best_epoch", r.best_epoch},
                    {"best_val_accuracy", r.best_val_accuracy}}
                   .dump(2)
            << '\n';
        summary_["best_epoch"] = r.best_epoch;
        summary_["best_val_accuracy"] = r.best_val_accuracy;
        log("base model fold " + std::to_string(part.fold) + ": val accuracy " +
            std::to_string(r.best_val_accuracy) + " at epoch " + std::to_string(r.best_epoch));
    }

    void imprint() {
        const auto dataset = load_dataset(config_.dataset);
        const auto part = partition(dataset);
        const auto n = nshot();
        const auto layout = ExperimentLayout::from(dataset, config_);
        const auto base = load_checkpoint<float>(require(opts_.checkpoint, "--checkpoint"));
        const auto subset = nshot_subset(dataset, part, n, config_);
        const auto imprinted = imprint_from_indices(base, dataset, subset, layout.novel_class);
        const auto path = output("imprinted_n" + n.label() + "_fold" + std::to_string(part.fold) + "_init.json");
        save_checkpoint(path, imprinted, {-1, 0.0, "imprinted"});
        const auto cm = evaluate(imprinted, dataset, part.test, layout.all_classes);
        summary_["n_used"] = subset.size();
        summary_["nshot_fingerprint"] = fingerprint(subset);
        summary_["test_confusion"] = cm.to_json();
        log("imprinted novel class from " + std::to_string(subset.size()) + " examples");
    }

    void finetune() {
        const auto dataset = load_dataset(config_.dataset);
        const auto part = partition(dataset);
        const auto n = nshot();
        auto imprinted = load_checkpoint<float>(require(opts_.checkpoint, "--checkpoint"));
        write_run(finetune_imprinted(dataset, part, n, std::move(imprinted), config_));
    }

    void train_joint() {
        const auto dataset = load_dataset(config_.dataset);
        const auto plan = fold_plan(dataset);
        write_run(run_joint_pipeline(dataset, plan, fold(plan), nshot(), config_));
    }

    void evaluate_checkpoint() {
        const auto dataset = load_dataset(config_.dataset);
        const auto part = partition(dataset);
        const auto layout = ExperimentLayout::from(dataset, config_);
        const fs::path ckpt = require(opts_.checkpoint, "--checkpoint");
        CheckpointMeta meta;
        const auto params = load_checkpoint<float>(ckpt, &meta);
        std::vector<int> classes;
        if (params.spec.num_classes == layout.all_classes.size()) {
            classes = layout.all_classes;
        } else if (params.spec.num_classes == layout.base_classes.size()) {
            classes = layout.base_classes;
        } else {
            throw DataError("checkpoint predicts " + std::to_string(params.spec.num_classes) +
                            " classes; the dataset has " + std::to_string(dataset.num_classes()));
        }
        const auto cm = evaluate(params, dataset, part.test, classes);
        json sens = json::array(), prec = json::array();
        for (const auto& v : per_class_sensitivity(cm)) sens.push_back(optional_to_json(v));
        for (const auto& v : per_class_ppv(cm)) prec.push_back(optional_to_json(v));
        const json doc = {
            {"checkpoint", ckpt.string()},
            {"stage", meta.stage},
            {"fold", part.fold},
            {"class_names", dataset.class_names()},
            {"confusion", cm.to_json()},
            {"sensitivity", sens},
            {"ppv", prec},
            {"macro_sensitivity", optional_to_json(macro_average(per_class_sensitivity(cm)).value)},
            {"macro_ppv", optional_to_json(macro_average(per_class_ppv(cm)).value)},
        };
        std::ofstream(output("evaluation_" + ckpt.stem().string() + ".json")) << doc.dump(2) << '\n';
        summary_["evaluation"] = doc;
    }

    void sweep() {
        const auto dataset = load_dataset(config_.dataset);
        SweepOptions options;
        options.jobs = std::max<std::size_t>(1, opts_.jobs);
        options.checkpoint_dir = output_dir() / "checkpoints";
        fs::create_directories(*options.checkpoint_dir);
        options.progress = [this](const std::string& msg) { log(msg); };
        const auto report = nshot_sweep(dataset, config_, options);
        write_report(report, output("results.json"));
        summary_["runs"] = report.runs.size();
    }

    void report() {
        const fs::path path = require(opts_.results, "--results");
        std::ifstream in(path);
        if (!in) throw DataError("cannot open results " + path.string());
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw DataError("results " + path.string() + " is not valid JSON: " + e.what());
        }
        const auto report = MetricsReport::from_json(doc);
        const auto csv = output("summary.csv");
        const auto text = report.summary_csv();
        std::ofstream(csv, std::ios::binary) << text;
        summary_["rows"] = std::count(text.begin(), text.end(), '\n') - 1;
        log("wrote " + csv.string());
    }

    void write_report(const MetricsReport& report, const fs::path& results) {
        std::ofstream(results, std::ios::binary) << report.to_json().dump(2) << '\n';
        const auto csv = output("summary.csv");
        std::ofstream(csv, std::ios::binary) << report.summary_csv();
        log("wrote " + results.string() + " and " + csv.string());
    }

    void write_run(const RunFragment& frag) {
        const auto tag = frag.model + "_n" + frag.n.label() + "_fold" + std::to_string(frag.fold);
        save_checkpoint(output(tag + ".json"), *frag.params, {frag.best_epoch, frag.best_val_accuracy, frag.model});
        std::ofstream(output("run_" + tag + ".json"), std::ios::binary) << frag.to_json().dump(2) << '\n';
        summary_["run"] = frag.to_json();
        const auto novel = ExperimentLayout::from(load_dataset(config_.dataset), config_).novel_class;
        const auto s = sensitivity(frag.confusion, novel);
        log(tag + ": novel sensitivity " + (s ? std::to_string(*s) : std::string("undefined")));
    }

    FoldPlan fold_plan(const Dataset& dataset) {
        if (opts_.folds.empty()) return fold_plan_for(dataset, config_);
        auto plan = FoldPlan::load(opts_.folds);
        if (plan.num_examples != dataset.size()) {
            throw DataError("fold plan " + opts_.folds + " covers " + std::to_string(plan.num_examples) +
                            " examples; the dataset has " + std::to_string(dataset.size()));
        }
        return plan;
    }

    int fold(const FoldPlan& plan) {
        if (!opts_.fold) throw UsageError("--fold is required for " + opts_.subcommand);
        if (*opts_.fold >= plan.k) {
            throw UsageError("--fold " + std::to_string(*opts_.fold) + " outside [0, " + std::to_string(plan.k) + ")");
        }
        return *opts_.fold;
    }

    FoldPartition partition(const Dataset& dataset) {
        const auto plan = fold_plan(dataset);
        return make_fold_partition(dataset, plan, fold(plan), config_);
    }

    NShot nshot() {
        const auto& s = opts_.n;
        if (s.empty()) throw UsageError("--n is required for " + opts_.subcommand);
        if (s == "all") return NShot::all();
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
            throw UsageError("--n must be a positive integer or \"all\", got '" + s + "'");
        }
        return NShot::of(v);
    }

    static const std::string& require(const std::string& value, const char* flag) {
        if (value.empty()) throw UsageError(std::string(flag) + " is required");
        return value;
    }

    fs::path output_dir() {
        if (opts_.out_dir.empty()) throw UsageError("--out is required for " + opts_.subcommand);
        fs::create_directories(opts_.out_dir);
        return opts_.out_dir;
    }

    fs::path output(const std::string& name) {
        const auto path = output_dir() / name;
        outputs_.push_back(path.string());
        return path;
    }

    void log(const std::string& msg) {
        if (opts_.verbose) err_ << msg << '\n';
    }

    std::string run_tag() const {
        std::string tag = opts_.subcommand;
        if (opts_.fold) tag += "_fold" + std::to_string(*opts_.fold);
        if (!opts_.n.empty()) tag += "_n" + opts_.n;
        if (opts_.subcommand == "evaluate" && !opts_.checkpoint.empty()) {
            tag += "_" + fs::path(opts_.checkpoint).stem().string();
        }
        return tag;
    }

    json seeds() const {
        const auto s = config_.seed;
        json doc = {{"experiment", s},
                    {"synthetic", config_.dataset.synthetic.seed},
                    {"folds", derive_seed(s, {kSeedFolds})}};
        if (opts_.fold) {
            const auto f = static_cast<std::uint64_t>(*opts_.fold);
            doc["val_split"] = derive_seed(s, {kSeedValSplit, f});
            doc["init"] = derive_seed(s, {kSeedInit, f});
            doc["base_stream"] = derive_seed(s, {kSeedBaseStream, f});
        }
        return doc;
    }

    void finish() {
        const auto manifest = output("manifest_" + run_tag() + ".json");
        const json doc = {
            {"tool", "imprint"},
            {"subcommand", opts_.subcommand},
            {"arguments", args_},
            {"config", config_to_json(config_)},
            {"seeds", seeds()},
            {"inputs",
             {{"data", config_.dataset.path.empty() ? json("synthetic") : json(config_.dataset.path)},
              {"folds", opts_.folds.empty() ? json(nullptr) : json(opts_.folds)},
              {"checkpoint", opts_.checkpoint.empty() ? json(nullptr) : json(opts_.checkpoint)},
              {"results", opts_.results.empty() ? json(nullptr) : json(opts_.results)}}},
            {"outputs", outputs_},
        };
        std::ofstream(manifest, std::ios::binary) << doc.dump(2) << '\n';
        if (opts_.json_output) {
            out_ << json{{"subcommand", opts_.subcommand}, {"outputs", outputs_}, {"summary", summary_}}.dump()
                 << '\n';
        }
    }

    Options opts_;
    std::vector<std::string> args_;
    std::ostream& out_;
    std::ostream& err_;
    ExperimentConfig config_;
    json summary_;
    std::vector<std::string> outputs_;
};

const std::vector<std::pair<std::string, std::string>> kSubcommands = {
    {"synth", "Generate the synthetic dataset CSV"},
    {"split", "Write the stratified fold plan"},
    {"train-base", "Train the base-class normalized model for one fold"},
    {"imprint", "Extend a base checkpoint with an imprinted novel-class column"},
    {"finetune", "Fine-tune an imprinted checkpoint and evaluate it on the test fold"},
    {"train-joint", "Train and evaluate the joint-head baseline for one fold"},
    {"evaluate", "Test-fold confusion matrix and metrics of a checkpoint"},
    {"sweep", "Both pipelines over every n and fold; results JSON and summary CSV"},
    {"report", "Summary CSV from a results JSON"},
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options opts;
    CLI::App app{"Low-shot novel-class learning with imprinted weights", "imprint"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_option("--config", opts.config_path, "Experiment config (JSON); defaults apply when omitted");
    app.add_option("--out", opts.out_dir, "Output directory");
    app.add_option("--seed", opts.seed, "Override the experiment and synthetic data seeds");
    app.add_option("--jobs", opts.jobs, "Worker threads for sweep")->check(CLI::PositiveNumber);
    app.add_flag("--json", opts.json_output, "Print a machine-readable summary on stdout");
    app.add_flag("--verbose,-v", opts.verbose, "Progress on stderr");
    app.add_option("--data", opts.data, "Dataset CSV (overrides the config)");
    app.add_option("--folds", opts.folds, "Fold plan JSON from split");
    app.add_option("--fold", opts.fold, "Test fold index")->check(CLI::NonNegativeNumber);
    app.add_option("--n", opts.n, "Novel examples: a count or \"all\"");
    app.add_option("--checkpoint", opts.checkpoint, "Checkpoint JSON");
    app.add_option("--results", opts.results, "Results JSON from sweep");
    for (const auto& [name, help] : kSubcommands) {
        app.add_subcommand(name, help)->callback([&opts, name = name] { opts.subcommand = name; });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "imprint: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        Session session(opts, args, out, err);
        return session.dispatch();
    } catch (const UsageError& e) {
        err << "imprint: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "imprint: " << e.what() << '\n';
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        err << "imprint: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const Error& e) {
        err << "imprint: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "imprint: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "imprint: internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace imprint
