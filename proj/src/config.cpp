#include "imprint/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "imprint/error.hpp"

namespace imprint {

using nlohmann::json;

std::string NShot::label() const {
    return count ? std::to_string(*count) : "all";
}

bool operator<(const NShot& a, const NShot& b) {
    if (!a.count) return false;
    if (!b.count) return true;
    return *a.count < *b.count;
}

SyntheticSpec SyntheticConfig::spec() const {
    auto s = default_synthetic_spec(input_dim, base_separation, novel_offset_scale);
    s.class_names = class_names;
    s.counts = counts;
    s.stddevs = stddevs;
    s.novel_affinity = novel_affinity;
    return s;
}

namespace {

// Reads fields of one JSON object, collecting problems instead of throwing.
class ObjectReader {
public:
    ObjectReader(const json& doc, std::string path, std::vector<std::string>& errors)
        : doc_(doc), path_(std::move(path)), errors_(errors) {
        if (!doc_.is_object()) {
            fail("", "must be an object");
            valid_ = false;
        }
    }

    template <typename Check>
    void number(const char* key, double& out, Check in_range, const char* range) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number()) return fail(key, "must be a number");
        const double x = v->get<double>();
        if (!in_range(x)) return fail(key, std::string("must be in ") + range);
        out = x;
    }

    template <typename Int, typename Check>
    void integer(const char* key, Int& out, Check in_range, const char* range) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number_integer()) return fail(key, "must be an integer");
        const bool is_unsigned = v->is_number_unsigned();
        const double x = is_unsigned ? static_cast<double>(v->get<unsigned long long>())
                                     : static_cast<double>(v->get<long long>());
        if (!in_range(x)) return fail(key, std::string("must be in ") + range);
        out = is_unsigned ? static_cast<Int>(v->get<unsigned long long>()) : static_cast<Int>(v->get<long long>());
    }

    void boolean(const char* key, bool& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_boolean()) return fail(key, "must be true or false");
        out = v->get<bool>();
    }

    void string(const char* key, std::string& out, bool allow_null = false) {
        const json* v = find(key);
        if (!v) return;
        if (allow_null && v->is_null()) {
            out.clear();
            return;
        }
        if (!v->is_string()) return fail(key, "must be a string");
        out = v->get<std::string>();
    }

    const json* object(const char* key) {
        const json* v = find(key);
        if (v && !v->is_object()) {
            fail(key, "must be an object");
            return nullptr;
        }
        return v;
    }

    const json* array(const char* key) {
        const json* v = find(key);
        if (v && !v->is_array()) {
            fail(key, "must be an array");
            return nullptr;
        }
        return v;
    }

    /// Rejects keys never asked for.
    void finish() {
        if (!valid_) return;
        for (const auto& [key, value] : doc_.items()) {
            if (!seen_.count(key)) fail(key, "is not a recognized setting");
        }
    }

    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void fail(const std::string& key, const std::string& what) {
        const auto where = key.empty() ? (path_.empty() ? std::string("config") : path_) : path(key);
        errors_.push_back(where + " " + what);
    }

private:
    const json* find(const char* key) {
        seen_.insert(key);
        if (!valid_) return nullptr;
        const auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    const json& doc_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
    bool valid_ = true;
};

auto positive = [](double x) { return x > 0; };
auto non_negative = [](double x) { return x >= 0; };
auto at_least = [](double lo) { return [lo](double x) { return x >= lo; }; };

template <typename T>
void read_size_list(const json* arr, const std::string& path, std::vector<T>& out, std::vector<std::string>& errors,
                    std::size_t min_value) {
    if (!arr) return;
    std::vector<T> values;
    for (const auto& v : *arr) {
        if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
            errors.push_back(path + " entries must be integers >= " + std::to_string(min_value));
            return;
        }
        values.push_back(static_cast<T>(v.get<unsigned long long>()));
    }
    out = std::move(values);
}

void read_synthetic(const json& doc, SyntheticConfig& s, std::vector<std::string>& errors) {
    ObjectReader r(doc, "dataset.synthetic", errors);
    r.integer("input_dim", s.input_dim, at_least(1), "[1, inf)");
    r.number("novel_affinity", s.novel_affinity, [](double x) { return x >= 0 && x <= 1; }, "[0,1]");
    r.number("base_separation", s.base_separation, non_negative, "[0, inf)");
    r.number("novel_offset_scale", s.novel_offset_scale, non_negative, "[0, inf)");
    r.integer("seed", s.seed, non_negative, "[0, 2^64)");
    read_size_list(r.array("counts"), r.path("counts"), s.counts, errors, 1);
    if (const json* names = r.array("class_names")) {
        std::vector<std::string> out;
        for (const auto& n : *names) {
            if (!n.is_string() || n.get<std::string>().empty()) {
                errors.push_back(r.path("class_names") + " entries must be non-empty strings");
                out.clear();
                break;
            }
            out.push_back(n.get<std::string>());
        }
        if (!out.empty()) s.class_names = out;
    }
    if (const json* sd = r.array("stddevs")) {
        std::vector<double> out;
        for (const auto& v : *sd) {
            if (!v.is_number() || !(v.get<double>() > 0)) {
                errors.push_back(r.path("stddevs") + " entries must be positive numbers");
                out.clear();
                break;
            }
            out.push_back(v.get<double>());
        }
        if (!out.empty()) s.stddevs = out;
    }
    r.finish();
    if (s.counts.size() != 3) errors.push_back("dataset.synthetic.counts must have 3 entries");
    if (s.class_names.size() != 3) errors.push_back("dataset.synthetic.class_names must have 3 entries");
    if (s.stddevs.size() != 3) errors.push_back("dataset.synthetic.stddevs must have 3 entries");
}

}  // namespace

ConfigResult validate_config(const json& document) {
    ConfigResult result;
    auto& errors = result.errors;
    ExperimentConfig cfg;
    const json doc = document.is_null() ? json::object() : document;

    ObjectReader r(doc, "", errors);
    r.integer("epochs", cfg.epochs, non_negative, "[0, inf)");
    r.number("base_lr", cfg.base_lr, positive, "(0, inf)");
    r.number("lr_multiplier", cfg.lr_multiplier, positive, "(0, inf)");
    r.number("momentum", cfg.momentum, [](double x) { return x >= 0 && x < 1; }, "[0,1)");
    r.number("weight_decay", cfg.weight_decay, non_negative, "[0, inf)");
    r.integer("batch_size", cfg.batch_size, at_least(1), "[1, inf)");
    r.integer("k_folds", cfg.k_folds, at_least(2), "[2, inf)");
    r.number("val_frac", cfg.val_frac, [](double x) { return x > 0 && x < 1; }, "(0,1)");
    r.integer("seed", cfg.seed, non_negative, "[0, 2^64)");
    r.boolean("oversample_base", cfg.oversample_base);

    if (const json* sched = r.object("schedule")) {
        ObjectReader s(*sched, "schedule", errors);
        s.integer("step", cfg.lr_step, at_least(1), "[1, inf)");
        s.number("factor", cfg.lr_decay, [](double x) { return x > 0 && x <= 1; }, "(0,1]");
        s.finish();
    }

    if (const json* shots = r.array("n_shot")) {
        std::vector<NShot> list;
        bool ok = !shots->empty();
        if (!ok) errors.push_back("n_shot must list at least one value");
        for (const auto& v : *shots) {
            if (v.is_string() && v.get<std::string>() == "all") {
                list.push_back(NShot::all());
            } else if (v.is_number_integer() && v.get<long long>() >= 1) {
                list.push_back(NShot::of(v.get<std::size_t>()));
            } else {
                errors.push_back("n_shot entries must be positive integers or \"all\"");
                ok = false;
                break;
            }
        }
        if (ok) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
            cfg.n_shot = std::move(list);
        }
    }

    if (const json* net = r.object("network")) {
        ObjectReader n(*net, "network", errors);
        read_size_list(n.array("hidden_dims"), n.path("hidden_dims"), cfg.network.hidden_dims, errors, 1);
        n.integer("embedding_dim", cfg.network.embedding_dim, at_least(1), "[1, inf)");
        n.boolean("joint_bias", cfg.network.joint_bias);
        n.number("norm_eps", cfg.network.norm_eps, positive, "(0, inf)");
        n.finish();
    }

    if (const json* data = r.object("dataset")) {
        ObjectReader d(*data, "dataset", errors);
        d.string("path", cfg.dataset.path, /*allow_null=*/true);
        d.string("novel_class", cfg.dataset.novel_class);
        if (cfg.dataset.novel_class.empty()) errors.push_back("dataset.novel_class must not be empty");
        if (const json* synth = d.object("synthetic")) read_synthetic(*synth, cfg.dataset.synthetic, errors);
        d.finish();
    }
    r.finish();

    if (errors.empty()) result.config = std::move(cfg);
    return result;
}

ExperimentConfig parse_config(const json& document) {
    auto result = validate_config(document);
    if (!result.errors.empty()) {
        std::string message = "invalid config:";
        for (const auto& e : result.errors) message += "\n  " + e;
        throw ConfigError(message);
    }
    return *result.config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

json config_to_json(const ExperimentConfig& c) {
    json shots = json::array();
    for (const auto& n : c.n_shot) {
        if (n.count) {
            shots.push_back(*n.count);
        } else {
            shots.push_back("all");
        }
    }
    const auto& s = c.dataset.synthetic;
    return {
        {"epochs", c.epochs},
        {"base_lr", c.base_lr},
        {"lr_multiplier", c.lr_multiplier},
        {"schedule", {{"step", c.lr_step}, {"factor", c.lr_decay}}},
        {"momentum", c.momentum},
        {"weight_decay", c.weight_decay},
        {"batch_size", c.batch_size},
        {"k_folds", c.k_folds},
        {"val_frac", c.val_frac},
        {"n_shot", shots},
        {"seed", c.seed},
        {"oversample_base", c.oversample_base},
        {"network",
         {{"hidden_dims", c.network.hidden_dims},
          {"embedding_dim", c.network.embedding_dim},
          {"joint_bias", c.network.joint_bias},
          {"norm_eps", c.network.norm_eps}}},
        {"dataset",
         {{"path", c.dataset.path.empty() ? json(nullptr) : json(c.dataset.path)},
          {"novel_class", c.dataset.novel_class},
          {"synthetic",
           {{"input_dim", s.input_dim},
            {"class_names", s.class_names},
            {"counts", s.counts},
            {"stddevs", s.stddevs},
            {"novel_affinity", s.novel_affinity},
            {"base_separation", s.base_separation},
            {"novel_offset_scale", s.novel_offset_scale},
            {"seed", s.seed}}}}},
    };
}

Dataset load_dataset(const DatasetSource& source) {
    if (!source.path.empty()) return load_csv(source.path);
    return synth_generate(source.synthetic.spec(), source.synthetic.seed);
}

}  // namespace imprint
