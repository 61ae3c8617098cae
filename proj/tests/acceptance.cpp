// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "imprint/cli.hpp"
#include "imprint/grad_check.hpp"
#include "imprint/harness.hpp"
#include "imprint/imprinting.hpp"
#include "imprint/optim.hpp"
#include "imprint/sampler.hpp"
#include "support.hpp"

using namespace imprint;
using namespace imprint::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << "first failure: " << what << "; ";
        pass = pass && ok;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

void gradient_suite(Outcome& o) {
    const auto t0 = Clock::now();
    double worst = 0;
    std::size_t instances = 0;
    std::set<std::string> names;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        for (auto& c : grad_cases(seed)) {
            const auto r = grad_check<double>(c.fn, c.inputs, 1e-5, kGradFloor);
            worst = std::max(worst, r.max_rel_error);
            o.require(r.max_rel_error < 1e-4, c.name + " seed " + std::to_string(seed));
            names.insert(c.name);
            ++instances;
        }
    }
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 60, "runtime");
    o.detail << instances << " instances over " << names.size() << " cases, max rel error " << worst << ", "
             << elapsed << " s";
}

double norm_of(std::span<const float> v) {
    double s = 0;
    for (float x : v) s += double(x) * x;
    return std::sqrt(s);
}

void architecture(Outcome& o) {
    // Logit range.
    {
        Rng rng(11);
        NetworkSpec spec;
        spec.num_classes = 3;
        const auto p = init_params<float>(spec, rng);
        const auto x = random_tensor<float>({10000, 32}, rng, -50, 50);
        Tape<float> t;
        t.set_recording(false);
        const auto logits = forward_logits(p, t, x);
        bool in_range = true;
        for (float v : logits.data()) in_range = in_range && v >= -1.0f && v <= 1.0f;
        o.require(in_range, "logits outside [-1,1]");
    }

    // Unit norms along 40 epochs of training on the default synthetic data.
    double worst = 0;
    std::size_t steps = 0;
    {
        const auto cfg = parse_config(nlohmann::json::object());
        const auto data = load_dataset(cfg.dataset);
        const auto plan = fold_plan_for(data, cfg);
        const auto part = make_fold_partition(data, plan, 0, cfg);
        const auto layout = ExperimentLayout::from(data, cfg);
        TrainData td;
        td.dataset = &data;
        td.train = filter_out_class(part.train, data.labels(), layout.novel_class);
        td.val = filter_out_class(part.val, data.labels(), layout.novel_class);
        td.classes = layout.base_classes;
        Rng rng(derive_seed(cfg.seed, {kSeedInit, 0}));
        auto params = init_params<float>(network_for(cfg, data, 2, HeadKind::Normalized), rng);
        const std::vector<std::size_t> probe_idx(td.train.begin(), td.train.begin() + 64);
        const auto probe = data.gather<float>(probe_idx);
        auto opts = TrainOptions::from_config(cfg, MultiplierScope::EmbeddingAndHead, true, 1);
        opts.on_step = [&](const ModelParams<float>& p, int, std::size_t) {
            ++steps;
            Tape<float> t;
            t.set_recording(false);
            // The same normalizations the head applies in its forward pass.
            const auto w = t.l2_normalize(p.head_weight, 0);
            for (std::size_t c = 0; c < w.cols(); ++c) {
                std::vector<float> col(w.rows());
                for (std::size_t r = 0; r < w.rows(); ++r) col[r] = w.at(r, c);
                worst = std::max(worst, std::abs(norm_of(col) - 1));
            }
            const auto e = t.l2_normalize(forward_embed(p, t, probe), 1);
            for (std::size_t i = 0; i < e.rows(); ++i) {
                worst = std::max(worst, std::abs(norm_of(e.data().subspan(i * e.cols(), e.cols())) - 1));
            }
        };
        const auto r = train(std::move(params), td, opts);
        o.require(r.val_accuracy.size() == 40, "40 epochs");
    }
    o.require(worst <= 1e-6, "norm drift");

    // Joint head with zero bias equals the normalized head on normalized input.
    bool equal = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        NetworkSpec spec;
        spec.num_classes = 3;
        auto norm = init_params<float>(spec, rng);
        Tape<float> t;
        t.set_recording(false);
        norm.head_weight = t.l2_normalize(random_tensor<float>({256, 3}, rng), 0);
        auto joint = norm.clone();
        joint.spec.head_kind = HeadKind::Joint;
        joint.head_bias = Tensor<float>::zeros({3});
        const auto e = forward_embed(norm, t, random_tensor<float>({64, 32}, rng, -3, 3));
        const auto a = head_logits(norm, t, e);
        const auto b = head_logits(joint, t, t.l2_normalize(e, 1));
        for (std::size_t i = 0; i < a.numel(); ++i) equal = equal && a[i] == b[i];
    }
    o.require(equal, "joint/normalized bit equality");
    o.detail << "10^4 logits in range, max |norm-1| " << worst << " over " << steps
             << " steps, joint head bit-identical on 20 seeds";
}

void imprinting_oracle(Outcome& o) {
    double worst = 0;
    bool columns = true, self = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        NetworkSpec spec;
        const auto p = init_params<double>(spec, rng);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        const auto x = random_tensor<double>({n, 32}, rng, -2, 2);
        const auto v = compute_imprinted_vector(p, x);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < n; ++i) rows.emplace_back(x.data().begin() + i * 32, x.data().begin() + (i + 1) * 32);
        const auto ref = imprint_oracle(p, rows);
        for (std::size_t j = 0; j < ref.size(); ++j) worst = std::max(worst, std::abs(v.values[j] - ref[j]));

        const auto q = imprint_extend_head(p, v, 2);
        for (std::size_t r = 0; r < 256; ++r) {
            columns = columns && q.head_weight.at(r, 0) == p.head_weight.at(r, 0) &&
                      q.head_weight.at(r, 1) == p.head_weight.at(r, 1);
        }

        const auto one = random_tensor<double>({1, 32}, rng, -2, 2);
        const auto s = imprint_extend_head(p, compute_imprinted_vector(p, one), 2);
        Tape<double> t;
        t.set_recording(false);
        self = self && predict<double>(forward_logits(s, t, one).data()) == 2;
    }
    o.require(worst < 1e-6, "oracle mismatch");
    o.require(columns, "base columns changed");
    o.require(self, "one-shot self-classification");
    o.detail << "100 cases, max abs diff " << worst;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void pipeline_invariants(Outcome& o) {
    // Fold plans: exact partition, per-class counts within one.
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> labels;
        const int classes = std::uniform_int_distribution<int>(2, 4)(rng);
        for (int c = 0; c < classes; ++c) {
            labels.insert(labels.end(), std::uniform_int_distribution<int>(10, 300)(rng), c);
        }
        std::shuffle(labels.begin(), labels.end(), rng);
        const auto plan = stratified_kfold(labels, 10, rng());
        std::vector<int> seen(labels.size(), 0);
        for (const auto& f : plan.folds) {
            for (auto i : f) ++seen[i];
        }
        o.require(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }), "partition");
        for (int c = 0; c < classes; ++c) {
            std::size_t lo = SIZE_MAX, hi = 0;
            for (const auto& f : plan.folds) {
                const auto k = std::size_t(std::count_if(f.begin(), f.end(), [&](auto i) { return labels[i] == c; }));
                lo = std::min(lo, k);
                hi = std::max(hi, k);
            }
            o.require(hi - lo <= 1, "stratification");
        }
    }

    // n-shot subsets on every fold of the default data.
    {
        const auto cfg = parse_config(nlohmann::json::object());
        const auto data = load_dataset(cfg.dataset);
        const auto plan = fold_plan_for(data, cfg);
        for (int f = 0; f < plan.k; ++f) {
            const auto part = make_fold_partition(data, plan, f, cfg);
            for (const auto& n : {NShot::of(5), NShot::of(20), NShot::all()}) {
                for (auto i : nshot_subset(data, part, n, cfg)) {
                    o.require(!std::binary_search(part.val.begin(), part.val.end(), i) &&
                                  !std::binary_search(part.test.begin(), part.test.end(), i),
                              "n-shot overlap");
                }
            }
        }
    }

    // Oversampling over 10^4 batches.
    double chi2 = 0;
    {
        std::vector<int> labels;
        labels.insert(labels.end(), 800, 0);
        labels.insert(labels.end(), 550, 1);
        labels.insert(labels.end(), 50, 2);
        std::vector<std::size_t> idx(labels.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        BatchStream s(idx, labels, {}, 64, 10000, 77);
        std::vector<double> count(3, 0);
        while (s.has_next()) {
            for (auto i : s.next()) ++count[labels[i]];
        }
        const double expect = 64.0 * 10000 / 3;
        for (double c : count) chi2 += (c - expect) * (c - expect) / expect;
        o.require(chi2 < chi_square_999(2), "chi-square");
    }

    // Same seed, byte-identical results files.
    bool identical = true;
    {
        const auto dir = scratch_dir("acceptance_repro");
        std::ofstream(dir / "c.json") << R"({"epochs": 3, "k_folds": 3, "n_shot": [2, "all"],
            "network": {"hidden_dims": [16], "embedding_dim": 16},
            "dataset": {"synthetic": {"input_dim": 8, "counts": [90, 60, 24], "seed": 3}}})";
        for (const char* run : {"a", "b"}) {
            std::ostringstream out, err;
            const int code = run_cli({"sweep", "--config", (dir / "c.json").string(), "--out", (dir / run).string()},
                                     out, err);
            o.require(code == 0, "sweep failed: " + err.str());
        }
        for (const char* file : {"results.json", "summary.csv"}) {
            identical = identical && !slurp(dir / "a" / file).empty() && slurp(dir / "a" / file) == slurp(dir / "b" / file);
        }
        std::filesystem::remove_all(dir);
    }
    o.require(identical, "results files differ");
    o.detail << "100 fold plans exact, n-shot disjoint on 10 folds x 3 n, chi2 " << chi2 << " < "
             << chi_square_999(2) << ", results byte-identical";
}

void schedule_optimizer(Outcome& o) {
    const LrSchedule s;
    for (int e = 0; e < 40; ++e) o.require(lr_at(s, e) == 1e-3 * std::pow(0.94, e / 4), "lr_at " + std::to_string(e));

    auto p = Tensor<double>({1}, {2.0}, true);
    OptimizerState<double> st;
    st.momentum = 0.9;
    st.weight_decay = 0.1;
    st.add(p, 10.0);
    std::vector<Tensor<double>> ps{p};
    const double tol = 4 * std::numeric_limits<double>::epsilon();
    p.grad()[0] = 0.5;
    sgd_step<double>(ps, st, 0.01);
    o.require(std::abs(st.slots[0].velocity[0] + 0.07) <= tol && std::abs(p[0] - 1.93) <= tol * 2, "step 1");
    p.grad()[0] = -1.0;
    sgd_step<double>(ps, st, 0.01);
    o.require(std::abs(st.slots[0].velocity[0] - 0.0177) <= tol && std::abs(p[0] - 1.9477) <= tol * 2, "step 2");
    o.detail << "40 epochs exact, two-step trace v=" << st.slots[0].velocity[0] << " p=" << p[0];
}

void trend(Outcome& o) {
    const NShot small = NShot::of(5), large = NShot::all();
    int wins = 0;
    double gap_small = 0, gap_large = 0, slowest = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto cfg = parse_config(nlohmann::json{{"n_shot", {5, 20, "all"}}, {"seed", seed}});
        cfg.dataset.synthetic.seed = seed;
        const auto data = load_dataset(cfg.dataset);
        const auto t0 = Clock::now();
        SweepOptions opts;
        opts.jobs = jobs();
        const auto report = nshot_sweep(data, cfg, opts);
        const double elapsed = seconds_since(t0);
        slowest = std::max(slowest, elapsed);
        const auto sens = [&](const char* model, const NShot& n) {
            const auto& s = report.cell(model, n).per_class[report.novel_class].sensitivity;
            return s.mean.value_or(std::numeric_limits<double>::quiet_NaN());
        };
        const double ds = sens(kImprintedModel, small) - sens(kJointModel, small);
        const double dl = sens(kImprintedModel, large) - sens(kJointModel, large);
        wins += ds > 0;
        gap_small += ds / 10;
        gap_large += dl / 10;
        std::printf("  trend seed %llu: novel sensitivity imprinted-joint gap n=5 %+.3f, n=all %+.3f (%.1f s)\n",
                    static_cast<unsigned long long>(seed), ds, dl, elapsed);
        std::fflush(stdout);
    }
    o.require(wins >= 8, "imprinted ahead in fewer than 8 seeds");
    o.require(gap_large < gap_small, "gap did not shrink");
    o.require(slowest < 15 * 60, "sweep slower than 15 minutes");
    o.detail << "imprinted ahead at n=5 in " << wins << "/10 seeds, mean gap n=5 " << gap_small << ", n=all "
             << gap_large << ", slowest sweep " << slowest << " s on " << jobs() << " thread(s)";
}

void metrics_oracle(Outcome& o) {
    Rng rng(31);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int classes = std::uniform_int_distribution<int>(2, 5)(rng);
        const int n = std::uniform_int_distribution<int>(0, 80)(rng);
        std::uniform_int_distribution<int> lab(0, classes - 1);
        std::vector<int> truth(n), pred(n);
        for (int i = 0; i < n; ++i) {
            truth[i] = lab(rng);
            pred[i] = std::bernoulli_distribution(0.6)(rng) ? truth[i] : lab(rng);
        }
        ConfusionMatrix cm(classes);
        cm.add_all(truth, pred);
        const auto ref = recount(truth, pred, classes);
        for (int c = 0; c < classes; ++c) {
            o.require(sensitivity(cm, c) == ref.sensitivity[c], "sensitivity");
            o.require(ppv(cm, c) == ref.ppv[c], "ppv");
        }
        const auto ms = macro_average(per_class_sensitivity(cm)).value;
        const auto ref_ms = macro_oracle(ref.sensitivity);
        o.require(ms.has_value() == ref_ms.has_value() && (!ms || std::abs(*ms - *ref_ms) <= 1e-15), "macro");

        std::vector<std::optional<double>> folds;
        const int k = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < k; ++i) {
            folds.push_back(std::bernoulli_distribution(0.15)(rng)
                                ? std::nullopt
                                : std::optional<double>(std::uniform_real_distribution<double>(0, 1)(rng)));
        }
        const auto got = summarize(folds);
        const auto two = two_pass(folds);
        o.require(got.mean.has_value() == two.mean.has_value() && got.std.has_value() == two.std.has_value(),
                  "definedness");
        if (got.mean) worst = std::max(worst, std::abs(*got.mean - *two.mean));
        if (got.std) worst = std::max(worst, std::abs(*got.std - *two.std));
    }
    o.require(worst <= 1e-12, "two-pass disagreement");
    o.detail << "1000 instances exact, max aggregate diff " << worst;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"gradient suite", gradient_suite},
        {"architecture invariants", architecture},
        {"imprinting oracle", imprinting_oracle},
        {"pipeline invariants", pipeline_invariants},
        {"schedule and optimizer exactness", schedule_optimizer},
        {"trend reproduction", trend},
        {"metrics oracle", metrics_oracle},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failed += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
