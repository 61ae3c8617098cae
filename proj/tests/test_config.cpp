#include <gtest/gtest.h>

#include <algorithm>

#include "imprint/config.hpp"
#include "imprint/error.hpp"

using namespace imprint;
using nlohmann::json;

namespace {

bool has_error(const ConfigResult& r, const std::string& text) {
    return std::any_of(r.errors.begin(), r.errors.end(), [&](const std::string& e) { return e == text; });
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    const auto c = parse_config(json::object());
    EXPECT_EQ(c.epochs, 40);
    EXPECT_EQ(c.base_lr, 1e-3);
    EXPECT_EQ(c.lr_multiplier, 10.0);
    EXPECT_EQ(c.lr_step, 4);
    EXPECT_EQ(c.lr_decay, 0.94);
    EXPECT_EQ(c.momentum, 0.9);
    EXPECT_EQ(c.weight_decay, 1e-4);
    EXPECT_EQ(c.batch_size, 64u);
    EXPECT_EQ(c.k_folds, 10);
    EXPECT_EQ(c.val_frac, 0.1);
    EXPECT_EQ(c.network.embedding_dim, 256u);
    ASSERT_EQ(c.n_shot.size(), 6u);
    EXPECT_EQ(c.n_shot.front(), NShot::of(20));
    EXPECT_EQ(c.n_shot.back(), NShot::all());
    EXPECT_EQ(c.dataset.synthetic.counts, (std::vector<std::size_t>{800, 550, 50}));
    EXPECT_EQ(parse_config(nullptr).epochs, 40);
}

TEST(Config, MomentumOutOfRange) {
    const auto r = validate_config(json{{"momentum", 1.5}});
    EXPECT_FALSE(r.config.has_value());
    EXPECT_TRUE(has_error(r, "momentum must be in [0,1)"));
}

TEST(Config, NShotCanonicalized) {
    const auto c = parse_config(json{{"n_shot", {300, 20}}});
    EXPECT_EQ(c.n_shot, (std::vector<NShot>{NShot::of(20), NShot::of(300)}));
    const auto d = parse_config(json{{"n_shot", {"all", 5, 5, 1}}});
    EXPECT_EQ(d.n_shot, (std::vector<NShot>{NShot::of(1), NShot::of(5), NShot::all()}));
}

TEST(Config, EveryViolationReported) {
    const auto r = validate_config(json{{"epochs", -1},
                                        {"batch_size", 0},
                                        {"val_frac", 1.0},
                                        {"n_shot", {0}},
                                        {"schedule", {{"factor", 0}, {"bogus", 1}}},
                                        {"network", {{"embedding_dim", "wide"}}},
                                        {"dataset", {{"synthetic", {{"counts", {1, 2}}}}}},
                                        {"tyop", true}});
    EXPECT_FALSE(r.config.has_value());
    EXPECT_TRUE(has_error(r, "epochs must be in [0, inf)"));
    EXPECT_TRUE(has_error(r, "batch_size must be in [1, inf)"));
    EXPECT_TRUE(has_error(r, "val_frac must be in (0,1)"));
    EXPECT_TRUE(has_error(r, "n_shot entries must be positive integers or \"all\""));
    EXPECT_TRUE(has_error(r, "schedule.factor must be in (0,1]"));
    EXPECT_TRUE(has_error(r, "schedule.bogus is not a recognized setting"));
    EXPECT_TRUE(has_error(r, "network.embedding_dim must be an integer"));
    EXPECT_TRUE(has_error(r, "dataset.synthetic.counts must have 3 entries"));
    EXPECT_TRUE(has_error(r, "tyop is not a recognized setting"));
}

TEST(Config, ParseConfigThrowsWithAllErrors) {
    try {
        parse_config(json{{"momentum", -0.1}, {"k_folds", 1}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("momentum must be in [0,1)"), std::string::npos);
        EXPECT_NE(msg.find("k_folds must be in [2, inf)"), std::string::npos);
    }
}

TEST(Config, RoundTripsThroughJson) {
    const auto c = parse_config(json{{"epochs", 3},
                                     {"seed", 12},
                                     {"n_shot", {5, "all"}},
                                     {"network", {{"hidden_dims", {8}}, {"embedding_dim", 16}}},
                                     {"dataset", {{"synthetic", {{"seed", 4}, {"novel_affinity", 0.5}}}}}});
    const auto d = parse_config(config_to_json(c));
    EXPECT_EQ(config_to_json(d), config_to_json(c));
    EXPECT_EQ(d.network.hidden_dims, (std::vector<std::size_t>{8}));
    EXPECT_EQ(d.dataset.synthetic.seed, 4u);
}

TEST(Config, NShotLabels) {
    EXPECT_EQ(NShot::of(20).label(), "20");
    EXPECT_EQ(NShot::all().label(), "all");
    EXPECT_TRUE(NShot::of(300) < NShot::all());
    EXPECT_FALSE(NShot::all() < NShot::of(1));
}

TEST(Config, MissingFileIsConfigError) {
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}
