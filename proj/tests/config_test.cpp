#include <gtest/gtest.h>

#include <string>

#include "tnq/config.hpp"

using namespace tnq;

namespace {

TEST(ConfigMap, ParsesKeysCommentsAndBlanks) {
    ConfigMap cfg = ConfigMap::parse(
        "# full-line comment\n"
        "alpha = 1.5\n"
        "\n"
        "name=hello   # trailing comment\n"
        "  padded   =   7  \n");
    EXPECT_DOUBLE_EQ(cfg.get_double("alpha", 0.0), 1.5);
    EXPECT_EQ(cfg.get_string("name", ""), "hello");
    EXPECT_EQ(cfg.get_int("padded", 0), 7);
    EXPECT_EQ(cfg.get_int("absent", 42), 42);
    EXPECT_NO_THROW(cfg.reject_unknown_keys());
}

TEST(ConfigMap, RejectsMalformedLines) {
    try {
        ConfigMap::parse("ok = 1\nthis line has no equals\n");
        FAIL() << "expected parse failure";
    } catch (const InvalidArgument& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos);
        EXPECT_NE(msg.find("key=value"), std::string::npos);
    }
    EXPECT_THROW(ConfigMap::parse("= 3\n"), InvalidArgument);
}

TEST(ConfigMap, RejectsDuplicateKeys) {
    try {
        ConfigMap::parse("lr = 0.1\nlr = 0.2\n");
        FAIL() << "expected duplicate-key failure";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("duplicate key 'lr'"), std::string::npos);
    }
}

TEST(ConfigMap, RejectsBadNumbers) {
    ConfigMap cfg = ConfigMap::parse("lr = fast\nrounds = 10x\n");
    EXPECT_THROW(cfg.get_double("lr", 0.0), InvalidArgument);
    EXPECT_THROW(cfg.get_int("rounds", 0), InvalidArgument);
}

TEST(ConfigMap, ParsesDoubleLists) {
    ConfigMap cfg = ConfigMap::parse("weights = 0.5, 0.25,0.25\n");
    std::vector<double> w = cfg.get_double_list("weights");
    ASSERT_EQ(w.size(), 3u);
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], 0.25);
    EXPECT_DOUBLE_EQ(w[2], 0.25);
    EXPECT_TRUE(cfg.get_double_list("absent").empty());
}

TEST(ConfigMap, NamesUnknownKeys) {
    ConfigMap cfg = ConfigMap::parse("lr = 0.1\nlearning_rate = 0.2\n");
    (void)cfg.get_double("lr", 0.0);
    try {
        cfg.reject_unknown_keys();
        FAIL() << "expected unknown-key failure";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("unknown key 'learning_rate'"), std::string::npos);
    }
}

TEST(ParseExperiment, DefaultsMatchTheTrainConfigDefaults) {
    ExperimentConfig ec = parse_experiment("");
    ASSERT_TRUE(ec.train.scheme.has_value());
    EXPECT_EQ(*ec.train.scheme, Scheme::tnq);
    EXPECT_EQ(ec.train.bits, 3);
    EXPECT_EQ(ec.train.clients, 4);
    EXPECT_EQ(ec.train.batch, 32);
    EXPECT_DOUBLE_EQ(ec.train.lr, 0.01);
    EXPECT_DOUBLE_EQ(ec.train.momentum, 0.9);
    EXPECT_DOUBLE_EQ(ec.train.weight_decay, 0.0005);
    EXPECT_EQ(ec.train.rounds, 100);
    EXPECT_EQ(ec.train.seed, 1u);
    EXPECT_EQ(ec.train.eval_every, 1);
    EXPECT_TRUE(ec.train.weights.empty());
    EXPECT_EQ(ec.model, "logreg");
    EXPECT_EQ(ec.dataset, "laplace");
}

TEST(ParseExperiment, ReadsEveryTrainingKey) {
    ExperimentConfig ec = parse_experiment(
        "scheme = tuq\n"
        "bits = 5\n"
        "clients = 7\n"
        "batch = 0\n"
        "lr = 0.125\n"
        "momentum = 0\n"
        "weight_decay = 0.001\n"
        "rounds = 42\n"
        "seed = 99\n"
        "eval_every = 6\n"
        "weights = 0.5,0.2,0.1,0.05,0.05,0.05,0.05\n"
        "model = mlp\n"
        "hidden = 24\n"
        "dataset = digits\n"
        "data_n = 300\n"
        "test_n = 60\n"
        "data_seed = 5\n");
    ASSERT_TRUE(ec.train.scheme.has_value());
    EXPECT_EQ(*ec.train.scheme, Scheme::tuq);
    EXPECT_EQ(ec.train.bits, 5);
    EXPECT_EQ(ec.train.clients, 7);
    EXPECT_EQ(ec.train.batch, 0);
    EXPECT_DOUBLE_EQ(ec.train.lr, 0.125);
    EXPECT_DOUBLE_EQ(ec.train.momentum, 0.0);
    EXPECT_EQ(ec.train.rounds, 42);
    EXPECT_EQ(ec.train.seed, 99u);
    EXPECT_EQ(ec.train.eval_every, 6);
    EXPECT_EQ(ec.train.weights.size(), 7u);
    EXPECT_EQ(ec.model, "mlp");
    EXPECT_EQ(ec.hidden, 24);
    EXPECT_EQ(ec.dataset, "digits");
    EXPECT_EQ(ec.data_n, 300);
    EXPECT_EQ(ec.test_n, 60);
    EXPECT_EQ(ec.data_seed, 5u);
}

TEST(ParseExperiment, DsgdDisablesCompression) {
    ExperimentConfig ec = parse_experiment("scheme = dsgd\n");
    EXPECT_FALSE(ec.train.scheme.has_value());
}

TEST(ParseExperiment, RejectsBogusEnumValues) {
    EXPECT_THROW(parse_experiment("scheme = zip\n"), InvalidArgument);
    EXPECT_THROW(parse_experiment("model = boost\n"), InvalidArgument);
    EXPECT_THROW(parse_experiment("dataset = cifar\n"), InvalidArgument);
    EXPECT_THROW(parse_experiment("typo_key = 1\n"), InvalidArgument);
}

TEST(BuildDatasets, LaplaceShapes) {
    ExperimentConfig ec = parse_experiment(
        "dataset = laplace\n"
        "model = linreg\n"
        "data_dim = 10\n"
        "data_n = 40\n"
        "test_n = 8\n"
        "data_gamma = 2\n"
        "data_seed = 11\n");
    ExperimentData data = build_datasets(ec);
    EXPECT_EQ(data.train.n, 40u);
    EXPECT_EQ(data.train.dim, 10u);
    EXPECT_EQ(data.train.num_classes, 0);
    EXPECT_EQ(data.test.n, 8u);
    EXPECT_EQ(data.test.dim, 10u);

    // Same data_seed, same data.
    ExperimentData again = build_datasets(ec);
    EXPECT_EQ(data.train.features, again.train.features);
    EXPECT_EQ(data.train.labels, again.train.labels);
}

TEST(BuildDatasets, DigitsShapes) {
    ExperimentConfig ec = parse_experiment(
        "dataset = digits\n"
        "data_n = 120\n"
        "test_n = 30\n");
    ExperimentData data = build_datasets(ec);
    EXPECT_EQ(data.train.n, 120u);
    EXPECT_EQ(data.train.dim, 784u);  // 28x28 raster
    EXPECT_EQ(data.train.num_classes, 10);
    EXPECT_EQ(data.test.n, 30u);
    // Train and test come from distinct streams.
    std::vector<double> train_prefix(data.train.features.begin(),
                                     data.train.features.begin() +
                                         long(data.test.features.size()));
    EXPECT_NE(train_prefix, data.test.features);
}

TEST(BuildDatasets, IdxRequiresPaths) {
    ExperimentConfig ec = parse_experiment("dataset = idx\n");
    EXPECT_THROW(build_datasets(ec), InvalidArgument);
    ec = parse_experiment(
        "dataset = idx\n"
        "idx_images = /nonexistent/images-idx3\n"
        "idx_labels = /nonexistent/labels-idx1\n");
    EXPECT_THROW(build_datasets(ec), FormatError);
}

TEST(MakeModelSpec, MatchesDatasetShape) {
    ExperimentConfig ec = parse_experiment(
        "dataset = digits\n"
        "model = logreg\n"
        "data_n = 50\n"
        "test_n = 0\n");
    ExperimentData data = build_datasets(ec);
    ModelSpec spec = make_model_spec(ec, data.train);
    ASSERT_EQ(spec.layer_sizes().size(), 2u);
    EXPECT_EQ(spec.layer_sizes()[0], 784u * 10u);
    EXPECT_EQ(spec.layer_sizes()[1], 10u);

    ec = parse_experiment(
        "dataset = digits\n"
        "model = mlp\n"
        "hidden = 16\n"
        "data_n = 50\n"
        "test_n = 0\n");
    spec = make_model_spec(ec, data.train);
    ASSERT_EQ(spec.layer_sizes().size(), 4u);
    EXPECT_EQ(spec.layer_sizes()[0], 784u * 16u);
    EXPECT_EQ(spec.layer_sizes()[1], 16u);
    EXPECT_EQ(spec.layer_sizes()[2], 16u * 10u);
    EXPECT_EQ(spec.layer_sizes()[3], 10u);
}

TEST(MakeModelSpec, RejectsClassifierOnRegressionData) {
    ExperimentConfig ec = parse_experiment(
        "dataset = laplace\n"
        "model = logreg\n"
        "data_dim = 6\n"
        "data_n = 20\n"
        "test_n = 0\n");
    ExperimentData data = build_datasets(ec);
    try {
        make_model_spec(ec, data.train);
        FAIL() << "expected model/dataset mismatch";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("without class labels"), std::string::npos);
    }
    ec.model = "linreg";
    ModelSpec spec = make_model_spec(ec, data.train);
    ASSERT_EQ(spec.layer_sizes().size(), 1u);
    EXPECT_EQ(spec.layer_sizes()[0], 6u);
}

}  // namespace
